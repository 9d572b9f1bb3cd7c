"""ifsresonance package."""
