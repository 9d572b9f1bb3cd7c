from fractions import Fraction

import pytest

from ifsresonance.config import Command, apply_overrides, parse_config
from ifsresonance.errors import ConfigError


def test_minimal_config():
    cfg = parse_config('command = "sumdim"\na = "1/9"\nb = "1/3"\n')
    assert cfg.command is Command.SUMDIM
    assert cfg.exact
    assert cfg.scalar(cfg.a) == Fraction(1, 9)
    assert (cfg.k_min, cfg.k_max) == (6, 12)

def test_float_mode():
    cfg = parse_config('mode = "float"\ncommand = "dim"\na = 0.25\n')
    assert cfg.scalar(cfg.a) == 0.25
    assert isinstance(cfg.scalar(cfg.a), float)

def test_float_rejected_in_exact_mode():
    with pytest.raises(ConfigError) as excinfo:
        parse_config('command = "dim"\na = 0.25\n')
    assert excinfo.value.messages[0].startswith("a:")

def test_errors_carry_key_paths():
    with pytest.raises(ConfigError) as excinfo:
        parse_config('command = "dim"\na = "3/5"\nepsilon = 2.0\n')
    paths = sorted(message.split(":")[0] for message in excinfo.value.messages)
    assert paths == ["a", "epsilon"]

def test_missing_command():
    with pytest.raises(ConfigError) as excinfo:
        parse_config('a = "1/3"\n')
    assert "available subcommands" in str(excinfo.value)
    assert "sumdim" in str(excinfo.value)

def test_unknown_key():
    with pytest.raises(ConfigError) as excinfo:
        parse_config('command = "dim"\nalpha = 3\n')
    assert excinfo.value.messages[0].startswith("alpha:")

def test_syntax_error_location():
    with pytest.raises(ConfigError) as excinfo:
        parse_config('command = "dim"\na = \n')
    assert excinfo.value.line == 2
    assert excinfo.value.column is not None
    record = excinfo.value.to_record()
    assert record["error"] == "config"
    assert record["line"] == 2

def test_short_scale_window():
    with pytest.raises(ConfigError):
        parse_config('command = "dim"\na = "1/3"\nk_min = 6\nk_max = 7\n')

def test_overrides():
    cfg = parse_config('command = "dim"\na = "1/3"\nk_max = 12\n', ["a=1/4", "k_max=9", "planar.n=5"])
    assert cfg.scalar(cfg.a) == Fraction(1, 4)
    assert cfg.k_max == 9
    assert cfg.planar is not None and cfg.planar.n == 5

def test_nested_override_keeps_section():
    merged = apply_overrides({"planar": {"n": 3, "zeta": 0.2}}, ["planar.n=4"])
    assert merged == {"planar": {"n": 4, "zeta": 0.2}}

def test_bad_override():
    with pytest.raises(ConfigError):
        apply_overrides({}, ["k_max"])

def test_explicit_systems():
    cfg = parse_config('command = "resonance"\n[left]\nratios = ["1/3", "1/3"]\ntranslations = ["0", "2/3"]\n')
    assert cfg.left is not None
    assert cfg.scalars(cfg.left.ratios) == [Fraction(1, 3)] * 2
    with pytest.raises(ConfigError):
        parse_config('command = "resonance"\n[left]\nratios = ["1/3"]\ntranslations = ["0", "2/3"]\n')
