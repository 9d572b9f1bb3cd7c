"""
Experiment configuration: a TOML document validated by a pydantic model.

Rationals are written as strings ("1/3") and parsed exactly; floats are
accepted in float mode only. Every problem is reported at once, each with its
key path.
"""
import re
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from enum import Enum
from fractions import Fraction
from typing import Any, Dict, List, Literal, Optional, Sequence, Union

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    StrictFloat,
    StrictInt,
    ValidationError,
    ValidationInfo,
    field_validator,
    model_validator,
)

from ifsresonance.errors import ConfigError, IFSResonanceError
from ifsresonance.ifs.scalar import Scalar, to_scalar

RationalInput = Union[StrictInt, StrictFloat, str]


class Command(str, Enum):
    RESONANCE = "resonance"
    DIM = "dim"
    SUMDIM = "sumdim"
    MARSTRAND = "marstrand"
    TOWER = "tower"
    HOMOGENIZE = "homogenize"
    DROP = "drop"
    PROJECT = "project"
    RENDER = "render"


COMMANDS = [c.value for c in Command]


def _check_rational(value: Optional[RationalInput], info: ValidationInfo) -> Optional[RationalInput]:
    if value is None:
        return value
    exact = info.data.get("mode", "exact") == "exact"
    try:
        to_scalar(value, exact)
    except IFSResonanceError as e:
        raise ValueError(str(e)) from e
    return value


class SystemConfig(BaseModel):
    """A one-dimensional system {r_i·x + t_i}."""
    model_config = ConfigDict(extra="forbid")

    ratios: List[RationalInput] = Field(min_length=1)
    translations: List[RationalInput] = Field(min_length=1)

    @model_validator(mode="after")
    def same_length(self) -> "SystemConfig":
        if len(self.ratios) != len(self.translations):
            raise ValueError("ratios and translations differ in length")
        return self


class MapConfig(BaseModel):
    """ζ·R_{π·theta_over_pi}·(reflection)·z + translation."""
    model_config = ConfigDict(extra="forbid")

    scale: float = Field(gt=0, lt=1)
    theta_over_pi: float = 0.0
    reflect: bool = False
    translation: List[float] = Field(min_length=2, max_length=2)


class PlanarConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n: int = Field(default=3, ge=1)
    zeta: float = Field(default=0.3, gt=0, lt=1)
    theta_over_pi: float = 0.0
    reflect: bool = False
    maps: Optional[List[MapConfig]] = None
    center: List[float] = Field(default=[0.0, 0.0], min_length=2, max_length=2)
    radius: float = Field(default=1.0, gt=0)


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    mode: Literal["exact", "float"] = "exact"
    command: Command
    seed: int = 0
    workers: Optional[int] = Field(default=None, ge=1)

    # systems: central Cantor ratios or explicit maps
    a: Optional[RationalInput] = None
    b: Optional[RationalInput] = None
    left: Optional[SystemConfig] = None
    right: Optional[SystemConfig] = None
    s: Optional[RationalInput] = None

    # box counting
    k_min: int = Field(default=6, ge=0)
    k_max: int = Field(default=12, ge=0)
    base: Optional[RationalInput] = None
    skip_coarse: int = Field(default=2, ge=0)

    # resonance
    q_max: int = Field(default=10**6, ge=1)
    tol: float = Field(default=1e-12, gt=0)

    # marstrand and tower
    k: int = Field(default=4, ge=1)
    epsilon: float = Field(default=0.1, gt=0, lt=1)
    theta_steps: int = Field(default=4096, ge=8)
    refine: bool = False
    energy_k_min: int = Field(default=3, ge=1)
    energy_k_max: int = Field(default=7, ge=1)
    tau: float = Field(default=0.0, ge=0)
    m: int = Field(default=3, ge=1)
    levels: int = Field(default=8, ge=0)
    scale_steps: Optional[int] = Field(default=None, ge=8)
    weyl_steps: int = Field(default=100_000, ge=1)
    materialize: bool = False

    # homogenize
    walk: int = Field(default=10, ge=1)
    prune: Optional[RationalInput] = None
    subcritical: bool = False

    # drop
    xi: Optional[RationalInput] = None
    a_exponents: Optional[List[int]] = None
    b_exponents: Optional[List[int]] = None
    translations: Optional[List[RationalInput]] = None
    translations_prime: Optional[List[RationalInput]] = None

    # planar
    planar: Optional[PlanarConfig] = None
    xi_steps: int = Field(default=64, ge=4)
    orient_depth: int = Field(default=1, ge=1)

    # render
    target: Literal["product", "planar", "tower"] = "product"
    depth: int = Field(default=3, ge=0)

    # budgets
    max_cells: Optional[int] = Field(default=None, ge=1)
    max_pairs: Optional[int] = Field(default=None, ge=1)
    max_tree_nodes: Optional[int] = Field(default=None, ge=1)

    check_scalars = field_validator("a", "b", "s", "base", "xi", "prune")(_check_rational)

    @field_validator("translations", "translations_prime")
    @classmethod
    def check_translations(
        cls, values: Optional[List[RationalInput]], info: ValidationInfo
    ) -> Optional[List[RationalInput]]:
        for value in values or []:
            _check_rational(value, info)
        return values

    @field_validator("a", "b")
    @classmethod
    def check_cantor(cls, value: Optional[RationalInput], info: ValidationInfo) -> Optional[RationalInput]:
        if value is not None:
            ratio = to_scalar(value, info.data.get("mode", "exact") == "exact")
            if not 0 < ratio < Fraction(1, 2):
                raise ValueError(f"central Cantor ratio must lie in (0, 1/2), got {value}")
        return value

    @field_validator("xi")
    @classmethod
    def check_xi(cls, value: Optional[RationalInput], info: ValidationInfo) -> Optional[RationalInput]:
        if value is not None and not 0 < to_scalar(value, info.data.get("mode", "exact") == "exact") < 1:
            raise ValueError(f"base ξ must lie in (0, 1), got {value}")
        return value

    @field_validator("a_exponents", "b_exponents")
    @classmethod
    def check_exponents(cls, values: Optional[List[int]]) -> Optional[List[int]]:
        if values is not None and (len(values) < 2 or any(e < 1 for e in values)):
            raise ValueError("need at least two positive integer exponents")
        return values

    @model_validator(mode="after")
    def check_window(self) -> "ExperimentConfig":
        if self.k_max - self.k_min + 1 < 3:
            raise ValueError(f"scale window k_min..k_max = {self.k_min}..{self.k_max} has fewer than 3 scales")
        return self

    @property
    def exact(self) -> bool:
        return self.mode == "exact"

    def scalar(self, value: RationalInput) -> Scalar:
        return to_scalar(value, self.exact)

    def scalars(self, values: Sequence[RationalInput]) -> List[Scalar]:
        return [self.scalar(v) for v in values]


def _parse_value(text: str) -> Any:
    try:
        return tomllib.loads(f"value = {text}")["value"]
    except tomllib.TOMLDecodeError:
        return text


def apply_overrides(data: Dict[str, Any], overrides: Sequence[str]) -> Dict[str, Any]:
    """Merge `key=value` (dotted keys for sections) over the parsed document."""
    merged = dict(data)
    for item in overrides:
        if "=" not in item:
            raise ConfigError([f"override {item!r} is not of the form key=value"])
        key, text = item.split("=", 1)
        path = key.strip().split(".")
        target = merged
        for part in path[:-1]:
            nested = target.get(part)
            target[part] = dict(nested) if isinstance(nested, dict) else {}
            target = target[part]
        target[path[-1]] = _parse_value(text.strip())
    return merged


def _location(error: tomllib.TOMLDecodeError) -> tuple:
    line, column = getattr(error, "lineno", None), getattr(error, "colno", None)
    if line is None:
        match = re.search(r"line (\d+), column (\d+)", str(error))
        if match:
            line, column = int(match.group(1)), int(match.group(2))
    return line, column


def _messages(error: ValidationError) -> List[str]:
    messages = []
    for item in error.errors():
        path = ".".join(str(p) for p in item["loc"]) or "<root>"
        message = item["msg"]
        if item["loc"] == ("command",) and item["type"] == "missing":
            message = f"missing subcommand; available subcommands: {', '.join(COMMANDS)}"
        messages.append(f"{path}: {message}")
    return messages


def parse_config(text: str = "", overrides: Sequence[str] = ()) -> ExperimentConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        line, column = _location(e)
        raise ConfigError([f"syntax error: {e}"], line, column) from e
    data = apply_overrides(data, overrides)
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(_messages(e)) from e
