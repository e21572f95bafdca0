from __future__ import annotations

import math
from enum import Enum
from typing import Annotated, ClassVar, List, Literal, Optional, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.config import settings

SCHEMA_VERSION = 1


class ComplexValue(BaseModel):
    re: float
    im: float

    @classmethod
    def of(cls, value: complex) -> "ComplexValue":
        value = complex(value)
        return cls(re=value.real, im=value.imag)

    def __complex__(self) -> complex:
        return complex(self.re, self.im)


# --- measures -----------------------------------------------------------------

class Atom(BaseModel):
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    location: float = Field(alias="lambda")
    weight: float = Field(gt=0)


class ConstantDensity(BaseModel):
    """Constant density ``value`` on [lower, upper]; ``None`` ends are unbounded."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["constant"] = "constant"
    value: float = Field(gt=0)
    lower: Optional[float] = None
    upper: Optional[float] = None

    @model_validator(mode="after")
    def _check_support(self):
        lo, hi = self.support()
        if not lo < hi:
            raise ValueError(f"empty support [{lo}, {hi}]")
        return self

    closed_form: ClassVar[bool] = True

    def support(self) -> Tuple[float, float]:
        return (-math.inf if self.lower is None else self.lower,
                math.inf if self.upper is None else self.upper)

    def rho(self, lam):
        lo, hi = self.support()
        lam = np.asarray(lam, dtype=float)
        return np.where((lam >= lo) & (lam <= hi), self.value, 0.0)

    def scaled(self, c: float) -> "ConstantDensity":
        return self.model_copy(update={"value": self.value * c})


class CauchyProfileDensity(BaseModel):
    """amplitude * (width/pi) / ((lambda - center)^2 + width^2) on the whole line."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["cauchy_profile"] = "cauchy_profile"
    amplitude: float = Field(gt=0)
    center: float = 0.0
    width: float = Field(gt=0)

    closed_form: ClassVar[bool] = True

    def support(self) -> Tuple[float, float]:
        return (-math.inf, math.inf)

    def rho(self, lam):
        lam = np.asarray(lam, dtype=float)
        return self.amplitude * (self.width / math.pi) / ((lam - self.center) ** 2 + self.width ** 2)

    def scaled(self, c: float) -> "CauchyProfileDensity":
        return self.model_copy(update={"amplitude": self.amplitude * c})


class CompactTableDensity(BaseModel):
    """Piecewise-linear density through ``values`` sampled uniformly on [lower, upper]."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["compact_table"] = "compact_table"
    lower: float
    upper: float
    values: Tuple[float, ...]

    @model_validator(mode="after")
    def _check_table(self):
        if not (math.isfinite(self.lower) and math.isfinite(self.upper) and self.lower < self.upper):
            raise ValueError("compact_table needs a bounded, non-empty support")
        if len(self.values) < 2 or min(self.values) < 0:
            raise ValueError("compact_table needs at least two non-negative values")
        return self

    closed_form: ClassVar[bool] = False

    def support(self) -> Tuple[float, float]:
        return (self.lower, self.upper)

    def rho(self, lam):
        knots = np.linspace(self.lower, self.upper, len(self.values))
        return np.interp(np.asarray(lam, dtype=float), knots, self.values, left=0.0, right=0.0)

    def scaled(self, c: float) -> "CompactTableDensity":
        return self.model_copy(update={"values": tuple(v * c for v in self.values)})


DensityPiece = Annotated[
    Union[ConstantDensity, CauchyProfileDensity, CompactTableDensity],
    Field(discriminator="kind"),
]


class MeasureSpec(BaseModel):
    """A Borel measure on the real line: atoms plus registered density pieces.

    JSON form::

        {"schema": 1,
         "atoms": [{"lambda": -1.0, "weight": 0.5}],
         "density": [{"kind": "constant", "value": 0.3183}]}
    """

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    schema_version: int = Field(default=SCHEMA_VERSION, alias="schema")
    atoms: Tuple[Atom, ...] = ()
    density: Tuple[DensityPiece, ...] = ()

    @field_validator("schema_version")
    @classmethod
    def _known_schema(cls, v: int) -> int:
        if v != SCHEMA_VERSION:
            raise ValueError(f"unsupported measure schema {v}")
        return v

    @field_validator("atoms")
    @classmethod
    def _canonical_atoms(cls, atoms):
        ordered = tuple(sorted(atoms, key=lambda a: a.location))
        for left, right in zip(ordered, ordered[1:]):
            if not left.location < right.location:
                raise ValueError(f"duplicate atom location {right.location}")
        return ordered

    @model_validator(mode="after")
    def _not_empty(self):
        if not self.atoms and not self.density:
            raise ValueError("measure has neither atoms nor density pieces")
        return self

    @property
    def is_closed_form(self) -> bool:
        return all(piece.closed_form for piece in self.density)

    @property
    def atom_locations(self) -> np.ndarray:
        return np.array([a.location for a in self.atoms], dtype=float)

    @property
    def atom_weights(self) -> np.ndarray:
        return np.array([a.weight for a in self.atoms], dtype=float)

    def scaled(self, c: float) -> "MeasureSpec":
        return MeasureSpec(
            atoms=tuple(Atom(location=a.location, weight=a.weight * c) for a in self.atoms),
            density=tuple(piece.scaled(c) for piece in self.density),
        )

    def with_atoms(self, extra: List[Atom]) -> "MeasureSpec":
        return MeasureSpec(atoms=self.atoms + tuple(extra), density=self.density)

    @classmethod
    def from_atoms(cls, locations, weights) -> "MeasureSpec":
        return cls(atoms=tuple(Atom(location=float(x), weight=float(w))
                               for x, w in zip(locations, weights)))


def _quad_default(name: str):
    return lambda: getattr(settings, name)


class QuadratureConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    abs_tol: float = Field(default_factory=_quad_default("QUAD_ABS_TOL"), gt=0)
    rel_tol: float = Field(default_factory=_quad_default("QUAD_REL_TOL"), gt=0)
    max_subdivisions: int = Field(default_factory=_quad_default("QUAD_MAX_SUBDIVISIONS"), ge=1)
    tail_cutoff: float = Field(default_factory=_quad_default("QUAD_TAIL_CUTOFF"), gt=0)


# --- grids ----------------------------------------------------------------------

class GridSpec(BaseModel):
    """Rectangle in the upper half-plane, linear in Re and geometric in Im.

    ``points()`` is row-major: Im is the row index, Re the column index.
    """

    model_config = ConfigDict(frozen=True)

    re_min: float = -5.0
    re_max: float = 5.0
    im_min: float = Field(default=0.1, gt=0)
    im_max: float = 10.0
    n_re: int = Field(default=21, ge=1)
    n_im: int = Field(default=21, ge=1)

    @model_validator(mode="after")
    def _ordered(self):
        if self.re_max < self.re_min or self.im_max < self.im_min:
            raise ValueError("grid bounds are reversed")
        return self

    @classmethod
    def model_default(cls) -> "GridSpec":
        return cls(n_re=10, n_im=10)

    @classmethod
    def standard(cls) -> "GridSpec":
        """50-point grid used for the closed-form example identities."""
        return cls(re_min=-2.0, re_max=2.0, im_min=0.2, im_max=3.0, n_re=10, n_im=5)

    def re_values(self) -> np.ndarray:
        return np.linspace(self.re_min, self.re_max, self.n_re)

    def im_values(self) -> np.ndarray:
        return np.geomspace(self.im_min, self.im_max, self.n_im)

    def points(self) -> List[complex]:
        return [complex(x, y) for y in self.im_values() for x in self.re_values()]

    @property
    def size(self) -> int:
        return self.n_re * self.n_im


# --- reports --------------------------------------------------------------------

class HerglotzReport(BaseModel):
    min_im: Optional[float] = None
    symmetry_residual: float
    abs_tol: float
    evaluated: int
    poles: int
    passed: bool


class ClassificationReport(BaseModel):
    Q: float
    L: float
    kappa_hat: Optional[float] = None
    in_M: bool
    in_M_kappa: bool
    kappa_target: Optional[float] = None
    tol: float
    herglotz: Optional[HerglotzReport] = None


class AtomEstimate(BaseModel):
    location: float
    weight: float
    spread: float


class StieltjesTable(BaseModel):
    grid: List[float]
    eps_ladder: List[float]
    samples: List[List[float]]
    density: List[float]
    atoms: List[AtomEstimate]
    herglotz: bool

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame({"lambda": self.grid, "density": self.density})
        for eps, row in zip(self.eps_ladder, self.samples):
            frame[f"eps_{eps:.3g}"] = row
        return frame

    def atoms_frame(self) -> pd.DataFrame:
        return pd.DataFrame([a.model_dump() for a in self.atoms],
                            columns=["location", "weight", "spread"])


class RayProbe(BaseModel):
    alpha: float
    argument: float
    radii: List[float]
    magnitudes: List[float]
    monotone_growth: bool


class LivsicClassReport(BaseModel):
    s_at_i: ComplexValue
    vanishes_at_i: bool
    tol: float
    probes: List[RayProbe]


class ChannelReport(BaseModel):
    rank: int
    coefficient: float
    channel_norm: float


class CrossCheckReport(BaseModel):
    max_abs: float
    max_rel: float
    compared: int
    poles: int


class ModelDump(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    schema_version: int = Field(default=SCHEMA_VERSION, alias="schema")
    nodes: List[float]
    weights: List[float]
    kappa: float = Field(ge=0, lt=1)
    normalization: Optional[float] = None
    exact: bool = True

    @field_validator("schema_version")
    @classmethod
    def _known_schema(cls, v: int) -> int:
        if v != SCHEMA_VERSION:
            raise ValueError(f"unsupported model schema {v}")
        return v


class CheckResult(BaseModel):
    name: str
    status: Literal["PASS", "FAIL", "XFAIL"]
    max_residual: float
    tolerance: float
    note: str = ""


class SuiteReport(BaseModel):
    suite: str
    checks: List[CheckResult]

    @property
    def passed(self) -> bool:
        return all(c.status != "FAIL" for c in self.checks)


# --- API / CLI requests ---------------------------------------------------------

class FunctionValue(BaseModel):
    role: str
    z: ComplexValue
    value: Optional[ComplexValue] = None
    pole_flag: bool = False
    reason: str = ""


class WeylRequest(BaseModel):
    measure: MeasureSpec
    z: ComplexValue
    quadrature: Optional[QuadratureConfig] = None


class BuildModelRequest(BaseModel):
    measure: MeasureSpec
    kappa: float = Field(ge=0, lt=1)
    n: int = Field(ge=1)
    realize: bool = False


class ExampleSummary(BaseModel):
    example_id: int
    ell: float
    kappa: Optional[float] = None
    roles: List[str]
    extras: dict = {}


class TheoremResult(BaseModel):
    Q: float
    L: float
    imag_residual: float


class BiExtensionReport(BaseModel):
    kappa: float
    beta: float
    H: ComplexValue
    S_A: List[List[ComplexValue]]
    S_Astar: List[List[ComplexValue]]
    channel: Optional[ChannelReport] = None


class Command(str, Enum):
    EVAL = "eval"
    VERIFY = "verify"
    MODEL = "model"
    INVERT = "invert"
    EXAMPLES = "examples"


class Source(str, Enum):
    MEASURE = "measure-file"
    EXAMPLE = "example"
    MODEL = "model-file"
    SAMPLES = "samples-file"
    NONE = "none"


class OutputFormat(str, Enum):
    CSV = "csv"
    JSON = "json"


class JobSpec(BaseModel):
    command: Command
    source: Source = Source.NONE
    path: Optional[str] = None
    example_id: Optional[int] = Field(default=None, ge=1, le=4)
    ell: float = Field(default=1.0, gt=0)
    rho: Optional[float] = None
    mu: Optional[Tuple[float, float]] = None
    kappa: float = Field(default=0.0, ge=0, lt=1)
    role: str = "weyl"
    grid: GridSpec = GridSpec()
    output: Optional[str] = None
    format: OutputFormat = OutputFormat.CSV

    @model_validator(mode="after")
    def _source_matches_command(self):
        allowed = {
            Command.EVAL: {Source.MEASURE, Source.EXAMPLE, Source.MODEL},
            Command.MODEL: {Source.MEASURE},
            Command.INVERT: {Source.MEASURE, Source.SAMPLES},
            Command.VERIFY: {Source.NONE},
            Command.EXAMPLES: {Source.EXAMPLE, Source.NONE},
        }[self.command]
        if self.source not in allowed:
            raise ValueError(f"{self.command.value} cannot read from {self.source.value}")
        if self.source is Source.EXAMPLE and self.command is Command.EVAL and self.example_id is None:
            raise ValueError("example source needs an example id")
        if self.source in (Source.MEASURE, Source.MODEL, Source.SAMPLES) and not self.path:
            raise ValueError(f"{self.source.value} needs a path")
        return self
