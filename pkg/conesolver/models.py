from __future__ import annotations

from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from .errors import ConfigError, GridMismatchError

WEIGHT_KINDS = ("constant", "radial-profile", "angular-profile")
FLOW_OUTCOMES = ("converged_fixed_point", "decayed_to_zero", "escaped_negative", "budget_exhausted")


@dataclass(frozen=True)
class WeightFamily:
    kind: str = "constant"
    value: float = 1.0          # constant family
    epsilon: float = 0.0        # profile amplitude
    k: float = 2.0              # angular exponent

    def to_dict(self) -> Dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict) -> "WeightFamily":
        return cls(
            kind=str(data.get("kind", "constant")),
            value=float(data.get("value", 1.0)),
            epsilon=float(data.get("epsilon", 0.0)),
            k=float(data.get("k", 2.0)),
        )


@dataclass(frozen=True)
class ProblemParams:
    N: int
    p: float
    R0: float
    R1: float
    weight: WeightFamily = field(default_factory=WeightFamily)

    def problems(self) -> List[str]:
        out = []
        if int(self.N) != self.N or self.N < 3:
            out.append(f"N must be an integer >= 3 (got {self.N})")
        if not np.isfinite(self.p) or self.p <= 2:
            out.append(f"p must be > 2 (got {self.p})")
        if not (np.isfinite(self.R0) and np.isfinite(self.R1)) or not (0 < self.R0 < self.R1):
            out.append(f"radii must satisfy 0 < R0 < R1 (got R0={self.R0}, R1={self.R1})")
        if self.weight.kind not in WEIGHT_KINDS:
            out.append(f"weight kind must be one of {WEIGHT_KINDS} (got {self.weight.kind!r})")
        return out

    def validate(self) -> "ProblemParams":
        probs = self.problems()
        if probs:
            raise ConfigError(probs)
        return self

    def replace(self, **changes) -> "ProblemParams":
        data = {"N": self.N, "p": self.p, "R0": self.R0, "R1": self.R1, "weight": self.weight}
        data.update(changes)
        return ProblemParams(**data)

    def to_dict(self) -> Dict:
        return {"N": int(self.N), "p": float(self.p), "R0": float(self.R0), "R1": float(self.R1),
                "weight": self.weight.to_dict()}

    @classmethod
    def from_dict(cls, data: Dict) -> "ProblemParams":
        return cls(
            N=int(data["N"]),
            p=float(data["p"]),
            R0=float(data["R0"]),
            R1=float(data["R1"]),
            weight=WeightFamily.from_dict(data.get("weight", {})),
        )


@dataclass(frozen=True, eq=False)
class AnnulusGrid:
    """Tensor grid in (r, theta) with exact cell measures.

    r_volumes[i]      = int over radial cell i of r^(N-1) dr
    r_inv2_volumes[i] = int over radial cell i of r^(N-3) dr
    theta_volumes[j]  = int over angular cell j of cos^(N-2)(theta) dtheta
    quad_weights      = omega * outer(r_volumes, theta_volumes)
    """
    params: ProblemParams
    nr: int
    ntheta: int
    r_nodes: np.ndarray
    theta_nodes: np.ndarray
    quad_weights: np.ndarray
    r_volumes: np.ndarray
    r_inv2_volumes: np.ndarray
    theta_volumes: np.ndarray
    omega: float

    @property
    def hr(self) -> float:
        return (self.params.R1 - self.params.R0) / (self.nr - 1)

    @property
    def htheta(self) -> float:
        return np.pi / (self.ntheta - 1)

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.nr, self.ntheta)

    @property
    def center(self) -> int:
        return (self.ntheta - 1) // 2

    def mirror(self) -> np.ndarray:
        return np.arange(self.ntheta)[::-1]

    def to_dict(self) -> Dict:
        return {"params": self.params.to_dict(), "nr": self.nr, "ntheta": self.ntheta}


@dataclass(frozen=True, eq=False)
class Field:
    """Axially symmetric function sampled on the grid, values[i_r, j_theta]."""
    grid: AnnulusGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64)
        if vals.size != self.grid.nr * self.grid.ntheta:
            raise GridMismatchError(
                f"field has {vals.size} values, grid needs {self.grid.nr}x{self.grid.ntheta}")
        vals = vals.reshape(self.grid.shape)
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    def with_values(self, values: np.ndarray) -> "Field":
        return Field(self.grid, values)

    def _check(self, other: "Field") -> None:
        if other.grid is not self.grid:
            raise GridMismatchError("fields live on different grids")

    def __add__(self, other: "Field") -> "Field":
        self._check(other)
        return Field(self.grid, self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        self._check(other)
        return Field(self.grid, self.values - other.values)

    def __mul__(self, scalar: float) -> "Field":
        return Field(self.grid, float(scalar) * self.values)

    __rmul__ = __mul__

    def __neg__(self) -> "Field":
        return Field(self.grid, -self.values)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def angular_variation(self) -> float:
        """max_r (u(r, 0) - u(r, pi/2))"""
        return float(np.max(self.values[:, self.grid.center] - self.values[:, -1]))

    def to_dict(self) -> Dict:
        d = self.grid.to_dict()
        d["values"] = [float(x) for x in self.values.ravel()]
        return d


@dataclass
class ConeReport:
    min_value: float
    max_even_defect: float
    max_monotone_defect: float
    boundary_defect: float
    tau: float
    in_cone: bool

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass
class EnergyBreakdown:
    h1_sq: float
    nonlinear: float
    action: float
    nehari_residual: float

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass(frozen=True)
class FlowConfig:
    dt0: float = 0.5
    dt_min: float = 1e-6
    dt_max: float = 1.0
    phi_tol: float = 1e-6           # relative to max(1, ||eta||)
    alpha: float = 0.1
    rho_hat: float = 0.0          # <= 0 means: derive from alpha via the sample set
    t_max_time: float = 200.0
    max_steps: int = 5000
    decay_action_floor: float = -1.0
    radial_only: bool = False
    cone_tau_rel: float = 1e-8

    def problems(self) -> List[str]:
        out = []
        if not (0 < self.dt_min <= self.dt0 <= self.dt_max):
            out.append("flow steps must satisfy 0 < dt_min <= dt0 <= dt_max")
        if self.dt_max > 1.0:
            out.append("dt_max must be <= 1 (Euler steps are convex combinations of eta and T(eta))")
        if self.phi_tol <= 0:
            out.append("phi_tol must be > 0")
        if self.alpha <= 0:
            out.append("alpha must be > 0")
        if self.t_max_time <= 0 or self.max_steps < 1:
            out.append("flow budget must be positive")
        if self.cone_tau_rel < 0:
            out.append("cone_tau_rel must be >= 0")
        return out

    def validate(self) -> "FlowConfig":
        probs = self.problems()
        if probs:
            raise ConfigError(probs)
        return self

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass
class StepRecord:
    dt: float
    action_before: float
    action_after: float
    phi_sq: float

    @property
    def dissipation_defect(self) -> float:
        rate = (self.action_before - self.action_after) / self.dt
        return (rate - self.phi_sq) / self.phi_sq if self.phi_sq > 0 else 0.0


@dataclass
class FlowTrace:
    samples: List[Tuple[float, float, float, float]] = field(default_factory=list)
    steps: List[StepRecord] = field(default_factory=list)
    outcome: str = "budget_exhausted"
    final: Optional[Field] = None
    best: Optional[Field] = None
    best_index: int = 0
    rejected: int = 0
    left_sublevel: bool = False
    warning: str = ""

    @property
    def actions(self) -> np.ndarray:
        return np.array([s[1] for s in self.samples])

    @property
    def phi_norms(self) -> np.ndarray:
        return np.array([s[2] for s in self.samples])

    @property
    def h1_norms(self) -> np.ndarray:
        return np.array([s[3] for s in self.samples])

    def summary(self) -> Dict:
        last = self.samples[-1] if self.samples else (0.0, 0.0, 0.0, 0.0)
        return {"outcome": self.outcome, "steps": len(self.steps), "rejected": self.rejected,
                "time": last[0], "action": last[1], "phi_norm": last[2], "h1_norm": last[3],
                "best_index": self.best_index,
                "best_phi_norm": self.samples[self.best_index][2] if self.samples else 0.0}


@dataclass
class Refinement:
    field: Field
    phi_norm: float
    converged: bool
    iterations: int
    history: List[float] = field(default_factory=list)
    warning: str = ""


@dataclass
class Candidate:
    """One separatrix + polish run of the ground-state search."""
    label: str
    t_star: float
    outcome: str
    field: Field
    action: float
    phi_norm: float
    converged: bool
    trace: Optional[FlowTrace] = None
    warning: str = ""

    def to_dict(self) -> Dict:
        return {"label": self.label, "t_star": self.t_star, "outcome": self.outcome,
                "action": self.action, "phi_norm": self.phi_norm, "converged": self.converged}


@dataclass
class RadialSolution:
    params: ProblemParams
    r_nodes: np.ndarray
    values: np.ndarray
    residual_norm: float
    iterations: int = 0

    def rows(self) -> List[Tuple[float, float]]:
        return [(float(r), float(u)) for r, u in zip(self.r_nodes, self.values)]


@dataclass
class SpectralResult:
    N: int
    alpha1: float
    r_nodes: np.ndarray
    w: np.ndarray
    criterion: float
    second_variation_value: float = float("nan")
    inv_r2_norm: float = float("nan")
    crosscheck_ratio: float = float("nan")
    iterations: int = 0

    def to_dict(self) -> Dict:
        return {"N": self.N, "alpha1": self.alpha1, "criterion": self.criterion,
                "second_variation_value": self.second_variation_value,
                "inv_r2_norm": self.inv_r2_norm, "crosscheck_ratio": self.crosscheck_ratio,
                "iterations": self.iterations}


@dataclass
class CertificateReport:
    criterion: float
    alpha1: float
    second_variation: float
    inv_r2_norm: float
    action_rad: float
    nonradial_expected: bool
    competitor_found: bool = False
    competitor_action: float = float("nan")
    competitor_s: float = 0.0
    competitor_t: float = 1.0
    trials: List[Dict] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass
class SweepRow:
    parameter: float
    alpha1: float = float("nan")
    criterion: float = float("nan")
    second_variation: float = float("nan")
    status: str = "ok"

    @property
    def ok(self) -> bool:
        return self.status == "ok"


@dataclass
class SweepTable:
    mode: str
    rows: List[SweepRow]
    threshold: Optional[float] = None
    fit_exponent: Optional[float] = None
    fit_window: Optional[Tuple[float, float]] = None
    monotone_violations: int = 0
    sign_agreement: bool = True

    def summary(self) -> Dict:
        ok = [r for r in self.rows if r.ok]
        return {"mode": self.mode, "samples": len(self.rows), "succeeded": len(ok),
                "threshold": self.threshold, "fit_exponent": self.fit_exponent,
                "fit_window": list(self.fit_window) if self.fit_window else None,
                "monotone_violations": self.monotone_violations,
                "sign_agreement": self.sign_agreement}


@dataclass
class RunEntry:
    """A run directory found under the results root."""
    folder: Path
    rel: str
    id: str
    kind: str
    summary: Dict
    files: List[str]
