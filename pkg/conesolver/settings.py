"""Run configuration: one JSON (or TOML) document per run, validated before any compute."""
from __future__ import annotations

import copy
import json
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

from .errors import ConfigError
from .models import FlowConfig, ProblemParams, WeightFamily
from .utils import write_json

PSI_CHOICES = ("bump", "radial", "seeds")

DEFAULT_CONFIG: Dict = {
    "problem": {"N": 3, "p": 4.0, "R0": 1.0, "R1": 2.0,
                "weight": {"kind": "constant", "value": 1.0, "epsilon": 0.0, "k": 2.0}},
    "grid": {"nr": 65, "ntheta": 65, "n1d": 513},
    "flow": {"dt0": 0.5, "dt_min": 1e-6, "dt_max": 1.0, "alpha": 0.1, "rho_hat": 0.0,
             "t_max_time": 200.0, "max_steps": 5000, "decay_action_floor": -1.0, "radial_only": False},
    "tolerances": {"cone_tau_rel": 1e-8, "phi_tol": 1e-6, "newton_tol": 1e-10, "bisect_tol": 1e-6,
                   "radial_tol": 1e-10, "cg_tol": 1e-12},
    "output_dir": "runs/latest",
    "seed": 0,
    "workers": 1,
    "solve": {"psi": "bump", "seed_count": 3},
    "sweep": {"mode": "vary_p", "range": [3.0, 20.0], "samples": 18, "ntheta_check": 33, "n1d": 257},
    "verify": {"suites": None, "fault_inject": None, "nr": 33, "ntheta": 33, "samples": 50},
}


@dataclass
class Tolerances:
    cone_tau_rel: float = 1e-8
    phi_tol: float = 1e-6
    newton_tol: float = 1e-10
    bisect_tol: float = 1e-6
    radial_tol: float = 1e-10
    cg_tol: float = 1e-12


@dataclass
class RunConfig:
    problem: ProblemParams
    nr: int
    ntheta: int
    n1d: int
    flow: FlowConfig
    tolerances: Tolerances
    output_dir: str
    seed: int = 0
    workers: int = 1
    solve: Dict = field(default_factory=dict)
    sweep: Dict = field(default_factory=dict)
    verify: Dict = field(default_factory=dict)
    document: Dict = field(default_factory=dict, repr=False)


def merge_document(base: Dict, user: Dict, path: str = "") -> List[str]:
    """Overlay user onto base in place; returns the unknown keys."""
    unknown = []
    for key, value in user.items():
        where = f"{path}{key}"
        if key not in base:
            unknown.append(where)
        elif isinstance(base[key], dict):
            if not isinstance(value, dict):
                unknown.append(f"{where} (expected a table)")
                continue
            unknown += merge_document(base[key], value, where + ".")
        else:
            base[key] = value
    return unknown


def _read(path: Path) -> Dict:
    text = path.read_text(encoding="utf-8")
    try:
        if path.suffix.lower() == ".toml":
            return tomllib.loads(text)
        return json.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc


def _positive(section: Dict, name: str, where: str, problems: List[str]) -> None:
    v = section.get(name)
    if not isinstance(v, (int, float)) or isinstance(v, bool) or not v > 0:
        problems.append(f"{where}.{name} must be a positive number (got {v!r})")


def _integer(v, lo: int) -> bool:
    return isinstance(v, int) and not isinstance(v, bool) and v >= lo


def from_document(doc: Dict) -> RunConfig:
    problems: List[str] = []
    pr = doc["problem"]
    try:
        problem = ProblemParams(N=pr["N"], p=float(pr["p"]), R0=float(pr["R0"]), R1=float(pr["R1"]),
                                weight=WeightFamily.from_dict(pr["weight"]))
        problems += problem.problems()
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"problem section is malformed: {exc}") from exc

    g = doc["grid"]
    if not _integer(g["nr"], 3):
        problems.append(f"grid.nr must be an integer >= 3 (got {g['nr']!r})")
    if not _integer(g["ntheta"], 3) or g["ntheta"] % 2 == 0:
        problems.append(f"grid.ntheta must be an odd integer >= 3 (got {g['ntheta']!r})")
    if not _integer(g["n1d"], 16):
        problems.append(f"grid.n1d must be an integer >= 16 (got {g['n1d']!r})")

    tol = doc["tolerances"]
    for name in tol:
        _positive(tol, name, "tolerances", problems)
    tolerances = Tolerances(**{k: float(v) for k, v in tol.items() if isinstance(v, (int, float))})

    fl = dict(doc["flow"])
    try:
        flow = FlowConfig(phi_tol=tolerances.phi_tol, cone_tau_rel=tolerances.cone_tau_rel,
                          max_steps=int(fl.pop("max_steps")), radial_only=bool(fl.pop("radial_only")),
                          **{k: float(v) for k, v in fl.items()})
        problems += flow.problems()
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"flow section is malformed: {exc}") from exc

    if not _integer(doc["workers"], 1):
        problems.append(f"workers must be an integer >= 1 (got {doc['workers']!r})")
    if not _integer(doc["seed"], 0):
        problems.append(f"seed must be a nonnegative integer (got {doc['seed']!r})")
    if not isinstance(doc["output_dir"], str) or not doc["output_dir"]:
        problems.append("output_dir must be a nonempty path")

    solve = doc["solve"]
    if solve["psi"] not in PSI_CHOICES:
        problems.append(f"solve.psi must be one of {PSI_CHOICES} (got {solve['psi']!r})")
    if not _integer(solve["seed_count"], 1):
        problems.append("solve.seed_count must be an integer >= 1")

    sw = doc["sweep"]
    if sw["mode"] not in ("vary_p", "vary_R"):
        problems.append(f"sweep.mode must be vary_p or vary_R (got {sw['mode']!r})")
    rng = sw["range"]
    if not (isinstance(rng, list) and len(rng) == 2 and all(isinstance(x, (int, float)) for x in rng)
            and rng[0] <= rng[1]):
        problems.append(f"sweep.range must be [lo, hi] with lo <= hi (got {rng!r})")
    if not _integer(sw["samples"], 1):
        problems.append("sweep.samples must be an integer >= 1")
    if not _integer(sw["ntheta_check"], 3) or sw["ntheta_check"] % 2 == 0:
        problems.append("sweep.ntheta_check must be an odd integer >= 3")
    if not _integer(sw["n1d"], 16):
        problems.append("sweep.n1d must be an integer >= 16")

    ver = doc["verify"]
    if ver["suites"] is not None and not (isinstance(ver["suites"], list)
                                          and all(isinstance(s, str) for s in ver["suites"])):
        problems.append("verify.suites must be null or a list of suite names")
    if ver["fault_inject"] not in (None, "angular-sign"):
        problems.append(f"verify.fault_inject must be null or 'angular-sign' (got {ver['fault_inject']!r})")
    if not _integer(ver["nr"], 3) or not _integer(ver["ntheta"], 3) or ver["ntheta"] % 2 == 0:
        problems.append("verify.nr must be >= 3 and verify.ntheta an odd integer >= 3")
    if not _integer(ver["samples"], 1):
        problems.append("verify.samples must be an integer >= 1")

    if problems:
        raise ConfigError(problems)
    return RunConfig(problem=problem, nr=g["nr"], ntheta=g["ntheta"], n1d=g["n1d"], flow=flow,
                     tolerances=tolerances, output_dir=doc["output_dir"], seed=doc["seed"],
                     workers=doc["workers"], solve=dict(solve), sweep=dict(sw), verify=dict(ver),
                     document=doc)


def load_config(path: Optional[Path] = None, overrides: Optional[Dict] = None) -> RunConfig:
    """Defaults, then the file at `path`, then `overrides` (CLI flags); validated as a whole."""
    doc = copy.deepcopy(DEFAULT_CONFIG)
    unknown: List[str] = []
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        data = _read(path)
        if not isinstance(data, dict):
            raise ConfigError("config document must be a table at top level")
        unknown += merge_document(doc, data)
    if overrides:
        unknown += merge_document(doc, overrides)
    if unknown:
        raise ConfigError([f"unknown config key {k}" for k in unknown])
    return from_document(doc)


def save_config(path: Path, cfg: RunConfig) -> Path:
    return write_json(Path(path), cfg.document)
