"""Run configuration (TOML) and structured output.

A run file has four tables; unknown keys anywhere are rejected.

    [problem]
    alpha = 1.5
    centres = [{pos = [1.0, 0.0, 0.0], mass = 1.0}, {pos = [-1.0, 0.0, 0.0], mass = 1.0}]
    xi_minus = [1.0, 2.0, 2.0]      # normalized on load
    xi_plus = [2.0, 1.0, -2.0]

    [schedule]
    R = [20.0]                      # explicit radii, or
    K_multiples = [10, 20, 40]      # radii as multiples of the certified K

    [solver]
    tol_grad = 1e-8
    max_iters = 4000
    n_nodes = 256
    loop_size = 16
    beta_schedule = [...]           # optional, non-increasing, ending at 0
    seed = 0

    [output]
    dir = "out"
    verbosity = 1
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import tomli
import tomli_w

from .errors import InvalidConfiguration
from .potential import CentreConfiguration
from .solver import SolverOptions

_PROBLEM_KEYS = {"alpha", "centres", "xi_minus", "xi_plus"}
_SCHEDULE_KEYS = {"R", "K_multiples"}
_SOLVER_KEYS = {"tol_grad", "max_iters", "n_nodes", "loop_size", "beta_schedule", "seed"}
_OUTPUT_KEYS = {"dir", "verbosity"}
_TABLES = {"problem": _PROBLEM_KEYS, "schedule": _SCHEDULE_KEYS, "solver": _SOLVER_KEYS, "output": _OUTPUT_KEYS}


@dataclass
class RunConfig:
    problem: CentreConfiguration
    xi_minus: np.ndarray
    xi_plus: np.ndarray
    radii: list = field(default_factory=list)
    K_multiples: list = field(default_factory=list)
    solver: SolverOptions = field(default_factory=SolverOptions)
    out_dir: Path = Path("out")
    verbosity: int = 1

    def schedule(self, K: float) -> list[float]:
        """Radii of the run, resolving ``K_multiples`` against the certified ``K``."""
        return sorted(set(self.radii) | {m * K for m in self.K_multiples})

    def to_dict(self) -> dict:
        d = {
            "problem": {
                **self.problem.to_dict(),
                "xi_minus": self.xi_minus.tolist(),
                "xi_plus": self.xi_plus.tolist(),
            },
            "schedule": {},
            "solver": {
                "tol_grad": self.solver.tol_grad,
                "max_iters": self.solver.max_iters,
                "n_nodes": self.solver.n_nodes,
                "loop_size": self.solver.loop_size,
                "beta_schedule": list(self.solver.beta_schedule),
                "seed": self.solver.seed,
            },
            "output": {"dir": str(self.out_dir), "verbosity": self.verbosity},
        }
        if self.radii:
            d["schedule"]["R"] = list(self.radii)
        if self.K_multiples:
            d["schedule"]["K_multiples"] = list(self.K_multiples)
        return d


def _unit(v, name) -> np.ndarray:
    try:
        a = np.asarray(v, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InvalidConfiguration(f"{name} must be a numeric 3-vector") from exc
    if a.shape != (3,) or not np.all(np.isfinite(a)):
        raise InvalidConfiguration(f"{name} must be a finite 3-vector")
    n = np.linalg.norm(a)
    if n == 0:
        raise InvalidConfiguration(f"{name} must be non-zero")
    return a / n


def _positive_list(v, name) -> list[float]:
    if not isinstance(v, list) or not v:
        raise InvalidConfiguration(f"{name} must be a non-empty list")
    out = []
    for x in v:
        if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x) or x <= 0:
            raise InvalidConfiguration(f"{name} entries must be positive numbers")
        out.append(float(x))
    return out


def parse_run_config(doc: dict, base_dir: Path | None = None) -> RunConfig:
    """Validate a parsed TOML document and build a ``RunConfig``."""
    for table, value in doc.items():
        if table not in _TABLES:
            raise InvalidConfiguration(f"unknown table [{table}]")
        if not isinstance(value, dict):
            raise InvalidConfiguration(f"[{table}] must be a table")
        extra = set(value) - _TABLES[table]
        if extra:
            raise InvalidConfiguration(f"unknown keys in [{table}]: {', '.join(sorted(extra))}")
    if "problem" not in doc:
        raise InvalidConfiguration("missing [problem] table")
    p = doc["problem"]
    missing = _PROBLEM_KEYS - set(p)
    if missing:
        raise InvalidConfiguration(f"missing keys in [problem]: {', '.join(sorted(missing))}")
    centres = p["centres"]
    if not isinstance(centres, list) or not centres:
        raise InvalidConfiguration("centres must be a non-empty array of tables")
    for c in centres:
        if not isinstance(c, dict) or set(c) != {"pos", "mass"}:
            raise InvalidConfiguration("each centre needs exactly the keys pos and mass")
    alpha = p["alpha"]
    if isinstance(alpha, bool) or not isinstance(alpha, (int, float)):
        raise InvalidConfiguration("alpha must be a number")
    try:
        problem = CentreConfiguration.from_centres(float(alpha), centres)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InvalidConfiguration):
            raise
        raise InvalidConfiguration(f"bad centres: {exc}") from exc
    xi_minus, xi_plus = _unit(p["xi_minus"], "xi_minus"), _unit(p["xi_plus"], "xi_plus")

    s = doc.get("schedule", {})
    radii = _positive_list(s["R"], "R") if "R" in s else []
    mults = _positive_list(s["K_multiples"], "K_multiples") if "K_multiples" in s else []

    so = doc.get("solver", {})
    kwargs = {}
    for key in ("max_iters", "n_nodes", "loop_size", "seed"):
        if key in so:
            v = so[key]
            if isinstance(v, bool) or not isinstance(v, int) or v < 0:
                raise InvalidConfiguration(f"{key} must be a non-negative integer")
            kwargs[key] = v
    if "tol_grad" in so:
        v = so["tol_grad"]
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not v > 0:
            raise InvalidConfiguration("tol_grad must be positive")
        kwargs["tol_grad"] = float(v)
    if "beta_schedule" in so:
        b = so["beta_schedule"]
        if not isinstance(b, list) or not b or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in b):
            raise InvalidConfiguration("beta_schedule must be a list of numbers")
        b = [float(x) for x in b]
        if any(x < 0 for x in b) or any(y > x for x, y in zip(b, b[1:])) or b[-1] != 0.0:
            raise InvalidConfiguration("beta_schedule must be non-negative, non-increasing and end at 0")
        kwargs["beta_schedule"] = tuple(b)
    if kwargs.get("n_nodes", 16) < 16:
        raise InvalidConfiguration("n_nodes must be at least 16")
    if kwargs.get("loop_size", 8) < 8:
        raise InvalidConfiguration("loop_size must be at least 8")
    options = SolverOptions(**kwargs)

    o = doc.get("output", {})
    out_dir = Path(o.get("dir", "out"))
    if base_dir is not None and not out_dir.is_absolute():
        out_dir = base_dir / out_dir
    verbosity = o.get("verbosity", 1)
    if isinstance(verbosity, bool) or not isinstance(verbosity, int):
        raise InvalidConfiguration("verbosity must be an integer")
    return RunConfig(problem, xi_minus, xi_plus, radii, mults, options, out_dir, verbosity)


def load_run_config(path) -> RunConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            doc = tomli.load(fh)
    except tomli.TOMLDecodeError as exc:
        raise InvalidConfiguration(f"{path}: {exc}") from exc
    return parse_run_config(doc, path.parent)


# ---------------------------------------------------------------------------
# output


def _plain(obj):
    """Recursively convert numpy scalars/arrays and drop ``None`` for TOML."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items() if v is not None}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj if v is not None]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_toml(doc: dict, path) -> None:
    with open(path, "wb") as fh:
        tomli_w.dump(_plain(doc), fh)


def read_toml(path) -> dict:
    with open(path, "rb") as fh:
        return tomli.load(fh)


TRAJECTORY_HEADER = ["t", "x", "y", "z", "vx", "vy", "vz", "h_residual"]


def write_csv(path, header, columns) -> None:
    """Columns written with ``repr`` so that parsing them back is exact."""
    cols = [np.asarray(c, dtype=float) for c in columns]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in zip(*cols):
            w.writerow([repr(float(v)) for v in row])


def write_trajectory_csv(traj, path, config=None) -> None:
    if traj.residual is None:
        if config is None:
            raise ValueError("trajectory has no residual; pass the configuration")
        traj.compute_residual(config)
    write_csv(path, TRAJECTORY_HEADER, [traj.t, *traj.x.T, *traj.v.T, traj.residual])


def read_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array([[float(v) for v in r] for r in rows[1:]])
