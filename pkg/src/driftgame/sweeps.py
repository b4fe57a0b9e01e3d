"""Parameter sweeps, value curves, and sample-path exports.

Reproduces the numerical study as data files: threshold curves under
one-parameter sweeps, the uninformed player's value curve over the prior,
and seeded sample paths of the adjusted belief with its stopping intensity.
Outputs are CSV plus a machine-readable plot manifest (JSON); no rendering
happens here.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .equilibrium import build_solution
from .model import DomainError, InvalidParameters, ModelParams, belief_to_ratio
from .simulate import Measure, SimConfig, Trajectory, first_hit_lower, \
    generate_trajectory, truncate_at_first_hit

SWEEPABLE = ("mu0", "mu1", "sigma", "eps")

# Sweep defaults bracketing the base case: log-spaced for the scale
# parameters (sigma, eps), linear otherwise, 25 points each.  The mu0 range
# extends to -6 so that the interior maximum of the lower boundary
# (near mu0 = -3.3 at the base case) falls inside the default grid.
DEFAULT_SWEEP_POINTS = 25
_DEFAULT_RANGES = {
    "mu0": (-6.0, -0.1, False),
    "mu1": (0.25, 3.0, False),
    "sigma": (0.2, 2.0, True),
    "eps": (0.02, 0.5, True),
}


def default_sweep_values(parameter: str, points: int = DEFAULT_SWEEP_POINTS) -> np.ndarray:
    lo, hi, log = _DEFAULT_RANGES[parameter]
    return np.geomspace(lo, hi, points) if log else np.linspace(lo, hi, points)


@dataclass(frozen=True)
class SweepSpec:
    parameter: str          # one of SWEEPABLE
    values: np.ndarray      # ordered list of values to substitute
    base: ModelParams

    def __post_init__(self):
        if self.parameter not in SWEEPABLE:
            raise DomainError(
                f"parameter={self.parameter!r} not in {SWEEPABLE}")
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))


@dataclass(frozen=True)
class SweepRow:
    parameter: str
    value: float
    A: float      # NaN unless status == "ok"
    B: float
    a: float
    b: float
    status: str   # "ok" | "invalid" | "error: ..."


@dataclass(frozen=True)
class SweepResult:
    rows: tuple

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])

    @property
    def ok(self) -> np.ndarray:
        return np.array([r.status == "ok" for r in self.rows])


def run_sweep(spec: SweepSpec) -> SweepResult:
    """One equilibrium solve per value, in deterministic order.

    Values that violate the parameter assumptions are skipped and flagged
    "invalid"; solver failures are recorded per row and the sweep continues.
    """
    rows = []
    for v in spec.values:
        v = float(v)
        try:
            params = dataclasses.replace(spec.base, **{spec.parameter: v})
        except InvalidParameters:
            rows.append(SweepRow(spec.parameter, v, math.nan, math.nan,
                                 math.nan, math.nan, "invalid"))
            continue
        try:
            sol = build_solution(params)
        except Exception as exc:  # per-row failure, sweep continues
            rows.append(SweepRow(spec.parameter, v, math.nan, math.nan,
                                 math.nan, math.nan, f"error: {exc}"))
            continue
        rows.append(SweepRow(spec.parameter, v, sol.A, sol.B, sol.a, sol.b, "ok"))
    return SweepResult(rows=tuple(rows))


@dataclass(frozen=True)
class ValueCurve:
    """Per-unit-of-x values along a prior grid: the uninformed player's
    value (1-pi) V0 + pi V1 next to the informed player's costs."""

    pi: np.ndarray
    value_uninformed: np.ndarray
    V0: np.ndarray
    V1: np.ndarray


def value_curves(params: ModelParams, pi_grid) -> ValueCurve:
    pi = np.asarray(pi_grid, dtype=float)
    if np.any(pi <= 0.0) or np.any(pi >= 1.0) or np.any(np.isnan(pi)):
        raise DomainError("pi grid must lie in (0, 1)")
    sol = build_solution(params)
    phi = np.array([belief_to_ratio(p) for p in pi])
    v0 = sol.V0(phi)
    v1 = sol.V1(phi)
    return ValueCurve(pi=pi, value_uninformed=(1.0 - pi) * v0 + pi * v1,
                      V0=v0, V1=v1)


def sample_path_figure(params: ModelParams, seed: int, config: SimConfig,
                       path_index: int = 0) -> tuple[Trajectory, dict]:
    """One physical-measure path of (PiStar, Gamma) until the stop.

    Returns the trajectory truncated at the first crossing of the lower
    threshold (the whole grid when censored) together with metadata
    carrying the probability-coordinate boundaries a and b.
    """
    if Measure(config.measure) is not Measure.PHYSICAL:
        raise ValueError("sample paths use the physical measure")
    sol = build_solution(params)
    cfg = dataclasses.replace(config, seed=seed, barrier=sol.B, lower=sol.A)
    traj = generate_trajectory(cfg, params, path_index)
    tau = first_hit_lower(traj, sol.A)
    meta = {
        "a": sol.a,
        "b": sol.b,
        "pi": params.prior,
        "seed": seed,
        "path_index": path_index,
        "censored": tau is None,
    }
    return truncate_at_first_hit(traj, sol.A), meta


# -- data-file writers -------------------------------------------------------

def _g17(v) -> str:
    return f"{v:.17g}" if isinstance(v, float) else str(v)


def _write_csv(fh, header, rows, metadata=None) -> None:
    for key, val in (metadata or {}).items():
        fh.write(f"# {key}={_g17(val)}\n")
    fh.write(",".join(header) + "\n")
    for row in rows:
        fh.write(",".join(_g17(v) for v in row) + "\n")


def write_sweep_csv(result: SweepResult, fh, metadata=None) -> None:
    _write_csv(fh, ("param", "value", "A", "B", "a", "b", "status"),
               ((r.parameter, r.value, r.A, r.B, r.a, r.b, r.status)
                for r in result.rows), metadata)


def write_values_csv(curve: ValueCurve, fh, metadata=None) -> None:
    _write_csv(fh, ("pi", "value_uninformed", "V0", "V1"),
               zip(curve.pi.tolist(), curve.value_uninformed.tolist(),
                   curve.V0.tolist(), curve.V1.tolist()), metadata)


def write_path_csv(traj: Trajectory, fh, metadata=None) -> None:
    """Figure-style export: (t, PiStar, Gamma) rows until the stop."""
    _write_csv(fh, ("t", "PiStar", "Gamma"),
               zip(traj.times.tolist(), traj.PiStar.tolist(),
                   traj.Gamma.tolist()), metadata)


def plot_manifest(title: str, xlabel: str, ylabel: str, series: list[dict],
                  reference_lines: list[dict]) -> dict:
    """Machine-readable plot description with a fixed key set."""
    return {"title": title, "xlabel": xlabel, "ylabel": ylabel,
            "series": series, "reference_lines": reference_lines}


def sweep_manifest(result: SweepResult, data_file: str) -> dict:
    param = result.rows[0].parameter if result.rows else ""
    return plot_manifest(
        title=f"optimal boundaries vs {param}",
        xlabel=param, ylabel="boundary (probability coordinate)",
        series=[{"name": "a", "file": data_file, "x": "value", "y": "a"},
                {"name": "b", "file": data_file, "x": "value", "y": "b"}],
        reference_lines=[])


def path_manifest(meta: dict, data_file: str) -> dict:
    return plot_manifest(
        title="adjusted belief and stopping intensity",
        xlabel="t", ylabel="value",
        series=[{"name": "PiStar", "file": data_file, "x": "t", "y": "PiStar"},
                {"name": "Gamma", "file": data_file, "x": "t", "y": "Gamma"}],
        reference_lines=[{"axis": "y", "value": meta["a"], "label": "a"},
                         {"axis": "y", "value": meta["b"], "label": "b"}])
