"""Simulation of the likelihood-ratio process and its reflection.

The ratio Phi is geometric with constant coefficients under every measure
used here, so paths are stepped exactly in log space; the only
discretisation errors are barrier-crossing and hitting-time overshoot at
grid resolution.  The Skorokhod reflection at the upper barrier B is a
pathwise functional of Phi (measure independent): with Z = log Phi and
R_k = max(0, max_{j<=k}(Z_j - log B)), the reflected ratio is
exp(Z_k - R_k), the randomised-stopping intensity is Gamma_k = 1 - e^{-R_k},
and the local time is L_k = B (R_k - R_0).

Randomness comes from counter-based Philox substreams keyed by
(master seed, path index, stream role), so path generation is
embarrassingly parallel and bit-reproducible regardless of execution order
or blocking.
"""

from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .model import DerivedQuantities, ModelParams, derive

# Stream roles within a path's key space.
ROLE_PATH_NOISE = 0
ROLE_UNIFORM_DRAW = 1
ROLE_REGIME_DRAW = 2

_BLOCK_START = 1024
_BLOCK_MAX = 8192


class Measure(str, Enum):
    TILTED0 = "tilted0"     # low-regime dynamics under the discounting change of measure
    TILTED1 = "tilted1"     # high-regime dynamics under the discounting change of measure
    PHYSICAL = "physical"   # real-world dynamics; the regime is drawn from the prior


def substream(seed: int, path_index: int, role: int) -> np.random.Generator:
    """Counter-based generator for one (path, role) pair.

    The 128-bit Philox key packs the 64-bit master seed with the path index
    and role, so any path's stream can be reconstructed independently of
    all others.
    """
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed={seed} outside [0, 2^64)")
    if not 0 <= path_index < 2**62:
        raise ValueError(f"path_index={path_index} out of range")
    key = (seed << 64) | (path_index << 2) | role
    return np.random.Generator(np.random.Philox(key=key))


class _StreamPool:
    """Reusable generator that is rekeyed per (path, role) substream.

    Produces streams bit-identical to :func:`substream` while skipping the
    per-construction entropy gathering, which dominates tight path loops.
    Not thread safe: use one pool per worker.
    """

    def __init__(self, seed: int):
        if not 0 <= seed < 2**64:
            raise ValueError(f"seed={seed} outside [0, 2^64)")
        self._seed = seed
        self._bg = np.random.Philox(key=0)
        self._gen = np.random.Generator(self._bg)
        self._state = self._bg.state

    def reset(self, path_index: int, role: int) -> np.random.Generator:
        st = self._state
        st["state"]["key"][0] = (path_index << 2) | role
        st["state"]["key"][1] = self._seed
        st["state"]["counter"][:] = 0
        st["buffer_pos"] = 4
        st["has_uint32"] = 0
        st["uinteger"] = 0
        self._bg.state = st
        return self._gen


@dataclass(frozen=True)
class SimConfig:
    dt: float               # time step, > 0
    horizon: float          # maximum simulated time, > dt
    n_paths: int            # number of paths, >= 1
    seed: int               # 64-bit unsigned master seed
    measure: Measure        # which dynamics drive Phi and X
    barrier: float          # reflection level B, > 0
    lower: float | None = None   # absorption level A, in (0, barrier)

    def __post_init__(self):
        object.__setattr__(self, "measure", Measure(self.measure))
        if not self.dt > 0.0:
            raise ValueError(f"dt={self.dt} must be positive")
        if not self.dt < self.horizon:
            raise ValueError(f"dt={self.dt} must be smaller than horizon={self.horizon}")
        if self.n_paths < 1:
            raise ValueError(f"n_paths={self.n_paths} must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed={self.seed} outside [0, 2^64)")
        if not self.barrier > 0.0:
            raise ValueError(f"barrier={self.barrier} must be positive")
        if self.lower is not None and not 0.0 < self.lower < self.barrier:
            raise ValueError(
                f"lower={self.lower} must lie in (0, barrier={self.barrier})")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))


def log_drifts(params: ModelParams, d: DerivedQuantities, measure: Measure,
               theta: int | None = None) -> tuple[float, float]:
    """Per-unit-time log drifts (m_phi, m_x) of Phi and X.

    m_phi is the geometric drift of Phi (the log of Phi advances by
    (m_phi - omega^2/2) dt per step); m_x is the drift of log X directly.
    """
    omega, sigma = d.omega, params.sigma
    if measure is Measure.TILTED0:
        return sigma * omega, params.mu0 + 0.5 * sigma**2
    if measure is Measure.TILTED1:
        return sigma * omega + omega**2, params.mu1 + 0.5 * sigma**2
    if theta not in (0, 1):
        raise ValueError("physical measure requires a regime draw theta in {0, 1}")
    mu = params.mu1 if theta else params.mu0
    return omega**2 * theta, mu - 0.5 * sigma**2


@dataclass(frozen=True)
class Trajectory:
    """One discretised path on the uniform grid times[k] = k dt.

    Phi and X are always filled; the reflection outputs (PhiB, Gamma, L,
    PiStar) appear after :func:`reflect`.  Arrays are never mutated after
    construction.
    """

    times: np.ndarray
    X: np.ndarray
    Phi: np.ndarray
    PhiB: np.ndarray | None = None
    Gamma: np.ndarray | None = None
    L: np.ndarray | None = None
    PiStar: np.ndarray | None = None
    theta: int | None = None        # regime label, physical measure only
    barrier: float | None = None    # reflection level used by reflect()

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])


@dataclass(frozen=True)
class StopSample:
    """Stopping data extracted from one trajectory.

    Times are None when the event was not reached before the horizon
    (censoring is explicit, never folded into a time value).
    """

    tau_a: float | None = None        # first time the reflected ratio <= lower
    gamma_time: float | None = None   # randomised stop inf{t: Gamma_t > U}
    uniform_draw: float | None = None


def simulate_phi(config: SimConfig, params: ModelParams,
                 rng: np.random.Generator, theta: int | None = None) -> Trajectory:
    """Exact log-space simulation of (X, Phi) on the full grid.

    X and Phi are driven by the same Brownian increments, so one normal
    draw per step serves both.  Under the physical measure the caller
    supplies the regime draw theta (it belongs to a separate stream role).
    """
    d = derive(params)
    m_phi, m_x = log_drifts(params, d, config.measure, theta)
    n = config.n_steps
    dt = config.dt
    xi = rng.standard_normal(n)
    z = np.empty(n + 1)
    z[0] = math.log(d.phi0)
    np.cumsum((m_phi - 0.5 * d.omega**2) * dt + d.omega * math.sqrt(dt) * xi,
              out=z[1:])
    z[1:] += z[0]
    lx = np.empty(n + 1)
    lx[0] = math.log(params.x0)
    np.cumsum(m_x * dt + params.sigma * math.sqrt(dt) * xi, out=lx[1:])
    lx[1:] += lx[0]
    return Trajectory(times=np.arange(n + 1) * dt, X=np.exp(lx), Phi=np.exp(z),
                      theta=theta)


# Largest double below 1: the stopping intensity is strictly below 1 on any
# finite path, and rounding must not destroy that.
_ONE_MINUS = math.nextafter(1.0, 0.0)


def reflect(traj: Trajectory, barrier: float) -> Trajectory:
    """Apply the pathwise Skorokhod map at the barrier.

    Fills PhiB, Gamma, L and PiStar; the input Phi is untouched, and the
    map only reads Phi, so it is independent of the measure that generated
    the path.  PhiB = Phi (1 - Gamma) holds to machine accuracy wherever
    1 - Gamma is itself representable; PhiB <= barrier holds exactly, and
    reflecting an already-reflected path is an exact no-op.
    """
    if not barrier > 0.0:
        raise ValueError(f"barrier={barrier} must be positive")
    z = np.log(traj.Phi)
    R = np.maximum.accumulate(np.maximum(z - math.log(barrier), 0.0))
    gamma = np.minimum(-np.expm1(-R), _ONE_MINUS)
    phi_b = np.minimum(traj.Phi * np.exp(-R), barrier)
    return dataclasses.replace(
        traj,
        PhiB=phi_b,
        Gamma=gamma,
        L=barrier * (R - R[0]),
        PiStar=phi_b / (1.0 + phi_b),
        barrier=barrier,
    )


def first_hit_lower(traj: Trajectory, lower: float) -> float | None:
    """First grid time with PhiB <= lower; None when censored at horizon."""
    if traj.PhiB is None:
        raise ValueError("trajectory has no reflection; call reflect() first")
    if traj.barrier is not None and not lower < traj.barrier:
        raise ValueError(f"lower={lower} must be below barrier={traj.barrier}")
    mask = traj.PhiB <= lower
    if not mask.any():
        return None
    return float(traj.times[int(np.argmax(mask))])


def draw_randomised_stop(traj: Trajectory, uniform_draw: float) -> StopSample:
    """Randomised stopping time inf{t: Gamma_t > U} for one uniform draw."""
    if traj.Gamma is None:
        raise ValueError("trajectory has no reflection; call reflect() first")
    if not 0.0 <= uniform_draw <= 1.0:
        raise ValueError(f"uniform_draw={uniform_draw} outside [0, 1]")
    mask = traj.Gamma > uniform_draw
    t = float(traj.times[int(np.argmax(mask))]) if mask.any() else None
    return StopSample(gamma_time=t, uniform_draw=uniform_draw)


def generate_trajectory(config: SimConfig, params: ModelParams,
                        path_index: int = 0) -> Trajectory:
    """Simulate one path with its substreams and reflect it at the barrier."""
    theta = None
    if config.measure is Measure.PHYSICAL:
        regime = substream(config.seed, path_index, ROLE_REGIME_DRAW)
        theta = int(regime.random() < params.prior)
    noise = substream(config.seed, path_index, ROLE_PATH_NOISE)
    traj = simulate_phi(config, params, noise, theta)
    return reflect(traj, config.barrier)


def truncate_at_first_hit(traj: Trajectory, lower: float) -> Trajectory:
    """Slice a reflected trajectory at the first PhiB <= lower crossing
    (inclusive); returns the whole trajectory when censored."""
    if traj.PhiB is None:
        raise ValueError("trajectory has no reflection; call reflect() first")
    mask = traj.PhiB <= lower
    if not mask.any():
        return traj
    k = int(np.argmax(mask))
    sliced = {
        name: (arr[: k + 1] if isinstance(arr, np.ndarray) else arr)
        for name, arr in (
            (f.name, getattr(traj, f.name)) for f in dataclasses.fields(traj)
        )
    }
    return Trajectory(**sliced)


TRAJECTORY_COLUMNS = ("t", "X", "Phi", "PhiB", "PiStar", "Gamma", "L")


def write_trajectory_csv(traj: Trajectory, fh, metadata: dict | None = None) -> None:
    """Full trajectory export: one row per grid point, 17-significant-digit
    floats, optional '# key=value' metadata lines before the header."""
    if traj.PhiB is None:
        raise ValueError("trajectory has no reflection; call reflect() first")
    for key, val in (metadata or {}).items():
        fh.write(f"# {key}={_fmt(val)}\n")
    fh.write(",".join(TRAJECTORY_COLUMNS) + "\n")
    cols = (traj.times, traj.X, traj.Phi, traj.PhiB, traj.PiStar, traj.Gamma, traj.L)
    for row in zip(*cols):
        fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def _fmt(val) -> str:
    return f"{val:.17g}" if isinstance(val, float) else str(val)


# -- streaming first-passage functionals (Monte Carlo backend) --------------

@dataclass(frozen=True)
class PathFunctionals:
    """Per-path outputs of the streaming kernel, in path-index order.

    For censored paths tau is NaN and the terminal fields hold the state at
    the horizon; stieltjes then covers [0, horizon] only.  r_pay_end is the
    accumulated log reflection of the payoff barrier, so the surviving
    probability mass is 1 - Gamma = exp(-r_pay_end) (kept in log space to
    stay accurate when Gamma is close to 1).
    """

    tau: np.ndarray          # hitting time of the lower threshold, NaN if censored
    censored: np.ndarray     # bool mask
    phi_refl_end: np.ndarray  # reflected ratio at tau (or at horizon)
    r_pay_end: np.ndarray    # payoff-barrier log reflection at tau (or at horizon)
    stieltjes: np.ndarray    # sum of e^{rate t} [Phi] dGamma over [0, tau] (or [0, T])

    @property
    def n_paths(self) -> int:
        return self.tau.size


def path_functionals(params: ModelParams, phi0: float, config: SimConfig, *,
                     discount_rate: float, weight_phi: bool = False,
                     barrier_pay: float | None = None,
                     threads: int = 1) -> PathFunctionals:
    """Simulate config.n_paths paths and accumulate discounted functionals.

    The hitting time is measured on the reflection at config.barrier; the
    Gamma used in the Stieltjes sum reflects at barrier_pay (defaults to
    config.barrier), which lets a deviating reflection level be priced
    against the equilibrium stopping rule with common random numbers.
    With weight_phi the sum is of e^{rate t} Phi_t dGamma_t, else of
    e^{rate t} dGamma_t; both include the possible time-zero jump of Gamma.

    Results are bit-identical for any thread count: each path consumes only
    its own substream and lands in its own slot.
    """
    if config.lower is None:
        raise ValueError("config.lower is required for first-passage functionals")
    if not phi0 > 0.0:
        raise ValueError(f"phi0={phi0} must be positive")
    if config.measure is Measure.PHYSICAL:
        raise ValueError("streaming functionals support the tilted measures only")
    bpay = config.barrier if barrier_pay is None else barrier_pay
    if not bpay > 0.0:
        raise ValueError(f"barrier_pay={bpay} must be positive")

    d = derive(params)
    m_phi, _ = log_drifts(params, d, config.measure)
    omega, dt = d.omega, config.dt
    c_drift = (m_phi - 0.5 * omega**2) * dt
    c_noise = omega * math.sqrt(dt)
    z0 = math.log(phi0)
    z_hit = math.log(config.barrier)
    z_pay = math.log(bpay)
    z_lo = math.log(config.lower)
    k_max = config.n_steps
    rate = discount_rate
    n = config.n_paths

    tau = np.full(n, np.nan)
    censored = np.zeros(n, dtype=bool)
    phi_end = np.empty(n)
    r_end = np.empty(n)
    stj = np.empty(n)
    same_barrier = z_pay == z_hit

    def worker(p_lo: int, p_hi: int) -> None:
        pool = _StreamPool(config.seed)
        for p in range(p_lo, p_hi):
            z = z0
            r_hit = max(0.0, z - z_hit)
            r_pay = r_hit if same_barrier else max(0.0, z - z_pay)
            g_prev = -math.expm1(-r_pay)
            sti = phi0 * g_prev if weight_phi else g_prev
            if z - r_hit <= z_lo:
                tau[p] = 0.0
                phi_end[p] = math.exp(z - r_hit)
                r_end[p] = r_pay
                stj[p] = sti
                continue
            rng = pool.reset(p, ROLE_PATH_NOISE)
            k_done = 0
            block = _BLOCK_START
            done = False
            while k_done < k_max:
                nb = min(block, k_max - k_done)
                zb = c_drift + c_noise * rng.standard_normal(nb)
                zb.cumsum(out=zb)
                zb += z
                rh = np.maximum.accumulate(np.maximum(zb - z_hit, r_hit))
                hit = zb - rh <= z_lo
                j = int(hit.argmax()) if hit.any() else -1
                end = j + 1 if j >= 0 else nb
                # Gamma only moves where the payoff reflection grows; the
                # Stieltjes weights are needed on that sparse index set only.
                rp = rh[:end] if same_barrier else \
                    np.maximum.accumulate(np.maximum(zb[:end] - z_pay, r_pay))
                rp_prev = np.empty(end)
                rp_prev[0] = r_pay
                rp_prev[1:] = rp[:-1]
                idx = (rp > rp_prev).nonzero()[0]
                if idx.size:
                    # e^{rate t}[Phi](e^{-R_{k-1}} - e^{-R_k}) in a form that
                    # neither cancels nor overflows for large R or rate*t.
                    lw = rate * dt * (k_done + 1.0 + idx) - rp_prev[idx]
                    if weight_phi:
                        lw += zb[idx]
                    sti += float((np.exp(lw)
                                  * -np.expm1(rp_prev[idx] - rp[idx])).sum())
                if j >= 0:
                    tau[p] = (k_done + j + 1) * dt
                    phi_end[p] = math.exp(zb[j] - rh[j])
                    r_end[p] = rp[j]
                    stj[p] = sti
                    done = True
                    break
                z = zb[-1]
                r_hit = rh[-1]
                r_pay = rp[-1]
                k_done += nb
                block = min(block * 2, _BLOCK_MAX)
            if not done:
                censored[p] = True
                phi_end[p] = math.exp(z - r_hit)
                r_end[p] = r_pay
                stj[p] = sti

    _parallel_over_paths(worker, n, threads)
    return PathFunctionals(tau=tau, censored=censored, phi_refl_end=phi_end,
                           r_pay_end=r_end, stieltjes=stj)


def multires_hit_discounts(params: ModelParams, phi0: float, config: SimConfig,
                           dt_list, *, discount_rate: float,
                           threads: int = 1) -> list[tuple[np.ndarray, np.ndarray]]:
    """e^{rate tau} samples at several grid resolutions on shared noise.

    All entries of dt_list must be integer multiples of min(dt_list); the
    coarser grids subsample the same Brownian path as the finest one, so
    the runs are coupled pathwise (proper common random numbers for a
    dt-refinement study).  config.dt is ignored; horizon, n_paths, seed,
    measure, barrier and lower are taken from config.  Returns one
    (samples, censored) pair per entry of dt_list, censored samples set
    to 0.
    """
    if config.lower is None:
        raise ValueError("config.lower is required")
    if config.measure is Measure.PHYSICAL:
        raise ValueError("streaming functionals support the tilted measures only")
    dts = [float(v) for v in dt_list]
    dt_f = min(dts)
    strides = []
    for v in dts:
        s = v / dt_f
        if abs(s - round(s)) > 1e-9:
            raise ValueError(f"dt={v} is not an integer multiple of {dt_f}")
        strides.append(int(round(s)))

    d = derive(params)
    m_phi, _ = log_drifts(params, d, config.measure)
    omega = d.omega
    z0 = math.log(phi0)
    z_bar = math.log(config.barrier)
    z_lo = math.log(config.lower)
    n = config.n_paths
    n_res = len(dts)
    k_max = int(round(config.horizon / dt_f))
    stride_lcm = math.lcm(*strides)
    nb_full = stride_lcm * 1024
    # trim the horizon to a common multiple of every stride so block starts
    # stay aligned with every coarse grid
    k_max -= k_max % stride_lcm

    out = [np.zeros(n) for _ in dts]
    cens = [np.zeros(n, dtype=bool) for _ in dts]

    def worker(p_lo: int, p_hi: int) -> None:
        pool = _StreamPool(config.seed)
        for p in range(p_lo, p_hi):
            if z0 - max(0.0, z0 - z_bar) <= z_lo:
                for r in range(n_res):
                    out[r][p] = 1.0
                continue
            rng = pool.reset(p, ROLE_PATH_NOISE)
            zw = 0.0   # running value of (m - omega^2/2) t + omega W_t
            r_state = [max(0.0, z0 - z_bar)] * n_res
            done = [False] * n_res
            k_done = 0
            while k_done < k_max and not all(done):
                nb = min(nb_full, k_max - k_done)
                incr = (m_phi - 0.5 * omega**2) * dt_f \
                    + omega * math.sqrt(dt_f) * rng.standard_normal(nb)
                np.cumsum(incr, out=incr)
                zb = z0 + zw + incr
                for r, s in enumerate(strides):
                    if done[r]:
                        continue
                    zc = zb[s - 1::s]
                    rc = np.maximum.accumulate(np.maximum(zc - z_bar, r_state[r]))
                    hit = zc - rc <= z_lo
                    if hit.any():
                        j = int(np.argmax(hit))
                        t_hit = (k_done + (j + 1) * s) * dt_f
                        out[r][p] = math.exp(discount_rate * t_hit)
                        done[r] = True
                    else:
                        r_state[r] = rc[-1]
                zw += float(incr[-1])
                k_done += nb
            for r in range(n_res):
                if not done[r]:
                    cens[r][p] = True

    _parallel_over_paths(worker, n, threads)
    return list(zip(out, cens))


def _parallel_over_paths(worker, n_paths: int, threads: int) -> None:
    """Run worker(p_lo, p_hi) over a partition of range(n_paths).

    Workers write to disjoint slots of preallocated arrays, so the merge is
    a no-op and the partition does not affect results.
    """
    if threads is None:
        threads = 1
    if threads <= 1 or n_paths < 2:
        worker(0, n_paths)
        return
    chunk = max(1, -(-n_paths // (threads * 4)))
    ranges = [(lo, min(lo + chunk, n_paths)) for lo in range(0, n_paths, chunk)]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        for _ in ex.map(lambda r: worker(*r), ranges):
            pass
