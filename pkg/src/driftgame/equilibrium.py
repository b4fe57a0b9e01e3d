"""Closed-form Nash equilibrium of the asymmetric-information stopping game.

The equilibrium is a pair of thresholds 0 < A < B in the likelihood-ratio
coordinate: the uninformed player stops when the reflected adjusted ratio
first drops to A, the informed player randomises so the adjusted ratio
reflects at B.  Both value functions are linear combinations of the two
power solutions phi^beta1, phi^beta2 of an Euler ODE, with beta1 in (0,1)
and beta2 < 0 the roots of a quadratic.  A is tied to B through the ratio
delta = A/B, the unique root in (0,1) of a strictly increasing function h,
after which B has a closed form.  Everything here is exact up to the 1-D
root find for delta; no ODE integration is involved.

All values are per unit of the asset level x, which factors out of the game.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import DomainError, ModelParams, derive

# Root tolerance for delta = A/B (bisection in z; see solve_threshold_ratio).
DELTA_TOL = 1e-12

# QVI residual tolerances: closed-form solution, limited by floating point.
ODE_RTOL = 1e-8        # relative, for the three Euler ODE residuals
BOUNDARY_ATOL = 1e-10  # absolute, for boundary/obstacle/sign conditions


class BracketFailure(RuntimeError):
    """The sign change bracketing the threshold-ratio root was not found."""


@dataclass(frozen=True)
class Exponents:
    """Roots of q(beta) = (omega^2/2) beta (beta-1) + sigma omega beta + mu0.

    q(0) = mu0 < 0 and q(1) = mu1 > 0 force beta1 in (0,1) and beta2 < 0.
    """

    beta1: float   # root in (0, 1)
    beta2: float   # negative root


def characteristic_poly(params: ModelParams, beta: float) -> float:
    """q(beta) for the Euler ODE of the discounted ratio process."""
    omega = derive(params).omega
    return 0.5 * omega**2 * beta * (beta - 1.0) + params.sigma * omega * beta + params.mu0


def compute_exponents(params: ModelParams) -> Exponents:
    """Both real roots of q, via the numerically stable quadratic formula."""
    omega = derive(params).omega
    a = 0.5 * omega**2
    b = params.sigma * omega - a
    c = params.mu0
    disc = b * b - 4.0 * a * c
    # disc = b^2 - 4ac with ac < 0, so disc > 0 always.
    s = math.sqrt(disc)
    qf = -0.5 * (b + math.copysign(s, b))
    r1, r2 = qf / a, c / qf
    beta1, beta2 = max(r1, r2), min(r1, r2)
    assert 0.0 < beta1 < 1.0 and beta2 < 0.0, (beta1, beta2)
    tol = 1e-12 * max(1.0, abs(params.mu0))
    assert abs(characteristic_poly(params, beta1)) < tol
    assert abs(characteristic_poly(params, beta2)) < tol
    return Exponents(beta1=beta1, beta2=beta2)


def threshold_ratio_equation(exps: Exponents, eps: float, z) -> float:
    """h(z); its unique root in (0,1) is the threshold ratio delta = A/B.

    h is strictly increasing on (0,1), tends to -inf at 0+, and
    h(1) = eps (beta1 - beta2) / (1 + eps) > 0.
    """
    b1, b2 = exps.beta1, exps.beta2
    return (1.0 - b2) * z ** (b1 - 1.0) + (b1 - 1.0) * z ** (b2 - 1.0) \
        - (b1 - b2) / (1.0 + eps)


def _h_signed(exps: Exponents, eps: float, z: float) -> float:
    """h(z), resolving overflow of z^(beta2-1) by the sign it diverges to:
    the dominating term carries the factor (beta1 - 1)."""
    try:
        return threshold_ratio_equation(exps, eps, z)
    except OverflowError:
        return -math.inf if exps.beta1 < 1.0 else math.inf


def solve_threshold_ratio(exps: Exponents, eps: float) -> float:
    """Root of h by bracketed bisection, safe because h is monotone.

    The lower bracket endpoint is shrunk geometrically until h goes
    negative; bisection then runs to machine resolution in z, which is well
    inside the 1e-12 z-tolerance and keeps |h(delta)| <= 1e-12 as well.
    """
    hi = 1.0
    lo = 0.5
    while not _h_signed(exps, eps, lo) < 0.0:
        lo *= 0.1
        if lo < 1e-300:
            raise BracketFailure(
                f"no sign change of h on (0, 1) for exponents {exps}: "
                "parameters are corrupted"
            )
    while True:
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if _h_signed(exps, eps, mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return mid


def compute_upper_threshold(exps: Exponents, eps: float, delta: float) -> float:
    """Closed-form reflecting threshold B given the ratio delta = A/B."""
    if not 0.0 < delta < 1.0:
        raise DomainError(f"delta={delta} outside (0, 1)")
    b1, b2 = exps.beta1, exps.beta2
    num = b1 * b2 * (delta ** -b2 - delta ** -b1)
    den = (1.0 + eps) * (b1 - b2) \
        - b2 * (b1 - 1.0) * delta ** (1.0 - b2) \
        + b1 * (b2 - 1.0) * delta ** (1.0 - b1)
    return num / den


@dataclass(frozen=True)
class EquilibriumSolution:
    """Thresholds, exponents and value-function coefficients.

    The informed player's cost in the high regime is
    V1 = C1 phi^(beta1-1) + C2 phi^(beta2-1) on (A,B); the uninformed
    player's (scaled) value is V = D1 phi^beta1 + D2 phi^beta2 there, and
    V0 = V - phi V1.  Outside (A,B) all three extend piecewise (constant,
    affine, or obstacle).  Evaluators accept scalars or arrays and return
    per-unit-of-x values.
    """

    params: ModelParams
    exps: Exponents
    delta: float   # A / B, in (0, 1)
    A: float       # lower stopping threshold, > 0
    B: float       # upper reflecting threshold, > A
    C1: float
    C2: float
    D1: float
    D2: float

    @property
    def a(self) -> float:
        """Lower threshold in probability coordinates, A/(1+A)."""
        return self.A / (1.0 + self.A)

    @property
    def b(self) -> float:
        """Upper threshold in probability coordinates, B/(1+B)."""
        return self.B / (1.0 + self.B)

    @property
    def omega(self) -> float:
        return derive(self.params).omega

    @property
    def V_B(self) -> float:
        """Continuation value at the reflecting threshold."""
        return self.D1 * self.B**self.exps.beta1 + self.D2 * self.B**self.exps.beta2

    # -- evaluation helpers ------------------------------------------------

    def _split(self, phi):
        p = np.asarray(phi, dtype=float)
        if np.any(p <= 0.0) or np.any(np.isnan(p)):
            raise DomainError("phi must be positive")
        lo = p <= self.A
        hi = p >= self.B
        return p, lo, hi, ~(lo | hi)

    @staticmethod
    def _ret(p, out, phi):
        return float(out) if np.isscalar(phi) or np.ndim(phi) == 0 else out

    def _refuse_kinks(self, p):
        if np.any(p == self.A) or np.any(p == self.B):
            raise DomainError(
                "second derivative is undefined exactly at the thresholds "
                f"A={self.A!r}, B={self.B!r}"
            )

    def V(self, phi):
        """Game value per unit x (uninformed player's scaled value)."""
        b1, b2 = self.exps.beta1, self.exps.beta2
        p, lo, hi, mid = self._split(phi)
        out = np.empty_like(p)
        out[lo] = 1.0 + p[lo]
        out[mid] = self.D1 * p[mid]**b1 + self.D2 * p[mid]**b2
        out[hi] = self.V_B + (1.0 + self.params.eps) * (p[hi] - self.B)
        return self._ret(p, out, phi)

    def V_prime(self, phi):
        """dV/dphi; the one-sided inside value at the thresholds (V is C1)."""
        b1, b2 = self.exps.beta1, self.exps.beta2
        p, lo, hi, mid = self._split(phi)
        ins = lo & (p == self.A) | hi & (p == self.B) | mid
        out = np.empty_like(p)
        out[lo] = 1.0
        out[hi] = 1.0 + self.params.eps
        out[ins] = b1 * self.D1 * p[ins]**(b1 - 1.0) + b2 * self.D2 * p[ins]**(b2 - 1.0)
        return self._ret(p, out, phi)

    def V_second(self, phi):
        """d2V/dphi2; refused exactly at A and B where V is not C2."""
        b1, b2 = self.exps.beta1, self.exps.beta2
        p, lo, hi, mid = self._split(phi)
        self._refuse_kinks(p)
        out = np.zeros_like(p)
        out[mid] = b1 * (b1 - 1.0) * self.D1 * p[mid]**(b1 - 2.0) \
            + b2 * (b2 - 1.0) * self.D2 * p[mid]**(b2 - 2.0)
        return self._ret(p, out, phi)

    def V1(self, phi):
        """Informed player's cost per unit x in the high-drift regime."""
        b1, b2 = self.exps.beta1, self.exps.beta2
        p, lo, hi, mid = self._split(phi)
        out = np.empty_like(p)
        out[lo] = 1.0
        out[mid] = self.C1 * p[mid]**(b1 - 1.0) + self.C2 * p[mid]**(b2 - 1.0)
        out[hi] = 1.0 + self.params.eps
        return self._ret(p, out, phi)

    def V1_prime(self, phi):
        b1, b2 = self.exps.beta1, self.exps.beta2
        p, lo, hi, mid = self._split(phi)
        ins = lo & (p == self.A) | hi & (p == self.B) | mid
        out = np.zeros_like(p)
        out[ins] = (b1 - 1.0) * self.C1 * p[ins]**(b1 - 2.0) \
            + (b2 - 1.0) * self.C2 * p[ins]**(b2 - 2.0)
        return self._ret(p, out, phi)

    def V1_second(self, phi):
        b1, b2 = self.exps.beta1, self.exps.beta2
        p, lo, hi, mid = self._split(phi)
        self._refuse_kinks(p)
        out = np.zeros_like(p)
        out[mid] = (b1 - 1.0) * (b1 - 2.0) * self.C1 * p[mid]**(b1 - 3.0) \
            + (b2 - 1.0) * (b2 - 2.0) * self.C2 * p[mid]**(b2 - 3.0)
        return self._ret(p, out, phi)

    def V0(self, phi):
        """Informed player's cost per unit x in the low-drift regime,
        V0 = V - phi V1; constant above B by the reflection condition."""
        b1, b2 = self.exps.beta1, self.exps.beta2
        p, lo, hi, mid = self._split(phi)
        out = np.empty_like(p)
        out[lo] = 1.0
        out[mid] = (self.D1 - self.C1) * p[mid]**b1 + (self.D2 - self.C2) * p[mid]**b2
        out[hi] = self.V_B - (1.0 + self.params.eps) * self.B
        return self._ret(p, out, phi)

    def V0_prime(self, phi):
        b1, b2 = self.exps.beta1, self.exps.beta2
        p, lo, hi, mid = self._split(phi)
        ins = lo & (p == self.A) | hi & (p == self.B) | mid
        out = np.zeros_like(p)
        out[ins] = b1 * (self.D1 - self.C1) * p[ins]**(b1 - 1.0) \
            + b2 * (self.D2 - self.C2) * p[ins]**(b2 - 1.0)
        return self._ret(p, out, phi)

    def V0_second(self, phi):
        b1, b2 = self.exps.beta1, self.exps.beta2
        p, lo, hi, mid = self._split(phi)
        self._refuse_kinks(p)
        out = np.zeros_like(p)
        out[mid] = b1 * (b1 - 1.0) * (self.D1 - self.C1) * p[mid]**(b1 - 2.0) \
            + b2 * (b2 - 1.0) * (self.D2 - self.C2) * p[mid]**(b2 - 2.0)
        return self._ret(p, out, phi)


def build_solution(params: ModelParams) -> EquilibriumSolution:
    """Assemble the full equilibrium: exponents, delta, A, B, coefficients."""
    exps = compute_exponents(params)
    eps = params.eps
    delta = solve_threshold_ratio(exps, eps)
    B = compute_upper_threshold(exps, eps, delta)
    A = delta * B
    b1, b2 = exps.beta1, exps.beta2
    C1 = (1.0 - b2) * (1.0 + eps) * B ** (1.0 - b1) / (b1 - b2)
    C2 = (b1 - 1.0) * (1.0 + eps) * B ** (1.0 - b2) / (b1 - b2)
    D1 = A ** -b1 * (-b2 + (1.0 - b2) * A) / (b1 - b2)
    D2 = A ** -b2 * (b1 + (b1 - 1.0) * A) / (b1 - b2)
    return EquilibriumSolution(params=params, exps=exps, delta=delta,
                               A=A, B=B, C1=C1, C2=C2, D1=D1, D2=D2)


def deviation_value_player1(sol: EquilibriumSolution, Aprime: float, phi):
    """Value of stopping at a (possibly suboptimal) threshold A' against the
    equilibrium reflection at B.

    Solves the same Euler ODE on (A', B) with value matching W(A') = 1 + A'
    and the reflection slope W'(B-) = 1 + eps; smooth fit at A' is dropped.
    Extended by W = 1 + phi below A' and affinely with slope 1 + eps above B.
    W coincides with V when A' = A.
    """
    if not 0.0 < Aprime < sol.B:
        raise DomainError(f"Aprime={Aprime} outside (0, B={sol.B!r})")
    b1, b2 = sol.exps.beta1, sol.exps.beta2
    eps = sol.params.eps
    M = np.array([
        [Aprime**b1, Aprime**b2],
        [b1 * sol.B ** (b1 - 1.0), b2 * sol.B ** (b2 - 1.0)],
    ])
    rhs = np.array([1.0 + Aprime, 1.0 + eps])
    E1, E2 = np.linalg.solve(M, rhs)

    p = np.asarray(phi, dtype=float)
    if np.any(p <= 0.0) or np.any(np.isnan(p)):
        raise DomainError("phi must be positive")
    lo = p <= Aprime
    hi = p >= sol.B
    mid = ~(lo | hi)
    WB = E1 * sol.B**b1 + E2 * sol.B**b2
    out = np.empty_like(p)
    out[lo] = 1.0 + p[lo]
    out[mid] = E1 * p[mid]**b1 + E2 * p[mid]**b2
    out[hi] = WB + (1.0 + eps) * (p[hi] - sol.B)
    return float(out) if np.ndim(phi) == 0 else out


# -- quasi-variational-inequality checks -----------------------------------

@dataclass(frozen=True)
class QviCondition:
    name: str
    max_residual: float
    tolerance: float
    passed: bool

    def as_dict(self) -> dict:
        return {"name": self.name, "max_residual": self.max_residual,
                "tolerance": self.tolerance, "pass": self.passed}


@dataclass(frozen=True)
class QviReport:
    conditions: tuple

    @property
    def all_pass(self) -> bool:
        return all(c.passed for c in self.conditions)

    def as_dict(self) -> dict:
        return {"all_pass": self.all_pass,
                "conditions": [c.as_dict() for c in self.conditions]}


def _euler_residual(omega, drift_coeff, rate, f, fp, fpp, p):
    """Relative residual of (omega^2 phi^2 / 2) f'' + drift phi f' + rate f."""
    t1 = 0.5 * omega**2 * p**2 * fpp
    t2 = drift_coeff * p * fp
    t3 = rate * f
    scale = np.maximum(np.maximum(np.abs(t1), np.abs(t2)), np.abs(t3))
    return np.abs(t1 + t2 + t3) / np.maximum(scale, 1e-300)


def check_qvi(sol: EquilibriumSolution, n_points: int = 10_000) -> QviReport:
    """Numerical residuals of the variational conditions on the closed form.

    Grids avoid the kink points A and B by at least one grid cell.  All
    conditions are per unit of x (the asset level scales out of every
    operator that appears).
    """
    params = sol.params
    omega = sol.omega
    so = params.sigma * omega
    A, B = sol.A, sol.B
    eps = params.eps

    interior = np.linspace(A, B, n_points + 2)[1:-1]
    m = max(n_points // 10, 64)
    stop_grid = np.linspace(0.0, A, m + 1)[1:]
    upper_grid = np.linspace(B, 3.0 * B, m + 1)[1:]
    full_grid = np.concatenate([stop_grid, interior, upper_grid])

    conds = []

    def add(name, residual, tol):
        r = float(residual)
        conds.append(QviCondition(name, r, tol, r <= tol))

    # Euler ODEs on the continuation band (A, B).
    add("ode-V", np.max(_euler_residual(
        omega, so, params.mu0, sol.V(interior), sol.V_prime(interior),
        sol.V_second(interior), interior)), ODE_RTOL)
    add("ode-V1", np.max(_euler_residual(
        omega, so + omega**2, params.mu1, sol.V1(interior),
        sol.V1_prime(interior), sol.V1_second(interior), interior)), ODE_RTOL)
    add("ode-V0", np.max(_euler_residual(
        omega, so, params.mu0, sol.V0(interior), sol.V0_prime(interior),
        sol.V0_second(interior), interior)), ODE_RTOL)

    # Obstacle: the game value dominates the stopping payoff everywhere.
    add("obstacle-V", np.max((1.0 + full_grid) - sol.V(full_grid)), BOUNDARY_ATOL)

    # Generator sign in the stopping region: mu0 + mu1 phi <= 0 on (0, A].
    add("generator-sign-stopping",
        np.max(params.mu0 + params.mu1 * stop_grid), BOUNDARY_ATOL)

    # Stopped costs equal the lower payoff on (0, A].
    add("stopping-payoff-V0", np.max(np.abs(sol.V0(stop_grid) - 1.0)), BOUNDARY_ATOL)
    add("stopping-payoff-V1", np.max(np.abs(sol.V1(stop_grid) - 1.0)), BOUNDARY_ATOL)

    # Reflection conditions at and above B (flat costs in phi).
    add("reflection-smooth-V0",
        max(abs(sol.V0_prime(B)), np.max(np.abs(sol.V0_prime(upper_grid)))),
        BOUNDARY_ATOL)
    add("reflection-smooth-V1",
        max(abs(sol.V1_prime(B)), np.max(np.abs(sol.V1_prime(upper_grid)))),
        BOUNDARY_ATOL)

    # Boundary and smooth-fit conditions that pin down A, B and the
    # coefficients.
    add("boundary-V-at-A", abs(sol.V(A) - (1.0 + A)), BOUNDARY_ATOL)
    add("smooth-fit-V-at-A", abs(sol.V_prime(A) - 1.0), BOUNDARY_ATOL)
    add("boundary-V-slope-at-B", abs(sol.V_prime(B) - (1.0 + eps)), BOUNDARY_ATOL)
    add("boundary-V1-at-A", abs(sol.V1(A) - 1.0), BOUNDARY_ATOL)
    add("boundary-V1-at-B", abs(sol.V1(B) - (1.0 + eps)), BOUNDARY_ATOL)
    add("boundary-V0-at-A", abs(sol.V0(A) - 1.0), BOUNDARY_ATOL)

    # Costs never exceed the upper payoff.
    add("cost-bound-V0", np.max(sol.V0(full_grid)) - (1.0 + eps), BOUNDARY_ATOL)
    add("cost-bound-V1", np.max(sol.V1(full_grid)) - (1.0 + eps), BOUNDARY_ATOL)

    return QviReport(conditions=tuple(conds))
