import dataclasses

import numpy as np
import pytest

from driftgame import ModelParams, build_solution
from driftgame.simulate import Measure, SimConfig
from driftgame.verify import (
    ConfigMismatch,
    InvalidDeviation,
    check_jhat_identity,
    deviations_player1,
    deviations_player2,
    dt_convergence_study,
    mc_J0,
    mc_J1,
    mc_Jhat,
    mc_oracle_suite,
    oracle_report,
)


def _configs(sol, n_paths=4_000, dt=4e-4, seed=2024, horizon=50.0):
    base = dict(dt=dt, horizon=horizon, n_paths=n_paths, seed=seed,
                barrier=sol.B, lower=sol.A)
    return (SimConfig(measure=Measure.TILTED0, **base),
            SimConfig(measure=Measure.TILTED1, **base))


@pytest.fixture(scope="module")
def sol(base_params):
    return build_solution(base_params)


# -- exact short-circuit points ------------------------------------------------

def test_j0_in_stopping_region_is_exact(sol):
    cfg0, _ = _configs(sol, n_paths=50)
    est = mc_J0(sol, sol.A / 2, cfg0)
    assert est.mean == 1.0
    assert est.stderr == 0.0
    assert est.censored_fraction == 0.0


def test_j1_at_lower_threshold_is_exact(sol):
    _, cfg1 = _configs(sol, n_paths=50)
    est = mc_J1(sol, sol.A, cfg1)
    assert est.mean == 1.0


def test_jhat_in_stopping_region_is_exact(sol):
    cfg0, _ = _configs(sol, n_paths=50)
    est = mc_Jhat(sol, sol.A, cfg0)
    assert est.mean == pytest.approx(1.0 + sol.A, rel=1e-14)


# -- oracle consistency across a phi grid ---------------------------------------

def test_oracle_consistency_grid(sol):
    # 9-point grid spanning (0, 2B]: every estimate within
    # 3 stderr + documented bias of its closed form
    cfg0, cfg1 = _configs(sol)
    for phi in np.linspace(0.0, 2.0 * sol.B, 10)[1:]:
        for report in mc_oracle_suite(sol, float(phi), cfg0, cfg1):
            err = abs(report["estimate"] - report["oracle"])
            assert report["pass"], (phi, report)
            assert err <= report["tolerance"] + report["bias_bound"]


def test_j1_bounded_between_payoffs(sol):
    _, cfg1 = _configs(sol, n_paths=3_000)
    mid = 0.5 * (sol.A + sol.B)
    est = mc_J1(sol, mid, cfg1)
    assert 1.0 - 1e-12 <= est.mean <= 1.0 + sol.params.eps + 0.05
    assert abs(est.mean - sol.V1(mid)) <= 3 * est.stderr + est.bias_bound


def test_j0_strictly_below_one_for_very_negative_drift():
    p = ModelParams(mu0=-10.0, mu1=1.0, sigma=0.5, eps=0.1)
    s = build_solution(p)
    cfg0 = SimConfig(dt=2e-4, horizon=50.0, n_paths=400, seed=5,
                     measure=Measure.TILTED0, barrier=s.B, lower=s.A)
    est = mc_J0(s, s.B, cfg0)
    assert est.mean < 1.0


def test_jhat_identity(sol):
    cfg0, cfg1 = _configs(sol, n_paths=6_000)
    rep = check_jhat_identity(sol, 0.6, cfg0, cfg1)
    assert rep["pass"], rep
    assert abs(rep["residual"]) <= 3.0 * rep["stderr"]


# -- config validation -----------------------------------------------------------

def test_measure_mismatch_rejected(sol):
    cfg0, cfg1 = _configs(sol, n_paths=10)
    with pytest.raises(ConfigMismatch):
        mc_J0(sol, 0.5, cfg1)
    with pytest.raises(ConfigMismatch):
        mc_J1(sol, 0.5, cfg0)
    with pytest.raises(ConfigMismatch):
        mc_Jhat(sol, 0.5, cfg1)


def test_threshold_mismatch_rejected(sol):
    cfg0, _ = _configs(sol, n_paths=10)
    with pytest.raises(ConfigMismatch):
        mc_J0(sol, 0.5, dataclasses.replace(cfg0, barrier=1.1 * sol.B))
    with pytest.raises(ConfigMismatch):
        mc_J0(sol, 0.5, dataclasses.replace(cfg0, lower=0.9 * sol.A))


# -- report schema -----------------------------------------------------------------

def test_oracle_report_schema(sol):
    cfg0, _ = _configs(sol, n_paths=200)
    rep = oracle_report(sol, "J0", sol.B, mc_J0(sol, sol.B, cfg0), sol.V0(sol.B))
    assert set(rep) == {"check", "params", "phi", "estimate", "stderr", "oracle",
                        "tolerance", "bias_bound", "censored_fraction", "pass"}
    assert rep["params"]["mu0"] == sol.params.mu0


# -- deviation suites -----------------------------------------------------------------

def test_player1_deviation_report(sol):
    aprime = np.linspace(0.0, sol.B, 27)[1:-1]
    phis = np.linspace(0.0, 2.0 * sol.B, 10)[1:]
    report = deviations_player1(sol, aprime, phis)
    assert len(report.rows) == 25 * 9
    assert report.all_pass
    # equality rows at the equilibrium threshold
    eq = deviations_player1(sol, [sol.A], phis)
    for r in eq.rows:
        assert r.deviation == pytest.approx(r.equilibrium, abs=1e-10)


def test_player1_specific_strict_deviations(sol):
    r1 = deviations_player1(sol, [0.5], [0.6]).rows[0]
    assert r1.deviation < r1.equilibrium
    r2 = deviations_player1(sol, [0.1], [0.2]).rows[0]
    assert r2.deviation < r2.equilibrium


def test_player2_equilibrium_barrier_is_fixed_point(sol):
    _, cfg1 = _configs(sol, n_paths=500)
    report = deviations_player2(sol, [sol.B], 0.6, cfg1, jump_probs=())
    (row,) = report.rows
    assert row.deviation == row.equilibrium     # identical samples, CRN
    assert row.stderr == 0.0
    assert row.passed


def test_player2_barrier_deviations(sol):
    _, cfg1 = _configs(sol, n_paths=4_000)
    report = deviations_player2(sol, [0.6, 1.2], 0.6, cfg1)
    assert report.all_pass, report.as_dicts()
    kinds = {r.kind for r in report.rows}
    assert kinds == {"player2-barrier", "player2-jump0"}


def test_player2_jump_strategies(sol):
    _, cfg1 = _configs(sol, n_paths=2_000)
    report = deviations_player2(sol, [], 0.6, cfg1, jump_probs=(0.5, 1.0))
    rows = {r.parameter: r for r in report.rows}
    # full immediate stop pays the premium with certainty
    assert rows[1.0].deviation == pytest.approx(1.0 + sol.params.eps, rel=1e-12)
    assert rows[1.0].deviation >= sol.V0(0.6)
    for r in report.rows:
        assert r.passed


def test_player2_invalid_deviation(sol):
    _, cfg1 = _configs(sol, n_paths=10)
    with pytest.raises(InvalidDeviation):
        deviations_player2(sol, [0.5 * sol.A], 0.6, cfg1)
    with pytest.raises(InvalidDeviation):
        deviations_player2(sol, [sol.B], 0.6, cfg1, jump_probs=(1.5,))


# -- dt refinement ---------------------------------------------------------------------

def test_dt_convergence_with_common_noise(sol):
    cfg0, _ = _configs(sol, n_paths=6_000, dt=1e-4)
    dts = [4e-4, 2e-4, 1e-4]
    ests = dt_convergence_study(sol, sol.B, cfg0, dts)
    oracle = sol.V0(sol.B)
    errs = [abs(e.mean - oracle) for e in ests]
    slack = [3.0 * e.stderr for e in ests]
    # coarse-to-fine error decreases (within noise)
    assert errs[0] >= errs[1] - (slack[0] + slack[1])
    assert errs[1] >= errs[2] - (slack[1] + slack[2])
    assert errs[0] > errs[2] - (slack[0] + slack[2])
    for e, dt in zip(ests, dts):
        assert e.dt == dt
        assert abs(e.mean - oracle) <= 3.0 * e.stderr + e.bias_bound
