import math

import numpy as np
import pytest

from nilflow.ode import differentiate
from nilflow.reduction import FreeState, SymMat2, angular_tower
from nilflow.verification import (
    TARGETS,
    compare_reduction,
    ensemble,
    formula_audit,
    hamiltonian_drift,
    min_gap,
    oracle_sample,
    oracle_trajectory,
    polyfit_residual,
    radial_ensemble,
    radial_free_compare,
    radial_jet,
    taylor_div,
    taylor_mul,
    taylor_sqrt,
)

FREE_EXAMPLE = FreeState((SymMat2(0.5, 0.0, -0.5), SymMat2(0.0, 1.0, 0.0)))
GRID = np.linspace(0.0, 1.0, 21)


def test_taylor_arithmetic():
    a = np.array([2.0, 1.0, 0.0, 0.0])
    b = np.array([1.0, -1.0, 0.0, 0.0])
    assert np.allclose(taylor_mul(a, b), [2, -1, -1, 0])
    assert np.allclose(taylor_mul(taylor_div(a, b), b), a)
    r = taylor_sqrt(np.array([4.0, 4.0, 1.0, 0.0]))  # (2 + s)^2
    assert np.allclose(r, [2, 1, 0, 0])


def test_oracle_diagonal_data():
    s = FreeState((SymMat2(1.0, 0.0, -0.5), SymMat2(0.2, 0.0, -1.0)))
    orc = oracle_trajectory(s, GRID)
    assert np.all(orc.series("phi") == 0.0)
    _, res = polyfit_residual(GRID, orc.series("q1"), 1)
    assert res < 1e-14
    assert np.all(orc.ell(1) == 0.0)


def test_oracle_conjugation_and_continuity():
    for order in (2, 3, 4):
        for s in ensemble(order, seed=11, n_members=3):
            orc = oracle_trajectory(s, np.linspace(0, 1, 101))
            assert max(smp.conjugation_error() for smp in orc.samples) < 1e-12
            assert np.max(np.abs(np.diff(orc.series("phi")))) < math.pi / 2
            assert np.all(orc.series("q") > 0)


def test_oracle_order2_ell_constant():
    for s in ensemble(2, seed=12, n_members=5):
        ell = oracle_trajectory(s, GRID).ell(1)
        assert np.max(np.abs(ell - ell[0])) <= 1e-12 * max(1.0, abs(ell[0]))


def test_oracle_order3_laws():
    for s in ensemble(3, seed=13, n_members=5):
        orc = oracle_trajectory(s, GRID)
        assert np.ptp(orc.ell(3)) < 1e-10
        coef, res = polyfit_residual(GRID, orc.ell(2), 1)
        assert res < 1e-10
        l0 = angular_tower(s)
        assert coef == pytest.approx([l0.l(2), l0.l(3)], abs=1e-9)


def test_oracle_collision_flag():
    # eigenvalues meet at t = 1
    s = FreeState((SymMat2(0.0, 0.0, 0.5), SymMat2(0.0, 0.0, -0.5)))
    orc = oracle_trajectory(s, np.linspace(0, 2, 21))
    assert orc.flag == "COLLISION" and orc.collision_time == pytest.approx(1.0)
    assert len(orc.samples) == 10
    assert min_gap(s, 2.0) == pytest.approx(0.0, abs=1e-12)


def test_oracle_self_consistency_fd():
    # 7-point differences of q1 samples reproduce the analytic jets
    ts = np.linspace(0.0, 1.0, 101)
    for s in ensemble(3, seed=14, n_members=3):
        orc = oracle_trajectory(s, ts)
        fd = differentiate(ts, orc.series("q1"), 1)
        assert np.max(np.abs(fd - orc.series("q1", 1))) < 1e-6


def test_tower_derivative_chain_fd():
    ts = np.linspace(0.0, 1.0, 101)
    for s in ensemble(3, seed=15, n_members=3):
        orc = oracle_trajectory(s, ts)
        assert np.max(np.abs(differentiate(ts, orc.ell(1), 1) - orc.ell(2))) < 1e-6
        assert np.max(np.abs(differentiate(ts, orc.ell(2), 1) - orc.ell(3))) < 1e-6


def test_ensemble_respects_gap():
    members = ensemble(3, seed=3, n_members=4)
    assert len(members) == 4 and all(min_gap(s) >= 0.3 for s in members)
    assert ensemble(3, seed=3, n_members=4) == members


def test_compare_reduction_examples():
    rep = compare_reduction(2, FREE_EXAMPLE, 1.0, 1e-8)
    assert rep.passed and rep.verdict == "PASS" and rep.constraint_max is None
    diag = FreeState((SymMat2(1.0, 0.0, -0.5), SymMat2(0.2, 0.0, -1.0)))
    assert compare_reduction(2, diag, 1.0, 1e-12).max_error < 1e-12
    for s in ensemble(3, seed=0, n_members=2):
        assert compare_reduction(3, s, 1.0, 1e-7).passed
    with pytest.raises(ValueError):
        compare_reduction(3, FREE_EXAMPLE)


def test_compare_reduction_collision():
    s = FreeState((SymMat2(0.0, 0.0, 0.5), SymMat2(0.0, 0.0, -0.5)))
    rep = compare_reduction(2, s, 2.0)
    assert not rep.passed and rep.failure is not None


@pytest.mark.parametrize("order", [2, 3, 4])
def test_compare_reduction_tolerance_monotone(order):
    for s in ensemble(order, seed=0, n_members=3):
        errs = [compare_reduction(order, s, rel_tol=10.0**-k, abs_tol=10.0 ** -(k + 2)).max_error
                for k in range(6, 12)]
        assert all(b <= 2 * a for a, b in zip(errs, errs[1:]))


def test_printed_order3_form_fails_comparison():
    s = ensemble(3, seed=0, n_members=1)[0]
    assert not compare_reduction(3, s, 1.0, 1e-7, form="printed").passed


def test_polyfit_examples():
    ts = np.linspace(-1, 2, 15)
    coef, res = polyfit_residual(ts, 3 - 2 * ts + 0.5 * ts**2, 2)
    assert res < 1e-12 and coef == pytest.approx([3, -2, 0.5])
    ts = np.linspace(0, 3, 31)
    assert polyfit_residual(ts, np.sin(ts), 2)[1] > 1e-2
    with pytest.raises(ValueError):
        polyfit_residual([0, 1, 2], [0, 1, 4], 2)
    with pytest.raises(ValueError):
        polyfit_residual([0, 1, 2, 3], [0, 1], 1)


# values frozen from a seed-0 run of the Taylor-series oracle
AUDIT_WINNERS = {
    "E1_ORDER3": "squared",
    "E_TOWER_TRACE": "squared",
    "CM3_RHS": "recursion",
    "CM4_RHS": "recursion",
    "CM4_CONSTRAINT": "recursion",
    "HAMILTONIAN_ACCEL": "consistent",
}


@pytest.mark.parametrize("target", TARGETS)
def test_audit_verdicts(target):
    rep = formula_audit(target, seed=0)
    assert rep.verdict == AUDIT_WINNERS[target]
    losers = [v for k, v in rep.deviations.items() if k != rep.verdict]
    assert rep.deviations[rep.verdict] < 1e-9 and all(v > 1e-3 for v in losers)
    assert target in rep.summary()


def test_audit_determinism():
    a = formula_audit("CM3_RHS", seed=7, n_members=3)
    b = formula_audit("CM3_RHS", seed=7, n_members=3)
    assert a.to_json() == b.to_json()


def test_audit_errors():
    with pytest.raises(ValueError):
        formula_audit("NOPE")
    with pytest.raises(ValueError):
        formula_audit("CM3_RHS", n_members=0)


def test_audit_verdict_rules():
    rep = formula_audit("E1_ORDER3", seed=0, n_members=2, tol=1e3)
    assert rep.verdict == "AMBIGUOUS" and not rep.unique
    rep = formula_audit("E1_ORDER3", seed=0, n_members=2, tol=0.0)
    assert rep.verdict == "NONE"


def test_degenerate_member_does_not_discriminate():
    from nilflow.verification import _e1_printed, _e1_squared, _e1_truth
    s = FreeState((SymMat2(1.0, 0.0, -0.5), SymMat2(0.2, 0.0, -1.0), SymMat2(0.0, 0.0, 0.3)))
    for smp in oracle_trajectory(s, GRID).samples:
        assert _e1_printed(smp) == _e1_squared(smp) == pytest.approx(_e1_truth(smp, s))


def test_radial_free_examples():
    for r0, v0, _ in radial_ensemble(seed=1, n_members=3, accelerated=False):
        for alpha in (0.0, 0.5, 1.0):
            assert radial_free_compare(r0, v0, alpha) < 1e-8


def test_radial_jet_against_fd():
    r0, v0, a = np.array([1.5, 0.2, -0.3]), np.array([0.1, 0.4, 0.2]), np.array([0.3, -0.2, 0.1])
    ts = np.linspace(0, 0.3, 31)
    rs = [radial_jet(r0, v0, a, t)[0] for t in ts]
    fd = differentiate(ts, rs, 2)
    assert fd[15] == pytest.approx(radial_jet(r0, v0, a, ts[15])[2], abs=1e-7)


def test_hamiltonian_drift_forms():
    s = ensemble(3, seed=9, n_members=1)[0]
    assert hamiltonian_drift(s) < 1e-8
    assert hamiltonian_drift(s, form="printed") > 1e-3
    with pytest.raises(ValueError):
        hamiltonian_drift(FREE_EXAMPLE)
