"""Acceptance criteria AC1-AC11; the terminal summary prints one PASS/FAIL line per criterion."""

import json
import math
import random
import time
from fractions import Fraction

import numpy as np
import pytest

from nilflow.cli import run
from nilflow.linear import (
    RationalMatrix,
    commutant_chain,
    is_abelian,
    jordan_chevalley,
    linear_vector_field,
    minimal_polynomial,
    nilpotent_matrix_flow,
    span_contains,
    span_equal,
    upoly_derivative,
    upoly_gcd,
    upoly_at_matrix,
)
from nilflow.nilpotent import compute_tower, flow_polynomial
from nilflow.poly import Polynomial, VectorField, variables
from nilflow.reduction import FreeState, SymMat2, angular_tower, constraint_residual
from nilflow.specfile import parse_spec
from nilflow.verification import (
    accelerated_cm_compare,
    compare_reduction,
    ensemble,
    formula_audit,
    hamiltonian_drift,
    min_gap,
    oracle_trajectory,
    polyfit_residual,
    radial_ensemble,
    radial_free_compare,
    radial_order3_fd_error,
)

criterion = pytest.mark.criterion
HALF = Fraction(1, 2)


def _rand_matrix(rng: random.Random, n: int, lo: int = -3, hi: int = 3) -> RationalMatrix:
    return RationalMatrix([[Fraction(rng.randint(lo, hi), rng.randint(1, 3)) for _ in range(n)]
                           for _ in range(n)])


def _unimodular(rng: random.Random, n: int) -> RationalMatrix:
    # product of elementary matrices, so the inverse is exact and small
    P = RationalMatrix.identity(n)
    for _ in range(2 * n):
        i, j = rng.sample(range(n), 2)
        rows = [[Fraction(int(a == b)) for b in range(n)] for a in range(n)]
        rows[i][j] = Fraction(rng.randint(-2, 2))
        P = P @ RationalMatrix(rows)
    return P


def _jordan_like(rng: random.Random, n: int) -> RationalMatrix:
    # repeated eigenvalues with nontrivial blocks, conjugated into a dense matrix
    lam = [Fraction(rng.randint(-2, 2))] * 2 + [Fraction(rng.randint(-2, 2)) for _ in range(n - 2)]
    rows = [[lam[i] if i == j else Fraction(0) for j in range(n)] for i in range(n)]
    for i in range(n - 1):
        if lam[i] == lam[i + 1] or rng.random() < 0.3:
            rows[i][i + 1] = Fraction(1)
    P = _unimodular(rng, n)
    return P @ RationalMatrix(rows) @ P.inverse()


@criterion(1, "uniformly accelerated system: STRICT, indices (3,2,1), exact flow")
def test_ac1_uniformly_accelerated(capsys):
    start = time.perf_counter()
    code = run(["analyze", "uniformly_accelerated.json"])
    rep = json.loads(capsys.readouterr().out)
    spec = parse_spec("uniformly_accelerated.json")
    x = Polynomial.variable(spec.field.coords, "x")
    flow = flow_polynomial(spec.field, x).as_polynomial("t")
    X, V, A, T = variables("x", "v", "a", "t")
    elapsed = time.perf_counter() - start
    print(f"AC1 indices={rep['indices']} flow={flow} elapsed={elapsed:.3f}s")
    assert code == 0 and rep["verdict"] == "STRICT"
    assert [rep["indices"][c] for c in ("x", "v", "a")] == [3, 2, 1]
    assert flow == X + V * T + HALF * A * T**2
    assert elapsed < 1.0


@criterion(2, "energy tower of v^2/2 is [v^2/2, va, a^2] with index 3")
def test_ac2_energy_tower():
    start = time.perf_counter()
    x, v, a = variables("x", "v", "a")
    V = VectorField.from_mapping(x.coords, {"x": v, "v": a})
    tower = compute_tower(V, HALF * v**2)
    elapsed = time.perf_counter() - start
    print(f"AC2 levels={[str(p) for p in tower.levels]} elapsed={elapsed:.3f}s")
    assert tower.levels == (HALF * v**2, v * a, a**2) and tower.index == 3
    assert elapsed < 1.0


@criterion(3, "stability lemma on random singletons and commuting pairs")
def test_ac3_stability_lemma():
    rng = random.Random(2024)
    start = time.perf_counter()
    families = [[_rand_matrix(rng, 3)] for _ in range(50)]
    for _ in range(20):
        A = _rand_matrix(rng, 3) if rng.random() < 0.5 else _jordan_like(rng, 3)
        p = [Fraction(rng.randint(-2, 2)) for _ in range(3)]
        B = upoly_at_matrix(p, A)
        families.append([A, B])
    for S in families:
        assert is_abelian(S)
        ch = commutant_chain(S, depth=3)
        assert span_equal(ch.level(1), ch.level(3))
        assert span_contains(ch.level(2), S)
        assert is_abelian(list(ch.level(2)))
    elapsed = time.perf_counter() - start
    print(f"AC3 families={len(families)} elapsed={elapsed:.2f}s")
    assert elapsed < 10.0


@criterion(4, "Jordan-Chevalley on 100 random rational 4x4 matrices")
def test_ac4_jordan_chevalley():
    rng = random.Random(4)
    start = time.perf_counter()
    nontrivial = 0
    for k in range(100):
        A = _rand_matrix(rng, 4) if k % 2 else _jordan_like(rng, 4)
        jc = jordan_chevalley(A)
        S, N = jc.S, jc.N
        assert S + N == A
        assert S @ N == N @ S
        assert (N**4).is_zero()
        mp = minimal_polynomial(S)
        assert upoly_gcd(mp, upoly_derivative(mp)) == [1]
        nontrivial += not N.is_zero()
    elapsed = time.perf_counter() - start
    print(f"AC4 matrices=100 nonzero_N={nontrivial} elapsed={elapsed:.2f}s")
    assert nontrivial >= 40
    assert elapsed < 30.0


@criterion(5, "nilpotent linear flow: flow polynomials equal exp(tA) rows; group law")
def test_ac5_nilpotent_linear_flow():
    rng = random.Random(5)
    for n in (2, 3, 4, 4):
        U = RationalMatrix([[Fraction(rng.randint(-3, 3), rng.randint(1, 2)) if j > i else 0
                             for j in range(n)] for i in range(n)])
        P = _unimodular(rng, n)
        A = P @ U @ P.inverse()
        V = linear_vector_field(A)
        coords = V.coords
        ext = coords + ("t", "s")
        tv, sv = Polynomial.variable(ext, "t"), Polynomial.variable(ext, "s")
        flows = [flow_polynomial(V, Polynomial.variable(coords, c)).as_polynomial("t").embed(ext)
                 for c in coords]
        for t in (Fraction(0), Fraction(2, 3), Fraction(-5, 2)):
            E = nilpotent_matrix_flow(A, t)
            for j, c in enumerate(coords):
                row = flow_polynomial(V, Polynomial.variable(coords, c)).at(t)
                assert row == sum((Polynomial.variable(coords, xi) * E[j, i]
                                   for i, xi in enumerate(coords)), Polynomial.zero(coords))
        # phi_t o phi_s = phi_{t+s} as a polynomial identity in (x, t, s)
        at_s = {c: f.substitute({"t": sv}, ext) for c, f in zip(coords, flows)}
        for f in flows:
            assert f.substitute(at_s, ext) == f.substitute({"t": tv + sv}, ext)
        for t, s in ((Fraction(1, 3), Fraction(-2)), (Fraction(7, 5), Fraction(3, 4))):
            assert nilpotent_matrix_flow(A, t) @ nilpotent_matrix_flow(A, s) == \
                nilpotent_matrix_flow(A, t + s)
    print("AC5 flow rows and group law exact for n in (2, 3, 4, 4)")


@criterion(6, "order-2 CM matches the oracle to 1e-8")
def test_ac6_cm_order2():
    start = time.perf_counter()
    errs = [compare_reduction(2, s, 1.0, 1e-8, rel_tol=1e-10).max_error
            for s in ensemble(2, seed=0, n_members=5)]
    elapsed = time.perf_counter() - start
    print(f"AC6 max_error={max(errs):.3e} elapsed={elapsed:.2f}s")
    assert max(errs) <= 1e-8
    assert elapsed < 5.0


@criterion(7, "angular tower laws along order-3 oracles")
def test_ac7_tower_laws():
    ts = np.linspace(0.0, 1.0, 21)
    worst = {"l3": 0.0, "l2": 0.0, "l1": 0.0, "coef": 0.0}
    for s in ensemble(3, seed=0, n_members=5):
        orc = oracle_trajectory(s, ts)
        l0 = angular_tower(s)
        worst["l3"] = max(worst["l3"], float(np.max(np.abs(orc.ell(3) - l0.l(3)))))
        c2, r2 = polyfit_residual(ts, orc.ell(2), 1)
        c1, r1 = polyfit_residual(ts, orc.ell(1), 2)
        worst["l2"] = max(worst["l2"], r2)
        worst["l1"] = max(worst["l1"], r1)
        expected = [l0.l(1), l0.l(2), 0.5 * l0.l(3)]
        worst["coef"] = max(worst["coef"], float(np.max(np.abs(c1 - expected))),
                            float(np.max(np.abs(c2 - [l0.l(2), l0.l(3)]))))
    print("AC7 " + " ".join(f"{k}={v:.2e}" for k, v in worst.items()))
    assert worst["l3"] < 1e-10 and worst["l2"] < 1e-10 and worst["l1"] < 1e-10
    assert worst["coef"] < 1e-9


@criterion(8, "order-3 constraint on oracles and along reduced integration")
def test_ac8_constraint():
    ts = np.linspace(0.0, 1.0, 21)
    on_oracle = along_reduced = 0.0
    for s in ensemble(3, seed=0, n_members=5):
        for smp in oracle_trajectory(s, ts, n_derivs=3).samples:
            on_oracle = max(on_oracle, abs(constraint_residual(smp.jet(3), smp.ell, 3)))
        rep = compare_reduction(3, s, 1.0, 1e-7, rel_tol=1e-10)
        assert rep.failure is None
        along_reduced = max(along_reduced, rep.constraint_max)
    print(f"AC8 oracle={on_oracle:.2e} reduced={along_reduced:.2e}")
    assert on_oracle < 1e-8
    assert along_reduced < 1e-7


@criterion(9, "formula audits and reductions with the winning forms")
def test_ac9_audits():
    lines = []
    for target in ("CM3_RHS", "E_TOWER_TRACE"):
        rep = formula_audit(target, seed=0)
        lines.append(rep.summary())
        assert rep.unique
        losers = [v for k, v in rep.deviations.items() if k != rep.verdict]
        assert rep.deviations[rep.verdict] < 1e-9 and min(losers) > 1e-3
        if target == "CM3_RHS":
            cm3 = rep.verdict
    for s in ensemble(3, seed=0, n_members=5):
        assert compare_reduction(3, s, 1.0, 1e-7, form=cm3).passed
    rep4 = formula_audit("CM4_RHS", seed=0)
    lines.append(rep4.summary())
    print("AC9 " + " | ".join(lines))
    if rep4.unique:
        for s in ensemble(4, seed=0, n_members=5):
            assert compare_reduction(4, s, 1.0, 1e-6, form=rep4.verdict).passed
    else:
        pytest.fail(f"CM4_RHS audit verdict {rep4.verdict}; fourth-order system disabled")


@criterion(10, "radial reductions of orders 2 and 3")
def test_ac10_radial():
    order2 = max(radial_free_compare(r0, v0, alpha)
                 for r0, v0, _ in radial_ensemble(seed=0, n_members=5, accelerated=False)
                 for alpha in (0.0, 0.5, 1.0))
    order3 = max(radial_order3_fd_error(r0, v0, a)
                 for r0, v0, a in radial_ensemble(seed=0, n_members=5))
    print(f"AC10 order2={order2:.2e} order3_fd={order3:.2e}")
    assert order2 <= 1e-8
    assert order3 <= 1e-6


@criterion(11, "Hamiltonian with constant acceleration")
def test_ac11_hamiltonian():
    drift = max(hamiltonian_drift(s) for s in ensemble(3, seed=0, n_members=5))
    rng = np.random.default_rng(11)
    accel = []
    while len(accel) < 5:
        X0, V0 = (SymMat2(*rng.uniform(-2, 2, 3)) for _ in range(2))
        s = FreeState((X0, V0, SymMat2(float(rng.uniform(-2, 2)), 0.0, 0.0)))
        if min_gap(s) >= 0.3:
            accel.append(accelerated_cm_compare(s))
    print(f"AC11 drift={drift:.2e} accelerated_cm={max(accel):.2e}")
    assert drift < 1e-8
    assert max(accel) < 1e-7
