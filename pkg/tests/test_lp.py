import numpy as np
import pytest

from occurelax.lp import (
    REL_EQ,
    REL_LE,
    LinearProgram,
    SizeExceeded,
    enumerate_vertices_oracle,
    solve_lp,
)


def simple_lp():
    # min x1  s.t.  x1 + x2 = 1,  x >= 0
    return LinearProgram(c=[1.0, 0.0], A=[[1.0, 1.0]], b=[1.0], rel=[REL_EQ])


def test_simple_equality():
    sol = solve_lp(simple_lp())
    assert sol.status == "optimal"
    assert abs(sol.value - 0.0) < 1e-12
    assert np.allclose(sol.x, [0.0, 1.0])


def test_infeasible_pair():
    lp = LinearProgram(c=[0.0], A=[[1.0], [1.0]], b=[1.0, 2.0], rel=[REL_EQ, REL_EQ])
    assert solve_lp(lp).status == "infeasible"


def test_unbounded():
    # min -x1 with only an upper bound on x2
    lp = LinearProgram(c=[-1.0, 0.0], A=[[0.0, 1.0]], b=[1.0], rel=[REL_LE])
    assert solve_lp(lp).status == "unbounded"


def test_le_rows_and_duals():
    # min -x1 - x2  s.t. x1 <= 2, x2 <= 3
    lp = LinearProgram(
        c=[-1.0, -1.0],
        A=[[1.0, 0.0], [0.0, 1.0]],
        b=[2.0, 3.0],
        rel=[REL_LE, REL_LE],
    )
    sol = solve_lp(lp)
    assert sol.status == "optimal"
    assert abs(sol.value + 5.0) < 1e-9
    # complementary slackness: both rows tight, |dual * slack| ~ 0
    slack = lp.b - lp.A @ sol.x
    assert np.sum(np.abs(sol.duals * slack)) < 1e-6 * (1 + abs(sol.value))


def test_negative_rhs():
    # min x1  s.t.  -x1 <= -2   (x1 >= 2)
    lp = LinearProgram(c=[1.0], A=[[-1.0]], b=[-2.0], rel=[REL_LE])
    sol = solve_lp(lp)
    assert sol.status == "optimal"
    assert abs(sol.value - 2.0) < 1e-9


def test_free_columns():
    # min |style| problem: variable t free, minimize t s.t. t >= -3 via -t <= 3
    lp = LinearProgram(
        c=[1.0],
        A=[[-1.0]],
        b=[3.0],
        rel=[REL_LE],
        free_cols=np.array([True]),
    )
    sol = solve_lp(lp)
    assert sol.status == "optimal"
    assert abs(sol.value + 3.0) < 1e-9


def test_oracle_trivial_cases():
    assert enumerate_vertices_oracle(simple_lp()).value == pytest.approx(0.0, abs=1e-12)
    bad = LinearProgram(c=[0.0], A=[[1.0], [1.0]], b=[1.0, 2.0], rel=[REL_EQ, REL_EQ])
    assert enumerate_vertices_oracle(bad).status == "infeasible"


def test_oracle_size_guard():
    lp = LinearProgram(c=np.zeros(13), A=np.zeros((1, 13)), b=[0.0], rel=[REL_EQ])
    with pytest.raises(SizeExceeded):
        enumerate_vertices_oracle(lp)


def random_lp(rng):
    n = rng.integers(1, 9)
    r = rng.integers(1, 7)
    A = np.round(rng.normal(size=(r, n)), 3)
    b = np.round(rng.normal(size=r), 3)
    c = np.round(rng.normal(size=n), 3)
    rel = rng.integers(0, 2, size=r).astype(np.int8)
    return LinearProgram(c=c, A=A, b=b, rel=rel)


def test_random_sweep_matches_oracle():
    rng = np.random.default_rng(20240817)
    statuses = {"optimal": 0, "infeasible": 0, "unbounded": 0}
    for _ in range(50):
        lp = random_lp(rng)
        got = solve_lp(lp)
        want = enumerate_vertices_oracle(lp)
        assert got.status == want.status, (lp.A, lp.b, lp.c, lp.rel)
        if want.status == "optimal":
            assert abs(got.value - want.value) <= 1e-8 * (1 + abs(want.value))
            slack = lp.b - lp.A @ got.x
            slack[lp.rel == REL_EQ] = 0.0
            assert np.sum(np.abs(got.duals * slack)) <= 1e-6 * (1 + abs(got.value))
        statuses[want.status] += 1
    # the sweep should actually exercise all three outcomes
    assert min(statuses.values()) >= 3, statuses


def test_degenerate_lp_terminates():
    # many redundant rows pinning the same point
    A = np.ones((6, 4))
    A[1:, 0] = 2.0
    b = np.ones(6)
    b[1:] = 1.0
    lp = LinearProgram(c=[1.0, 2.0, 3.0, 4.0], A=A, b=b, rel=[REL_EQ] * 6)
    sol = solve_lp(lp)
    assert sol.status in ("optimal", "infeasible")


def test_weak_duality_at_optimum():
    rng = np.random.default_rng(7)
    for _ in range(20):
        lp = random_lp(rng)
        sol = solve_lp(lp)
        if sol.status != "optimal":
            continue
        dual_obj = float(sol.duals @ lp.b)
        assert dual_obj <= sol.value + 1e-6 * (1 + abs(sol.value))
