import numpy as np
import pytest
import scipy.optimize

from czreach.lp import (
    FEAS_TOL,
    LinearProgram,
    LpDimensionError,
    LpIterationError,
    LpStatus,
    solve,
)


def simplex_2d_vertices():
    # Oracle for the triangle {x, y >= 0, x + y <= 1}: its vertices.
    return np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


def test_simplex_triangle_minimum():
    # Arrange: oracle value = min over vertices of -x - y
    verts = simplex_2d_vertices()
    expected = min(-v[0] - v[1] for v in verts)
    lp = LinearProgram.build(
        objective=[-1.0, -1.0],
        a_in=[[1.0, 1.0]], b_in=[1.0],
        lower=[0.0, 0.0],
    )
    sol = solve(lp)
    assert sol.status is LpStatus.OPTIMAL
    assert sol.objective_value == pytest.approx(expected, abs=1e-9)
    # the optimizer must land on a vertex attaining the optimum
    assert min(np.linalg.norm(sol.x - v) for v in verts[1:]) < 1e-9


def test_unbounded_detected():
    lp = LinearProgram.build(objective=[-1.0], lower=[0.0])
    sol = solve(lp)
    assert sol.status is LpStatus.UNBOUNDED
    assert sol.x is None


def test_infeasible_detected():
    lp = LinearProgram.build(
        objective=[0.0], a_in=[[1.0]], b_in=[-1.0], lower=[0.0])
    sol = solve(lp)
    assert sol.status is LpStatus.INFEASIBLE


def test_equality_with_bounds():
    # min x1 + x2  s.t.  x1 + x2 + x3 = 2, all in [0, 1]: put x3 at 1
    lp = LinearProgram.build(
        objective=[1.0, 1.0, 0.0],
        a_eq=[[1.0, 1.0, 1.0]], b_eq=[2.0],
        lower=[0.0] * 3, upper=[1.0] * 3,
    )
    sol = solve(lp)
    assert sol.status is LpStatus.OPTIMAL
    assert sol.objective_value == pytest.approx(1.0, abs=1e-9)
    assert sol.x[2] == pytest.approx(1.0, abs=1e-9)


def test_free_variables():
    # min x with x free but pinned by an equality
    lp = LinearProgram.build(
        objective=[1.0, 0.0],
        a_eq=[[1.0, 1.0]], b_eq=[3.0],
        lower=[-np.inf, 0.0], upper=[np.inf, 2.0],
    )
    sol = solve(lp)
    assert sol.status is LpStatus.OPTIMAL
    assert sol.objective_value == pytest.approx(1.0, abs=1e-9)


def test_upper_bound_only_variable():
    lp = LinearProgram.build(objective=[1.0], upper=[5.0])
    sol = solve(lp)
    assert sol.status is LpStatus.UNBOUNDED
    lp2 = LinearProgram.build(objective=[-1.0], upper=[5.0])
    sol2 = solve(lp2)
    assert sol2.status is LpStatus.OPTIMAL
    assert sol2.x[0] == pytest.approx(5.0)


def test_dimension_error():
    with pytest.raises(LpDimensionError):
        LinearProgram.build(objective=[1.0, 2.0], a_eq=[[1.0]], b_eq=[1.0])
    with pytest.raises(LpDimensionError):
        LinearProgram.build(objective=[1.0], lower=[2.0], upper=[1.0])


def test_iteration_cap_is_not_infeasible():
    lp = LinearProgram.build(
        objective=[-1.0, -2.0],
        a_in=[[1.0, 1.0], [2.0, 1.0]], b_in=[4.0, 6.0],
        lower=[0.0, 0.0],
    )
    with pytest.raises(LpIterationError):
        solve(lp, iteration_cap=0)
    assert solve(lp).status is LpStatus.OPTIMAL


def _random_instance(rng):
    n = rng.integers(2, 7)
    m_eq = rng.integers(0, 3)
    m_in = rng.integers(1, 5)
    c = rng.normal(size=n)
    lo = np.where(rng.random(n) < 0.8, -rng.random(n) * 2, -np.inf)
    hi = np.where(rng.random(n) < 0.8, rng.random(n) * 2, np.inf)
    hi = np.maximum(hi, lo + 0.1)
    # build around a known feasible interior point so the instance is feasible
    x0 = np.where(np.isfinite(lo), lo, -1.0) * 0.3 + \
        np.where(np.isfinite(hi), hi, 1.0) * 0.3
    a_eq = rng.normal(size=(m_eq, n))
    b_eq = a_eq @ x0
    a_in = rng.normal(size=(m_in, n))
    b_in = a_in @ x0 + rng.random(m_in) + 0.05
    return LinearProgram.build(c, a_eq, b_eq, a_in, b_in, lo, hi), x0


def test_weak_duality_on_random_feasible_instances():
    rng = np.random.default_rng(7)
    for _ in range(120):
        lp, x0 = _random_instance(rng)
        sol = solve(lp)
        if sol.status is not LpStatus.OPTIMAL:
            assert sol.status is LpStatus.UNBOUNDED
            continue
        # the known feasible point cannot beat the reported optimum
        assert lp.objective @ x0 >= sol.objective_value - 1e-6
        scale = 1.0 + np.max(np.abs(sol.x))
        if lp.a_eq.size:
            assert np.max(np.abs(lp.a_eq @ sol.x - lp.b_eq)) <= 1e-7 * scale
        if lp.a_in.size:
            assert np.max(lp.a_in @ sol.x - lp.b_in) <= 1e-7 * scale
        assert np.all(sol.x >= lp.lower - 1e-9)
        assert np.all(sol.x <= lp.upper + 1e-9)


def test_matches_reference_solver_on_random_instances():
    rng = np.random.default_rng(21)
    for _ in range(120):
        lp, _ = _random_instance(rng)
        sol = solve(lp)
        ref = scipy.optimize.linprog(
            lp.objective, A_ub=lp.a_in, b_ub=lp.b_in,
            A_eq=lp.a_eq if lp.a_eq.size else None,
            b_eq=lp.b_eq if lp.b_eq.size else None,
            bounds=list(zip(lp.lower, lp.upper)), method="highs")
        if sol.status is LpStatus.OPTIMAL:
            assert ref.status == 0
            assert sol.objective_value == pytest.approx(ref.fun, abs=1e-6, rel=1e-6)
        elif sol.status is LpStatus.UNBOUNDED:
            assert ref.status == 3
        else:
            assert ref.status == 2


def test_deterministic_repeat():
    rng = np.random.default_rng(3)
    lp, _ = _random_instance(rng)
    a = solve(lp)
    b = solve(lp)
    assert a.status is b.status
    if a.x is not None:
        assert np.array_equal(a.x, b.x)
        assert a.objective_value == b.objective_value
        assert a.iterations == b.iterations


def test_degenerate_problem_terminates():
    # many redundant constraints through the optimum force degenerate pivots
    lp = LinearProgram.build(
        objective=[-1.0, -1.0],
        a_in=[[1.0, 1.0], [1.0, 1.0], [2.0, 2.0], [1.0, 0.0], [0.0, 1.0]],
        b_in=[1.0, 1.0, 2.0, 1.0, 1.0],
        lower=[0.0, 0.0],
    )
    sol = solve(lp)
    assert sol.status is LpStatus.OPTIMAL
    assert sol.objective_value == pytest.approx(-1.0, abs=1e-9)


def test_zero_variable_problem():
    lp = LinearProgram.build(objective=[], a_eq=np.zeros((1, 0)), b_eq=[0.0])
    assert solve(lp).status is LpStatus.OPTIMAL
    lp_bad = LinearProgram.build(objective=[], a_eq=np.zeros((1, 0)), b_eq=[1.0])
    assert solve(lp_bad).status is LpStatus.INFEASIBLE


def test_tolerance_constants_exposed():
    assert FEAS_TOL == 1e-9
