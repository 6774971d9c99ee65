import numpy as np
import pytest

from czreach import sets
from czreach.minkdiff import cgrep_from_halfspaces, exact_halfspace_difference
from czreach.models import double_integrator_2d, linearize
from czreach.reach import backstep_linear
from czreach.sets import (
    ConstrainedZonotope,
    HPolytope,
    Hyperbox,
    SafeSet,
    SetEmptyError,
    Zonotope,
    hpoly_contains,
)
from czreach.validation import (
    VolumeEstimate,
    control_certificate,
    grid_difference_2d,
    max_support_gap,
    monte_carlo_volume,
    support_directions,
)


class TestMonteCarloVolume:
    def test_unit_square_is_exact(self):
        est = monte_carlo_volume(Hyperbox(-np.ones(2), np.ones(2)),
                                 samples=2000)
        assert est.value == pytest.approx(4.0)
        assert est.stderr == 0.0
        assert est.samples == 2000

    def test_half_width_square(self):
        est = monte_carlo_volume(Hyperbox(-0.5 * np.ones(2),
                                          0.5 * np.ones(2)), samples=2000)
        assert est.value == pytest.approx(1.0)

    def test_triangle_area(self):
        box = Hyperbox(np.zeros(2), 2.0 * np.ones(2))
        tri = sets.intersect_halfspace(box, np.array([1.0, 1.0]), 2.0)
        est = monte_carlo_volume(tri, samples=100_000)
        assert est.stderr > 0
        assert abs(est.value - 2.0) <= 3.0 * est.stderr

    def test_doubling_samples_is_consistent(self):
        box = Hyperbox(np.zeros(2), 2.0 * np.ones(2))
        tri = sets.intersect_halfspace(box, np.array([1.0, 1.0]), 2.0)
        est1 = monte_carlo_volume(tri, samples=20_000)
        est2 = monte_carlo_volume(tri, samples=40_000)
        combined = float(np.hypot(est1.stderr, est2.stderr))
        assert abs(est1.value - est2.value) <= 4.0 * combined

    def test_union_does_not_double_count(self):
        square = Hyperbox(np.zeros(2), np.ones(2))
        est = monte_carlo_volume([square, square], samples=2000)
        assert est.value == pytest.approx(1.0)

    def test_disjoint_union(self):
        left = Hyperbox(np.zeros(2), np.ones(2))
        right = Hyperbox(np.array([2.0, 0.0]), np.array([3.0, 1.0]))
        est = monte_carlo_volume([left, right], samples=60_000)
        assert abs(est.value - 2.0) <= 3.0 * est.stderr
        assert np.allclose(est.bounding_box.lower, [0.0, 0.0])
        assert np.allclose(est.bounding_box.upper, [3.0, 1.0])

    def test_three_dimensional_fallback(self):
        est = monte_carlo_volume(Hyperbox(np.zeros(3), np.ones(3)),
                                 samples=1000)
        assert est.value == pytest.approx(1.0)

    def test_sample_floor(self):
        with pytest.raises(ValueError):
            monte_carlo_volume(Hyperbox(np.zeros(2), np.ones(2)), samples=10)

    def test_empty_set_rejected(self):
        empty = ConstrainedZonotope(np.eye(2), np.zeros(2),
                                    np.array([[1.0, 0.0]]), np.array([5.0]))
        with pytest.raises(SetEmptyError):
            monte_carlo_volume(empty)

    def test_estimate_rejects_negative_fields(self):
        box = Hyperbox(np.zeros(2), np.ones(2))
        with pytest.raises(ValueError):
            VolumeEstimate(-1.0, 0.0, 1000, box)


class TestGridDifference:
    def test_box_minus_box(self):
        minuend = Hyperbox(-np.ones(2), np.ones(2))
        sub = Zonotope(0.25 * np.eye(2), np.zeros(2))
        kept = grid_difference_2d(minuend, sub, resolution=41)
        assert len(kept) > 0
        assert np.all(np.abs(kept) <= 0.75 + 1e-9)
        cell = 2.0 / 40
        assert kept.max() >= 0.75 - cell - 1e-9

    def test_agrees_with_halfspace_difference(self):
        hexagon = HPolytope(
            np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0],
                      [1.0, 1.0], [-1.0, -1.0]]),
            np.array([1.0, 1.0, 1.0, 1.0, 1.5, 1.5]))
        sub = Zonotope(np.array([[0.2, 0.1], [0.0, 0.15]]), np.zeros(2))
        minuend = cgrep_from_halfspaces(hexagon, sub)
        resolution = 31
        kept = grid_difference_2d(minuend, sub, resolution)
        exact = exact_halfspace_difference(hexagon, sub)

        box = sets.bounding_box(minuend)
        cell = float(np.max((box.upper - box.lower) / (resolution - 1)))
        for x in kept:
            assert hpoly_contains(exact, x, tol=cell)
        xs = np.linspace(box.lower[0], box.upper[0], resolution)
        ys = np.linspace(box.lower[1], box.upper[1], resolution)
        grid = np.stack(np.meshgrid(xs, ys, indexing="ij"), -1).reshape(-1, 2)
        kept_rows = {tuple(np.round(p, 12)) for p in kept}
        slack = cell * float(np.max(np.linalg.norm(exact.normals, axis=1)))
        for x in grid:
            deep = np.all(exact.normals @ x <= exact.bounds - 2.0 * slack)
            if deep:
                assert tuple(np.round(x, 12)) in kept_rows

    def test_kept_points_survive_membership_samples(self):
        rng = np.random.default_rng(7)
        minuend = Hyperbox(-np.ones(2), np.ones(2))
        sub = Zonotope(np.array([[0.2, 0.05], [0.0, 0.2]]), np.zeros(2))
        kept = grid_difference_2d(minuend, sub, resolution=21)
        assert len(kept) > 0
        picks = kept[rng.choice(len(kept), size=min(20, len(kept)),
                                replace=False)]
        members = sets.sample_points(sub, 50, rng)
        for x in picks:
            for v in members:
                assert sets.contains_point(minuend, x + v)

    def test_rejects_other_dimensions(self):
        with pytest.raises(ValueError):
            grid_difference_2d(Hyperbox(np.zeros(3), np.ones(3)),
                               Zonotope(np.eye(3), np.zeros(3)), 11)

    def test_rejects_empty_minuend(self):
        empty = ConstrainedZonotope(np.eye(2), np.zeros(2),
                                    np.array([[1.0, 0.0]]), np.array([5.0]))
        with pytest.raises(SetEmptyError):
            grid_difference_2d(empty, Zonotope(np.eye(2) * 0.1, np.zeros(2)),
                               11)


class TestControlCertificate:
    def setup_problem(self):
        from czreach.reach import ReachProblem

        model = double_integrator_2d()
        target = Hyperbox(np.array([1.0, -0.5]), np.array([2.0, 0.5]))
        w = Zonotope(0.01 * np.eye(2), np.zeros(2))
        inputs = Hyperbox(np.array([-1.0]), np.array([1.0]))
        piece = HPolytope(np.vstack([np.eye(2), -np.eye(2)]),
                          np.array([10.0, 10.0, 10.0, 10.0]))
        problem = ReachProblem(
            model=model, target=sets.as_constrained(target), inputs=inputs,
            disturbance=w, safe=SafeSet((piece,)), horizon=1)
        a, b, _ = linearize(model, np.zeros(3))
        pre = backstep_linear(problem.target, a, b, problem)
        return model, problem, pre

    def test_pre_set_center_certifies(self):
        model, problem, pre = self.setup_problem()
        center = sets.bounding_box(pre).center
        assert control_certificate(center, model, problem.target,
                                   problem.inputs, problem.disturbance)

    def test_far_state_fails(self):
        model, problem, _ = self.setup_problem()
        assert not control_certificate(np.array([100.0, 100.0]), model,
                                       problem.target, problem.inputs,
                                       problem.disturbance)

    def test_pre_set_samples_certify(self):
        rng = np.random.default_rng(17)
        model, problem, pre = self.setup_problem()
        for x in sets.sample_points(pre, 50, rng):
            assert control_certificate(x, model, problem.target,
                                       problem.inputs, problem.disturbance)

    def test_vanished_target_fails(self):
        model, problem, _ = self.setup_problem()
        tiny = Hyperbox(-0.001 * np.ones(2), 0.001 * np.ones(2))
        huge_w = Zonotope(np.eye(2), np.zeros(2))
        assert not control_certificate(np.zeros(2), model,
                                       sets.as_constrained(tiny),
                                       problem.inputs, huge_w)

    def test_dimension_guard(self):
        model, problem, _ = self.setup_problem()
        with pytest.raises(ValueError):
            control_certificate(np.zeros(3), model, problem.target,
                                problem.inputs, problem.disturbance)


class TestSupportHelpers:
    def test_directions_are_unit_and_deterministic(self):
        d1 = support_directions(3, 64)
        d2 = support_directions(3, 64)
        assert np.array_equal(d1, d2)
        assert np.allclose(np.linalg.norm(d1, axis=1), 1.0)

    def test_gap_zero_for_identical_sets(self):
        box = Hyperbox(-np.ones(2), np.ones(2))
        dirs = support_directions(2, 16)
        assert max_support_gap(box, sets.as_constrained(box), dirs) < 1e-9

    def test_gap_sees_translation(self):
        box = Hyperbox(-np.ones(2), np.ones(2))
        moved = sets.translate(sets.as_constrained(box),
                               np.array([0.5, 0.0]))
        dirs = support_directions(2, 32)
        assert max_support_gap(box, moved, dirs) > 0.3
