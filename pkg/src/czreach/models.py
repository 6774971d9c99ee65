"""Discrete-time system models with Jacobians and curvature bounds.

A SystemModel bundles the step map f(x, u), its Jacobian, and per-component
interval bounds on the Hessian of f over a state-input box.  The curvature
bounds feed the linearization-error enclosure used by the reachability engine.
All builtin bounds are hand-derived expressions, not automatic differentiation,
so user-defined models must supply their own.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import intervals as iv
from .intervals import Interval
from .sets import Hyperbox, Zonotope, bounding_box

TANK_DT = 0.01
TANK_K1 = 0.015
TANK_K2 = 0.01
TANK_GRAVITY = 9.81


@dataclass(frozen=True)
class SystemModel:
    name: str
    state_dim: int
    input_dim: int
    eval_fn: Callable
    jacobian_fn: Callable
    hessian_bounds_fn: Callable
    is_linear: bool = False

    @property
    def full_dim(self) -> int:
        return self.state_dim + self.input_dim

    def eval(self, x, u) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        if x.shape[-1] != self.state_dim or u.shape[-1] != self.input_dim:
            raise ValueError("state or input dimension mismatch")
        return self.eval_fn(x, u)

    def jacobian(self, z) -> tuple[np.ndarray, np.ndarray]:
        z = np.asarray(z, dtype=float)
        if z.size != self.full_dim:
            raise ValueError("expected a stacked state-input point")
        return self.jacobian_fn(z)

    def hessian_bounds(self, i: int, domain: Interval):
        if not 0 <= i < self.state_dim:
            raise ValueError(f"component index {i} out of range")
        return self.hessian_bounds_fn(i, domain)


@dataclass(frozen=True)
class LinErrorBox:
    """Enclosure of the linearization residual f(z) - A x - B u over a region."""

    box: Hyperbox

    @property
    def center(self) -> np.ndarray:
        return self.box.center

    @property
    def half_widths(self) -> np.ndarray:
        return self.box.half_widths

    def to_zonotope(self) -> Zonotope:
        return Zonotope(np.diag(self.half_widths), self.center)

    def contains(self, points, tol: float = 1e-9):
        return self.box.contains(points, tol=tol)


def linearize(model: SystemModel, z_star) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """First-order expansion f(z) ~ A x + B u + offset around z_star."""
    z = np.asarray(z_star, dtype=float)
    a, b = model.jacobian(z)
    x, u = z[:model.state_dim], z[model.state_dim:]
    offset = model.eval(x, u) - a @ x - b @ u
    return a, b, offset


def linearization_error_box(model: SystemModel, z_star, region) -> LinErrorBox:
    """Box enclosing f(z) - A x - B u for all z in the region.

    The region is any set over stacked (x, u); it is first closed into a box.
    The Hessians are evaluated over the interval hull of the box and the
    expansion point, which covers every point on the segments the mean-value
    form needs.
    """
    z = np.asarray(z_star, dtype=float)
    _, _, offset = linearize(model, z)
    if model.is_linear:
        return LinErrorBox(Hyperbox(offset.copy(), offset.copy()))

    box = region if isinstance(region, Hyperbox) else bounding_box(region)
    if box.dim != model.full_dim:
        raise ValueError("region must live in the stacked state-input space")
    domain = Interval(np.minimum(box.lower, z), np.maximum(box.upper, z))
    dev = Interval(box.lower - z, box.upper - z)

    lo = np.empty(model.state_dim)
    hi = np.empty(model.state_dim)
    for i in range(model.state_dim):
        h_lo, h_hi = model.hessian_bounds(i, domain)
        quad = iv.quadratic_form(dev, h_lo, h_hi)
        lo[i] = offset[i] + 0.5 * float(quad.lo)
        hi[i] = offset[i] + 0.5 * float(quad.hi)
    return LinErrorBox(Hyperbox(lo, hi))


# -- builtin models ---------------------------------------------------------


def linear_model(name: str, a, b) -> SystemModel:
    """Model x+ = A x + B u with exactly zero curvature."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("state matrix must be square")
    if b.ndim != 2 or b.shape[0] != a.shape[0]:
        raise ValueError("input matrix height must match the state dimension")
    n, q = a.shape[0], b.shape[1]
    zero = np.zeros((n + q, n + q))

    return SystemModel(
        name=name, state_dim=n, input_dim=q,
        eval_fn=lambda x, u: x @ a.T + u @ b.T,
        jacobian_fn=lambda z: (a.copy(), b.copy()),
        hessian_bounds_fn=lambda i, dom: (zero.copy(), zero.copy()),
        is_linear=True)


def double_integrator_2d() -> SystemModel:
    a = np.array([[0.9962, 0.02394], [-0.1496, 0.9962]])
    b = np.array([[-0.004034], [0.08025]])
    return linear_model("double_integrator_2d", a, b)


_LINEAR_10D_A = 0.98 * np.eye(10) + 0.02 * np.eye(10, k=1)
_LINEAR_10D_B = np.zeros((10, 3))
for _j in range(3):
    _LINEAR_10D_B[3 * _j, _j] = 0.05
    _LINEAR_10D_B[3 * _j + 1, _j] = 0.02
del _j


def linear_10d(a=None, b=None) -> SystemModel:
    """Ten-state linear benchmark.

    The reference dynamics for this benchmark are not pinned down anywhere,
    so the default matrices here are a stable chain picked for the role;
    override them to study a specific plant.
    """
    a = _LINEAR_10D_A if a is None else np.asarray(a, dtype=float)
    b = _LINEAR_10D_B if b is None else np.asarray(b, dtype=float)
    if a.shape != (10, 10) or b.shape[0] != 10:
        raise ValueError("expected a 10x10 state matrix and a 10-row input matrix")
    return linear_model("linear_10d", a, b)


def _at(domain: Interval, k: int) -> Interval:
    return Interval(domain.lo[k], domain.hi[k])


def dubins_car() -> SystemModel:
    """Unicycle kinematics: heading-steered planar motion.

    State (x, y, heading), input (speed step, heading step).
    """

    def step(x, u):
        out = np.array(x, dtype=float, copy=True)
        out[..., 0] += u[..., 0] * np.cos(x[..., 2])
        out[..., 1] += u[..., 0] * np.sin(x[..., 2])
        out[..., 2] += u[..., 1]
        return out

    def jac(z):
        _, _, heading, speed, _ = z
        a = np.array([
            [1.0, 0.0, -speed * np.sin(heading)],
            [0.0, 1.0, speed * np.cos(heading)],
            [0.0, 0.0, 1.0],
        ])
        b = np.array([
            [np.cos(heading), 0.0],
            [np.sin(heading), 0.0],
            [0.0, 1.0],
        ])
        return a, b

    def hess(i, dom):
        h_lo = np.zeros((5, 5))
        h_hi = np.zeros((5, 5))
        if i == 2:
            return h_lo, h_hi
        heading = _at(dom, 2)
        speed = _at(dom, 3)
        if i == 0:
            corner = -(speed * iv.cos(heading))   # d2/d heading2
            cross = -iv.sin(heading)              # d2/d heading d speed
        else:
            corner = -(speed * iv.sin(heading))
            cross = iv.cos(heading)
        h_lo[2, 2], h_hi[2, 2] = corner.lo, corner.hi
        h_lo[2, 3] = h_lo[3, 2] = cross.lo
        h_hi[2, 3] = h_hi[3, 2] = cross.hi
        return h_lo, h_hi

    return SystemModel(
        name="dubins_car", state_dim=3, input_dim=2,
        eval_fn=step, jacobian_fn=jac, hessian_bounds_fn=hess)


def _tank_outflow_curvature(level: Interval) -> Interval:
    # second derivative of sqrt(2 g x) is -g^2 (2 g x)^(-3/2); the caller
    # attaches sign and coefficients
    if np.any(level.lo < 0.0):
        raise iv.IntervalDomainError("tank level interval reaches below zero")
    arg_lo = max(float(level.lo) * 2.0 * TANK_GRAVITY, 1e-9)
    arg_hi = max(float(level.hi) * 2.0 * TANK_GRAVITY, 1e-9)
    return Interval(np.asarray(arg_hi ** -1.5), np.asarray(arg_lo ** -1.5))


def water_tanks_10d() -> SystemModel:
    """Chain of ten draining tanks, first tank fed by the inflow input.

    Outflow speeds follow Torricelli's law, so levels must stay nonnegative.
    """
    n = 10

    def step(x, u):
        x = np.asarray(x, dtype=float)
        if np.any(x < 0.0):
            raise ValueError("tank levels must be nonnegative")
        flow = TANK_K1 * np.sqrt(2.0 * TANK_GRAVITY * x)
        out = x.copy()
        out[..., 0] += TANK_DT * (u[..., 0] - TANK_K2 * x[..., 9] - flow[..., 0])
        out[..., 1:] += TANK_DT * (flow[..., :-1] - flow[..., 1:])
        return out

    def jac(z):
        x = z[:n]
        if np.any(x <= 0.0):
            raise ValueError("tank levels must be positive to linearize")
        slope = TANK_K1 * TANK_GRAVITY / np.sqrt(2.0 * TANK_GRAVITY * x)
        a = np.eye(n)
        a[0, 0] -= TANK_DT * slope[0]
        a[0, 9] -= TANK_DT * TANK_K2
        for i in range(1, n):
            a[i, i - 1] += TANK_DT * slope[i - 1]
            a[i, i] -= TANK_DT * slope[i]
        b = np.zeros((n, 1))
        b[0, 0] = TANK_DT
        return a, b

    def hess(i, dom):
        h_lo = np.zeros((n + 1, n + 1))
        h_hi = np.zeros((n + 1, n + 1))
        gain = TANK_DT * TANK_K1 * TANK_GRAVITY ** 2
        own = iv.scalar_mul(gain, _tank_outflow_curvature(_at(dom, i)))
        h_lo[i, i], h_hi[i, i] = own.lo, own.hi
        if i > 0:
            feed = iv.scalar_mul(-gain, _tank_outflow_curvature(_at(dom, i - 1)))
            h_lo[i - 1, i - 1], h_hi[i - 1, i - 1] = feed.lo, feed.hi
        return h_lo, h_hi

    return SystemModel(
        name="water_tanks_10d", state_dim=n, input_dim=1,
        eval_fn=step, jacobian_fn=jac, hessian_bounds_fn=hess)


_BUILTINS = {
    "double_integrator_2d": double_integrator_2d,
    "linear_10d": linear_10d,
    "dubins_car": dubins_car,
    "water_tanks_10d": water_tanks_10d,
}


def builtin_model(name: str, **kwargs) -> SystemModel:
    try:
        factory = _BUILTINS[name]
    except KeyError:
        known = ", ".join(sorted(_BUILTINS))
        raise ValueError(f"unknown model {name!r}; available: {known}") from None
    return factory(**kwargs)
