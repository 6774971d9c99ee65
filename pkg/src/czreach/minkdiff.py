"""Minkowski differences with constrained-zonotope minuends.

The workhorse is a two-stage construction.  Stage one encloses the (zonotopic)
subtrahend in a scaled copy of the minuend's own generator template by solving
a linear program for the per-generator scale fractions.  Stage two removes
those fractions from the minuend's representation, which yields an inner
approximation of the difference.  For minuends given in halfspace form there
is also an exact closed-form difference, and a representation conversion that
makes the two-stage construction reproduce it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import lp
from .sets import (
    ConstrainedZonotope,
    HPolytope,
    Hyperbox,
    SetDimensionError,
    SetEmptyError,
    SetError,
    Zonotope,
    as_constrained,
    hpoly_bounding_box,
    hpoly_chebyshev,
    intersect_halfspace,
    is_empty,
    support_value,
)

# slack when checking the per-generator budget of the decomposed fit
ROW_BUDGET_SLACK = 1e-9
EMPTY_RADIUS_TOL = 1e-9
CUT_TOL = 1e-7


class TemplateFitError(SetError):
    """No scaled copy of the template generators encloses the subtrahend."""


@dataclass(frozen=True)
class TemplateScaling:
    """Fractions of the minuend's generators consumed by a subtrahend.

    ``mixing`` expresses each subtrahend generator in template coordinates;
    ``scale`` is the row-wise absolute sum of ``mixing`` and lies in [0, 1].
    """

    scale: np.ndarray
    mixing: np.ndarray
    center: np.ndarray
    constraint_rhs: np.ndarray
    objective: float
    iterations: int


@dataclass(frozen=True)
class DiffResult:
    difference: ConstrainedZonotope | None
    shrink: TemplateScaling | None
    enclosing: ConstrainedZonotope | None
    empty: bool
    certified_exact: bool


def _zonotope_operand(s) -> Zonotope:
    if isinstance(s, Zonotope):
        return s
    if isinstance(s, Hyperbox):
        return s.to_zonotope()
    if isinstance(s, ConstrainedZonotope):
        raise TypeError(
            "constrained subtrahends are not supported; enclose the set in a "
            "plain zonotope first (e.g. its bounding box)")
    raise TypeError(f"expected a zonotope or hyperbox, got {type(s).__name__}")


def _weights(weights, n_gen: int) -> np.ndarray:
    if weights is None:
        return np.ones(n_gen)
    w = np.asarray(weights, dtype=float)
    if w.shape != (n_gen,):
        raise SetDimensionError(
            f"weights must have one entry per template generator ({n_gen})")
    if np.any(w <= 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be positive and finite")
    return w


def _fit_columns(stack, rhs, w, n_gen):
    """Fit each subtrahend generator independently, ignoring the budget."""
    n_sub = rhs.shape[1]
    cols = np.empty((n_gen, n_sub))
    iters = 0
    cost = np.concatenate([w, w])
    signed = np.hstack([stack, -stack])
    lower = np.zeros(2 * n_gen)
    for j in range(n_sub):
        sol = lp.solve(lp.LinearProgram.build(
            cost, a_eq=signed, b_eq=rhs[:, j], lower=lower))
        if sol.status is lp.LpStatus.INFEASIBLE:
            raise TemplateFitError(
                "subtrahend generator lies outside the span of the template")
        if sol.status is not lp.LpStatus.OPTIMAL:
            raise SetError(f"template fit LP ended with status {sol.status}")
        cols[:, j] = sol.x[:n_gen] - sol.x[n_gen:]
        iters += sol.iterations
    return cols, iters


def _fit_joint(stack, rhs, w, n_gen, constraints, offsets, with_witness):
    """Fit all subtrahend generators at once under the unit budget.

    When ``with_witness`` is set, extra variables force the existence of a
    template parameter vector compatible with the remaining fractions, which
    keeps the stage-two set nonempty whenever that is achievable.
    """
    n_sub = rhs.shape[1]
    n_half = n_gen * n_sub
    n_extra = n_gen if with_witness else 0
    n_var = 2 * n_half + n_extra

    cost = np.concatenate([np.tile(w, n_sub), np.tile(w, n_sub), np.zeros(n_extra)])
    block = np.kron(np.eye(n_sub), stack)
    a_eq = np.hstack([block, -block, np.zeros((block.shape[0], n_extra))])
    b_eq = rhs.flatten(order="F")
    if with_witness and constraints.shape[0] > 0:
        wit_rows = np.hstack([np.zeros((constraints.shape[0], 2 * n_half)),
                              constraints])
        a_eq = np.vstack([a_eq, wit_rows])
        b_eq = np.concatenate([b_eq, offsets])

    row_sum = np.tile(np.eye(n_gen), n_sub)
    if with_witness:
        eye = np.eye(n_gen)
        a_in = np.vstack([
            np.hstack([row_sum, row_sum, eye]),
            np.hstack([row_sum, row_sum, -eye]),
        ])
        b_in = np.ones(2 * n_gen)
    else:
        a_in = np.hstack([row_sum, row_sum])
        b_in = np.ones(n_gen)

    lower = np.concatenate([np.zeros(2 * n_half), -np.ones(n_extra)])
    upper = np.concatenate([np.full(2 * n_half, np.inf), np.ones(n_extra)])
    sol = lp.solve(lp.LinearProgram.build(
        cost, a_eq=a_eq, b_eq=b_eq, a_in=a_in, b_in=b_in,
        lower=lower, upper=upper))
    if sol.status is lp.LpStatus.INFEASIBLE:
        raise TemplateFitError(
            "no template scaling within the unit budget encloses the subtrahend")
    if sol.status is not lp.LpStatus.OPTIMAL:
        raise SetError(f"template fit LP ended with status {sol.status}")
    gamma = (sol.x[:n_half] - sol.x[n_half:2 * n_half]).reshape(
        (n_gen, n_sub), order="F")
    return gamma, sol.iterations


def enclose_in_template(minuend, subtrahend, *, weights=None,
                        ensure_nonempty: bool = False) -> TemplateScaling:
    """Smallest scaled copy of the minuend's template that covers the subtrahend.

    Minimizes the weighted sum of the scale fractions.  Raises
    TemplateFitError when no admissible scaling exists, which callers should
    read as "difference unavailable by this method".
    """
    cz = as_constrained(minuend)
    z = _zonotope_operand(subtrahend)
    if z.dim != cz.dim:
        raise SetDimensionError("operand dimensions differ")
    n_gen = cz.num_generators
    m = cz.num_constraints
    w = _weights(weights, n_gen)
    if z.num_generators == 0:
        return TemplateScaling(
            scale=np.zeros(n_gen), mixing=np.zeros((n_gen, 0)),
            center=z.center.copy(), constraint_rhs=np.zeros(m),
            objective=0.0, iterations=0)

    stack = np.vstack([cz.generators, cz.constraints])
    rhs = np.vstack([z.generators, np.zeros((m, z.num_generators))])

    gamma = None
    iters = 0
    if not ensure_nonempty:
        gamma, iters = _fit_columns(stack, rhs, w, n_gen)
        budget = np.abs(gamma).sum(axis=1)
        if budget.size and budget.max() > 1.0 + ROW_BUDGET_SLACK:
            gamma = None  # budget violated, the columns interact
    if gamma is None:
        gamma, joint_iters = _fit_joint(
            stack, rhs, w, n_gen, cz.constraints, cz.offsets, ensure_nonempty)
        iters += joint_iters

    sigma = np.clip(np.abs(gamma).sum(axis=1), 0.0, 1.0)
    return TemplateScaling(
        scale=sigma, mixing=gamma, center=z.center.copy(),
        constraint_rhs=np.zeros(m), objective=float(w @ sigma),
        iterations=iters)


def scaled_template(minuend, scaling: TemplateScaling) -> ConstrainedZonotope:
    """The enclosing set: the minuend's template scaled down to the subtrahend."""
    cz = as_constrained(minuend)
    s = scaling.scale
    return ConstrainedZonotope(
        cz.generators * s, scaling.center, cz.constraints * s,
        scaling.constraint_rhs)


def scaled_difference(minuend, scaling: TemplateScaling) -> ConstrainedZonotope:
    """Stage two: remove the consumed fractions from the minuend's template."""
    cz = as_constrained(minuend)
    rem = 1.0 - scaling.scale
    return ConstrainedZonotope(
        cz.generators * rem, cz.center - scaling.center,
        cz.constraints * rem, cz.offsets)


def underapprox_difference(minuend, subtrahend, *, weights=None,
                           ensure_nonempty: bool = False) -> DiffResult:
    """Inner approximation of minuend ⊖ subtrahend.

    Guarantee: every point of the result, translated by any point of the
    subtrahend, stays inside the minuend.  The result may be strictly smaller
    than the true difference; it is never larger.
    """
    cz = as_constrained(minuend)
    try:
        scaling = enclose_in_template(
            cz, subtrahend, weights=weights, ensure_nonempty=ensure_nonempty)
    except TemplateFitError:
        return DiffResult(difference=None, shrink=None, enclosing=None,
                          empty=True, certified_exact=False)
    difference = scaled_difference(cz, scaling)
    return DiffResult(
        difference=difference, shrink=scaling,
        enclosing=scaled_template(cz, scaling),
        empty=is_empty(difference), certified_exact=False)


def exact_halfspace_difference(minuend: HPolytope, subtrahend) -> HPolytope:
    """Exact difference of a halfspace-form minuend and a zonotope.

    Each facet offset drops by the subtrahend's support in the facet normal
    direction.  Closed form, no optimization involved.
    """
    z = _zonotope_operand(subtrahend)
    if z.dim != minuend.dim:
        raise SetDimensionError("operand dimensions differ")
    shift = minuend.normals @ z.center
    if z.num_generators:
        shift = shift + np.abs(minuend.normals @ z.generators).sum(axis=1)
    return HPolytope(minuend.normals, minuend.bounds - shift)


def _rich_rep(minuend: HPolytope, z: Zonotope,
              diff_center: np.ndarray) -> ConstrainedZonotope:
    n = minuend.dim
    h = minuend.normals
    a = minuend.bounds
    ell = minuend.num_halfspaces
    c = z.center + diff_center
    box = hpoly_bounding_box(minuend)
    radius = float(np.maximum(box.upper - c, c - box.lower).max())
    r = max(1.1 * radius, 1e-9)
    row_norms = np.abs(h).sum(axis=1)
    d = a - h @ c + r * row_norms
    gens = np.hstack([r * np.eye(n), np.zeros((n, ell))])
    cons = np.hstack([r * h, np.diag(d / 2.0)])
    offs = (a - h @ c - r * row_norms) / 2.0
    return ConstrainedZonotope(gens, c, cons, offs)


def _checked_diff_center(minuend: HPolytope, z: Zonotope):
    """Chebyshev center of the exact difference, or None when it is empty."""
    diff = exact_halfspace_difference(minuend, z)
    if diff.num_halfspaces == 0:
        raise SetError("minuend polytope must be bounded")
    center, radius = hpoly_chebyshev(diff)
    if radius < -EMPTY_RADIUS_TOL:
        return None
    return center


def cgrep_from_halfspaces(minuend: HPolytope, subtrahend) -> ConstrainedZonotope:
    """Generator-form representation of the minuend tailored to a subtrahend.

    The representation describes exactly the same set as the minuend, but its
    template is rich enough that the two-stage difference against this
    subtrahend is exact.  The center is placed inside the (necessarily
    nonempty) exact difference, shifted by the subtrahend center.
    """
    z = _zonotope_operand(subtrahend)
    if z.dim != minuend.dim:
        raise SetDimensionError("operand dimensions differ")
    center = _checked_diff_center(minuend, z)
    if center is None:
        raise SetEmptyError(
            "difference is empty; no admissible recentering exists")
    return _rich_rep(minuend, z, center)


def exact_difference(minuend: HPolytope, subtrahend) -> DiffResult:
    """Exact minuend ⊖ subtrahend as a constrained zonotope.

    Runs the two-stage construction on a purpose-built representation of the
    minuend, which is guaranteed to reproduce the true difference.  An empty
    difference is reported via the empty flag, not an error.
    """
    z = _zonotope_operand(subtrahend)
    if z.dim != minuend.dim:
        raise SetDimensionError("operand dimensions differ")
    center = _checked_diff_center(minuend, z)
    if center is None:
        return DiffResult(difference=None, shrink=None, enclosing=None,
                          empty=True, certified_exact=True)
    rich = _rich_rep(minuend, z, center)
    try:
        scaling = enclose_in_template(rich, z)
    except TemplateFitError:
        return DiffResult(difference=None, shrink=None, enclosing=None,
                          empty=True, certified_exact=True)
    difference = scaled_difference(rich, scaling)
    return DiffResult(
        difference=difference, shrink=scaling,
        enclosing=scaled_template(rich, scaling),
        empty=is_empty(difference), certified_exact=True)


def add_redundant_cut(s, normal, bound: float, *,
                      tol: float = CUT_TOL) -> ConstrainedZonotope:
    """Append a halfspace the set already satisfies to its representation.

    The set is unchanged; the representation gains one generator column and
    one constraint row.  A richer representation can only improve the
    stage-one fit.  Non-redundant cuts are rejected.
    """
    cz = as_constrained(s)
    sup = support_value(cz, normal)
    if bound < sup - tol:
        raise SetError(
            f"cut is not redundant: bound {bound:.9g} is below the set's "
            f"support {sup:.9g}")
    return intersect_halfspace(cz, normal, bound, check=False)
