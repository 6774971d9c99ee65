"""Backward reachable set computation under disturbances.

Each backward step under-approximates the set of states from which some
admissible input drives the system into the previous step's set for every
disturbance.  Nonlinear dynamics are handled by linearizing around a chosen
point and subtracting a box that covers the linearization residual; the two
strategies differ in how that box is obtained.  The scaling strategy grows the
box geometrically until it covers the residual over the computed set.  The
splitting strategy fixes the box up front and splits the previous set into
smaller pieces until the residual fits, yielding a union of sets that can
capture nonconvex backward reachable sets.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import sets
from .minkdiff import TemplateFitError, underapprox_difference
from .models import LinErrorBox, SystemModel, linearization_error_box, linearize
from .sets import (
    ConstrainedZonotope,
    HPolytope,
    Hyperbox,
    SafeSet,
    SetEmptyError,
    Zonotope,
    as_constrained,
    as_zonotope,
)

COND_LIMIT = 1e12
CUT_SKIP_TOL = 1e-10
DEGENERATE_TOL = 1e-12
SPLIT_DEPTH_CAP = 12


class ReachError(Exception):
    """Raised when a backward step cannot be carried out."""


class Method(enum.Enum):
    SCALING = "scaling"
    SPLITTING = "splitting"


class Termination(enum.Enum):
    HORIZON_REACHED = "horizon_reached"
    EMPTY_SET = "empty_set"
    BRANCH_BUDGET_EXHAUSTED = "branch_budget_exhausted"
    SCALE_ITERS_EXCEEDED = "scale_iters_exceeded"


@dataclass(frozen=True)
class ReachProblem:
    model: SystemModel
    target: ConstrainedZonotope
    inputs: ConstrainedZonotope
    disturbance: Zonotope
    safe: SafeSet
    horizon: int
    method: Method = Method.SCALING
    alpha: float = 1.1
    error_budget: np.ndarray | None = None
    max_branches: int = 64
    max_scale_iters: int = 30

    def __post_init__(self):
        model = self.model
        if not isinstance(model, SystemModel):
            raise ValueError("model must be a SystemModel")
        target = as_constrained(self.target)
        inputs = as_constrained(self.inputs)
        disturbance = as_zonotope(self.disturbance)
        if target.dim != model.state_dim:
            raise ValueError("target dimension does not match the model state")
        if inputs.dim != model.input_dim:
            raise ValueError("input set dimension does not match the model")
        if sets.is_empty(inputs):
            raise ValueError("input set is empty")
        if disturbance.dim != model.state_dim:
            raise ValueError("disturbance dimension does not match the model state")
        if not isinstance(self.safe, SafeSet) or self.safe.dim != model.state_dim:
            raise ValueError("safe set must be a SafeSet over the state space")
        if not isinstance(self.horizon, int) or self.horizon < 0:
            raise ValueError("horizon must be a nonnegative integer")
        method = Method(self.method) if isinstance(self.method, str) else self.method
        if not isinstance(method, Method):
            raise ValueError("method must be Method.SCALING or Method.SPLITTING")
        if not self.alpha > 1.0:
            raise ValueError("alpha must exceed 1")
        if self.max_branches < 1 or self.max_scale_iters < 1:
            raise ValueError("branch and iteration budgets must be at least 1")
        if method is Method.SCALING and len(self.safe.pieces) != 1:
            raise ValueError("the scaling method handles a single safe piece; "
                             "use the splitting method for unions")
        budget = self.error_budget
        if method is Method.SPLITTING:
            if budget is None:
                raise ValueError("the splitting method needs an error budget")
            budget = np.asarray(budget, dtype=float)
            if budget.shape != (model.state_dim,) or np.any(budget < 0):
                raise ValueError("error budget must be a nonnegative state-dim vector")
        elif budget is not None:
            budget = np.asarray(budget, dtype=float)
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "disturbance", disturbance)
        object.__setattr__(self, "method", method)
        object.__setattr__(self, "error_budget", budget)


@dataclass(frozen=True)
class StepDiagnostics:
    pieces: int
    scale_iterations: int = 0
    splits: int = 0
    pruned_empty: int = 0
    depth_limited: bool = False


@dataclass(frozen=True)
class ReachResult:
    steps: list
    diagnostics: list
    termination: Termination

    @property
    def horizon_completed(self) -> int:
        return len(self.steps) - 1


# -- shared pieces ----------------------------------------------------------


def _difference(source: ConstrainedZonotope, subtrahend: Zonotope):
    """Inner approximation of source minus subtrahend; None when empty.

    Near-zero subtrahend columns are dropped first (they only shrink the
    subtrahend by solver-noise amounts), and a fully degenerate subtrahend
    becomes a plain translation.  A fit that lands on an empty set is retried
    with the nonemptiness witness before giving up.
    """
    keep = np.abs(subtrahend.generators).max(axis=0, initial=0.0) > DEGENERATE_TOL
    trimmed = subtrahend if bool(keep.all()) else \
        Zonotope(subtrahend.generators[:, keep], subtrahend.center)
    if trimmed.num_generators == 0:
        shifted = sets.translate(source, -trimmed.center)
        return None if sets.is_empty(shifted) else shifted
    try:
        result = underapprox_difference(source, trimmed)
    except TemplateFitError:
        return None
    if not result.empty:
        return result.difference
    try:
        result = underapprox_difference(source, trimmed, ensure_nonempty=True)
    except TemplateFitError:
        return None
    return None if result.empty else result.difference


def _cut_with_polytope(czset: ConstrainedZonotope, piece: HPolytope, lift: int = 0):
    """Intersect with each halfspace of the piece, skipping redundant ones.

    `lift` appends that many zero entries to each normal, for sets living in a
    product space whose leading block is the piece's space.  Returns None when
    the intersection is empty.
    """
    current = czset
    for normal, bound in zip(piece.normals, piece.bounds):
        h = np.concatenate([normal, np.zeros(lift)]) if lift else normal
        try:
            high = sets.support_value(current, h)
        except SetEmptyError:
            return None
        if high <= bound + CUT_SKIP_TOL:
            continue
        low = -sets.support_value(current, -h)
        if low > bound + sets.MEMBER_TOL:
            return None
        current = sets.intersect_halfspace(current, h, bound, check=False)
    return None if sets.is_empty(current) else current


def _box_subset(inner: Hyperbox, outer: Hyperbox, tol: float = 1e-12) -> bool:
    return bool(np.all(inner.lower >= outer.lower - tol)
                and np.all(inner.upper <= outer.upper + tol))


def _error_zonotope(error) -> Zonotope:
    if isinstance(error, LinErrorBox):
        return error.to_zonotope()
    if isinstance(error, (Hyperbox, Zonotope)):
        return as_zonotope(error)
    raise TypeError("linearization error must be a box or zonotope")


# -- backward step primitives ----------------------------------------------


def project_states(z, n: int) -> ConstrainedZonotope:
    """First n coordinates of a set over stacked (x, u)."""
    cz = as_constrained(z)
    if cz.dim < n:
        raise ValueError("cannot project onto more coordinates than the set has")
    return sets.linear_map(np.eye(n, cz.dim), cz)


def backstep_linear(xprev, a_mat, b_mat, problem: ReachProblem):
    """One exact backward step for linear dynamics.

    Computes the safe states x with A x + B u landing in xprev shrunk by the
    disturbance, for some admissible u.  Requires an invertible state matrix.
    Returns None when the step is empty.
    """
    a_mat = np.asarray(a_mat, dtype=float)
    b_mat = np.asarray(b_mat, dtype=float)
    if np.linalg.cond(a_mat) > COND_LIMIT:
        raise ReachError("state matrix is numerically singular; "
                         "the linear backward step needs an invertible A")
    if len(problem.safe.pieces) != 1:
        raise ReachError("the linear backward step intersects one safe piece")
    diff = _difference(as_constrained(xprev), problem.disturbance)
    if diff is None:
        return None
    reachable = sets.minkowski_sum(diff, sets.linear_map(-b_mat, problem.inputs))
    pre = sets.linear_map(np.linalg.inv(a_mat), reachable)
    return _cut_with_polytope(as_constrained(pre), problem.safe.pieces[0])


def backstep_state_input(x, a_mat, b_mat, inputs, disturbance, error,
                         safe_piece: HPolytope | None = None):
    """Backward step in the stacked (x, u) space for linearized dynamics.

    Returns the set of pairs [x; u] with A x + B u inside x shrunk by the
    linearization error plus the disturbance, u constrained to the input set,
    and, when a safe piece is given, x constrained to it.  Without a safe
    piece the state is recovered through the inverse state matrix, which must
    then be well conditioned.  Returns None when empty.
    """
    a_mat = np.asarray(a_mat, dtype=float)
    b_mat = np.asarray(b_mat, dtype=float)
    n, q = a_mat.shape[0], b_mat.shape[1]
    subtrahend = sets.minkowski_sum(_error_zonotope(error), as_zonotope(disturbance))
    diff = _difference(as_constrained(x), subtrahend)
    if diff is None:
        return None
    if safe_piece is None:
        if np.linalg.cond(a_mat) > COND_LIMIT:
            raise ReachError("state matrix is numerically singular; cannot "
                             "recover states without a bounding safe piece")
        ainv = np.linalg.inv(a_mat)
        lift = np.block([[ainv, -ainv @ b_mat],
                         [np.zeros((q, n)), np.eye(q)]])
        return sets.linear_map(lift, sets.cartesian_product(diff, inputs))
    base = sets.cartesian_product(sets.hpoly_bounding_box(safe_piece), inputs)
    joined = sets.intersect_under_map(base, np.hstack([a_mat, b_mat]), diff)
    if sets.is_empty(joined):
        return None
    return _cut_with_polytope(joined, safe_piece, lift=q)


# -- scaling strategy -------------------------------------------------------


def scaling_step(xprev, problem: ReachProblem):
    """One backward step with a geometrically grown error box.

    Returns (state set or None, scale iterations used, budget exhausted).
    """
    model = problem.model
    piece = problem.safe.pieces[0]
    x_box = sets.bounding_box(as_constrained(xprev))
    u_box = sets.bounding_box(problem.inputs)
    z_probe = np.concatenate([x_box.center, u_box.center])
    a0, b0, offset0 = linearize(model, z_probe)
    seed = backstep_state_input(xprev, a0, b0, problem.inputs,
                                problem.disturbance, Hyperbox(offset0, offset0),
                                piece)
    if seed is None:
        return None, 0, False
    if model.is_linear:
        # zero curvature: the probe step is already exact
        return project_states(seed, model.state_dim), 0, False
    z_star = sets.bounding_box(seed).center
    a_mat, b_mat, _ = linearize(model, z_star)
    budget = linearization_error_box(model, z_star, seed).box
    for iteration in range(1, problem.max_scale_iters + 1):
        candidate = backstep_state_input(xprev, a_mat, b_mat, problem.inputs,
                                         problem.disturbance, budget, piece)
        if candidate is None:
            return None, iteration, False
        achieved = linearization_error_box(model, z_star, candidate).box
        if _box_subset(achieved, budget):
            return project_states(candidate, model.state_dim), iteration, False
        budget = Hyperbox(budget.center - problem.alpha * budget.half_widths,
                          budget.center + problem.alpha * budget.half_widths)
    return None, problem.max_scale_iters, True


# -- splitting strategy -----------------------------------------------------


def split_along_generator(s, j: int):
    """Two halves of the set along generator j; their union is the set."""
    cz = as_constrained(s)
    if not 0 <= j < cz.num_generators:
        raise ValueError("generator index out of range")
    gens = cz.generators.copy()
    cons = cz.constraints.copy()
    g_j = cz.generators[:, j].copy()
    a_j = cz.constraints[:, j].copy()
    gens[:, j] *= 0.5
    cons[:, j] *= 0.5
    first = ConstrainedZonotope(gens, cz.center + 0.5 * g_j,
                                cons, cz.offsets - 0.5 * a_j)
    second = ConstrainedZonotope(gens, cz.center - 0.5 * g_j,
                                 cons, cz.offsets + 0.5 * a_j)
    return first, second


def pick_split_generator(s, model: SystemModel, z_star, error_budget,
                         inputs) -> int:
    """Generator whose tentative split shrinks the residual bound the most.

    Scores each candidate by the product of the children's worst
    residual-to-budget ratios; ties go to the smallest index.  Columns that
    are zero in the generator matrix are not candidates.
    """
    cz = as_constrained(s)
    norms = np.abs(cz.generators).max(axis=0, initial=0.0)
    candidates = [j for j in range(cz.num_generators) if norms[j] > DEGENERATE_TOL]
    if not candidates:
        raise ReachError("set has no splittable generator")
    l_bar = np.asarray(error_budget, dtype=float)
    u_box = sets.bounding_box(as_constrained(inputs))
    best_j, best_rho = None, np.inf
    for j in candidates:
        rho = 1.0
        for child in split_along_generator(cz, j):
            try:
                child_box = sets.bounding_box(child)
            except SetEmptyError:
                rho = 0.0
                break
            region = Hyperbox(np.concatenate([child_box.lower, u_box.lower]),
                              np.concatenate([child_box.upper, u_box.upper]))
            half = linearization_error_box(model, z_star, region).half_widths
            with np.errstate(divide="ignore", invalid="ignore"):
                raw = half / l_bar
            ratio = np.where(half > 1e-15, raw, 0.0)
            rho *= float(ratio.max()) if ratio.size else 0.0
        if rho < best_rho:
            best_rho, best_j = rho, j
    if best_j is None or not np.isfinite(best_rho):
        raise ReachError("error budget has a zero entry where curvature "
                         "persists; increase the admissible error")
    return best_j


def farthest_point_sample(pieces, budget: int):
    """Subset of at most `budget` sets spread over the collection.

    Greedy farthest-point selection on bounding-box centers, seeded with the
    largest bounding-box volume.  The returned sets keep their input order.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    items = list(pieces)
    if len(items) <= budget:
        return items
    boxes = [sets.bounding_box(as_constrained(s)) for s in items]
    centers = np.array([b.center for b in boxes])
    volumes = np.array([b.volume() for b in boxes])
    chosen = [int(np.argmax(volumes))]
    dist = np.linalg.norm(centers - centers[chosen[0]], axis=1)
    dist[chosen[0]] = -1.0
    while len(chosen) < budget:
        pick = int(np.argmax(dist))
        chosen.append(pick)
        dist = np.minimum(dist, np.linalg.norm(centers - centers[pick], axis=1))
        dist[pick] = -1.0
    return [items[i] for i in sorted(chosen)]


def _split_recurse(piece_set, problem: ReachProblem, u_box: Hyperbox,
                   depth: int, counters: dict):
    model = problem.model
    x_box = sets.bounding_box(piece_set)
    z_star = np.concatenate([x_box.center, u_box.center])
    a_mat, b_mat, offset = linearize(model, z_star)
    budget = Hyperbox(offset - problem.error_budget,
                      offset + problem.error_budget)
    lifted = backstep_state_input(piece_set, a_mat, b_mat, problem.inputs,
                                  problem.disturbance, budget, None)
    if lifted is None:
        counters["pruned"] += 1
        return []
    achieved = linearization_error_box(model, z_star, lifted).box
    if _box_subset(achieved, budget):
        projected = project_states(lifted, model.state_dim)
        emitted = []
        for piece in problem.safe.pieces:
            cut = _cut_with_polytope(projected, piece)
            if cut is None:
                counters["pruned"] += 1
            else:
                emitted.append(cut)
        return emitted
    if depth >= SPLIT_DEPTH_CAP:
        counters["depth"] = True
        return []
    j = pick_split_generator(piece_set, model, z_star, problem.error_budget,
                             problem.inputs)
    counters["splits"] += 1
    first, second = split_along_generator(piece_set, j)
    return (_split_recurse(first, problem, u_box, depth + 1, counters)
            + _split_recurse(second, problem, u_box, depth + 1, counters))


def splitting_step(prev_pieces, problem: ReachProblem):
    """One backward step over a union of pieces, splitting where needed."""
    counters = {"splits": 0, "pruned": 0, "depth": False}
    u_box = sets.bounding_box(problem.inputs)
    collected = []
    for piece_set in prev_pieces:
        collected.extend(_split_recurse(as_constrained(piece_set), problem,
                                        u_box, 0, counters))
    if len(collected) > problem.max_branches:
        collected = farthest_point_sample(collected, problem.max_branches)
    diag = StepDiagnostics(pieces=len(collected), splits=counters["splits"],
                           pruned_empty=counters["pruned"],
                           depth_limited=counters["depth"])
    return collected, diag


# -- driver -----------------------------------------------------------------


def run(problem: ReachProblem) -> ReachResult:
    """Iterate backward steps from the target for up to `horizon` steps."""
    target = as_constrained(problem.target)
    if sets.is_empty(target):
        raise ValueError("target set is empty")
    steps = [[target]]
    diagnostics = [StepDiagnostics(pieces=1)]
    termination = Termination.HORIZON_REACHED

    linear_fast = problem.model.is_linear and problem.method is Method.SCALING
    if linear_fast:
        a_lin, b_lin, _ = linearize(problem.model,
                                    np.zeros(problem.model.full_dim))
        if np.linalg.cond(a_lin) > COND_LIMIT:
            linear_fast = False

    for _ in range(problem.horizon):
        if problem.method is Method.SCALING:
            if linear_fast:
                nxt = backstep_linear(steps[-1][0], a_lin, b_lin, problem)
                iterations = 0
            else:
                nxt, iterations, exceeded = scaling_step(steps[-1][0], problem)
                if exceeded:
                    termination = Termination.SCALE_ITERS_EXCEEDED
                    break
            if nxt is None:
                termination = Termination.EMPTY_SET
                break
            steps.append([sets.compact(nxt)])
            diagnostics.append(StepDiagnostics(pieces=1,
                                               scale_iterations=iterations))
        else:
            pieces, diag = splitting_step(steps[-1], problem)
            if not pieces:
                termination = (Termination.BRANCH_BUDGET_EXHAUSTED
                               if diag.depth_limited else Termination.EMPTY_SET)
                break
            steps.append([sets.compact(p) for p in pieces])
            diagnostics.append(diag)
    return ReachResult(steps=steps, diagnostics=diagnostics,
                       termination=termination)
