"""Convex set types built around the constrained generator representation.

A constrained zonotope is {G th + c : th in [-1, 1]^N, A th = b}.  All
operations here stay in that representation; no vertex or facet enumeration
ever happens.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import lp

MEMBER_TOL = 1e-7
ZERO_TOL = 1e-12


class SetError(Exception):
    pass


class SetDimensionError(SetError):
    """Mismatched ambient or generator dimensions."""


class SetEmptyError(SetError):
    """An operation that requires a nonempty set received an empty one."""


def _vec(v, name):
    arr = np.array(v, dtype=float)
    if arr.ndim != 1:
        raise SetDimensionError(f"{name} must be 1-D, got shape {arr.shape}")
    return arr


def _mat(m, name):
    arr = np.array(m, dtype=float)
    if arr.ndim != 2:
        raise SetDimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    return arr


def _freeze(*arrays):
    for a in arrays:
        a.setflags(write=False)


@dataclass(frozen=True, eq=False)
class Hyperbox:
    """Axis-aligned box [lower, upper]."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = _vec(self.lower, "lower")
        hi = _vec(self.upper, "upper")
        if lo.size != hi.size:
            raise SetDimensionError("lower and upper must have equal length")
        if np.any(lo > hi + ZERO_TOL):
            raise SetDimensionError("lower bound exceeds upper bound")
        _freeze(lo, hi)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    @property
    def half_widths(self) -> np.ndarray:
        return 0.5 * (self.upper - self.lower)

    def to_zonotope(self) -> "Zonotope":
        return Zonotope(np.diag(self.half_widths), self.center)

    def to_constrained(self) -> "ConstrainedZonotope":
        return self.to_zonotope().to_constrained()

    def contains(self, points: np.ndarray, tol: float = MEMBER_TOL) -> np.ndarray:
        pts = np.atleast_2d(points)
        return np.all((pts >= self.lower - tol) & (pts <= self.upper + tol), axis=1)

    def hull(self, other: "Hyperbox") -> "Hyperbox":
        return Hyperbox(np.minimum(self.lower, other.lower),
                        np.maximum(self.upper, other.upper))

    def volume(self) -> float:
        return float(np.prod(self.upper - self.lower))


@dataclass(frozen=True, eq=False)
class Zonotope:
    """Affine image of the unit cube: {G th + c : th in [-1, 1]^N}."""

    generators: np.ndarray
    center: np.ndarray

    def __post_init__(self):
        g = _mat(self.generators, "generators")
        c = _vec(self.center, "center")
        if g.shape[0] != c.size:
            raise SetDimensionError(
                f"generator rows {g.shape[0]} != center length {c.size}")
        _freeze(g, c)
        object.__setattr__(self, "generators", g)
        object.__setattr__(self, "center", c)

    @property
    def dim(self) -> int:
        return self.center.size

    @property
    def num_generators(self) -> int:
        return self.generators.shape[1]

    def to_constrained(self) -> "ConstrainedZonotope":
        n_gen = self.num_generators
        return ConstrainedZonotope(self.generators, self.center,
                                   np.zeros((0, n_gen)), np.zeros(0))

    def bounding_box(self) -> Hyperbox:
        radius = np.abs(self.generators).sum(axis=1)
        return Hyperbox(self.center - radius, self.center + radius)


@dataclass(frozen=True, eq=False)
class ConstrainedZonotope:
    """{G th + c : th in [-1, 1]^N, A th = b}."""

    generators: np.ndarray
    center: np.ndarray
    constraints: np.ndarray
    offsets: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        g = _mat(self.generators, "generators")
        c = _vec(self.center, "center")
        a = _mat(self.constraints, "constraints")
        b = _vec(self.offsets, "offsets")
        if g.shape[0] != c.size:
            raise SetDimensionError(
                f"generator rows {g.shape[0]} != center length {c.size}")
        if a.shape[0] != b.size:
            raise SetDimensionError(
                f"constraint rows {a.shape[0]} != offset length {b.size}")
        if a.shape[1] != g.shape[1]:
            raise SetDimensionError(
                f"constraint columns {a.shape[1]} != generator count {g.shape[1]}")
        _freeze(g, c, a, b)
        object.__setattr__(self, "generators", g)
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "constraints", a)
        object.__setattr__(self, "offsets", b)

    @property
    def dim(self) -> int:
        return self.center.size

    @property
    def num_generators(self) -> int:
        return self.generators.shape[1]

    @property
    def num_constraints(self) -> int:
        return self.constraints.shape[0]


@dataclass(frozen=True, eq=False)
class HPolytope:
    """{x : H x <= a}.  May be unbounded."""

    normals: np.ndarray
    bounds: np.ndarray

    def __post_init__(self):
        h = _mat(self.normals, "normals")
        a = _vec(self.bounds, "bounds")
        if h.shape[0] != a.size:
            raise SetDimensionError(
                f"normal rows {h.shape[0]} != bound length {a.size}")
        zero = np.abs(h).sum(axis=1) <= ZERO_TOL
        if np.any(zero & (a < -MEMBER_TOL)):
            raise SetDimensionError("zero normal with negative bound is nowhere satisfiable")
        if np.any(zero):
            h, a = h[~zero], a[~zero]
        _freeze(h, a)
        object.__setattr__(self, "normals", h)
        object.__setattr__(self, "bounds", a)

    @property
    def dim(self) -> int:
        return self.normals.shape[1]

    @property
    def num_halfspaces(self) -> int:
        return self.bounds.size

    def contains(self, points: np.ndarray, tol: float = MEMBER_TOL) -> np.ndarray:
        pts = np.atleast_2d(points)
        return np.all(pts @ self.normals.T <= self.bounds + tol, axis=1)


@dataclass(frozen=True, eq=False)
class SafeSet:
    """Union of H-polytope pieces the state is allowed to occupy."""

    pieces: tuple

    def __post_init__(self):
        pieces = tuple(self.pieces)
        if not pieces:
            raise SetDimensionError("a safe set needs at least one piece")
        dims = {p.dim for p in pieces}
        if len(dims) != 1:
            raise SetDimensionError("safe set pieces disagree on dimension")
        for p in pieces:
            if not isinstance(p, HPolytope):
                raise SetDimensionError("safe set pieces must be HPolytope")
        object.__setattr__(self, "pieces", pieces)

    @property
    def dim(self) -> int:
        return self.pieces[0].dim

    def contains(self, points: np.ndarray, tol: float = MEMBER_TOL) -> np.ndarray:
        pts = np.atleast_2d(points)
        mask = np.zeros(pts.shape[0], dtype=bool)
        for p in self.pieces:
            mask |= p.contains(pts, tol)
        return mask


SetLike = ConstrainedZonotope | Zonotope | Hyperbox


def as_constrained(s: SetLike) -> ConstrainedZonotope:
    if isinstance(s, ConstrainedZonotope):
        return s
    if isinstance(s, Zonotope):
        return s.to_constrained()
    if isinstance(s, Hyperbox):
        return s.to_constrained()
    raise SetDimensionError(f"cannot interpret {type(s).__name__} as a constrained zonotope")


def as_zonotope(s) -> Zonotope:
    if isinstance(s, Zonotope):
        return s
    if isinstance(s, Hyperbox):
        return s.to_zonotope()
    raise SetDimensionError(f"cannot interpret {type(s).__name__} as a zonotope")


# ---------------------------------------------------------------------------
# operations


def linear_map(matrix, s: SetLike):
    """Image M S.  Zonotopes stay zonotopes; everything else becomes constrained."""
    m = _mat(matrix, "matrix")
    if isinstance(s, (Zonotope, Hyperbox)):
        z = as_zonotope(s)
        if m.shape[1] != z.dim:
            raise SetDimensionError(f"matrix columns {m.shape[1]} != set dimension {z.dim}")
        return Zonotope(m @ z.generators, m @ z.center)
    cz = as_constrained(s)
    if m.shape[1] != cz.dim:
        raise SetDimensionError(f"matrix columns {m.shape[1]} != set dimension {cz.dim}")
    return ConstrainedZonotope(m @ cz.generators, m @ cz.center,
                               cz.constraints, cz.offsets)


def translate(s: SetLike, v):
    vec = _vec(v, "translation")
    if isinstance(s, (Zonotope, Hyperbox)):
        z = as_zonotope(s)
        return Zonotope(z.generators, z.center + vec)
    cz = as_constrained(s)
    return ConstrainedZonotope(cz.generators, cz.center + vec,
                               cz.constraints, cz.offsets)


def minkowski_sum(s1: SetLike, s2: SetLike):
    """Minkowski sum; constraints of the operands stay decoupled."""
    if isinstance(s1, (Zonotope, Hyperbox)) and isinstance(s2, (Zonotope, Hyperbox)):
        z1, z2 = as_zonotope(s1), as_zonotope(s2)
        if z1.dim != z2.dim:
            raise SetDimensionError("dimension mismatch in sum")
        return Zonotope(np.hstack([z1.generators, z2.generators]), z1.center + z2.center)
    a, b = as_constrained(s1), as_constrained(s2)
    if a.dim != b.dim:
        raise SetDimensionError("dimension mismatch in sum")
    gens = np.hstack([a.generators, b.generators])
    cons = np.block([
        [a.constraints, np.zeros((a.num_constraints, b.num_generators))],
        [np.zeros((b.num_constraints, a.num_generators)), b.constraints],
    ])
    return ConstrainedZonotope(gens, a.center + b.center, cons,
                               np.concatenate([a.offsets, b.offsets]))


def intersect(s1: SetLike, s2: SetLike) -> ConstrainedZonotope:
    """Exact intersection: equate the two parameterizations through new rows."""
    a, b = as_constrained(s1), as_constrained(s2)
    if a.dim != b.dim:
        raise SetDimensionError("dimension mismatch in intersection")
    n1, n2 = a.num_generators, b.num_generators
    gens = np.hstack([a.generators, np.zeros((a.dim, n2))])
    cons = np.block([
        [a.constraints, np.zeros((a.num_constraints, n2))],
        [np.zeros((b.num_constraints, n1)), b.constraints],
        [a.generators, -b.generators],
    ])
    rhs = np.concatenate([a.offsets, b.offsets, b.center - a.center])
    return ConstrainedZonotope(gens, a.center, cons, rhs)


def intersect_under_map(s1: SetLike, matrix, s2: SetLike) -> ConstrainedZonotope:
    """Members z of s1 whose image M z lies in s2, as a constrained zonotope."""
    a, b = as_constrained(s1), as_constrained(s2)
    m = _mat(matrix, "matrix")
    if m.shape[1] != a.dim or m.shape[0] != b.dim:
        raise SetDimensionError(
            f"map shape {m.shape} does not connect dim {a.dim} to dim {b.dim}")
    n1, n2 = a.num_generators, b.num_generators
    gens = np.hstack([a.generators, np.zeros((a.dim, n2))])
    cons = np.block([
        [a.constraints, np.zeros((a.num_constraints, n2))],
        [np.zeros((b.num_constraints, n1)), b.constraints],
        [m @ a.generators, -b.generators],
    ])
    rhs = np.concatenate([a.offsets, b.offsets, b.center - m @ a.center])
    return ConstrainedZonotope(gens, a.center, cons, rhs)


def cartesian_product(s1: SetLike, s2: SetLike) -> ConstrainedZonotope:
    a, b = as_constrained(s1), as_constrained(s2)
    gens = np.block([
        [a.generators, np.zeros((a.dim, b.num_generators))],
        [np.zeros((b.dim, a.num_generators)), b.generators],
    ])
    cons = np.block([
        [a.constraints, np.zeros((a.num_constraints, b.num_generators))],
        [np.zeros((b.num_constraints, a.num_generators)), b.constraints],
    ])
    return ConstrainedZonotope(gens, np.concatenate([a.center, b.center]),
                               cons, np.concatenate([a.offsets, b.offsets]))


def intersect_halfspace(s: SetLike, normal, bound: float,
                        check: bool = True) -> ConstrainedZonotope:
    """Intersection with {h'x <= a} via one fresh generator and constraint row.

    Raises SetEmptyError when the intersection is empty; pass check=False only
    when emptiness was already ruled out by the caller.
    """
    cz = as_constrained(s)
    h = _vec(normal, "normal")
    if h.size != cz.dim:
        raise SetDimensionError("halfspace normal dimension mismatch")
    if check:
        low = -support_value(cz, -h)
        if low > bound + MEMBER_TOL:
            raise SetEmptyError(
                "halfspace intersection is empty; test emptiness before intersecting")
    hg = h @ cz.generators
    slack_width = float(bound - h @ cz.center + np.abs(hg).sum())
    half = 0.5 * slack_width
    gens = np.hstack([cz.generators, np.zeros((cz.dim, 1))])
    cons = np.block([
        [cz.constraints, np.zeros((cz.num_constraints, 1))],
        [hg[None, :], np.array([[half]])],
    ])
    rhs = np.concatenate([cz.offsets, [bound - h @ cz.center - half]])
    return ConstrainedZonotope(gens, cz.center, cons, rhs)


def _feasibility_residual(cz: ConstrainedZonotope, extra_rows=None, extra_rhs=None):
    """Least worst-case residual of the parameter system, via one LP."""
    n_gen = cz.num_generators
    rows = cz.constraints if extra_rows is None else np.vstack([cz.constraints, extra_rows])
    rhs = cz.offsets if extra_rhs is None else np.concatenate([cz.offsets, extra_rhs])
    m = rows.shape[0]
    if m == 0:
        return 0.0
    c = np.zeros(n_gen + 1)
    c[-1] = 1.0
    a_in = np.block([
        [rows, -np.ones((m, 1))],
        [-rows, -np.ones((m, 1))],
    ])
    b_in = np.concatenate([rhs, -rhs])
    lower = np.concatenate([-np.ones(n_gen), [0.0]])
    upper = np.concatenate([np.ones(n_gen), [np.inf]])
    sol = lp.solve(lp.LinearProgram.build(c, a_in=a_in, b_in=b_in,
                                          lower=lower, upper=upper))
    if sol.status is not lp.LpStatus.OPTIMAL:
        raise SetError(f"residual LP ended with status {sol.status}")
    return float(sol.objective_value)


def is_empty(s: SetLike, tol: float = MEMBER_TOL) -> bool:
    cz = as_constrained(s)
    if cz.num_constraints == 0:
        return False
    key = ("empty", tol)
    if key not in cz._cache:
        cz._cache[key] = _feasibility_residual(cz) > tol
    return cz._cache[key]


def contains_point(s: SetLike, x, tol: float = MEMBER_TOL) -> bool:
    """Membership decided by the least feasibility residual of the parameters."""
    cz = as_constrained(s)
    pt = _vec(x, "point")
    if pt.size != cz.dim:
        raise SetDimensionError("point dimension mismatch")
    resid = _feasibility_residual(cz, cz.generators, pt - cz.center)
    return resid <= tol


def support_value(s: SetLike, direction) -> float:
    return support_point(s, direction)[0]


def support_point(s: SetLike, direction) -> tuple[float, np.ndarray]:
    """Max of h'x over the set, with a maximizer.  Raises SetEmptyError."""
    cz = as_constrained(s)
    h = _vec(direction, "direction")
    if h.size != cz.dim:
        raise SetDimensionError("direction dimension mismatch")
    hg = h @ cz.generators
    if cz.num_constraints == 0:
        theta = np.sign(hg)
        value = float(h @ cz.center + np.abs(hg).sum())
        return value, cz.generators @ theta + cz.center
    n_gen = cz.num_generators
    sol = lp.solve(lp.LinearProgram.build(
        -hg, a_eq=cz.constraints, b_eq=cz.offsets,
        lower=-np.ones(n_gen), upper=np.ones(n_gen)))
    if sol.status is lp.LpStatus.INFEASIBLE:
        raise SetEmptyError("support of an empty set is undefined")
    if sol.status is not lp.LpStatus.OPTIMAL:
        raise SetError(f"support LP ended with status {sol.status}")
    theta = sol.x
    return float(h @ cz.center - sol.objective_value), cz.generators @ theta + cz.center


def bounding_box(s: SetLike) -> Hyperbox:
    """Tight axis-aligned bounding box (the interval closure of the set)."""
    if isinstance(s, Hyperbox):
        return s
    if isinstance(s, Zonotope):
        return s.bounding_box()
    cz = s
    if "bbox" in cz._cache:
        return cz._cache["bbox"]
    if cz.num_constraints == 0:
        radius = np.abs(cz.generators).sum(axis=1)
        box = Hyperbox(cz.center - radius, cz.center + radius)
    else:
        lo = np.empty(cz.dim)
        hi = np.empty(cz.dim)
        eye = np.eye(cz.dim)
        for i in range(cz.dim):
            hi[i] = support_value(cz, eye[i])
            lo[i] = -support_value(cz, -eye[i])
        box = Hyperbox(np.minimum(lo, hi), np.maximum(lo, hi))
    cz._cache["bbox"] = box
    return box


def hpoly_contains(p: HPolytope, x, tol: float = MEMBER_TOL) -> bool:
    pt = _vec(x, "point")
    if pt.size != p.dim:
        raise SetDimensionError("point dimension mismatch")
    return bool(np.all(p.normals @ pt <= p.bounds + tol))


def hpoly_support_value(p: HPolytope, direction) -> float:
    h = _vec(direction, "direction")
    if h.size != p.dim:
        raise SetDimensionError("direction dimension mismatch")
    sol = lp.solve(lp.LinearProgram.build(-h, a_in=p.normals, b_in=p.bounds))
    if sol.status is lp.LpStatus.INFEASIBLE:
        raise SetEmptyError("support of an empty polytope is undefined")
    if sol.status is lp.LpStatus.UNBOUNDED:
        raise SetError("polytope is unbounded in the queried direction")
    return -float(sol.objective_value)


def hpoly_bounding_box(p: HPolytope) -> Hyperbox:
    lo = np.empty(p.dim)
    hi = np.empty(p.dim)
    eye = np.eye(p.dim)
    for i in range(p.dim):
        hi[i] = hpoly_support_value(p, eye[i])
        lo[i] = -hpoly_support_value(p, -eye[i])
    return Hyperbox(np.minimum(lo, hi), np.maximum(lo, hi))


def hpoly_chebyshev(p: HPolytope) -> tuple[np.ndarray, float]:
    """Center and radius of a largest inscribed ball.

    The radius is negative when the polytope is empty (it measures how far the
    constraints must be relaxed to admit a point).
    """
    if p.num_halfspaces == 0:
        raise SetError("inscribed ball of an unconstrained polytope is unbounded")
    row_norms = np.linalg.norm(p.normals, axis=1)
    # variables (x, rho), maximize rho
    cost = np.zeros(p.dim + 1)
    cost[-1] = -1.0
    a_in = np.hstack([p.normals, row_norms[:, None]])
    sol = lp.solve(lp.LinearProgram.build(cost, a_in=a_in, b_in=p.bounds))
    if sol.status is lp.LpStatus.UNBOUNDED:
        raise SetError("polytope admits arbitrarily large inscribed balls")
    if sol.status is not lp.LpStatus.OPTIMAL:
        raise SetError(f"inscribed-ball LP ended with status {sol.status}")
    return sol.x[:-1], float(sol.x[-1])


def compact(s: ConstrainedZonotope) -> ConstrainedZonotope:
    """Drop generator columns and constraint rows that carry nothing.

    Removes columns whose generator and constraint entries are all zero, and
    constraint rows that read 0 = 0.  The represented set is unchanged.
    """
    cz = as_constrained(s)
    col_live = (np.abs(cz.generators).max(axis=0, initial=0.0) > ZERO_TOL) | \
               (np.abs(cz.constraints).max(axis=0, initial=0.0) > ZERO_TOL)
    row_zero = np.abs(cz.constraints).max(axis=1, initial=0.0) <= ZERO_TOL
    row_live = ~(row_zero & (np.abs(cz.offsets) <= ZERO_TOL))
    return ConstrainedZonotope(cz.generators[:, col_live], cz.center,
                               cz.constraints[np.ix_(row_live, col_live)],
                               cz.offsets[row_live])


# ---------------------------------------------------------------------------
# member sampling


def _interior_params(cz: ConstrainedZonotope):
    """Most-interior parameter vector: max s with |th| <= 1 - s, A th = b."""
    n_gen = cz.num_generators
    c = np.zeros(n_gen + 1)
    c[-1] = -1.0
    a_in = np.block([
        [np.eye(n_gen), np.ones((n_gen, 1))],
        [-np.eye(n_gen), np.ones((n_gen, 1))],
    ])
    b_in = np.concatenate([np.ones(n_gen), np.ones(n_gen)])
    a_eq = np.hstack([cz.constraints, np.zeros((cz.num_constraints, 1))])
    sol = lp.solve(lp.LinearProgram.build(
        c, a_eq=a_eq, b_eq=cz.offsets, a_in=a_in, b_in=b_in,
        lower=np.concatenate([-np.ones(n_gen), [0.0]]),
        upper=np.concatenate([np.ones(n_gen), [np.inf]])))
    if sol.status is not lp.LpStatus.OPTIMAL:
        raise SetEmptyError("cannot sample from an empty set")
    return sol.x[:n_gen]


def sample_params(s: SetLike, count: int, rng: np.random.Generator) -> np.ndarray:
    """Valid parameter vectors of the set, (count, N).

    Uniform box draws are projected onto the constraint plane and kept when
    they land inside the box.  If acceptance collapses (rejection rate above
    99 per cent), falls back to hit-and-run from the most interior parameter
    vector.  Samples are always valid members; uniformity is not promised.
    """
    cz = as_constrained(s)
    n_gen = cz.num_generators
    if n_gen == 0:
        return np.zeros((count, 0))
    if cz.num_constraints == 0:
        return rng.uniform(-1.0, 1.0, size=(count, n_gen))
    a = cz.constraints
    pinv = np.linalg.pinv(a)
    kept = []
    total = 0
    batch = max(count * 4, 64)
    while sum(k.shape[0] for k in kept) < count and total < 100 * count:
        raw = rng.uniform(-1.0, 1.0, size=(batch, n_gen))
        proj = raw - (raw @ a.T - cz.offsets) @ pinv.T
        good = np.max(np.abs(proj), axis=1) <= 1.0 + 1e-9
        kept.append(np.clip(proj[good], -1.0, 1.0))
        total += batch
        accepted = sum(k.shape[0] for k in kept)
        if total >= 20 * count and accepted < 0.01 * total:
            break
    params = np.vstack(kept) if kept else np.zeros((0, n_gen))
    if params.shape[0] >= count:
        return params[:count]

    # hit-and-run fallback along null-space directions
    theta0 = _interior_params(cz)
    u, sv, vt = np.linalg.svd(a)
    rank = int(np.sum(sv > 1e-10 * (sv[0] if sv.size else 1.0)))
    null_basis = vt[rank:].T
    if null_basis.shape[1] == 0:
        return np.tile(theta0, (count, 1))
    out = np.empty((count, n_gen))
    theta = theta0.copy()
    for i in range(count):
        for _ in range(3):
            d = null_basis @ rng.normal(size=null_basis.shape[1])
            norm = np.linalg.norm(d)
            if norm < 1e-14:
                continue
            d /= norm
            with np.errstate(divide="ignore", invalid="ignore"):
                t_hi = np.where(np.abs(d) > 1e-14, (np.sign(d) - theta) / d, np.inf)
                t_lo = np.where(np.abs(d) > 1e-14, (-np.sign(d) - theta) / d, -np.inf)
            hi = float(np.min(t_hi))
            lo = float(np.max(t_lo))
            if hi <= lo:
                continue
            theta = np.clip(theta + rng.uniform(lo, hi) * d, -1.0, 1.0)
        out[i] = theta
    return out


def sample_points(s: SetLike, count: int, rng: np.random.Generator) -> np.ndarray:
    """Points of the set, (count, n)."""
    cz = as_constrained(s)
    params = sample_params(cz, count, rng)
    return params @ cz.generators.T + cz.center
