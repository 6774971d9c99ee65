"""Independent checks for computed sets: sampling oracles and volume.

Nothing here feeds back into the set computations; these routines exist so
results can be cross-examined by brute force.  Membership of large point
batches is decided by sandwiching the set between an inscribed and a
circumscribed polygon built from support evaluations, with a per-point LP
only for the thin ring between them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import sets
from .models import LinErrorBox, SystemModel, linearize
from .reach import _difference
from .sets import (
    ConstrainedZonotope,
    Hyperbox,
    SetEmptyError,
    as_constrained,
    as_zonotope,
    contains_point,
    support_point,
)

DEFAULT_VOLUME_SAMPLES = 100_000
DEFAULT_SEED = 42
_CLASSIFY_DIRECTIONS = 128
_CHUNK = 8192


@dataclass(frozen=True)
class VolumeEstimate:
    value: float
    stderr: float
    samples: int
    bounding_box: Hyperbox

    def __post_init__(self):
        if self.value < 0 or self.stderr < 0:
            raise ValueError("volume and standard error cannot be negative")


class _ConvexSandwich:
    """Planar membership classifier from support evaluations.

    Points inside the hull of the support points are members; points beyond
    any supporting halfspace are not; the remainder fall back to the exact
    per-point test.
    """

    def __init__(self, cz: ConstrainedZonotope):
        self.cz = cz
        angles = np.linspace(0.0, 2.0 * np.pi, _CLASSIFY_DIRECTIONS,
                             endpoint=False)
        dirs = np.stack([np.cos(angles), np.sin(angles)], axis=1)
        values = np.empty(len(dirs))
        points = np.empty((len(dirs), 2))
        for k, h in enumerate(dirs):
            values[k], points[k] = support_point(cz, h)
        self.outer_normals = dirs
        self.outer_bounds = values

        inner_n, inner_d = [], []
        for k in range(len(points)):
            v0, v1 = points[k], points[(k + 1) % len(points)]
            edge = v1 - v0
            if np.hypot(edge[0], edge[1]) < 1e-12:
                continue
            normal = np.array([edge[1], -edge[0]])
            inner_n.append(normal)
            inner_d.append(normal @ v0)
        self.inner_normals = np.array(inner_n) if len(inner_n) >= 3 else None
        self.inner_bounds = np.array(inner_d)

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        hits = np.zeros(len(pts), dtype=bool)
        for start in range(0, len(pts), _CHUNK):
            chunk = pts[start:start + _CHUNK]
            outside = np.any(
                chunk @ self.outer_normals.T >
                self.outer_bounds + sets.MEMBER_TOL, axis=1)
            if self.inner_normals is not None:
                inside = np.all(
                    chunk @ self.inner_normals.T <= self.inner_bounds + 1e-12,
                    axis=1)
            else:
                inside = np.zeros(len(chunk), dtype=bool)
            verdict = inside.copy()
            for idx in np.flatnonzero(~inside & ~outside):
                verdict[idx] = contains_point(self.cz, chunk[idx])
            hits[start:start + _CHUNK] = verdict
        return hits


def _membership_tester(cz: ConstrainedZonotope):
    if cz.dim == 2 and cz.num_generators >= 2:
        return _ConvexSandwich(cz)
    return lambda pts: np.array([contains_point(cz, p) for p in pts],
                                dtype=bool)


def _as_piece_list(s) -> list:
    if isinstance(s, (list, tuple)):
        pieces = [as_constrained(p) for p in s]
    else:
        pieces = [as_constrained(s)]
    pieces = [p for p in pieces if not sets.is_empty(p)]
    if not pieces:
        raise SetEmptyError("cannot estimate the volume of an empty set")
    return pieces


def monte_carlo_volume(s, samples: int = DEFAULT_VOLUME_SAMPLES,
                       seed: int = DEFAULT_SEED) -> VolumeEstimate:
    """Hit-ratio volume over the bounding box, with binomial stderr.

    Accepts a single set or a list of pieces; a union is measured with an
    any-piece hit test over the hull of the piece boxes, so overlaps are not
    double counted.  Deterministic for a fixed seed.
    """
    if samples < 1000:
        raise ValueError("need at least 1000 samples for a usable estimate")
    pieces = _as_piece_list(s)
    boxes = [sets.bounding_box(p) for p in pieces]
    box = boxes[0]
    for other in boxes[1:]:
        box = box.hull(other)
    box_volume = box.volume()
    if box_volume == 0.0:
        return VolumeEstimate(0.0, 0.0, samples, box)

    rng = np.random.default_rng(seed)
    pts = rng.uniform(box.lower, box.upper, size=(samples, box.dim))
    hits = np.zeros(samples, dtype=bool)
    for piece in pieces:
        remaining = ~hits
        if not remaining.any():
            break
        hits[remaining] = _membership_tester(piece)(pts[remaining])
    ratio = float(hits.mean())
    stderr = box_volume * float(np.sqrt(ratio * (1.0 - ratio) / samples))
    return VolumeEstimate(ratio * box_volume, stderr, samples, box)


def grid_difference_2d(minuend, subtrahend, resolution: int,
                       seed: int = 0) -> np.ndarray:
    """Brute-force Minkowski difference on a planar grid.

    Keeps the grid points x over the minuend's bounding box for which x + v
    stays inside the minuend for every probed member v of the subtrahend:
    all extreme parameter sign patterns plus 100 random members.  Returns the
    kept points, shape (k, 2).
    """
    minuend = as_constrained(minuend)
    sub = as_zonotope(subtrahend)
    if minuend.dim != 2 or sub.dim != 2:
        raise ValueError("the grid oracle only works in the plane")
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    if sub.num_generators > 16:
        raise ValueError("too many subtrahend generators to enumerate signs")
    if sets.is_empty(minuend):
        raise SetEmptyError("minuend is empty")

    n_gen = sub.num_generators
    if n_gen:
        signs = np.array(
            np.meshgrid(*([[-1.0, 1.0]] * n_gen), indexing="ij"),
        ).reshape(n_gen, -1).T
        probes = signs @ sub.generators.T + sub.center
    else:
        probes = sub.center[None, :]
    rng = np.random.default_rng(seed)
    theta = rng.uniform(-1.0, 1.0, size=(100, max(n_gen, 1)))
    probes = np.vstack([probes, theta[:, :n_gen] @ sub.generators.T + sub.center])

    box = sets.bounding_box(minuend)
    xs = np.linspace(box.lower[0], box.upper[0], resolution)
    ys = np.linspace(box.lower[1], box.upper[1], resolution)
    grid = np.stack(np.meshgrid(xs, ys, indexing="ij"), axis=-1).reshape(-1, 2)

    tester = _membership_tester(minuend)
    shifted = (grid[:, None, :] + probes[None, :, :]).reshape(-1, 2)
    inside = tester(shifted).reshape(len(grid), len(probes))
    return grid[np.all(inside, axis=1)]


def control_certificate(x, model: SystemModel, target, inputs, disturbance,
                        error=None, tol: float = 1e-6) -> bool:
    """Does some admissible input from x land in the shrunken target?

    The dynamics are linearized at x paired with the input-box center; the
    target is shrunk by the disturbance plus the given residual margin, and
    feasibility of the landing condition over the input set is decided by a
    membership LP.  A vanished shrunken target yields False.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (model.state_dim,):
        raise ValueError("state vector does not match the model dimension")
    u_center = sets.bounding_box(as_constrained(inputs)).center
    a_mat, b_mat, offset = linearize(model, np.concatenate([x, u_center]))

    margin = as_zonotope(disturbance)
    if error is not None:
        if isinstance(error, LinErrorBox):
            error = error.to_zonotope()
        margin = sets.minkowski_sum(margin, as_zonotope(error))
    # the engine's policy for degenerate or infeasible subtrahends applies
    shrunk = _difference(as_constrained(target), margin)
    if shrunk is None:
        return False
    landing = sets.minkowski_sum(shrunk, sets.linear_map(-b_mat, inputs))
    return contains_point(landing, a_mat @ x + offset, tol=tol)


def support_directions(dim: int, count: int = 64, seed: int = 0) -> np.ndarray:
    """Deterministic unit directions for support-function comparisons."""
    rng = np.random.default_rng(seed)
    d = rng.normal(size=(count, dim))
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def max_support_gap(s1, s2, directions) -> float:
    """Largest absolute support difference over the given directions."""
    gaps = [abs(sets.support_value(s1, h) - sets.support_value(s2, h))
            for h in np.asarray(directions, dtype=float)]
    return max(gaps)
