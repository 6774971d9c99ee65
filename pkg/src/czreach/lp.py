"""Dense linear programming with a two-phase simplex method.

Solves  min c'x  subject to  A_eq x = b_eq,  A_in x <= b_in,  lower <= x <= upper.
Bounds may be infinite.  The solver is deterministic: identical inputs produce
identical pivot sequences and therefore identical solutions.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

# Internal feasibility tolerance; residuals of returned solutions are held to
# the looser RESIDUAL_TOL, which is what callers may rely on.
FEAS_TOL = 1e-9
RESIDUAL_TOL = 1e-7
PIVOT_TOL = 1e-10

# Consecutive degenerate pivots tolerated before switching from largest
# reduced cost to Bland's rule for the rest of the solve.
_DEGENERATE_STREAK = 100


class LpStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


class LpError(Exception):
    """Base class for solver failures that are not a status."""


class LpDimensionError(LpError):
    """Inconsistent array shapes in a LinearProgram."""


class LpIterationError(LpError):
    """Pivot budget exhausted before a status was established.

    Deliberately distinct from LpStatus.INFEASIBLE: hitting the cap says
    nothing about feasibility.
    """


class LpNumericalError(LpError):
    """The final tableau failed the re-substitution check."""


def _as_vector(v, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1:
        raise LpDimensionError(f"{name} must be 1-D, got shape {arr.shape}")
    return arr


def _as_matrix(m, name: str) -> np.ndarray:
    arr = np.asarray(m, dtype=float)
    if arr.ndim != 2:
        raise LpDimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class LinearProgram:
    """Immutable problem data in general form."""

    objective: np.ndarray
    a_eq: np.ndarray
    b_eq: np.ndarray
    a_in: np.ndarray
    b_in: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    @classmethod
    def build(cls, objective, a_eq=None, b_eq=None, a_in=None, b_in=None,
              lower=None, upper=None) -> "LinearProgram":
        c = _as_vector(objective, "objective")
        n = c.size
        a_eq = _as_matrix(a_eq, "a_eq") if a_eq is not None else np.zeros((0, n))
        b_eq = _as_vector(b_eq, "b_eq") if b_eq is not None else np.zeros(0)
        a_in = _as_matrix(a_in, "a_in") if a_in is not None else np.zeros((0, n))
        b_in = _as_vector(b_in, "b_in") if b_in is not None else np.zeros(0)
        lo = np.full(n, -np.inf) if lower is None else _as_vector(lower, "lower")
        hi = np.full(n, np.inf) if upper is None else _as_vector(upper, "upper")
        if a_eq.shape != (b_eq.size, n):
            raise LpDimensionError(
                f"a_eq shape {a_eq.shape} inconsistent with b_eq size {b_eq.size} "
                f"and {n} variables")
        if a_in.shape != (b_in.size, n):
            raise LpDimensionError(
                f"a_in shape {a_in.shape} inconsistent with b_in size {b_in.size} "
                f"and {n} variables")
        if lo.size != n or hi.size != n:
            raise LpDimensionError("bound vectors must match the variable count")
        if np.any(lo > hi + FEAS_TOL):
            raise LpDimensionError("lower bound exceeds upper bound")
        for name, arr in (("objective", c), ("a_eq", a_eq), ("b_eq", b_eq),
                          ("a_in", a_in), ("b_in", b_in)):
            if not np.all(np.isfinite(arr)):
                raise LpDimensionError(f"{name} contains non-finite entries")
        return cls(c, a_eq, b_eq, a_in, b_in, lo, hi)

    @property
    def num_vars(self) -> int:
        return self.objective.size


@dataclass(frozen=True)
class LpSolution:
    status: LpStatus
    x: np.ndarray | None
    objective_value: float | None
    iterations: int = 0


_LOWER = 0   # nonbasic at lower bound (0 in shifted coordinates)
_UPPER = 1   # nonbasic at finite upper bound
_BASIC = 2


class _Tableau:
    """Standard-form tableau with native upper bounds on the variables.

    All variables live in [0, ub] with ub possibly infinite.  Nonbasic
    variables sit at 0 or at their finite upper bound.
    """

    def __init__(self, a: np.ndarray, b: np.ndarray, ub: np.ndarray,
                 n_struct: int, iter_cap: int):
        rows, cols = a.shape
        self.t = a.copy()
        self.xb = b.copy()
        self.ub = ub
        self.n_struct = n_struct
        self.basis = np.full(rows, -1, dtype=int)
        self.status = np.full(cols, _LOWER, dtype=np.int8)
        self.allowed = np.ones(cols, dtype=bool)
        self.iter_cap = iter_cap
        self.iterations = 0
        self.degenerate_streak = 0
        self.use_bland = False

    # -- pivoting -----------------------------------------------------------

    def set_basic(self, row: int, col: int) -> None:
        self.basis[row] = col
        self.status[col] = _BASIC

    def entering(self, reduced: np.ndarray) -> int:
        at_lower = (self.status == _LOWER) & self.allowed
        at_upper = (self.status == _UPPER) & self.allowed
        gain = np.where(at_lower, -reduced, 0.0) + np.where(at_upper, reduced, 0.0)
        if self.use_bland:
            eligible = np.flatnonzero(gain > FEAS_TOL)
            return int(eligible[0]) if eligible.size else -1
        j = int(np.argmax(gain))
        return j if gain[j] > FEAS_TOL else -1

    def ratio_test(self, j: int) -> tuple[float, int, int]:
        """Return (step, leaving_row, leaving_bound) for entering column j.

        leaving_row == -1 means a bound flip of j itself; step == inf means
        no finite blocking constraint.
        """
        d = self.t[:, j]
        if self.status[j] == _UPPER:
            d = -d  # entering decreases from its upper bound by step t >= 0
        limit = np.full(d.size, np.inf)
        hits_lower = d > PIVOT_TOL
        limit[hits_lower] = self.xb[hits_lower] / d[hits_lower]
        ub_basic = self.ub[self.basis] if d.size else np.zeros(0)
        hits_upper = (d < -PIVOT_TOL) & np.isfinite(ub_basic)
        limit[hits_upper] = (ub_basic[hits_upper] - self.xb[hits_upper]) / (-d[hits_upper])
        limit = np.maximum(limit, 0.0)

        t_rows = np.min(limit) if limit.size else np.inf
        t_own = self.ub[j]
        if t_own < t_rows - 1e-12:
            return t_own, -1, 0
        if not np.isfinite(t_rows):
            return np.inf, -1, 0
        # Among blocking rows, take the one whose basic variable has the
        # smallest index (Bland-compatible, deterministic).
        candidates = np.flatnonzero(limit <= t_rows + 1e-12)
        row = int(candidates[np.argmin(self.basis[candidates])])
        bound = _LOWER if hits_lower[row] else _UPPER
        return t_rows, row, bound

    def apply_step(self, j: int, step: float, row: int, bound: int) -> None:
        d = self.t[:, j].copy()
        entering_from_upper = self.status[j] == _UPPER
        if entering_from_upper:
            d = -d
        if step > 0.0:
            self.xb -= d * step
            self.degenerate_streak = 0
        else:
            self.degenerate_streak += 1
            if self.degenerate_streak >= _DEGENERATE_STREAK:
                self.use_bland = True
        if row < 0:
            # bound flip, no basis change
            self.status[j] = _LOWER if entering_from_upper else _UPPER
            return
        leaving = self.basis[row]
        self.status[leaving] = bound
        value_j = (self.ub[j] - step) if entering_from_upper else step
        self.set_basic(row, j)
        self.xb[row] = value_j
        pivot = self.t[row, j]
        self.t[row] /= pivot
        col = self.t[:, j].copy()
        col[row] = 0.0
        self.t -= np.outer(col, self.t[row])
        self.t[:, j] = 0.0
        self.t[row, j] = 1.0

    def run(self, cost: np.ndarray, phase_one: bool) -> float:
        """Iterate to optimality for the given cost vector.

        Returns the final objective value in shifted coordinates; raises
        LpError subclasses on failure.  Unboundedness is signalled by +-inf.
        """
        reduced = cost - self.basic_cost(cost) @ self.t
        while True:
            j = self.entering(reduced)
            if j < 0:
                return self.objective(cost)
            self.iterations += 1
            if self.iterations > self.iter_cap:
                raise LpIterationError(
                    f"simplex exceeded the pivot cap of {self.iter_cap}")
            step, row, bound = self.ratio_test(j)
            if not np.isfinite(step):
                if phase_one:
                    raise LpNumericalError("phase one became unbounded")
                return -np.inf
            self.apply_step(j, step, row, bound)
            if row >= 0:
                rj = reduced[j]
                reduced -= rj * self.t[row]
                reduced[j] = 0.0

    def basic_cost(self, cost: np.ndarray) -> np.ndarray:
        return cost[self.basis] if self.basis.size else np.zeros(0)

    def objective(self, cost: np.ndarray) -> float:
        vals = self.values()
        return float(cost @ vals)

    def values(self) -> np.ndarray:
        v = np.where((self.status == _UPPER) & np.isfinite(self.ub), self.ub, 0.0)
        v[self.basis] = self.xb
        return v


def _drive_out_artificials(tab: _Tableau, n_real: int) -> None:
    """Pivot basic artificial variables out, dropping redundant rows."""
    drop = []
    for row in range(tab.basis.size):
        if tab.basis[row] < n_real:
            continue
        cols = np.flatnonzero(np.abs(tab.t[row, :n_real]) > PIVOT_TOL)
        if cols.size:
            # prefer a column sitting at value 0 so the swap is exact
            at_lower = cols[tab.status[cols] == _LOWER]
            j = int(at_lower[0] if at_lower.size else cols[0])
            value_j = 0.0 if tab.status[j] == _LOWER else tab.ub[j]
            art = tab.basis[row]
            tab.status[art] = _LOWER
            tab.set_basic(row, j)
            tab.xb[row] = value_j
            pivot = tab.t[row, j]
            tab.t[row] /= pivot
            col = tab.t[:, j].copy()
            col[row] = 0.0
            tab.t -= np.outer(col, tab.t[row])
            tab.t[:, j] = 0.0
            tab.t[row, j] = 1.0
        else:
            drop.append(row)
    if drop:
        keep = np.ones(tab.basis.size, dtype=bool)
        keep[drop] = False
        for row in drop:
            art = tab.basis[row]
            tab.status[art] = _LOWER
        tab.t = tab.t[keep]
        tab.xb = tab.xb[keep]
        tab.basis = tab.basis[keep]


def solve(lp: LinearProgram, *, iteration_cap: int | None = None) -> LpSolution:
    """Solve a LinearProgram, returning an LpSolution.

    Raises LpIterationError when the pivot cap (50 x (rows + cols) unless
    overridden) is hit and LpNumericalError when the tableau loses too much
    accuracy.
    """
    n = lp.num_vars
    if n == 0:
        eq_ok = np.all(np.abs(lp.b_eq) <= RESIDUAL_TOL)
        in_ok = np.all(lp.b_in >= -RESIDUAL_TOL)
        if eq_ok and in_ok:
            return LpSolution(LpStatus.OPTIMAL, np.zeros(0), 0.0)
        return LpSolution(LpStatus.INFEASIBLE, None, None)

    # --- shift to [0, ub] coordinates -------------------------------------
    lo, hi = lp.lower, lp.upper
    kind_shift = np.isfinite(lo)                     # x = y + lo
    kind_neg = ~np.isfinite(lo) & np.isfinite(hi)    # x = hi - y
    kind_free = ~np.isfinite(lo) & ~np.isfinite(hi)  # x = y+ - y-

    col_of = np.zeros(n, dtype=int)
    neg_col_of = np.full(n, -1, dtype=int)
    sign = np.zeros(n)
    shift = np.zeros(n)
    ubs = []
    next_col = 0
    for j in range(n):
        if kind_shift[j]:
            sign[j], shift[j] = 1.0, lo[j]
            ubs.append(hi[j] - lo[j])
        elif kind_neg[j]:
            sign[j], shift[j] = -1.0, hi[j]
            ubs.append(np.inf)
        else:
            sign[j], shift[j] = 1.0, 0.0
            ubs.append(np.inf)
        col_of[j] = next_col
        next_col += 1
        if kind_free[j]:
            neg_col_of[j] = next_col
            ubs.append(np.inf)
            next_col += 1
    n_y = next_col

    def to_y(mat: np.ndarray) -> np.ndarray:
        out = np.zeros((mat.shape[0], n_y))
        out[:, col_of] = mat * sign
        free = np.flatnonzero(kind_free)
        if free.size:
            out[:, neg_col_of[free]] = -mat[:, free]
        return out

    m_eq, m_in = lp.b_eq.size, lp.b_in.size
    a_all = np.vstack([to_y(lp.a_eq), to_y(lp.a_in)])
    b_all = np.concatenate([
        lp.b_eq - lp.a_eq @ shift,
        lp.b_in - lp.a_in @ shift,
    ])

    # slacks for inequality rows
    n_slack = m_in
    rows = m_eq + m_in
    a_full = np.hstack([a_all, np.zeros((rows, n_slack))])
    for i in range(m_in):
        a_full[m_eq + i, n_y + i] = 1.0

    # row equilibration for numerical robustness
    row_scale = np.maximum(1.0, np.max(np.abs(a_full), axis=1, initial=1.0))
    a_full /= row_scale[:, None]
    b_all = b_all / row_scale

    # sign-fix rows so every rhs is nonnegative
    flip = b_all < 0
    a_full[flip] *= -1.0
    b_all[flip] *= -1.0

    # artificials: inequality rows that kept a +1 slack start with the slack
    # basic; every other row gets an artificial
    needs_art = np.ones(rows, dtype=bool)
    for i in range(m_in):
        if not flip[m_eq + i]:
            needs_art[m_eq + i] = False
    n_art = int(needs_art.sum())
    total = n_y + n_slack + n_art
    a_final = np.hstack([a_full, np.zeros((rows, n_art))])
    art_cols = []
    k = 0
    for i in range(rows):
        if needs_art[i]:
            a_final[i, n_y + n_slack + k] = 1.0
            art_cols.append(n_y + n_slack + k)
            k += 1

    ub_full = np.concatenate([np.asarray(ubs, dtype=float),
                              np.full(n_slack + n_art, np.inf)])

    iter_cap = 50 * (rows + total) if iteration_cap is None else iteration_cap
    tab = _Tableau(a_final, b_all, ub_full, n_y, iter_cap)
    k = 0
    for i in range(rows):
        if needs_art[i]:
            tab.set_basic(i, n_y + n_slack + k)
            k += 1
        else:
            tab.set_basic(i, n_y + (i - m_eq))

    n_real = n_y + n_slack
    if n_art:
        cost1 = np.zeros(total)
        cost1[n_real:] = 1.0
        phase1 = tab.run(cost1, phase_one=True)
        if phase1 > RESIDUAL_TOL:
            return LpSolution(LpStatus.INFEASIBLE, None, None, tab.iterations)
        _drive_out_artificials(tab, n_real)
        tab.allowed[n_real:] = False

    cost2 = np.zeros(total)
    cost2[:n_y][col_of] = lp.objective * sign
    free = np.flatnonzero(kind_free)
    if free.size:
        cost2[neg_col_of[free]] = -lp.objective[free]
    value = tab.run(cost2, phase_one=False)
    if value == -np.inf:
        return LpSolution(LpStatus.UNBOUNDED, None, None, tab.iterations)

    y = tab.values()[:n_y]
    x = shift + sign * y[col_of]
    if free.size:
        x[free] -= y[neg_col_of[free]]
    np.clip(x, lp.lower, lp.upper, out=x)

    scale = 1.0 + float(np.max(np.abs(x), initial=0.0))
    if lp.a_eq.size:
        if np.max(np.abs(lp.a_eq @ x - lp.b_eq)) > RESIDUAL_TOL * scale:
            raise LpNumericalError("equality residual exceeds tolerance")
    if lp.a_in.size:
        if np.max(lp.a_in @ x - lp.b_in) > RESIDUAL_TOL * scale:
            raise LpNumericalError("inequality residual exceeds tolerance")
    return LpSolution(LpStatus.OPTIMAL, x, float(lp.objective @ x), tab.iterations)
