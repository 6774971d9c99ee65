"""Elementwise interval arithmetic over numpy arrays.

An Interval carries lower and upper bound arrays of identical shape.  Every
operation returns bounds that contain all pointwise results of the operation
applied to members of the operands (directed rounding is not used; bounds are
exact in real arithmetic and accurate to float rounding).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class IntervalDomainError(ValueError):
    """Operand interval leaves the domain of the requested function."""


@dataclass(frozen=True, eq=False)
class Interval:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        if lo.shape != hi.shape:
            raise ValueError(f"bound shapes differ: {lo.shape} vs {hi.shape}")
        if np.any(lo > hi + 1e-12):
            raise ValueError("interval lower bound exceeds upper bound")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", np.maximum(lo, hi))

    @classmethod
    def point(cls, value) -> "Interval":
        arr = np.asarray(value, dtype=float)
        return cls(arr, arr.copy())

    @classmethod
    def from_bounds(cls, lo, hi) -> "Interval":
        return cls(np.asarray(lo, dtype=float), np.asarray(hi, dtype=float))

    @property
    def shape(self):
        return self.lo.shape

    @property
    def mid(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    @property
    def radius(self) -> np.ndarray:
        return 0.5 * (self.hi - self.lo)

    def contains(self, value, tol: float = 1e-12) -> np.ndarray:
        arr = np.asarray(value, dtype=float)
        return (arr >= self.lo - tol) & (arr <= self.hi + tol)

    def hull(self, other: "Interval") -> "Interval":
        return Interval(np.minimum(self.lo, other.lo), np.maximum(self.hi, other.hi))

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, Interval):
            return Interval(self.lo + other.lo, self.hi + other.hi)
        arr = np.asarray(other, dtype=float)
        return Interval(self.lo + arr, self.hi + arr)

    __radd__ = __add__

    def __neg__(self):
        return Interval(-self.hi, -self.lo)

    def __sub__(self, other):
        if isinstance(other, Interval):
            return Interval(self.lo - other.hi, self.hi - other.lo)
        arr = np.asarray(other, dtype=float)
        return Interval(self.lo - arr, self.hi - arr)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Interval):
            cands = np.stack([
                self.lo * other.lo, self.lo * other.hi,
                self.hi * other.lo, self.hi * other.hi,
            ])
            return Interval(cands.min(axis=0), cands.max(axis=0))
        return scalar_mul(other, self)

    __rmul__ = __mul__

    def sum(self) -> "Interval":
        return Interval(np.asarray(self.lo.sum()), np.asarray(self.hi.sum()))


def scalar_mul(scalar, iv: Interval) -> Interval:
    arr = np.asarray(scalar, dtype=float)
    a = arr * iv.lo
    b = arr * iv.hi
    return Interval(np.minimum(a, b), np.maximum(a, b))


def absolute(iv: Interval) -> Interval:
    lo = np.where((iv.lo <= 0) & (iv.hi >= 0), 0.0,
                  np.minimum(np.abs(iv.lo), np.abs(iv.hi)))
    hi = np.maximum(np.abs(iv.lo), np.abs(iv.hi))
    return Interval(lo, hi)


def sqrt(iv: Interval) -> Interval:
    if np.any(iv.lo < 0):
        raise IntervalDomainError("sqrt of an interval reaching below zero")
    return Interval(np.sqrt(iv.lo), np.sqrt(iv.hi))


def reciprocal(iv: Interval) -> Interval:
    crosses = (iv.lo <= 0) & (iv.hi >= 0)
    if np.any(crosses):
        raise IntervalDomainError("reciprocal of an interval containing zero")
    return Interval(1.0 / iv.hi, 1.0 / iv.lo)


def _monotone_trig_extrema(iv: Interval, phase: float):
    # does the interval contain a point phase + 2 pi k?
    k = np.floor((iv.hi - phase) / (2.0 * np.pi))
    return phase + 2.0 * np.pi * k >= iv.lo


def sin(iv: Interval) -> Interval:
    slo, shi = np.sin(iv.lo), np.sin(iv.hi)
    lo = np.minimum(slo, shi)
    hi = np.maximum(slo, shi)
    hi = np.where(_monotone_trig_extrema(iv, np.pi / 2.0), 1.0, hi)
    lo = np.where(_monotone_trig_extrema(iv, -np.pi / 2.0), -1.0, lo)
    return Interval(lo, hi)


def cos(iv: Interval) -> Interval:
    clo, chi = np.cos(iv.lo), np.cos(iv.hi)
    lo = np.minimum(clo, chi)
    hi = np.maximum(clo, chi)
    hi = np.where(_monotone_trig_extrema(iv, 0.0), 1.0, hi)
    lo = np.where(_monotone_trig_extrema(iv, np.pi), -1.0, lo)
    return Interval(lo, hi)


def quadratic_form(d: Interval, h_lo: np.ndarray, h_hi: np.ndarray) -> Interval:
    """Range of d' H d over d in the interval vector and H in [h_lo, h_hi]."""
    h = Interval(np.asarray(h_lo, dtype=float), np.asarray(h_hi, dtype=float))
    cands = np.stack([
        np.outer(d.lo, d.lo), np.outer(d.lo, d.hi),
        np.outer(d.hi, d.lo), np.outer(d.hi, d.hi),
    ])
    prod_lo = cands.min(axis=0)
    prod_hi = cands.max(axis=0)
    # diagonal entries are squares, so their range never dips below zero
    sq = absolute(d)
    np.fill_diagonal(prod_lo, sq.lo ** 2)
    np.fill_diagonal(prod_hi, sq.hi ** 2)
    terms = Interval(prod_lo, prod_hi) * h
    return terms.sum()
