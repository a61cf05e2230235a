"""Interval and region arithmetic on the extended real line, and the SGPV.

Intervals are closed. Unbounded ends are IEEE infinities, which numpy and
``math`` propagate exactly (``inf - 3 == inf``, ``min(x, inf) == x``), so no
large sentinel values are needed anywhere.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

INF = math.inf


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if math.isnan(self.lo) or math.isnan(self.hi):
            raise ValueError(f"interval endpoints must not be NaN: [{self.lo}, {self.hi}]")
        if self.lo > self.hi:
            raise ValueError(f"malformed interval: lo={self.lo} > hi={self.hi}")

    @property
    def length(self) -> float:
        if self.lo == self.hi:
            return 0.0
        return self.hi - self.lo

    @property
    def is_finite(self) -> bool:
        return math.isfinite(self.lo) and math.isfinite(self.hi)

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi

    def shift(self, c: float) -> "Interval":
        return Interval(self.lo + c, self.hi + c)

    def scale(self, k: float) -> "Interval":
        if k <= 0:
            raise ValueError("scale factor must be positive")
        return Interval(self.lo * k, self.hi * k)

    def __str__(self) -> str:
        left = "(" if self.lo == -INF else "["
        right = ")" if self.hi == INF else "]"
        return f"{left}{self.lo:g}, {self.hi:g}{right}"


@dataclass(frozen=True)
class Region:
    """Canonical disjoint union of closed intervals, sorted by lower end.

    Build through :func:`normalize` (or :meth:`of`); the constructor trusts
    its input.
    """

    parts: tuple[Interval, ...]

    @classmethod
    def of(cls, *bounds: tuple[float, float]) -> "Region":
        return normalize(Interval(lo, hi) for lo, hi in bounds)

    @property
    def length(self) -> float:
        return math.fsum(p.length for p in self.parts) if self.parts else 0.0

    @property
    def bounded(self) -> bool:
        return all(p.is_finite for p in self.parts)

    def contains(self, x: float) -> bool:
        return any(p.contains(x) for p in self.parts)

    def shift(self, c: float) -> "Region":
        return Region(tuple(p.shift(c) for p in self.parts))

    def scale(self, k: float) -> "Region":
        return Region(tuple(p.scale(k) for p in self.parts))

    def bounds_array(self) -> np.ndarray:
        """(k, 2) float array of part endpoints, for vectorised evaluation."""
        return np.array([[p.lo, p.hi] for p in self.parts], dtype=float).reshape(-1, 2)

    def __str__(self) -> str:
        return " U ".join(str(p) for p in self.parts) if self.parts else "{}"


def normalize(parts: Iterable[Interval]) -> Region:
    """Merge overlapping or touching intervals into a sorted disjoint union."""
    items = sorted(parts, key=lambda p: (p.lo, p.hi))
    merged: list[Interval] = []
    for p in items:
        if merged and p.lo <= merged[-1].hi:
            last = merged[-1]
            merged[-1] = Interval(last.lo, max(last.hi, p.hi))
        else:
            merged.append(p)
    return Region(tuple(merged))


def _overlap(a_lo: float, a_hi: float, b_lo: float, b_hi: float) -> float:
    lo = max(a_lo, b_lo)
    hi = min(a_hi, b_hi)
    if hi <= lo:
        return 0.0
    return hi - lo


def overlap_length(i: Interval, r: Region) -> float:
    """Total length of ``i`` intersected with ``r``; may be ``inf``."""
    return math.fsum(_overlap(i.lo, i.hi, p.lo, p.hi) for p in r.parts)


def sgpv(i: Interval, r: Region) -> float:
    """Second generation p-value of interval ``i`` against region ``r``.

    ``p = |i ∩ r| / |i| * max(|i| / (2|r|), 1)``. When ``r`` has infinite
    length the correction factor is exactly 1.
    """
    width = i.length
    if not i.is_finite:
        raise ValueError(f"SGPV needs a finite interval, got {i}")
    if width <= 0:
        raise ValueError(f"SGPV is undefined for a degenerate interval {i}")
    region_len = r.length
    if not region_len > 0:
        raise ValueError(f"SGPV needs a region of positive length, got {r}")
    ov = overlap_length(i, r)
    if ov == 0.0:
        return 0.0
    if math.isinf(region_len) or width <= 2.0 * region_len:
        p = ov / width
    else:
        # correction branch: (ov / width) * (width / (2|r|)) simplifies exactly
        p = ov / (2.0 * region_len)
    return min(max(p, 0.0), 1.0)


def overlap_array(lo: np.ndarray, hi: np.ndarray, r: Region) -> np.ndarray:
    """Vectorised :func:`overlap_length` over arrays of interval endpoints."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if lo.ndim == 0 and hi.ndim == 0:
        lo, hi = lo.reshape(1), hi.reshape(1)
        return overlap_array(lo, hi, r).reshape(())
    total = None
    for p in r.parts:
        piece = np.minimum(hi, p.hi) - np.maximum(lo, p.lo)
        np.maximum(piece, 0.0, out=piece)
        total = piece if total is None else total + piece
    if total is None:
        return np.zeros(np.broadcast(lo, hi).shape)
    return total


def sgpv_array(lo: np.ndarray, hi: np.ndarray, r: Region) -> np.ndarray:
    """Vectorised :func:`sgpv`; intervals must be finite and non-degenerate."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    width = hi - lo
    if np.any(~np.isfinite(width)) or np.any(width <= 0):
        raise ValueError("SGPV needs finite, non-degenerate intervals")
    region_len = r.length
    if not region_len > 0:
        raise ValueError(f"SGPV needs a region of positive length, got {r}")
    ov = overlap_array(lo, hi, r)
    if math.isinf(region_len):
        p = ov / width
    else:
        p = np.where(width <= 2.0 * region_len, ov / width, ov / (2.0 * region_len))
    return np.clip(p, 0.0, 1.0)


def excludes_array(lo: np.ndarray, hi: np.ndarray, r: Region) -> np.ndarray:
    """True where the SGPV of ``[lo, hi]`` against ``r`` is exactly zero.

    Equivalent to ``sgpv_array(...) == 0`` for valid intervals but skips the
    division, which matters in the simulation hot loop.
    """
    return overlap_array(lo, hi, r) == 0.0


def as_region(parts: Sequence[tuple[float, float]] | Region) -> Region:
    if isinstance(parts, Region):
        return parts
    return Region.of(*parts)
