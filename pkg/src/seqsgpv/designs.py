"""Hypothesis sets monitored by SeqSGPV: PRISM, ROPE-only and null-bound ROE.

Every design exposes two monitored regions and a vectorised alert rule over
arrays of interval endpoints. The engine only ever talks to designs through
``alert_codes``, ``reject_null`` and ``conclusion_codes``.
"""
from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .regions import INF, Interval, Region, excludes_array, normalize, sgpv_array


class Alert(enum.IntFlag):
    """Alert raised at a look. ``BOTH`` is literally ``NON_ROPE | NON_ROME``."""

    NONE = 0
    NON_ROPE = 1
    NON_ROME = 2
    BOTH = 3
    ROPE_SUPPORTED = 4


class Conclusion(enum.IntEnum):
    INCONCLUSIVE = 0
    RULED_OUT_NULL_EQUIVALENT = 1
    RULED_OUT_MEANINGFUL = 2
    MILD_EFFECT = 3


class Sidedness(str, enum.Enum):
    ONE_SIDED = "one-sided"
    TWO_SIDED = "two-sided"


class Direction(str, enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"


# alert code -> conclusion code; index with an int array
_PRISM_CONCLUSION = np.array([0, 1, 2, 3, 2], dtype=np.int8)


class DesignError(ValueError):
    pass


@dataclass(frozen=True)
class Prism:
    """Pre-specified regions: ROPE/ROWPE around the null plus a ROME.

    For a one-sided design only the deltas on the beneficial side are used;
    the others may be left as ``None``.
    """

    sidedness: Sidedness
    delta_L2: float | None = None
    delta_L1: float | None = None
    delta_G1: float | None = None
    delta_G2: float | None = None
    direction: Direction = Direction.POSITIVE

    def __post_init__(self):
        object.__setattr__(self, "sidedness", Sidedness(self.sidedness))
        object.__setattr__(self, "direction", Direction(self.direction))
        L2, L1, G1, G2 = self.delta_L2, self.delta_L1, self.delta_G1, self.delta_G2
        if self.sidedness is Sidedness.TWO_SIDED:
            if None in (L2, L1, G1, G2):
                raise DesignError("two-sided PRISM needs delta_L2, delta_L1, delta_G1, delta_G2")
            if not (L2 <= L1 < 0 < G1 <= G2):
                raise DesignError(
                    "PRISM ordering violated: need delta_L2 <= delta_L1 < 0 < delta_G1 <= delta_G2, "
                    f"got {L2}, {L1}, {G1}, {G2}"
                )
        elif self.direction is Direction.POSITIVE:
            if None in (G1, G2):
                raise DesignError("one-sided positive PRISM needs delta_G1 and delta_G2")
            if not (0 < G1 <= G2):
                raise DesignError(
                    f"PRISM ordering violated: need 0 < delta_G1 <= delta_G2, got {G1}, {G2}"
                )
        else:
            if None in (L2, L1):
                raise DesignError("one-sided negative PRISM needs delta_L2 and delta_L1")
            if not (L2 <= L1 < 0):
                raise DesignError(
                    f"PRISM ordering violated: need delta_L2 <= delta_L1 < 0, got {L2}, {L1}"
                )

    @property
    def two_sided(self) -> bool:
        return self.sidedness is Sidedness.TWO_SIDED

    @property
    def null(self) -> float:
        return 0.0

    @property
    def label(self) -> str:
        if self.two_sided:
            return "prism-2s"
        return "prism-1s" if self.direction is Direction.POSITIVE else "prism-1s-neg"

    def regions(self) -> tuple[Region, Region]:
        return self._regions

    @functools.cached_property
    def _regions(self) -> tuple[Region, Region]:
        if self.two_sided:
            rope = Region.of((self.delta_L1, self.delta_G1))
            rome = Region.of((-INF, self.delta_L2), (self.delta_G2, INF))
        elif self.direction is Direction.POSITIVE:
            rope = Region.of((-INF, self.delta_G1))
            rome = Region.of((self.delta_G2, INF))
        else:
            rope = Region.of((self.delta_L1, INF))
            rome = Region.of((-INF, self.delta_L2))
        return rope, rome

    def grey_zone(self) -> Region:
        rope, rome = self.regions()
        return complement(normalize(rope.parts + rome.parts))

    def alert_codes(self, lo, hi) -> np.ndarray:
        return _two_region_alerts(lo, hi, *self.regions())

    def reject_null(self, lo, hi) -> np.ndarray:
        return _reject(self.two_sided, self.direction, 0.0, lo, hi)

    def conclusion_codes(self, alerts: np.ndarray) -> np.ndarray:
        return _PRISM_CONCLUSION[alerts]


@dataclass(frozen=True)
class RopeOnly:
    """Two-sided ROPE monitoring: stop on ROPE ruled out or ROPE supported."""

    rope: Interval

    def __post_init__(self):
        if not isinstance(self.rope, Interval):
            object.__setattr__(self, "rope", Interval(*self.rope))
        if not (self.rope.lo < 0 < self.rope.hi):
            raise DesignError(f"ROPE must contain 0 in its interior, got {self.rope}")

    two_sided = True
    null = 0.0
    label = "rope"

    def regions(self) -> tuple[Region, Region]:
        return self._regions

    @functools.cached_property
    def _regions(self) -> tuple[Region, Region]:
        r = normalize([self.rope])
        return r, r

    def alert_codes(self, lo, hi) -> np.ndarray:
        p = sgpv_array(lo, hi, self.regions()[0])
        return np.where(p == 0.0, int(Alert.NON_ROPE),
                        np.where(p == 1.0, int(Alert.ROPE_SUPPORTED), 0)).astype(np.int8)

    def reject_null(self, lo, hi) -> np.ndarray:
        return _reject(True, Direction.POSITIVE, 0.0, lo, hi)

    def conclusion_codes(self, alerts: np.ndarray) -> np.ndarray:
        return _PRISM_CONCLUSION[alerts]


@dataclass(frozen=True)
class NullBoundROE:
    """One-sided region of equivalence ``[null, delta1]`` abutting the null.

    Monitored like a one-sided PRISM whose ROWPE ends at the null itself:
    an alert rules out effects no better than the null (efficacy) or rules
    out effects at least ``delta1`` (futility).
    """

    delta1: float
    null: float = 0.0
    direction: Direction = Direction.POSITIVE

    def __post_init__(self):
        object.__setattr__(self, "direction", Direction(self.direction))
        if self.direction is Direction.POSITIVE and not self.null < self.delta1:
            raise DesignError(f"null-bound ROE needs null < delta1, got {self.null}, {self.delta1}")
        if self.direction is Direction.NEGATIVE and not self.delta1 < self.null:
            raise DesignError(f"null-bound ROE needs delta1 < null, got {self.delta1}, {self.null}")

    two_sided = False

    @property
    def label(self) -> str:
        return "roe" if self.direction is Direction.POSITIVE else "roe-neg"

    def regions(self) -> tuple[Region, Region]:
        return self._regions

    @functools.cached_property
    def _regions(self) -> tuple[Region, Region]:
        if self.direction is Direction.POSITIVE:
            return Region.of((-INF, self.null)), Region.of((self.delta1, INF))
        return Region.of((self.null, INF)), Region.of((-INF, self.delta1))

    def alert_codes(self, lo, hi) -> np.ndarray:
        return _two_region_alerts(lo, hi, *self.regions())

    def reject_null(self, lo, hi) -> np.ndarray:
        return _reject(False, self.direction, self.null, lo, hi)

    def conclusion_codes(self, alerts: np.ndarray) -> np.ndarray:
        return _PRISM_CONCLUSION[alerts]


DesignSpec = Union[Prism, RopeOnly, NullBoundROE]


def _two_region_alerts(lo, hi, null_side: Region, meaningful: Region) -> np.ndarray:
    return (excludes_array(lo, hi, null_side).astype(np.int8)
            | (excludes_array(lo, hi, meaningful).astype(np.int8) << 1))


def _reject(two_sided: bool, direction: Direction, null: float, lo, hi) -> np.ndarray:
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if two_sided:
        return (lo > null) | (hi < null)
    if direction is Direction.POSITIVE:
        return lo > null
    return hi < null


def complement(r: Region) -> Region:
    parts = []
    cursor = -INF
    for p in r.parts:
        if p.lo > cursor:
            parts.append(Interval(cursor, p.lo))
        cursor = p.hi
    if cursor < INF:
        parts.append(Interval(cursor, INF))
    return Region(tuple(parts))


def _check_interval(i: Interval) -> None:
    if not i.is_finite or not i.length > 0:
        raise ValueError(f"monitoring interval must be finite with positive length, got {i}")


def hypothesis_regions(d: DesignSpec) -> tuple[Region, Region]:
    """(null-side region, meaningful-side region) monitored by ``d``."""
    return d.regions()


def evaluate_alert(d: DesignSpec, i: Interval) -> Alert:
    _check_interval(i)
    return Alert(int(d.alert_codes(np.array([i.lo]), np.array([i.hi]))[0]))


def classify_conclusion(d: DesignSpec, i: Interval) -> tuple[Conclusion, bool]:
    """Conclusion category for interval ``i`` plus whether it rejects the null."""
    alert = evaluate_alert(d, i)
    category = Conclusion(int(d.conclusion_codes(np.array([int(alert)]))[0]))
    rejected = bool(d.reject_null(i.lo, i.hi))
    return category, rejected


def midpoint_of_grey_zone(d: DesignSpec) -> float:
    """Centre of the beneficial-side grey zone (useful for effect sweeps)."""
    null_side, meaningful = d.regions()
    if isinstance(d, RopeOnly):
        return d.rope.hi
    if isinstance(d, Prism) and d.two_sided:
        return 0.5 * (d.delta_G1 + d.delta_G2)
    edges = [p.hi for p in null_side.parts if math.isfinite(p.hi)] + \
            [p.lo for p in null_side.parts if math.isfinite(p.lo)]
    far = [p.lo for p in meaningful.parts if math.isfinite(p.lo)] + \
          [p.hi for p in meaningful.parts if math.isfinite(p.hi)]
    return 0.5 * (edges[0] + far[0])
