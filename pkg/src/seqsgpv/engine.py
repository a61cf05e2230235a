"""Single-trial SeqSGPV simulation.

A trial enrolls subjects one at a time into two arms. Subject ``i``'s outcome
becomes observable once enrollment reaches ``i + lag``, so the observed data
at any moment is always a prefix of the subject stream. Monitoring runs on
observed prefixes; after stopping, the pending (lagged) outcomes are added
for the final analysis.

Interval statistics are computed for every prefix at once with cumulative
sums, and the affirmation state machine jumps between alert looks instead
of stepping through every look.
"""
from __future__ import annotations

import enum
import functools
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import stats

from .designs import Alert, Conclusion, DesignSpec
from .regions import Interval

DEFAULT_CEILING = 5000
_FIRST_BLOCK = 64


class AffirmMode(str, enum.Enum):
    FORWARD = "forward"
    BACKWARD = "backward"


class IntervalFamily(str, enum.Enum):
    Z_POOLED = "z-pooled"
    T_POOLED = "t-pooled"


class Randomization(str, enum.Enum):
    ALTERNATING = "alternating"
    BLOCK_TWO = "block-two"


class StopReason(str, enum.Enum):
    AFFIRMED_ALERT = "affirmed-alert"
    CAP_REACHED = "cap-reached"
    NEVER_STOPPED = "never-stopped"


class NotEstimable(ValueError):
    """Raised when a monitoring interval cannot be computed from the data."""


@dataclass(frozen=True)
class MonitoringPlan:
    """Monitoring frequency. All counts are total observed outcomes (both arms).

    ``N=None`` means unrestricted; such runs are still stopped at ``ceiling``
    observed outcomes and reported as never stopped.
    """

    W: int
    S: int = 1
    A: int = 0
    N: int | None = None
    affirm_mode: AffirmMode = AffirmMode.FORWARD
    interval_level: float = 0.95
    interval_family: IntervalFamily = IntervalFamily.Z_POOLED
    ceiling: int = DEFAULT_CEILING

    def __post_init__(self):
        object.__setattr__(self, "affirm_mode", AffirmMode(self.affirm_mode))
        object.__setattr__(self, "interval_family", IntervalFamily(self.interval_family))
        if int(self.W) != self.W or self.W < 4:
            raise ValueError(f"W must be an integer >= 4 (two outcomes per arm), got {self.W}")
        if int(self.S) != self.S or self.S < 1:
            raise ValueError(f"S must be a positive integer, got {self.S}")
        if int(self.A) != self.A or self.A < 0:
            raise ValueError(f"A must be a non-negative integer, got {self.A}")
        if self.N is not None and (int(self.N) != self.N or self.N < self.W):
            raise ValueError(f"N must be an integer >= W={self.W}, got {self.N}")
        if not 0 < self.interval_level < 1:
            raise ValueError(f"interval_level must lie in (0, 1), got {self.interval_level}")
        if self.ceiling < self.W:
            raise ValueError(f"ceiling {self.ceiling} is below W={self.W}")

    @property
    def limit(self) -> int:
        """Largest observed count monitoring can reach."""
        return self.N if self.N is not None else self.ceiling

    def look_counts(self, upto: int | None = None) -> np.ndarray:
        """Observed counts at which looks happen, up to ``min(upto, limit)``."""
        top = self.limit if upto is None else min(upto, self.limit)
        if top < self.W:
            return np.empty(0, dtype=np.int64)
        looks = np.arange(self.W, top + 1, self.S, dtype=np.int64)
        if self.N is not None and top == self.N and looks[-1] != self.N:
            looks = np.append(looks, self.N)
        return looks


@dataclass(frozen=True)
class OutcomeModel:
    """Two-arm outcome generator.

    ``kind="normal"``: control ~ N(0, sd^2), treatment ~ N(theta, sd^2).
    ``kind="bootstrap"``: each subject draws Y(0) from ``pool`` with
    replacement; treated subjects observe Y(0) + theta.
    """

    kind: str = "normal"
    theta: float = 0.0
    sd: float = 1.0
    pool: tuple[float, ...] | None = None
    lag: int = 0
    randomization: Randomization = Randomization.ALTERNATING

    def __post_init__(self):
        object.__setattr__(self, "randomization", Randomization(self.randomization))
        if self.kind not in ("normal", "bootstrap"):
            raise ValueError(f"unknown outcome model kind {self.kind!r}")
        if self.kind == "normal" and not self.sd > 0:
            raise ValueError(f"sd must be positive, got {self.sd}")
        if self.kind == "bootstrap":
            if not self.pool:
                raise ValueError("bootstrap model needs a nonempty pool")
            object.__setattr__(self, "pool", tuple(float(v) for v in self.pool))
        if int(self.lag) != self.lag or self.lag < 0:
            raise ValueError(f"lag must be a non-negative integer, got {self.lag}")

    def with_theta(self, theta: float) -> "OutcomeModel":
        return replace(self, theta=float(theta))

    def with_lag(self, lag: int) -> "OutcomeModel":
        return replace(self, lag=int(lag))


@dataclass
class TrialResult:
    n_observed_at_stop: int
    n_enrolled_final: int
    stop_reason: StopReason
    stop_alert: Alert
    interval_at_stop: Interval | None
    interval_final: Interval | None
    estimate_at_stop: float
    estimate_final: float
    conclusion_at_stop: Conclusion
    reject_at_stop: bool
    conclusion_final: Conclusion
    reject_final: bool
    looks: np.ndarray | None = field(default=None, repr=False)
    look_reject: np.ndarray | None = field(default=None, repr=False)

    @property
    def reversed(self) -> bool:
        return self.reject_at_stop != self.reject_final


# ---------------------------------------------------------------- randomization


def randomize(index: int, scheme: Randomization | str,
              seed: np.random.SeedSequence | int | None = None) -> str:
    """Arm of subject ``index`` (1-based) as ``"control"`` or ``"treatment"``.

    Block-two order is drawn pair by pair from a generator built from
    ``seed``, so the answer for any index is reproducible.
    """
    if index < 1:
        raise ValueError("subject index starts at 1")
    scheme = Randomization(scheme)
    if scheme is Randomization.ALTERNATING:
        return "control" if index % 2 == 1 else "treatment"
    if seed is None:
        raise ValueError("block-two randomization needs a seed")
    n = index + (index % 2)
    treat = allocation(n, scheme, np.random.default_rng(seed))
    return "treatment" if treat[index - 1] else "control"


def allocation(n: int, scheme: Randomization | str, rng: np.random.Generator | None = None) -> np.ndarray:
    """Boolean treatment indicator for subjects 1..n (n even for block-two)."""
    scheme = Randomization(scheme)
    if scheme is Randomization.ALTERNATING:
        return (np.arange(n) % 2).astype(bool)
    if n % 2:
        raise ValueError("block-two allocation is generated in whole pairs")
    first = rng.integers(0, 2, size=n // 2).astype(bool)
    out = np.empty(n, dtype=bool)
    out[0::2] = first
    out[1::2] = ~first
    return out


# ---------------------------------------------------------------- data streams


class GeneratedStream:
    """Lazily generated subject stream for one replicate.

    Data are produced in fixed doubling blocks (64, 64, 128, 256, ...) so the
    outcome of subject ``i`` is identical no matter how far a run reads.
    """

    def __init__(self, model: OutcomeModel, seed: np.random.SeedSequence | int):
        ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        out_ss, arm_ss = ss.spawn(2)
        self._out = np.random.Generator(np.random.Philox(out_ss))
        self._arm = np.random.Generator(np.random.Philox(arm_ss))
        self.model = model
        self._pool = np.asarray(model.pool, dtype=float) if model.kind == "bootstrap" else None
        self.y = np.empty(0)
        self.treat = np.empty(0, dtype=bool)

    def __len__(self) -> int:
        return self.y.size

    def ensure(self, n: int) -> None:
        while self.y.size < n:
            k = max(_FIRST_BLOCK, self.y.size)
            m = self.model
            if self._pool is None:
                base = m.sd * self._out.standard_normal(k)
            else:
                base = self._pool[self._out.integers(0, self._pool.size, size=k)]
            if m.randomization is Randomization.ALTERNATING:
                treat = ((np.arange(k) + self.y.size) % 2).astype(bool)
            else:
                treat = allocation(k, m.randomization, self._arm)
            self.y = np.concatenate([self.y, base + m.theta * treat])
            self.treat = np.concatenate([self.treat, treat])

    def grow(self) -> int:
        """Extend by one block; returns the new length."""
        self.ensure(max(_FIRST_BLOCK, 2 * self.y.size))
        return self.y.size


class FixedStream:
    """A recorded subject stream (outcomes plus treatment indicator)."""

    def __init__(self, y: Sequence[float], treat: Sequence[bool]):
        self.y = np.asarray(y, dtype=float)
        self.treat = np.asarray(treat, dtype=bool)
        if self.y.shape != self.treat.shape:
            raise ValueError("outcomes and arm indicators differ in length")

    def __len__(self) -> int:
        return self.y.size

    def ensure(self, n: int) -> None:
        if n > self.y.size:
            raise ValueError(f"recorded stream has {self.y.size} subjects, {n} needed")

    def grow(self) -> int:
        raise ValueError("recorded stream exhausted before the trial stopped")


# ---------------------------------------------------------------- intervals


@functools.lru_cache(maxsize=64)
def _quantiles(level: float, family: IntervalFamily, max_n: int) -> np.ndarray:
    """Two-sided critical value indexed by total sample size (0..max_n)."""
    p = 0.5 * (1.0 + level)
    if family is IntervalFamily.Z_POOLED:
        return np.full(max_n + 1, stats.norm.ppf(p))
    df = np.maximum(np.arange(max_n + 1) - 2, 1)
    return stats.t.ppf(p, df)


def _quantile_table(level: float, family: IntervalFamily, n: int) -> np.ndarray:
    size = 1024
    while size < n + 1:
        size *= 2
    return _quantiles(level, family, size)


def _arm_sums(y: np.ndarray, mask: np.ndarray):
    # shift by the arm's first observation so constant arms give exactly zero SS
    idx = np.flatnonzero(mask)
    ref = y[idx[0]] if idx.size else 0.0
    d = np.where(mask, y - ref, 0.0)
    return ref, np.cumsum(mask), np.cumsum(d), np.cumsum(d * d)


def prefix_intervals(y: np.ndarray, treat: np.ndarray, level: float = 0.95,
                     family: IntervalFamily = IntervalFamily.Z_POOLED):
    """Estimate and pooled interval for every prefix ``y[:k]``, k = 1..len(y).

    Returns ``(estimate, lo, hi, ok)`` arrays of length ``len(y)``; entry
    ``k-1`` describes the first ``k`` subjects. ``ok`` is False where an arm
    has fewer than two outcomes or the pooled variance is zero.
    """
    family = IntervalFamily(family)
    ref_t, n_t, s_t, q_t = _arm_sums(y, treat)
    ref_c, n_c, s_c, q_c = _arm_sums(y, ~treat)
    with np.errstate(divide="ignore", invalid="ignore"):
        ss_t = np.maximum(q_t - s_t * s_t / n_t, 0.0)
        ss_c = np.maximum(q_c - s_c * s_c / n_c, 0.0)
        n = n_t + n_c
        ok = (n_t >= 2) & (n_c >= 2)
        var = np.where(ok, (ss_t + ss_c) / np.maximum(n - 2, 1), 0.0)
        ok &= var > 0
        est = (ref_t + s_t / n_t) - (ref_c + s_c / n_c)
        q = _quantile_table(level, family, y.size)[n]
        half = q * np.sqrt(var * (1.0 / n_t + 1.0 / n_c))
    est = np.where((n_t >= 1) & (n_c >= 1), est, np.nan)
    lo = np.where(ok, est - half, np.nan)
    hi = np.where(ok, est + half, np.nan)
    return est, lo, hi, ok


def estimate_interval(control: Sequence[float], treatment: Sequence[float],
                      plan: MonitoringPlan | None = None, *, level: float | None = None,
                      family: IntervalFamily | str | None = None) -> Interval:
    """Pooled-variance interval for mean(treatment) - mean(control)."""
    level = level if level is not None else (plan.interval_level if plan else 0.95)
    family = IntervalFamily(family if family is not None
                            else (plan.interval_family if plan else IntervalFamily.Z_POOLED))
    c = np.asarray(control, dtype=float)
    t = np.asarray(treatment, dtype=float)
    if c.size < 2 or t.size < 2:
        raise NotEstimable("need at least two outcomes per arm")
    ss = np.sum((c - c.mean()) ** 2) + np.sum((t - t.mean()) ** 2)
    if not ss > 0:
        raise NotEstimable("pooled variance is zero")
    n = c.size + t.size
    var = ss / (n - 2)
    p = 0.5 * (1 + level)
    q = stats.norm.ppf(p) if family is IntervalFamily.Z_POOLED else stats.t.ppf(p, n - 2)
    est = t.mean() - c.mean()
    half = q * np.sqrt(var * (1 / c.size + 1 / t.size))
    return Interval(float(est - half), float(est + half))


# ---------------------------------------------------------------- stopping rule


def _forward_stop(looks: np.ndarray, codes: np.ndarray, A: int):
    """Index into ``looks`` of the affirmed stop and the affirmed alert.

    Returns ``(None, 0)`` when no alert is affirmed within ``looks``.
    """
    alert_idx = np.flatnonzero(codes)
    if alert_idx.size == 0:
        return None, 0
    i = int(alert_idx[0])
    m = looks.size
    while True:
        pending = int(codes[i])
        j = i if A == 0 else int(np.searchsorted(looks, looks[i] + A, side="left"))
        if j >= m:
            return None, 0
        c = int(codes[j])
        if c & pending:
            return j, c & pending
        if c:
            i = j
            continue
        k = int(np.searchsorted(alert_idx, j, side="right"))
        if k >= alert_idx.size:
            return None, 0
        i = int(alert_idx[k])


def _backward_stop(looks: np.ndarray, codes: np.ndarray, prior_codes: np.ndarray):
    hits = np.flatnonzero(codes & prior_codes)
    if hits.size == 0:
        return None, 0
    j = int(hits[0])
    return j, int(codes[j] & prior_codes[j])


@dataclass
class _Scan:
    n_stop: int
    reason: StopReason
    alert: int
    est: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    ok: np.ndarray


def _scan(design: DesignSpec, plan: MonitoringPlan, stream) -> _Scan:
    """Run monitoring on a stream until the stopping rule decides."""
    limit = plan.limit
    avail = len(stream)
    if avail < min(limit, plan.W):
        stream.ensure(min(limit, plan.W))
        avail = len(stream)
    while True:
        upto = min(avail, limit)
        est, lo, hi, ok = prefix_intervals(stream.y[:upto], stream.treat[:upto],
                                           plan.interval_level, plan.interval_family)
        looks = plan.look_counts(upto)
        looks = looks[ok[looks - 1]]
        codes = np.zeros(looks.size, dtype=np.int8)
        if looks.size:
            codes = design.alert_codes(lo[looks - 1], hi[looks - 1]).astype(np.int8)
        if plan.affirm_mode is AffirmMode.FORWARD or plan.A == 0:
            j, alert = _forward_stop(looks, codes, plan.A)
        else:
            prior = looks - plan.A
            valid = prior >= plan.W
            prior_codes = np.zeros(looks.size, dtype=np.int8)
            pidx = prior[valid] - 1
            pok = ok[pidx]
            vals = np.zeros(pidx.size, dtype=np.int8)
            if pok.any():
                vals[pok] = design.alert_codes(lo[pidx[pok]], hi[pidx[pok]])
            prior_codes[valid] = vals
            j, alert = _backward_stop(looks, codes, prior_codes)
        if j is not None:
            return _Scan(int(looks[j]), StopReason.AFFIRMED_ALERT, alert, est, lo, hi, ok)
        if upto >= limit:
            reason = StopReason.CAP_REACHED if plan.N is not None else StopReason.NEVER_STOPPED
            return _Scan(limit, reason, 0, est, lo, hi, ok)
        avail = stream.grow()


def _final_count(plan: MonitoringPlan, n_stop: int, lag: int) -> int:
    if plan.N is not None:
        return min(n_stop + lag, plan.N)
    return n_stop + lag


def _interval_at(est, lo, hi, ok, n: int):
    if n < 1 or not ok[n - 1]:
        return None, float(est[n - 1]) if n >= 1 else float("nan")
    return Interval(float(lo[n - 1]), float(hi[n - 1])), float(est[n - 1])


def _judge(design: DesignSpec, *intervals: Interval | None):
    """(conclusion, reject) for each interval; ``None`` means not estimable."""
    present = [i for i in intervals if i is not None]
    verdicts = iter(())
    if present:
        lo = np.array([i.lo for i in present])
        hi = np.array([i.hi for i in present])
        concl = design.conclusion_codes(design.alert_codes(lo, hi))
        rej = design.reject_null(lo, hi)
        verdicts = iter(zip(concl.tolist(), rej.tolist()))
    out = []
    for i in intervals:
        if i is None:
            out.append((Conclusion.INCONCLUSIVE, False))
        else:
            c, r = next(verdicts)
            out.append((Conclusion(c), bool(r)))
    return out


def run_on_stream(design: DesignSpec, plan: MonitoringPlan, stream, lag: int = 0,
                  record_looks: bool = False) -> TrialResult:
    """Monitor an explicit subject stream (generated or recorded)."""
    scan = _scan(design, plan, stream)
    n_final = _final_count(plan, scan.n_stop, lag)
    i_stop, e_stop = _interval_at(scan.est, scan.lo, scan.hi, scan.ok, scan.n_stop)
    if n_final > scan.est.size:
        stream.ensure(n_final)
        est, lo, hi, ok = prefix_intervals(stream.y[:n_final], stream.treat[:n_final],
                                           plan.interval_level, plan.interval_family)
    else:
        est, lo, hi, ok = scan.est, scan.lo, scan.hi, scan.ok
    i_final, e_final = _interval_at(est, lo, hi, ok, n_final)
    (c_stop, r_stop), (c_final, r_final) = _judge(design, i_stop, i_final)
    result = TrialResult(
        n_observed_at_stop=scan.n_stop,
        n_enrolled_final=n_final,
        stop_reason=scan.reason,
        stop_alert=Alert(scan.alert),
        interval_at_stop=i_stop,
        interval_final=i_final,
        estimate_at_stop=e_stop,
        estimate_final=e_final,
        conclusion_at_stop=c_stop,
        reject_at_stop=r_stop,
        conclusion_final=c_final,
        reject_final=r_final,
    )
    if record_looks:
        looks = plan.look_counts(scan.n_stop)
        rej = np.zeros(looks.size, dtype=bool)
        good = scan.ok[looks - 1]
        rej[good] = design.reject_null(scan.lo[looks - 1][good], scan.hi[looks - 1][good])
        result.looks, result.look_reject = looks, rej
    return result


def run_trial(design: DesignSpec, plan: MonitoringPlan, model: OutcomeModel,
              seed: np.random.SeedSequence | int, record_looks: bool = False) -> TrialResult:
    """Simulate one monitored two-arm trial; deterministic given ``seed``."""
    stream = GeneratedStream(model, seed)
    return run_on_stream(design, plan, stream, lag=model.lag, record_looks=record_looks)
