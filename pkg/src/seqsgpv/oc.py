"""Monte Carlo operating characteristics of SeqSGPV designs.

Replicate ``r`` under effect index ``e`` always draws from the stream
``SeedSequence(master_seed, spawn_key=(e, r))``. Replicates are split into
contiguous chunks, run serially or on a process pool, and reassembled in
replicate order before any reduction, so results do not depend on the
number of workers.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .designs import Conclusion, DesignSpec
from .engine import (
    GeneratedStream,
    MonitoringPlan,
    OutcomeModel,
    StopReason,
    _final_count,
    _scan,
    prefix_intervals,
)

_REASON_CODE = {StopReason.AFFIRMED_ALERT: 0, StopReason.CAP_REACHED: 1, StopReason.NEVER_STOPPED: 2}
_CHUNK = 500


def replicate_seed(master_seed: int, effect_index: int, replicate: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(master_seed), spawn_key=(int(effect_index), int(replicate)))


def default_workers() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


@dataclass(frozen=True)
class OCConfig:
    design: DesignSpec
    plan: MonitoringPlan
    model: OutcomeModel
    effects: tuple[float, ...]
    replicates: int
    master_seed: int
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "effects", tuple(float(e) for e in self.effects))
        if not self.effects:
            raise ValueError("effects must be nonempty")
        if int(self.replicates) != self.replicates or self.replicates < 1:
            raise ValueError(f"replicates must be a positive integer, got {self.replicates}")
        if self.workers < 1:
            raise ValueError(f"workers must be positive, got {self.workers}")
        if not 0 <= int(self.master_seed) < 2**64:
            raise ValueError("master_seed must be an unsigned 64-bit integer")


# ---------------------------------------------------------------- replicate records


@dataclass
class Records:
    """Per-replicate outcomes of one effect, in replicate order.

    Arrays indexed ``[replicate]`` or ``[replicate, lag]`` /
    ``[replicate, grid point]``.
    """

    n_stop: np.ndarray
    reason: np.ndarray
    reject_stop: np.ndarray
    concl_stop: np.ndarray
    n_final: np.ndarray
    est_final: np.ndarray
    lo_final: np.ndarray
    hi_final: np.ndarray
    reject_final: np.ndarray
    concl_final: np.ndarray
    grid_reject: np.ndarray

    @classmethod
    def concat(cls, parts: Sequence["Records"]) -> "Records":
        return cls(**{f: np.concatenate([getattr(p, f) for p in parts])
                      for f in cls.__dataclass_fields__})


def _verdicts(design: DesignSpec, lo, hi, ok):
    concl = np.zeros(lo.shape, dtype=np.int8)
    rej = np.zeros(lo.shape, dtype=bool)
    if ok.any():
        concl[ok] = design.conclusion_codes(design.alert_codes(lo[ok], hi[ok]))
        rej[ok] = design.reject_null(lo[ok], hi[ok])
    return concl, rej


def _run_chunk(design: DesignSpec, plan: MonitoringPlan, model: OutcomeModel, master_seed: int,
               effect_index: int, start: int, stop: int, lags: tuple[int, ...],
               n_grid: tuple[int, ...]) -> Records:
    k = stop - start
    nl, ng = len(lags), len(n_grid)
    out = Records(
        n_stop=np.empty(k, dtype=np.int64),
        reason=np.empty(k, dtype=np.int8),
        reject_stop=np.empty(k, dtype=bool),
        concl_stop=np.empty(k, dtype=np.int8),
        n_final=np.empty((k, nl), dtype=np.int64),
        est_final=np.empty((k, nl)),
        lo_final=np.empty((k, nl)),
        hi_final=np.empty((k, nl)),
        reject_final=np.empty((k, nl), dtype=bool),
        concl_final=np.empty((k, nl), dtype=np.int8),
        grid_reject=np.empty((k, ng), dtype=bool),
    )
    lag_arr = np.asarray(lags, dtype=np.int64)
    grid_arr = np.asarray(n_grid, dtype=np.int64)
    for row, r in enumerate(range(start, stop)):
        stream = GeneratedStream(model, replicate_seed(master_seed, effect_index, r))
        scan = _scan(design, plan, stream)
        n_stop = scan.n_stop
        finals = np.array([_final_count(plan, n_stop, int(l)) for l in lag_arr], dtype=np.int64)
        top = int(finals.max()) if nl else n_stop
        if top > scan.est.size:
            stream.ensure(top)
            est, lo, hi, ok = prefix_intervals(stream.y[:top], stream.treat[:top],
                                               plan.interval_level, plan.interval_family)
        else:
            est, lo, hi, ok = scan.est, scan.lo, scan.hi, scan.ok
        at = np.concatenate([[n_stop], finals, np.minimum(grid_arr, n_stop)]) - 1
        at_ok = ok[at]
        at_lo = np.where(at_ok, lo[at], 0.0)
        at_hi = np.where(at_ok, hi[at], 1.0)
        concl, rej = _verdicts(design, at_lo, at_hi, at_ok)
        out.n_stop[row] = n_stop
        out.reason[row] = _REASON_CODE[scan.reason]
        out.reject_stop[row] = rej[0]
        out.concl_stop[row] = concl[0]
        sl = slice(1, 1 + nl)
        out.n_final[row] = finals
        out.est_final[row] = est[finals - 1]
        out.lo_final[row] = np.where(at_ok[sl], at_lo[sl], np.nan)
        out.hi_final[row] = np.where(at_ok[sl], at_hi[sl], np.nan)
        out.reject_final[row] = rej[sl]
        out.concl_final[row] = concl[sl]
        out.grid_reject[row] = rej[1 + nl:]
    return out


def collect(design: DesignSpec, plan: MonitoringPlan, model: OutcomeModel, *, replicates: int,
            master_seed: int, effect_index: int = 0, lags: Sequence[int] | None = None,
            n_grid: Sequence[int] = (), workers: int = 1) -> Records:
    """Run ``replicates`` trials and return their records in replicate order."""
    lags = tuple(int(l) for l in (lags if lags is not None else (model.lag,)))
    n_grid = tuple(int(n) for n in n_grid)
    if n_grid and max(n_grid) > plan.limit:
        raise ValueError(f"grid point {max(n_grid)} exceeds the monitoring limit {plan.limit}")
    if any(n < 1 for n in n_grid):
        raise ValueError("grid points must be positive")
    bounds = [(s, min(s + _CHUNK, replicates)) for s in range(0, replicates, _CHUNK)]
    args = (design, plan, model, int(master_seed), int(effect_index))
    if workers <= 1 or len(bounds) == 1:
        parts = [_run_chunk(*args, s, e, lags, n_grid) for s, e in bounds]
    else:
        try:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futures = [pool.submit(_run_chunk, *args, s, e, lags, n_grid) for s, e in bounds]
                parts = [f.result() for f in futures]
        except Exception as exc:  # surface a clean failure, never partial results
            raise RuntimeError(f"simulation worker failed: {exc}") from exc
    return Records.concat(parts)


# ---------------------------------------------------------------- summaries


def _rate(x: np.ndarray) -> tuple[float, float]:
    n = x.size
    p = float(np.mean(x))
    se = math.sqrt(p * (1 - p) / n) if n > 1 else math.nan
    return p, se


def _mean(x: np.ndarray) -> tuple[float, float]:
    n = x.size
    m = float(np.mean(x))
    se = float(np.std(x, ddof=1) / math.sqrt(n)) if n > 1 else math.nan
    return m, se


@dataclass
class EffectSummary:
    theta: float
    replicates: int
    reject_null_rate: float
    reject_null_se: float
    inconclusive_rate: float
    inconclusive_se: float
    ruled_out_meaningful_rate: float
    ruled_out_meaningful_se: float
    ruled_out_null_equiv_rate: float
    ruled_out_null_equiv_se: float
    mild_effect_rate: float
    mild_effect_se: float
    avg_n_observed: float
    avg_n_observed_se: float
    sd_n: float
    avg_n_final: float
    stop_early_prob: float
    stop_early_se: float
    bias: float
    bias_se: float
    coverage: float
    coverage_se: float
    reversal_reject_to_accept: float
    reversal_reject_to_accept_se: float
    reversal_accept_to_reject: float
    reversal_accept_to_reject_se: float
    still_running: float

    @property
    def se_defined(self) -> bool:
        return self.replicates > 1


def summarize(theta: float, rec: Records, lag_index: int = 0) -> EffectSummary:
    """Aggregate one effect's records (for the lag at ``lag_index``)."""
    n = rec.n_stop.size
    concl = rec.concl_final[:, lag_index]
    rej = rec.reject_final[:, lag_index]
    rej_stop = rec.reject_stop
    est = rec.est_final[:, lag_index]
    lo, hi = rec.lo_final[:, lag_index], rec.hi_final[:, lag_index]
    covered = (lo <= theta) & (theta <= hi)  # NaN bounds (not estimable) count as not covering
    finite_est = est[np.isfinite(est)]
    bias, bias_se = _mean(finite_est - theta) if finite_est.size else (math.nan, math.nan)
    avg_n, avg_n_se = _mean(rec.n_stop.astype(float))
    values = dict(
        reject_null=_rate(rej),
        inconclusive=_rate(concl == Conclusion.INCONCLUSIVE),
        ruled_out_meaningful=_rate(concl == Conclusion.RULED_OUT_MEANINGFUL),
        ruled_out_null_equiv=_rate(concl == Conclusion.RULED_OUT_NULL_EQUIVALENT),
        mild_effect=_rate(concl == Conclusion.MILD_EFFECT),
        stop_early=_rate(rec.reason == _REASON_CODE[StopReason.AFFIRMED_ALERT]),
        coverage=_rate(covered),
        reversal_reject_to_accept=_rate(rej_stop & ~rej),
        reversal_accept_to_reject=_rate(~rej_stop & rej),
    )
    return EffectSummary(
        theta=float(theta),
        replicates=n,
        reject_null_rate=values["reject_null"][0],
        reject_null_se=values["reject_null"][1],
        inconclusive_rate=values["inconclusive"][0],
        inconclusive_se=values["inconclusive"][1],
        ruled_out_meaningful_rate=values["ruled_out_meaningful"][0],
        ruled_out_meaningful_se=values["ruled_out_meaningful"][1],
        ruled_out_null_equiv_rate=values["ruled_out_null_equiv"][0],
        ruled_out_null_equiv_se=values["ruled_out_null_equiv"][1],
        mild_effect_rate=values["mild_effect"][0],
        mild_effect_se=values["mild_effect"][1],
        avg_n_observed=avg_n,
        avg_n_observed_se=avg_n_se,
        sd_n=float(np.std(rec.n_stop, ddof=1)) if n > 1 else math.nan,
        avg_n_final=float(np.mean(rec.n_final[:, lag_index])),
        stop_early_prob=values["stop_early"][0],
        stop_early_se=values["stop_early"][1],
        bias=bias,
        bias_se=bias_se,
        coverage=values["coverage"][0],
        coverage_se=values["coverage"][1],
        reversal_reject_to_accept=values["reversal_reject_to_accept"][0],
        reversal_reject_to_accept_se=values["reversal_reject_to_accept"][1],
        reversal_accept_to_reject=values["reversal_accept_to_reject"][0],
        reversal_accept_to_reject_se=values["reversal_accept_to_reject"][1],
        still_running=float(np.mean(rec.reason == _REASON_CODE[StopReason.NEVER_STOPPED])),
    )


@dataclass
class OCSummary:
    design: str
    plan: MonitoringPlan
    effects: list[EffectSummary] = field(default_factory=list)

    def by_theta(self, theta: float) -> EffectSummary:
        for e in self.effects:
            if math.isclose(e.theta, theta, abs_tol=1e-12):
                return e
        raise KeyError(theta)


def simulate_oc(cfg: OCConfig) -> OCSummary:
    """Operating characteristics of ``cfg.design`` at every effect in ``cfg.effects``."""
    summary = OCSummary(design=cfg.design.label, plan=cfg.plan)
    for e_idx, theta in enumerate(cfg.effects):
        rec = collect(cfg.design, cfg.plan, cfg.model.with_theta(theta),
                      replicates=cfg.replicates, master_seed=cfg.master_seed,
                      effect_index=e_idx, workers=cfg.workers)
        summary.effects.append(summarize(theta, rec))
    return summary


# ---------------------------------------------------------------- trajectories


@dataclass
class TrajectoryRow:
    design: str
    W: int
    S: int
    A: int
    N: int
    type1_error: float
    mc_se: float
    avg_n: float
    valid: bool = True


def trajectory_from_records(design: str, plan: MonitoringPlan, rec: Records,
                            n_grid: Sequence[int]) -> list[TrajectoryRow]:
    rows = []
    for j, n_cap in enumerate(n_grid):
        if n_cap < plan.W:
            rows.append(TrajectoryRow(design, plan.W, plan.S, plan.A, int(n_cap),
                                      math.nan, math.nan, math.nan, valid=False))
            continue
        p, se = _rate(rec.grid_reject[:, j])
        avg_n = float(np.mean(np.minimum(rec.n_stop, n_cap)))
        rows.append(TrajectoryRow(design, plan.W, plan.S, plan.A, int(n_cap), p, se, avg_n))
    return rows


def t1e_trajectory(design: DesignSpec, *, W_grid: Sequence[int], S_grid: Sequence[int],
                   A_grid: Sequence[int], N_grid: Sequence[int], replicates: int,
                   master_seed: int, model: OutcomeModel | None = None,
                   base_plan: MonitoringPlan | None = None, workers: int = 1) -> list[TrajectoryRow]:
    """Type I error as a function of the cap N, for each (W, S, A).

    Each (W, S, A) is simulated once without a cap (up to ``max(N_grid)``);
    the value at cap N counts trials that stopped rejecting by N plus trials
    still running at N whose interval on the first N outcomes rejects.
    """
    n_grid = sorted(int(n) for n in N_grid)
    if not n_grid:
        raise ValueError("N_grid must be nonempty")
    model = (model or OutcomeModel()).with_theta(0.0).with_lag(0)
    rows: list[TrajectoryRow] = []
    for W in W_grid:
        for S in S_grid:
            for A in A_grid:
                kw = dict(W=int(W), S=int(S), A=int(A), N=None, ceiling=max(n_grid[-1], int(W)))
                plan = replace(base_plan, **kw) if base_plan else MonitoringPlan(**kw)
                rec = collect(design, plan, model, replicates=replicates, master_seed=master_seed,
                              lags=(0,), n_grid=n_grid, workers=workers)
                rows.extend(trajectory_from_records(design.label, plan, rec, n_grid))
    return rows


# ---------------------------------------------------------------- reversals


@dataclass
class ReversalRow:
    design: str
    W: int
    S: int
    A: int
    lag: int
    reject_to_accept: float
    reject_to_accept_se: float
    accept_to_reject: float
    accept_to_reject_se: float
    total: float
    total_se: float
    type1_error_final: float
    avg_n_observed: float
    avg_n_final: float


def reversal_analysis(design: DesignSpec, plan: MonitoringPlan, lags: Sequence[int], *,
                      replicates: int, master_seed: int, model: OutcomeModel | None = None,
                      workers: int = 1) -> list[ReversalRow]:
    """Reversal probabilities between the stopping and final analyses, per lag.

    Monitoring does not depend on the lag (outcomes arrive in subject order),
    so every lag is read off the same set of replicates.
    """
    lags = [int(l) for l in lags]
    if any(l < 0 for l in lags):
        raise ValueError("lags must be non-negative")
    model = model or OutcomeModel()
    rec = collect(design, plan, model, replicates=replicates, master_seed=master_seed,
                  lags=lags, workers=workers)
    rows = []
    for j, lag in enumerate(lags):
        r2a = rec.reject_stop & ~rec.reject_final[:, j]
        a2r = ~rec.reject_stop & rec.reject_final[:, j]
        p1, s1 = _rate(r2a)
        p2, s2 = _rate(a2r)
        pt, st = _rate(r2a | a2r)
        rows.append(ReversalRow(design.label, plan.W, plan.S, plan.A, lag, p1, s1, p2, s2, pt, st,
                                float(np.mean(rec.reject_final[:, j])),
                                float(np.mean(rec.n_stop)), float(np.mean(rec.n_final[:, j]))))
    return rows
