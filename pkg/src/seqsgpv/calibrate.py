"""Choose monitoring frequencies that hit a Type I error target."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

from .designs import DesignSpec
from .engine import MonitoringPlan, OutcomeModel
from .oc import OCConfig, collect, simulate_oc, trajectory_from_records


@dataclass
class WaitCell:
    W: int
    type1_error: float
    mc_se: float
    upper: float  # estimate + 2 SE, for conservative planning
    avg_n: float
    nonmonotone: bool = False


@dataclass
class CalibrationReport:
    design: str
    S: int
    A: int
    N: int | None
    alpha_target: float
    chosen: WaitCell | None
    cells: list[WaitCell] = field(default_factory=list)

    @property
    def attainable(self) -> bool:
        return self.chosen is not None


def _se0(se: float) -> float:
    return 0.0 if math.isnan(se) else se


def find_min_wait(design: DesignSpec, *, S: int, A: int, N: int | None, alpha_target: float,
                  W_grid: Sequence[int], replicates: int, master_seed: int,
                  model: OutcomeModel | None = None, base_plan: MonitoringPlan | None = None,
                  workers: int = 1) -> CalibrationReport:
    """Smallest W in ``W_grid`` whose estimated Type I error is <= ``alpha_target``.

    Every grid cell is simulated and reported. Cells where the estimate rises
    by more than 3 SE relative to some smaller W are flagged as non-monotone.
    """
    grid = [int(w) for w in W_grid]
    if not grid:
        raise ValueError("W_grid must be nonempty")
    if any(w < 4 for w in grid):
        raise ValueError(f"wait times below 4 are not estimable: {[w for w in grid if w < 4]}")
    if grid != sorted(grid):
        raise ValueError("W_grid must be ascending")
    if not 0 < alpha_target <= 1:
        raise ValueError(f"alpha_target must lie in (0, 1], got {alpha_target}")
    model = (model or OutcomeModel()).with_theta(0.0).with_lag(0)

    cells = []
    for W in grid:
        kw = dict(W=W, S=int(S), A=int(A), N=N)
        plan = replace(base_plan, **kw) if base_plan else MonitoringPlan(**kw)
        cap = plan.limit
        rec = collect(design, plan, model, replicates=replicates, master_seed=master_seed,
                      lags=(0,), n_grid=(cap,), workers=workers)
        row = trajectory_from_records(design.label, plan, rec, (cap,))[0]
        cells.append(WaitCell(W, row.type1_error, row.mc_se,
                              row.type1_error + 2 * _se0(row.mc_se), row.avg_n))

    for i, cell in enumerate(cells):
        for prev in cells[:i]:
            se = math.hypot(_se0(cell.mc_se), _se0(prev.mc_se))
            if cell.type1_error - prev.type1_error > 3 * se:
                cell.nonmonotone = True
                break

    chosen = next((c for c in cells if c.type1_error <= alpha_target), None)
    return CalibrationReport(design.label, int(S), int(A), N, alpha_target, chosen, cells)


@dataclass
class SweepRow:
    design: str
    W: int
    S: int
    A: int
    N: int | None
    type1_error: float
    type1_se: float
    power: float
    power_se: float
    avg_n_null: float
    avg_n_reference: float


def sweep_frequencies(design: DesignSpec, *, W_grid: Sequence[int], S_grid: Sequence[int],
                      A_grid: Sequence[int], N_grid: Sequence[int | None], reference_theta: float,
                      replicates: int, master_seed: int, model: OutcomeModel | None = None,
                      base_plan: MonitoringPlan | None = None, workers: int = 1) -> list[SweepRow]:
    """Type I error, power at ``reference_theta`` and average n for every (W, S, A, N).

    All cells share the same master seed, hence the same replicate streams.
    """
    for name, g in (("W_grid", W_grid), ("S_grid", S_grid), ("A_grid", A_grid), ("N_grid", N_grid)):
        if not len(g):
            raise ValueError(f"{name} must be nonempty")
    model = model or OutcomeModel()
    rows = []
    for W in W_grid:
        for S in S_grid:
            for A in A_grid:
                for N in N_grid:
                    kw = dict(W=int(W), S=int(S), A=int(A), N=None if N is None else int(N))
                    plan = replace(base_plan, **kw) if base_plan else MonitoringPlan(**kw)
                    cfg = OCConfig(design, plan, model, (0.0, reference_theta), replicates,
                                   master_seed, workers)
                    oc = simulate_oc(cfg)
                    null, ref = oc.effects
                    rows.append(SweepRow(design.label, plan.W, plan.S, plan.A, plan.N,
                                         null.reject_null_rate, null.reject_null_se,
                                         ref.reject_null_rate, ref.reject_null_se,
                                         null.avg_n_observed, ref.avg_n_observed))
    return rows
