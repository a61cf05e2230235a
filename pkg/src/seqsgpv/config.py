"""Run configuration: YAML in, validated design/plan/model objects out.

Keys mirror the dataclass fields. Unknown keys are errors, all missing
required keys are reported together, and invariant violations carry the
path of the offending section.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .designs import DesignSpec, NullBoundROE, Prism, RopeOnly
from .engine import DEFAULT_CEILING, MonitoringPlan, OutcomeModel
from .regions import Interval


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))


class DataError(ValueError):
    pass


_DESIGN_KEYS = {
    "prism": {"type", "sidedness", "direction", "delta_L2", "delta_L1", "delta_G1", "delta_G2"},
    "rope": {"type", "rope"},
    "roe": {"type", "delta1", "null", "direction"},
}
_PLAN_KEYS = {"W", "S", "A", "N", "affirm_mode", "interval_level", "interval_family", "ceiling"}
_MODEL_KEYS = {"kind", "sd", "pool_path", "lag", "randomization"}
_TOP_KEYS = {"seed", "replicates", "workers", "design", "plan", "model", "effects",
             "trajectory", "reversals", "calibrate"}
_SECTION_KEYS = {
    "trajectory": {"W_grid", "S_grid", "A_grid", "N_grid"},
    "reversals": {"lags"},
    "calibrate": {"alpha_target", "W_grid"},
}


@dataclass(frozen=True)
class Pool:
    values: tuple[float, ...]
    path: str | None = None

    @property
    def count(self) -> int:
        return len(self.values)

    def summary(self) -> dict[str, float]:
        v = np.asarray(self.values)
        return {
            "count": int(v.size),
            "mean": float(v.mean()),
            "sd": float(v.std(ddof=1)) if v.size > 1 else 0.0,
            "min": float(v.min()),
            "max": float(v.max()),
        }


def ingest_pool(path: str | Path) -> Pool:
    """Read a single-column file of outcomes, one per line, optional header."""
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise DataError(f"cannot read outcome pool {path}: {exc}") from exc
    values = []
    for lineno, raw in enumerate(lines, start=1):
        text = raw.strip()
        if not text:
            continue
        try:
            v = float(text)
        except ValueError:
            if lineno == 1:
                continue  # header
            raise DataError(f"{path}: line {lineno}: not a number: {text!r}") from None
        if not math.isfinite(v):
            raise DataError(f"{path}: line {lineno}: non-finite value {text!r}")
        values.append(v)
    if not values:
        raise DataError(f"{path}: outcome pool is empty")
    return Pool(tuple(values), str(path))


@dataclass(frozen=True)
class TrajectorySection:
    W_grid: tuple[int, ...]
    S_grid: tuple[int, ...] = (1,)
    A_grid: tuple[int, ...] = (0,)
    N_grid: tuple[int, ...] = ()


@dataclass(frozen=True)
class ReversalSection:
    lags: tuple[int, ...]


@dataclass(frozen=True)
class CalibrateSection:
    alpha_target: float
    W_grid: tuple[int, ...]


@dataclass(frozen=True)
class RunSpec:
    design: DesignSpec
    plan: MonitoringPlan
    model: OutcomeModel
    effects: tuple[float, ...]
    replicates: int
    seed: int
    workers: int | None = None
    pool_path: str | None = None
    trajectory: TrajectorySection | None = None
    reversals: ReversalSection | None = None
    calibrate: CalibrateSection | None = None
    raw: dict = field(default_factory=dict, compare=False, repr=False)


def _unknown(section: dict, allowed: set[str], where: str, problems: list[str]) -> None:
    for key in section:
        if key not in allowed:
            problems.append(f"{where}.{key}: unknown key" if where else f"{key}: unknown key")


def _missing(section: dict, required: list[str], where: str, missing: list[str]) -> None:
    for key in required:
        if key not in section or section[key] is None:
            missing.append(f"{where}.{key}" if where else key)


def _mapping(value: Any, where: str, problems: list[str]) -> dict:
    if value is None:
        return {}
    if not isinstance(value, dict):
        problems.append(f"{where}: expected a mapping")
        return {}
    return value


def _int_list(value: Any, where: str, problems: list[str]) -> tuple[int, ...]:
    if not isinstance(value, list) or not all(isinstance(v, int) and not isinstance(v, bool)
                                              for v in value):
        problems.append(f"{where}: expected a list of integers")
        return ()
    return tuple(value)


def _build_design(d: dict, problems: list[str]) -> DesignSpec | None:
    kind = d.get("type")
    if kind not in _DESIGN_KEYS:
        problems.append(f"design.type: must be one of {sorted(_DESIGN_KEYS)}, got {kind!r}")
        return None
    _unknown(d, _DESIGN_KEYS[kind], "design", problems)
    args = {k: v for k, v in d.items() if k != "type"}
    try:
        if kind == "prism":
            return Prism(**args)
        if kind == "rope":
            rope = args.get("rope")
            if not (isinstance(rope, list) and len(rope) == 2):
                problems.append("design.rope: expected [lo, hi]")
                return None
            return RopeOnly(Interval(float(rope[0]), float(rope[1])))
        return NullBoundROE(**args)
    except (TypeError, ValueError) as exc:
        problems.append(f"design: {exc}")
        return None


def parse_config_dict(cfg: dict, *, pool: Pool | None = None, base_dir: Path | None = None) -> RunSpec:
    problems: list[str] = []
    missing: list[str] = []
    if not isinstance(cfg, dict):
        raise ConfigError(["<root>: expected a mapping"])
    _unknown(cfg, _TOP_KEYS, "", problems)
    _missing(cfg, ["seed", "replicates", "design", "plan"], "", missing)

    design_raw = _mapping(cfg.get("design"), "design", problems)
    plan_raw = _mapping(cfg.get("plan"), "plan", problems)
    model_raw = _mapping(cfg.get("model"), "model", problems)
    if "design" in cfg:
        _missing(design_raw, ["type"], "design", missing)
        if design_raw.get("type") == "prism":
            _missing(design_raw, ["sidedness"], "design", missing)
        if design_raw.get("type") == "rope":
            _missing(design_raw, ["rope"], "design", missing)
        if design_raw.get("type") == "roe":
            _missing(design_raw, ["delta1"], "design", missing)
    if "plan" in cfg:
        _missing(plan_raw, ["W"], "plan", missing)
    _unknown(plan_raw, _PLAN_KEYS, "plan", problems)
    _unknown(model_raw, _MODEL_KEYS, "model", problems)
    sections = {}
    for name, keys in _SECTION_KEYS.items():
        if name in cfg:
            sec = _mapping(cfg[name], name, problems)
            _unknown(sec, keys, name, problems)
            sections[name] = sec
    if "trajectory" in sections:
        _missing(sections["trajectory"], ["W_grid", "N_grid"], "trajectory", missing)
    if "reversals" in sections:
        _missing(sections["reversals"], ["lags"], "reversals", missing)
    if "calibrate" in sections:
        _missing(sections["calibrate"], ["alpha_target", "W_grid"], "calibrate", missing)
    if missing:
        problems.insert(0, "missing required keys: " + ", ".join(missing))
    if problems:
        raise ConfigError(problems)

    seed = cfg["seed"]
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2**64:
        problems.append(f"seed: must be an unsigned 64-bit integer, got {seed!r}")
    replicates = cfg["replicates"]
    if not isinstance(replicates, int) or isinstance(replicates, bool) or replicates < 1:
        problems.append(f"replicates: must be a positive integer, got {replicates!r}")
    workers = cfg.get("workers")
    if workers is not None and (not isinstance(workers, int) or workers < 1):
        problems.append(f"workers: must be a positive integer, got {workers!r}")
    effects = cfg.get("effects", [0.0])
    if not isinstance(effects, list) or not effects:
        problems.append("effects: must be a nonempty list of numbers")
        effects = []
    elif not all(isinstance(e, (int, float)) and not isinstance(e, bool) for e in effects):
        problems.append("effects: must be a nonempty list of numbers")

    design = _build_design(design_raw, problems)

    plan = None
    plan_args = dict(plan_raw)
    plan_args.setdefault("ceiling", DEFAULT_CEILING)
    try:
        plan = MonitoringPlan(**plan_args)
    except (TypeError, ValueError) as exc:
        problems.append(f"plan: {exc}")

    model = None
    model_args = {k: v for k, v in model_raw.items() if k != "pool_path"}
    pool_path = model_raw.get("pool_path")
    if pool is None and pool_path is not None:
        p = Path(pool_path)
        if base_dir is not None and not p.is_absolute():
            p = base_dir / p
        pool = ingest_pool(p)
    if pool is not None:
        model_args["kind"] = "bootstrap"
        model_args["pool"] = pool.values
        pool_path = pool.path
    elif model_args.get("kind") == "bootstrap":
        problems.append("model.kind: bootstrap needs model.pool_path or --pool")
    try:
        model = OutcomeModel(**model_args)
    except (TypeError, ValueError) as exc:
        problems.append(f"model: {exc}")

    traj = rev = cal = None
    if "trajectory" in sections:
        s = sections["trajectory"]
        traj = TrajectorySection(
            W_grid=_int_list(s["W_grid"], "trajectory.W_grid", problems),
            S_grid=_int_list(s.get("S_grid", [1]), "trajectory.S_grid", problems),
            A_grid=_int_list(s.get("A_grid", [0]), "trajectory.A_grid", problems),
            N_grid=_int_list(s["N_grid"], "trajectory.N_grid", problems),
        )
        for name in ("W_grid", "S_grid", "A_grid", "N_grid"):
            if not getattr(traj, name):
                problems.append(f"trajectory.{name}: must be nonempty")
        if traj.N_grid and plan is not None and max(traj.N_grid) > plan.ceiling:
            problems.append(f"trajectory.N_grid: {max(traj.N_grid)} exceeds plan.ceiling {plan.ceiling}")
    if "reversals" in sections:
        lags = _int_list(sections["reversals"]["lags"], "reversals.lags", problems)
        if not lags or any(l < 0 for l in lags):
            problems.append("reversals.lags: must be a nonempty list of non-negative integers")
        rev = ReversalSection(lags)
    if "calibrate" in sections:
        s = sections["calibrate"]
        grid = _int_list(s["W_grid"], "calibrate.W_grid", problems)
        alpha = s["alpha_target"]
        if not isinstance(alpha, (int, float)) or not 0 < alpha <= 1:
            problems.append(f"calibrate.alpha_target: must lie in (0, 1], got {alpha!r}")
        if not grid or any(w < 4 for w in grid):
            problems.append("calibrate.W_grid: must be nonempty with every W >= 4")
        cal = CalibrateSection(float(alpha) if isinstance(alpha, (int, float)) else math.nan, grid)

    if problems:
        raise ConfigError(problems)
    return RunSpec(design=design, plan=plan, model=model,
                   effects=tuple(float(e) for e in effects), replicates=replicates, seed=seed,
                   workers=workers, pool_path=pool_path, trajectory=traj, reversals=rev,
                   calibrate=cal, raw=cfg)


def parse_config(path: str | Path, *, pool: Pool | None = None) -> RunSpec:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([f"{path}: cannot read config: {exc}"]) from exc
    try:
        cfg = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([f"{path}: malformed YAML: {exc}"]) from exc
    return parse_config_dict(cfg, pool=pool, base_dir=path.parent)


def effective_config(spec: RunSpec) -> dict:
    """Fully explicit config for ``spec``; parsing it reproduces ``spec``."""
    d = spec.design
    if isinstance(d, Prism):
        design = {"type": "prism", "sidedness": d.sidedness.value, "direction": d.direction.value,
                  "delta_L2": d.delta_L2, "delta_L1": d.delta_L1,
                  "delta_G1": d.delta_G1, "delta_G2": d.delta_G2}
    elif isinstance(d, RopeOnly):
        design = {"type": "rope", "rope": [d.rope.lo, d.rope.hi]}
    else:
        design = {"type": "roe", "delta1": d.delta1, "null": d.null, "direction": d.direction.value}
    p = spec.plan
    plan = {"W": p.W, "S": p.S, "A": p.A, "N": p.N, "affirm_mode": p.affirm_mode.value,
            "interval_level": p.interval_level, "interval_family": p.interval_family.value,
            "ceiling": p.ceiling}
    m = spec.model
    model: dict[str, Any] = {"kind": m.kind, "lag": m.lag, "randomization": m.randomization.value}
    if m.kind == "normal":
        model["sd"] = m.sd
    else:
        model["pool_path"] = spec.pool_path
    out: dict[str, Any] = {"seed": spec.seed, "replicates": spec.replicates, "design": design,
                           "plan": plan, "model": model, "effects": list(spec.effects)}
    if spec.workers is not None:
        out["workers"] = spec.workers
    if spec.trajectory:
        t = spec.trajectory
        out["trajectory"] = {"W_grid": list(t.W_grid), "S_grid": list(t.S_grid),
                             "A_grid": list(t.A_grid), "N_grid": list(t.N_grid)}
    if spec.reversals:
        out["reversals"] = {"lags": list(spec.reversals.lags)}
    if spec.calibrate:
        out["calibrate"] = {"alpha_target": spec.calibrate.alpha_target,
                            "W_grid": list(spec.calibrate.W_grid)}
    return out


def config_hash(spec: RunSpec) -> str:
    cfg = effective_config(spec)
    cfg.pop("workers", None)  # worker count never changes results
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def dump_config(spec: RunSpec, path: str | Path) -> None:
    Path(path).write_text(yaml.safe_dump(effective_config(spec), sort_keys=False))
