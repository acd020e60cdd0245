"""Experiment configuration, orchestration and result export.

A config is a JSON object. ``preset`` names a scenario and ``scenario`` holds
overrides of its fields; the remaining keys describe the sweep:

    {
      "preset": "uma",
      "scenario": {"num_subchannels": 13},
      "strategies": ["CTR_F", "BD", "CTR_ONE"],
      "power_schemes": ["TPM"],
      "num_users": [10, 20],
      "antennas": [[64, 4]],
      "budgets_mw": [1.0],
      "num_realizations": 10,
      "base_seed": 0,
      "horizon": 66, "beta": 1.05, "window": 6,
      "fit_a": 1.389, "fit_d": 0.5191,
      "jobs": 1, "reuse": true,
      "output_dir": "results"
    }

Realization i of every sweep point uses seed ``base_seed + i``.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
import platform
import re
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from . import __version__
from .channel import PRESETS, ScenarioConfig, preset
from .fairness import (InsufficientSamples, RealizationConfig, aggregate, geometric_mean,
                       run_realization)
from .gus import PowerScheme, Strategy
from .mcs import FittedRateModel, default_mcs_table, load_mcs_table

__all__ = [
    "OUTPUT_ENV",
    "ConfigError",
    "ExperimentConfig",
    "parse_config_text",
    "validate_config",
    "load_config",
    "run_experiment",
    "format_number",
]

log = logging.getLogger(__name__)

OUTPUT_ENV = "ULRRM_OUTPUT_DIR"
DEFAULT_OUTPUT = "ulrrm-results"
DEFAULT_BUDGETS = {"uma": [1.0], "rma": [50.0]}

RATE_COLUMNS = ["realization", "ts", "user", "rate_mbps", "strategy", "power_scheme",
                "num_users", "M_B", "M_U", "P_U"]
HIST_COLUMNS = ["strategy", "power_scheme", "num_users", "M_B", "M_U", "P_U", "pattern",
                "count", "fraction"]

KNOWN_KEYS = {
    "preset", "scenario", "strategies", "power_schemes", "num_users", "antennas",
    "budgets_mw", "num_realizations", "base_seed", "horizon", "beta", "window",
    "fit_a", "fit_d", "jobs", "reuse", "output_dir", "mcs_table",
}


@dataclass(frozen=True)
class ConfigError:
    message: str
    line: Optional[int] = None

    def __str__(self):
        return f"line {self.line}: {self.message}" if self.line else self.message


@dataclass(frozen=True)
class ExperimentConfig:
    preset: str = "uma"
    scenario_overrides: Dict[str, Any] = field(default_factory=dict)
    strategies: Tuple[str, ...] = ("CTR_F", "BD", "CTR_ONE")
    power_schemes: Tuple[str, ...] = ("TPM",)
    num_users: Tuple[int, ...] = (10,)
    antennas: Tuple[Tuple[int, int], ...] = ((64, 4),)
    budgets_mw: Tuple[float, ...] = (1.0,)
    num_realizations: int = 50
    base_seed: int = 0
    horizon: int = 66
    beta: float = 1.05
    window: int = 6
    fit_a: float = 1.389
    fit_d: float = 0.5191
    jobs: int = 1
    reuse: bool = True
    output_dir: Optional[str] = None
    mcs_table: Optional[str] = None

    def scenario(self, m_b: int, m_u: int) -> ScenarioConfig:
        return preset(self.preset, **dict(self.scenario_overrides,
                                          num_bs_antennas=m_b, num_user_antennas=m_u))

    def resolved(self) -> Dict[str, Any]:
        """Canonical JSON-able form (used for hashing and the manifest)."""
        return {
            "preset": self.preset,
            "scenario": dict(sorted(self.scenario_overrides.items())),
            "strategies": list(self.strategies),
            "power_schemes": list(self.power_schemes),
            "num_users": list(self.num_users),
            "antennas": [list(a) for a in self.antennas],
            "budgets_mw": list(self.budgets_mw),
            "num_realizations": self.num_realizations,
            "base_seed": self.base_seed,
            "horizon": self.horizon,
            "beta": self.beta,
            "window": self.window,
            "fit_a": self.fit_a,
            "fit_d": self.fit_d,
            "reuse": self.reuse,
            "mcs_table": self.mcs_table,
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.resolved(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _line_of(text: Optional[str], key: str) -> Optional[int]:
    if not text:
        return None
    pat = re.compile(r'"%s"\s*:' % re.escape(key))
    for i, line in enumerate(text.splitlines(), start=1):
        if pat.search(line):
            return i
    return None


def parse_config_text(text: str) -> Tuple[Optional[Dict[str, Any]], List[ConfigError]]:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        return None, [ConfigError(f"invalid JSON: {exc.msg} (column {exc.colno})", exc.lineno)]
    if not isinstance(raw, dict):
        return None, [ConfigError("config must be a JSON object", 1)]
    return raw, []


def _as_list(value):
    return list(value) if isinstance(value, (list, tuple)) else [value]


def validate_config(raw: Dict[str, Any], text: Optional[str] = None
                    ) -> Tuple[Optional[ExperimentConfig], List[ConfigError]]:
    """Check a raw config dict; returns the typed config (or None) and the errors."""
    errors: List[ConfigError] = []

    def err(key, msg):
        errors.append(ConfigError(msg, _line_of(text, key)))

    for key in sorted(set(raw) - KNOWN_KEYS):
        err(key, f"unknown key {key!r}")

    name = str(raw.get("preset", "uma")).lower()
    if name not in PRESETS:
        err("preset", f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
        name = "uma"
    overrides = raw.get("scenario", {}) or {}
    if not isinstance(overrides, dict):
        err("scenario", "scenario overrides must be an object")
        overrides = {}

    strategies = _as_list(raw.get("strategies", ["CTR_F", "BD", "CTR_ONE"]))
    if not strategies:
        err("strategies", "strategy list must not be empty")
    for s in strategies:
        try:
            Strategy.parse(s)
        except ValueError as exc:
            err("strategies", str(exc))
    schemes = _as_list(raw.get("power_schemes", ["TPM"]))
    if not schemes:
        err("power_schemes", "power-scheme list must not be empty")
    for s in schemes:
        try:
            PowerScheme.parse(s)
        except ValueError as exc:
            err("power_schemes", str(exc))

    users = _as_list(raw.get("num_users", [10]))
    if not users:
        err("num_users", "user-count sweep must not be empty")
    if any(not isinstance(u, int) or isinstance(u, bool) or u < 1 for u in users):
        err("num_users", "user counts must be integers >= 1")

    antennas = raw.get("antennas", [[64, 4]])
    if not isinstance(antennas, list) or not antennas:
        err("antennas", "antenna sweep must be a non-empty list of [M_B, M_U] pairs")
        antennas = []
    pairs = []
    for a in antennas:
        if (not isinstance(a, (list, tuple)) or len(a) != 2
                or not all(isinstance(v, int) and not isinstance(v, bool) and v >= 1 for v in a)):
            err("antennas", f"antenna entry {a!r} must be [M_B, M_U] with positive integers")
            continue
        m_b, m_u = a
        if m_u > m_b:
            err("antennas", f"M_U = {m_u} exceeds M_B = {m_b}; a PRB cannot hold one full user")
        pairs.append((int(m_b), int(m_u)))

    budgets = _as_list(raw.get("budgets_mw", DEFAULT_BUDGETS[name]))
    if not budgets:
        err("budgets_mw", "P_U sweep must not be empty")
    if any(not isinstance(b, (int, float)) or isinstance(b, bool) or not b > 0 for b in budgets):
        err("budgets_mw", "power budgets must be positive numbers (mW)")

    def int_field(key, default, minimum):
        v = raw.get(key, default)
        if not isinstance(v, int) or isinstance(v, bool) or v < minimum:
            err(key, f"{key} must be an integer >= {minimum}")
            return default
        return v

    def num_field(key, default):
        v = raw.get(key, default)
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            err(key, f"{key} must be a number")
            return default
        return float(v)

    n_real = int_field("num_realizations", 50, 1)
    base_seed = int_field("base_seed", 0, 0)
    horizon = int_field("horizon", 66, 1)
    window = int_field("window", 6, 1)
    jobs = int_field("jobs", 1, 1)
    beta = num_field("beta", 1.05)
    if not beta > 1:
        err("beta", "β must exceed 1")
    fit_a = num_field("fit_a", 1.389)
    fit_d = num_field("fit_d", 0.5191)
    if not (fit_a > 0 and fit_d > 0):
        err("fit_a" if not fit_a > 0 else "fit_d", "fitting coefficients must be positive")
    reuse = raw.get("reuse", True)
    if not isinstance(reuse, bool):
        err("reuse", "reuse must be true or false")
        reuse = True
    out_dir = raw.get("output_dir")
    if out_dir is not None and not isinstance(out_dir, str):
        err("output_dir", "output_dir must be a string")
        out_dir = None
    table_path = raw.get("mcs_table")
    if table_path is not None:
        try:
            load_mcs_table(table_path)
        except (OSError, ValueError) as exc:
            err("mcs_table", f"cannot load MCS table: {exc}")

    # scenario overrides and per-PRB feasibility
    for m_b, m_u in pairs:
        try:
            preset(name, **dict(overrides, num_bs_antennas=m_b, num_user_antennas=m_u))
        except (TypeError, ValueError) as exc:
            err("scenario", f"invalid scenario: {exc}")
            break

    if errors:
        return None, sorted(errors, key=lambda e: (e.line is None, e.line or 0))
    cfg = ExperimentConfig(
        preset=name, scenario_overrides=dict(overrides),
        strategies=tuple(Strategy.parse(s).name for s in strategies),
        power_schemes=tuple(PowerScheme.parse(s).name for s in schemes),
        num_users=tuple(int(u) for u in users), antennas=tuple(pairs),
        budgets_mw=tuple(float(b) for b in budgets), num_realizations=n_real,
        base_seed=base_seed, horizon=horizon, beta=beta, window=window, fit_a=fit_a,
        fit_d=fit_d, jobs=jobs, reuse=reuse, output_dir=out_dir, mcs_table=table_path)
    return cfg, []


def load_config(path) -> Tuple[Optional[ExperimentConfig], List[ConfigError]]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        return None, [ConfigError(f"cannot read config: {exc}")]
    raw, errors = parse_config_text(text)
    if errors:
        return None, errors
    return validate_config(raw, text)


def format_number(x: float) -> str:
    return format(float(x), ".9g")


# ---------------------------------------------------------------- running

@dataclass(frozen=True)
class _Task:
    index: int
    num_users: int
    m_b: int
    m_u: int
    budget: float
    strategy: str
    scheme: str
    realization: int
    seed: int


def _tasks(cfg: ExperimentConfig) -> List[_Task]:
    out = []
    for n in cfg.num_users:
        for m_b, m_u in cfg.antennas:
            for b in cfg.budgets_mw:
                for s in cfg.strategies:
                    for p in cfg.power_schemes:
                        for i in range(cfg.num_realizations):
                            out.append(_Task(len(out), n, m_b, m_u, b, s, p, i,
                                             cfg.base_seed + i))
    return out


def _run_task(cfg: ExperimentConfig, task: _Task):
    try:
        table = load_mcs_table(cfg.mcs_table) if cfg.mcs_table else default_mcs_table()
        rc = RealizationConfig(scenario=cfg.scenario(task.m_b, task.m_u),
                               num_users=task.num_users, horizon=cfg.horizon,
                               budget=task.budget, beta=cfg.beta, window=cfg.window,
                               reuse=cfg.reuse,
                               model=FittedRateModel(cfg.fit_a, cfg.fit_d), table=table)
        t0 = time.perf_counter()
        res = run_realization(rc, task.strategy, task.scheme, task.seed)
        return task, {"rates": res.rates, "patterns": res.patterns,
                      "runtime_s": time.perf_counter() - t0}, None
    except Exception:  # recorded in the manifest, excluded from aggregates
        return task, None, traceback.format_exc()


def _point_key(t: _Task):
    return (t.num_users, t.m_b, t.m_u, t.budget)


def run_experiment(cfg: ExperimentConfig, out_dir=None, jobs: Optional[int] = None,
                   quiet: bool = True) -> Dict[str, Any]:
    """Run every sweep point and write rates.csv, histogram.csv, summary.json, manifest.json.

    Returns the manifest dict.
    """
    out = Path(out_dir or cfg.output_dir or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT)
    out.mkdir(parents=True, exist_ok=True)
    jobs = jobs or cfg.jobs
    tasks = _tasks(cfg)
    started = datetime.now(timezone.utc).isoformat()
    results: Dict[int, Any] = {}
    failures = []

    def collect(item):
        task, payload, error = item
        if error is not None:
            failures.append({"task": task.index, "strategy": task.strategy,
                             "power_scheme": task.scheme, "num_users": task.num_users,
                             "M_B": task.m_b, "M_U": task.m_u, "P_U": task.budget,
                             "seed": task.seed, "error": error})
            log.warning("realization failed: %s seed %d", task.strategy, task.seed)
        else:
            results[task.index] = payload
        if not quiet:
            print(f"[{len(results) + len(failures)}/{len(tasks)}] {task.strategy}/{task.scheme} "
                  f"U={task.num_users} M_B={task.m_b} M_U={task.m_u} P_U={task.budget} "
                  f"seed={task.seed}" + (" FAILED" if error else ""), flush=True)

    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for item in pool.map(_run_task, [cfg] * len(tasks), tasks):
                collect(item)
    else:
        for task in tasks:
            collect(_run_task(cfg, task))

    # rates are rounded exactly as printed so the summary is recomputable from the CSV
    rounded = {i: np.vectorize(lambda x: float(format_number(x)))(p["rates"])
               if p["rates"].size else p["rates"] for i, p in results.items()}

    with open(out / "rates.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RATE_COLUMNS)
        for task in tasks:
            if task.index not in results:
                continue
            r = rounded[task.index]
            for ts in range(r.shape[0]):
                for u in range(r.shape[1]):
                    w.writerow([task.realization, ts, u, format_number(r[ts, u]), task.strategy,
                                task.scheme, task.num_users, task.m_b, task.m_u,
                                format_number(task.budget)])

    hist_rows = []
    groups: Dict[tuple, Dict[str, int]] = {}
    for task in tasks:
        if task.index in results:
            g = groups.setdefault(_point_key(task) + (task.strategy, task.scheme), {})
            for k, v in results[task.index]["patterns"].items():
                g[k] = g.get(k, 0) + v
    for (n, m_b, m_u, b, s, p), counts in groups.items():
        total = sum(counts.values())
        for pat in sorted(counts, key=lambda k: (k.count("+"), k)):
            hist_rows.append([s, p, n, m_b, m_u, format_number(b), pat, counts[pat],
                              format_number(counts[pat] / total)])
    with open(out / "histogram.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HIST_COLUMNS)
        w.writerows(hist_rows)

    summary = _summarize(cfg, tasks, rounded)
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")

    manifest = {
        "config_hash": cfg.config_hash(),
        "config": cfg.resolved(),
        "seeds": [cfg.base_seed + i for i in range(cfg.num_realizations)],
        "versions": _versions(),
        "started": started,
        "finished": datetime.now(timezone.utc).isoformat(),
        "jobs": jobs,
        "num_tasks": len(tasks),
        "failures": failures,
        "runtimes_s": [
            {"strategy": t.strategy, "power_scheme": t.scheme, "num_users": t.num_users,
             "M_B": t.m_b, "M_U": t.m_u, "P_U": t.budget, "seed": t.seed,
             "runtime_s": results[t.index]["runtime_s"]}
            for t in tasks if t.index in results
        ],
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest


def _summarize(cfg: ExperimentConfig, tasks: List[_Task], rates: Dict[int, np.ndarray]):
    points: Dict[tuple, Dict[str, Any]] = {}
    for task in tasks:
        key = _point_key(task)
        entry = points.setdefault(key, {"num_users": task.num_users, "M_B": task.m_b,
                                        "M_U": task.m_u, "P_U": task.budget, "results": {}})
        res = entry["results"].setdefault(f"{task.strategy}/{task.scheme}",
                                          {"strategy": task.strategy,
                                           "power_scheme": task.scheme, "gm": []})
        if task.index in rates:
            res["gm"].append(geometric_mean(rates[task.index]))
    out_points = []
    for entry in points.values():
        means = {}
        for name, res in entry["results"].items():
            gms = res.pop("gm")
            res["gm_per_realization"] = gms
            res["n"] = len(gms)
            res["mean_gm"] = float(np.mean(gms)) if gms else None
            res["mean_gm_per_ts"] = (res["mean_gm"] / cfg.horizon
                                     if res["mean_gm"] is not None else None)
            try:
                res["ci90_half_width"] = aggregate(gms).half_width
            except InsufficientSamples:
                res["ci90_half_width"] = None
            means[(res["strategy"], res["power_scheme"])] = res["mean_gm"]
        ratios = {}
        for scheme in cfg.power_schemes:
            ref = means.get(("CTR_F", scheme))
            for s in ("BD", "CTR_ONE"):
                v = means.get((s, scheme))
                if ref and v is not None:
                    ratios[f"{s}/CTR_F ({scheme})"] = v / ref
        for s in cfg.strategies:
            tp, ep = means.get((s, "TPM")), means.get((s, "EPM"))
            if tp and ep is not None:
                ratios[f"EPM/TPM ({s})"] = ep / tp
        entry["ratios"] = ratios
        entry["results"] = list(entry["results"].values())
        out_points.append(entry)
    return {"horizon": cfg.horizon, "confidence": 0.90, "points": out_points}


def _versions():
    import numba
    import scipy
    return {"ulrrm": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__, "numba": numba.__version__}
