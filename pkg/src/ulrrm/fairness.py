"""Proportional-fairness simulation of a realization over many time slots."""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy import stats

from .channel import ScenarioConfig, generate_realization, noise_power, slot_channels
from .gus import PowerScheme, SearchParams, Strategy, run_gus
from .mcs import FittedRateModel, McsTable, default_mcs_table
from .zf import stream_signatures

__all__ = [
    "RATE_FLOOR",
    "FairnessState",
    "initial_fairness",
    "seed_fairness",
    "update_fairness",
    "geometric_mean",
    "RealizationConfig",
    "RealizationResult",
    "run_realization",
    "Aggregate",
    "InsufficientSamples",
    "aggregate",
]

# Mbps; keeps weights finite for users starved in the first time slot
RATE_FLOOR = 1e-6


@dataclass(frozen=True)
class FairnessState:
    window: int
    avg_rate: np.ndarray  # moving average, Mbps per time slot

    @property
    def weights(self) -> np.ndarray:
        return 1.0 / self.avg_rate


def initial_fairness(num_users: int, window: int) -> FairnessState:
    """Equal unit weights for the first time slot."""
    return FairnessState(window=int(window), avg_rate=np.ones(num_users))


def update_fairness(state: FairnessState, rates) -> FairnessState:
    r = np.asarray(rates, dtype=float)
    if np.any(r < 0):
        raise ValueError("rates must be non-negative")
    w = state.window
    return replace(state, avg_rate=((w - 1) * state.avg_rate + r) / w)


def seed_fairness(first_rates, window: int, floor: float = RATE_FLOOR) -> FairnessState:
    """State after the first time slot: the average starts at the first rates."""
    r = np.asarray(first_rates, dtype=float)
    start = FairnessState(window=int(window), avg_rate=np.maximum(r, floor))
    return update_fairness(start, r)


def geometric_mean(rates) -> float:
    """GM over users of their total rate; ``rates`` is (time slots, users)."""
    totals = np.asarray(rates, dtype=float)
    if totals.ndim == 2:
        totals = totals.sum(axis=0)
    if np.any(totals < 0):
        raise ValueError("rates must be non-negative")
    if np.any(totals == 0):
        return 0.0
    return float(np.exp(np.mean(np.log(totals))))


@dataclass(frozen=True)
class RealizationConfig:
    scenario: ScenarioConfig
    num_users: int = 10
    horizon: int = 66
    budget: float = 1.0  # mW
    beta: float = 1.05
    window: int = 6
    reuse: bool = True
    model: FittedRateModel = field(default_factory=FittedRateModel)
    table: McsTable = field(default_factory=default_mcs_table)


@dataclass
class RealizationResult:
    seed: int
    strategy: Strategy
    scheme: PowerScheme
    rates: np.ndarray  # (time slots, users), Mbps
    gm: float
    patterns: Dict[str, int]
    runtimes: List[float]
    selections: List[np.ndarray]  # per time slot, (C, U, M_U) bool
    weights: List[np.ndarray]  # weights used in each time slot

    @property
    def pattern_distribution(self) -> Dict[str, float]:
        total = sum(self.patterns.values())
        return {k: v / total for k, v in sorted(self.patterns.items())} if total else {}


def run_realization(config: RealizationConfig, strategy, scheme, seed: int,
                    weights_override: Optional[Sequence[float]] = None) -> RealizationResult:
    """Simulate ``config.horizon`` time slots of one user drop.

    With ``weights_override`` the weights stay fixed (no fairness updates).
    """
    strategy = Strategy.parse(strategy)
    scheme = PowerScheme.parse(scheme)
    cfg = config.scenario
    real = generate_realization(cfg, config.num_users, config.horizon, seed)
    scale = 1.0 / np.sqrt(noise_power(cfg))
    params = SearchParams(strategy=strategy, budget=config.budget, beta=config.beta,
                          scheme=scheme, reuse=config.reuse, table=config.table,
                          model=config.model)
    to_mbps = cfg.subchannel_bw / 1e6
    fair = initial_fairness(config.num_users, config.window)
    rates = np.zeros((config.horizon, config.num_users))
    patterns: Dict[str, int] = {}
    runtimes, selections, used_weights = [], [], []
    sig = None
    block = -1
    for t in range(config.horizon):
        tb = t // cfg.report_block_slots
        if tb != block:
            sig = stream_signatures(slot_channels(real, t)) * scale
            block = tb
        w = (np.asarray(weights_override, dtype=float) if weights_override is not None
             else fair.weights)
        res = run_gus(sig, w, params)
        r = res.user_rate * to_mbps
        rates[t] = r
        for k, v in res.patterns().items():
            patterns[k] = patterns.get(k, 0) + v
        runtimes.append(res.stats["runtime_s"])
        selections.append(res.selection)
        used_weights.append(np.array(w))
        fair = seed_fairness(r, config.window) if t == 0 else update_fairness(fair, r)
    return RealizationResult(seed=int(seed), strategy=strategy, scheme=scheme, rates=rates,
                             gm=geometric_mean(rates), patterns=patterns, runtimes=runtimes,
                             selections=selections, weights=used_weights)


class InsufficientSamples(ValueError):
    """A confidence interval needs at least two samples."""


@dataclass(frozen=True)
class Aggregate:
    mean: float
    half_width: float
    n: int
    confidence: float = 0.90


def aggregate(values, confidence: float = 0.90) -> Aggregate:
    """Sample mean with a two-sided Student-t confidence half-width."""
    x = np.asarray(values, dtype=float)
    if x.size < 2:
        raise InsufficientSamples(f"need at least 2 samples, got {x.size}")
    q = stats.t.ppf(0.5 + confidence / 2.0, x.size - 1)
    hw = q * x.std(ddof=1) / np.sqrt(x.size)
    return Aggregate(mean=float(x.mean()), half_width=float(hw), n=int(x.size),
                     confidence=confidence)
