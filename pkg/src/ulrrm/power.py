"""Per-user power management over a time slot.

A user's "slots" are its selected (PRB, stream) pairs; each slot has an
effective channel ``E`` (SNR per mW) so that ``snr = power * E``. The user's
power budget is shared by all its slots in the time slot.

* ``capped_waterfill`` solves the concave surrogate problem
  max sum a*ln(1 + d*E_j*P_j)  s.t.  sum P_j <= budget, 0 <= P_j <= tau_j
  where tau_j is the power that already reaches the top MCS.
* ``tpm`` follows it with MCS quantization and a marginal-cost greedy upgrade.
* ``epm`` splits the budget equally.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from numba import njit

from .mcs import FittedRateModel, McsTable, mcs_level

__all__ = [
    "JpmProblem",
    "PowerPlan",
    "UPGRADE_SLACK",
    "capped_waterfill",
    "mcs_quantize_and_pool",
    "mcs_greedy_upgrade",
    "tpm",
    "epm",
    "epm_plan",
]

UPGRADE_SLACK = 1e-12


@njit(cache=True)
def waterfill_powers(eff, budget, d_coeff, gamma_max):
    """Exact capped water-filling by a sweep over sorted breakpoints.

    With x_j = 1/E_j the KKT solution is P_j = clip(mu - x_j/d, 0, gamma_max*x_j).
    Activation (x_j/d) and saturation (x_j/d + gamma_max*x_j) points are both
    ordered by x_j, so a single pass over that order finds the water level mu.
    """
    n = eff.size
    p = np.empty(n)
    if n == 0:
        return p
    total_cap = 0.0
    for j in range(n):
        total_cap += gamma_max / eff[j]
    if total_cap <= budget:
        for j in range(n):
            p[j] = gamma_max / eff[j]
        return p
    inv_d = 1.0 / d_coeff
    x = 1.0 / eff
    order = np.argsort(x, kind="mergesort")
    i = 0
    q = 0
    m = 0
    a_sum = 0.0
    t_sum = 0.0
    mu = 0.0
    while True:
        a_next = np.inf
        if i < n:
            a_next = x[order[i]] * inv_d
        s_next = np.inf
        if q < i:
            xq = x[order[q]]
            s_next = xq * inv_d + gamma_max * xq
        mu_next = min(a_next, s_next)
        if m > 0 and t_sum + m * mu_next - a_sum >= budget:
            mu = (budget - t_sum + a_sum) / m
            break
        if s_next <= a_next:
            xq = x[order[q]]
            m -= 1
            a_sum -= xq * inv_d
            t_sum += gamma_max * xq
            q += 1
        else:
            m += 1
            a_sum += x[order[i]] * inv_d
            i += 1
        if q >= n:
            # unreachable when total_cap > budget; kept as a guard
            mu = np.inf
            break
    for j in range(n):
        v = mu - x[j] * inv_d
        cap = gamma_max * x[j]
        if v < 0.0:
            v = 0.0
        elif v > cap:
            v = cap
        p[j] = v
    return p


@njit(cache=True)
def fitted_sum(eff, powers, a_coeff, d_coeff):
    s = 0.0
    for j in range(eff.size):
        s += a_coeff * np.log1p(d_coeff * eff[j] * powers[j])
    return s


@njit(cache=True)
def equal_powers(eff, budget, gamma_max):
    """Equal split; powers beyond the top-MCS cap are not counted as useful."""
    n = eff.size
    p = np.empty(n)
    if n == 0:
        return p
    share = budget / n
    for j in range(n):
        cap = gamma_max / eff[j]
        p[j] = share if share < cap else cap
    return p


@dataclass(frozen=True)
class JpmProblem:
    """Surrogate power-management instance for one user.

    ``eff`` holds the effective channel of each slot; ``slots`` optionally names
    them as (prb, stream) pairs in the same order.
    """

    eff: np.ndarray
    budget: float
    model: FittedRateModel
    table: McsTable
    slots: Optional[Sequence[Tuple[int, int]]] = None

    def __post_init__(self):
        eff = np.ascontiguousarray(self.eff, dtype=float).ravel()
        if np.any(~(eff > 0)):
            raise ValueError("all effective channels must be positive")
        if not self.budget > 0:
            raise ValueError("power budget must be positive")
        object.__setattr__(self, "eff", eff)

    @property
    def caps(self) -> np.ndarray:
        return self.table.gamma_max / self.eff


@dataclass
class PowerPlan:
    """Powers and rates per slot. ``mcs_levels`` is None until quantized."""

    eff: np.ndarray
    power: np.ndarray
    fitted_rate: np.ndarray
    budget: float
    mcs_levels: Optional[np.ndarray] = None
    mcs_rates: Optional[np.ndarray] = None

    @property
    def total_power(self) -> float:
        return float(self.power.sum())

    @property
    def total_fitted_rate(self) -> float:
        return float(self.fitted_rate.sum())

    @property
    def total_mcs_rate(self) -> float:
        if self.mcs_rates is None:
            raise ValueError("plan has not been MCS-quantized")
        return float(self.mcs_rates.sum())


def _fitted(eff, power, model):
    return model.a_coeff * np.log1p(model.d_coeff * eff * power)


def capped_waterfill(problem: JpmProblem) -> PowerPlan:
    eff = problem.eff
    p = waterfill_powers(eff, float(problem.budget), problem.model.d_coeff,
                         problem.table.gamma_max)
    return PowerPlan(eff=eff, power=p, fitted_rate=_fitted(eff, p, problem.model),
                     budget=float(problem.budget))


def mcs_quantize_and_pool(plan: PowerPlan, table: McsTable) -> Tuple[PowerPlan, float]:
    """Trim each slot's power to the exact threshold of the level it reaches.

    Returns the trimmed plan (levels and MCS rates set) and the surplus power,
    i.e. the budget not spent by the trimmed plan.
    """
    eff = plan.eff
    levels = np.asarray(mcs_level(plan.power * eff, table), dtype=int).reshape(eff.shape)
    thr = np.concatenate(([0.0], table.snr_linear))
    rates = np.concatenate(([0.0], table.rates))
    power = np.where(levels > 0, thr[levels] / eff, 0.0)
    # never raise a slot's power through rounding
    power = np.minimum(power, plan.power)
    surplus = max(plan.budget - float(power.sum()), 0.0)
    out = PowerPlan(eff=eff, power=power, fitted_rate=plan.fitted_rate.copy(),
                    budget=plan.budget, mcs_levels=levels, mcs_rates=rates[levels])
    return out, surplus


def mcs_greedy_upgrade(plan: PowerPlan, surplus: float, table: McsTable) -> PowerPlan:
    """Spend ``surplus`` on single-level MCS upgrades, cheapest power-per-rate first.

    Ties go to the earlier slot. Stops when no remaining upgrade is affordable.
    """
    if plan.mcs_levels is None:
        raise ValueError("plan must be quantized before upgrading")
    eff = plan.eff
    levels = plan.mcs_levels.copy()
    power = plan.power.copy()
    thr = np.concatenate(([0.0], table.snr_linear))
    rates = np.concatenate(([0.0], table.rates))
    top = table.num_levels
    while True:
        best = -1
        best_ratio = np.inf
        best_need = 0.0
        for j in range(eff.size):
            lvl = levels[j]
            if lvl >= top:
                continue
            need = thr[lvl + 1] / eff[j] - power[j]
            if need > surplus + UPGRADE_SLACK:
                continue
            ratio = need / (rates[lvl + 1] - rates[lvl])
            if ratio < best_ratio:
                best, best_ratio, best_need = j, ratio, need
        if best < 0:
            break
        levels[best] += 1
        power[best] = thr[levels[best]] / eff[best]
        surplus -= best_need
    return PowerPlan(eff=eff, power=power, fitted_rate=plan.fitted_rate.copy(),
                     budget=plan.budget, mcs_levels=levels, mcs_rates=rates[levels])


def tpm(eff, budget: float, table: McsTable, model: FittedRateModel) -> PowerPlan:
    """Two-step power management: water-filling, then MCS-aware greedy upgrade."""
    eff = np.ascontiguousarray(eff, dtype=float).ravel()
    if eff.size == 0:
        z = np.zeros(0)
        return PowerPlan(eff=eff, power=z, fitted_rate=z.copy(), budget=float(budget),
                         mcs_levels=np.zeros(0, dtype=int), mcs_rates=z.copy())
    plan = capped_waterfill(JpmProblem(eff=eff, budget=budget, model=model, table=table))
    plan, surplus = mcs_quantize_and_pool(plan, table)
    return mcs_greedy_upgrade(plan, surplus, table)


def epm(n: int, budget: float) -> np.ndarray:
    if n <= 0:
        return np.zeros(0)
    return np.full(n, budget / n)


def epm_plan(eff, budget: float, table: McsTable, model: FittedRateModel) -> PowerPlan:
    """Equal power per slot, rates from the exact MCS mapping."""
    eff = np.ascontiguousarray(eff, dtype=float).ravel()
    p = epm(eff.size, budget)
    levels = np.asarray(mcs_level(p * eff, table), dtype=int).reshape(eff.shape)
    rates = np.concatenate(([0.0], table.rates))
    return PowerPlan(eff=eff, power=p, fitted_rate=_fitted(eff, p, model),
                     budget=float(budget), mcs_levels=levels, mcs_rates=rates[levels])
