"""Greedy-up stream search (GUS) over one time slot.

Every iteration assesses each legal unselected candidate, i.e. a
(prb, user[, stream]) tuple, by the weighted sum of fitted rates over the
whole time slot it would produce, and commits the best one. The best
allocation seen so far (the incumbent) is kept; the search stops when the
incumbent beats the latest pick by more than the factor ``beta`` or when
nothing is left to add. The incumbent is then finalized with exact MCS
power management and zero-rate pruning.

Strategies:
  CTR_ONE  only the strongest stream of a user (candidates are (prb, user))
  BD       all M_U streams of a user at once (candidates are (prb, user))
  CTR_F    any stream subset (candidates are (prb, user, stream))

Rate reuse: assessments are memoized per candidate together with version
stamps of the candidate's PRB and of every user whose rates entered the
result. A commit in PRB c bumps the version of c and of every user selected
in c, which is exactly what invalidates candidate types 1-3 (see
``candidate_type``); everything else (type 4) is served from the memo.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional

import numpy as np
from numba import njit

from . import zf
from .mcs import FittedRateModel, McsTable, default_mcs_table
from .power import epm_plan, equal_powers, fitted_sum, tpm, waterfill_powers
from .zf import InfeasibleCombination, bordered_update

__all__ = [
    "Strategy",
    "PowerScheme",
    "Candidate",
    "SearchParams",
    "SearchState",
    "StepOutcome",
    "TsAllocationResult",
    "NoReferencePrb",
    "enumerate_candidates",
    "assess_candidate",
    "assess_candidate_with_reuse",
    "candidate_type",
    "search_step",
    "beta_rule",
    "finalize",
    "run_gus",
    "allocation_wsr",
]


class Strategy(enum.IntEnum):
    CTR_ONE = 0
    BD = 1
    CTR_F = 2

    @classmethod
    def parse(cls, name) -> "Strategy":
        if isinstance(name, cls):
            return name
        key = str(name).upper().replace("-", "_")
        aliases = {"CTRONE": "CTR_ONE", "CTR1": "CTR_ONE", "CTRF": "CTR_F"}
        try:
            return cls[aliases.get(key, key)]
        except KeyError:
            raise ValueError(f"unknown strategy {name!r}") from None


class PowerScheme(enum.IntEnum):
    TPM = 0
    EPM = 1

    @classmethod
    def parse(cls, name) -> "PowerScheme":
        if isinstance(name, cls):
            return name
        try:
            return cls[str(name).upper()]
        except KeyError:
            raise ValueError(f"unknown power scheme {name!r}") from None


class NoReferencePrb(LookupError):
    """Raised when candidate types are requested before the first commit."""


@dataclass(frozen=True, order=True)
class Candidate:
    """A (prb, user, stream) tuple; ordering is the tie-break order.

    ``stream`` is 0-based; it is 0 for CTR_ONE and BD (for BD it stands for
    the whole user).
    """

    prb: int
    user: int
    stream: int = 0


@dataclass(frozen=True)
class SearchParams:
    strategy: Strategy = Strategy.CTR_F
    budget: float = 1.0  # mW per user per time slot
    beta: float = 1.05
    scheme: PowerScheme = PowerScheme.TPM
    reuse: bool = True
    table: McsTable = field(default_factory=default_mcs_table)
    model: FittedRateModel = field(default_factory=FittedRateModel)
    debug: bool = False

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy.parse(self.strategy))
        object.__setattr__(self, "scheme", PowerScheme.parse(self.scheme))
        if not self.beta > 1:
            raise ValueError("beta must exceed 1")
        if not self.budget > 0:
            raise ValueError("power budget must be positive")


# ---------------------------------------------------------------- kernels

@njit(cache=True)
def _user_rate(ecur_k, c, new_row, budget, a_coeff, d_coeff, gamma_max, scheme, buf):
    """Fitted rate sum of one user; row ``c`` of its gains replaced by ``new_row``.

    Slots are visited in (prb, stream) order. ``c < 0`` means no replacement.
    """
    n_prb, m_u = ecur_k.shape
    n = 0
    for cc in range(n_prb):
        for s in range(m_u):
            e = new_row[s] if cc == c else ecur_k[cc, s]
            if e > 0.0:
                buf[n] = e
                n += 1
    if n == 0:
        return 0.0
    eff = buf[:n]
    if scheme == 0:
        p = waterfill_powers(eff, budget, d_coeff, gamma_max)
    else:
        p = equal_powers(eff, budget, gamma_max)
    return fitted_sum(eff, p, a_coeff, d_coeff)


@njit(cache=True)
def _assess(c, u, j, strategy, sig, q, t, dold, mem_u, cnt, midx, ecur, rsum, weights,
            prb_ver, usr_ver, z_ver, z_feas, z_mem, z_new, s_ver, s_val, read, store,
            budget, a_coeff, d_coeff, gamma_max, scheme, counters):
    n_users, n_prb, m_u, m_b = sig.shape
    s_cnt = cnt[c]
    if strategy == 1:
        k = m_u
        s0 = 0
    elif strategy == 0:
        k = 1
        s0 = 0
    else:
        k = 1
        s0 = j
    jj = j if strategy == 2 else 0

    if read and z_ver[c, u, jj] == prb_ver[c]:
        feas = z_feas[c, u, jj]
        mem = z_mem[c, u, jj, :s_cnt].copy()
        new = z_new[c, u, jj, :k].copy()
    else:
        mem = np.empty(s_cnt)
        new = np.empty(k)
        rows = sig[u, c, s0:s0 + k, :].copy()
        feas = bordered_update(q[c, :, :s_cnt], t[c, :s_cnt, :s_cnt], dold[c, :s_cnt],
                               rows, mem, new)
        counters[1] += 1
        if store:
            z_ver[c, u, jj] = prb_ver[c]
            z_feas[c, u, jj] = feas
            if feas:
                z_mem[c, u, jj, :s_cnt] = mem
                z_new[c, u, jj, :k] = new
            s_ver[c, u, jj, :] = -1
    if not feas:
        return -np.inf

    affected = np.zeros(n_users, dtype=np.bool_)
    affected[u] = True
    for i in range(s_cnt):
        affected[mem_u[c, i]] = True
    buf = np.empty(n_prb * m_u)
    row = np.empty(m_u)
    wsr = 0.0
    for kk in range(n_users):
        if not affected[kk]:
            wsr += weights[kk] * rsum[kk]
            continue
        if read and s_ver[c, u, jj, kk] == usr_ver[kk]:
            val = s_val[c, u, jj, kk]
        else:
            for s in range(m_u):
                idx = midx[c, kk, s]
                if idx >= 0:
                    row[s] = mem[idx]
                elif kk == u and s0 <= s < s0 + k:
                    row[s] = new[s - s0]
                else:
                    row[s] = 0.0
            val = _user_rate(ecur[kk], c, row, budget, a_coeff, d_coeff, gamma_max,
                             scheme, buf)
            counters[0] += 1
            if store:
                s_val[c, u, jj, kk] = val
                s_ver[c, u, jj, kk] = usr_ver[kk]
        wsr += weights[kk] * val
    counters[2] += 1
    return wsr


@njit(cache=True)
def _sweep(strategy, sig, q, t, dold, mem_u, cnt, midx, banned, ecur, rsum, weights,
           prb_ver, usr_ver, z_ver, z_feas, z_mem, z_new, s_ver, s_val, read, store,
           budget, a_coeff, d_coeff, gamma_max, scheme, counters):
    """Assess every legal candidate; return the argmax in (prb, user, stream) order."""
    n_users, n_prb, m_u, m_b = sig.shape
    need = m_u if strategy == 1 else 1
    n_streams = m_u if strategy == 2 else 1
    best_c = -1
    best_u = -1
    best_j = -1
    best = -np.inf
    n_legal = 0
    for c in range(n_prb):
        if cnt[c] + need > m_b:
            continue
        for u in range(n_users):
            for j in range(n_streams):
                if strategy == 2:
                    if midx[c, u, j] >= 0:
                        continue
                elif midx[c, u, 0] >= 0:
                    continue
                if banned[c, u, j]:
                    continue
                n_legal += 1
                w = _assess(c, u, j, strategy, sig, q, t, dold, mem_u, cnt, midx, ecur,
                            rsum, weights, prb_ver, usr_ver, z_ver, z_feas, z_mem, z_new,
                            s_ver, s_val, read, store, budget, a_coeff, d_coeff,
                            gamma_max, scheme, counters)
                if w > best:
                    best = w
                    best_c = c
                    best_u = u
                    best_j = j
    return best_c, best_u, best_j, best, n_legal


# ---------------------------------------------------------------- state

@dataclass(frozen=True)
class StepOutcome:
    selected: Optional[Candidate]
    wsr: float
    stopped: bool
    reason: str = ""
    improved: bool = False


class SearchState:
    """Mutable state of one GUS run.

    ``signatures`` has shape (U, C, M_U, M_B) and must already be divided by
    sqrt(noise), so effective channels come out as SNR per mW.
    """

    def __init__(self, signatures: np.ndarray, weights, params: SearchParams):
        sig = np.ascontiguousarray(signatures, dtype=np.complex128)
        if sig.ndim != 4:
            raise ValueError("signatures must have shape (U, C, M_U, M_B)")
        n_users, n_prb, m_u, m_b = sig.shape
        if params.strategy == Strategy.BD and m_u > m_b:
            raise ValueError("BD needs M_U <= M_B")
        self.sig = sig
        self.params = params
        self.weights = np.ascontiguousarray(weights, dtype=float)
        if self.weights.shape != (n_users,) or np.any(self.weights < 0):
            raise ValueError("weights must be non-negative, one per user")
        self.shape = (n_users, n_prb, m_u, m_b)
        ns = m_u if params.strategy == Strategy.CTR_F else 1
        self.q = np.zeros((n_prb, m_b, m_b), dtype=np.complex128)
        self.t = np.zeros((n_prb, m_b, m_b), dtype=np.complex128)
        self.dold = np.zeros((n_prb, m_b))
        self.mem_u = np.full((n_prb, m_b), -1, dtype=np.int64)
        self.mem_s = np.full((n_prb, m_b), -1, dtype=np.int64)
        self.cnt = np.zeros(n_prb, dtype=np.int64)
        self.midx = np.full((n_prb, n_users, m_u), -1, dtype=np.int64)
        self.banned = np.zeros((n_prb, n_users, ns), dtype=np.bool_)
        self.ecur = np.zeros((n_users, n_prb, m_u))
        self.rsum = np.zeros(n_users)
        self.prb_ver = np.zeros(n_prb, dtype=np.int64)
        self.usr_ver = np.zeros(n_users, dtype=np.int64)
        self.z_ver = np.full((n_prb, n_users, ns), -1, dtype=np.int64)
        self.z_feas = np.zeros((n_prb, n_users, ns), dtype=np.bool_)
        self.z_mem = np.zeros((n_prb, n_users, ns, m_b))
        self.z_new = np.zeros((n_prb, n_users, ns, m_u))
        self.s_ver = np.full((n_prb, n_users, ns, n_users), -1, dtype=np.int64)
        self.s_val = np.zeros((n_prb, n_users, ns, n_users))
        # counters: [water-filling runs, ZF updates, assessments]
        self.counters = np.zeros(3, dtype=np.int64)
        self.wsr_max = 0.0
        self.history: List[Candidate] = []
        self.trajectory: List[float] = []
        self.incumbent_len = 0
        self.reference_prb: Optional[int] = None
        self.stopped = False
        self.stop_reason = ""

    # -- helpers
    @property
    def num_users(self):
        return self.shape[0]

    @property
    def num_prbs(self):
        return self.shape[1]

    def streams_of(self, cand: Candidate) -> List[int]:
        if self.params.strategy == Strategy.BD:
            return list(range(self.shape[2]))
        return [cand.stream]

    def selection(self) -> np.ndarray:
        """Current allocation as a (C, U, M_U) boolean array."""
        return self.midx >= 0

    def users_in(self, prb: int) -> List[int]:
        return sorted(set(int(x) for x in self.mem_u[prb, :self.cnt[prb]]))

    def _kernel_args(self, read: bool, store: bool):
        p = self.params
        return (int(p.strategy), self.sig, self.q, self.t, self.dold, self.mem_u, self.cnt,
                self.midx, self.ecur, self.rsum, self.weights, self.prb_ver, self.usr_ver,
                self.z_ver, self.z_feas, self.z_mem, self.z_new, self.s_ver, self.s_val,
                read, store, float(p.budget), p.model.a_coeff, p.model.d_coeff,
                p.table.gamma_max, int(p.scheme), self.counters)

    def user_rate(self, k: int) -> float:
        p = self.params
        buf = np.empty(self.num_prbs * self.shape[2])
        return _user_rate(self.ecur[k], -1, np.zeros(self.shape[2]), float(p.budget),
                          p.model.a_coeff, p.model.d_coeff, p.table.gamma_max,
                          int(p.scheme), buf)

    def current_wsr(self) -> float:
        return float(np.dot(self.weights, self.rsum))

    def commit(self, cand: Candidate) -> None:
        """Add ``cand`` to the allocation and refresh the affected caches."""
        c, u = cand.prb, cand.user
        n0 = int(self.cnt[c])
        streams = self.streams_of(cand)
        mem_u = list(self.mem_u[c, :n0]) + [u] * len(streams)
        mem_s = list(self.mem_s[c, :n0]) + streams
        rows = self.sig[mem_u, c, mem_s]
        q, t = zf._factor(rows)
        n1 = len(mem_u)
        self.q[c] = 0
        self.t[c] = 0
        self.q[c, :, :n1] = q
        self.t[c, :n1, :n1] = t
        self.dold[c] = 0
        self.dold[c, :n1] = np.sum(np.abs(t) ** 2, axis=1)
        self.mem_u[c, :n1] = mem_u
        self.mem_s[c, :n1] = mem_s
        self.cnt[c] = n1
        for i, s in enumerate(streams):
            self.midx[c, u, s] = n0 + i
        self.ecur[:, c, :] = 0.0
        for i in range(n1):
            self.ecur[mem_u[i], c, mem_s[i]] = 1.0 / self.dold[c, i]
        self.prb_ver[c] += 1
        for k in set(mem_u):
            self.usr_ver[k] += 1
            self.rsum[k] = self.user_rate(k)
        self.history.append(cand)
        self.reference_prb = c

    def check_consistency(self, rtol: float = 1e-9) -> None:
        """Recompute effective channels and rates from scratch and compare."""
        for c in range(self.num_prbs):
            n = int(self.cnt[c])
            if n == 0:
                if np.any(self.ecur[:, c] != 0):
                    raise AssertionError(f"PRB {c}: stale effective channels")
                continue
            rows = self.sig[self.mem_u[c, :n], c, self.mem_s[c, :n]]
            e = zf.effective_channels(rows, 1.0)
            got = self.ecur[self.mem_u[c, :n], c, self.mem_s[c, :n]]
            if not np.allclose(got, e, rtol=rtol, atol=0):
                raise AssertionError(f"PRB {c}: effective channel cache mismatch")
        for k in range(self.num_users):
            if not np.isclose(self.rsum[k], self.user_rate(k), rtol=rtol, atol=1e-12):
                raise AssertionError(f"user {k}: rate cache mismatch")


# ---------------------------------------------------------------- operations

def enumerate_candidates(state: SearchState) -> List[Candidate]:
    n_users, n_prb, m_u, m_b = state.shape
    strat = state.params.strategy
    need = m_u if strat == Strategy.BD else 1
    out = []
    for c in range(n_prb):
        if state.cnt[c] + need > m_b:
            continue
        for u in range(n_users):
            if strat == Strategy.CTR_F:
                out.extend(Candidate(c, u, s) for s in range(m_u)
                           if state.midx[c, u, s] < 0 and not state.banned[c, u, s])
            elif state.midx[c, u, 0] < 0 and not state.banned[c, u, 0]:
                out.append(Candidate(c, u, 0))
    return out


def _check_legal(state: SearchState, cand: Candidate) -> None:
    n_users, n_prb, m_u, m_b = state.shape
    if not (0 <= cand.prb < n_prb and 0 <= cand.user < n_users and 0 <= cand.stream < m_u):
        raise IndexError(f"candidate {cand} out of range")
    strat = state.params.strategy
    if strat != Strategy.CTR_F and cand.stream != 0:
        raise ValueError(f"{strat.name} candidates use stream 0")
    need = m_u if strat == Strategy.BD else 1
    if state.cnt[cand.prb] + need > m_b:
        raise ValueError(f"PRB {cand.prb} has no room for {cand}")
    if state.midx[cand.prb, cand.user, cand.stream] >= 0:
        raise ValueError(f"{cand} is already selected")


def _assess_one(state: SearchState, cand: Candidate, read: bool, store: bool) -> float:
    _check_legal(state, cand)
    args = state._kernel_args(read, store)
    return float(_assess(cand.prb, cand.user, cand.stream, *args))


def assess_candidate(state: SearchState, cand: Candidate) -> float:
    """WSR over the time slot if ``cand`` were added; -inf if ZF is infeasible.

    Recomputes the PRB's effective channels and re-runs power allocation for
    every user selected in that PRB plus the candidate user. Never touches the
    memo or the committed caches.
    """
    return _assess_one(state, cand, read=False, store=False)


def assess_candidate_with_reuse(state: SearchState, cand: Candidate) -> float:
    """Same value as ``assess_candidate``, serving still-valid parts from the memo."""
    return _assess_one(state, cand, read=True, store=True)


def candidate_type(state: SearchState, cand: Candidate) -> FrozenSet[int]:
    """Reuse class of ``cand`` relative to the PRB of the last commit.

    1: candidate in the reference PRB; 2: candidate user is selected in the
    reference PRB; 3: the candidate PRB hosts a user that is also selected in
    the reference PRB; 4: none of these. Types 2 and 3 can co-occur.
    """
    ref = state.reference_prb
    if ref is None:
        raise NoReferencePrb("no candidate has been committed yet")
    if cand.prb == ref:
        return frozenset({1})
    in_ref = set(state.users_in(ref))
    types = set()
    if cand.user in in_ref:
        types.add(2)
    if in_ref & set(state.users_in(cand.prb)):
        types.add(3)
    return frozenset(types or {4})


def beta_rule(wsr_max: float, wsr: float, beta: float) -> str:
    """'improve' if ``wsr`` beats the incumbent, 'continue' if it is within the
    factor ``beta`` of it, else 'stop' (strict comparison)."""
    if wsr > wsr_max:
        return "improve"
    if wsr > 0 and not wsr_max / wsr > beta:
        return "continue"
    return "stop"


def search_step(state: SearchState) -> StepOutcome:
    if state.stopped:
        return StepOutcome(None, -np.inf, True, state.stop_reason)
    read = store = state.params.reuse
    while True:
        args = state._kernel_args(read, store)
        c, u, j, wsr, n_legal = _sweep(args[0], args[1], args[2], args[3], args[4],
                                       args[5], args[6], args[7], state.banned, *args[8:])
        if n_legal == 0:
            return _stop(state, "full")
        if c < 0 or not np.isfinite(wsr):
            return _stop(state, "infeasible")
        cand = Candidate(int(c), int(u), int(j))
        verdict = beta_rule(state.wsr_max, float(wsr), state.params.beta)
        if verdict == "stop":
            return _stop(state, "beta")
        improved = verdict == "improve"
        try:
            state.commit(cand)
        except InfeasibleCombination:
            # assessment and refactorization disagree at the conditioning limit
            state.banned[cand.prb, cand.user, cand.stream] = True
            continue
        break
    if improved:
        state.wsr_max = float(wsr)
        state.incumbent_len = len(state.history)
    state.trajectory.append(float(wsr))
    if state.params.debug:
        state.check_consistency()
    return StepOutcome(cand, float(wsr), False, "", improved)


def _stop(state: SearchState, reason: str) -> StepOutcome:
    state.stopped = True
    state.stop_reason = reason
    return StepOutcome(None, -np.inf, True, reason)


# ---------------------------------------------------------------- finalize

@dataclass
class TsAllocationResult:
    """Final allocation of one time slot; arrays are indexed (prb, user, stream)."""

    selection: np.ndarray
    eff: np.ndarray
    power: np.ndarray
    mcs_level: np.ndarray
    rate: np.ndarray  # bits/s/Hz per stream
    user_rate: np.ndarray  # bits/s/Hz summed over the slot, per user
    committed: List[Candidate]
    incumbent_len: int
    wsr_max: float
    trajectory: List[float]
    stats: Dict[str, float]

    def patterns(self) -> Dict[str, int]:
        """Count of enabled-stream patterns per scheduled (user, PRB), e.g. '1+2'."""
        out: Dict[str, int] = {}
        n_prb, n_users, _ = self.selection.shape
        for c in range(n_prb):
            for u in range(n_users):
                s = np.flatnonzero(self.selection[c, u])
                if s.size:
                    key = "+".join(str(i + 1) for i in s)
                    out[key] = out.get(key, 0) + 1
        return out


def _prb_effective(sig, sel, c):
    users, streams = np.nonzero(sel[c])
    if users.size == 0:
        return users, streams, np.zeros(0)
    return users, streams, zf.effective_channels(sig[users, c, streams], 1.0)


def _plan_users(eff, users, params: SearchParams, power, level, rate):
    for u in users:
        idx = np.nonzero(eff[:, u, :] > 0)  # (prb, stream) in lexicographic order
        e = eff[:, u, :][idx]
        if params.scheme == PowerScheme.TPM:
            plan = tpm(e, params.budget, params.table, params.model)
        else:
            plan = epm_plan(e, params.budget, params.table, params.model)
        power[:, u, :] = 0.0
        level[:, u, :] = 0
        rate[:, u, :] = 0.0
        power[:, u, :][idx] = plan.power
        level[:, u, :][idx] = plan.mcs_levels
        rate[:, u, :][idx] = plan.mcs_rates


def finalize(state: SearchState) -> TsAllocationResult:
    """Restore the incumbent, run exact power management, prune zero-rate streams."""
    params = state.params
    n_users, n_prb, m_u, _ = state.shape
    sel = np.zeros((n_prb, n_users, m_u), dtype=bool)
    for cand in state.history[:state.incumbent_len]:
        sel[cand.prb, cand.user, state.streams_of(cand)] = True
    eff = np.zeros((n_prb, n_users, m_u))
    for c in range(n_prb):
        users, streams, e = _prb_effective(state.sig, sel, c)
        eff[c, users, streams] = e
    power = np.zeros_like(eff)
    level = np.zeros(eff.shape, dtype=int)
    rate = np.zeros_like(eff)
    _plan_users(eff, range(n_users), params, power, level, rate)

    zero = sel & (level == 0)
    if params.strategy == Strategy.BD:
        # BD keeps a user's streams in a PRB together: drop the user only if
        # every one of its streams there is at zero rate
        drop_pair = zero.all(axis=2) & sel.any(axis=2)
        zero = drop_pair[:, :, None] & sel
    pruned = int(zero.sum())
    zf_redone = 0
    if pruned:
        sel &= ~zero
        touched_prbs = np.flatnonzero(zero.any(axis=(1, 2)))
        touched_users = set(np.flatnonzero(zero.any(axis=(0, 2))))
        for c in touched_prbs:
            eff[c] = 0.0
            users, streams, e = _prb_effective(state.sig, sel, c)
            eff[c, users, streams] = e
            touched_users.update(int(x) for x in users)
            zf_redone += 1
        _plan_users(eff, sorted(touched_users), params, power, level, rate)
    user_rate = rate.sum(axis=(0, 2))
    stats = {
        "iterations": len(state.history),
        "wf_runs": int(state.counters[0]),
        "zf_updates": int(state.counters[1]),
        "assessments": int(state.counters[2]),
        "pruned_streams": pruned,
        "zf_recomputed_prbs": zf_redone,
    }
    return TsAllocationResult(selection=sel, eff=eff, power=power, mcs_level=level,
                              rate=rate, user_rate=user_rate,
                              committed=list(state.history), incumbent_len=state.incumbent_len,
                              wsr_max=state.wsr_max, trajectory=list(state.trajectory),
                              stats=stats)


def run_gus(signatures: np.ndarray, weights, params: SearchParams) -> TsAllocationResult:
    """Full GUS for one time slot on noise-normalized signatures (U, C, M_U, M_B)."""
    t0 = time.perf_counter()
    state = SearchState(signatures, weights, params)
    while not search_step(state).stopped:
        pass
    res = finalize(state)
    res.stats["runtime_s"] = time.perf_counter() - t0
    res.stats["stop_reason"] = state.stop_reason
    return res


def allocation_wsr(signatures: np.ndarray, selection: np.ndarray, weights,
                   params: SearchParams) -> float:
    """Fitted WSR of an arbitrary allocation (C, U, M_U), computed from scratch.

    Used as an independent reference for the search; returns -inf when some
    PRB's stream set is ZF-infeasible.
    """
    sig = np.asarray(signatures)
    n_users, n_prb, m_u, _ = sig.shape
    eff = np.zeros((n_users, n_prb, m_u))
    for c in range(n_prb):
        users, streams = np.nonzero(selection[c])
        if users.size == 0:
            continue
        try:
            eff[users, c, streams] = zf.effective_channels(sig[users, c, streams], 1.0)
        except InfeasibleCombination:
            return -np.inf
    total = 0.0
    gmax = params.table.gamma_max
    for u in range(n_users):
        e = eff[u][eff[u] > 0]
        if e.size == 0:
            continue
        if params.scheme == PowerScheme.TPM:
            p = waterfill_powers(e, float(params.budget), params.model.d_coeff, gmax)
        else:
            p = equal_powers(e, float(params.budget), gmax)
        total += weights[u] * fitted_sum(e, p, params.model.a_coeff, params.model.d_coeff)
    return float(total)
