"""Zero-forcing receive processing for the streams selected in one PRB.

Each user transmits stream s along the s-th right singular direction of its
channel, so the BS sees the row ``g_s = sigma_s * v_s^H``. Stacking the
selected rows into ``G`` (S x M_B), the ZF receiver is
``W = (G G^H)^-1 G`` and stream i gets effective channel
``E_i = 1 / (noise * [(G G^H)^-1]_ii)``.

The Gram inverse is never formed: a PRB keeps an orthonormal basis ``Q`` of
its rows (``G^H = Q R``) and ``T = R^-1``, so that ``(G G^H)^-1 = T T^H``.
Adding rows is a bordered (block-inverse) update against that factorization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from numba import njit

__all__ = [
    "InfeasibleCombination",
    "COND_LIMIT",
    "SCHUR_RTOL",
    "StreamBasis",
    "stream_basis",
    "stream_signatures",
    "zf_receiver",
    "effective_channels",
    "GramState",
]

# Gram condition number above which a stream combination is rejected.
COND_LIMIT = 1e12
# Same limit expressed on the residual energy of an added row.
SCHUR_RTOL = 1.0 / COND_LIMIT


class InfeasibleCombination(ValueError):
    """The selected signatures are (numerically) linearly dependent."""


@dataclass(frozen=True)
class StreamBasis:
    singular_values: np.ndarray  # (M_U,), descending
    signatures: np.ndarray  # (M_U, M_B), row s = sigma_s * v_s^H


def _fix_phase(v):
    # make the first non-negligible entry of each last-axis vector real-positive
    mag = np.abs(v)
    thresh = mag.max(axis=-1, keepdims=True) * 1e-12
    first = np.argmax(mag > thresh, axis=-1)
    lead = np.take_along_axis(v, first[..., None], axis=-1)
    ph = np.where(np.abs(lead) > 0, lead / np.where(lead == 0, 1, np.abs(lead)), 1.0)
    return v / ph


def stream_signatures(h: np.ndarray) -> np.ndarray:
    """Vectorized signatures for a stack of channels ``(..., M_U, M_B)``.

    Returns an array of the same shape whose row s is sigma_s * v_s^H.
    Missing streams (M_U > M_B) get zero rows.
    """
    h = np.asarray(h, dtype=complex)
    m_u, m_b = h.shape[-2:]
    _, s, vh = np.linalg.svd(h, full_matrices=False)
    # rows of vh are v_s^H; normalize so that v_s (= conj(vh row)) has a
    # real-positive leading entry
    vh = np.conj(_fix_phase(np.conj(vh)))
    sig = s[..., :, None] * vh
    if sig.shape[-2] < m_u:
        pad = np.zeros(h.shape[:-2] + (m_u - sig.shape[-2], m_b), dtype=complex)
        sig = np.concatenate([sig, pad], axis=-2)
    return sig


def stream_basis(h: np.ndarray) -> StreamBasis:
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or not np.all(np.isfinite(h)):
        raise ValueError("channel must be a finite 2-D matrix")
    sig = stream_signatures(h)
    sv = np.linalg.norm(sig, axis=1)
    return StreamBasis(singular_values=sv, signatures=sig)


def _factor(rows: np.ndarray):
    """QR factors of the stacked rows with a conditioning check."""
    q, r = np.linalg.qr(rows.conj().T)
    diag = np.abs(np.diag(r))
    if diag.size and (diag.min() == 0 or np.linalg.cond(r) ** 2 > COND_LIMIT):
        raise InfeasibleCombination("Gram matrix of the selected streams is singular")
    t = scipy.linalg.solve_triangular(r, np.eye(r.shape[0], dtype=complex))
    return q, t


def zf_receiver(signatures: np.ndarray) -> np.ndarray:
    """ZF receive matrix ``W`` (S x M_B) with ``W G^H = I``."""
    g = np.atleast_2d(np.asarray(signatures, dtype=complex))
    q, t = _factor(g)
    return t @ q.conj().T


def effective_channels(signatures: np.ndarray, noise: float) -> np.ndarray:
    """Post-ZF SNR per unit power for each stacked signature row."""
    if not noise > 0:
        raise ValueError("noise power must be positive")
    g = np.atleast_2d(np.asarray(signatures, dtype=complex))
    if g.shape[0] == 0:
        raise ValueError("at least one stream must be selected")
    _, t = _factor(g)
    d = np.sum(np.abs(t) ** 2, axis=1)
    return 1.0 / (noise * d)


@njit(cache=True)
def bordered_update(q, t, dold, x, out_mem, out_new):
    """Effective-channel diagonal after appending rows ``x`` (k x M_B).

    ``q`` (M_B x S), ``t`` (S x S) and ``dold`` (S,) describe the current set.
    Writes 1/diag of the enlarged Gram inverse into ``out_mem`` (existing rows)
    and ``out_new`` (added rows); returns False if the enlarged set is
    numerically dependent (outputs are then undefined).
    """
    mb = x.shape[1]
    k = x.shape[0]
    s = q.shape[1]
    # coefficients of the added rows on the current basis, with one
    # re-orthogonalization pass
    c = np.zeros((s, k), dtype=np.complex128)
    res = np.empty((mb, k), dtype=np.complex128)
    for a in range(k):
        for m in range(mb):
            res[m, a] = np.conj(x[a, m])
    for _ in range(2):
        for a in range(k):
            for i in range(s):
                acc = 0j
                for m in range(mb):
                    acc += np.conj(q[m, i]) * res[m, a]
                c[i, a] += acc
                for m in range(mb):
                    res[m, a] -= q[m, i] * acc
    # Schur complement = residual Gram, factored as L L^H
    sc = np.empty((k, k), dtype=np.complex128)
    for a in range(k):
        for b in range(k):
            acc = 0j
            for m in range(mb):
                acc += np.conj(res[m, a]) * res[m, b]
            sc[a, b] = acc
    lo = np.zeros((k, k), dtype=np.complex128)
    for a in range(k):
        norm_a = 0.0
        for m in range(mb):
            norm_a += x[a, m].real ** 2 + x[a, m].imag ** 2
        acc = sc[a, a].real
        for r in range(a):
            acc -= lo[a, r].real ** 2 + lo[a, r].imag ** 2
        if not (acc > SCHUR_RTOL * norm_a):
            return False
        piv = np.sqrt(acc)
        lo[a, a] = piv
        for b in range(a + 1, k):
            v = sc[b, a]
            for r in range(a):
                v -= lo[b, r] * np.conj(lo[a, r])
            lo[b, a] = v / piv
    # inverse of the lower factor
    li = np.zeros((k, k), dtype=np.complex128)
    for a in range(k):
        li[a, a] = 1.0 / lo[a, a]
        for b in range(a + 1, k):
            v = 0j
            for r in range(a, b):
                v -= lo[b, r] * li[r, a]
            li[b, a] = v / lo[b, b]
    for a in range(k):
        d = 0.0
        for r in range(k):
            d += li[r, a].real ** 2 + li[r, a].imag ** 2
        out_new[a] = 1.0 / d
    # y = T c ; existing diagonal grows by ||L^-1 y_i^H||^2
    y = np.zeros(k, dtype=np.complex128)
    for i in range(s):
        for a in range(k):
            acc = 0j
            for j in range(i, s):
                acc += t[i, j] * c[j, a]
            y[a] = acc
        extra = 0.0
        for r in range(k):
            acc = 0j
            for a in range(r + 1):
                acc += li[r, a] * np.conj(y[a])
            extra += acc.real ** 2 + acc.imag ** 2
        out_mem[i] = 1.0 / (dold[i] + extra)
    return True


class GramState:
    """ZF state of one PRB: the selected rows and their factorization.

    Signatures are expected pre-divided by sqrt(noise) when used inside the
    search; pass ``noise`` otherwise.
    """

    def __init__(self, rows=None, noise: float = 1.0):
        self.noise = float(noise)
        mb = None if rows is None else np.asarray(rows).shape[-1]
        self.rows = (np.zeros((0, mb or 0), dtype=complex) if rows is None
                     else np.atleast_2d(np.asarray(rows, dtype=complex)))
        self._refactor()

    def _refactor(self):
        if self.rows.shape[0] == 0:
            self.q = np.zeros((self.rows.shape[1], 0), dtype=complex)
            self.t = np.zeros((0, 0), dtype=complex)
            self.dold = np.zeros(0)
        else:
            self.q, self.t = _factor(self.rows)
            self.dold = np.sum(np.abs(self.t) ** 2, axis=1)

    @property
    def size(self) -> int:
        return self.rows.shape[0]

    @property
    def effective(self) -> np.ndarray:
        return 1.0 / (self.noise * self.dold)

    def with_added(self, new_rows):
        """Effective channels if ``new_rows`` were appended (non-destructive).

        Returns ``(existing, added)`` arrays; raises InfeasibleCombination.
        """
        x = np.atleast_2d(np.asarray(new_rows, dtype=complex))
        if self.rows.shape[1] == 0:
            self.rows = np.zeros((0, x.shape[1]), dtype=complex)
            self._refactor()
        mem = np.empty(self.size)
        new = np.empty(x.shape[0])
        ok = bordered_update(np.ascontiguousarray(self.q), np.ascontiguousarray(self.t),
                             self.dold, np.ascontiguousarray(x), mem, new)
        if not ok:
            raise InfeasibleCombination("added stream is linearly dependent on the set")
        return mem / self.noise, new / self.noise

    def add(self, new_rows) -> None:
        x = np.atleast_2d(np.asarray(new_rows, dtype=complex))
        self.rows = np.vstack([self.rows.reshape(-1, x.shape[1]), x])
        self._refactor()
