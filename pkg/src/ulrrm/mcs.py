"""MCS table, the piecewise-constant rate function and its smooth fit.

Levels are numbered 1..L as in the standard tables; level 0 is used
throughout the package for "no transmission" (rate 0, power 0).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Union

import numpy as np

__all__ = [
    "McsTable",
    "FittedRateModel",
    "BOUNDARY_RTOL",
    "db_to_linear",
    "linear_to_db",
    "load_mcs_table",
    "default_mcs_table",
    "mcs_level",
    "mcs_rate",
    "fitted_rate",
    "power_cap",
]

# Thresholds are compared with a tiny relative slack so that a power set to
# exactly gamma / E reaches gamma after the round trip through floating point.
BOUNDARY_RTOL = 1e-12


def db_to_linear(x_db):
    return np.power(10.0, np.asarray(x_db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class McsTable:
    """Ordered MCS levels with strictly increasing thresholds and rates.

    ``snr_db``/``snr_linear``/``rates`` are indexed 0..L-1 for levels 1..L.
    """

    snr_db: np.ndarray
    rates: np.ndarray
    snr_linear: np.ndarray = field(init=False)

    def __post_init__(self):
        snr_db = np.array(self.snr_db, dtype=float)
        rates = np.array(self.rates, dtype=float)
        if snr_db.ndim != 1 or snr_db.size < 1 or snr_db.shape != rates.shape:
            raise ValueError("MCS table needs L >= 1 matching thresholds and rates")
        if np.any(np.diff(snr_db) <= 0) or np.any(np.diff(rates) <= 0):
            raise ValueError("MCS thresholds and rates must be strictly increasing")
        if rates[0] <= 0:
            raise ValueError("MCS rates must be positive")
        for arr in (snr_db, rates):
            arr.setflags(write=False)
        lin = db_to_linear(snr_db)
        lin.setflags(write=False)
        object.__setattr__(self, "snr_db", snr_db)
        object.__setattr__(self, "rates", rates)
        object.__setattr__(self, "snr_linear", lin)

    @property
    def num_levels(self) -> int:
        return int(self.rates.size)

    @property
    def gamma_max(self) -> float:
        """Linear SNR of the highest level (the power-cap target)."""
        return float(self.snr_linear[-1])

    @property
    def rate_max(self) -> float:
        return float(self.rates[-1])

    def rate_of(self, level: int) -> float:
        """Rate of ``level`` with the convention rate(0) = 0."""
        return 0.0 if level <= 0 else float(self.rates[level - 1])

    def threshold_of(self, level: int) -> float:
        """Linear SNR needed for ``level``; 0 for level 0."""
        return 0.0 if level <= 0 else float(self.snr_linear[level - 1])


@dataclass(frozen=True)
class FittedRateModel:
    """Concave surrogate ``a * ln(1 + d * snr)`` of the MCS rate function."""

    a_coeff: float = 1.389
    d_coeff: float = 0.5191

    def __post_init__(self):
        if not (self.a_coeff > 0 and self.d_coeff > 0):
            raise ValueError("fitting coefficients must be positive")


def load_mcs_table(source: Union[str, Path, io.TextIOBase]) -> McsTable:
    """Read an MCS table from CSV text with columns ``index,rate,snr_db``.

    Lines starting with ``#`` are ignored. Rows may appear in any order; they
    are sorted by ``index``.
    """
    if isinstance(source, (str, Path)):
        text = Path(source).read_text()
    else:
        text = source.read()
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    reader = csv.DictReader(lines)
    missing = {"index", "rate", "snr_db"} - set(reader.fieldnames or ())
    if missing:
        raise ValueError(f"MCS table is missing columns: {sorted(missing)}")
    rows = sorted(
        (int(r["index"]), float(r["rate"]), float(r["snr_db"])) for r in reader
    )
    if [r[0] for r in rows] != list(range(1, len(rows) + 1)):
        raise ValueError("MCS table indices must be 1..L without gaps")
    return McsTable(snr_db=[r[2] for r in rows], rates=[r[1] for r in rows])


_DEFAULT_TABLE = None


def default_mcs_table() -> McsTable:
    """The built-in 15-level 5G NR table."""
    global _DEFAULT_TABLE
    if _DEFAULT_TABLE is None:
        ref = resources.files("ulrrm") / "data" / "mcs_5g.csv"
        _DEFAULT_TABLE = load_mcs_table(io.StringIO(ref.read_text()))
    return _DEFAULT_TABLE


def mcs_level(snr, table: McsTable):
    """Highest level whose threshold is met (inclusive), 0 if none.

    Accepts scalars or arrays; returns int or an int array.
    """
    thr = table.snr_linear * (1.0 - BOUNDARY_RTOL)
    lvl = np.searchsorted(thr, snr, side="right")
    if np.ndim(lvl) == 0:
        return int(lvl)
    return lvl


def mcs_rate(snr, table: McsTable):
    """Piecewise-constant MCS rate in bits/s/Hz for a linear SNR."""
    rates = np.concatenate(([0.0], table.rates))
    out = rates[mcs_level(snr, table)]
    return float(out) if np.ndim(out) == 0 else out


def fitted_rate(snr, model: FittedRateModel):
    out = model.a_coeff * np.log1p(model.d_coeff * np.asarray(snr, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def power_cap(eff_channel: float, table: McsTable) -> float:
    """Power (mW) at which a stream with gain ``eff_channel`` reaches the top MCS."""
    if not eff_channel > 0:
        raise ValueError("power cap is undefined for a zero effective channel")
    return table.gamma_max / eff_channel
