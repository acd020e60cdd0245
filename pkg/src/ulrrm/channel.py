"""Single-sector uplink channel realizations.

Large scale: log-distance path loss (separate LOS/NLOS parameters),
log-normal shadowing and a distance-dependent LOS probability.
Small scale: an 8-tap delay line per user, redrawn independently for every
reporting block (C_B subchannels x T_B time slots), evaluated at the block's
center frequency, with exponential antenna correlation at both ends.

The presets only approximate the 38.901 RMa/UMa parameter sets; they are
tuned so that users span the whole MCS range at the usual power budgets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from functools import lru_cache
from typing import Dict, Tuple

import numpy as np

__all__ = [
    "ScenarioConfig",
    "Realization",
    "PRESETS",
    "preset",
    "exp_corr_matrix",
    "corr_sqrt",
    "los_probability",
    "generate_realization",
    "block_index",
    "channel_matrix",
    "slot_channels",
    "noise_power",
]

LOS_MODELS = ("uma", "rma", "always", "never")


@dataclass(frozen=True)
class ScenarioConfig:
    scenario_kind: str = "uma"
    cell_radius: float = 300.0  # m
    min_distance: float = 10.0  # m
    carrier_freq: float = 3.5e9  # Hz
    # (loss at 1 m in dB, exponent)
    pathloss_los: Tuple[float, float] = (38.88, 2.2)
    pathloss_nlos: Tuple[float, float] = (24.42, 3.908)
    shadowing_std: float = 6.0  # dB
    los_model: str = "uma"
    tap_delays: Tuple[float, ...] = tuple(
        d * 363e-9 for d in (0.0, 0.1, 0.3, 0.6, 1.0, 1.5, 2.2, 3.0))
    tap_powers_db: Tuple[float, ...] = (0.0, -2.0, -4.0, -6.0, -8.0, -11.0, -14.0, -18.0)
    k_factor_db: float = 7.0
    corr_coeff: float = 0.4
    num_bs_antennas: int = 64
    num_user_antennas: int = 4
    num_subchannels: int = 78
    subchannel_bw: float = 360e3  # Hz
    report_block_subchannels: int = 13
    report_block_slots: int = 2
    noise_density_dbm_hz: float = -174.0
    noise_figure_db: float = 9.0

    def __post_init__(self):
        errors = self.problems()
        if errors:
            raise ValueError("; ".join(errors))

    def problems(self):
        out = []
        if not self.cell_radius > 0:
            out.append("cell_radius must be positive")
        if not 0 <= self.min_distance < self.cell_radius:
            out.append("min_distance must lie in [0, cell_radius)")
        if not 0 <= self.corr_coeff < 1:
            out.append("corr_coeff must lie in [0, 1)")
        if self.los_model not in LOS_MODELS:
            out.append(f"los_model must be one of {LOS_MODELS}")
        if len(self.tap_delays) != len(self.tap_powers_db) or not self.tap_delays:
            out.append("tap_delays and tap_powers_db must be non-empty and equally long")
        for name in ("num_bs_antennas", "num_user_antennas", "num_subchannels",
                     "report_block_subchannels", "report_block_slots"):
            if int(getattr(self, name)) < 1:
                out.append(f"{name} must be >= 1")
        if not self.subchannel_bw > 0:
            out.append("subchannel_bw must be positive")
        if self.shadowing_std < 0:
            out.append("shadowing_std must be non-negative")
        return out

    @property
    def tap_powers(self) -> np.ndarray:
        """Linear tap powers normalized to unit sum."""
        p = 10.0 ** (np.asarray(self.tap_powers_db, dtype=float) / 10.0)
        return p / p.sum()

    @property
    def num_freq_blocks(self) -> int:
        return -(-self.num_subchannels // self.report_block_subchannels)

    def with_overrides(self, **kw) -> "ScenarioConfig":
        names = {f.name for f in fields(self)}
        bad = set(kw) - names
        if bad:
            raise ValueError(f"unknown scenario parameters: {sorted(bad)}")
        for key in ("pathloss_los", "pathloss_nlos", "tap_delays", "tap_powers_db"):
            if key in kw:
                kw[key] = tuple(kw[key])
        return replace(self, **kw)


PRESETS: Dict[str, ScenarioConfig] = {
    "uma": ScenarioConfig(),
    "rma": ScenarioConfig(
        scenario_kind="rma",
        cell_radius=1000.0,
        min_distance=35.0,
        pathloss_los=(44.0, 2.05),
        pathloss_nlos=(14.4, 3.863),
        shadowing_std=8.0,
        los_model="rma",
        tap_delays=tuple(d * 50e-9 for d in (0.0, 0.1, 0.3, 0.6, 1.0, 1.5, 2.2, 3.0)),
    ),
}


def preset(name: str, **overrides) -> ScenarioConfig:
    try:
        base = PRESETS[name.lower()]
    except KeyError:
        raise ValueError(f"unknown scenario preset {name!r}; known: {sorted(PRESETS)}")
    return base.with_overrides(**overrides) if overrides else base


def exp_corr_matrix(n: int, rho: float) -> np.ndarray:
    if n < 1:
        raise ValueError("antenna count must be >= 1")
    if not 0 <= rho < 1:
        raise ValueError("correlation coefficient must lie in [0, 1)")
    idx = np.arange(n)
    return rho ** np.abs(idx[:, None] - idx[None, :]).astype(float)


@lru_cache(maxsize=64)
def corr_sqrt(n: int, rho: float) -> np.ndarray:
    """Symmetric square root of the exponential correlation matrix."""
    w, v = np.linalg.eigh(exp_corr_matrix(n, rho))
    out = (v * np.sqrt(np.clip(w, 0, None))) @ v.T
    out.setflags(write=False)
    return out


def los_probability(distance, model: str):
    d = np.asarray(distance, dtype=float)
    if model == "always":
        return np.ones_like(d)
    if model == "never":
        return np.zeros_like(d)
    if model == "uma":
        p = 18.0 / d + np.exp(-d / 63.0) * (1.0 - 18.0 / d)
        return np.where(d <= 18.0, 1.0, p)
    if model == "rma":
        return np.where(d <= 10.0, 1.0, np.exp(-(d - 10.0) / 1000.0))
    raise ValueError(f"unknown LOS model {model!r}")


def noise_power(config: ScenarioConfig) -> float:
    """Thermal noise plus noise figure over one subchannel, in mW."""
    dbm = (config.noise_density_dbm_hz + 10.0 * math.log10(config.subchannel_bw)
           + config.noise_figure_db)
    return 10.0 ** (dbm / 10.0)


@dataclass(frozen=True)
class Realization:
    """A fixed user drop plus the small-scale state for every reporting block.

    ``taps`` has shape (users, freq_blocks, time_blocks, taps, M_U, M_B).
    """

    config: ScenarioConfig
    seed: int
    horizon: int
    user_positions: np.ndarray  # (U, 2) m, BS at origin, sector boresight +x
    distances: np.ndarray
    los: np.ndarray  # bool (U,)
    large_scale_gain: np.ndarray  # linear (U,)
    taps: np.ndarray
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def num_users(self) -> int:
        return int(self.user_positions.shape[0])

    @property
    def num_time_blocks(self) -> int:
        return int(self.taps.shape[2])


def _ula(n, angle):
    return np.exp(1j * np.pi * np.arange(n) * np.sin(angle))


def generate_realization(config: ScenarioConfig, num_users: int, horizon: int,
                         seed: int) -> Realization:
    if num_users < 1 or horizon < 1:
        raise ValueError("num_users and horizon must be >= 1")
    rng = np.random.default_rng(seed)
    r_min, r_max = config.min_distance, config.cell_radius
    # uniform over the 120-degree annular sector
    u = rng.uniform(size=num_users)
    dist = np.sqrt(r_min ** 2 + u * (r_max ** 2 - r_min ** 2))
    dist = np.clip(dist, max(r_min, 1e-3), r_max)
    azim = rng.uniform(-np.pi / 3, np.pi / 3, size=num_users)
    pos = np.column_stack([dist * np.cos(azim), dist * np.sin(azim)])

    los = rng.uniform(size=num_users) < los_probability(dist, config.los_model)
    shadow = rng.normal(0.0, config.shadowing_std, size=num_users)
    ref = np.where(los, config.pathloss_los[0], config.pathloss_nlos[0])
    expo = np.where(los, config.pathloss_los[1], config.pathloss_nlos[1])
    loss_db = ref + 10.0 * expo * np.log10(dist) + shadow
    gain = 10.0 ** (-loss_db / 10.0)

    m_u, m_b = config.num_user_antennas, config.num_bs_antennas
    n_fb = config.num_freq_blocks
    n_tb = -(-horizon // config.report_block_slots)
    p = config.tap_powers
    shape = (num_users, n_fb, n_tb, p.size, m_u, m_b)
    taps = (rng.normal(size=shape) + 1j * rng.normal(size=shape)) / np.sqrt(2.0)
    taps *= np.sqrt(p)[None, None, None, :, None, None]

    k_lin = 10.0 ** (config.k_factor_db / 10.0)
    ue_angle = rng.uniform(-np.pi / 2, np.pi / 2, size=num_users)
    phase = rng.uniform(0, 2 * np.pi, size=(num_users, n_fb, n_tb))
    for i in np.flatnonzero(los):
        steer = np.outer(_ula(m_u, ue_angle[i]), np.conj(_ula(m_b, azim[i])))
        det = np.exp(1j * phase[i])[..., None, None] * steer
        taps[i, :, :, 0] = np.sqrt(p[0]) * (np.sqrt(k_lin / (k_lin + 1)) * det
                                            + np.sqrt(1 / (k_lin + 1)) * taps[i, :, :, 0] / np.sqrt(p[0]))
    return Realization(config=config, seed=int(seed), horizon=int(horizon),
                       user_positions=pos, distances=dist, los=los,
                       large_scale_gain=gain, taps=taps)


def block_index(config: ScenarioConfig, subchannel: int, ts: int) -> Tuple[int, int]:
    return subchannel // config.report_block_subchannels, ts // config.report_block_slots


def _freq_offsets(config: ScenarioConfig) -> np.ndarray:
    """Center frequency of each reporting block relative to the band center."""
    c = np.arange(config.num_subchannels)
    center = (config.num_subchannels - 1) / 2.0
    out = []
    for fb in range(config.num_freq_blocks):
        members = c[fb * config.report_block_subchannels:(fb + 1) * config.report_block_subchannels]
        out.append((members.mean() - center) * config.subchannel_bw)
    return np.asarray(out)


def _block_channels(real: Realization, tb: int) -> np.ndarray:
    """Correlated channels of all users for time block ``tb``: (U, n_fb, M_U, M_B)."""
    key = ("tb", tb)
    hit = real._cache.get(key)
    if hit is not None:
        return hit
    cfg = real.config
    delays = np.asarray(cfg.tap_delays, dtype=float)
    rot = np.exp(-2j * np.pi * _freq_offsets(cfg)[:, None] * delays[None, :])  # (n_fb, taps)
    hw = np.einsum("ufkab,fk->ufab", real.taps[:, :, tb], rot)
    r_u = corr_sqrt(cfg.num_user_antennas, cfg.corr_coeff)
    r_b = corr_sqrt(cfg.num_bs_antennas, cfg.corr_coeff)
    h = r_u @ hw @ r_b
    h *= np.sqrt(real.large_scale_gain)[:, None, None, None]
    h.setflags(write=False)
    if len(real._cache) > 8:
        real._cache.clear()
    real._cache[key] = h
    return h


def channel_matrix(real: Realization, user: int, subchannel: int, ts: int) -> np.ndarray:
    cfg = real.config
    if not (0 <= user < real.num_users and 0 <= subchannel < cfg.num_subchannels
            and 0 <= ts < real.horizon):
        raise IndexError("user, subchannel or time slot out of range")
    fb, tb = block_index(cfg, subchannel, ts)
    return np.array(_block_channels(real, tb)[user, fb])


def slot_channels(real: Realization, ts: int) -> np.ndarray:
    """All channel matrices of one time slot: (U, C, M_U, M_B)."""
    cfg = real.config
    if not 0 <= ts < real.horizon:
        raise IndexError("time slot out of range")
    h = _block_channels(real, ts // cfg.report_block_slots)
    fb = np.arange(cfg.num_subchannels) // cfg.report_block_subchannels
    return h[:, fb]
