"""energy.py
Component-level base-station power consumption.

    P_BS = N_TRX * N_ant * (P_0 + f(P_Tx))
    f(P_Tx) = [P_Tx / (eta_PA * (1 - sigma_feed)) + P_RF + P_BB]
              / [(1 - sigma_DC) * (1 - sigma_MS) * (1 - sigma_cool)]

All arithmetic is in watts. A sleeping cell transmits 0 W and consumes
P_BS(0) unless `deep_sleep_w` is set.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, fields
from typing import Dict, Optional

import numpy as np

from .radio import ArrayLike


@dataclass(frozen=True)
class PowerModelParams:
    """Power-model constants; defaults are the macro-cell values of the reference deployment."""
    n_trx: int = 6
    n_ant: int = 1
    p0_w: float = 130.0
    eta_pa: float = 0.311
    p_rf_w: float = 12.9
    p_bb_w: float = 29.6
    sigma_feed: float = 0.5
    sigma_dc: float = 0.075
    sigma_ms: float = 0.09
    sigma_cool: float = 0.10
    deep_sleep_w: Optional[float] = None

    def __post_init__(self) -> None:
        if not 0.0 < self.eta_pa <= 1.0:
            raise ValueError(f"eta_pa must lie in (0, 1], got {self.eta_pa}")
        for name in ("sigma_feed", "sigma_dc", "sigma_ms", "sigma_cool"):
            sigma = getattr(self, name)
            if not 0.0 <= sigma < 1.0:
                raise ValueError(f"{name} must lie in [0, 1), got {sigma}")
        if self.n_trx < 1 or self.n_ant < 1:
            raise ValueError(f"n_trx and n_ant must be >= 1, got {self.n_trx}, {self.n_ant}")
        for name in ("p0_w", "p_rf_w", "p_bb_w", "deep_sleep_w"):
            value = getattr(self, name)
            if value is not None and not (math.isfinite(value) and value >= 0):
                raise ValueError(f"{name} must be finite and >= 0, got {value}")

    @property
    def loss_factor(self) -> float:
        """(1 - sigma_DC)(1 - sigma_MS)(1 - sigma_cool)."""
        return (1.0 - self.sigma_dc) * (1.0 - self.sigma_ms) * (1.0 - self.sigma_cool)

    @property
    def pa_factor(self) -> float:
        return self.eta_pa * (1.0 - self.sigma_feed)

    @property
    def chains(self) -> int:
        return self.n_trx * self.n_ant

    @classmethod
    def field_names(cls) -> list:
        return [f.name for f in fields(cls)]


def _check_tx(p_tx_w: ArrayLike, p_max_w: float) -> np.ndarray:
    p = np.asarray(p_tx_w, dtype=float)
    if np.any(np.isnan(p)) or np.any(p < 0):
        raise ValueError(f"Transmit power must be >= 0 W, got {p_tx_w}")
    if np.any(p > p_max_w * (1.0 + 1e-12)):
        raise ValueError(f"Transmit power {p_tx_w} W exceeds P_max = {p_max_w} W")
    return p


def load_dependent_power_w(p_tx_w: ArrayLike, params: PowerModelParams, p_max_w: float = 20.0) -> ArrayLike:
    """f(P_Tx): PA, RF and baseband draw divided by the DC, mains and cooling losses."""
    p = _check_tx(p_tx_w, p_max_w)
    return ((p / params.pa_factor + params.p_rf_w + params.p_bb_w) / params.loss_factor)[()]


def bs_power_w(p_tx_w: ArrayLike, params: PowerModelParams, p_max_w: float = 20.0) -> ArrayLike:
    """Total consumption of one BS, N_TRX * N_ant * (P_0 + f(P_Tx))."""
    f = np.asarray(load_dependent_power_w(p_tx_w, params, p_max_w))
    return (params.chains * (params.p0_w + f))[()]


def sleep_power_w(params: PowerModelParams, p_max_w: float = 20.0) -> float:
    if params.deep_sleep_w is not None:
        return float(params.deep_sleep_w)
    return float(bs_power_w(0.0, params, p_max_w))


def network_power_w(p_tx_w: np.ndarray, active: np.ndarray, params: PowerModelParams,
                    p_max_w: float = 20.0) -> np.ndarray:
    """Per-cell consumption; inactive cells draw the sleep power."""
    p = np.asarray(p_tx_w, dtype=float)
    awake = np.asarray(bs_power_w(np.where(active, p, 0.0), params, p_max_w), dtype=float)
    return np.where(active, awake, sleep_power_w(params, p_max_w))


def static_share(p_tx_w: float, params: PowerModelParams, p_max_w: float = 20.0) -> float:
    """Fraction of P_BS(p_tx) that does not scale with radiated power."""
    static = params.chains * (params.p0_w + float(load_dependent_power_w(0.0, params, p_max_w)))
    return static / float(bs_power_w(p_tx_w, params, p_max_w))


def power_breakdown(p_tx_w: float, params: PowerModelParams, p_max_w: float = 20.0) -> Dict[str, float]:
    """
    Split P_BS(p_tx) into its components, each already multiplied by the chain count.

    The entries `pa`, `rf`, `bb` are the draws before losses, `losses` is what the
    DC, mains and cooling stages add on top, `static` is N_TRX*N_ant*P_0.
    The parts sum to `total`.
    """
    p = float(_check_tx(p_tx_w, p_max_w))
    n = params.chains
    pa = n * p / params.pa_factor
    rf = n * params.p_rf_w
    bb = n * params.p_bb_w
    static = n * params.p0_w
    total = float(bs_power_w(p, params, p_max_w))
    parts = {"pa": pa, "rf": rf, "bb": bb, "static": static,
             "losses": total - static - pa - rf - bb, "total": total}
    logging.debug(f"Power breakdown at {p} W: {parts}")
    return parts
