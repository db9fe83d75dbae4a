"""Communication-side metrics at covariance level: per-link SINRs and the
sum-rate objective."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelSet
from .sensing import TransmitCovariance


@dataclass(frozen=True)
class PowerAllocation:
    """D2D transmit powers in linear mW."""

    d2d_powers: np.ndarray

    @property
    def n_d2d(self) -> int:
        return self.d2d_powers.shape[0]

    @staticmethod
    def zeros(n_d2d: int) -> "PowerAllocation":
        return PowerAllocation(np.zeros(n_d2d))


@dataclass(frozen=True)
class RateReport:
    cue_sinr: np.ndarray
    d2d_sinr: np.ndarray
    cue_rates: np.ndarray
    d2d_rates: np.ndarray
    sum_rate: float


def _quad(h: np.ndarray, W: np.ndarray) -> float:
    """real(h^H W h), clamped at 0 against tiny Hermitian round-off."""
    v = float(np.real(h.conj() @ W @ h))
    if v < 0:
        tol = 1e-12 * abs(float(np.real(np.trace(W)))) * float(np.real(h.conj() @ h))
        if v >= -max(tol, 1e-300):
            v = 0.0
    return v


def sinr_cue(k: int, ch: ChannelSet, cov: TransmitCovariance,
             pa: PowerAllocation, n_c: float) -> float:
    h = ch.bs_to_cue[k]
    desired = _quad(h, cov.per_cue[k])
    interf = _quad(h, cov.radar)
    for kp in range(ch.n_cue):
        if kp != k:
            interf += _quad(h, cov.per_cue[kp])
    interf += float(np.sum(pa.d2d_powers * np.abs(ch.d2d_to_cue[:, k]) ** 2))
    return desired / (interf + n_c)


def sinr_d2d(d: int, ch: ChannelSet, cov: TransmitCovariance,
             pa: PowerAllocation, n_c: float) -> float:
    desired = pa.d2d_powers[d] * abs(ch.d2d_to_d2d[d, d]) ** 2
    interf = 0.0
    for dp in range(ch.n_d2d):
        if dp != d:
            interf += pa.d2d_powers[dp] * abs(ch.d2d_to_d2d[dp, d]) ** 2
    f = ch.bs_to_d2drx[d]
    interf += _quad(f, cov.radar)
    for k in range(ch.n_cue):
        interf += _quad(f, cov.per_cue[k])
    return desired / (interf + n_c)


def sum_rate(ch: ChannelSet, cov: TransmitCovariance,
             pa: PowerAllocation, n_c: float) -> RateReport:
    cue_sinr = np.array([sinr_cue(k, ch, cov, pa, n_c) for k in range(ch.n_cue)])
    d2d_sinr = np.array([sinr_d2d(d, ch, cov, pa, n_c) for d in range(ch.n_d2d)])
    cue_rates = np.log2(1.0 + cue_sinr)
    d2d_rates = np.log2(1.0 + d2d_sinr)
    return RateReport(
        cue_sinr=cue_sinr,
        d2d_sinr=d2d_sinr,
        cue_rates=cue_rates,
        d2d_rates=d2d_rates,
        sum_rate=float(cue_rates.sum() + d2d_rates.sum()),
    )
