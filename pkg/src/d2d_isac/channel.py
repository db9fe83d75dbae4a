"""Fading channel synthesis and radar array quantities.

Every link coefficient is c**(-q) * h0 with h0 ~ CN(0, 1) drawn i.i.d. per
scalar entry; the arrays are half-wavelength uniform linear arrays, so the
steering phase step is pi * sin(theta).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .config import Geometry, RngStream, SystemConfig, from_decibels


def steering_vector(theta: float, n: int) -> np.ndarray:
    """ULA response toward angle theta: entry m is exp(-j*pi*m*sin(theta))."""
    if n < 1:
        raise ValueError("steering vector needs at least one antenna")
    m = np.arange(n)
    return np.exp(-1j * np.pi * m * np.sin(theta))


@dataclass(frozen=True)
class ChannelSet:
    """One fading realization of all communication links.

    bs_to_cue[k]      : length-N_t vector, BS -> CUE k
    d2d_to_cue[d, k]  : scalar, D2D transmitter d -> CUE k
    d2d_to_d2d[d_, d] : scalar, D2D transmitter d_ -> D2D receiver d
    bs_to_d2drx[d]    : length-N_t vector, BS -> D2D receiver d
    """

    bs_to_cue: np.ndarray
    d2d_to_cue: np.ndarray
    d2d_to_d2d: np.ndarray
    bs_to_d2drx: np.ndarray

    @property
    def n_cue(self) -> int:
        return self.bs_to_cue.shape[0]

    @property
    def n_d2d(self) -> int:
        return self.bs_to_d2drx.shape[0]

    @property
    def n_tx(self) -> int:
        return self.bs_to_cue.shape[1]


def _link_coeff(gen: np.random.Generator, distance: float, q: float, size) -> np.ndarray:
    if distance <= 0:
        raise ValueError(f"zero/negative link distance {distance!r}")
    h0 = (gen.standard_normal(size) + 1j * gen.standard_normal(size)) / np.sqrt(2.0)
    return distance ** (-q) * h0


def sample_channels(cfg: SystemConfig, geo: Geometry, rng: RngStream) -> ChannelSet:
    """Draw one Rayleigh-fading realization for every link in the cell."""
    gen = rng.generator()
    q = cfg.pathloss_exponent
    K, D, N = cfg.n_cue, cfg.n_d2d, cfg.n_tx

    bs_to_cue = np.zeros((K, N), dtype=complex)
    for k in range(K):
        d = np.linalg.norm(geo.cue_positions[k])
        bs_to_cue[k] = _link_coeff(gen, d, q, N)

    d2d_to_cue = np.zeros((D, K), dtype=complex)
    for dd in range(D):
        for k in range(K):
            dist = np.linalg.norm(geo.cue_positions[k] - geo.d2d_tx_positions[dd])
            d2d_to_cue[dd, k] = _link_coeff(gen, dist, q, ())

    d2d_to_d2d = np.zeros((D, D), dtype=complex)
    for dp in range(D):
        for dd in range(D):
            dist = np.linalg.norm(geo.d2d_rx_positions[dd] - geo.d2d_tx_positions[dp])
            d2d_to_d2d[dp, dd] = _link_coeff(gen, dist, q, ())

    bs_to_d2drx = np.zeros((D, N), dtype=complex)
    for dd in range(D):
        dist = np.linalg.norm(geo.d2d_rx_positions[dd])
        bs_to_d2drx[dd] = _link_coeff(gen, dist, q, N)

    return ChannelSet(bs_to_cue, d2d_to_cue, d2d_to_d2d, bs_to_d2drx)


@dataclass(frozen=True)
class RadarEnvironment:
    """Target/clutter array quantities; no randomness involved."""

    target_steering_tx: np.ndarray   # a_t(theta_0), length N_t
    target_steering_rx: np.ndarray   # a_r(theta_0), length N_r
    target_matrix: np.ndarray        # a_r(theta_0) a_t(theta_0)^T, N_r x N_t
    target_gain_sq: float            # |alpha_0|^2, linear
    clutter_gains_sq: np.ndarray     # |alpha_i|^2, linear
    clutter_matrix: np.ndarray       # sum_i alpha_i a_r(theta_i) a_t(theta_i)^T
    radar_noise: float               # mW

    @property
    def n_rx(self) -> int:
        return self.target_steering_rx.shape[0]

    @property
    def n_tx(self) -> int:
        return self.target_steering_tx.shape[0]


def build_radar_environment(cfg: SystemConfig) -> RadarEnvironment:
    """Assemble steering vectors, gains and the combined clutter matrix.

    Gains are configured relative to the radar noise floor, so
    |alpha|^2 = N_s * 10^(dB/10). Clutter amplitudes take the nonnegative
    real root; relative clutter phases are pinned at zero for
    reproducibility (the combiner absorbs a global phase anyway).
    """
    a_t = steering_vector(cfg.target_angle, cfg.n_tx)
    a_r = steering_vector(cfg.target_angle, cfg.n_rx)
    target_gain_sq = cfg.radar_noise * from_decibels(cfg.target_gain_over_noise_db)
    clutter_gains_sq = np.array(
        [cfg.radar_noise * from_decibels(db) for db in cfg.clutter_gain_over_noise_db]
    )
    clutter = np.zeros((cfg.n_rx, cfg.n_tx), dtype=complex)
    for theta, gain_sq in zip(cfg.clutter_angles, clutter_gains_sq):
        alpha = np.sqrt(gain_sq)
        clutter += alpha * np.outer(steering_vector(theta, cfg.n_rx),
                                    steering_vector(theta, cfg.n_tx))
    return RadarEnvironment(
        target_steering_tx=a_t,
        target_steering_rx=a_r,
        target_matrix=np.outer(a_r, a_t),
        target_gain_sq=float(target_gain_sq),
        clutter_gains_sq=clutter_gains_sq,
        clutter_matrix=clutter,
        radar_noise=cfg.radar_noise,
    )


def dump_channels(ch: ChannelSet, path: str) -> None:
    """Flat CSV of all coefficients (re/im columns) for cross-checks."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["field", "index", "re", "im"])
        for name in ("bs_to_cue", "d2d_to_cue", "d2d_to_d2d", "bs_to_d2drx"):
            arr = getattr(ch, name)
            for idx, val in np.ndenumerate(arr):
                writer.writerow([name, ":".join(map(str, idx)),
                                 repr(float(val.real)), repr(float(val.imag))])
