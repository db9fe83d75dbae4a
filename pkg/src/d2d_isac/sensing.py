"""Radar-side mathematics: transmit covariance, MVDR combining, SCNR and
beampatterns.

The SCNR can be evaluated either as the Rayleigh quotient for an explicit
combiner or, with the combiner left implicit, in the equivalent trace form
obtained by plugging in the optimal MVDR weights. Both agree at the MVDR
solution, which the tests pin down.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .channel import RadarEnvironment, steering_vector


@dataclass(frozen=True)
class TransmitCovariance:
    """Per-CUE covariances W_k plus the dedicated radar covariance W_0."""

    per_cue: np.ndarray   # (K, N_t, N_t) Hermitian PSD
    radar: np.ndarray     # (N_t, N_t) Hermitian PSD

    @property
    def n_cue(self) -> int:
        return self.per_cue.shape[0]

    @property
    def n_tx(self) -> int:
        return self.radar.shape[0]

    @property
    def total(self) -> np.ndarray:
        return self.per_cue.sum(axis=0) + self.radar

    def blocks(self) -> list[np.ndarray]:
        """[W_0, W_1, ..., W_K]."""
        return [self.radar] + [self.per_cue[k] for k in range(self.n_cue)]

    @staticmethod
    def zeros(n_cue: int, n_tx: int) -> "TransmitCovariance":
        return TransmitCovariance(
            per_cue=np.zeros((n_cue, n_tx, n_tx), dtype=complex),
            radar=np.zeros((n_tx, n_tx), dtype=complex),
        )


@dataclass(frozen=True)
class ReceiveBeamformer:
    weights: np.ndarray              # t, length N_r
    interference_matrix: np.ndarray  # M = C W C^H + N_s I, Hermitian PD


@dataclass(frozen=True)
class SensingConstraintCoeff:
    """Rank-one Hermitian Q with tr(Q W) the linearized radar SCNR."""

    q_matrix: np.ndarray


def interference_matrix(env: RadarEnvironment, cov: TransmitCovariance) -> np.ndarray:
    C = env.clutter_matrix
    M = C @ cov.total @ C.conj().T + env.radar_noise * np.eye(env.n_rx)
    return 0.5 * (M + M.conj().T)


def _chol_solve(L: np.ndarray, b: np.ndarray) -> np.ndarray:
    return solve_triangular(L.conj().T, solve_triangular(L, b, lower=True),
                            lower=False)


def _safe_cholesky(M: np.ndarray, floor: float) -> np.ndarray:
    """Cholesky of M = noise*I + PSD. Round-off in a solver-produced
    covariance can leak tiny negative eigenvalues into M; the true spectrum
    is bounded below by the noise power, so clip there and refactor."""
    try:
        return np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        lam, U = np.linalg.eigh(M)
        lam = np.maximum(lam, floor)
        return np.linalg.cholesky((U * lam) @ U.conj().T)


def mvdr_weights(env: RadarEnvironment, cov: TransmitCovariance) -> ReceiveBeamformer:
    """Combiner direction M^{-1} a_r(theta_0); scale is irrelevant to SCNR."""
    M = interference_matrix(env, cov)
    t = _chol_solve(_safe_cholesky(M, env.radar_noise), env.target_steering_rx)
    return ReceiveBeamformer(weights=t, interference_matrix=M)


def _target_tx_power(env: RadarEnvironment, W: np.ndarray) -> float:
    # a_t^T W conj(a_t), real by Hermitian symmetry
    a_t = env.target_steering_tx
    return float(np.real(a_t @ W @ a_t.conj()))


def scnr(env: RadarEnvironment, cov: TransmitCovariance, t: np.ndarray | None = None) -> float:
    """Radar SCNR, as ratio form for an explicit combiner t, else trace form.

    The trace form builds the clutter-plus-noise matrix from cov.total itself
    (fixed-point convention for final-solution evaluation).
    """
    M = interference_matrix(env, cov)
    sig = env.target_gain_sq * _target_tx_power(env, cov.total)
    # both branches go through the Cholesky factor: under strong clutter M is
    # ill conditioned and the plain quadratic form t^H M t loses ~5 digits to
    # cancellation, while ||L^H t||^2 is a sum of nonnegative terms
    L = _safe_cholesky(M, env.radar_noise)
    a_r = env.target_steering_rx
    if t is not None:
        t = np.asarray(t, dtype=complex)
        y = L.conj().T @ t
        den = float(np.real(y.conj() @ y))
        if den <= 0 or not np.any(t):
            raise ValueError("combiner must be nonzero")
        num = sig * abs(t.conj() @ a_r) ** 2
        return num / den
    x = solve_triangular(L, a_r, lower=True)
    quad = float(np.real(x.conj() @ x))
    return sig * quad


def sensing_constraint_coeff(env: RadarEnvironment,
                             prev_cov: TransmitCovariance) -> SensingConstraintCoeff:
    """Q = |alpha_0|^2 A^H M^{-1} A with M frozen at the previous iterate,
    so that tr(Q sum_k W_k) >= threshold is a linear sensing constraint."""
    M = interference_matrix(env, prev_cov)
    a_r = env.target_steering_rx
    a_t = env.target_steering_tx
    x = solve_triangular(_safe_cholesky(M, env.radar_noise), a_r, lower=True)
    quad = float(np.real(x.conj() @ x))
    Q = env.target_gain_sq * quad * np.outer(a_t.conj(), a_t)
    return SensingConstraintCoeff(q_matrix=Q)


def beampattern(env: RadarEnvironment, cov: TransmitCovariance,
                thetas: np.ndarray) -> np.ndarray:
    """Normalized combined tx/rx pattern in dB over the angle grid.

    Pattern value at theta is |t^H a_r(theta)|^2 * (a_t(theta)^T W a_t(theta)*)
    with t the MVDR direction for the target angle; the symbol expectation
    replaces the instantaneous waveform. Peak normalized to 0 dB.
    """
    thetas = np.asarray(thetas, dtype=float)
    if thetas.size == 0:
        raise ValueError("beampattern needs a nonempty angle grid")
    t = mvdr_weights(env, cov).weights
    W = cov.total
    vals = np.empty(thetas.shape)
    for i, th in enumerate(thetas):
        a_r = steering_vector(th, env.n_rx)
        a_t = steering_vector(th, env.n_tx)
        rx = abs(t.conj() @ a_r) ** 2
        tx = max(float(np.real(a_t @ W @ a_t.conj())), 0.0)
        vals[i] = rx * tx
    peak = vals.max()
    if peak <= 0:
        raise ValueError("all-zero transmit covariance has no beampattern")
    floor = peak * 1e-30  # keep log finite at exact nulls
    return 10.0 * np.log10(np.maximum(vals, floor) / peak)


def default_angle_grid(n: int = 721) -> np.ndarray:
    return np.linspace(-np.pi / 2, np.pi / 2, n)
