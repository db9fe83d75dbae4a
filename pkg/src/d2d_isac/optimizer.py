"""Outer successive-approximation loop and the scheme dispatcher.

Schemes:
  proposed            joint covariance + D2D power optimization
  zero-forcing        BS covariances confined to the null space of the
                      BS->D2D-receiver channels
  fixed-d2d           D2D powers frozen at full budget
  communication-only  sensing constraint dropped
  sensing-only        radar SCNR maximized, communication ignored
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelSet, RadarEnvironment
from .config import SystemConfig, RngStream, to_decibels
from .rates import PowerAllocation, sum_rate
from .sensing import TransmitCovariance, scnr, sensing_constraint_coeff
from .subproblem import (ExpansionPoint, build_surrogate, solve_surrogate,
                         zf_nullspace_basis)

SCHEMES = ("proposed", "zero-forcing", "fixed-d2d", "communication-only",
           "sensing-only")
SCA_SCHEMES = SCHEMES[:4]

RANK_ONE_RATIO = 1e-3
RANDOMIZATION_SAMPLES = 200


class InfeasibleProblemError(RuntimeError):
    """Sensing threshold unreachable under the power budget."""

    def __init__(self, message: str, max_achievable_scnr_db: float | None = None):
        super().__init__(message)
        self.max_achievable_scnr_db = max_achievable_scnr_db


@dataclass(frozen=True)
class BeamformingSolution:
    scheme: str
    cov: TransmitCovariance
    powers: PowerAllocation
    extracted_beamformers: list
    rank_flags: list
    relaxed_sum_rate: float
    extracted_sum_rate: float
    achieved_scnr_db: float
    iteration_trace: list
    converged: bool
    iterations_used: int


def _sensing_direction(env: RadarEnvironment, basis: np.ndarray | None) -> np.ndarray:
    """Unit vector maximizing the rank-one sensing form, optionally projected."""
    u = env.target_steering_tx.conj()
    if basis is not None:
        u = basis @ (basis.conj().T @ u)
    nrm = np.linalg.norm(u)
    if nrm == 0:
        raise InfeasibleProblemError("sensing direction lies entirely in the "
                                     "zero-forced subspace")
    return u / nrm


def _max_scnr_linear(env: RadarEnvironment, cfg: SystemConfig,
                     basis: np.ndarray | None = None) -> float:
    """Self-consistent SCNR of the full-power sensing-direction covariance."""
    u = _sensing_direction(env, basis)
    cov = TransmitCovariance(
        per_cue=np.zeros((0, env.n_tx, env.n_tx), dtype=complex),
        radar=cfg.bs_power_budget * np.outer(u, u.conj()),
    )
    return scnr(env, cov)


def _linearized_feasible(env, cov, eta_linear) -> bool:
    q = sensing_constraint_coeff(env, cov)
    return float(np.real(np.trace(q.q_matrix @ cov.total))) >= eta_linear


def _restore_sensing(env: RadarEnvironment, cfg: SystemConfig,
                     cov: TransmitCovariance, eta_linear: float,
                     zf_basis: np.ndarray | None) -> TransmitCovariance:
    """Minimal blend toward the full-power sensing beam so the self-consistent
    SCNR clears the threshold.

    The surrogate enforces the sensing constraint through the combiner frozen
    at the previous iterate, so an accepted step can sit a linearization gap
    (order of the convergence tolerance) below the threshold when re-evaluated
    self-consistently. Blending cov with the scheme's max-SCNR covariance is
    feasibility-preserving (power is convex-combined, the zero-forcing face is
    respected by the projected direction) and the required blend weight is of
    the same tiny order, so the objective change is negligible."""
    if scnr(env, cov) >= eta_linear:
        return cov
    u = _sensing_direction(env, zf_basis)
    radar_full = cfg.bs_power_budget * np.outer(u, u.conj())

    def blend(t: float) -> TransmitCovariance:
        return TransmitCovariance(per_cue=(1.0 - t) * cov.per_cue,
                                  radar=(1.0 - t) * cov.radar + t * radar_full)

    lo, hi = 0.0, 1.0
    if scnr(env, blend(hi)) < eta_linear:
        return blend(hi)   # threshold above the scheme's ceiling; best effort
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if scnr(env, blend(mid)) >= eta_linear:
            hi = mid
        else:
            lo = mid
    return blend(hi)


def initialize(ch: ChannelSet, env: RadarEnvironment, cfg: SystemConfig,
               *, zf_basis: np.ndarray | None = None,
               include_sensing: bool = True,
               fixed_power: bool = False) -> ExpansionPoint:
    """Regularized channel-inversion start at full power; if its own
    linearized sensing constraint fails, shift power toward the sensing
    direction in 0.1-budget steps until feasible."""
    K, D, N = cfg.n_cue, cfg.n_d2d, cfg.n_tx
    P = cfg.bs_power_budget

    hs = np.array([zf_basis @ (zf_basis.conj().T @ h) if zf_basis is not None
                   else h for h in ch.bs_to_cue])
    # classic RZF loading keeps beams near the sum-rate optimum, which cuts
    # an outer iteration or two compared to plain matched filtering
    gram = hs.conj() @ hs.T + (K * cfg.comm_noise / P) * np.eye(K)
    directions = np.linalg.solve(gram, hs.conj()).conj()   # rows: unnormalized w_k

    def matched(power_total: float) -> np.ndarray:
        per = np.zeros((K, N, N), dtype=complex)
        for k in range(K):
            w = directions[k]
            nrm2 = float(np.real(w.conj() @ w))
            per[k] = (power_total / K) * np.outer(w, w.conj()) / nrm2
        return per

    if zf_basis is None:
        radar_iso = np.eye(N, dtype=complex) / N
    else:
        dim = zf_basis.shape[1]
        radar_iso = (zf_basis @ zf_basis.conj().T) / dim
    # all-communication start; matched beams usually carry plenty of power
    # toward the target already, so this rarely needs the fallbacks below
    cov = TransmitCovariance(per_cue=matched(P),
                             radar=np.zeros((N, N), dtype=complex))
    p0 = np.full(D, cfg.d2d_power_budget if fixed_power else cfg.d2d_power_budget / 2)

    if include_sensing:
        eta_linear = cfg.scnr_threshold_linear
        if not _linearized_feasible(env, cov, eta_linear):
            cov = TransmitCovariance(per_cue=matched(P / 2),
                                     radar=(P / 2) * radar_iso)
        if not _linearized_feasible(env, cov, eta_linear):
            u = _sensing_direction(env, zf_basis)
            for frac in np.arange(0.5, 1.0 + 1e-9, 0.1):
                cov = TransmitCovariance(
                    per_cue=matched((1.0 - frac) * P),
                    radar=frac * P * np.outer(u, u.conj()),
                )
                if _linearized_feasible(env, cov, eta_linear):
                    break
            else:
                bound = _max_scnr_linear(env, cfg, zf_basis)
                raise InfeasibleProblemError(
                    f"sensing threshold {cfg.scnr_threshold_db:.2f} dB exceeds the "
                    f"maximum achievable {to_decibels(bound):.2f} dB",
                    max_achievable_scnr_db=to_decibels(bound),
                )
    return ExpansionPoint(cov_prev=cov, powers_prev=PowerAllocation(p0))


def extract_beamformers(cov: TransmitCovariance,
                        ch: ChannelSet | None = None,
                        powers: PowerAllocation | None = None,
                        n_c: float | None = None,
                        rng: RngStream | None = None):
    """Leading-eigenpair beamformers per CUE, plus near-rank-one flags.

    When a block is not near rank one and channel context is supplied, a
    Gaussian randomization pass (power-rescaled candidates, best true sum
    rate kept) refines the extraction.
    """
    K, N = cov.n_cue, cov.n_tx
    ws, flags = [], []
    eigs = []
    for k in range(K):
        lam, U = np.linalg.eigh(0.5 * (cov.per_cue[k] + cov.per_cue[k].conj().T))
        lam = np.clip(lam, 0.0, None)
        eigs.append((lam, U))
        if lam[-1] <= 0:
            ws.append(np.zeros(N, dtype=complex))
            flags.append(True)
            continue
        ws.append(np.sqrt(lam[-1]) * U[:, -1])
        second = lam[-2] if N > 1 else 0.0
        flags.append(bool(second / lam[-1] <= RANK_ONE_RATIO))

    if all(flags) or ch is None or powers is None or n_c is None:
        return ws, flags

    gen = (rng or RngStream(0, "randomization")).generator()

    def rate_of(cands):
        per = np.stack([np.outer(w, w.conj()) for w in cands]) if K else \
            np.zeros((0, N, N), dtype=complex)
        trial = TransmitCovariance(per_cue=per, radar=cov.radar)
        return sum_rate(ch, trial, powers, n_c).sum_rate

    best, best_rate = ws, rate_of(ws)
    for _ in range(RANDOMIZATION_SAMPLES):
        cand = []
        for k in range(K):
            lam, U = eigs[k]
            tr = lam.sum()
            if tr <= 0:
                cand.append(np.zeros(N, dtype=complex))
                continue
            g = (gen.standard_normal(N) + 1j * gen.standard_normal(N)) / np.sqrt(2)
            w = U @ (np.sqrt(lam) * g)
            nrm = np.linalg.norm(w)
            # rescale so each beam spends exactly its relaxed power share
            cand.append(w * np.sqrt(tr) / nrm if nrm > 0 else w)
        r = rate_of(cand)
        if r > best_rate:
            best, best_rate = cand, r
    return best, flags


POLISH_GRID = 257


def _polish_powers(ch: ChannelSet, cov: TransmitCovariance, pa: PowerAllocation,
                   n_c: float, lo: np.ndarray, hi: np.ndarray) -> PowerAllocation:
    """Coordinate-wise exact line search of the true sum rate over each D2D
    power. The surrogate moves boundary-bound powers only a fraction per
    iteration; maximizing the true objective one coordinate at a time removes
    that geometric tail while preserving monotone ascent (the incumbent power
    is always among the candidates)."""
    D, K = ch.n_d2d, ch.n_cue
    p = pa.d2d_powers.astype(float).copy()
    if D == 0 or np.all(hi - lo <= 0):
        return pa

    g2 = np.abs(ch.d2d_to_cue) ** 2          # (D, K)
    rho2 = np.abs(ch.d2d_to_d2d) ** 2        # (D, D), row = transmitter
    cue_des = np.empty(K)
    cue_bs_int = np.empty(K)
    for k in range(K):
        h = ch.bs_to_cue[k]
        total = float(np.real(h.conj() @ cov.total @ h))
        cue_des[k] = float(np.real(h.conj() @ cov.per_cue[k] @ h))
        cue_bs_int[k] = total - cue_des[k]
    rx_bs = np.array([float(np.real(f.conj() @ cov.total @ f))
                      for f in ch.bs_to_d2drx])

    for d in range(D):
        if hi[d] - lo[d] <= 0:
            continue
        grid = np.append(np.linspace(lo[d], hi[d], POLISH_GRID), p[d])
        rates = np.zeros_like(grid)
        for k in range(K):
            other = float(np.sum(p * g2[:, k])) - p[d] * g2[d, k]
            rates += np.log2(1.0 + cue_des[k]
                             / (cue_bs_int[k] + other + grid * g2[d, k] + n_c))
        own_den = rx_bs[d] + float(np.sum(p * rho2[:, d])) - p[d] * rho2[d, d] + n_c
        rates += np.log2(1.0 + grid * rho2[d, d] / own_den)
        for dp in range(D):
            if dp == d:
                continue
            den = (rx_bs[dp] + float(np.sum(p * rho2[:, dp]))
                   - p[dp] * rho2[dp, dp] - p[d] * rho2[d, dp]
                   + grid * rho2[d, dp] + n_c)
            rates += np.log2(1.0 + p[dp] * rho2[dp, dp] / den)
        p[d] = float(grid[int(np.argmax(rates))])
    return PowerAllocation(p)


def _finalize(scheme: str, ch: ChannelSet, env: RadarEnvironment, cfg: SystemConfig,
              cov: TransmitCovariance, powers: PowerAllocation,
              trace: list, converged: bool, iterations: int) -> BeamformingSolution:
    rng = RngStream(cfg.rng_seed, "randomization")
    ws, flags = extract_beamformers(cov, ch, powers, cfg.comm_noise, rng)
    per_ex = (np.stack([np.outer(w, w.conj()) for w in ws]) if cov.n_cue else
              np.zeros((0, cov.n_tx, cov.n_tx), dtype=complex))
    cov_ex = TransmitCovariance(per_cue=per_ex, radar=cov.radar)
    extracted = sum_rate(ch, cov_ex, powers, cfg.comm_noise).sum_rate
    return BeamformingSolution(
        scheme=scheme,
        cov=cov,
        powers=powers,
        extracted_beamformers=ws,
        rank_flags=flags,
        relaxed_sum_rate=trace[-1],
        extracted_sum_rate=extracted,
        achieved_scnr_db=to_decibels(scnr(env, cov)),
        iteration_trace=list(trace),
        converged=converged,
        iterations_used=iterations,
    )


def run_sca(ch: ChannelSet, env: RadarEnvironment, cfg: SystemConfig,
            scheme: str) -> BeamformingSolution:
    """Iterate surrogate builds and solves until the true objective settles."""
    if scheme not in SCA_SCHEMES:
        raise ValueError(f"run_sca handles {SCA_SCHEMES}, got {scheme!r}")
    if scheme == "zero-forcing" and cfg.n_tx <= cfg.n_d2d:
        raise ValueError("zero-forcing requires n_tx > n_d2d")

    zf_basis = zf_nullspace_basis(ch, cfg) if scheme == "zero-forcing" else None
    include_sensing = scheme != "communication-only"
    fixed_power = scheme == "fixed-d2d"
    if fixed_power:
        full = np.full(cfg.n_d2d, cfg.d2d_power_budget)
        p_bounds = (full, full)
    else:
        p_bounds = (np.zeros(cfg.n_d2d), np.full(cfg.n_d2d, cfg.d2d_power_budget))

    exp = initialize(ch, env, cfg, zf_basis=zf_basis,
                     include_sensing=include_sensing, fixed_power=fixed_power)
    cov, powers = exp.cov_prev, exp.powers_prev
    if include_sensing:
        cov = _restore_sensing(env, cfg, cov, cfg.scnr_threshold_linear, zf_basis)
        exp = ExpansionPoint(cov_prev=cov, powers_prev=powers)
    trace = [sum_rate(ch, cov, powers, cfg.comm_noise).sum_rate]
    converged = False
    iterations = 0
    for i in range(1, cfg.max_iterations + 1):
        q = sensing_constraint_coeff(env, cov) if include_sensing else None
        model = build_surrogate(ch, q, exp, cfg, zf_basis, p_bounds=p_bounds)
        sol = solve_surrogate(model, cfg)
        if sol.status == "infeasible":
            if i == 1:
                bound = sol.max_achievable_sensing
                db = to_decibels(bound) if bound and bound > 0 else float("-inf")
                raise InfeasibleProblemError(
                    f"{scheme}: sensing constraint infeasible "
                    f"(max achievable {db:.2f} dB)",
                    max_achievable_scnr_db=db,
                )
            break   # keep last feasible iterate, flagged unconverged
        if sol.status == "stalled":
            break   # solver numerical breakdown: keep last good iterate
        iterations = i
        new_cov = sol.cov
        if include_sensing:
            new_cov = _restore_sensing(env, cfg, new_cov,
                                       cfg.scnr_threshold_linear, zf_basis)
        new_powers = _polish_powers(ch, new_cov, sol.powers, cfg.comm_noise,
                                    p_bounds[0], p_bounds[1])
        obj = model.true_objective(new_cov, new_powers)
        prev = trace[-1]
        if obj < prev:
            # inexact conic solve produced a descent step: keep the last
            # good iterate; flag convergence if we were already settled
            converged = prev - obj < cfg.convergence_tol * max(abs(prev), 1e-12)
            break
        cov, powers = new_cov, new_powers
        trace.append(obj)
        exp = ExpansionPoint(cov_prev=cov, powers_prev=powers)
        if obj - prev < cfg.convergence_tol * max(abs(prev), 1e-12):
            converged = True
            break
    return _finalize(scheme, ch, env, cfg, cov, powers, trace, converged, iterations)


def sensing_only_solution(env: RadarEnvironment, cfg: SystemConfig,
                          ch: ChannelSet | None = None) -> BeamformingSolution:
    """Full-budget rank-one covariance along the sensing direction.

    The clutter-plus-noise fixed point converges immediately because the
    maximizer of the linearized sensing form does not depend on it.
    """
    u = _sensing_direction(env, None)
    N = env.n_tx
    K = cfg.n_cue
    cov = TransmitCovariance(
        per_cue=np.zeros((K, N, N), dtype=complex),
        radar=cfg.bs_power_budget * np.outer(u, u.conj()),
    )
    prev = None
    iterations = 0
    for _ in range(cfg.max_iterations):
        iterations += 1
        val = scnr(env, cov)
        if prev is not None and abs(val - prev) < cfg.convergence_tol * abs(prev):
            break
        prev = val
    powers = PowerAllocation.zeros(cfg.n_d2d)
    if ch is not None:
        rate = sum_rate(ch, cov, powers, cfg.comm_noise).sum_rate
    else:
        rate = float("nan")
    ws = [np.zeros(N, dtype=complex) for _ in range(K)]
    return BeamformingSolution(
        scheme="sensing-only",
        cov=cov,
        powers=powers,
        extracted_beamformers=ws,
        rank_flags=[True] * K,
        relaxed_sum_rate=rate,
        extracted_sum_rate=rate,
        achieved_scnr_db=to_decibels(scnr(env, cov)),
        iteration_trace=[rate],
        converged=True,
        iterations_used=iterations,
    )


def solve_scheme(ch: ChannelSet, env: RadarEnvironment, cfg: SystemConfig,
                 scheme: str) -> BeamformingSolution:
    """Uniform entry point over all five schemes."""
    if scheme == "sensing-only":
        return sensing_only_solution(env, cfg, ch)
    return run_sca(ch, env, cfg, scheme)
