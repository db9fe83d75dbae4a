"""Independent feasibility checker for emitted solutions.

Recomputes every constraint directly from the raw solution arrays; shares no
code path with the solver encoding.
"""

from __future__ import annotations

import numpy as np

from .channel import ChannelSet, RadarEnvironment
from .config import SystemConfig
from .optimizer import BeamformingSolution
from .sensing import scnr

POWER_SLACK = 1e-6
BOX_SLACK = 1e-9            # mW
PSD_SLACK = 1e-8            # fraction of trace
HERMITIAN_SLACK = 1e-10
ZF_RESIDUAL = 1e-10
SENSING_SLACK = 1e-6        # relative, on the self-consistent SCNR


def check_solution(sol: BeamformingSolution, ch: ChannelSet,
                   env: RadarEnvironment, cfg: SystemConfig) -> list[str]:
    """Return a list of violation descriptions (empty = clean)."""
    issues = []
    blocks = [("W0", sol.cov.radar)] + [
        (f"W{k + 1}", sol.cov.per_cue[k]) for k in range(sol.cov.n_cue)
    ]
    for name, W in blocks:
        herm = np.abs(W - W.conj().T).max()
        tr = float(np.real(np.trace(W)))
        if herm > HERMITIAN_SLACK * max(tr, 1.0):
            issues.append(f"{name} not Hermitian (asymmetry {herm:.3e})")
        lam_min = float(np.linalg.eigvalsh(0.5 * (W + W.conj().T))[0])
        if lam_min < -PSD_SLACK * max(tr, 1e-30):
            issues.append(f"{name} not PSD (min eigenvalue {lam_min:.3e})")

    total = float(np.real(np.trace(sol.cov.total)))
    if total > cfg.bs_power_budget * (1 + POWER_SLACK):
        issues.append(f"BS power {total:.6g} exceeds budget {cfg.bs_power_budget}")

    p = sol.powers.d2d_powers
    if np.any(p < -BOX_SLACK) or np.any(p > cfg.d2d_power_budget + BOX_SLACK):
        issues.append(f"D2D power outside [0, {cfg.d2d_power_budget}]: {p}")

    if sol.scheme in ("proposed", "zero-forcing", "fixed-d2d"):
        achieved = scnr(env, sol.cov)
        if achieved < cfg.scnr_threshold_linear * (1 - SENSING_SLACK):
            issues.append(
                f"SCNR {achieved:.6g} below threshold {cfg.scnr_threshold_linear:.6g}"
            )

    if sol.scheme == "zero-forcing":
        worst = 0.0
        for f in ch.bs_to_d2drx:
            for _, W in blocks:
                worst = max(worst, abs(complex(f.conj() @ W @ f)))
        if worst > ZF_RESIDUAL:
            issues.append(f"zero-forcing residual {worst:.3e}")

    if sol.scheme == "fixed-d2d" and len(p):
        if np.any(np.abs(p - cfg.d2d_power_budget) > BOX_SLACK):
            issues.append(f"fixed-d2d powers not at budget: {p}")

    return issues
