"""Per-iteration convex surrogate program and its solver.

The surrogate maximizes the concave part of the four-logarithm sum-rate
rewrite and replaces the subtracted logs by their first-order expansions at
the previous iterate, which makes the model a global lower bound that is
tight at the expansion point. Rank constraints are dropped (semidefinite
relaxation); the optional zero-forcing structure is enforced by a null-space
parameterization of the covariance blocks.

Hermitian PSD blocks are handed to the conic solver through the standard
real-symmetric embedding of doubled dimension,

    W = X + jY  ->  [[X, -Y], [Y, X]],

with real parameters throughout. Keeping the whole model real lets cvxpy
cache the canonicalization across solves, which matters because one sweep
performs thousands of these solves.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np

from .channel import ChannelSet
from .config import SystemConfig
from .rates import PowerAllocation, sum_rate
from .sensing import SensingConstraintCoeff, TransmitCovariance

_LN2 = np.log(2.0)

FEAS_SLACK = 1e-6


def embed_hermitian(A: np.ndarray) -> np.ndarray:
    """Hermitian -> structured real symmetric of doubled dimension."""
    X, Y = A.real, A.imag
    return np.block([[X, -Y], [Y, X]])


def unembed_hermitian(S: np.ndarray) -> np.ndarray:
    """Inverse of embed_hermitian, averaging over the embedding symmetry."""
    n = S.shape[0] // 2
    X = 0.5 * (S[:n, :n] + S[n:, n:])
    Y = 0.5 * (S[n:, :n] - S[:n, n:])
    W = X + 1j * Y
    return 0.5 * (W + W.conj().T)


@dataclass(frozen=True)
class ExpansionPoint:
    cov_prev: TransmitCovariance
    powers_prev: PowerAllocation


@dataclass
class SurrogateModel:
    """Frozen data of one convex subproblem plus evaluation helpers."""

    n_tx: int
    n_cue: int
    n_d2d: int
    h: np.ndarray            # (K, N) BS->CUE channels
    g2: np.ndarray           # (D, K) |g_{d,k}|^2
    rho2: np.ndarray         # (D, D) |rho_{d',d}|^2, row = transmitter
    f: np.ndarray            # (D, N) BS->D2D-rx channels
    n_c: float
    bs_power_budget: float
    p_lo: np.ndarray
    p_hi: np.ndarray
    q_matrix: np.ndarray | None       # sensing coefficient, None = no constraint
    eta_linear: float | None
    expansion: ExpansionPoint
    betas: np.ndarray        # (K,) CUE Taylor coefficients
    deltas: np.ndarray       # (D,) D2D Taylor coefficients
    zf_basis: np.ndarray | None = None          # (N, dim) orthonormal
    zf_equalities: bool = False                 # equality-constraint route
    channels: ChannelSet = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.n_tx if self.zf_basis is None else self.zf_basis.shape[1]

    # -- evaluation (full space, independent of the solver encoding) --------

    def _cue_terms(self, cov: TransmitCovariance, pa: PowerAllocation, k: int):
        h = self.h[k]
        total = float(np.real(h.conj() @ cov.total @ h))
        desired = float(np.real(h.conj() @ cov.per_cue[k] @ h))
        d2d = float(np.sum(pa.d2d_powers * self.g2[:, k])) if self.n_d2d else 0.0
        s_k = total + d2d + self.n_c
        return s_k, s_k - desired

    def _d2d_terms(self, cov: TransmitCovariance, pa: PowerAllocation, d: int):
        f = self.f[d]
        bs = float(np.real(f.conj() @ cov.total @ f))
        t_d = float(np.sum(pa.d2d_powers * self.rho2[:, d])) + bs + self.n_c
        return t_d, t_d - pa.d2d_powers[d] * self.rho2[d, d]

    def surrogate_objective(self, cov: TransmitCovariance, pa: PowerAllocation) -> float:
        """Value of the surrogate at an arbitrary point (not only the optimum)."""
        prev_cov, prev_p = self.expansion.cov_prev, self.expansion.powers_prev
        val = 0.0
        for k in range(self.n_cue):
            s_k, i_k = self._cue_terms(cov, pa, k)
            _, i_prev = self._cue_terms(prev_cov, prev_p, k)
            phi = np.log2(i_prev) + self.betas[k] * (i_k - i_prev) / _LN2
            val += np.log2(s_k) - phi
        for d in range(self.n_d2d):
            t_d, j_d = self._d2d_terms(cov, pa, d)
            _, j_prev = self._d2d_terms(prev_cov, prev_p, d)
            phi = np.log2(j_prev) + self.deltas[d] * (j_d - j_prev) / _LN2
            val += np.log2(t_d) - phi
        return val

    def true_objective(self, cov: TransmitCovariance, pa: PowerAllocation) -> float:
        return sum_rate(self.channels, cov, pa, self.n_c).sum_rate

    def sensing_value(self, cov: TransmitCovariance) -> float:
        if self.q_matrix is None:
            raise ValueError("model has no sensing constraint")
        return float(np.real(np.trace(self.q_matrix @ cov.total)))


@dataclass(frozen=True)
class SubproblemSolution:
    cov: TransmitCovariance
    powers: PowerAllocation
    objective: float
    status: str                    # optimal | max-iter | infeasible | stalled
    max_achievable_sensing: float | None = None


def zf_nullspace_basis(ch: ChannelSet, cfg: SystemConfig) -> np.ndarray:
    """Orthonormal basis of the space orthogonal to every BS->D2D-rx channel."""
    N, D = ch.n_tx, ch.n_d2d
    if cfg.n_tx <= cfg.n_d2d:
        raise ValueError("zero-forcing needs more BS antennas than D2D pairs")
    if D == 0:
        return np.eye(N, dtype=complex)
    A = ch.bs_to_d2drx.conj()          # rows are f_d^H
    _, s, Vh = np.linalg.svd(A)
    if s[-1] < 1e-8 * s[0]:
        raise ValueError("BS->D2D channels are nearly dependent; "
                         "null-space basis ill conditioned")
    return Vh[D:].conj().T


def build_surrogate(ch: ChannelSet,
                    q: SensingConstraintCoeff | None,
                    exp: ExpansionPoint,
                    cfg: SystemConfig,
                    zf_basis: np.ndarray | None = None,
                    *,
                    p_bounds: tuple[np.ndarray, np.ndarray] | None = None,
                    zf_equalities: bool = False) -> SurrogateModel:
    """Assemble the convex surrogate model around the expansion point.

    q is the linearized sensing coefficient; pass None to drop the sensing
    constraint (communication-only). p_bounds overrides the default D2D power
    box [0, P_d] (used to freeze powers).
    """
    K, D, N = ch.n_cue, ch.n_d2d, ch.n_tx
    cov_prev, p_prev = exp.cov_prev, exp.powers_prev

    total_prev = float(np.real(np.trace(cov_prev.total)))
    if total_prev > cfg.bs_power_budget * (1 + FEAS_SLACK):
        raise ValueError("expansion point violates the BS power budget")
    if D and (np.any(p_prev.d2d_powers < -FEAS_SLACK)
              or np.any(p_prev.d2d_powers > cfg.d2d_power_budget * (1 + FEAS_SLACK))):
        raise ValueError("expansion point violates a D2D power box")

    g2 = np.abs(ch.d2d_to_cue) ** 2 if D else np.zeros((0, K))
    rho2 = np.abs(ch.d2d_to_d2d) ** 2 if D else np.zeros((0, 0))

    betas = np.empty(K)
    for k in range(K):
        h = ch.bs_to_cue[k]
        interf = float(np.real(h.conj() @ (cov_prev.total - cov_prev.per_cue[k]) @ h))
        interf += float(np.sum(p_prev.d2d_powers * g2[:, k])) if D else 0.0
        betas[k] = 1.0 / (interf + cfg.comm_noise)
    deltas = np.empty(D)
    for d in range(D):
        f = ch.bs_to_d2drx[d]
        interf = float(np.real(f.conj() @ cov_prev.total @ f))
        interf += sum(p_prev.d2d_powers[dp] * rho2[dp, d] for dp in range(D) if dp != d)
        deltas[d] = 1.0 / (interf + cfg.comm_noise)

    if p_bounds is None:
        p_lo = np.zeros(D)
        p_hi = np.full(D, cfg.d2d_power_budget)
    else:
        p_lo = np.asarray(p_bounds[0], dtype=float)
        p_hi = np.asarray(p_bounds[1], dtype=float)

    return SurrogateModel(
        n_tx=N, n_cue=K, n_d2d=D,
        h=ch.bs_to_cue, g2=g2, rho2=rho2, f=ch.bs_to_d2drx,
        n_c=cfg.comm_noise,
        bs_power_budget=cfg.bs_power_budget,
        p_lo=p_lo, p_hi=p_hi,
        q_matrix=None if q is None else q.q_matrix,
        eta_linear=None if q is None else cfg.scnr_threshold_linear,
        expansion=exp,
        betas=betas, deltas=deltas,
        zf_basis=zf_basis,
        zf_equalities=zf_equalities,
        channels=ch,
    )


def describe(model: SurrogateModel) -> str:
    """Human-readable dump of one subproblem for solver cross-validation."""
    lines = [
        f"subproblem: N_t={model.n_tx} dim={model.dim} K={model.n_cue} D={model.n_d2d}",
        f"  bs_power_budget={model.bs_power_budget} mW, noise={model.n_c} mW",
        f"  p box: {model.p_lo.tolist()} .. {model.p_hi.tolist()}",
        f"  sensing threshold (linear): {model.eta_linear}",
        f"  betas: {model.betas.tolist()}",
        f"  deltas: {model.deltas.tolist()}",
        f"  expansion trace: {np.real(np.trace(model.expansion.cov_prev.total)):.6g} mW",
    ]
    if model.q_matrix is not None:
        lines.append(f"  Q leading eigenvalue: "
                     f"{np.linalg.eigvalsh(model.q_matrix)[-1]:.6g}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# cached parametric conic program
# ---------------------------------------------------------------------------

class _ParametricProgram:
    """One compiled cvxpy program per (dim, K, D, zf-equality) signature."""

    def __init__(self, dim: int, K: int, D: int, zf_eq: bool):
        self.dim, self.K, self.D, self.zf_eq = dim, K, D, zf_eq
        M = 2 * dim
        self.S = [cp.Variable((M, M), PSD=True, name=f"S{j}") for j in range(K + 1)]
        self.p = cp.Variable(D, name="p") if D else None
        Ssum = sum(self.S)

        self.Hp = [cp.Parameter((M, M), symmetric=True) for _ in range(K)]
        self.Fp = [cp.Parameter((M, M), symmetric=True) for _ in range(D)]
        self.G2 = cp.Parameter((D, K), nonneg=True) if D and K else None
        self.R2 = cp.Parameter((D, D), nonneg=True) if D else None
        self.Lw = [cp.Parameter((M, M), symmetric=True) for _ in range(K + 1)]
        self.lp = cp.Parameter(D) if D else None
        self.Qp = cp.Parameter((M, M), symmetric=True)
        self.eta = cp.Parameter()
        self.Pbud = cp.Parameter(nonneg=True)
        self.lo = cp.Parameter(D) if D else None
        self.hi = cp.Parameter(D) if D else None

        obj = 0
        for k in range(K):
            arg = 0.5 * cp.trace(self.Hp[k] @ Ssum) + 1.0
            if D:
                arg = arg + self.G2[:, k] @ self.p
            obj = obj + cp.log(arg) / _LN2
        for d in range(D):
            arg = self.R2[:, d] @ self.p + 0.5 * cp.trace(self.Fp[d] @ Ssum) + 1.0
            obj = obj + cp.log(arg) / _LN2
        obj = obj - sum(0.5 * cp.trace(self.Lw[j] @ self.S[j]) for j in range(K + 1))
        if D:
            obj = obj - self.lp @ self.p

        cons = [0.5 * cp.trace(self.Qp @ Ssum) >= self.eta,
                sum(0.5 * cp.trace(Sj) for Sj in self.S) <= self.Pbud]
        if D:
            cons += [self.p >= self.lo, self.p <= self.hi]
        if zf_eq:
            for d in range(D):
                for j in range(K + 1):
                    cons.append(0.5 * cp.trace(self.Fp[d] @ self.S[j]) == 0)
        self.problem = cp.Problem(cp.Maximize(obj), cons)


_CACHE: dict[tuple, _ParametricProgram] = {}
_LOCK = threading.Lock()


def _program(dim: int, K: int, D: int, zf_eq: bool) -> _ParametricProgram:
    if zf_eq:
        # cross-validation route only: the trace equalities put the PSD
        # blocks on a face of the cone (no strictly feasible point), and
        # re-solving a cached program reuses the backend solver object,
        # making these fragile solves depend on solve history. A fresh
        # program per call keeps them independent and reproducible.
        return _ParametricProgram(dim, K, D, zf_eq)
    key = (dim, K, D, zf_eq)
    prog = _CACHE.get(key)
    if prog is None:
        prog = _ParametricProgram(dim, K, D, zf_eq)
        _CACHE[key] = prog
    return prog


def _reduced_data(model: SurrogateModel):
    """Project channels/coefficients onto the optimization subspace."""
    V = model.zf_basis
    if V is None:
        h = model.h
        f = model.f
        Q = model.q_matrix
    else:
        h = model.h @ V.conj()                     # V^H h_k, rows
        f = model.f @ V.conj()
        Q = None if model.q_matrix is None else V.conj().T @ model.q_matrix @ V
    return h, f, Q


def solve_surrogate(model: SurrogateModel, cfg: SystemConfig) -> SubproblemSolution:
    """Solve the surrogate to conic-solver accuracy (relative gap <= 1e-6).

    Returns the solution lifted back to the full antenna space; the reported
    objective is the surrogate value recomputed at the returned point.
    """
    K, D, dim = model.n_cue, model.n_d2d, model.dim
    N = model.n_tx
    V = model.zf_basis
    h, f, Q = _reduced_data(model)
    scale = 1.0 / model.n_c                         # noise-normalized comm terms

    Hk = [np.outer(h[k], h[k].conj()) for k in range(K)]
    Fd = [np.outer(f[d], f[d].conj()) for d in range(D)]

    # coefficient of each block / power in the subtracted affine term
    Lmats = []
    f_sum = np.zeros((dim, dim), dtype=complex)
    for d in range(D):
        f_sum += model.deltas[d] * Fd[d]
    for j in range(K + 1):
        L = f_sum.copy()
        for k in range(K):
            if k + 1 != j:
                L += model.betas[k] * Hk[k]
        Lmats.append(L / _LN2)
    lvec = np.zeros(D)
    for dp in range(D):
        lvec[dp] = (sum(model.betas[k] * model.g2[dp, k] for k in range(K))
                    + sum(model.deltas[d] * model.rho2[dp, d]
                          for d in range(D) if d != dp)) / _LN2

    with _LOCK:
        prog = _program(dim, K, D, model.zf_equalities)
        for k in range(K):
            prog.Hp[k].value = embed_hermitian(Hk[k] * scale)
        for d in range(D):
            prog.Fp[d].value = embed_hermitian(Fd[d] * scale)
        if D and K:
            prog.G2.value = model.g2 * scale
        if D:
            prog.R2.value = model.rho2 * scale
            prog.lp.value = lvec
            prog.lo.value = model.p_lo
            prog.hi.value = model.p_hi
        for j in range(K + 1):
            prog.Lw[j].value = embed_hermitian(Lmats[j])
        if Q is not None and model.eta_linear is not None:
            prog.Qp.value = embed_hermitian(Q / model.eta_linear)
            prog.eta.value = 1.0
        else:
            prog.Qp.value = np.zeros((2 * dim, 2 * dim))
            prog.eta.value = -1.0
        prog.Pbud.value = model.bs_power_budget

        # tight tolerances keep the ascent property of the outer loop; near
        # the feasibility boundary they can defeat the interior-point solver,
        # so fall back to progressively looser settings before giving up
        status = None
        attempts = ({"tol_gap_rel": 1e-7, "tol_gap_abs": 1e-7, "tol_feas": 1e-8},
                    {"tol_gap_rel": 1e-9, "tol_gap_abs": 1e-8, "tol_feas": 1e-9},
                    {})
        for i, tols in enumerate(attempts):
            try:
                prog.problem.solve(solver=cp.CLARABEL, **tols)
            except cp.error.SolverError:
                status = "solver_error"
                continue
            status = prog.problem.status
            accepted = (cp.OPTIMAL, cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE)
            if i == len(attempts) - 1 or model.zf_equalities:
                # loosest attempt: take what we can get. The equality route
                # can never certify full accuracy (its PSD blocks sit on a
                # face of the cone), so reduced accuracy is its normal exit.
                accepted += (cp.OPTIMAL_INACCURATE,)
            if status in accepted:
                break
        S_vals = [None if Sj.value is None else np.array(Sj.value) for Sj in prog.S]
        p_val = np.array(prog.p.value) if D and prog.p.value is not None else np.zeros(D)

    if status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
        diag = None
        if Q is not None:
            lam = float(np.linalg.eigvalsh(Q)[-1])
            diag = model.bs_power_budget * lam
        return SubproblemSolution(
            cov=model.expansion.cov_prev,
            powers=model.expansion.powers_prev,
            objective=float("nan"),
            status="infeasible",
            max_achievable_sensing=diag,
        )
    if status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE) or any(S is None for S in S_vals):
        # numerical breakdown: report a stall so the outer loop can stop at
        # its last good iterate instead of aborting the whole run
        exp = model.expansion
        return SubproblemSolution(
            cov=exp.cov_prev,
            powers=exp.powers_prev,
            objective=model.surrogate_objective(exp.cov_prev, exp.powers_prev),
            status="stalled",
        )

    blocks = []
    for S in S_vals:
        Wj = unembed_hermitian(S)
        if V is not None:
            Wj = V @ Wj @ V.conj().T
            Wj = 0.5 * (Wj + Wj.conj().T)
        blocks.append(Wj)
    # projection-style cleanup: keep the point inside the hard constraints
    total_tr = float(sum(np.real(np.trace(B)) for B in blocks))
    if total_tr > model.bs_power_budget:
        fac = model.bs_power_budget / total_tr
        blocks = [B * fac for B in blocks]
    cov = TransmitCovariance(per_cue=np.stack(blocks[1:]) if K else
                             np.zeros((0, N, N), dtype=complex),
                             radar=blocks[0])
    powers = PowerAllocation(np.clip(p_val, model.p_lo, model.p_hi))
    return SubproblemSolution(
        cov=cov,
        powers=powers,
        objective=model.surrogate_objective(cov, powers),
        status="optimal" if status == cp.OPTIMAL else "max-iter",
    )
