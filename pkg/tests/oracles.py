"""Brute-force oracles for the convex subproblem, shared between the module
tests and the acceptance suite. Each one pins the solver against a result
computable without conic programming."""

from dataclasses import replace

import numpy as np

from d2d_isac import (ChannelSet, ExpansionPoint, PowerAllocation, RngStream,
                      TransmitCovariance, build_radar_environment,
                      build_surrogate, default_config, sample_channels,
                      sample_geometry, sensing_constraint_coeff,
                      solve_surrogate, zf_nullspace_basis)
from d2d_isac.optimizer import initialize


def scalar_bs_oracle():
    """Single antenna, one user, no D2D, no sensing: the optimum is trivially
    all power on the user's (scalar) covariance. Returns (solution, expected
    objective, budget)."""
    cfg = replace(default_config(), n_tx=1, n_rx=1, n_cue=1, n_d2d=0)
    c = 1e-4     # flat channel amplitude at 100 m, pathloss exponent 2
    ch = ChannelSet(
        bs_to_cue=np.array([[c]], dtype=complex),
        d2d_to_cue=np.zeros((0, 1), dtype=complex),
        d2d_to_d2d=np.zeros((0, 0), dtype=complex),
        bs_to_d2drx=np.zeros((0, 1), dtype=complex),
    )
    exp = ExpansionPoint(
        cov_prev=TransmitCovariance(
            per_cue=np.full((1, 1, 1), cfg.bs_power_budget / 2, dtype=complex),
            radar=np.zeros((1, 1), dtype=complex)),
        powers_prev=PowerAllocation.zeros(0),
    )
    model = build_surrogate(ch, None, exp, cfg)
    sol = solve_surrogate(model, cfg)
    expected = np.log2(1 + cfg.bs_power_budget * c ** 2 / cfg.comm_noise)
    return sol, float(expected), cfg.bs_power_budget


def d2d_power_grid_oracle(grid_points: int = 641):
    """Two interfering D2D pairs, silent BS side: the surrogate reduces to a
    two-variable concave program over the power box, solvable by dense grid
    search. Returns (solver objective, grid-search objective)."""
    cfg = replace(default_config(), n_tx=1, n_rx=1, n_cue=1, n_d2d=2)
    # zero BS->CUE and BS->D2D channels make the CUE term identically zero
    # and decouple the pairs from the covariance blocks
    amp = np.array([[1.0e-2, 1.5e-3],
                    [1.7e-3, 0.9e-2]])
    ch = ChannelSet(
        bs_to_cue=np.zeros((1, 1), dtype=complex),
        d2d_to_cue=np.zeros((2, 1), dtype=complex),
        d2d_to_d2d=amp.astype(complex),
        bs_to_d2drx=np.zeros((2, 1), dtype=complex),
    )
    exp = ExpansionPoint(
        cov_prev=TransmitCovariance.zeros(1, 1),
        powers_prev=PowerAllocation(np.array([5.0, 5.0])),
    )
    model = build_surrogate(ch, None, exp, cfg)
    sol = solve_surrogate(model, cfg)

    grid = np.linspace(0.0, cfg.d2d_power_budget, grid_points)
    best = -np.inf
    zero_cov = TransmitCovariance.zeros(1, 1)
    rho2 = amp ** 2
    j_prev = np.array([rho2[1, 0] * 5.0 + cfg.comm_noise,
                       rho2[0, 1] * 5.0 + cfg.comm_noise])
    # vectorized surrogate over the (p1, p2) grid
    P1, P2 = np.meshgrid(grid, grid, indexing="ij")
    val = np.zeros_like(P1)
    for d, (own, cross, oth) in enumerate([(rho2[0, 0], rho2[1, 0], P2),
                                           (rho2[1, 1], rho2[0, 1], P1)]):
        mine = P1 if d == 0 else P2
        t = own * mine + cross * oth + cfg.comm_noise
        j = cross * oth + cfg.comm_noise
        phi = (np.log2(j_prev[d])
               + model.deltas[d] * (j - j_prev[d]) / np.log(2.0))
        val += np.log2(t) - phi
    best = float(val.max())
    # sanity: the vectorized grid matches the model's own evaluator somewhere
    i, j = np.unravel_index(val.argmax(), val.shape)
    check = model.surrogate_objective(
        zero_cov, PowerAllocation(np.array([grid[i], grid[j]])))
    assert abs(check - best) < 1e-9 * max(1.0, abs(best))
    return sol.objective, best


def zf_route_equivalence(n_instances: int = 20, seed0: int = 0):
    """Null-space parameterization vs explicit trace equalities: both encode
    the same feasible set, so the surrogate optima must agree. Returns a list
    of (objective_basis_route, objective_equality_route) pairs."""
    cfg = replace(default_config(), n_tx=4, n_rx=4, n_cue=2, n_d2d=1)
    out = []
    for seed in range(seed0, seed0 + n_instances):
        geo = sample_geometry(cfg, RngStream(seed, "geometry"))
        ch = sample_channels(cfg, geo, RngStream(seed, "fading"))
        env = build_radar_environment(cfg)
        basis = zf_nullspace_basis(ch, cfg)
        exp = initialize(ch, env, cfg, zf_basis=basis)
        q = sensing_constraint_coeff(env, exp.cov_prev)
        a = solve_surrogate(build_surrogate(ch, q, exp, cfg, basis), cfg)
        b = solve_surrogate(
            build_surrogate(ch, q, exp, cfg, None, zf_equalities=True), cfg)
        # the equality route has no strictly interior point, so the solver
        # may only certify reduced accuracy there; the objectives still agree
        ok = ("optimal", "max-iter")
        assert a.status == "optimal" and b.status in ok, (seed, a.status,
                                                          b.status)
        out.append((a.objective, b.objective))
    return out
