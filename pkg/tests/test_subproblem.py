from dataclasses import replace

import numpy as np
import pytest

from d2d_isac import (ExpansionPoint, PowerAllocation, RngStream,
                      TransmitCovariance, build_surrogate, default_config,
                      sample_channels, sample_geometry, sensing_constraint_coeff,
                      sinr_cue, sinr_d2d, solve_surrogate, zf_nullspace_basis)
from d2d_isac.subproblem import describe, embed_hermitian, unembed_hermitian

from oracles import d2d_power_grid_oracle, scalar_bs_oracle, zf_route_equivalence


def random_hermitian(gen, n):
    A = gen.standard_normal((n, n)) + 1j * gen.standard_normal((n, n))
    return 0.5 * (A + A.conj().T)


class TestEmbedding:
    def test_round_trip(self):
        gen = np.random.default_rng(0)
        for n in (1, 3, 8):
            A = random_hermitian(gen, n)
            S = embed_hermitian(A)
            assert S.shape == (2 * n, 2 * n)
            np.testing.assert_allclose(S, S.T, atol=1e-14)
            np.testing.assert_allclose(unembed_hermitian(S), A, atol=1e-14)

    def test_trace_doubles(self):
        A = random_hermitian(np.random.default_rng(1), 4)
        assert np.trace(embed_hermitian(A)) == pytest.approx(
            2 * np.real(np.trace(A)))

    def test_psd_preserved(self):
        gen = np.random.default_rng(2)
        B = gen.standard_normal((4, 4)) + 1j * gen.standard_normal((4, 4))
        A = B @ B.conj().T
        assert np.linalg.eigvalsh(embed_hermitian(A))[0] >= -1e-12

    def test_unembed_symmetrizes(self):
        # an unstructured symmetric matrix maps to a valid Hermitian average
        gen = np.random.default_rng(3)
        S = gen.standard_normal((6, 6))
        S = 0.5 * (S + S.T)
        W = unembed_hermitian(S)
        np.testing.assert_allclose(W, W.conj().T, atol=1e-14)
        np.testing.assert_allclose(unembed_hermitian(embed_hermitian(W)), W,
                                   atol=1e-14)


@pytest.fixture(scope="module")
def expansion_setup(realization, random_covariance):
    ch, env = realization
    cfg = default_config()
    gen = np.random.default_rng(42)
    cov = random_covariance(gen, cfg.n_cue, cfg.n_tx, 0.9 * cfg.bs_power_budget)
    pa = PowerAllocation(gen.uniform(0.0, cfg.d2d_power_budget, cfg.n_d2d))
    exp = ExpansionPoint(cov_prev=cov, powers_prev=pa)
    model = build_surrogate(ch, None, exp, cfg)
    return cfg, ch, env, exp, model


class TestSurrogateModel:
    def test_taylor_coefficients_match_sinr_denominators(self, expansion_setup):
        cfg, ch, env, exp, model = expansion_setup
        cov, pa = exp.cov_prev, exp.powers_prev
        for k in range(cfg.n_cue):
            desired = float(np.real(
                ch.bs_to_cue[k].conj() @ cov.per_cue[k] @ ch.bs_to_cue[k]))
            denom = desired / sinr_cue(k, ch, cov, pa, cfg.comm_noise)
            assert model.betas[k] == pytest.approx(1.0 / denom, rel=1e-10)
        for d in range(cfg.n_d2d):
            desired = pa.d2d_powers[d] * abs(ch.d2d_to_d2d[d, d]) ** 2
            denom = desired / sinr_d2d(d, ch, cov, pa, cfg.comm_noise)
            assert model.deltas[d] == pytest.approx(1.0 / denom, rel=1e-10)

    def test_tight_at_expansion(self, expansion_setup):
        _, _, _, exp, model = expansion_setup
        s = model.surrogate_objective(exp.cov_prev, exp.powers_prev)
        t = model.true_objective(exp.cov_prev, exp.powers_prev)
        assert s == pytest.approx(t, rel=1e-9)

    def test_global_minorant(self, expansion_setup, random_covariance):
        cfg, _, _, _, model = expansion_setup
        gen = np.random.default_rng(7)
        for _ in range(100):
            cov = random_covariance(gen, cfg.n_cue, cfg.n_tx,
                                    gen.uniform(0.0, 1.0) * cfg.bs_power_budget)
            pa = PowerAllocation(gen.uniform(0.0, cfg.d2d_power_budget,
                                             cfg.n_d2d))
            s = model.surrogate_objective(cov, pa)
            t = model.true_objective(cov, pa)
            assert s <= t + 1e-9 * max(1.0, abs(t))

    def test_expansion_must_be_feasible(self, expansion_setup, random_covariance):
        cfg, ch, _, _, _ = expansion_setup
        too_hot = random_covariance(np.random.default_rng(8), cfg.n_cue,
                                    cfg.n_tx, 2.0 * cfg.bs_power_budget)
        exp = ExpansionPoint(cov_prev=too_hot,
                             powers_prev=PowerAllocation.zeros(cfg.n_d2d))
        with pytest.raises(ValueError, match="budget"):
            build_surrogate(ch, None, exp, cfg)

    def test_sensing_value_requires_constraint(self, expansion_setup):
        _, _, _, exp, model = expansion_setup
        with pytest.raises(ValueError):
            model.sensing_value(exp.cov_prev)

    def test_describe_smoke(self, expansion_setup):
        _, _, _, _, model = expansion_setup
        text = describe(model)
        assert "K=3" in text and "D=2" in text


class TestZfBasis:
    def test_orthonormal_null_space(self, realization, cfg):
        ch, _ = realization
        V = zf_nullspace_basis(ch, cfg)
        assert V.shape == (cfg.n_tx, cfg.n_tx - cfg.n_d2d)
        np.testing.assert_allclose(V.conj().T @ V,
                                   np.eye(cfg.n_tx - cfg.n_d2d), atol=1e-12)
        residual = np.abs(ch.bs_to_d2drx.conj() @ V).max()
        assert residual < 1e-12

    def test_needs_spare_antennas(self):
        cfg = replace(default_config(), n_tx=2, n_rx=2)
        geo = sample_geometry(cfg, RngStream(0, "geometry"))
        ch = sample_channels(cfg, geo, RngStream(0, "fading"))
        with pytest.raises(ValueError):
            zf_nullspace_basis(ch, cfg)


class TestSolver:
    def test_scalar_oracle(self):
        sol, expected, budget = scalar_bs_oracle()
        assert sol.status == "optimal"
        total = float(np.real(np.trace(sol.cov.total)))
        user = float(np.real(np.trace(sol.cov.per_cue[0])))
        assert total == pytest.approx(budget, rel=1e-4)
        assert user == pytest.approx(budget, rel=1e-4)
        assert sol.objective == pytest.approx(expected, rel=1e-6)

    def test_power_grid_oracle(self):
        solver_obj, grid_obj = d2d_power_grid_oracle()
        assert solver_obj == pytest.approx(grid_obj, abs=1e-4)
        assert solver_obj >= grid_obj - 1e-6   # grid points are feasible

    def test_zf_routes_agree(self):
        for a, b in zf_route_equivalence(n_instances=3):
            assert a == pytest.approx(b, rel=1e-4)

    def test_solution_respects_hard_constraints(self, realization):
        ch, env = realization
        cfg = default_config()
        from d2d_isac.optimizer import initialize
        exp = initialize(ch, env, cfg)
        q = sensing_constraint_coeff(env, exp.cov_prev)
        model = build_surrogate(ch, q, exp, cfg)
        sol = solve_surrogate(model, cfg)
        assert sol.status == "optimal"
        assert float(np.real(np.trace(sol.cov.total))) <= cfg.bs_power_budget * (
            1 + 1e-9)
        assert np.all(sol.powers.d2d_powers >= 0)
        assert np.all(sol.powers.d2d_powers <= cfg.d2d_power_budget)
        # linearized sensing constraint satisfied at the solution
        assert model.sensing_value(sol.cov) >= cfg.scnr_threshold_linear * (
            1 - 1e-6)
        # the step never degrades the surrogate relative to the expansion
        assert sol.objective >= model.surrogate_objective(
            exp.cov_prev, exp.powers_prev) - 1e-8

    def test_infeasible_threshold_detected(self, realization):
        ch, env = realization
        cfg = replace(default_config(), scnr_threshold_db=100.0)
        from d2d_isac.optimizer import initialize
        exp = initialize(ch, env, replace(cfg, scnr_threshold_db=30.0))
        q = sensing_constraint_coeff(env, exp.cov_prev)
        model = build_surrogate(ch, q, exp, cfg)
        sol = solve_surrogate(model, cfg)
        assert sol.status == "infeasible"
        assert sol.max_achievable_sensing is not None
        assert sol.max_achievable_sensing < cfg.scnr_threshold_linear
