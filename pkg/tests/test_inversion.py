import dataclasses

import numpy as np
import pytest

from conftest import covered_max_error
from gliderdec.inversion import (
    InversionConfig,
    assemble_system,
    integrate_displacement,
    invert,
    resolve_two_profile,
)
from gliderdec.simulator import ScenarioSpec, generate
from gliderdec.sparse_lsq import SingularSystemError, dense_oracle_solve, solve

TIGHT = InversionConfig(sigma_adcp=1e-4, sigma_ttw=1e-4, sigma_gps=1e-4)


def blocks_by_name(system):
    return {b.name: b for b in system.blocks}


def test_block_shapes(default_dive):
    dive = default_dive.dive
    system = assemble_system(dive)
    M, L = system.grids.M, system.grids.L
    assert system.n_unknowns == M + L
    b = blocks_by_name(system)
    assert list(b) == ["adcp", "gps", "ttw", "smooth_glider", "smooth_ocean"]
    assert b["adcp"].matrix.shape == (len(dive.adcp), M + L)
    assert b["gps"].matrix.shape == (1, M + L)
    assert b["ttw"].matrix.shape == (M, M + L)
    assert b["smooth_glider"].matrix.shape == (M - 2, M + L)
    assert b["smooth_ocean"].matrix.shape == (L - 2, M + L)
    assert b["adcp"].rhs.shape == (len(dive.adcp), 2)


def test_zero_lambda_drops_blocks(default_dive):
    system = assemble_system(default_dive.dive, InversionConfig(lambda_g=0.0))
    assert "smooth_glider" not in blocks_by_name(system)


def test_each_adcp_row_sums_to_zero(default_dive):
    # -1 on one glider node plus an interpolation row that sums to one
    A = blocks_by_name(assemble_system(default_dive.dive))["adcp"].matrix
    np.testing.assert_allclose(np.asarray(A.sum(axis=1)).ravel(), 0.0, atol=1e-14)


def test_two_profile_layout(default_dive):
    dive = default_dive.dive
    system = assemble_system(dive, InversionConfig(two_profile=True))
    M, L = system.grids.M, system.grids.L
    assert system.two_profile
    assert system.n_unknowns == M + 2 * L
    b = blocks_by_name(system)
    assert b["bottom_match"].matrix.shape == (1, M + 2 * L)
    row = b["bottom_match"].matrix.toarray().ravel()
    assert row[M + L - 1] == 1.0 and row[M + 2 * L - 1] == -1.0 and np.count_nonzero(row) == 2
    A = b["adcp"].matrix.tocsr()
    down = dive.adcp.is_descent()
    # descent samples touch only descent columns and vice versa
    assert A[~down][:, M:M + L].nnz == 0
    assert A[down][:, M + L:].nnz == 0


def test_two_profile_auto_by_duration(default_dive):
    assert not resolve_two_profile(default_dive.dive, InversionConfig())
    long = generate(ScenarioSpec(dive_duration=7800.0, max_depth=300.0, descent_rate=0.1, ascent_rate=0.1))
    assert resolve_two_profile(long.dive, InversionConfig())
    assert not resolve_two_profile(long.dive, InversionConfig(two_profile=False))


def test_noise_free_recovery(default_dive):
    result = invert(default_dive.dive, TIGHT)
    truth = default_dive.truth_profile_on(result.profile.z_hat)
    assert covered_max_error(result.profile, truth) <= 1e-6


def test_zero_current(zero_current_dive):
    result = invert(zero_current_dive.dive, TIGHT)
    cov = result.profile.coverage > 0
    assert np.max(np.abs(result.profile.u[cov])) <= 1e-6
    assert np.max(np.abs(result.profile.v[cov])) <= 1e-6
    np.testing.assert_allclose(result.otg, result.ttw_at_nodes, atol=1e-6)


def test_uniform_weight_scaling_invariant(noisy_dive):
    base = InversionConfig()
    a = invert(noisy_dive.dive, base)
    for factor in (1e-3, 7.0, 1e4):
        b = invert(noisy_dive.dive, base.scaled(factor))
        assert np.max(np.abs(a.solution.x - b.solution.x)) <= 1e-10 * (1 + np.max(np.abs(a.solution.x)))


def test_integrate_displacement_constant_velocity(default_dive):
    result = invert(default_dive.dive)
    t = result.grids.t_hat
    fake = dataclasses.replace(result, glider_velocity=dataclasses.replace(
        result.glider_velocity, u_g=np.full(len(t), 0.2), v_g=np.zeros(len(t))))
    span = t[-1] - t[0]
    np.testing.assert_allclose(integrate_displacement(fake), [0.2 * span, 0.0], atol=1e-9)


def test_integrate_displacement_720m():
    from gliderdec.domain import GliderVelocitySeries, VelocityGrids
    from gliderdec.inversion import InversionResult

    t = np.arange(0.0, 3601.0, 15.0)
    grids = VelocityGrids(t_hat=t, z_hat=np.array([0.0, 2.0]), dz=2.0)
    fake = InversionResult(glider_velocity=GliderVelocitySeries(t, np.full(len(t), 0.2), np.zeros(len(t))),
                           profile=None, drift_velocity=None, residuals={}, grids=grids, ttw_at_nodes=None,
                           condition_estimate=1.0, solution=None)
    np.testing.assert_allclose(integrate_displacement(fake), [720.0, 0.0], rtol=1e-14, atol=1e-12)


def test_gps_closure_within_five_sigma(noisy_dive):
    config = InversionConfig()
    result = invert(noisy_dive.dive, config)
    miss = integrate_displacement(result) - noisy_dive.dive.displacement
    assert np.linalg.norm(miss) <= 5 * config.sigma_gps


def test_tight_gps_closes(noisy_dive):
    result = invert(noisy_dive.dive, InversionConfig(sigma_gps=1.0))
    assert np.linalg.norm(integrate_displacement(result) - noisy_dive.dive.displacement) <= 3.0


def test_velocity_identity_holds_to_ttw_residual(noisy_dive):
    result = invert(noisy_dive.dive)
    gap = result.otg - result.drift_velocity - result.ttw_at_nodes
    norms = result.residuals["ttw"]
    assert np.all(np.abs(gap) <= norms[None, :] + 1e-10)


def test_uncovered_nodes_without_smoothing_are_singular(default_dive):
    with pytest.raises(SingularSystemError):
        invert(default_dive.dive, InversionConfig(lambda_o=0.0))


def test_coverage_counts_samples(default_dive):
    system = assemble_system(default_dive.dive)
    assert system.coverage.sum() > 0
    # the deepest node sits below every sample
    assert system.coverage[-1] == 0


def test_bottom_match(default_dive):
    result = invert(default_dive.dive, InversionConfig(two_profile=True))
    p = result.profile
    assert p.form == "two_profile"
    assert abs(p.u_descent[-1] - p.u_ascent[-1]) <= 1e-4
    assert abs(p.v_descent[-1] - p.v_ascent[-1]) <= 1e-4
    np.testing.assert_allclose(p.u, 0.5 * (p.u_descent + p.u_ascent))


def test_ttw_residual_smoothing_target(noisy_dive):
    system = assemble_system(noisy_dive.dive, InversionConfig(smoothing_target="ttw_residual"))
    block = blocks_by_name(system)["smooth_glider"]
    # it penalises curvature of u_g - drift, so OTG equal to the drift costs nothing
    M = system.grids.M
    ocean = np.random.default_rng(0).normal(size=(system.n_unknowns - M, 2))
    x = np.vstack([system.drift_operator @ ocean, ocean])
    np.testing.assert_allclose(block.matrix @ x, 0.0, atol=1e-12)
    result = invert(noisy_dive.dive, InversionConfig(smoothing_target="ttw_residual"))
    assert np.all(np.isfinite(result.profile.u))


def test_matches_dense_oracle(toy_dive):
    for config in (InversionConfig(), InversionConfig(two_profile=True, bottom_match_weight=1.0)):
        system = assemble_system(toy_dive.dive, config)
        a = solve(system.blocks, system.n_unknowns).x
        b = dense_oracle_solve(system.blocks, system.n_unknowns).x
        assert np.linalg.norm(a - b) <= 1e-8 * np.linalg.norm(b)


def test_invalid_config():
    with pytest.raises(ValueError):
        InversionConfig(sigma_adcp=0.0)
    with pytest.raises(ValueError):
        InversionConfig(lambda_o=-1.0)
    with pytest.raises(ValueError):
        InversionConfig(smoothing_target="other")
