"""Global linear inversion for one dive.

Unknowns are the glider over-the-ground velocity on a temporal grid and the
ocean velocity on a uniform depth grid (or separate descent and ascent
profiles). East and north are solved as two right-hand sides of the same
system.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .domain import CurrentProfileEstimate, DiveRecord, GliderVelocitySeries, VelocityGrids
from .operators import (
    build_linear_interp_matrix,
    build_subsample_matrix,
    build_time_grid,
    depth_grid,
    second_difference,
    trapezoid_weights,
)
from .sparse_lsq import LsqBlock, LsqSolution, solve

TWO_PROFILE_AUTO_DURATION = 2 * 3600.0


@dataclass(frozen=True)
class InversionConfig:
    """Weights of the inversion.

    Data blocks are weighted by inverse variances. ``lambda_g`` and
    ``lambda_o`` weight the squared second differences of the glider and
    ocean velocities; zero drops the block. ``bottom_match_weight`` is
    relative to the largest data weight. ``two_profile=None`` picks the
    two-profile form for dives longer than two hours.
    """

    dz: float = 2.0
    sigma_adcp: float = 0.03
    sigma_ttw: float = 0.05
    sigma_gps: float = 10.0
    lambda_g: float = 1.0
    lambda_o: float = 1.0
    two_profile: Optional[bool] = None
    bottom_match_weight: float = 1e8
    smoothing_target: str = "otg"

    def __post_init__(self):
        for name in ("dz", "sigma_adcp", "sigma_ttw", "sigma_gps", "bottom_match_weight"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive, got {value}")
        for name in ("lambda_g", "lambda_o"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value >= 0):
                raise ValueError(f"{name} must be nonnegative, got {value}")
        if self.smoothing_target not in ("otg", "ttw_residual"):
            raise ValueError(f"smoothing_target must be 'otg' or 'ttw_residual', got {self.smoothing_target!r}")

    def scaled(self, factor: float) -> "InversionConfig":
        """Every block weight multiplied by ``factor``; the minimizer is unchanged."""
        s = 1.0 / np.sqrt(factor)
        return InversionConfig(dz=self.dz, sigma_adcp=self.sigma_adcp * s, sigma_ttw=self.sigma_ttw * s,
                               sigma_gps=self.sigma_gps * s, lambda_g=self.lambda_g * factor,
                               lambda_o=self.lambda_o * factor, two_profile=self.two_profile,
                               bottom_match_weight=self.bottom_match_weight,
                               smoothing_target=self.smoothing_target)


@dataclass
class AssembledSystem:
    blocks: list[LsqBlock]
    grids: VelocityGrids
    n_unknowns: int
    two_profile: bool
    ttw_at_nodes: np.ndarray
    glider_depth_at_nodes: np.ndarray
    node_is_descent: np.ndarray
    coverage: np.ndarray
    coverage_descent: Optional[np.ndarray] = None
    coverage_ascent: Optional[np.ndarray] = None
    drift_operator: sp.csr_matrix = field(default=None)


@dataclass
class InversionResult:
    glider_velocity: GliderVelocitySeries
    profile: CurrentProfileEstimate
    drift_velocity: np.ndarray
    residuals: dict[str, np.ndarray]
    grids: VelocityGrids
    ttw_at_nodes: np.ndarray
    condition_estimate: float
    solution: LsqSolution

    @property
    def otg(self) -> np.ndarray:
        return np.column_stack([self.glider_velocity.u_g, self.glider_velocity.v_g])


def build_grids(dive: DiveRecord, dz: float) -> VelocityGrids:
    t_hat = build_time_grid(dive.adcp.ping_times(), (dive.gps_start.time, dive.gps_end.time))
    z_glider = dive.depth.at(t_hat)
    z_max = max(float(dive.adcp.z.max()), float(z_glider.max()), float(dive.depth.z.max()))
    return VelocityGrids(t_hat=t_hat, z_hat=depth_grid(z_max, dz), dz=float(dz))


def _coverage(Hz: sp.csr_matrix) -> np.ndarray:
    return np.asarray((Hz != 0).sum(axis=0)).ravel().astype(np.int64)


def resolve_two_profile(dive: DiveRecord, config: InversionConfig) -> bool:
    if config.two_profile is None:
        return dive.duration > TWO_PROFILE_AUTO_DURATION
    return bool(config.two_profile)


def assemble_system(dive: DiveRecord, config: InversionConfig = InversionConfig()) -> AssembledSystem:
    """Stack the data, constraint and regularization blocks of the inversion.

    Unknowns are ``[u_g; u_o]`` or, in two-profile form,
    ``[u_g; u_descent; u_ascent]``. Block order: ``adcp``, ``gps``, ``ttw``,
    ``smooth_glider``, ``smooth_ocean`` (one per profile), ``bottom_match``.
    """
    adcp = dive.adcp
    if len(adcp) == 0:
        raise ValueError("no valid ADCP samples")
    if len(adcp.ping_times()) < 2:
        raise ValueError("need at least two distinct ping times")
    grids = build_grids(dive, config.dz)
    M, L = grids.M, grids.L
    if M < 3:
        raise ValueError("temporal grid has fewer than 3 nodes")
    two = resolve_two_profile(dive, config)

    Ht = build_subsample_matrix(grids.t_hat, adcp.t)
    z_glider = dive.depth.at(grids.t_hat)
    up = dive.ttw.at(grids.t_hat)
    node_desc = grids.t_hat <= dive.depth.split_time
    sample_desc = adcp.is_descent()
    I_M = sp.identity(M, format="csr")

    if two:
        Hzd = build_linear_interp_matrix(grids.z_hat, adcp.z, sample_desc)
        Hzu = build_linear_interp_matrix(grids.z_hat, adcp.z, ~sample_desc)
        H0d = build_linear_interp_matrix(grids.z_hat, z_glider, node_desc)
        H0u = build_linear_interp_matrix(grids.z_hat, z_glider, ~node_desc)
        ocean_adcp = sp.hstack([Hzd, Hzu])
        drift = sp.hstack([H0d, H0u])
        n_ocean = 2 * L
    else:
        Hz = build_linear_interp_matrix(grids.z_hat, adcp.z)
        ocean_adcp = Hz
        drift = build_linear_interp_matrix(grids.z_hat, z_glider)
        n_ocean = L
    n = M + n_ocean

    w_adcp = 1.0 / config.sigma_adcp ** 2
    w_ttw = 1.0 / config.sigma_ttw ** 2
    w_gps = 1.0 / config.sigma_gps ** 2
    obs = np.column_stack([adcp.u_rel, adcp.v_rel])
    w = trapezoid_weights(grids.t_hat)

    blocks = [
        LsqBlock(sp.hstack([-Ht, ocean_adcp]), obs, w_adcp, "adcp"),
        LsqBlock(sp.hstack([sp.csr_matrix(w[None, :]), sp.csr_matrix((1, n_ocean))]),
                 dive.displacement[None, :], w_gps, "gps"),
        LsqBlock(sp.hstack([-I_M, drift]), -up, w_ttw, "ttw"),
    ]
    D2t = second_difference(M)
    if config.lambda_g > 0:
        if config.smoothing_target == "otg":
            smooth_g = sp.hstack([D2t, sp.csr_matrix((M - 2, n_ocean))])
        else:
            smooth_g = D2t @ sp.hstack([-I_M, drift])
        blocks.append(LsqBlock(smooth_g, np.zeros((M - 2, 2)), config.lambda_g, "smooth_glider"))
    if config.lambda_o > 0:
        D2z = second_difference(L)
        pad = sp.csr_matrix((L - 2, M))
        if two:
            empty = sp.csr_matrix((L - 2, L))
            blocks.append(LsqBlock(sp.hstack([pad, D2z, empty]), np.zeros((L - 2, 2)), config.lambda_o,
                                   "smooth_ocean_descent"))
            blocks.append(LsqBlock(sp.hstack([pad, empty, D2z]), np.zeros((L - 2, 2)), config.lambda_o,
                                   "smooth_ocean_ascent"))
        else:
            blocks.append(LsqBlock(sp.hstack([pad, D2z]), np.zeros((L - 2, 2)), config.lambda_o, "smooth_ocean"))
    if two:
        row = np.zeros((1, n))
        row[0, M + L - 1] = 1.0
        row[0, M + 2 * L - 1] = -1.0
        weight = config.bottom_match_weight * max(w_adcp, w_ttw, w_gps)
        blocks.append(LsqBlock(sp.csr_matrix(row), np.zeros((1, 2)), weight, "bottom_match"))

    system = AssembledSystem(blocks=blocks, grids=grids, n_unknowns=n, two_profile=two, ttw_at_nodes=up,
                             glider_depth_at_nodes=z_glider, node_is_descent=node_desc,
                             coverage=_coverage(ocean_adcp[:, :L]) if not two else None,
                             drift_operator=drift.tocsr())
    if two:
        system.coverage_descent = _coverage(Hzd)
        system.coverage_ascent = _coverage(Hzu)
        system.coverage = system.coverage_descent + system.coverage_ascent
    return system


def unpack_profile(system: AssembledSystem, x: np.ndarray) -> CurrentProfileEstimate:
    M, L = system.grids.M, system.grids.L
    z_hat = system.grids.z_hat
    if not system.two_profile:
        return CurrentProfileEstimate(z_hat=z_hat, u=x[M:, 0], v=x[M:, 1], coverage=system.coverage)
    down = x[M:M + L]
    up = x[M + L:]
    mean = 0.5 * (down + up)
    return CurrentProfileEstimate(
        z_hat=z_hat, u=mean[:, 0], v=mean[:, 1], coverage=system.coverage, form="two_profile",
        u_descent=down[:, 0], v_descent=down[:, 1], u_ascent=up[:, 0], v_ascent=up[:, 1],
        coverage_descent=system.coverage_descent, coverage_ascent=system.coverage_ascent,
    )


def invert(dive: DiveRecord, config: InversionConfig = InversionConfig()) -> InversionResult:
    """Estimate the ocean current profile and glider OTG velocity for one dive."""
    system = assemble_system(dive, config)
    sol = solve(system.blocks, system.n_unknowns)
    x = sol.x
    M = system.grids.M
    ocean = x[M:]
    return InversionResult(
        glider_velocity=GliderVelocitySeries(t_hat=system.grids.t_hat, u_g=x[:M, 0], v_g=x[:M, 1]),
        profile=unpack_profile(system, x),
        drift_velocity=system.drift_operator @ ocean,
        residuals=sol.residual_norms,
        grids=system.grids,
        ttw_at_nodes=system.ttw_at_nodes,
        condition_estimate=sol.normal_matrix_condition_estimate,
        solution=sol,
    )


def integrate_displacement(result: InversionResult) -> np.ndarray:
    """(east, north) displacement from trapezoid integration of the OTG velocity."""
    w = trapezoid_weights(result.grids.t_hat)
    return np.array([w @ result.glider_velocity.u_g, w @ result.glider_velocity.v_g])
