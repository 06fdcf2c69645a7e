"""Joint state-space estimate of glider trajectory and current profile.

The glider state at each epoch is ``[east, north, east_rate, north_rate]``
with a constant-velocity process model driven by white acceleration noise.
GPS fixes at the first and last epoch, the ADCP relative velocities, and
the through-the-water velocity series are fused with the process model in
one sparse least-squares problem over the stacked states and the east/north
current profiles.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .domain import CurrentProfileEstimate, DiveRecord, GpsFix, VelocityGrids
from .inversion import build_grids
from .operators import adjacent_difference, build_linear_interp_matrix, build_subsample_matrix
from .sparse_lsq import LsqBlock, LsqSolution, solve

log = logging.getLogger(__name__)

NSTATE = 4


@dataclass(frozen=True)
class StateSpaceConfig:
    """Weights of the joint problem.

    ``eta1`` weights the ADCP terms, ``eta2`` the OTG/TTW comparison and
    ``eta3`` the adjacent-difference smoothing of the current profiles.
    ``sigma_x0`` holds the initial position and velocity prior scales.
    ``two_profile`` solves separate descent and ascent current profiles
    tied together at the deepest node, as the inversion does; the default
    is a single profile. ``bottom_match_weight`` is relative to the largest
    data weight.
    """

    sigma_accel: float = 1e-3
    sigma_pos_gps: float = 10.0
    sigma_x0: tuple = (10.0, 0.5)
    eta1: float = 1.0 / 0.03 ** 2
    eta2: float = 1.0 / 0.05 ** 2
    eta3: float = 1.0
    dz: float = 2.0
    two_profile: bool = False
    bottom_match_weight: float = 1e4

    def __post_init__(self):
        object.__setattr__(self, "sigma_x0", tuple(float(s) for s in self.sigma_x0))
        if len(self.sigma_x0) != 2:
            raise ValueError("sigma_x0 must hold (position, velocity) scales")
        for name in ("sigma_accel", "sigma_pos_gps", "eta3", "dz", "bottom_match_weight"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive, got {value}")
        for name in ("eta1", "eta2"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value >= 0):
                raise ValueError(f"{name} must be nonnegative, got {value}")
        if not all(np.isfinite(s) and s > 0 for s in self.sigma_x0):
            raise ValueError("sigma_x0 scales must be positive")


@dataclass
class ProcessModel:
    epochs: np.ndarray
    transitions: np.ndarray  # (N-1, 4, 4), maps epoch k-1 to k
    covariances: np.ndarray  # (N-1, 4, 4)

    def stacked(self):
        """Block bi-diagonal ``G`` (I on the diagonal, -G_k below) and block-diagonal ``Q``.

        The first diagonal block of ``Q`` is left as identity; the prior on
        the first state is supplied separately.
        """
        N = len(self.epochs)
        G = sp.lil_matrix((NSTATE * N, NSTATE * N))
        Q = sp.lil_matrix((NSTATE * N, NSTATE * N))
        G[:NSTATE, :NSTATE] = np.eye(NSTATE)
        Q[:NSTATE, :NSTATE] = np.eye(NSTATE)
        for k in range(1, N):
            r = slice(NSTATE * k, NSTATE * (k + 1))
            G[r, r] = np.eye(NSTATE)
            G[r, slice(NSTATE * (k - 1), NSTATE * k)] = -self.transitions[k - 1]
            Q[r, r] = self.covariances[k - 1]
        return G.tocsr(), Q.tocsr()


def transition(dt: float) -> np.ndarray:
    G = np.eye(NSTATE)
    G[0, 2] = G[1, 3] = dt
    return G


def process_covariance(dt: float, sigma_accel: float) -> np.ndarray:
    """Continuous white-noise-acceleration covariance over ``dt``, per axis."""
    q = sigma_accel ** 2
    Q = np.zeros((NSTATE, NSTATE))
    for pos, vel in ((0, 2), (1, 3)):
        Q[pos, pos] = q * dt ** 3 / 3.0
        Q[pos, vel] = Q[vel, pos] = q * dt ** 2 / 2.0
        Q[vel, vel] = q * dt
    return Q


def build_process_blocks(t_hat, sigma_accel: float = 1e-3) -> ProcessModel:
    t = np.asarray(t_hat, dtype=float)
    if len(t) < 2:
        raise ValueError("need at least two epochs")
    dts = np.diff(t)
    if np.any(dts <= 0):
        raise ValueError("epochs must strictly increase")
    return ProcessModel(epochs=t,
                        transitions=np.array([transition(dt) for dt in dts]),
                        covariances=np.array([process_covariance(dt, sigma_accel) for dt in dts]))


def _whitener(cov: np.ndarray) -> np.ndarray:
    """Matrix W with W^T W = cov^{-1}."""
    L = np.linalg.cholesky(cov)
    return np.linalg.inv(L)


@dataclass
class JointSystem:
    blocks: list[LsqBlock]
    grids: VelocityGrids
    n_unknowns: int
    has_current: bool
    coverage: np.ndarray
    two_profile: bool = False
    coverage_descent: Optional[np.ndarray] = None
    coverage_ascent: Optional[np.ndarray] = None


@dataclass
class JointSolution:
    epochs: np.ndarray
    states: np.ndarray  # (N, 4)
    profile: CurrentProfileEstimate
    residuals: dict[str, np.ndarray]
    condition_estimate: float
    solution: LsqSolution
    grids: VelocityGrids

    @property
    def positions(self) -> np.ndarray:
        return self.states[:, :2]

    @property
    def velocities(self) -> np.ndarray:
        return self.states[:, 2:]


def state_blocks(epochs, gps_start: GpsFix, gps_end: GpsFix, velocity_prior: np.ndarray,
                 config: StateSpaceConfig, n_unknowns: int) -> list[LsqBlock]:
    """Process (with the initial-state prior) and GPS blocks over the first ``4 N`` unknowns."""
    model = build_process_blocks(epochs, config.sigma_accel)
    N = len(model.epochs)
    rows, cols, vals = [], [], []

    def put(r0, c0, mat):
        rr, cc = np.nonzero(mat)
        rows.extend(r0 + rr)
        cols.extend(c0 + cc)
        vals.extend(mat[rr, cc])

    p0, v0 = config.sigma_x0
    W0 = np.diag([1 / p0, 1 / p0, 1 / v0, 1 / v0])
    put(0, 0, W0)
    rhs = np.zeros(NSTATE * N)
    rhs[:NSTATE] = W0 @ np.array([gps_start.east, gps_start.north, velocity_prior[0], velocity_prior[1]])
    for k in range(1, N):
        W = _whitener(model.covariances[k - 1])
        put(NSTATE * k, NSTATE * k, W)
        put(NSTATE * k, NSTATE * (k - 1), -W @ model.transitions[k - 1])
    process = sp.csr_matrix((vals, (rows, cols)), shape=(NSTATE * N, n_unknowns))

    last = NSTATE * (N - 1)
    H = sp.csr_matrix((np.ones(4), ([0, 1, 2, 3], [0, 1, last, last + 1])), shape=(4, n_unknowns))
    z = np.array([gps_start.east, gps_start.north, gps_end.east, gps_end.north])
    return [LsqBlock(process, rhs, 1.0, "process"),
            LsqBlock(H, z, 1.0 / config.sigma_pos_gps ** 2, "gps")]


def _select(rows_to_cols, n_rows, n_cols, offset, col_stride=1):
    cols = offset + col_stride * np.asarray(rows_to_cols)
    return sp.csr_matrix((np.ones(n_rows), (np.arange(n_rows), cols)), shape=(n_rows, n_cols))


def _branch_interp(z_hat, depths, descent: np.ndarray, two: bool):
    if not two:
        return build_linear_interp_matrix(z_hat, depths)
    return sp.hstack([build_linear_interp_matrix(z_hat, depths, descent),
                      build_linear_interp_matrix(z_hat, depths, ~descent)], format="csr")


def _coverage(m) -> np.ndarray:
    return np.asarray((m != 0).sum(axis=0)).ravel().astype(np.int64)


def assemble_joint(dive: DiveRecord, config: StateSpaceConfig = StateSpaceConfig()) -> JointSystem:
    """Blocks of the joint problem over unknowns ``[x_1 .. x_N; c_u; c_v]``.

    Block names: ``process``, ``gps``, ``adcp_u``, ``adcp_v``, ``ttw_e``,
    ``ttw_n``, ``smooth_u``, ``smooth_v`` and, in two-profile form,
    ``bottom_match``. Terms with zero weight are omitted; if nothing but
    smoothing touches the currents they are dropped from the unknowns
    altogether. In two-profile form each of ``c_u`` and ``c_v`` is the
    descent profile followed by the ascent profile.
    """
    adcp = dive.adcp
    if len(adcp) == 0:
        raise ValueError("no valid ADCP samples")
    grids = build_grids(dive, config.dz)
    N, L = grids.M, grids.L
    if N < 3:
        raise ValueError("temporal grid has fewer than 3 nodes")
    two = bool(config.two_profile)
    P = 2 if two else 1
    has_current = config.eta1 > 0 or config.eta2 > 0
    n = NSTATE * N + (2 * P * L if has_current else 0)
    cu, cv = NSTATE * N, NSTATE * N + P * L

    ttw = dive.ttw.at(grids.t_hat)
    blocks = state_blocks(grids.t_hat, dive.gps_start, dive.gps_end, ttw[0], config, n)
    if not has_current:
        return JointSystem(blocks, grids, n, False, np.zeros(L, dtype=np.int64), two)

    K = len(adcp)
    epoch_of_sample = build_subsample_matrix(grids.t_hat, adcp.t).indices
    Ac = _branch_interp(grids.z_hat, adcp.z, adcp.is_descent(), two)
    per_branch = [_coverage(Ac[:, b * L:(b + 1) * L]) for b in range(P)]
    coverage = per_branch[0] if not two else per_branch[0] + per_branch[1]

    def on_u(m):
        return sp.hstack([sp.csr_matrix((m.shape[0], cu)), m, sp.csr_matrix((m.shape[0], P * L))])

    def on_v(m):
        return sp.hstack([sp.csr_matrix((m.shape[0], cv)), m])

    if config.eta1 > 0:
        Au = _select(epoch_of_sample, K, n, 2, NSTATE)
        Av = _select(epoch_of_sample, K, n, 3, NSTATE)
        blocks.append(LsqBlock(on_u(Ac) - Au, adcp.u_rel, config.eta1, "adcp_u"))
        blocks.append(LsqBlock(on_v(Ac) - Av, adcp.v_rel, config.eta1, "adcp_v"))
    if config.eta2 > 0:
        node_desc = grids.t_hat <= dive.depth.split_time
        Acvel = _branch_interp(grids.z_hat, dive.depth.at(grids.t_hat), node_desc, two)
        idx = np.arange(N)
        Ae = _select(idx, N, n, 2, NSTATE)
        An = _select(idx, N, n, 3, NSTATE)
        blocks.append(LsqBlock(Ae - on_u(Acvel), ttw[:, 0], config.eta2, "ttw_e"))
        blocks.append(LsqBlock(An - on_v(Acvel), ttw[:, 1], config.eta2, "ttw_n"))
    Ar = sp.block_diag([adjacent_difference(L)] * P, format="csr")
    blocks.append(LsqBlock(on_u(Ar), np.zeros(Ar.shape[0]), config.eta3, "smooth_u"))
    blocks.append(LsqBlock(on_v(Ar), np.zeros(Ar.shape[0]), config.eta3, "smooth_v"))
    if two:
        rows = [0, 0, 1, 1]
        cols = [cu + L - 1, cu + 2 * L - 1, cv + L - 1, cv + 2 * L - 1]
        match = sp.csr_matrix(([1.0, -1.0, 1.0, -1.0], (rows, cols)), shape=(2, n))
        weight = config.bottom_match_weight * max(config.eta1, config.eta2, 1.0 / config.sigma_pos_gps ** 2)
        blocks.append(LsqBlock(match, np.zeros(2), weight, "bottom_match"))
    system = JointSystem(blocks, grids, n, True, coverage, two)
    if two:
        system.coverage_descent, system.coverage_ascent = per_branch
    return system


def _unpack_profile(system: JointSystem, c_u: np.ndarray, c_v: np.ndarray) -> CurrentProfileEstimate:
    z_hat, L = system.grids.z_hat, system.grids.L
    if not system.two_profile:
        return CurrentProfileEstimate(z_hat=z_hat, u=c_u, v=c_v, coverage=system.coverage)
    return CurrentProfileEstimate(
        z_hat=z_hat, u=0.5 * (c_u[:L] + c_u[L:]), v=0.5 * (c_v[:L] + c_v[L:]), coverage=system.coverage,
        form="two_profile", u_descent=c_u[:L], v_descent=c_v[:L], u_ascent=c_u[L:], v_ascent=c_v[L:],
        coverage_descent=system.coverage_descent, coverage_ascent=system.coverage_ascent,
    )


def solve_joint(dive: DiveRecord, config: StateSpaceConfig = StateSpaceConfig()) -> JointSolution:
    """Solve the joint problem; the normal matrix is generic sparse, not block tridiagonal."""
    system = assemble_joint(dive, config)
    sol = solve(system.blocks, system.n_unknowns)
    N = system.grids.M
    states = sol.x[:NSTATE * N].reshape(N, NSTATE)
    if system.has_current:
        c = sol.x[NSTATE * N:]
        half = len(c) // 2
        profile = _unpack_profile(system, c[:half], c[half:])
    else:
        log.warning("current profile unobserved (eta1 = eta2 = 0); reporting zeros")
        zeros = np.zeros(system.grids.L)
        profile = CurrentProfileEstimate(z_hat=system.grids.z_hat, u=zeros, v=zeros, coverage=system.coverage)
    return JointSolution(epochs=system.grids.t_hat, states=states, profile=profile,
                         residuals=sol.residual_norms, condition_estimate=sol.normal_matrix_condition_estimate,
                         solution=sol, grids=system.grids)


def smooth_between_fixes(epochs, gps_start: GpsFix, gps_end: GpsFix, velocity_prior,
                         config: StateSpaceConfig = StateSpaceConfig()) -> np.ndarray:
    """Kalman-smoother states (N, 4) using only the process model and the two GPS fixes."""
    epochs = np.asarray(epochs, dtype=float)
    n = NSTATE * len(epochs)
    blocks = state_blocks(epochs, gps_start, gps_end, np.asarray(velocity_prior, dtype=float), config, n)
    return solve(blocks, n).x.reshape(-1, NSTATE)
