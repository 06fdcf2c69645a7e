"""Synthetic glider dives with known ground truth.

The dive is a V-shaped depth trajectory (descent, optional hold at the
bottom, ascent) whose breakpoints fall on the ping clock. The glider moves
over the ground with the ocean current at its depth plus a prescribed
through-the-water velocity; an ADCP records current minus glider velocity in
bins above (or below) the vehicle every ping interval, except for a gap at
the bottom of the dive.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from typing import Optional, Union

import numpy as np
from scipy.special import ndtri

from .domain import (
    ASCENT,
    DESCENT,
    AdcpObservationSet,
    CurrentProfileEstimate,
    DepthSeries,
    DiveRecord,
    GpsFix,
    TtwVelocitySeries,
)
from .operators import depth_grid


class InfeasibleScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class CurrentField:
    """Piecewise-linear (u, v) current between depth knots, constant beyond the ends."""

    depths: tuple
    u: tuple
    v: tuple

    def __post_init__(self):
        d = np.asarray(self.depths, dtype=float)
        if not (len(self.depths) == len(self.u) == len(self.v)) or len(d) == 0:
            raise ValueError("current knots must be nonempty and of equal length")
        if np.any(np.diff(d) <= 0):
            raise ValueError("current knot depths must strictly increase")

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return np.stack([np.interp(z, self.depths, self.u), np.interp(z, self.depths, self.v)], axis=-1)


@dataclass(frozen=True)
class ScenarioSpec:
    dive_duration: float = 3600.0
    max_depth: float = 200.0
    descent_rate: float = 0.125
    ascent_rate: float = 0.125
    ttw_speed: float = 0.25
    heading_descent_deg: float = 0.0
    heading_ascent_deg: Optional[float] = None
    current_depths: tuple = (0.0, 200.0)
    current_u: tuple = (0.15, -0.05)
    current_v: tuple = (-0.05, 0.10)
    current_u_ascent: Optional[tuple] = None
    current_v_ascent: Optional[tuple] = None
    ping_interval: float = 15.0
    bin_size: float = 2.0
    bins_per_ping: int = 6
    blanking_distance: float = 1.0
    facing: str = "up"
    bottom_gap: float = 120.0
    noise_adcp: float = 0.0
    noise_ttw: float = 0.0
    seed: int = 0
    substeps: int = 15

    def __post_init__(self):
        positive = ("dive_duration", "max_depth", "descent_rate", "ascent_rate",
                    "ping_interval", "bin_size")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("ttw_speed", "blanking_distance", "bottom_gap", "noise_adcp", "noise_ttw"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be nonnegative")
        if int(self.bins_per_ping) < 1:
            raise ValueError("bins_per_ping must be >= 1")
        if int(self.substeps) < 1:
            raise ValueError("substeps must be >= 1")
        if self.facing not in ("up", "down"):
            raise ValueError("facing must be 'up' or 'down'")
        for name in ("current_depths", "current_u", "current_v", "current_u_ascent", "current_v_ascent"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, tuple(float(x) for x in value))
        if (self.current_u_ascent is None) != (self.current_v_ascent is None):
            raise ValueError("give both current_u_ascent and current_v_ascent, or neither")
        self.descent_field()
        self.ascent_field()

    def descent_field(self) -> CurrentField:
        return CurrentField(self.current_depths, self.current_u, self.current_v)

    def ascent_field(self) -> Optional[CurrentField]:
        if self.current_u_ascent is None:
            return None
        return CurrentField(self.current_depths, self.current_u_ascent, self.current_v_ascent)

    @classmethod
    def from_mapping(cls, mapping: dict) -> "ScenarioSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(mapping) - known
        if unknown:
            raise KeyError(f"unknown scenario field(s): {', '.join(sorted(unknown))}")
        return cls(**mapping)


@dataclass(frozen=True)
class TruthStates:
    t: np.ndarray
    east: np.ndarray
    north: np.ndarray
    u_g: np.ndarray
    v_g: np.ndarray


@dataclass(frozen=True)
class DiveGeometry:
    total: float
    t_descent: float
    hold: float
    t_ascent: float

    @property
    def split_time(self) -> float:
        return self.t_descent + self.hold


@dataclass(frozen=True)
class SyntheticDive:
    dive: DiveRecord
    truth_profile: CurrentProfileEstimate
    truth_states: TruthStates
    spec: ScenarioSpec
    geometry: DiveGeometry
    drift_displacement: np.ndarray = field(default=None)

    def current_at(self, z, t) -> np.ndarray:
        return _current(self.spec, self.geometry, z, t)

    def truth_profile_on(self, z_hat, two_profile: Optional[bool] = None) -> CurrentProfileEstimate:
        return _truth_profile(self.spec, self.geometry, np.asarray(z_hat, dtype=float), two_profile)


def plan_geometry(spec: ScenarioSpec) -> DiveGeometry:
    """Phase durations rounded to whole ping intervals; the spare time becomes a bottom hold."""
    if spec.max_depth / spec.descent_rate + spec.max_depth / spec.ascent_rate > spec.dive_duration:
        raise InfeasibleScenarioError("descent and ascent do not fit in the dive duration")
    dt = spec.ping_interval
    total = round(spec.dive_duration / dt) * dt
    t_d = max(1, round(spec.max_depth / spec.descent_rate / dt)) * dt
    t_a = max(1, round(spec.max_depth / spec.ascent_rate / dt)) * dt
    hold = total - t_d - t_a
    if hold < 0:
        raise InfeasibleScenarioError("descent and ascent do not fit in the dive duration after rounding to pings")
    return DiveGeometry(total=float(total), t_descent=float(t_d), hold=float(hold), t_ascent=float(t_a))


def _depth(spec: ScenarioSpec, g: DiveGeometry, t) -> np.ndarray:
    knots_t = [0.0, g.t_descent, g.split_time, g.total]
    knots_z = [0.0, spec.max_depth, spec.max_depth, 0.0]
    if g.hold == 0:
        knots_t, knots_z = [0.0, g.t_descent, g.total], [0.0, spec.max_depth, 0.0]
    return np.interp(t, knots_t, knots_z)


def _current(spec: ScenarioSpec, g: DiveGeometry, z, t) -> np.ndarray:
    down = spec.descent_field()(z)
    up_field = spec.ascent_field()
    if up_field is None:
        return down
    alpha = np.clip(np.asarray(t, dtype=float) / g.total, 0.0, 1.0)[..., None]
    return (1.0 - alpha) * down + alpha * up_field(z)


def _descent_time(spec, g, z):
    return np.clip(z / spec.max_depth, 0.0, 1.0) * g.t_descent


def _ascent_time(spec, g, z):
    return g.split_time + (1.0 - np.clip(z / spec.max_depth, 0.0, 1.0)) * g.t_ascent


def _truth_profile(spec, g, z_hat, two_profile) -> CurrentProfileEstimate:
    if two_profile is None:
        two_profile = spec.ascent_field() is not None
    zeros = np.zeros(len(z_hat), dtype=np.int64)
    down = _current(spec, g, z_hat, _descent_time(spec, g, z_hat))
    up = _current(spec, g, z_hat, _ascent_time(spec, g, z_hat))
    mean = 0.5 * (down + up)
    if not two_profile:
        return CurrentProfileEstimate(z_hat=z_hat, u=mean[:, 0], v=mean[:, 1], coverage=zeros)
    return CurrentProfileEstimate(
        z_hat=z_hat, u=mean[:, 0], v=mean[:, 1], coverage=zeros, form="two_profile",
        u_descent=down[:, 0], v_descent=down[:, 1], u_ascent=up[:, 0], v_ascent=up[:, 1],
        coverage_descent=zeros, coverage_ascent=zeros,
    )


def _heading_velocity(speed: float, heading_deg) -> np.ndarray:
    h = np.radians(heading_deg)
    return np.stack([speed * np.sin(h), speed * np.cos(h)], axis=-1)


def _gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    u = rng.random(shape)
    tiny = np.finfo(float).tiny
    return ndtri(np.clip(u, tiny, 1.0 - 2.0 ** -53))


def generate(spec: ScenarioSpec) -> SyntheticDive:
    """Simulate one dive described by ``spec``; deterministic given ``spec.seed``."""
    g = plan_geometry(spec)
    dt = spec.ping_interval
    n_clock = int(round(g.total / dt))
    clock = np.arange(n_clock + 1) * dt
    rng = np.random.Generator(np.random.PCG64(spec.seed))

    heading_up = spec.heading_descent_deg if spec.heading_ascent_deg is None else spec.heading_ascent_deg
    headings = np.where(clock <= g.split_time + 1e-9, spec.heading_descent_deg, heading_up)
    ttw_clock = _heading_velocity(spec.ttw_speed, headings)

    def ttw_truth(t):
        return np.column_stack([np.interp(t, clock, ttw_clock[:, 0]), np.interp(t, clock, ttw_clock[:, 1])])

    def otg_truth(t):
        return _current(spec, g, _depth(spec, g, t), t) + ttw_truth(t)

    # truth trajectory on a refined clock
    fine = np.linspace(0.0, g.total, n_clock * spec.substeps + 1)
    vel_fine = otg_truth(fine)
    drift_fine = vel_fine - ttw_truth(fine)
    steps = np.diff(fine)[:, None]
    pos_fine = np.vstack([np.zeros((1, 2)), np.cumsum(0.5 * steps * (vel_fine[1:] + vel_fine[:-1]), axis=0)])
    drift_disp = np.sum(0.5 * steps * (drift_fine[1:] + drift_fine[:-1]), axis=0)
    every = slice(None, None, spec.substeps)
    truth_states = TruthStates(t=fine[every], east=pos_fine[every, 0], north=pos_fine[every, 1],
                               u_g=vel_fine[every, 0], v_g=vel_fine[every, 1])

    # pings, skipping the bottom gap
    gap = max(spec.bottom_gap, g.hold)
    centre = g.t_descent + 0.5 * g.hold
    ping_t = clock[1:-1]
    ping_t = ping_t[~((ping_t > centre - 0.5 * gap + 1e-9) & (ping_t < centre + 0.5 * gap - 1e-9))]

    z_glider = _depth(spec, g, ping_t)
    offsets = spec.blanking_distance + spec.bin_size * np.arange(int(spec.bins_per_ping))
    sign = -1.0 if spec.facing == "up" else 1.0
    z_bins = z_glider[:, None] + sign * offsets[None, :]
    ping_idx = np.broadcast_to(np.arange(len(ping_t))[:, None], z_bins.shape)
    t_bins = np.broadcast_to(ping_t[:, None], z_bins.shape)
    valid = z_bins >= 0.0
    zk, tk, pk = z_bins[valid], t_bins[valid], ping_idx[valid]
    rel = _current(spec, g, zk, tk) - otg_truth(tk)
    rel = rel + spec.noise_adcp * _gaussian(rng, rel.shape)
    cast = np.where(tk <= g.split_time + 1e-9, DESCENT, ASCENT)

    ttw_meas = ttw_clock + spec.noise_ttw * _gaussian(rng, ttw_clock.shape)
    depth_t = np.linspace(0.0, g.total, 3 * n_clock + 1)

    dive = DiveRecord(
        adcp=AdcpObservationSet(u_rel=rel[:, 0], v_rel=rel[:, 1], t=tk, z=zk, ping_index=pk, cast_label=cast),
        ttw=TtwVelocitySeries(t=clock, u_ttw=ttw_meas[:, 0], v_ttw=ttw_meas[:, 1]),
        depth=DepthSeries(t=depth_t, z=_depth(spec, g, depth_t)),
        gps_start=GpsFix(0.0, 0.0, 0.0),
        gps_end=GpsFix(g.total, pos_fine[-1, 0], pos_fine[-1, 1]),
    )
    z_truth = depth_grid(spec.max_depth, spec.bin_size)
    return SyntheticDive(dive=dive, truth_profile=_truth_profile(spec, g, z_truth, None),
                         truth_states=truth_states, spec=spec, geometry=g, drift_displacement=drift_disp)


def coverage_histogram(dive: Union[SyntheticDive, DiveRecord], dz: float, cast: Optional[str] = None,
                       n_nodes: Optional[int] = None) -> np.ndarray:
    """Number of distinct pings with at least one sample in each depth cell.

    Cells are centred on the nodes ``0, dz, 2 dz, ...``. ``cast`` restricts
    the count to descent (``"D"``) or ascent (``"A"``) samples.
    """
    record = dive.dive if isinstance(dive, SyntheticDive) else dive
    adcp = record.adcp
    if n_nodes is None:
        n_nodes = len(depth_grid(float(record.depth.z.max()), dz))
    keep = np.ones(len(adcp), dtype=bool) if cast is None else adcp.cast_label == cast
    # half-up so bins lying on a cell edge never double up
    cells = np.floor(adcp.z[keep] / dz + 0.5).astype(np.int64)
    pings = adcp.ping_index[keep]
    inside = (cells >= 0) & (cells < n_nodes)
    pairs = np.unique(np.column_stack([cells[inside], pings[inside]]), axis=0)
    return np.bincount(pairs[:, 0], minlength=n_nodes) if len(pairs) else np.zeros(n_nodes, dtype=np.int64)


def scenario_with(spec: ScenarioSpec, **changes) -> ScenarioSpec:
    return replace(spec, **changes)
