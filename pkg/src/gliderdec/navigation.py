"""Trajectory reconstruction and comparison.

Three position estimates for one dive: dead reckoning from the TTW
velocity, dead reckoning corrected by a uniform depth-averaged current, and
the ADCP-informed positions of the joint state-space solution.
"""

from __future__ import annotations

import numpy as np

from .domain import GpsFix, Trajectory, TtwVelocitySeries
from .statespace import JointSolution

SPAN_TOL = 1e-9


def _cumulative_trapezoid(t: np.ndarray, f: np.ndarray) -> np.ndarray:
    out = np.zeros_like(f)
    out[1:] = np.cumsum(0.5 * np.diff(t)[:, None] * (f[1:] + f[:-1]), axis=0)
    return out


def dead_reckon(ttw: TtwVelocitySeries, start: GpsFix, epochs) -> Trajectory:
    """Integrate the TTW velocity from the start fix, ignoring currents.

    The TTW series is treated as piecewise linear between its samples, so
    the trapezoid rule over the union of sample times and epochs is exact.

    Parameters
    ----------
    ttw : TtwVelocitySeries
        East/north TTW velocity samples.
    start : GpsFix
        Position and time the integration starts from; usually the first
        epoch.
    epochs : array_like
        Strictly increasing output times within the TTW span.
    """
    epochs = np.asarray(epochs, dtype=float)
    if epochs.size == 0:
        raise ValueError("no epochs")
    lo, hi = float(ttw.t[0]), float(ttw.t[-1])
    first = min(start.time, float(epochs[0]))
    last = max(start.time, float(epochs[-1]))
    if first < lo - SPAN_TOL or last > hi + SPAN_TOL:
        raise ValueError(f"epochs [{first}, {last}] outside TTW span [{lo}, {hi}]")
    knots = np.union1d(np.union1d(ttw.t, epochs), [start.time])
    knots = knots[(knots >= first) & (knots <= last)]
    travelled = _cumulative_trapezoid(knots, ttw.at(knots))
    origin = np.array([np.interp(start.time, knots, travelled[:, j]) for j in range(2)])
    east = np.interp(epochs, knots, travelled[:, 0]) - origin[0] + start.east
    north = np.interp(epochs, knots, travelled[:, 1]) - origin[1] + start.north
    return Trajectory(t=epochs, east=east, north=north)


def depth_averaged_correction(dr: Trajectory, gps_end: GpsFix) -> Trajectory:
    """Add the constant drift that closes the dead-reckoned track onto ``gps_end``."""
    if len(dr.t) == 0:
        raise ValueError("empty trajectory")
    duration = float(dr.t[-1] - dr.t[0])
    if not duration > 0:
        raise ValueError("trajectory has zero duration")
    miss = gps_end.position - dr.positions[-1]
    elapsed = dr.t - dr.t[0]
    east = dr.east + miss[0] * elapsed / duration
    north = dr.north + miss[1] * elapsed / duration
    # land exactly on the fix despite rounding in the ramp
    east[-1], north[-1] = gps_end.east, gps_end.north
    return Trajectory(t=dr.t, east=east, north=north)


def depth_averaged_velocity(dr: Trajectory, gps_end: GpsFix) -> np.ndarray:
    """The (east, north) drift applied by :func:`depth_averaged_correction`."""
    duration = float(dr.t[-1] - dr.t[0])
    if not duration > 0:
        raise ValueError("trajectory has zero duration")
    return (gps_end.position - dr.positions[-1]) / duration


def adcp_informed_trajectory(solution: JointSolution) -> Trajectory:
    """Per-epoch positions taken straight from the joint states."""
    return Trajectory(t=solution.epochs, east=solution.states[:, 0], north=solution.states[:, 1])


def resample(traj: Trajectory, times) -> Trajectory:
    times = np.asarray(times, dtype=float)
    return Trajectory(t=times, east=np.interp(times, traj.t, traj.east), north=np.interp(times, traj.t, traj.north))


def max_horizontal_offset(a: Trajectory, b: Trajectory) -> float:
    """Largest horizontal distance between two trajectories, in meters.

    Both are linearly interpolated onto the union of their epochs inside
    the common time span, which keeps the measure symmetric.
    """
    lo = max(float(a.t[0]), float(b.t[0]))
    hi = min(float(a.t[-1]), float(b.t[-1]))
    if lo > hi:
        raise ValueError(f"time spans do not overlap ([{a.t[0]}, {a.t[-1]}] vs [{b.t[0]}, {b.t[-1]}])")
    t = np.union1d(a.t, b.t)
    t = t[(t >= lo) & (t <= hi)]
    ra, rb = resample(a, t), resample(b, t)
    return float(np.max(np.hypot(ra.east - rb.east, ra.north - rb.north)))


def phase_path_lengths(traj: Trajectory, split_time: float) -> tuple[float, float]:
    """Horizontal path length before and after ``split_time``."""
    t = np.union1d(traj.t, [split_time])
    t = t[(t >= traj.t[0]) & (t <= traj.t[-1])]
    r = resample(traj, t)
    seg = np.hypot(np.diff(r.east), np.diff(r.north))
    mid = 0.5 * (t[1:] + t[:-1])
    return float(seg[mid <= split_time].sum()), float(seg[mid > split_time].sum())


def compresses_dive_stretches_climb(informed: Trajectory, averaged: Trajectory, split_time: float) -> bool:
    """Sign test: shorter descent leg and longer ascent leg than the uniform correction."""
    d_inf, a_inf = phase_path_lengths(informed, split_time)
    d_avg, a_avg = phase_path_lengths(averaged, split_time)
    return d_inf < d_avg and a_inf > a_avg
