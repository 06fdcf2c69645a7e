"""Core data types shared by the inversion and state-space solvers.

All arrays are stored as read-only float64 (or int64) numpy arrays. Times are
seconds since dive start, depths are meters positive down, and horizontal
positions are meters in a local east/north tangent plane anchored at the
dive-start GPS fix.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np

DESCENT = "D"
ASCENT = "A"

EARTH_RADIUS_M = 6371008.8


@dataclass(frozen=True)
class Violation:
    """One invariant violation found while validating a record."""

    code: str
    message: str
    index: Optional[int] = None

    def __str__(self) -> str:
        where = f" [index {self.index}]" if self.index is not None else ""
        return f"{self.code}{where}: {self.message}"


class InvalidRecordError(ValueError):
    """Raised when a domain object is constructed from data that violates its invariants."""

    def __init__(self, violations: list[Violation]):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


def _frozen_array(values: Any, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    arr.setflags(write=False)
    return arr


def _nonfinite(name: str, arr: np.ndarray) -> list[Violation]:
    bad = np.flatnonzero(~np.isfinite(arr))
    return [Violation(f"nonfinite_{name}", f"{name}[{i}] is not finite", int(i)) for i in bad]


def _check(obj) -> None:
    violations = obj.violations()
    if violations:
        raise InvalidRecordError(violations)


def build_unchecked(cls, **fields):
    """Construct a domain object without running its invariant checks.

    Used by loaders so that every violation of a malformed input can be
    reported at once through :func:`validate_dive` instead of failing on the
    first one.
    """
    obj = object.__new__(cls)
    for f in dataclasses.fields(cls):
        value = fields.get(f.name, f.default)
        if value is dataclasses.MISSING:
            raise TypeError(f"missing field {f.name!r} for {cls.__name__}")
        if isinstance(value, (list, tuple, np.ndarray)) and f.name not in ("cast_label",):
            value = _frozen_array(value, dtype=np.int64 if f.name == "ping_index" else float)
        elif f.name == "cast_label":
            value = _frozen_array(value, dtype="<U1")
        object.__setattr__(obj, f.name, value)
    return obj


@dataclass(frozen=True)
class GpsFix:
    time: float
    east: float
    north: float

    def __post_init__(self):
        object.__setattr__(self, "time", float(self.time))
        object.__setattr__(self, "east", float(self.east))
        object.__setattr__(self, "north", float(self.north))
        _check(self)

    def violations(self, role: str = "gps") -> list[Violation]:
        out = []
        for name in ("time", "east", "north"):
            if not np.isfinite(getattr(self, name)):
                out.append(Violation(f"nonfinite_{role}_{name}", f"{role} {name} is not finite"))
        return out

    @property
    def position(self) -> np.ndarray:
        return np.array([self.east, self.north])


def latlon_to_local(lat, lon, lat0: float, lon0: float):
    """Equirectangular projection of (lat, lon) degrees about an anchor, in meters."""
    lat = np.asarray(lat, dtype=float)
    lon = np.asarray(lon, dtype=float)
    north = np.radians(lat - lat0) * EARTH_RADIUS_M
    east = np.radians(lon - lon0) * EARTH_RADIUS_M * np.cos(np.radians(lat0))
    return east, north


@dataclass(frozen=True)
class AdcpObservationSet:
    """Flattened valid ADCP samples, one entry per (ping, bin).

    Each sample is ocean velocity at the bin depth minus the glider
    over-the-ground velocity at the ping time, plus noise.
    """

    u_rel: np.ndarray
    v_rel: np.ndarray
    t: np.ndarray
    z: np.ndarray
    ping_index: np.ndarray
    cast_label: np.ndarray

    def __post_init__(self):
        for name in ("u_rel", "v_rel", "t", "z"):
            object.__setattr__(self, name, _frozen_array(getattr(self, name)))
        object.__setattr__(self, "ping_index", _frozen_array(self.ping_index, dtype=np.int64))
        object.__setattr__(self, "cast_label", _frozen_array(self.cast_label, dtype="<U1"))
        _check(self)

    def __len__(self) -> int:
        return len(self.t)

    def violations(self) -> list[Violation]:
        names = ("u_rel", "v_rel", "t", "z", "ping_index", "cast_label")
        lengths = {n: len(getattr(self, n)) for n in names}
        if len(set(lengths.values())) != 1:
            return [Violation("adcp_length_mismatch", f"ADCP field lengths differ: {lengths}")]
        if lengths["t"] == 0:
            return [Violation("adcp_empty", "no ADCP samples")]
        out = []
        for name in ("u_rel", "v_rel", "t", "z"):
            out += _nonfinite(name, getattr(self, name))
        bad_cast = np.flatnonzero(~np.isin(self.cast_label, (DESCENT, ASCENT)))
        out += [Violation("bad_cast_label", f"cast_label[{i}] is {self.cast_label[i]!r}", int(i))
                for i in bad_cast]
        if np.all(np.isfinite(self.t)):
            order = np.argsort(self.ping_index, kind="stable")
            dt = np.diff(self.t[order])
            for j in np.flatnonzero(dt < 0):
                out.append(Violation("adcp_time_decreasing",
                                     "sample time decreases with increasing ping index",
                                     int(order[j + 1])))
        return out

    def ping_times(self) -> np.ndarray:
        return np.unique(self.t)

    def is_descent(self) -> np.ndarray:
        return self.cast_label == DESCENT


@dataclass(frozen=True)
class TtwVelocitySeries:
    t: np.ndarray
    u_ttw: np.ndarray
    v_ttw: np.ndarray

    def __post_init__(self):
        for name in ("t", "u_ttw", "v_ttw"):
            object.__setattr__(self, name, _frozen_array(getattr(self, name)))
        _check(self)

    def violations(self) -> list[Violation]:
        if not len(self.t) == len(self.u_ttw) == len(self.v_ttw):
            return [Violation("ttw_length_mismatch", "TTW field lengths differ")]
        if len(self.t) == 0:
            return [Violation("ttw_empty", "no TTW samples")]
        out = []
        for name in ("t", "u_ttw", "v_ttw"):
            out += _nonfinite(name, getattr(self, name))
        for j in np.flatnonzero(~(np.diff(self.t) > 0)):
            out.append(Violation("ttw_time_not_increasing", "TTW times must strictly increase", int(j + 1)))
        return out

    def at(self, times) -> np.ndarray:
        """Linearly interpolated (u, v) at ``times``, shape (n, 2); held constant outside the series."""
        times = np.asarray(times, dtype=float)
        return np.column_stack([np.interp(times, self.t, self.u_ttw),
                                np.interp(times, self.t, self.v_ttw)])


@dataclass(frozen=True)
class DepthSeries:
    t: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "t", _frozen_array(self.t))
        object.__setattr__(self, "z", _frozen_array(self.z))
        _check(self)

    def violations(self) -> list[Violation]:
        if len(self.t) != len(self.z):
            return [Violation("depth_length_mismatch", "depth series lengths differ")]
        if len(self.t) == 0:
            return [Violation("depth_empty", "no depth samples")]
        out = _nonfinite("depth_t", self.t) + _nonfinite("depth_z", self.z)
        if out:
            return out
        for j in np.flatnonzero(~(np.diff(self.t) > 0)):
            out.append(Violation("depth_time_not_increasing", "depth times must strictly increase", int(j + 1)))
        for j in np.flatnonzero(self.z < 0):
            out.append(Violation("negative_depth", f"glider depth {self.z[j]} < 0", int(j)))
        at_max = np.flatnonzero(self.z == self.z.max())
        if at_max[-1] - at_max[0] + 1 != len(at_max):
            out.append(Violation("multiple_depth_maxima", "deepest point is not a single contiguous region"))
        return out

    def at(self, times) -> np.ndarray:
        return np.interp(np.asarray(times, dtype=float), self.t, self.z)

    @property
    def split_time(self) -> float:
        """End of the deepest region; times at or before it belong to the descent."""
        at_max = np.flatnonzero(self.z == self.z.max())
        return float(self.t[at_max[-1]])


@dataclass(frozen=True)
class DiveRecord:
    adcp: AdcpObservationSet
    ttw: TtwVelocitySeries
    depth: DepthSeries
    gps_start: GpsFix
    gps_end: GpsFix

    def __post_init__(self):
        _check(self)

    def violations(self) -> list[Violation]:
        out = (self.adcp.violations() + self.ttw.violations() + self.depth.violations()
               + self.gps_start.violations("gps_start") + self.gps_end.violations("gps_end"))
        if out:
            return out
        if self.gps_start.east != 0.0 or self.gps_start.north != 0.0:
            out.append(Violation("gps_start_not_origin", "start fix must be the local origin (0, 0)"))
        t_min, t_max = float(self.adcp.t.min()), float(self.adcp.t.max())
        if not self.gps_start.time < t_min:
            out.append(Violation("gps_start_after_first_ping",
                                 f"start fix time {self.gps_start.time} is not before first ping {t_min}"))
        if not t_max < self.gps_end.time:
            out.append(Violation("gps_end_before_last_ping",
                                 f"end fix time {self.gps_end.time} is not after last ping {t_max}"))
        outside = np.flatnonzero((self.adcp.t < self.depth.t[0]) | (self.adcp.t > self.depth.t[-1]))
        out += [Violation("ping_outside_depth_series", "sample time outside depth series span", int(i))
                for i in outside]
        return out

    @property
    def duration(self) -> float:
        return self.gps_end.time - self.gps_start.time

    @property
    def displacement(self) -> np.ndarray:
        return self.gps_end.position - self.gps_start.position


def validate_dive(record: DiveRecord) -> list[Violation]:
    """Return every invariant violation of ``record`` (empty when valid)."""
    return record.violations()


@dataclass(frozen=True)
class VelocityGrids:
    t_hat: np.ndarray
    z_hat: np.ndarray
    dz: float

    @property
    def M(self) -> int:
        return len(self.t_hat)

    @property
    def L(self) -> int:
        return len(self.z_hat)


@dataclass(frozen=True)
class CurrentProfileEstimate:
    """Depth-indexed east/north ocean velocity.

    In ``two_profile`` form the descent and ascent branches are kept in the
    ``*_descent``/``*_ascent`` fields and ``u``/``v`` hold their mean.
    """

    z_hat: np.ndarray
    u: np.ndarray
    v: np.ndarray
    coverage: np.ndarray
    form: str = "single"
    u_descent: Optional[np.ndarray] = None
    v_descent: Optional[np.ndarray] = None
    u_ascent: Optional[np.ndarray] = None
    v_ascent: Optional[np.ndarray] = None
    coverage_descent: Optional[np.ndarray] = None
    coverage_ascent: Optional[np.ndarray] = None

    def __post_init__(self):
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if isinstance(value, (np.ndarray, list, tuple)):
                dtype = np.int64 if f.name.startswith("coverage") else float
                object.__setattr__(self, f.name, _frozen_array(value, dtype=dtype))
        _check(self)

    def violations(self) -> list[Violation]:
        out = []
        if self.form not in ("single", "two_profile"):
            out.append(Violation("bad_profile_form", f"unknown form {self.form!r}"))
        names = ["u", "v", "coverage"]
        if self.form == "two_profile":
            names += ["u_descent", "v_descent", "u_ascent", "v_ascent", "coverage_descent", "coverage_ascent"]
        for name in names:
            value = getattr(self, name)
            if value is None or len(value) != len(self.z_hat):
                out.append(Violation("profile_length_mismatch", f"{name} does not match z_hat"))
            else:
                out += _nonfinite(name, value)
                if name.startswith("coverage") and np.any(value < 0):
                    out.append(Violation("negative_coverage", f"{name} has negative entries"))
        return out


@dataclass(frozen=True)
class GliderVelocitySeries:
    t_hat: np.ndarray
    u_g: np.ndarray
    v_g: np.ndarray

    def __post_init__(self):
        for name in ("t_hat", "u_g", "v_g"):
            object.__setattr__(self, name, _frozen_array(getattr(self, name)))
        if not len(self.t_hat) == len(self.u_g) == len(self.v_g):
            raise InvalidRecordError([Violation("glider_velocity_length_mismatch", "lengths differ")])
        if not (np.all(np.isfinite(self.u_g)) and np.all(np.isfinite(self.v_g))):
            raise InvalidRecordError([Violation("nonfinite_glider_velocity", "non-finite OTG velocity")])


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    east: np.ndarray
    north: np.ndarray

    def __post_init__(self):
        for name in ("t", "east", "north"):
            object.__setattr__(self, name, _frozen_array(getattr(self, name)))
        _check(self)

    def violations(self) -> list[Violation]:
        if not len(self.t) == len(self.east) == len(self.north):
            return [Violation("trajectory_length_mismatch", "trajectory field lengths differ")]
        out = _nonfinite("traj_t", self.t) + _nonfinite("east", self.east) + _nonfinite("north", self.north)
        if np.any(np.diff(self.t) <= 0):
            out.append(Violation("trajectory_time_not_increasing", "trajectory times must strictly increase"))
        return out

    @property
    def positions(self) -> np.ndarray:
        return np.column_stack([self.east, self.north])
