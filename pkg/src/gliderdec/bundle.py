"""Dive bundle and result file I/O.

A dive bundle is a directory of four UTF-8 CSV files:

``adcp.csv``  ``time_s,depth_m,u_rel_mps,v_rel_mps,ping,cast``
``ttw.csv``   ``time_s,u_ttw_mps,v_ttw_mps``
``depth.csv`` ``time_s,depth_m``
``gps.csv``   ``role,time_s,east_m,north_m`` with optional ``lat,lon``

When ``gps.csv`` carries latitude and longitude and leaves the east/north
cells empty, positions are projected about the start fix. Bundle files keep
full round-trip precision so a written dive reloads bit-exactly; result
files use 9 significant digits. NaN is never written.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .domain import (
    AdcpObservationSet,
    CurrentProfileEstimate,
    DepthSeries,
    DiveRecord,
    GpsFix,
    InvalidRecordError,
    Trajectory,
    TtwVelocitySeries,
    build_unchecked,
    latlon_to_local,
    validate_dive,
)

ADCP_HEADER = ["time_s", "depth_m", "u_rel_mps", "v_rel_mps", "ping", "cast"]
TTW_HEADER = ["time_s", "u_ttw_mps", "v_ttw_mps"]
DEPTH_HEADER = ["time_s", "depth_m"]
GPS_HEADER = ["role", "time_s", "east_m", "north_m"]
GPS_LATLON = ["lat", "lon"]
SIGNIFICANT_DIGITS = 9


class BundleParseError(ValueError):
    """A bundle or result file could not be parsed; carries the file, line and column."""

    def __init__(self, path, line: int, column: str, message: str):
        self.path, self.line, self.column = str(path), line, column
        super().__init__(f"{self.path}: line {line}, column {column!r}: {message}")


def fmt(x, exact: bool = False) -> str:
    """One number at 9 significant digits (shortest round-trip form if ``exact``); integers stay integers."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"refusing to write non-finite value {x}")
    s = repr(x) if exact else f"{x:.{SIGNIFICANT_DIGITS}g}"
    return "0" if s in ("-0", "-0.0") else s


def round_sig(x: float) -> float:
    return float(fmt(float(x)))


def write_csv(path, header: Sequence[str], columns: Sequence[Iterable], exact: bool = False) -> None:
    rows = zip(*columns)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else fmt(v, exact) for v in row])


def write_json(path, payload) -> None:
    """Write JSON with floats rounded to 9 significant digits; NaN is an error."""
    def clean(obj):
        if isinstance(obj, dict):
            return {str(k): clean(v) for k, v in obj.items()}
        if isinstance(obj, (list, tuple, np.ndarray)):
            return [clean(v) for v in obj]
        if isinstance(obj, (bool, np.bool_)) or obj is None or isinstance(obj, str):
            return bool(obj) if isinstance(obj, np.bool_) else obj
        if isinstance(obj, (int, np.integer)):
            return int(obj)
        return round_sig(obj)

    text = json.dumps(clean(payload), indent=2, sort_keys=True, allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def _read_table(path: Path, required: Sequence[str], optional: Sequence[str] = ()) -> tuple[list[str], list[tuple[int, list[str]]]]:
    if not path.exists():
        raise BundleParseError(path, 0, "", "file not found")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise BundleParseError(path, 1, "", "missing header row")
    header = [h.strip() for h in rows[0]]
    allowed = list(required) + list(optional)
    for col in header:
        if col not in allowed:
            raise BundleParseError(path, 1, col, f"unexpected column; expected {','.join(required)}")
    for col in required:
        if col not in header:
            raise BundleParseError(path, 1, col, "required column missing")
    body = []
    for i, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise BundleParseError(path, i, "", f"expected {len(header)} fields, found {len(row)}")
        body.append((i, row))
    return header, body


def _column(path, header, body, name, kind=float, allow_empty=False):
    j = header.index(name)
    out = []
    for i, row in body:
        cell = row[j].strip()
        if cell == "" and allow_empty:
            out.append(None)
            continue
        try:
            out.append(kind(cell))
        except ValueError:
            raise BundleParseError(path, i, name, f"cannot parse {cell!r} as {kind.__name__}") from None
    return out


def load_bundle(directory) -> DiveRecord:
    """Read and validate a dive bundle.

    Raises
    ------
    BundleParseError
        Malformed CSV content.
    InvalidRecordError
        The parsed dive violates an invariant; every violation is listed.
    """
    d = Path(directory)
    p = d / "adcp.csv"
    h, b = _read_table(p, ADCP_HEADER)
    casts = _column(p, h, b, "cast", str.strip)
    for (line, _), c in zip(b, casts):
        if c not in ("D", "A"):
            raise BundleParseError(p, line, "cast", f"cast must be 'D' or 'A', got {c!r}")
    adcp = build_unchecked(
        AdcpObservationSet,
        t=_column(p, h, b, "time_s"), z=_column(p, h, b, "depth_m"),
        u_rel=_column(p, h, b, "u_rel_mps"), v_rel=_column(p, h, b, "v_rel_mps"),
        ping_index=_column(p, h, b, "ping", int), cast_label=casts,
    )
    p = d / "ttw.csv"
    h, b = _read_table(p, TTW_HEADER)
    ttw = build_unchecked(TtwVelocitySeries, t=_column(p, h, b, "time_s"),
                          u_ttw=_column(p, h, b, "u_ttw_mps"), v_ttw=_column(p, h, b, "v_ttw_mps"))
    p = d / "depth.csv"
    h, b = _read_table(p, DEPTH_HEADER)
    depth = build_unchecked(DepthSeries, t=_column(p, h, b, "time_s"), z=_column(p, h, b, "depth_m"))
    start, end = _load_gps(d / "gps.csv")
    record = build_unchecked(DiveRecord, adcp=adcp, ttw=ttw, depth=depth, gps_start=start, gps_end=end)
    violations = validate_dive(record)
    if violations:
        raise InvalidRecordError(violations)
    return record


def _load_gps(p: Path) -> tuple[GpsFix, GpsFix]:
    h, b = _read_table(p, GPS_HEADER, GPS_LATLON)
    roles = _column(p, h, b, "role", str.strip)
    times = _column(p, h, b, "time_s")
    east = _column(p, h, b, "east_m", allow_empty=True)
    north = _column(p, h, b, "north_m", allow_empty=True)
    has_ll = all(c in h for c in GPS_LATLON)
    lat = _column(p, h, b, "lat", allow_empty=True) if has_ll else [None] * len(b)
    lon = _column(p, h, b, "lon", allow_empty=True) if has_ll else [None] * len(b)
    index = {}
    lines = [line for line, _ in b]
    for i, role in enumerate(roles):
        if role not in ("start", "end"):
            raise BundleParseError(p, lines[i], "role", f"role must be 'start' or 'end', got {role!r}")
        if role in index:
            raise BundleParseError(p, lines[i], "role", f"duplicate {role!r} fix")
        index[role] = i
    for role in ("start", "end"):
        if role not in index:
            raise BundleParseError(p, 0, "role", f"no {role!r} fix")
    fixes = {}
    for role, i in index.items():
        if east[i] is None or north[i] is None:
            if lat[i] is None or lon[i] is None:
                raise BundleParseError(p, lines[i], "east_m", "position needs east/north or lat/lon")
            s = index["start"]
            if lat[s] is None or lon[s] is None:
                raise BundleParseError(p, lines[s], "lat", "lat/lon positions need a lat/lon start fix")
            e, n = latlon_to_local(lat[i], lon[i], lat[s], lon[s])
            east[i], north[i] = float(e), float(n)
        fixes[role] = build_unchecked(GpsFix, time=times[i], east=east[i], north=north[i])
    return fixes["start"], fixes["end"]


def write_bundle(directory, dive: DiveRecord) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    a = dive.adcp
    write_csv(d / "adcp.csv", ADCP_HEADER, [a.t, a.z, a.u_rel, a.v_rel, a.ping_index, a.cast_label],
              exact=True)
    write_csv(d / "ttw.csv", TTW_HEADER, [dive.ttw.t, dive.ttw.u_ttw, dive.ttw.v_ttw], exact=True)
    write_csv(d / "depth.csv", DEPTH_HEADER, [dive.depth.t, dive.depth.z], exact=True)
    fixes = [dive.gps_start, dive.gps_end]
    write_csv(d / "gps.csv", GPS_HEADER, [["start", "end"], [f.time for f in fixes], [f.east for f in fixes],
                                          [f.north for f in fixes]], exact=True)


def write_profile(path, profile: CurrentProfileEstimate) -> None:
    header = ["depth_m", "u_mps", "v_mps", "coverage"]
    cols = [profile.z_hat, profile.u, profile.v, profile.coverage]
    if profile.form == "two_profile":
        header += ["u_descent_mps", "v_descent_mps", "u_ascent_mps", "v_ascent_mps",
                   "coverage_descent", "coverage_ascent"]
        cols += [profile.u_descent, profile.v_descent, profile.u_ascent, profile.v_ascent,
                 profile.coverage_descent, profile.coverage_ascent]
    write_csv(path, header, cols)


def write_trajectory(path, traj: Trajectory) -> None:
    write_csv(path, ["time_s", "east_m", "north_m"], [traj.t, traj.east, traj.north])


def read_numeric_csv(path) -> dict[str, np.ndarray]:
    """Columns of a numeric result CSV keyed by header name."""
    p = Path(path)
    with open(p, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    data = np.array([[float(c) for c in r] for r in rows[1:]], dtype=float).reshape(-1, len(header))
    return {name: data[:, j] for j, name in enumerate(header)}


__all__ = [
    "BundleParseError", "InvalidRecordError", "load_bundle", "write_bundle", "write_profile",
    "write_trajectory", "write_csv", "write_json", "read_numeric_csv", "fmt",
]
