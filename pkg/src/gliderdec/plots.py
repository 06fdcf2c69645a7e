"""Deterministic SVG figures for processed dives.

Depth increases downward on every profile axis. The SVG writer gets a fixed
hash salt and no date stamp so that reruns are byte-identical.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .domain import CurrentProfileEstimate, DiveRecord, Trajectory  # noqa: E402

SVG_SALT = "gliderdec"


def _save(fig, path) -> None:
    with matplotlib.rc_context({"svg.hashsalt": SVG_SALT, "svg.fonttype": "path"}):
        fig.savefig(Path(path), format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_traces_and_profile(path, dive: DiveRecord, profile: CurrentProfileEstimate, glider_u_at_pings=None) -> None:
    """ADCP traces made absolute with the estimated OTG velocity, over the estimated profile."""
    fig, axes = plt.subplots(1, 2, figsize=(8, 6), sharey=True)
    a = dive.adcp
    for j, (ax, rel, est, name) in enumerate(zip(axes, (a.u_rel, a.v_rel), (profile.u, profile.v), ("east", "north"))):
        shift = 0.0 if glider_u_at_pings is None else glider_u_at_pings[:, j]
        ax.plot(rel + shift, a.z, ".", ms=1.5, color="0.6", label="ADCP samples")
        ax.plot(est, profile.z_hat, "-", color="C0", lw=1.5, label="profile")
        ax.set_xlabel(f"{name} velocity (m/s)")
        ax.grid(alpha=0.3)
    axes[0].set_ylabel("depth (m)")
    axes[0].invert_yaxis()
    axes[0].legend(loc="lower left", fontsize=8)
    _save(fig, path)


def plot_method_comparison(path, invert: CurrentProfileEstimate, joint: CurrentProfileEstimate,
                           truth: Optional[CurrentProfileEstimate] = None) -> None:
    fig, axes = plt.subplots(1, 2, figsize=(8, 6), sharey=True)
    for ax, comp in zip(axes, ("u", "v")):
        ax.plot(getattr(invert, comp), invert.z_hat, "-", color="C0", label="inversion")
        ax.plot(getattr(joint, comp), joint.z_hat, "--", color="C1", label="joint")
        if truth is not None:
            ax.plot(getattr(truth, comp), truth.z_hat, ":", color="k", label="truth")
        ax.set_xlabel(f"{'east' if comp == 'u' else 'north'} current (m/s)")
        ax.grid(alpha=0.3)
    axes[0].set_ylabel("depth (m)")
    axes[0].invert_yaxis()
    axes[0].legend(loc="lower left", fontsize=8)
    _save(fig, path)


def plot_trajectories(path, trajectories: dict[str, Trajectory], fixes=None) -> None:
    fig, ax = plt.subplots(figsize=(6, 6))
    for i, (name, traj) in enumerate(trajectories.items()):
        ax.plot(traj.east, traj.north, "-", color=f"C{i}", label=name)
    if fixes is not None:
        pts = np.array([f.position for f in fixes])
        ax.plot(pts[:, 0], pts[:, 1], "k^", label="GPS fixes")
    ax.set_xlabel("east (m)")
    ax.set_ylabel("north (m)")
    ax.set_aspect("equal", adjustable="datalim")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    _save(fig, path)
