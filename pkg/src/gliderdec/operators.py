"""Selection, interpolation, integration and differencing operators.

Every matrix is returned as a ``scipy.sparse.csr_matrix`` with no explicit
zeros and no duplicate entries.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

TIME_MATCH_TOL = 1e-9
DEFAULT_FILLER_SPACING = 15.0


def _csr(rows, cols, vals, shape) -> sp.csr_matrix:
    m = sp.coo_matrix((np.asarray(vals, dtype=float), (np.asarray(rows), np.asarray(cols))), shape=shape)
    m = m.tocsr()
    m.sum_duplicates()
    m.eliminate_zeros()
    return m


def check_sparse(m: sp.spmatrix) -> None:
    """Raise ValueError unless ``m`` has finite, nonzero, non-duplicated entries."""
    coo = sp.coo_matrix(m)
    if not np.all(np.isfinite(coo.data)):
        raise ValueError("sparse matrix has non-finite entries")
    if np.any(coo.data == 0):
        raise ValueError("sparse matrix stores explicit zeros")
    keys = coo.row.astype(np.int64) * coo.shape[1] + coo.col
    if len(np.unique(keys)) != len(keys):
        raise ValueError("sparse matrix has duplicate (row, col) entries")


def _fill(a: float, b: float, spacing: float) -> list[float]:
    """Nodes strictly inside (a, b) at ``spacing`` from ``a``; the last sub-interval absorbs the remainder."""
    n = int(np.floor((b - a) / spacing + 1e-9))
    nodes = [a + k * spacing for k in range(1, n + 1)]
    if nodes and b - nodes[-1] <= 1e-9 * spacing:
        nodes.pop()
    return nodes


def build_time_grid(ping_times, span, default_spacing: float = DEFAULT_FILLER_SPACING) -> np.ndarray:
    """Temporal grid containing every ping time plus filler nodes in the gaps.

    A gap is an interval between consecutive pings longer than twice the
    median ping interval, or the stretch between a span edge and the
    nearest ping. Gaps are filled at the median ping interval
    (``default_spacing`` when there is a single ping).

    Parameters
    ----------
    ping_times : array_like
        Distinct ping times, seconds.
    span : (float, float)
        Start and end of the dive; both become grid nodes.

    Returns
    -------
    numpy.ndarray
        Strictly increasing grid nodes.
    """
    pings = np.unique(np.asarray(ping_times, dtype=float))
    if pings.size == 0:
        raise ValueError("ping_times is empty")
    t0, t1 = float(span[0]), float(span[1])
    if pings[0] < t0 or pings[-1] > t1:
        raise ValueError(f"ping times [{pings[0]}, {pings[-1]}] not within span ({t0}, {t1})")
    if pings.size > 1:
        spacing = float(np.median(np.diff(pings)))
    else:
        spacing = float(default_spacing)
    if not spacing > 0:
        raise ValueError("filler spacing must be positive")

    nodes: list[float] = []
    if pings[0] > t0:
        nodes.append(t0)
        nodes += _fill(t0, pings[0], spacing)
    for a, b in zip(pings[:-1], pings[1:]):
        nodes.append(a)
        if b - a > 2.0 * spacing:
            nodes += _fill(a, b, spacing)
    nodes.append(pings[-1])
    if pings[-1] < t1:
        nodes += _fill(pings[-1], t1, spacing)
        nodes.append(t1)
    return np.asarray(nodes)


def build_subsample_matrix(t_hat, sample_times) -> sp.csr_matrix:
    """K x M matrix picking the grid node equal to each sample time."""
    t_hat = np.asarray(t_hat, dtype=float)
    sample_times = np.asarray(sample_times, dtype=float)
    idx = np.searchsorted(t_hat, sample_times)
    idx_lo = np.clip(idx - 1, 0, len(t_hat) - 1)
    idx_hi = np.clip(idx, 0, len(t_hat) - 1)
    pick = np.where(np.abs(t_hat[idx_lo] - sample_times) <= np.abs(t_hat[idx_hi] - sample_times), idx_lo, idx_hi)
    miss = np.abs(t_hat[pick] - sample_times) > TIME_MATCH_TOL
    if np.any(miss):
        k = int(np.flatnonzero(miss)[0])
        raise ValueError(f"sample time {sample_times[k]} is not a grid node")
    K = len(sample_times)
    return _csr(np.arange(K), pick, np.ones(K), (K, len(t_hat)))


def build_linear_interp_matrix(z_hat, sample_depths, mask=None) -> sp.csr_matrix:
    """K x L linear interpolation from a uniform depth grid onto sample depths.

    Rows where ``mask`` is False are left empty.
    """
    z_hat = np.asarray(z_hat, dtype=float)
    z = np.asarray(sample_depths, dtype=float)
    L = len(z_hat)
    dz = (z_hat[-1] - z_hat[0]) / (L - 1) if L > 1 else 1.0
    keep = np.ones(len(z), dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    outside = keep & ((z < z_hat[0]) | (z > z_hat[-1]))
    if np.any(outside):
        k = int(np.flatnonzero(outside)[0])
        raise ValueError(f"depth {z[k]} outside grid [{z_hat[0]}, {z_hat[-1]}]")
    rows = np.flatnonzero(keep)
    zk = z[rows]
    pos = (zk - z_hat[0]) / dz
    lo = np.clip(np.floor(pos).astype(np.int64), 0, L - 1)
    frac = pos - lo
    # snap onto a node when rounding leaves a sliver
    on_node = np.abs(frac) < 1e-12
    near_next = np.abs(frac - 1.0) < 1e-12
    lo = np.where(near_next, lo + 1, lo)
    frac = np.where(on_node | near_next, 0.0, frac)
    hi = np.minimum(lo + 1, L - 1)
    r = np.concatenate([rows, rows])
    c = np.concatenate([lo, hi])
    v = np.concatenate([1.0 - frac, frac])
    return _csr(r, c, v, (len(z), L))


def trapezoid_weights(t_hat) -> np.ndarray:
    """Trapezoid-rule weights w with w @ f approximating the integral of f over the grid."""
    t = np.asarray(t_hat, dtype=float)
    if len(t) < 2:
        raise ValueError("need at least two grid nodes")
    w = np.empty_like(t)
    w[0] = 0.5 * (t[1] - t[0])
    w[-1] = 0.5 * (t[-1] - t[-2])
    w[1:-1] = 0.5 * (t[2:] - t[:-2])
    return w


def second_difference(n: int) -> sp.csr_matrix:
    if n < 3:
        raise ValueError("second difference needs n >= 3")
    m = n - 2
    r = np.repeat(np.arange(m), 3)
    c = (np.arange(m)[:, None] + np.arange(3)[None, :]).ravel()
    v = np.tile([1.0, -2.0, 1.0], m)
    return _csr(r, c, v, (m, n))


def adjacent_difference(n: int) -> sp.csr_matrix:
    if n < 2:
        raise ValueError("adjacent difference needs n >= 2")
    m = n - 1
    r = np.repeat(np.arange(m), 2)
    c = (np.arange(m)[:, None] + np.arange(2)[None, :]).ravel()
    v = np.tile([1.0, -1.0], m)
    return _csr(r, c, v, (m, n))


def depth_grid(max_depth: float, dz: float) -> np.ndarray:
    """Uniform grid 0, dz, 2 dz, ... whose last node lies strictly below ``max_depth``."""
    if not dz > 0:
        raise ValueError("dz must be positive")
    L = int(np.floor(max_depth / dz + 1e-9)) + 2
    return np.arange(L) * dz
