"""Scalp topographies on a 32x32 grid via biharmonic spline interpolation.

Geometry
--------
Electrode polar coordinates follow the EEGLAB convention: ``theta`` in
degrees with 0 pointing at the nose and 90 at the right ear, ``radius`` in
head units with 0 at the vertex. The planar position is
``(r cos theta, r sin theta)``, so the first planar coordinate runs
back-to-nose and the second runs left-to-right.

Grid values are indexed ``values[i, j]`` with row ``i`` following the
nose axis (ascending, back to front) and column ``j`` following the ear
axis (ascending, left to right). Mirroring left and right is therefore a
flip of the column axis.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from .dataset import ChannelLoc, EegDataset

__all__ = [
    "GRID_SIZE",
    "HEAD_RADIUS",
    "TopomapError",
    "TooFewElectrodes",
    "DuplicatePosition",
    "SingularSystem",
    "ElectrodePlane",
    "ScalpGrid",
    "green",
    "grid_axis",
    "project_electrodes",
    "spline_weights",
    "evaluate_spline",
    "biharmonic_interpolate",
    "topo_feature",
]

GRID_SIZE = 32
HEAD_RADIUS = 0.5


class TopomapError(Exception):
    pass


class TooFewElectrodes(TopomapError):
    pass


class DuplicatePosition(TopomapError):
    pass


class SingularSystem(TopomapError):
    pass


@dataclass(frozen=True)
class ElectrodePlane:
    xy: np.ndarray  # (n, 2), squeezed head-plane coordinates
    kept_indices: tuple[int, ...]
    plot_radius: float


@dataclass(frozen=True)
class ScalpGrid:
    values: np.ndarray
    inside_mask: np.ndarray


def green(r: np.ndarray) -> np.ndarray:
    """Biharmonic Green's function ``r**2 * (log r - 1)`` with ``g(0) = 0``."""
    r = np.asarray(r, dtype=np.float64)
    out = np.zeros_like(r)
    nz = r > 0
    out[nz] = r[nz] ** 2 * (np.log(r[nz]) - 1.0)
    return out


def grid_axis(n: int = GRID_SIZE, radius: float = HEAD_RADIUS) -> np.ndarray:
    """Evaluation coordinates along one grid axis, endpoints included."""
    return np.linspace(-radius, radius, n)


def _inside_mask(n: int = GRID_SIZE, radius: float = HEAD_RADIUS) -> np.ndarray:
    ax = grid_axis(n, radius)
    return np.hypot(ax[:, None], ax[None, :]) <= radius


def project_electrodes(chanlocs: Sequence[ChannelLoc]) -> ElectrodePlane:
    """Polar-to-planar conversion plus the plot-radius squeeze.

    The plot radius is ``min(1, 1.02 * max radius)`` floored at 0.5; all
    positions are scaled by ``HEAD_RADIUS / plot_radius``. Electrodes that
    lie beyond the plot radius are dropped.
    """
    idx = [i for i, c in enumerate(chanlocs) if c.has_position]
    if len(idx) < 3:
        raise TooFewElectrodes(f"{len(idx)} positioned channels, need at least 3")
    theta = np.deg2rad([chanlocs[i].theta for i in idx])
    radius = np.array([chanlocs[i].radius for i in idx], dtype=np.float64)

    plot_radius = max(min(1.0, radius.max() * 1.02), 0.5)
    keep = radius <= plot_radius
    idx = [i for i, k in zip(idx, keep) if k]
    if len(idx) < 3:
        raise TooFewElectrodes(f"{len(idx)} channels inside the plot radius")
    theta, radius = theta[keep], radius[keep]

    squeeze = HEAD_RADIUS / plot_radius
    xy = np.column_stack([radius * np.cos(theta), radius * np.sin(theta)]) * squeeze

    d = np.hypot(*(xy[:, None, :] - xy[None, :, :]).transpose(2, 0, 1))
    np.fill_diagonal(d, np.inf)
    if d.min() < 1e-9:
        a, b = np.unravel_index(np.argmin(d), d.shape)
        raise DuplicatePosition(
            f"channels {idx[a]} and {idx[b]} share a position"
        )
    return ElectrodePlane(xy, tuple(idx), plot_radius)


def spline_weights(plane: ElectrodePlane, v: np.ndarray) -> np.ndarray:
    """Solve ``G w = v`` for the Green's-function weights by dense LU."""
    v = np.asarray(v, dtype=np.float64)
    p = plane.xy
    if v.shape != (len(p),):
        raise ValueError(f"{v.size} values for {len(p)} electrodes")
    gmat = green(np.hypot(p[:, :1] - p[:, 0], p[:, 1:] - p[:, 1]))
    with warnings.catch_warnings():
        warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
        try:
            w = scipy.linalg.lu_solve(scipy.linalg.lu_factor(gmat), v)
        except (scipy.linalg.LinAlgWarning, np.linalg.LinAlgError, ValueError) as exc:
            raise SingularSystem(f"spline system is singular: {exc}") from None
    if not np.all(np.isfinite(w)) or np.linalg.cond(gmat) > 1e15:
        raise SingularSystem("spline system is numerically singular")
    return w


def evaluate_spline(plane: ElectrodePlane, w: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Spline value at each ``(x, y)`` row of ``points`` (any leading shape)."""
    points = np.asarray(points, dtype=np.float64)
    p = plane.xy
    dist = np.hypot(points[..., :1] - p[:, 0], points[..., 1:] - p[:, 1])
    return green(dist) @ w


def biharmonic_interpolate(plane: ElectrodePlane, v: np.ndarray) -> ScalpGrid:
    """Fit the biharmonic spline through ``v`` and evaluate it on the grid."""
    w = spline_weights(plane, v)
    ax = grid_axis()
    q = np.stack(np.meshgrid(ax, ax, indexing="ij"), axis=-1)
    values = evaluate_spline(plane, w, q)
    mask = _inside_mask()
    values[~mask] = 0.0
    return ScalpGrid(values, mask)


def topo_feature(ds: EegDataset, comp: int) -> ScalpGrid:
    """Average-referenced scalp map of one component."""
    if not 0 <= comp < ds.n_comp:
        raise IndexError(f"component {comp} outside 0..{ds.n_comp - 1}")
    chans = ds.ica.chan_indices
    plane = project_electrodes([ds.chanlocs[c] for c in chans])
    v = ds.ica.winv[list(plane.kept_indices), comp]
    return biharmonic_interpolate(plane, v - v.mean())
