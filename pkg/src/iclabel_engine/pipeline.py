"""Dataset -> features -> network -> labelled classification table."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .autocorr import AcfVariant, AutocorrError, acf_dispatch, acf_feature
from .dataset import EegDataset, ica_activations
from .network import (
    N_CLASSES,
    FeatureBatch,
    NetworkWeights,
    forward,
    infer_augmented,
    softmax7,
)
from .spectral import SpectralError, psd_feature, segment_starts, segment_subset
from .topomap import (
    ElectrodePlane,
    TopomapError,
    biharmonic_interpolate,
    project_electrodes,
)

__all__ = [
    "CLASS_NAMES",
    "NATIVE_ORDER",
    "FEATURE_SCALE",
    "Compat",
    "FeatureFailure",
    "Features",
    "ClassificationTable",
    "extract_features",
    "predict",
    "classify",
]

# canonical class vocabulary
CLASS_NAMES = ("Brain", "Eyes", "Muscle", "Heart", "Line Noise", "Single Channel", "Other")
# CLASS_NAMES index of each network output, in output order
NATIVE_ORDER = (0, 2, 1, 3, 4, 5, 6)
FEATURE_SCALE = 0.99
LINE_FREQS = (50, 60)
NOTCH_DEPTH_DB = 5.0


@dataclass(frozen=True)
class Compat:
    """Switches for behaviour that exists only to match reference outputs.

    reference_compat
        95% fixed-seed segment subset for the spectrum, notch-dip repair at
        50/60 Hz, and the duration-based autocorrelation dispatch rule.
    augment
        Average network outputs over sign flips and left-right mirrors of
        the scalp map.
    """

    reference_compat: bool = True
    augment: bool = True


class FeatureFailure(Exception):
    def __init__(self, failures: dict[int, str]):
        self.failures = dict(sorted(failures.items()))
        listing = "; ".join(f"IC{k}: {v}" for k, v in self.failures.items())
        super().__init__(f"{len(failures)} component(s) failed: {listing}")


@dataclass(frozen=True)
class Features:
    """Normalized per-component features. Failed rows hold NaN."""

    topo: np.ndarray  # (n, 32, 32)
    psd: np.ndarray  # (n, 100)
    acf: np.ndarray  # (n, 100)
    acf_variant: AcfVariant
    failures: dict[int, str] = field(default_factory=dict)

    @property
    def ok(self) -> np.ndarray:
        mask = np.ones(len(self.topo), dtype=bool)
        mask[list(self.failures)] = False
        return mask

    def batch(self, idx=None) -> FeatureBatch:
        idx = np.flatnonzero(self.ok) if idx is None else idx
        return FeatureBatch(
            self.topo[idx][:, None, :, :],
            self.psd[idx][:, None, None, :],
            self.acf[idx][:, None, None, :],
        )


@dataclass(frozen=True)
class ClassificationTable:
    probabilities: np.ndarray  # (n_comp, 7), network output order
    failures: dict[int, str] = field(default_factory=dict)

    @property
    def class_names(self) -> tuple[str, ...]:
        """Column names, in network output order."""
        return tuple(CLASS_NAMES[k] for k in NATIVE_ORDER)

    @property
    def argmax(self) -> np.ndarray:
        """Winning column per row; -1 for failed components."""
        out = np.full(len(self.probabilities), -1)
        ok = ~np.isnan(self.probabilities).any(axis=1)
        out[ok] = np.argmax(self.probabilities[ok], axis=1)
        return out

    @property
    def labels(self) -> list[str | None]:
        names = self.class_names
        return [names[k] if k >= 0 else None for k in self.argmax]

    def canonical(self) -> np.ndarray:
        """Probabilities with columns permuted into ``CLASS_NAMES`` order."""
        out = np.empty_like(self.probabilities)
        out[:, list(NATIVE_ORDER)] = self.probabilities
        return out


def _repair_notch(psd: np.ndarray) -> np.ndarray:
    psd = psd.copy()
    for f in LINE_FREQS:
        k = f - 1  # bin k holds (k + 1) Hz
        if k + 1 >= psd.size:
            continue
        around = psd[[k - 1, k + 1]]
        if np.all(around - psd[k] > NOTCH_DEPTH_DB):
            psd[k] = around.mean()
    return psd


def _max_abs_normalize(x: np.ndarray) -> np.ndarray:
    peak = np.max(np.abs(x))
    return x / peak if peak > 0 else x


def _one_component(
    ds: EegDataset,
    plane: ElectrodePlane,
    act: np.ndarray,
    comp: int,
    variant: AcfVariant,
    subset: np.ndarray | None,
    compat: Compat,
):
    v = ds.ica.winv[list(plane.kept_indices), comp]
    topo = biharmonic_interpolate(plane, v - v.mean()).values
    psd = psd_feature(act, ds.srate, subset).values
    if compat.reference_compat:
        psd = _repair_notch(psd)
    acf = acf_feature(act, ds.srate, variant).values
    return (
        FEATURE_SCALE * _max_abs_normalize(topo),
        FEATURE_SCALE * _max_abs_normalize(psd),
        FEATURE_SCALE * acf,
    )


def _workers(threads: int) -> int:
    return (os.cpu_count() or 1) if threads <= 0 else threads


def extract_features(ds: EegDataset, compat: Compat = Compat(), threads: int = 1) -> Features:
    """Topography, spectrum and autocorrelation for every component.

    Component failures do not abort the run; they are collected in
    ``Features.failures`` and the corresponding rows are NaN.
    """
    acts = ica_activations(ds)
    n = ds.n_comp
    variant = acf_dispatch(ds, reference_compat=compat.reference_compat)

    subset = None
    if compat.reference_compat:
        n_points = min(ds.pnts, int(round(ds.srate)))
        n_seg = len(segment_starts(ds.pnts, n_points)) * ds.trials
        subset = segment_subset(n_seg)

    try:
        plane = project_electrodes([ds.chanlocs[c] for c in ds.ica.chan_indices])
        plane_error = None
    except TopomapError as exc:
        plane, plane_error = None, f"{type(exc).__name__}: {exc}"

    def job(c):
        if plane is None:
            return plane_error
        try:
            return _one_component(ds, plane, acts[c], c, variant, subset, compat)
        except (TopomapError, SpectralError, AutocorrError) as exc:
            return f"{type(exc).__name__}: {exc}"

    with ThreadPoolExecutor(max_workers=_workers(threads)) as pool:
        results = list(pool.map(job, range(n)))

    topo = np.full((n, 32, 32), np.nan)
    psd = np.full((n, 100), np.nan)
    acf = np.full((n, 100), np.nan)
    failures = {}
    for c, res in enumerate(results):
        if isinstance(res, str):
            failures[c] = res
        else:
            topo[c], psd[c], acf[c] = res
    return Features(topo, psd, acf, variant, failures)


def predict(
    weights: NetworkWeights, features: Features, compat: Compat = Compat(), threads: int = 1
) -> np.ndarray:
    """Probabilities per component, NaN rows where features failed.

    Every component is evaluated on its own so results do not depend on
    the thread count.
    """
    n = len(features.topo)
    probs = np.full((n, N_CLASSES), np.nan)
    rows = np.flatnonzero(features.ok)

    def job(c):
        batch = features.batch([c])
        if compat.augment:
            return infer_augmented(weights, batch)[0]
        return softmax7(forward(weights, batch))[0]

    with ThreadPoolExecutor(max_workers=_workers(threads)) as pool:
        for c, p in zip(rows, pool.map(job, rows)):
            probs[c] = p
    return probs


def classify(
    ds: EegDataset, weights: NetworkWeights, compat: Compat = Compat(), threads: int = 1
) -> ClassificationTable:
    features = extract_features(ds, compat, threads)
    return ClassificationTable(predict(weights, features, compat, threads), features.failures)
