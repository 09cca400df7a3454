"""Log-power spectral density feature (median Welch estimate, 100 bins)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "N_BINS",
    "DB_MULTIPLIER",
    "SUBSET_SEED",
    "SUBSET_PCT",
    "SpectralError",
    "TooShort",
    "DegenerateSignal",
    "PsdFeature",
    "hamming",
    "segment_starts",
    "segment_subset",
    "psd_feature",
]

N_BINS = 100
# dB = DB_MULTIPLIER * log10(power); frozen, see README "Spectral feature"
DB_MULTIPLIER = 20.0
SUBSET_SEED = 435656
SUBSET_PCT = 95.0


class SpectralError(Exception):
    pass


class TooShort(SpectralError):
    pass


class DegenerateSignal(SpectralError):
    pass


@dataclass(frozen=True)
class PsdFeature:
    values: np.ndarray
    nfreqs: int


def hamming(n: int) -> np.ndarray:
    """Symmetric Hamming taper of length ``n``."""
    if n == 1:
        return np.ones(1)
    k = np.arange(n)
    return 0.54 - 0.46 * np.cos(2 * np.pi * k / (n - 1))


def segment_starts(pnts: int, n: int) -> np.ndarray:
    """0-based starts of half-overlapping segments of length ``n``.

    Only whole segments inside ``floor(pnts / n) * n`` samples are used;
    the trailing remainder is dropped.
    """
    cutoff = (pnts // n) * n
    return np.ceil(np.arange(0, cutoff - n + 1e-9, n / 2)).astype(int)


def segment_subset(n_seg: int, pct: float = SUBSET_PCT, seed: int = SUBSET_SEED) -> np.ndarray:
    """Deterministic random subset of segment indices.

    A Mersenne-Twister stream seeded with ``seed`` draws ``n_seg`` uniforms;
    their sort order is the permutation and its first ``ceil(n_seg*pct/100)``
    entries are kept.
    """
    draws = np.random.RandomState(seed).random_sample(n_seg)
    perm = np.argsort(draws, kind="stable")
    return perm[: math.ceil(n_seg * pct / 100)]


def psd_feature(
    act: np.ndarray,
    srate: float,
    subset: np.ndarray | None = None,
) -> PsdFeature:
    """100-bin log-power spectrum of one component activation.

    Parameters
    ----------
    act : (pnts, trials) or (pnts,) array
    srate : sampling rate in Hz
    subset : indices of the segments to keep, counted over the flattened
        (segment, trial) list with segments varying fastest. ``None`` keeps
        all segments.
    """
    act = np.asarray(act, dtype=np.float64)
    if act.ndim == 1:
        act = act[:, None]
    pnts, trials = act.shape
    if pnts < 4:
        raise TooShort(f"{pnts} samples, need at least 4")
    srate_i = int(round(srate))
    if srate_i < 2:
        raise TooShort(f"srate {srate} gives no frequency bins")
    if not np.any(act):
        raise DegenerateSignal("activation is identically zero")

    nyquist = srate_i // 2
    nfreqs = min(nyquist, N_BINS)
    n = min(pnts, srate_i)
    win = hamming(n)

    starts = segment_starts(pnts, n)
    offsets = starts[:, None] + np.arange(n)
    # (trials, segments, n) -> (segments*trials, n), segments fastest
    segs = act.T[:, offsets].reshape(-1, n)
    if subset is not None:
        segs = segs[subset]

    # records shorter than 1 s are zero-padded so bins stay at k Hz
    spec = np.fft.fft(segs * win, max(n, srate_i), axis=1)
    power = (spec.real ** 2 + spec.imag ** 2)[:, 1 : nfreqs + 1]
    power = power * 2.0 / (srate * np.sum(win ** 2))
    if nfreqs == nyquist:
        power[:, -1] /= 2.0

    med = np.median(power, axis=0)
    if np.any(med <= 0):
        raise DegenerateSignal("zero power in a frequency bin")
    db = DB_MULTIPLIER * np.log10(med)
    if nfreqs < N_BINS:
        db = np.concatenate([db, np.full(N_BINS - nfreqs, db[-1])])
    return PsdFeature(db, nfreqs)
