"""Autocorrelation feature: 100 lags from 10 ms to 1 s at 100 Hz.

Three gatherers share one FFT autocovariance core:

* ``fftw``   epoched data, every trial is one record
* ``welch``  long continuous data, cut into 3 s half-overlapping windows
* ``direct`` short continuous data, the whole record at once
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.signal

from .dataset import EegDataset
from .spectral import segment_starts

__all__ = [
    "N_LAGS",
    "AcfVariant",
    "AutocorrError",
    "ZeroVariance",
    "AcfFeature",
    "acf_dispatch",
    "autocovariance",
    "native_lags",
    "resample_100",
    "acf_fftw",
    "acf_direct",
    "acf_welch",
    "welch_windows",
    "acf_feature",
]

N_LAGS = 100
KAISER_BETA = 5.0
# zero crossings of the anti-aliasing sinc on each side
FILTER_HALF_CROSSINGS = 10


class AcfVariant(str, enum.Enum):
    FFTW = "fftw"
    WELCH = "welch"
    DIRECT = "direct"


class AutocorrError(Exception):
    pass


class ZeroVariance(AutocorrError):
    pass


@dataclass(frozen=True)
class AcfFeature:
    values: np.ndarray
    variant: AcfVariant


def acf_dispatch(ds: EegDataset, reference_compat: bool = False) -> AcfVariant:
    """Choose the gatherer for a dataset.

    Epoched data uses ``fftw``. Continuous data uses ``welch`` when it holds
    more than five whole 3 s epochs, else ``direct``. With
    ``reference_compat`` the continuous rule becomes "longer than 5 s".
    """
    if ds.trials > 1:
        return AcfVariant.FFTW
    if reference_compat:
        long_enough = ds.pnts / ds.srate > 5
    else:
        long_enough = ds.pnts // int(round(3 * ds.srate)) > 5
    return AcfVariant.WELCH if long_enough else AcfVariant.DIRECT


def _nfft(n: int) -> int:
    return 1 << max(0, int(2 * n - 1) - 1).bit_length()


def autocovariance(records: np.ndarray) -> np.ndarray:
    """Circular-free autocovariance averaged over records.

    ``records`` is (n_records, n). Returns the lag series of length nfft,
    where nfft is the next power of two at or above ``2n - 1``.
    """
    records = np.atleast_2d(np.asarray(records, dtype=np.float64))
    nfft = _nfft(records.shape[1])
    spec = np.fft.rfft(records, nfft, axis=1)
    power = np.mean(spec.real ** 2 + spec.imag ** 2, axis=0)
    return np.fft.irfft(power, nfft)


def native_lags(records: np.ndarray, srate: int) -> np.ndarray:
    """Normalized lags 0..srate at the native rate (zero-filled if short)."""
    n = records.shape[-1]
    ac = autocovariance(records)
    out = np.zeros(srate + 1)
    keep = min(srate + 1, n)
    out[:keep] = ac[:keep]
    if not out[0] > 0:
        raise ZeroVariance("lag-0 autocovariance is zero")
    return out / out[0]


def resample_100(series: np.ndarray, srate: float) -> np.ndarray:
    """Resample a lag series from ``srate`` to 100 Hz, returning 101 lags.

    Polyphase rational resampling with a Kaiser-windowed (beta 5) sinc
    spanning 10 zero crossings per side of the slower rate.
    """
    series = np.asarray(series, dtype=np.float64)
    ratio = Fraction(100) / Fraction(srate).limit_denominator(10_000)
    if ratio == 1:
        out = series
    else:
        out = scipy.signal.resample_poly(
            series,
            ratio.numerator,
            ratio.denominator,
            window=("kaiser", KAISER_BETA),
        )
    if out.size >= N_LAGS + 1:
        return out[: N_LAGS + 1]
    return np.concatenate([out, np.zeros(N_LAGS + 1 - out.size)])


def _finish(lags: np.ndarray, srate: float, variant: AcfVariant) -> AcfFeature:
    return AcfFeature(resample_100(lags, srate)[1:], variant)


def acf_fftw(act: np.ndarray, srate: float) -> AcfFeature:
    """Epoched data: each trial is a record, spectra averaged over trials."""
    act = np.asarray(act, dtype=np.float64)
    if act.ndim == 1:
        act = act[:, None]
    lags = native_lags(act.T, int(round(srate)))
    return _finish(lags, srate, AcfVariant.FFTW)


def acf_direct(act: np.ndarray, srate: float) -> AcfFeature:
    """Single continuous record taken whole."""
    act = np.asarray(act, dtype=np.float64).reshape(-1)
    lags = native_lags(act[None, :], int(round(srate)))
    return _finish(lags, srate, AcfVariant.DIRECT)


def welch_windows(act: np.ndarray, srate: float) -> np.ndarray:
    """Half-overlapping 3 s windows of a continuous record, (n_windows, n)."""
    act = np.asarray(act, dtype=np.float64).reshape(-1)
    n = min(act.size, int(round(3 * srate)))
    starts = segment_starts(act.size, n)
    return act[starts[:, None] + np.arange(n)]


def acf_welch(act: np.ndarray, srate: float) -> AcfFeature:
    """Long continuous record cut into 3 s windows, spectra averaged."""
    lags = native_lags(welch_windows(act, srate), int(round(srate)))
    return _finish(lags, srate, AcfVariant.WELCH)


def acf_feature(act: np.ndarray, srate: float, variant: AcfVariant) -> AcfFeature:
    if variant is AcfVariant.FFTW:
        return acf_fftw(act, srate)
    if variant is AcfVariant.WELCH:
        return acf_welch(act, srate)
    return acf_direct(act, srate)
