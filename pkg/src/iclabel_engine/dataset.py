"""EEG dataset model built from an EEGLAB-shaped MAT tree."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .matreader import (
    CharArray,
    Empty,
    MatFile,
    MatValue,
    NumericArray,
    StructArray,
    load_mat,
    read_fdt,
)

__all__ = [
    "DatasetError",
    "MissingField",
    "ShapeMismatch",
    "PayloadMissing",
    "ChannelLoc",
    "IcaDecomposition",
    "EegDataset",
    "from_matfile",
    "load_set",
    "ica_activations",
]


class DatasetError(Exception):
    pass


class MissingField(DatasetError):
    pass


class ShapeMismatch(DatasetError):
    pass


class PayloadMissing(DatasetError):
    pass


@dataclass(frozen=True)
class ChannelLoc:
    label: str
    theta: float = math.nan
    radius: float = math.nan
    has_position: bool = False


@dataclass(frozen=True)
class IcaDecomposition:
    """Unmixing (``weights @ sphere``) and mixing (``winv``) matrices.

    ``winv`` has one row per ICA channel (in ``chan_indices`` order) and one
    column per component. ``chan_indices`` are 0-based.
    """

    weights: np.ndarray
    sphere: np.ndarray
    winv: np.ndarray
    chan_indices: tuple[int, ...]

    @property
    def n_comp(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class EegDataset:
    n_chan: int
    srate: float
    pnts: int
    trials: int
    data: np.ndarray
    chanlocs: tuple[ChannelLoc, ...]
    ica: IcaDecomposition

    def __post_init__(self):
        if self.trials < 1 or self.pnts < 1 or not self.srate > 0:
            raise ShapeMismatch(
                f"need trials>=1, pnts>=1, srate>0; got {self.trials}, {self.pnts}, {self.srate}"
            )
        if self.data.shape != (self.n_chan, self.pnts, self.trials):
            raise ShapeMismatch(
                f"data is {self.data.shape}, expected {(self.n_chan, self.pnts, self.trials)}"
            )
        if len(self.chanlocs) != self.n_chan:
            raise ShapeMismatch(f"{len(self.chanlocs)} chanlocs for {self.n_chan} channels")
        ica = self.ica
        n_ica = len(ica.chan_indices)
        if ica.weights.ndim != 2 or ica.weights.shape[1] != ica.sphere.shape[0]:
            raise ShapeMismatch(
                f"weights {ica.weights.shape} and sphere {ica.sphere.shape} do not chain"
            )
        if ica.sphere.shape != (n_ica, n_ica):
            raise ShapeMismatch(f"sphere {ica.sphere.shape} for {n_ica} ICA channels")
        if ica.winv.shape != (n_ica, ica.n_comp):
            raise ShapeMismatch(
                f"winv {ica.winv.shape}, expected {(n_ica, ica.n_comp)}"
            )
        if any(not 0 <= c < self.n_chan for c in ica.chan_indices):
            raise ShapeMismatch("ICA channel index out of range")

    @property
    def n_comp(self) -> int:
        return self.ica.n_comp


def _field(root, name):
    if isinstance(root, StructArray):
        return root.get(name)
    return root.variables.get(name)


def _matrix(value: MatValue | None, name: str, required: bool = True) -> np.ndarray | None:
    if value is None or isinstance(value, Empty):
        if required:
            raise MissingField(f"dataset has no {name!r}")
        return None
    if not isinstance(value, NumericArray):
        raise ShapeMismatch(f"{name!r} is not numeric")
    arr = value.as_float()
    return arr.reshape(arr.shape[0], -1) if arr.ndim > 2 else arr


def _scalar(value: MatValue | None, name: str) -> float:
    if not isinstance(value, NumericArray) or value.data.size != 1:
        raise MissingField(f"dataset has no scalar {name!r}")
    return value.scalar()


def _number_or_nan(value) -> float:
    if isinstance(value, NumericArray) and value.data.size == 1:
        return float(value.data[0])
    return math.nan


def _chanlocs(value: MatValue | None, n_chan: int) -> tuple[ChannelLoc, ...]:
    if not isinstance(value, StructArray) or len(value) == 0:
        return tuple(ChannelLoc(f"E{i + 1}") for i in range(n_chan))
    locs = []
    for i, elem in enumerate(value.elements):
        label = elem.get("labels")
        label = label.text if isinstance(label, CharArray) else f"E{i + 1}"
        theta = _number_or_nan(elem.get("theta"))
        radius = _number_or_nan(elem.get("radius"))
        has = math.isfinite(theta) and math.isfinite(radius)
        locs.append(ChannelLoc(label, theta, radius, has))
    return tuple(locs)


def from_matfile(
    file: MatFile, payload_loader: Callable[[str], bytes] | None = None
) -> EegDataset:
    """Build an :class:`EegDataset` from an EEGLAB ``.set`` tree.

    Accepts both the single ``EEG`` struct layout and flat top-level
    variables. When ``data`` is a file name, ``payload_loader`` is called
    with that name and must return the raw ``.fdt`` bytes. A stored
    ``icaact`` is ignored; activations are always recomputed.
    """
    root = file.variables.get("EEG")
    if not isinstance(root, StructArray) or len(root) != 1:
        root = file

    n_chan = int(_scalar(_field(root, "nbchan"), "nbchan"))
    srate = _scalar(_field(root, "srate"), "srate")
    pnts = int(_scalar(_field(root, "pnts"), "pnts"))
    trials = int(_scalar(_field(root, "trials"), "trials"))

    raw = _field(root, "data")
    if isinstance(raw, CharArray):
        if payload_loader is None:
            raise PayloadMissing(f"data lives in {raw.text!r} but no loader was given")
        try:
            payload = payload_loader(raw.text)
        except OSError as exc:
            raise PayloadMissing(f"cannot read payload {raw.text!r}: {exc}") from None
        data = read_fdt(payload, n_chan, pnts * trials)
    elif isinstance(raw, NumericArray):
        data = raw.as_float()
    else:
        raise MissingField("dataset has no 'data'")
    if data.size != n_chan * pnts * trials:
        raise ShapeMismatch(
            f"data has {data.size} values, expected {n_chan}x{pnts}x{trials}"
        )
    data = data.reshape((n_chan, pnts, trials), order="F")

    weights = _matrix(_field(root, "icaweights"), "icaweights")
    sphere = _matrix(_field(root, "icasphere"), "icasphere")
    winv = _matrix(_field(root, "icawinv"), "icawinv", required=False)
    if winv is None:
        winv = np.linalg.pinv(weights @ sphere)
    chans = _field(root, "icachansind")
    if isinstance(chans, NumericArray):
        chan_indices = tuple(int(c) - 1 for c in chans.data)
    else:
        chan_indices = tuple(range(weights.shape[1]))

    return EegDataset(
        n_chan=n_chan,
        srate=srate,
        pnts=pnts,
        trials=trials,
        data=data,
        chanlocs=_chanlocs(_field(root, "chanlocs"), n_chan),
        ica=IcaDecomposition(weights, sphere, winv, chan_indices),
    )


def load_set(path: str | Path) -> EegDataset:
    """Load an EEGLAB ``.set`` file, resolving ``.fdt`` payloads beside it."""
    path = Path(path)
    return from_matfile(load_mat(path), lambda name: (path.parent / name).read_bytes())


def ica_activations(ds: EegDataset) -> np.ndarray:
    """Component activations, shape ``(n_comp, pnts, trials)``."""
    unmix = ds.ica.weights @ ds.ica.sphere
    x = ds.data[list(ds.ica.chan_indices)]
    return np.einsum("ck,kpt->cpt", unmix, x)

