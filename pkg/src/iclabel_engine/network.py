"""Convolutional classifier: three feature branches, one discriminator conv.

Weights file layout (MAT-file Level 5): for every layer ``L`` in
:data:`ARCHITECTURE`, a ``L_weight`` array of extents
``(out, in, kh, kw)`` and a ``L_bias`` array with ``out`` elements.
Kernels are applied as cross-correlations (no flip).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .matreader import Empty, MatFile, NumericArray

__all__ = [
    "LEAK",
    "N_CLASSES",
    "NetworkError",
    "MissingLayer",
    "ShapeMismatch",
    "NonFinite",
    "OutOfRange",
    "ConvSpec",
    "ARCHITECTURE",
    "NetworkWeights",
    "FeatureBatch",
    "out_extent",
    "conv2d",
    "leaky_relu",
    "load_weights",
    "forward",
    "softmax7",
    "infer_augmented",
]

LEAK = 0.2
N_CLASSES = 7


class NetworkError(Exception):
    pass


class MissingLayer(NetworkError):
    pass


class ShapeMismatch(NetworkError):
    pass


class NonFinite(NetworkError):
    pass


class OutOfRange(NetworkError):
    pass


@dataclass(frozen=True)
class ConvSpec:
    name: str
    in_channels: int
    out_channels: int
    kernel: tuple[int, int]
    stride: int
    padding: tuple[int, int]
    followed_by_lrelu: bool = True

    @property
    def weight_shape(self) -> tuple[int, int, int, int]:
        return (self.out_channels, self.in_channels, *self.kernel)


ARCHITECTURE: tuple[ConvSpec, ...] = (
    ConvSpec("Topo1", 1, 128, (4, 4), 2, (1, 1)),
    ConvSpec("Topo2", 128, 256, (4, 4), 2, (1, 1)),
    ConvSpec("Topo3", 256, 512, (4, 4), 2, (1, 1)),
    ConvSpec("PSD1", 1, 128, (1, 3), 1, (0, 1)),
    ConvSpec("PSD2", 128, 256, (1, 3), 1, (0, 1)),
    ConvSpec("PSD3", 256, 1, (1, 3), 1, (0, 1)),
    ConvSpec("ACF1", 1, 128, (1, 3), 1, (0, 1)),
    ConvSpec("ACF2", 128, 256, (1, 3), 1, (0, 1)),
    ConvSpec("ACF3", 256, 1, (1, 3), 1, (0, 1)),
    ConvSpec("Discr", 712, N_CLASSES, (4, 4), 1, (0, 0), followed_by_lrelu=False),
)

_SPECS = {s.name: s for s in ARCHITECTURE}
TOPO_SIZE = 32
VECTOR_LEN = 100
TILE = 4


def out_extent(n: int, kernel: int, stride: int, pad: int) -> int:
    return (n + 2 * pad - kernel) // stride + 1


def _check_shape_chain() -> None:
    # topo branch 32 -> 16 -> 8 -> 4, vector branches keep 100,
    # concat gives 512 + 100 + 100 channels and Discr reduces 4x4 to 1x1
    n = TOPO_SIZE
    for name in ("Topo1", "Topo2", "Topo3"):
        s = _SPECS[name]
        n = out_extent(n, s.kernel[0], s.stride, s.padding[0])
    assert n == TILE, n
    for branch in ("PSD", "ACF"):
        w = VECTOR_LEN
        for k in (1, 2, 3):
            s = _SPECS[f"{branch}{k}"]
            assert out_extent(1, s.kernel[0], s.stride, s.padding[0]) == 1
            w = out_extent(w, s.kernel[1], s.stride, s.padding[1])
        assert w == VECTOR_LEN and _SPECS[f"{branch}3"].out_channels == 1
    d = _SPECS["Discr"]
    assert d.in_channels == _SPECS["Topo3"].out_channels + 2 * VECTOR_LEN
    assert out_extent(TILE, d.kernel[0], d.stride, d.padding[0]) == 1


_check_shape_chain()


@dataclass(frozen=True)
class NetworkWeights:
    kernels: dict[str, np.ndarray]
    biases: dict[str, np.ndarray]
    architecture: tuple[ConvSpec, ...] = ARCHITECTURE


@dataclass(frozen=True)
class FeatureBatch:
    topo: np.ndarray  # (n, 1, 32, 32)
    psd: np.ndarray  # (n, 1, 1, 100)
    acf: np.ndarray  # (n, 1, 1, 100)

    def __post_init__(self):
        n = self.topo.shape[0]
        expected = {
            "topo": (n, 1, TOPO_SIZE, TOPO_SIZE),
            "psd": (n, 1, 1, VECTOR_LEN),
            "acf": (n, 1, 1, VECTOR_LEN),
        }
        for name, shape in expected.items():
            arr = getattr(self, name)
            if arr.shape != shape:
                raise ShapeMismatch(f"{name} is {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise NonFinite(f"{name} holds non-finite values")
            # acf is exempt: resampling rings past 1 near lag 0 on smooth signals
            if name != "acf" and arr.size and np.abs(arr).max() > 1 + 1e-6:
                raise OutOfRange(f"{name} exceeds unit magnitude; features must be normalized")

    def __len__(self) -> int:
        return self.topo.shape[0]

    def take(self, idx) -> "FeatureBatch":
        return FeatureBatch(self.topo[idx], self.psd[idx], self.acf[idx])


def conv2d(x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int, pad: tuple[int, int]) -> np.ndarray:
    """Batched 2-D cross-correlation.

    x is (n, c_in, h, w), w is (c_out, c_in, kh, kw), b is (c_out,).
    """
    n, c, h, wd = x.shape
    co, ci, kh, kw = w.shape
    if ci != c:
        raise ShapeMismatch(f"input has {c} channels, kernel expects {ci}")
    ph, pw = pad
    xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    oh = out_extent(h, kh, stride, ph)
    ow = out_extent(wd, kw, stride, pw)
    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
    win = win[:, :, ::stride, ::stride][:, :, :oh, :ow]
    # (n, oh, ow, c, kh, kw) @ (c*kh*kw, co)
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n * oh * ow, c * kh * kw)
    out = cols @ w.reshape(co, -1).T + b
    return out.reshape(n, oh, ow, co).transpose(0, 3, 1, 2)


def leaky_relu(x: np.ndarray) -> np.ndarray:
    return np.where(x >= 0, x, LEAK * x)


def _array(file: MatFile, name: str) -> np.ndarray:
    value = file.variables.get(name)
    if value is None:
        raise MissingLayer(f"weights file has no {name!r}")
    if isinstance(value, Empty) or not isinstance(value, NumericArray):
        raise ShapeMismatch(f"{name!r} is empty or not numeric")
    return value.as_float()


def load_weights(file: MatFile) -> NetworkWeights:
    kernels, biases = {}, {}
    for spec in ARCHITECTURE:
        w = _array(file, f"{spec.name}_weight")
        b = _array(file, f"{spec.name}_bias")
        # trailing singleton dims are dropped on save; restore them
        w = w.reshape(w.shape + (1,) * (4 - w.ndim)) if w.ndim < 4 else w
        if w.shape != spec.weight_shape:
            raise ShapeMismatch(
                f"{spec.name}_weight: expected {spec.weight_shape}, found {w.shape}"
            )
        if b.size != spec.out_channels:
            raise ShapeMismatch(
                f"{spec.name}_bias: expected {spec.out_channels} values, found {b.shape}"
            )
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise NonFinite(f"layer {spec.name} holds non-finite values")
        kernels[spec.name] = np.ascontiguousarray(w)
        biases[spec.name] = b.reshape(-1)
    return NetworkWeights(kernels, biases)


def _layer(wts: NetworkWeights, name: str, x: np.ndarray) -> np.ndarray:
    s = _SPECS[name]
    y = conv2d(x, wts.kernels[name], wts.biases[name], s.stride, s.padding)
    return leaky_relu(y) if s.followed_by_lrelu else y


def _branch(wts: NetworkWeights, prefix: str, x: np.ndarray) -> np.ndarray:
    for k in (1, 2, 3):
        x = _layer(wts, f"{prefix}{k}", x)
    return x


def forward(wts: NetworkWeights, batch: FeatureBatch) -> np.ndarray:
    """Logits, shape (n, 7). No activation after the discriminator."""
    n = len(batch)
    topo = _branch(wts, "Topo", batch.topo)
    psd = _branch(wts, "PSD", batch.psd)
    acf = _branch(wts, "ACF", batch.acf)

    def tiled(v):
        # (n, 1, 1, 100) -> (n, 100, 1, 1) -> (n, 100, 4, 4)
        return np.tile(v.reshape(n, VECTOR_LEN, 1, 1), (1, 1, TILE, TILE))

    joint = np.concatenate([topo, tiled(psd), tiled(acf)], axis=1)
    return _layer(wts, "Discr", joint).reshape(n, N_CLASSES)


def softmax7(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def infer_augmented(wts: NetworkWeights, batch: FeatureBatch) -> np.ndarray:
    """Average probabilities over sign flips and left-right mirrors of topo."""
    mirrored = batch.topo[..., ::-1]
    variants = (batch.topo, -batch.topo, mirrored, -mirrored)
    probs = sum(
        softmax7(forward(wts, FeatureBatch(np.ascontiguousarray(t), batch.psd, batch.acf)))
        for t in variants
    ) / 4.0
    return probs / probs.sum(axis=1, keepdims=True)
