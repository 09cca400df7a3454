"""Reader for MAT-file Level 5 containers and EEGLAB ``.fdt`` payloads.

The decoder turns a byte stream into a tree of small immutable value
objects (:class:`NumericArray`, :class:`CharArray`, :class:`StructArray`,
:class:`CellArray`, :class:`Empty`). Numeric data is kept flat in
column-major order exactly as stored; use :meth:`NumericArray.to_numpy`
for a shaped view.

Only Level 5 files are understood. HDF5-based v7.3 files are detected and
rejected. Sparse, complex, object and function arrays raise
:class:`UnsupportedArray`.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field
from math import prod
from pathlib import Path
from typing import Union

import numpy as np

__all__ = [
    "MatReadError",
    "UnsupportedVersion",
    "Truncated",
    "UnknownClass",
    "UnsupportedArray",
    "BadStream",
    "BadChecksum",
    "SizeMismatch",
    "PathError",
    "NoSuchField",
    "IndexOutOfRange",
    "TypeMismatch",
    "NumericArray",
    "CharArray",
    "StructArray",
    "CellArray",
    "Empty",
    "MatFile",
    "parse_mat",
    "load_mat",
    "read_fdt",
    "get_path",
]


class MatReadError(Exception):
    """Base class for every decoding failure."""


class UnsupportedVersion(MatReadError):
    pass


class Truncated(MatReadError):
    pass


class UnknownClass(MatReadError):
    pass


class UnsupportedArray(MatReadError):
    """Sparse, complex, object or function arrays."""


class BadStream(MatReadError):
    """Structurally invalid element or corrupt compressed data."""


class BadChecksum(BadStream):
    pass


class SizeMismatch(MatReadError):
    pass


class PathError(LookupError):
    pass


class NoSuchField(PathError):
    pass


class IndexOutOfRange(PathError):
    pass


class TypeMismatch(PathError):
    pass


# data element types
miINT8, miUINT8, miINT16, miUINT16, miINT32, miUINT32 = 1, 2, 3, 4, 5, 6
miSINGLE, miDOUBLE, miINT64, miUINT64 = 7, 9, 12, 13
miMATRIX, miCOMPRESSED, miUTF8, miUTF16, miUTF32 = 14, 15, 16, 17, 18

_MI_DTYPES = {
    miINT8: "i1",
    miUINT8: "u1",
    miINT16: "i2",
    miUINT16: "u2",
    miINT32: "i4",
    miUINT32: "u4",
    miSINGLE: "f4",
    miDOUBLE: "f8",
    miINT64: "i8",
    miUINT64: "u8",
}

# array classes
mxCELL, mxSTRUCT, mxOBJECT, mxCHAR, mxSPARSE = 1, 2, 3, 4, 5
mxFUNCTION, mxOPAQUE = 16, 17

_NUMERIC_CLASSES = {
    6: ("f64", "f8"),
    7: ("f32", "f4"),
    8: ("i8", "i1"),
    9: ("u8", "u1"),
    10: ("i16", "i2"),
    11: ("u16", "u2"),
    12: ("i32", "i4"),
    13: ("u32", "u4"),
    14: ("i64", "i8"),
    15: ("u64", "u8"),
}

_FLAG_COMPLEX = 0x0800
_FLAG_LOGICAL = 0x0200
_MAX_DEPTH = 64


@dataclass(frozen=True)
class NumericArray:
    kind: str
    dims: tuple[int, ...]
    data: np.ndarray = field(repr=False)
    logical: bool = False

    def to_numpy(self) -> np.ndarray:
        """Shaped array in the stored element kind."""
        return self.data.reshape(self.dims, order="F")

    def as_float(self) -> np.ndarray:
        return self.to_numpy().astype(np.float64)

    def scalar(self) -> float:
        if self.data.size != 1:
            raise TypeMismatch(f"expected a scalar, found dims {self.dims}")
        return float(self.data[0])


@dataclass(frozen=True)
class CharArray:
    dims: tuple[int, ...]
    text: str

    def rows(self) -> list[str]:
        if len(self.dims) == 2 and self.dims[0] == 0:
            return []
        if len(self.dims) != 2 or self.dims[0] <= 1:
            return [self.text]
        n_rows, n_cols = self.dims
        return [self.text[i * n_cols:(i + 1) * n_cols] for i in range(n_rows)]


@dataclass(frozen=True)
class StructArray:
    dims: tuple[int, ...]
    fields: tuple[str, ...]
    elements: tuple[dict, ...] = field(repr=False)

    def __len__(self) -> int:
        return len(self.elements)

    def __getitem__(self, name: str) -> "MatValue":
        if len(self.elements) != 1:
            raise TypeMismatch(
                f"field access on a struct array with {len(self.elements)} elements"
            )
        try:
            return self.elements[0][name]
        except KeyError:
            raise NoSuchField(name) from None

    def get(self, name: str, default=None):
        if len(self.elements) != 1:
            return default
        return self.elements[0].get(name, default)


@dataclass(frozen=True)
class CellArray:
    dims: tuple[int, ...]
    elements: tuple = field(repr=False)


@dataclass(frozen=True)
class Empty:
    dims: tuple[int, ...] = (0, 0)
    mclass: int = 6


MatValue = Union[NumericArray, CharArray, StructArray, CellArray, Empty]


@dataclass(frozen=True)
class MatFile:
    header: str
    version: int
    byte_order: str  # "<" or ">"
    variables: dict[str, MatValue]

    def __getitem__(self, name: str) -> MatValue:
        return self.variables[name]

    def __contains__(self, name: str) -> bool:
        return name in self.variables


class _Reader:
    def __init__(self, buf: bytes, order: str):
        self.buf = memoryview(buf)
        self.order = order
        self.pos = 0

    def remaining(self) -> int:
        return len(self.buf) - self.pos

    def take(self, n: int) -> memoryview:
        if n < 0 or self.pos + n > len(self.buf):
            raise Truncated(
                f"need {n} bytes at offset {self.pos}, {self.remaining()} left"
            )
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def tag(self) -> tuple[int, int, bool]:
        """Return (type, nbytes, small) and leave pos at the payload."""
        raw = self.take(8)
        (first,) = struct.unpack(self.order + "I", raw[:4])
        if first >> 16:
            # small data element: payload lives in the second half of the tag
            self.pos -= 4
            return first & 0xFFFF, first >> 16, True
        (nbytes,) = struct.unpack(self.order + "I", raw[4:])
        return first, nbytes, False

    def element(self) -> tuple[int, memoryview]:
        mtype, nbytes, small = self.tag()
        if small:
            if nbytes > 4:
                raise BadStream(f"small element claims {nbytes} bytes")
            payload = self.take(4)[:nbytes]
            return mtype, payload
        payload = self.take(nbytes)
        pad = (-nbytes) % 8
        if mtype != miCOMPRESSED and pad:
            # final element may omit its padding
            self.pos = min(self.pos + pad, len(self.buf))
        return mtype, payload


def _numbers(mtype: int, payload: memoryview, order: str) -> np.ndarray:
    try:
        dt = np.dtype(_MI_DTYPES[mtype]).newbyteorder(order)
    except KeyError:
        raise BadStream(f"data type {mtype} cannot hold numbers") from None
    if len(payload) % dt.itemsize:
        raise BadStream(f"{len(payload)} bytes is not a multiple of {dt.itemsize}")
    return np.frombuffer(payload, dtype=dt)


def _decode_text(mtype: int, payload: memoryview, order: str) -> str:
    raw = bytes(payload)
    try:
        if mtype in (miUTF8, miINT8, miUINT8):
            return raw.decode("utf-8")
        if mtype in (miUTF16, miUINT16, miINT16):
            return raw.decode("utf-16-le" if order == "<" else "utf-16-be")
        if mtype == miUTF32:
            return raw.decode("utf-32-le" if order == "<" else "utf-32-be")
    except UnicodeDecodeError as exc:
        raise BadStream(f"undecodable character data: {exc.reason}") from None
    raise BadStream(f"data type {mtype} cannot hold characters")


def _parse_matrix(payload: memoryview, order: str, depth: int) -> tuple[str, MatValue]:
    if depth > _MAX_DEPTH:
        raise BadStream("nesting too deep")
    if len(payload) == 0:
        return "", Empty()
    r = _Reader(payload, order)

    mtype, flags_raw = r.element()
    flags = _numbers(mtype, flags_raw, order) if mtype == miUINT32 else None
    if flags is None or flags.size < 1:
        raise BadStream("missing array flags")
    mclass = int(flags[0]) & 0xFF
    bits = int(flags[0]) & 0xFF00

    mtype, dims_raw = r.element()
    if mtype != miINT32:
        raise BadStream("dimensions must be int32")
    dims = tuple(int(d) for d in _numbers(mtype, dims_raw, order))
    if len(dims) < 2 or any(d < 0 for d in dims):
        raise BadStream(f"invalid dimensions {dims}")
    n = prod(dims)

    mtype, name_raw = r.element()
    if mtype not in (miINT8, miUINT8):
        raise BadStream("array name must be int8")
    try:
        name = bytes(name_raw).decode("ascii")
    except UnicodeDecodeError:
        raise BadStream("non-ascii array name") from None

    if mclass in _NUMERIC_CLASSES:
        kind, dtype = _NUMERIC_CLASSES[mclass]
        if bits & _FLAG_COMPLEX:
            raise UnsupportedArray(f"complex array {name!r}")
        mtype, real = r.element()
        data = _numbers(mtype, real, order)
        if data.size != n:
            raise BadStream(f"{name!r}: {data.size} values for dims {dims}")
        if n == 0:
            return name, Empty(dims, mclass)
        data = data.astype(np.dtype(dtype).newbyteorder("="))
        return name, NumericArray(kind, dims, data, bool(bits & _FLAG_LOGICAL))

    if mclass == mxCHAR:
        if n == 0:
            # empty strings may omit the data element entirely
            return name, CharArray(dims, "")
        mtype, raw = r.element()
        text = _decode_text(mtype, raw, order)
        if len(text) != n:
            raise BadStream(f"{name!r}: {len(text)} characters for dims {dims}")
        if len(dims) == 2 and dims[0] > 1:
            # stored column-major; rebuild row-major text
            text = "".join(text[i::dims[0]] for i in range(dims[0]))
        return name, CharArray(dims, text)

    if mclass == mxCELL:
        if n * 8 > r.remaining():
            raise Truncated(f"cell {name!r} claims {n} elements")
        elems = []
        for _ in range(n):
            elems.append(_parse_child(r, order, depth))
        return name, CellArray(dims, tuple(elems))

    if mclass == mxSTRUCT:
        mtype, raw = r.element()
        lens = _numbers(mtype, raw, order) if mtype == miINT32 else None
        if lens is None or lens.size != 1 or lens[0] <= 0:
            raise BadStream("bad field name length")
        width = int(lens[0])
        mtype, raw = r.element()
        if mtype not in (miINT8, miUINT8) or len(raw) % width:
            raise BadStream("bad field names")
        names = []
        for k in range(len(raw) // width):
            chunk = bytes(raw[k * width:(k + 1) * width]).split(b"\0", 1)[0]
            try:
                names.append(chunk.decode("ascii"))
            except UnicodeDecodeError:
                raise BadStream("non-ascii field name") from None
        if len(set(names)) != len(names) or any(not s for s in names):
            raise BadStream(f"invalid field names in {name!r}")
        if names and n * len(names) * 8 > r.remaining():
            raise Truncated(f"struct {name!r} claims {n} elements")
        if not names and n > 1 << 20:
            raise BadStream(f"struct {name!r} claims {n} empty elements")
        elems = []
        for _ in range(n):
            elems.append({f: _parse_child(r, order, depth) for f in names})
        return name, StructArray(dims, tuple(names), tuple(elems))

    if mclass in (mxOBJECT, mxSPARSE, mxFUNCTION, mxOPAQUE):
        raise UnsupportedArray(f"array class {mclass} in {name!r}")
    raise UnknownClass(f"unrecognized array class {mclass} in {name!r}")


def _parse_child(r: _Reader, order: str, depth: int) -> MatValue:
    mtype, payload = r.element()
    if mtype != miMATRIX:
        raise BadStream(f"expected a matrix element, found type {mtype}")
    return _parse_matrix(payload, order, depth + 1)[1]


def _inflate(payload: memoryview) -> bytes:
    try:
        d = zlib.decompressobj()
        out = d.decompress(payload)
        out += d.flush()
    except zlib.error as exc:
        if "incorrect data check" in str(exc):
            raise BadChecksum(str(exc)) from None
        raise BadStream(f"corrupt compressed element: {exc}") from None
    if not d.eof:
        raise BadStream("compressed element ends early")
    return out


def _top_level(r: _Reader, order: str, variables: dict) -> None:
    mtype, payload = r.element()
    if mtype == miCOMPRESSED:
        inner = _Reader(_inflate(payload), order)
        while inner.remaining() > 0:
            _top_level(inner, order, variables)
        return
    if mtype != miMATRIX:
        raise BadStream(f"unexpected top-level element type {mtype}")
    name, value = _parse_matrix(payload, order, 0)
    if not name:
        # unnamed top-level data belongs to the MATLAB subsystem
        return
    if name in variables:
        raise BadStream(f"duplicate variable {name!r}")
    variables[name] = value


def parse_mat(data: bytes) -> MatFile:
    """Decode a complete MAT-file Level 5 byte stream.

    Raises
    ------
    UnsupportedVersion
        v4 files (no 128-byte header) and HDF5-based v7.3 files.
    Truncated, BadStream, BadChecksum, UnknownClass, UnsupportedArray
        On malformed or unsupported content.
    """
    if len(data) < 128:
        raise Truncated(f"header needs 128 bytes, got {len(data)}")
    head = bytes(data[:128])
    indicator = head[126:128]
    if indicator == b"IM":
        order = "<"
    elif indicator == b"MI":
        order = ">"
    else:
        raise UnsupportedVersion("no Level 5 endian indicator (v4 file?)")
    (version,) = struct.unpack(order + "H", head[124:126])
    if version == 0x0200 or bytes(data[512:520]) == b"\x89HDF\r\n\x1a\n":
        raise UnsupportedVersion("MAT-file v7.3 (HDF5) is not supported")
    if version != 0x0100:
        raise UnsupportedVersion(f"unknown MAT-file version 0x{version:04x}")
    header = head[:116].decode("latin-1").rstrip(" \0")

    r = _Reader(bytes(data), order)
    r.pos = 128
    variables: dict[str, MatValue] = {}
    while r.remaining() > 0:
        if r.remaining() < 8 and not any(r.buf[r.pos:]):
            break  # trailing padding
        _top_level(r, order, variables)
    return MatFile(header, version, order, variables)


def load_mat(path: str | Path) -> MatFile:
    return parse_mat(Path(path).read_bytes())


def read_fdt(data: bytes, n_channels: int, n_samples_total: int) -> np.ndarray:
    """Decode a raw little-endian float32 payload, channel-fastest.

    Returns a float64 array of shape ``(n_channels, n_samples_total)``.
    """
    expected = 4 * n_channels * n_samples_total
    if len(data) != expected:
        raise SizeMismatch(
            f"payload has {len(data)} bytes, expected {expected} "
            f"for {n_channels} x {n_samples_total} float32"
        )
    flat = np.frombuffer(data, dtype="<f4")
    return flat.reshape((n_channels, n_samples_total), order="F").astype(np.float64)


def get_path(file: MatFile, path: list) -> MatValue:
    """Follow struct field names and 0-based element indices into ``file``.

    The first item names a top-level variable. A field name applied to a
    struct array requires it to hold exactly one element.
    """
    if not path:
        raise ValueError("path must not be empty")
    head, *rest = path
    try:
        node: MatValue = file.variables[head]
    except (KeyError, TypeError):
        raise NoSuchField(f"no variable {head!r}") from None
    for step in rest:
        if isinstance(step, str):
            if not isinstance(node, StructArray):
                raise TypeMismatch(f"cannot take field {step!r} of {type(node).__name__}")
            node = node[step]
        elif isinstance(step, (int, np.integer)):
            if isinstance(node, StructArray):
                if not 0 <= step < len(node.elements):
                    raise IndexOutOfRange(f"index {step} outside {len(node.elements)}")
                node = StructArray((1, 1), node.fields, (node.elements[step],))
            elif isinstance(node, CellArray):
                if not 0 <= step < len(node.elements):
                    raise IndexOutOfRange(f"index {step} outside {len(node.elements)}")
                node = node.elements[step]
            else:
                raise TypeMismatch(f"cannot index into {type(node).__name__}")
        else:
            raise TypeMismatch(f"invalid path step {step!r}")
    return node
