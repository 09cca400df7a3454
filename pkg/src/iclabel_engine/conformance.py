"""Comparison of engine outputs against reference dumps.

Dump layout
-----------
An engine dump is a directory holding ``manifest.json`` and one raw file
per array::

    {"format": "iclabel-engine-dump", "version": 1,
     "provenance": "...",
     "arrays": [{"name": "topo", "kind": "f64", "shape": [n, 32, 32],
                 "file": "topo.f64"}, ...]}

Raw files are little-endian IEEE-754 doubles in row-major (C) order, no
header. A MAT-file (Level 5) holding variables with the same names is
accepted as a read-only dump; its arrays must keep the component axis
first (trailing singleton extents are tolerated).

Relative differences use the reference value as denominator. A pair that
is equal (both zero, or both NaN failure markers) contributes 0 and is
counted as skipped when the denominator is zero; a zero or NaN reference
against a different test value contributes infinity.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .matreader import Empty, NumericArray, load_mat

__all__ = [
    "ARRAY_NAMES",
    "EXPECTED_TAIL",
    "DEFAULT_TOLERANCE",
    "PAPER_TOLERANCES",
    "ConformanceError",
    "LengthMismatch",
    "EmptyInput",
    "NoOverlap",
    "ShapeMismatch",
    "FeatureDump",
    "ArrayComparison",
    "ComparisonReport",
    "mdp",
    "decimal_histogram",
    "component_histogram",
    "compare_dumps",
    "write_dump",
    "read_dump",
]

ARRAY_NAMES = ("topo", "psd", "acf", "probs")
EXPECTED_TAIL = {"topo": (32, 32), "psd": (100,), "acf": (100,), "probs": (7,)}
DEFAULT_TOLERANCE = 1e-3
# fractions, not percent
PAPER_TOLERANCES = {"topo": 1e-7, "psd": 1e-5, "acf": 1e-4, "probs": 1e-5}
MAX_DECIMALS = 16
# keeps exact powers of ten in their own bin despite rounding in the ratio
_BIN_NUDGE = 1e-6
_MANIFEST = "manifest.json"
_FORMAT = "iclabel-engine-dump"


class ConformanceError(Exception):
    pass


class LengthMismatch(ConformanceError):
    pass


class EmptyInput(ConformanceError):
    pass


class NoOverlap(ConformanceError):
    pass


class ShapeMismatch(ConformanceError):
    pass


@dataclass
class FeatureDump:
    arrays: dict[str, np.ndarray]
    provenance: str = ""

    def __post_init__(self):
        for name, arr in self.arrays.items():
            if name not in ARRAY_NAMES:
                raise ConformanceError(f"unknown dump array {name!r}")
            self.arrays[name] = np.asarray(arr, dtype=np.float64)


@dataclass
class ArrayComparison:
    name: str
    mdp: float
    count: int
    worst_index: tuple[int, ...] | None
    histogram: list[int]
    skipped: int
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.mdp <= self.tolerance

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "mdp": self.mdp,
            "mdp_percent": self.mdp * 100,
            "count": self.count,
            "worst_index": list(self.worst_index) if self.worst_index else None,
            "histogram": self.histogram,
            "skipped": self.skipped,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


@dataclass
class ComparisonReport:
    arrays: list[ArrayComparison] = field(default_factory=list)
    mode: str = "relative"

    @property
    def passed(self) -> bool:
        return all(a.passed for a in self.arrays)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "mode": self.mode,
            "arrays": [a.to_dict() for a in self.arrays],
        }


def _pairs(f_ref, f_test) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(f_ref, dtype=np.float64).reshape(-1)
    b = np.asarray(f_test, dtype=np.float64).reshape(-1)
    if a.size != b.size:
        raise LengthMismatch(f"{a.size} reference values vs {b.size} test values")
    if a.size == 0:
        raise EmptyInput("nothing to compare")
    return a, b


def _differences(a: np.ndarray, b: np.ndarray, mode: str = "relative"):
    """Elementwise differences and the mask of zero-denominator skips."""
    same = (a == b) | (np.isnan(a) & np.isnan(b))
    diff = np.abs(a - b)
    if mode == "absolute":
        out = np.where(same, 0.0, diff)
        out[np.isnan(out)] = np.inf
        return out, np.zeros(a.size, dtype=bool)
    if mode != "relative":
        raise ValueError(f"unknown difference mode {mode!r}")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = diff / np.abs(a)
    out = np.where(same, 0.0, out)
    out[np.isnan(out)] = np.inf
    skipped = same & ((a == 0) | np.isnan(a))
    return out, skipped


def mdp(f_ref, f_test) -> float:
    """Maximum relative absolute difference, as a fraction.

    >>> mdp([2.0], [1.0])
    0.5
    """
    a, b = _pairs(f_ref, f_test)
    return float(np.max(_differences(a, b)[0]))


def _bins(d: np.ndarray, max_decimals: int) -> np.ndarray:
    with np.errstate(divide="ignore"):
        dec = np.floor(-np.log10(d) + _BIN_NUDGE)
    return np.clip(np.nan_to_num(dec, posinf=max_decimals, neginf=0), 0, max_decimals).astype(int)


def decimal_histogram(ref, test, max_decimals: int = MAX_DECIMALS, mode: str = "relative") -> list[int]:
    """Counts per number of matching decimals, ``max_decimals + 1`` bins.

    Bin ``k`` holds pairs whose difference lies in ``(10**-(k+1), 10**-k]``;
    identical pairs land in the last bin. Pairs with a zero (or NaN)
    reference are left out.
    """
    a, b = _pairs(ref, test)
    d, skipped = _differences(a, b, mode)
    d = d[np.isfinite(d) & ~skipped]
    return np.bincount(_bins(d, max_decimals), minlength=max_decimals + 1).tolist()


def component_histogram(ref, test, max_decimals: int = MAX_DECIMALS, mode: str = "relative") -> list[int]:
    """Histogram of the per-component worst difference (first axis = component)."""
    a = np.asarray(ref, dtype=np.float64)
    b = np.asarray(test, dtype=np.float64)
    if a.shape != b.shape:
        raise LengthMismatch(f"shapes {a.shape} vs {b.shape}")
    if a.size == 0:
        raise EmptyInput("nothing to compare")
    d, _ = _differences(a.reshape(-1), b.reshape(-1), mode)
    worst = d.reshape(a.shape[0], -1).max(axis=1)
    worst = worst[np.isfinite(worst)]
    return np.bincount(_bins(worst, max_decimals), minlength=max_decimals + 1).tolist()


def compare_dumps(
    ref: FeatureDump,
    test: FeatureDump,
    tolerances: dict[str, float] | None = None,
    default_tolerance: float = DEFAULT_TOLERANCE,
    max_decimals: int = MAX_DECIMALS,
    mode: str = "relative",
) -> ComparisonReport:
    tolerances = tolerances or {}
    shared = [n for n in ARRAY_NAMES if n in ref.arrays and n in test.arrays]
    if not shared:
        raise NoOverlap(
            f"reference has {sorted(ref.arrays)}, test has {sorted(test.arrays)}"
        )
    report = ComparisonReport(mode=mode)
    for name in shared:
        a, b = ref.arrays[name], test.arrays[name]
        if a.shape != b.shape:
            raise ShapeMismatch(f"{name}: reference {a.shape} vs test {b.shape}")
        if a.size == 0:
            raise EmptyInput(f"{name} is empty")
        d, skipped = _differences(a.reshape(-1), b.reshape(-1), mode)
        finite = np.isfinite(d)
        hist = np.bincount(_bins(d[finite & ~skipped], max_decimals), minlength=max_decimals + 1)
        worst = int(np.argmax(d))
        report.arrays.append(
            ArrayComparison(
                name=name,
                mdp=float(d[worst]),
                count=int(a.size),
                worst_index=tuple(int(i) for i in np.unravel_index(worst, a.shape)),
                histogram=hist.tolist(),
                skipped=int(skipped.sum() + (~finite).sum()),
                tolerance=float(tolerances.get(name, default_tolerance)),
            )
        )
    return report


def write_dump(dump: FeatureDump, path: str | Path) -> None:
    """Write an engine dump directory atomically (staged, then renamed)."""
    path = Path(path)
    if path.exists():
        raise FileExistsError(f"{path} already exists")
    stage = Path(tempfile.mkdtemp(prefix=f".{path.name}.", dir=path.parent or "."))
    try:
        entries = []
        for name in ARRAY_NAMES:
            if name not in dump.arrays:
                continue
            arr = np.ascontiguousarray(dump.arrays[name], dtype="<f8")
            fname = f"{name}.f64"
            (stage / fname).write_bytes(arr.tobytes(order="C"))
            entries.append({"name": name, "kind": "f64", "shape": list(arr.shape), "file": fname})
        manifest = {"format": _FORMAT, "version": 1, "provenance": dump.provenance, "arrays": entries}
        (stage / _MANIFEST).write_text(json.dumps(manifest, indent=2) + "\n")
        os.replace(stage, path)
    except BaseException:
        for f in stage.iterdir():
            f.unlink()
        stage.rmdir()
        raise


def _read_engine_dump(path: Path) -> FeatureDump:
    manifest = json.loads((path / _MANIFEST).read_text())
    if manifest.get("format") != _FORMAT:
        raise ConformanceError(f"{path} is not an engine dump")
    arrays = {}
    for entry in manifest["arrays"]:
        if entry["kind"] != "f64":
            raise ConformanceError(f"unsupported element kind {entry['kind']!r}")
        raw = (path / entry["file"]).read_bytes()
        shape = tuple(entry["shape"])
        if len(raw) != 8 * math.prod(shape):
            raise ShapeMismatch(f"{entry['file']}: {len(raw)} bytes for shape {shape}")
        arrays[entry["name"]] = np.frombuffer(raw, dtype="<f8").reshape(shape)
    return FeatureDump(arrays, manifest.get("provenance", ""))


def _read_mat_dump(path: Path) -> FeatureDump:
    mat = load_mat(path)
    arrays = {}
    for name in ARRAY_NAMES:
        value = mat.variables.get(name)
        if value is None or isinstance(value, Empty):
            continue
        if not isinstance(value, NumericArray):
            raise ShapeMismatch(f"{name} in {path} is not numeric")
        arr = value.as_float()
        tail = EXPECTED_TAIL[name]
        n = arr.shape[0]
        if arr.size != n * math.prod(tail):
            raise ShapeMismatch(f"{name}: extents {arr.shape} do not fit (n, {tail})")
        arrays[name] = arr.reshape((n, *tail))
    return FeatureDump(arrays, f"MAT-file {path.name}")


def read_dump(path: str | Path) -> FeatureDump:
    path = Path(path)
    if path.is_dir():
        return _read_engine_dump(path)
    return _read_mat_dump(path)
