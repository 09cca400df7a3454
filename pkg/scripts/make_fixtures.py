"""Regenerate the MAT-file and EEGLAB fixtures under tests/fixtures/.

The files are written with scipy.io.savemat (and h5py for the v7.3 case),
which serves as the independent reference writer for the parser tests.
Run from the repository root:

    python scripts/make_fixtures.py
"""

from __future__ import annotations

import io
from pathlib import Path

import h5py
import numpy as np
import scipy.io

OUT = Path(__file__).resolve().parents[1] / "tests" / "fixtures"


def save(name: str, variables: dict, compress: bool = False) -> None:
    buf = io.BytesIO()
    scipy.io.savemat(buf, variables, format="5", do_compression=compress, oned_as="row")
    (OUT / name).write_bytes(buf.getvalue())


def matrix_fixtures() -> None:
    a = np.array([[1.0, 3.0], [2.0, 4.0]])
    save("matrix_2x2.mat", {"a": a})
    save("matrix_2x2_z.mat", {"a": a}, compress=True)
    save("header_only.mat", {})


def numeric_kinds() -> dict:
    return {
        "f64": np.arange(6, dtype=np.float64).reshape(2, 3) / 4,
        "f32": np.array([[1.5, -2.25, 3.0]], dtype=np.float32),
        "i8": np.array([-128, 0, 127], dtype=np.int8),
        "u8": np.array([0, 200, 255], dtype=np.uint8),
        "i16": np.array([-30000, 7], dtype=np.int16),
        "u16": np.array([65535, 1], dtype=np.uint16),
        "i32": np.array([[-2**31, 2**31 - 1]], dtype=np.int32),
        "u32": np.array([2**32 - 1], dtype=np.uint32),
        "i64": np.array([-(2**40)], dtype=np.int64),
        "flag": np.array([True, False, True]),
        "cube": np.arange(24, dtype=np.float64).reshape(2, 3, 4),
        "empty": np.zeros((0, 0)),
    }


def tree_fixtures() -> None:
    save("numeric.mat", numeric_kinds())
    text = {
        "word": "abc",
        "block": np.array(["ab", "cd"]),
        "unicode": "µV Ωhm",
        "blank": "",
    }
    save("char.mat", text)

    cell = np.empty((1, 3), dtype=object)
    cell[0, 0] = 1.0
    cell[0, 1] = "two"
    cell[0, 2] = np.array([[3.0, 4.0, 5.0]])
    inner = {"depth": 2.0, "tag": "in"}
    s = {
        "num": 7.0,
        "name": "hello",
        "vec": np.array([1, 2, 3], dtype=np.float32),
        "inner": inner,
        "items": cell,
    }
    arr = np.zeros((1, 2), dtype=[("x", object), ("label", object)])
    arr[0, 0] = (1.0, "first")
    arr[0, 1] = (2.0, "second")
    save("struct.mat", {"s": s, "arr": arr})
    save("cell.mat", {"c": cell})

    everything = {**numeric_kinds(), **text, "s": s, "arr": arr, "c": cell}
    save("mixed.mat", everything)
    save("mixed_z.mat", everything, compress=True)


def v73_fixture() -> None:
    path = OUT / "v73.mat"
    with h5py.File(path, "w", userblock_size=512) as f:
        f.create_dataset("a", data=np.arange(4.0).reshape(2, 2))
    header = b"MATLAB 7.3 MAT-file, Platform: GLNXA64, Created on: Thu Jan  1 00:00:00 2026 HDF5 schema 1.00 ."
    header = header.ljust(116, b" ") + b"\0" * 8 + b"\x00\x02" + b"IM"
    with open(path, "r+b") as f:
        f.write(header.ljust(512, b"\0"))


# electrode layout: vertex, two rings and an outer ring (EEGLAB polar convention)
def montage(n_ring1=5, n_ring2=6) -> tuple[list[str], np.ndarray, np.ndarray]:
    theta = [0.0]
    radius = [0.0]
    for k in range(n_ring1):
        theta.append(-180 + 360 * k / n_ring1 + 18)
        radius.append(0.23)
    for k in range(n_ring2):
        theta.append(-180 + 360 * k / n_ring2)
        radius.append(0.41)
    labels = [f"E{i + 1}" for i in range(len(theta))]
    return labels, np.array(theta), np.array(radius)


def chanlocs(labels, theta, radius, missing=()) -> np.ndarray:
    locs = np.zeros((1, len(labels)), dtype=[("labels", object), ("theta", object), ("radius", object)])
    for i, (lab, t, r) in enumerate(zip(labels, theta, radius)):
        if i in missing:
            locs[0, i] = (lab, np.zeros((0, 0)), np.zeros((0, 0)))
        else:
            locs[0, i] = (lab, float(t), float(r))
    return locs


def sources(rng, n, pnts, srate) -> np.ndarray:
    t = np.arange(pnts) / srate
    out = rng.standard_normal((n, pnts))
    out[0] += 3 * np.sin(2 * np.pi * 10 * t)  # alpha-like
    out[1] = np.cumsum(out[1]) / 10  # slow drift, eye-like
    out[2] += 4 * np.sin(2 * np.pi * 50 * t)  # line noise
    out[3] = rng.standard_normal(pnts) * 3  # broadband, muscle-like
    return out


def eeg_fixtures() -> None:
    rng = np.random.default_rng(20240601)
    labels, theta, radius = montage()
    n = len(labels)
    mixing = rng.standard_normal((n, n)) + 2 * np.eye(n)
    weights = np.linalg.inv(mixing)

    # epoched, EEG struct, data inline as single precision
    srate, pnts, trials = 128, 256, 6
    src = sources(rng, n, pnts * trials, srate)
    data = (mixing @ src).reshape(n, trials, pnts).transpose(0, 2, 1)
    eeg = {
        "setname": "synthetic epoched",
        "nbchan": float(n),
        "srate": float(srate),
        "pnts": float(pnts),
        "trials": float(trials),
        "data": data.astype(np.float32),
        "icaweights": weights,
        "icasphere": np.eye(n),
        "icawinv": mixing,
        "icachansind": np.arange(1, n + 1, dtype=np.float64),
        "icaact": np.zeros((0, 0)),
        "chanlocs": chanlocs(labels, theta, radius),
        "ref": "common",
    }
    save("synthetic_epoched.set", {"EEG": eeg})

    # continuous, flat layout, data in an .fdt sidecar, one unlocated channel
    # and ICA on a subset of channels
    srate, pnts = 100, 2000
    keep = [i for i in range(n) if i != 4]
    sub_mixing = mixing[np.ix_(keep, keep)]
    src = sources(rng, len(keep), pnts, srate)
    data = np.zeros((n, pnts))
    data[keep] = sub_mixing @ src
    data[4] = rng.standard_normal(pnts)
    fdt = data.astype("<f4").tobytes(order="F")
    (OUT / "synthetic_continuous.fdt").write_bytes(fdt)
    flat = {
        "setname": "synthetic continuous",
        "nbchan": float(n),
        "srate": float(srate),
        "pnts": float(pnts),
        "trials": 1.0,
        "data": "synthetic_continuous.fdt",
        "icaweights": np.linalg.inv(sub_mixing),
        "icasphere": np.eye(len(keep)),
        "icawinv": sub_mixing,
        "icachansind": np.array(keep, dtype=np.float64) + 1,
        "chanlocs": chanlocs(labels, theta, radius, missing=(4,)),
    }
    save("synthetic_continuous.set", flat, compress=True)


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    matrix_fixtures()
    tree_fixtures()
    v73_fixture()
    eeg_fixtures()
    for p in sorted(OUT.iterdir()):
        print(f"{p.stat().st_size:>9}  {p.name}")


if __name__ == "__main__":
    main()
