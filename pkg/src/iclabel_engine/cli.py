"""Command-line entry point.

Exit codes: 0 success, 1 operational error, 2 comparison out of tolerance.
Errors are reported as a single ``error: <Kind>: <message>`` line on stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .autocorr import acf_dispatch
from .conformance import (
    ARRAY_NAMES,
    DEFAULT_TOLERANCE,
    MAX_DECIMALS,
    FeatureDump,
    compare_dumps,
    read_dump,
    write_dump,
)
from .dataset import EegDataset, load_set
from .matreader import load_mat
from .network import NetworkWeights, load_weights
from .pipeline import ClassificationTable, Compat, FeatureFailure, extract_features, predict

EXIT_OK, EXIT_ERROR, EXIT_TOLERANCE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class CliConfig:
    subcommand: str
    inputs: list[Path]
    weights: Path | None = None
    output: Path | None = None
    fmt: str = "csv"
    compat: Compat = field(default_factory=Compat)
    tolerances: dict[str, float] = field(default_factory=dict)
    default_tolerance: float = DEFAULT_TOLERANCE
    mode: str = "relative"
    threads: int = 1

    def validate(self) -> None:
        expected = 2 if self.subcommand == "compare" else 1
        if len(self.inputs) != expected:
            raise UsageError(f"{self.subcommand} takes {expected} input path(s)")
        for p in self.inputs:
            if not p.exists():
                raise FileNotFoundError(f"input not found: {p}")
        if self.subcommand == "classify" and self.weights is None:
            raise UsageError("classify needs --weights")
        if self.weights is not None and not self.weights.is_file():
            raise FileNotFoundError(f"weights not found: {self.weights}")
        if self.subcommand == "features" and self.output is None:
            raise UsageError("features needs --out")
        if self.output is not None and self.output.exists() and self.subcommand == "features":
            raise UsageError(f"output exists: {self.output}")
        if self.threads < 0:
            raise UsageError("--threads must be >= 0")


def _num(x: float) -> str:
    if np.isnan(x):
        return "NaN"
    return f"{x:.17g}"


def _json_num(x: float) -> str:
    return "null" if not np.isfinite(x) else f"{x:.17g}"


def format_csv(table: ClassificationTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["component", *table.class_names, "label"])
    for c, (row, label) in enumerate(zip(table.probabilities, table.labels)):
        w.writerow([c, *(_num(p) for p in row), label or ""])
    return buf.getvalue()


def format_json(table: ClassificationTable) -> str:
    rows = ",\n".join(
        "        [" + ", ".join(_json_num(p) for p in row) + "]"
        for row in table.probabilities
    )
    classes = json.dumps(list(table.class_names))
    labels = json.dumps(table.labels)
    failures = json.dumps({str(k): v for k, v in sorted(table.failures.items())})
    return (
        "{\n"
        '  "ic_classification": {\n'
        '    "ICLabel": {\n'
        f'      "classes": {classes},\n'
        '      "classifications": [\n'
        f"{rows}\n"
        "      ]\n"
        "    }\n"
        "  },\n"
        f'  "labels": {labels},\n'
        f'  "failures": {failures}\n'
        "}\n"
    )


def atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _emit(config: CliConfig, text: str) -> None:
    if config.output is None:
        sys.stdout.write(text)
    else:
        atomic_write(config.output, text)


def _weights(config: CliConfig) -> NetworkWeights:
    return load_weights(load_mat(config.weights))


def _classify(config: CliConfig) -> int:
    ds = load_set(config.inputs[0])
    weights = _weights(config)
    features = extract_features(ds, config.compat, config.threads)
    table = ClassificationTable(
        predict(weights, features, config.compat, config.threads), features.failures
    )
    _emit(config, format_csv(table) if config.fmt == "csv" else format_json(table))
    if table.failures:
        raise FeatureFailure(table.failures)
    return EXIT_OK


def _features(config: CliConfig) -> int:
    ds = load_set(config.inputs[0])
    weights = _weights(config) if config.weights else None
    features = extract_features(ds, config.compat, config.threads)
    arrays = {"topo": features.topo, "psd": features.psd, "acf": features.acf}
    if weights is not None:
        arrays["probs"] = predict(weights, features, config.compat, config.threads)
    c = config.compat
    provenance = (
        f"iclabel-engine {__version__}; input {config.inputs[0].name}; "
        f"reference_compat={c.reference_compat}; augment={c.augment}; "
        f"acf={features.acf_variant.value}"
    )
    write_dump(FeatureDump(arrays, provenance), config.output)
    if features.failures:
        raise FeatureFailure(features.failures)
    return EXIT_OK


def _compare(config: CliConfig) -> int:
    ref, test = (read_dump(p) for p in config.inputs)
    report = compare_dumps(
        ref,
        test,
        config.tolerances,
        config.default_tolerance,
        max_decimals=MAX_DECIMALS,
        mode=config.mode,
    )
    _emit(config, json.dumps(report.to_dict(), indent=2) + "\n")
    for a in report.arrays:
        status = "PASS" if a.passed else "FAIL"
        print(
            f"{status} {a.name}: mdp={a.mdp * 100:.3g}% tol={a.tolerance * 100:.3g}% "
            f"n={a.count} skipped={a.skipped}",
            file=sys.stderr,
        )
    return EXIT_OK if report.passed else EXIT_TOLERANCE


def describe(ds: EegDataset, compat: Compat) -> str:
    variant = acf_dispatch(ds, reference_compat=compat.reference_compat)
    positioned = sum(loc.has_position for loc in ds.chanlocs)
    return (
        f"channels: {ds.n_chan}\n"
        f"positioned_channels: {positioned}\n"
        f"srate: {ds.srate:g}\n"
        f"pnts: {ds.pnts}\n"
        f"trials: {ds.trials}\n"
        f"n_comp: {ds.n_comp}\n"
        f"ica_channels: {len(ds.ica.chan_indices)}\n"
        f"acf_variant: {variant.value}\n"
    )


def _info(config: CliConfig) -> int:
    _emit(config, describe(load_set(config.inputs[0]), config.compat))
    return EXIT_OK


_COMMANDS = {"classify": _classify, "features": _features, "compare": _compare, "info": _info}


def run(config: CliConfig) -> int:
    try:
        config.validate()
        return _COMMANDS[config.subcommand](config)
    except Exception as exc:  # noqa: BLE001 - every failure maps to exit 1
        msg = " ".join(str(exc).split())
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return EXIT_ERROR


def _tolerance(text: str) -> tuple[str, float]:
    name, sep, value = text.partition("=")
    if not sep or name not in ARRAY_NAMES:
        raise argparse.ArgumentTypeError(f"expected NAME=FRACTION with NAME in {ARRAY_NAMES}")
    try:
        return name, float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad tolerance value {value!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="iclabel-engine",
        description="Classify EEG independent components into 7 source classes.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p, n_inputs=1):
        p.add_argument("inputs", nargs=n_inputs, type=Path, metavar="PATH")
        p.add_argument("--out", type=Path, default=None, help="output path (default: stdout)")

    def compat_flags(p):
        p.add_argument("--no-reference-compat", action="store_true",
                       help="use all spectral segments and the epoch-count ACF rule")
        p.add_argument("--no-augment", action="store_true",
                       help="single forward pass instead of the 4-way average")
        p.add_argument("--threads", type=int, default=1, help="worker threads, 0 = all cores")

    p = sub.add_parser("classify", help="write per-component class probabilities")
    common(p)
    p.add_argument("--weights", type=Path, required=True)
    p.add_argument("--format", dest="fmt", choices=("csv", "json"), default="csv")
    compat_flags(p)

    p = sub.add_parser("features", help="write a feature dump directory")
    common(p)
    p.add_argument("--weights", type=Path, default=None, help="also dump probabilities")
    compat_flags(p)

    p = sub.add_parser("compare", help="compare two dumps, exit 2 when out of tolerance")
    common(p, 2)
    p.add_argument("--tol", type=_tolerance, action="append", default=[],
                   help="per-array tolerance as a fraction, e.g. probs=1e-5")
    p.add_argument("--default-tol", type=float, default=DEFAULT_TOLERANCE)
    p.add_argument("--mode", choices=("relative", "absolute"), default="relative")

    p = sub.add_parser("info", help="print a dataset summary")
    common(p)
    compat_flags(p)
    return parser


def parse_config(argv: list[str] | None = None) -> CliConfig:
    ns = build_parser().parse_args(argv)
    compat = Compat(
        reference_compat=not getattr(ns, "no_reference_compat", False),
        augment=not getattr(ns, "no_augment", False),
    )
    return CliConfig(
        subcommand=ns.subcommand,
        inputs=list(ns.inputs),
        weights=getattr(ns, "weights", None),
        output=ns.out,
        fmt=getattr(ns, "fmt", "csv"),
        compat=compat,
        tolerances=dict(getattr(ns, "tol", [])),
        default_tolerance=getattr(ns, "default_tol", DEFAULT_TOLERANCE),
        mode=getattr(ns, "mode", "relative"),
        threads=getattr(ns, "threads", 1),
    )


def main(argv: list[str] | None = None) -> int:
    try:
        config = parse_config(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage; that code is reserved for tolerance failures
        return EXIT_ERROR if exc.code else EXIT_OK
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
