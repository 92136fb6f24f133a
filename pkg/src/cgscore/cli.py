"""Command-line interface.

Subcommands: ``score``, ``synth``, ``detect``, ``prune``, ``correlate`` and
``diagnose``. Exit codes: 0 success, 2 input/validation error, 3 numerical
failure (singular Gram matrix), 4 internal invariant violation.

Every command that writes files also writes ``<out>.manifest.json`` holding
the resolved flags, input fingerprints, tool version and wall time.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from cgscore import __version__
from cgscore.analysis import (
    class_stats,
    correlate,
    detection_curve,
    inverse_identity_diagnostic,
    partial_sign_split,
    prune_order,
    sigma_spectrum_check,
)
from cgscore.dataset import (
    DatasetError,
    inject_label_noise,
    load_dataset,
    load_mask_csv,
    save_binary,
    save_mask_csv,
    synth_gaussian,
    synth_gaussian_multiclass,
)
from cgscore.kernel import gram
from cgscore.linalg import invert_spd
from cgscore.multiclass import StochasticConfig, binary_view_for_class, read_score_csv, score_all, write_score_csv

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3
EXIT_INTERNAL = 4


class InputError(Exception):
    pass


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _manifest_path(out) -> Path:
    out = Path(out)
    return out.with_name(out.name + ".manifest.json")


def _write_manifest(args, inputs: list, outputs: list, started: float) -> None:
    flags = {k: v for k, v in vars(args).items() if k not in ("func",)}
    _write_json(
        _manifest_path(outputs[0]),
        {
            "command": args.command,
            "flags": flags,
            "seed": flags.get("seed"),
            "inputs": {str(p): _sha256(p) for p in inputs},
            "outputs": [str(p) for p in outputs],
            "version": __version__,
            "duration_s": round(time.perf_counter() - started, 6),
        },
    )


def _threads(value) -> int:
    if value is None:
        value = os.environ.get("CGV_THREADS", "1")
    try:
        n = int(value)
    except ValueError:
        raise InputError(f"invalid thread count {value!r}") from None
    if n < 1:
        raise InputError(f"thread count must be >= 1, got {n}")
    return n


def _score_column(path, column: str | None) -> np.ndarray:
    """Read one numeric column from a CSV; defaults to ``cg`` or the last column."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        rows = list(reader)
    if not header:
        raise InputError(f"{path}: empty file")
    header = [h.strip() for h in header]
    if column is None:
        column = "cg" if "cg" in header else header[-1]
    if column not in header:
        raise InputError(f"{path}: no column {column!r}")
    j = header.index(column)
    try:
        return np.array([float(r[j]) for r in rows if r])
    except (ValueError, IndexError) as exc:
        raise InputError(f"{path}: bad value in column {column!r}: {exc}") from None


# ---------------------------------------------------------------- commands


def cmd_score(args) -> int:
    started = time.perf_counter()
    threads = _threads(args.threads)
    ds = load_dataset(args.input, args.format)
    config = StochasticConfig(neg_ratio=args.ratio, runs=args.runs, seed=args.seed, ridge=args.ridge)
    table = score_all(ds, config, threads=threads)
    write_score_csv(table, args.out)
    out = Path(args.out)
    _write_manifest(args, [args.input], [out, out.with_name(out.name + ".json")], started)
    return EXIT_OK


def cmd_synth(args) -> int:
    started = time.perf_counter()
    if args.classes == 2:
        ds = synth_gaussian(args.n_per_class, args.dim, args.offset, args.variance, args.seed)
    else:
        ds = synth_gaussian_multiclass(args.classes, args.n_per_class, args.dim, args.offset, args.variance, args.seed)
    ds, mask = inject_label_noise(ds, args.noise, args.seed + 1)
    save_binary(ds, args.out)
    mask_out = Path(args.mask_out) if args.mask_out else Path(args.out).with_name(Path(args.out).name + ".mask.csv")
    save_mask_csv(mask, ds.labels, mask_out)
    _write_manifest(args, [], [Path(args.out), mask_out], started)
    return EXIT_OK


def cmd_detect(args) -> int:
    started = time.perf_counter()
    table = read_score_csv(args.scores)
    mask = load_mask_csv(args.mask)
    scores = _column(table, args.column)
    if mask.flipped.size != scores.size:
        raise InputError(f"scores ({scores.size}) and mask ({mask.flipped.size}) are not aligned")
    grid = np.linspace(1.0 / args.grid_size, 1.0, args.grid_size)
    curve = detection_curve(scores, mask, grid)
    status = np.where(mask.flipped, 1, 0)
    report = {
        "detection": curve.to_dict(),
        "class_stats": {str(k): v for k, v in class_stats(scores, table.labels).items()},
        "noise_stats": {("noisy" if k else "clean"): v for k, v in class_stats(scores, status).items()},
    }
    if "partial_cross" in table.columns:
        report["partial_sign"] = partial_sign_split(table["partial_cross"], mask)
    _write_json(args.out, report)
    _write_manifest(args, [args.scores, args.mask], [Path(args.out)], started)
    return EXIT_OK


def _column(table, name: str) -> np.ndarray:
    if name not in table.columns:
        raise InputError(f"score file has no column {name!r}")
    return table[name]


def cmd_prune(args) -> int:
    started = time.perf_counter()
    table = read_score_csv(args.scores)
    scores = _column(table, args.column)
    order = prune_order(scores, table.labels, args.direction)
    with Path(args.out).open("w", newline="", encoding="utf-8") as fh:
        fh.write("rank,index,label,score\n")
        for rank, i in enumerate(order):
            fh.write(f"{rank},{int(i)},{int(table.labels[i])},{'%.17g' % scores[i]}\n")
    _write_manifest(args, [args.scores], [Path(args.out)], started)
    return EXIT_OK


def cmd_correlate(args) -> int:
    started = time.perf_counter()
    a = _score_column(args.a, args.column_a)
    b = _score_column(args.b, args.column_b)
    if a.size != b.size:
        raise InputError(f"score files are not aligned ({a.size} vs {b.size} rows)")
    result = correlate(a, b).to_dict()
    report = {"correlations": [{"a": str(args.a), "b": str(args.b), **result}]}
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
        _write_manifest(args, [args.a, args.b], [Path(args.out)], started)
    else:
        print(text)
    return EXIT_OK


def cmd_diagnose(args) -> int:
    started = time.perf_counter()
    ds = load_dataset(args.input, args.format)
    class_c = int(ds.classes[0]) if args.class_id is None else args.class_id
    view = binary_view_for_class(ds, class_c, neg_ratio=ds.n, seed=args.seed, run_index=0)
    h = gram(ds, view)
    inv = invert_spd(h, ridge=args.ridge)
    ident = inverse_identity_diagnostic(inv)
    spectrum = sigma_spectrum_check(h, args.trials, args.seed)
    report = {
        "diagnostics": {
            "class": class_c,
            "size": h.size,
            "min_pivot": inv.min_pivot,
            "inverse_identity": ident,
            "sigma_spectrum": {
                "trials": args.trials,
                "rel_gap": spectrum["rel_gap"],
                "eig_H": spectrum["eig_H"].tolist(),
                "eig_model": spectrum["eig_model"].tolist(),
            },
        }
    }
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
        _write_manifest(args, [args.input], [Path(args.out)], started)
    else:
        print(json.dumps({"diagnostics": {**report["diagnostics"], "sigma_spectrum": {"rel_gap": spectrum["rel_gap"]}}}, indent=2))
    return EXIT_OK


# ---------------------------------------------------------------- parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cgscore", description="Complexity-gap data valuation.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("score", help="score every instance of a dataset")
    s.add_argument("--input", required=True)
    s.add_argument("--format", choices=("csv", "cgm1"), default=None)
    s.add_argument("--ratio", type=int, default=3, help="negatives per positive in each run")
    s.add_argument("--runs", type=int, default=1)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--ridge", type=float, default=None)
    s.add_argument("--threads", type=int, default=None, help="worker threads (default: $CGV_THREADS or 1)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_score)

    s = sub.add_parser("synth", help="generate the two-Gaussian benchmark")
    s.add_argument("--n-per-class", type=int, default=1000)
    s.add_argument("--dim", type=int, default=3000)
    s.add_argument("--offset", type=float, default=1.0)
    s.add_argument("--variance", type=float, default=0.25)
    s.add_argument("--classes", type=int, default=2)
    s.add_argument("--noise", type=float, default=0.0)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--mask-out", default=None)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("detect", help="label-noise detection curve")
    s.add_argument("--scores", required=True)
    s.add_argument("--mask", required=True)
    s.add_argument("--column", default="cg")
    s.add_argument("--grid-size", type=int, default=100)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_detect)

    s = sub.add_parser("prune", help="class-stratified pruning order")
    s.add_argument("--scores", required=True)
    s.add_argument("--direction", choices=("low-first", "high-first"), default="low-first")
    s.add_argument("--column", default="cg")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_prune)

    s = sub.add_parser("correlate", help="Spearman/Pearson between two score files")
    s.add_argument("--a", required=True)
    s.add_argument("--b", required=True)
    s.add_argument("--column-a", default=None)
    s.add_argument("--column-b", default=None)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_correlate)

    s = sub.add_parser("diagnose", help="inverse-identity and spectrum diagnostics")
    s.add_argument("--input", required=True)
    s.add_argument("--format", choices=("csv", "cgm1"), default=None)
    s.add_argument("--class", dest="class_id", type=int, default=None)
    s.add_argument("--trials", type=int, default=10)
    s.add_argument("--ridge", type=float, default=None)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_diagnose)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except np.linalg.LinAlgError as exc:
        print(f"cgscore: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except AssertionError as exc:
        print(f"cgscore: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except (InputError, DatasetError, ValueError, KeyError, OSError, StopIteration) as exc:
        print(f"cgscore: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
