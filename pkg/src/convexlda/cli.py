"""Command line interface.

One entry point with subcommands for fitting, transforming, evaluating,
tuning, sweeping lambda, generating synthetic data, and benchmarking.
Every output file is written atomically and carries a provenance block
(tool version, subcommand, normalized argv, seed, full config) so any
result can be reproduced by replaying its recorded argv.

Exit codes: 0 success, 1 invalid input or usage, 2 file system trouble,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys

from . import __version__
from .data import (
    SyntheticSpec,
    Dataset,
    load_dataset,
    load_idx,
    save_dataset,
    standardize,
    synth_gaussian,
)
from .errors import NumericError, ValidationError
from .ioutil import atomic_write_text, write_json
from .metrics import (
    DEFAULT_LOG_GRID,
    fit_method,
    run_protocol,
    sweep_lambda,
    tune_lambda,
)
from .model import OptimizerConfig
from .projection import load_model, save_model, transform

BENCHMARK_METHODS = ("convexlda", "fisher_lda")


class _Parser(argparse.ArgumentParser):
    """argparse parser that exits 1 (not 2) on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _label_col(text: str):
    try:
        return int(text)
    except ValueError:
        return text


def _float_list(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}: {exc}") from exc


def _int_list(text: str) -> list:
    try:
        return [int(v) for v in text.split(",") if v.strip() != ""]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}: {exc}") from exc


def _default_threads() -> int:
    try:
        return max(1, int(os.environ.get("CONVEXLDA_THREADS", "1")))
    except ValueError:
        return 1


def _add_dataset_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--input", help="CSV dataset (one sample per row)")
    parser.add_argument(
        "--label-col",
        type=_label_col,
        default="label",
        help="label column name or zero-based index (default: label)",
    )
    parser.add_argument("--delimiter", default=",", help="CSV delimiter (default ,)")
    parser.add_argument("--images", help="IDX image file (alternative to --input)")
    parser.add_argument("--labels", help="IDX label file paired with --images")
    parser.add_argument(
        "--raw-scale",
        action="store_true",
        help="keep IDX pixel values in 0..255 instead of scaling to [0, 1]",
    )


def _load_input(args) -> Dataset:
    if args.images or args.labels:
        if not (args.images and args.labels):
            raise ValidationError("--images and --labels must be given together")
        if args.input:
            raise ValidationError("give either --input or --images/--labels, not both")
        return load_idx(args.images, args.labels, scale=not args.raw_scale)
    if not args.input:
        raise ValidationError("no input data: give --input or --images/--labels")
    return load_dataset(args.input, args.label_col, delimiter=args.delimiter)


def _add_optimizer_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--max-iters", type=int, default=2000)
    parser.add_argument("--rel-tol", type=float, default=1e-8)
    parser.add_argument("--grad-tol", type=float, default=1e-6)
    parser.add_argument("--initial-step", type=float, default=1.0)
    parser.add_argument("--armijo-c", type=float, default=1e-4)
    parser.add_argument("--backtrack-factor", type=float, default=0.5)


def _optimizer(args, seed: int) -> OptimizerConfig:
    return OptimizerConfig(
        max_iters=args.max_iters,
        rel_tol=args.rel_tol,
        grad_tol=args.grad_tol,
        initial_step=args.initial_step,
        armijo_c=args.armijo_c,
        backtrack_factor=args.backtrack_factor,
        seed=seed,
    )


def _strip_threads(argv: list) -> list:
    """Drop --threads from argv: thread count affects scheduling only,
    never output bytes, so it stays out of provenance."""
    out = []
    skip = False
    for token in argv:
        if skip:
            skip = False
            continue
        if token == "--threads":
            skip = True
            continue
        if token.startswith("--threads="):
            continue
        out.append(token)
    return out


def _provenance(command: str, args, argv: list, seed) -> dict:
    config = {}
    for key, value in vars(args).items():
        if key in ("func", "threads"):
            continue
        config[key] = value
    return {
        "artifact": {"name": "convexlda", "version": __version__},
        "command": command,
        "argv": _strip_threads(list(argv)),
        "seed": seed,
        "config": config,
    }


def _csv_text(header: list, rows: list) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def _cmd_synth(args, argv) -> int:
    spec = SyntheticSpec(
        n_classes=args.classes,
        dim=args.dim,
        n_total=args.n,
        class_std=args.std,
        mean_box=args.mean_box,
        seed=args.seed,
    )
    ds = synth_gaussian(spec)
    prov = _provenance("synth", args, argv, args.seed)
    save_dataset(ds, args.out, extra_meta={"provenance": prov})
    print(f"wrote {ds.n_features}x{ds.n_samples} dataset ({ds.n_classes} classes) to {args.out}")
    return 0


def _cmd_fit(args, argv) -> int:
    ds = _load_input(args)
    mean = scale = None
    if args.standardize:
        ds, mean, scale = standardize(ds)
    model = fit_method(
        ds,
        args.method,
        args.dim,
        args.seed,
        lambda_=args.lambda_,
        gamma=args.gamma,
        ridge=args.ridge,
        opt=_optimizer(args, args.seed),
    )
    if mean is not None:
        model.train_mean = mean
        model.train_scale = scale
    prov = _provenance("fit", args, argv, args.seed)
    save_model(model, args.out, extra={"provenance": prov})
    diag = model.diagnostics
    if args.method == "convexlda":
        print(
            f"fit {args.method} p={args.dim}: cost={diag['final_cost']:.6g} "
            f"(L1={diag['L1']:.6g}, L2={diag['L2']:.6g}) "
            f"iterations={diag['iterations']} converged={diag['converged']}"
        )
    else:
        print(f"fit {args.method} p={args.dim}: ridge={diag['ridge']:.6g}")
    print(f"wrote model to {args.out}")
    return 0


def _cmd_transform(args, argv) -> int:
    model = load_model(args.model)
    ds = _load_input(args)
    Z = transform(model, ds.X)
    embedded = Dataset(
        Z,
        ds.labels,
        feature_names=tuple(f"z{i}" for i in range(Z.shape[0])),
        class_names=ds.class_names,
    )
    prov = _provenance("transform", args, argv, None)
    save_dataset(embedded, args.out, extra_meta={"provenance": prov})
    print(f"wrote {Z.shape[0]}x{Z.shape[1]} embedding to {args.out}")
    return 0


def _cmd_eval(args, argv) -> int:
    ds = _load_input(args)
    report = run_protocol(
        ds,
        args.method,
        args.dim,
        args.split,
        args.knn,
        args.repeats,
        args.seed,
        lambda_=args.lambda_,
        gamma=args.gamma,
        ridge=args.ridge,
        opt=_optimizer(args, args.seed),
        pca_variance=args.pca_variance,
        threads=args.threads,
    )
    prov = _provenance("eval", args, argv, args.seed)
    write_json(args.out, {"provenance": prov, "report": report.to_dict()})
    flag = " (partial)" if report.partial else ""
    print(
        f"{args.method} p={args.dim}: accuracy {report.mean_accuracy:.4f} "
        f"+/- {report.std_accuracy:.4f} over {len(report.per_repeat_accuracy)} repeats{flag}"
    )
    print(f"wrote report to {args.out}")
    return 0


def _cmd_tune(args, argv) -> int:
    ds = _load_input(args)
    best, curve = tune_lambda(
        ds,
        args.dim,
        args.folds,
        args.knn,
        log_grid=args.grid,
        refine_steps=args.refine_steps,
        seed=args.seed,
        gamma=args.gamma,
        opt=_optimizer(args, args.seed),
    )
    prov = _provenance("tune", args, argv, args.seed)
    write_json(args.out, {"provenance": prov, "best_lambda": best, "curve": curve})
    print(f"best lambda: {best:g}")
    print(f"wrote tuning curve ({len(curve)} points) to {args.out}")
    return 0


def _cmd_sweep(args, argv) -> int:
    ds = _load_input(args)
    report = sweep_lambda(
        ds,
        args.dim,
        args.lambdas,
        gamma=args.gamma,
        opt=_optimizer(args, args.seed),
    )
    prov = _provenance("sweep-lambda", args, argv, args.seed)
    write_json(args.out, {"provenance": prov, "report": report.to_dict()})
    if args.csv:
        rows = [
            (f"{lam:g}", metric, subject, value)
            for lam, metric, subject, value in report.csv_rows()
        ]
        atomic_write_text(args.csv, _csv_text(["lambda", "metric", "subject", "value"], rows))
        print(f"wrote flat metrics to {args.csv}")
    failed = sum(1 for e in report.entries if e.get("failed"))
    print(f"swept {len(report.lambdas)} lambda values ({failed} failed); wrote {args.out}")
    return 0


def _cmd_benchmark(args, argv) -> int:
    ds = _load_input(args)
    for method in args.methods:
        if method not in BENCHMARK_METHODS:
            raise ValidationError(
                f"unknown benchmark method {method!r}; choose from {BENCHMARK_METHODS}"
            )
    cells = []
    for method in args.methods:
        for dim in args.dims:
            if method == "fisher_lda" and dim > ds.n_classes - 1:
                cells.append(
                    {
                        "method": method,
                        "dim": dim,
                        "status": "invalid",
                        "reason": f"p={dim} exceeds M-1={ds.n_classes - 1}",
                    }
                )
                continue
            try:
                report = run_protocol(
                    ds,
                    method,
                    dim,
                    args.split,
                    args.knn,
                    args.repeats,
                    args.seed,
                    lambda_=args.lambda_,
                    gamma=args.gamma,
                    ridge=args.ridge,
                    opt=_optimizer(args, args.seed),
                    pca_variance=args.pca_variance,
                    threads=args.threads,
                )
            except NumericError as exc:
                cells.append(
                    {"method": method, "dim": dim, "status": "failed", "reason": str(exc)}
                )
                continue
            cells.append(
                {"method": method, "dim": dim, "status": "ok", "report": report.to_dict()}
            )
    prov = _provenance("benchmark", args, argv, args.seed)
    doc = {
        "provenance": prov,
        "dataset": {"d": ds.n_features, "n": ds.n_samples, "M": ds.n_classes},
        "cells": cells,
    }
    write_json(args.out, doc)
    if args.csv:
        rows = []
        for cell in cells:
            if cell["status"] == "ok":
                rep = cell["report"]
                rows.append(
                    (
                        cell["method"],
                        cell["dim"],
                        "ok",
                        f"{rep['mean_accuracy']:.6f}",
                        f"{rep['std_accuracy']:.6f}",
                        len(rep["failed_repeats"]),
                        "",
                    )
                )
            else:
                rows.append((cell["method"], cell["dim"], cell["status"], "", "", "", cell["reason"]))
        header = ["method", "dim", "status", "mean_accuracy", "std_accuracy", "failed_repeats", "reason"]
        atomic_write_text(args.csv, _csv_text(header, rows))
        print(f"wrote benchmark table to {args.csv}")
    for cell in cells:
        if cell["status"] == "ok":
            rep = cell["report"]
            print(
                f"{cell['method']:>10} p={cell['dim']}: "
                f"{rep['mean_accuracy']:.4f} +/- {rep['std_accuracy']:.4f}"
            )
        else:
            print(f"{cell['method']:>10} p={cell['dim']}: {cell['status']} ({cell['reason']})")
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="convexlda",
        description="Supervised linear dimensionality reduction around class centroids.",
    )
    parser.add_argument("--version", action="version", version=f"convexlda {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a Gaussian-blob dataset")
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--n", type=int, required=True, help="total sample count")
    p.add_argument("--std", type=float, required=True, help="isotropic class std")
    p.add_argument("--mean-box", type=float, default=50.0, help="class means are uniform in [-box, box]^dim")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output CSV path (JSON sidecar written next to it)")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("fit", help="fit an embedding and save the model JSON")
    _add_dataset_args(p)
    p.add_argument("--method", choices=BENCHMARK_METHODS, default="convexlda")
    p.add_argument("--dim", type=int, required=True, help="embedding dimension p")
    p.add_argument("--lambda", dest="lambda_", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=1e-6)
    p.add_argument("--ridge", type=float, default=None, help="fisher_lda within-scatter ridge")
    p.add_argument("--standardize", action="store_true", help="standardize features before fitting")
    p.add_argument("--seed", type=int, default=0)
    _add_optimizer_args(p)
    p.add_argument("--out", required=True, help="output model JSON path")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("transform", help="embed data with a saved model")
    _add_dataset_args(p)
    p.add_argument("--model", required=True, help="model JSON from fit")
    p.add_argument("--out", required=True, help="output CSV path for the embedded data")
    p.set_defaults(func=_cmd_transform)

    p = sub.add_parser("eval", help="repeated split/fit/k-NN accuracy protocol")
    _add_dataset_args(p)
    p.add_argument("--method", choices=BENCHMARK_METHODS, default="convexlda")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--split", type=float, default=0.8, help="train fraction (default 0.8)")
    p.add_argument("--knn", type=int, default=5)
    p.add_argument("--repeats", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lambda", dest="lambda_", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=1e-6)
    p.add_argument("--ridge", type=float, default=None)
    p.add_argument("--pca-variance", type=float, default=None, help="per-repeat PCA variance kept on train")
    p.add_argument("--threads", type=int, default=_default_threads())
    _add_optimizer_args(p)
    p.add_argument("--out", required=True, help="output report JSON path")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("tune", help="cross-validated lambda search")
    _add_dataset_args(p)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--knn", type=int, default=5)
    p.add_argument("--grid", type=_float_list, default=list(DEFAULT_LOG_GRID), help="comma-separated lambda grid")
    p.add_argument("--refine-steps", type=int, default=10)
    p.add_argument("--gamma", type=float, default=1e-6)
    p.add_argument("--seed", type=int, default=0)
    _add_optimizer_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_tune)

    p = sub.add_parser("sweep-lambda", help="embedding geometry metrics across lambda values")
    _add_dataset_args(p)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--lambdas", type=_float_list, required=True, help="comma-separated, strictly increasing")
    p.add_argument("--gamma", type=float, default=1e-6)
    p.add_argument("--seed", type=int, default=0)
    _add_optimizer_args(p)
    p.add_argument("--out", required=True, help="output JSON path")
    p.add_argument("--csv", default=None, help="optional flat CSV (lambda, metric, subject, value)")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("benchmark", help="methods x dims accuracy table")
    _add_dataset_args(p)
    p.add_argument("--methods", type=lambda s: s.split(","), default=list(BENCHMARK_METHODS))
    p.add_argument("--dims", type=_int_list, required=True, help="comma-separated embedding dimensions")
    p.add_argument("--split", type=float, default=0.8)
    p.add_argument("--knn", type=int, default=5)
    p.add_argument("--repeats", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lambda", dest="lambda_", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=1e-6)
    p.add_argument("--ridge", type=float, default=None)
    p.add_argument("--pca-variance", type=float, default=None)
    p.add_argument("--threads", type=int, default=_default_threads())
    _add_optimizer_args(p)
    p.add_argument("--out", required=True)
    p.add_argument("--csv", default=None)
    p.set_defaults(func=_cmd_benchmark)

    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args, argv)
    except ValidationError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except OSError as exc:
        sys.stderr.write(f"i/o error: {exc}\n")
        return 2
    except NumericError as exc:
        sys.stderr.write(f"numeric error: {exc}\n")
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
