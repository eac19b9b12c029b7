"""edgetree command line: train / evaluate / sweep / emit / bench / serial-send.

Every run writes a run.json manifest into the output directory with the
resolved parameters, seed, and tool versions, sufficient to reproduce it.
"""

from __future__ import annotations

import argparse
import json
import platform
import subprocess
import sys
import time
from pathlib import Path

from . import __version__, bench, cart, codegen, flowdata, metrics


def parse_label_map(text: str | None) -> dict[str, int] | None:
    """Parse 'benign=0,attack=1' style mappings."""
    if text is None:
        return None
    mapping = {}
    for part in text.split(","):
        key, _, value = part.partition("=")
        if value not in ("0", "1"):
            raise SystemExit(f"bad label mapping {part!r}: expected NAME=0 or NAME=1")
        mapping[key.strip()] = int(value)
    return mapping


def parse_depths(text: str) -> list[int]:
    """Accept '2-12' ranges and '2,4,6' lists."""
    depths = []
    for part in text.split(","):
        if "-" in part:
            lo, hi = part.split("-", 1)
            depths.extend(range(int(lo), int(hi) + 1))
        elif part.strip():
            depths.append(int(part))
    return depths


def write_manifest(out_dir: Path, subcommand: str, params: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        cc_version = subprocess.run(
            [bench.cc_command(), "--version"], capture_output=True, text=True
        ).stdout.splitlines()[0]
    except (OSError, IndexError):
        cc_version = "unavailable"
    manifest = {
        "subcommand": subcommand,
        "parameters": params,
        "tool_versions": {
            "edgetree": __version__,
            "python": platform.python_version(),
            "cc": cc_version,
        },
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    (out_dir / "run.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")


def _load_dataset(args) -> flowdata.LabeledDataset:
    return flowdata.load_csv(
        args.dataset, args.label_column, parse_label_map(args.label_map)
    )


def cmd_train(args) -> int:
    dataset = _load_dataset(args)
    if not args.no_balance:
        dataset = flowdata.undersample_balance(dataset, args.seed)
    config = cart.TrainConfig(max_depth=args.max_depth, ccp_alpha=args.ccp_alpha, seed=args.seed)
    tree = cart.fit(dataset, config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    model_path = Path(args.model) if args.model else out_dir / "model.tree"
    cart.save_tree(tree, model_path)
    depth, nodes, leaves, used = cart.tree_stats(tree)
    print(f"model written to {model_path}")
    print(f"depth={depth} nodes={nodes} leaves={leaves} features_used={sorted(used)}")
    write_manifest(out_dir, "train", {
        "dataset": str(args.dataset), "label_column": args.label_column,
        "label_map": args.label_map, "max_depth": args.max_depth,
        "ccp_alpha": args.ccp_alpha, "balance": not args.no_balance,
        "seed": args.seed, "model": str(model_path),
    })
    return 0


def cmd_evaluate(args) -> int:
    dataset = _load_dataset(args)
    config = cart.TrainConfig(max_depth=args.max_depth, ccp_alpha=args.ccp_alpha, seed=args.seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.mode == "cv":
        report = metrics.cross_validate(
            dataset, config, k=args.k, repeats=args.repeats, seed=args.seed, jobs=args.jobs
        )
        rows = ["depth,split,bacc,f1"] + [
            f"{args.max_depth},{i},{b!r},{f!r}" for i, (b, f) in enumerate(report.per_split)
        ]
        (out_dir / "cv_report.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")
        print(
            f"cv {report.k}x{report.repeats}: "
            f"bacc {report.mean_balanced_accuracy:.4f} +/- {report.std_balanced_accuracy:.4f}  "
            f"f1 {report.mean_f1:.4f} +/- {report.std_f1:.4f}"
        )
    else:
        if not 0.0 < args.holdout_fraction < 1.0:
            raise SystemExit("holdout fraction must be in (0, 1)")
        train, test = flowdata.holdout_split(dataset, args.holdout_fraction, args.seed)
        tree = cart.fit(flowdata.undersample_balance(train, args.seed), config)
        cm = metrics.confusion(test.labels, cart.predict_many(tree, test.features))
        bacc, f1_score = metrics.balanced_accuracy(cm), metrics.f1(cm)
        rows = ["depth,split,bacc,f1", f"{args.max_depth},0,{bacc!r},{f1_score!r}"]
        (out_dir / "holdout_report.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")
        print(f"holdout: bacc {bacc:.4f}  f1 {f1_score:.4f}")
    write_manifest(out_dir, "evaluate", {
        "dataset": str(args.dataset), "mode": args.mode, "k": args.k,
        "repeats": args.repeats, "holdout_fraction": args.holdout_fraction,
        "max_depth": args.max_depth, "ccp_alpha": args.ccp_alpha, "seed": args.seed,
    })
    return 0


def cmd_sweep(args) -> int:
    depths = parse_depths(args.depths)
    if not depths:
        raise SystemExit("empty depth list")
    dataset = _load_dataset(args)
    rows = metrics.depth_sweep(
        dataset, depths, holdout_fraction=args.holdout_fraction,
        threshold=args.threshold, seed=args.seed, runs=args.sweep_runs,
        ccp_alpha=args.ccp_alpha,
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_rows = ["depth,bacc,passed"] + [
        f"{r.depth},{r.balanced_accuracy!r},{int(r.passed)}" for r in rows
    ]
    (out_dir / "sweep.csv").write_text("\n".join(csv_rows) + "\n", encoding="utf-8")
    print("depth  bacc    pass")
    for row in rows:
        print(f"{row.depth:<6} {row.balanced_accuracy:.4f}  {'pass' if row.passed else 'FAIL'}")
    write_manifest(out_dir, "sweep", {
        "dataset": str(args.dataset), "depths": depths, "threshold": args.threshold,
        "holdout_fraction": args.holdout_fraction, "sweep_runs": args.sweep_runs,
        "ccp_alpha": args.ccp_alpha, "seed": args.seed,
    })
    return 0


def _resolve_schema(args, tree: cart.DecisionTree) -> flowdata.FlowSchema:
    if args.feature_names:
        return flowdata.FlowSchema(tuple(args.feature_names.split(",")), args.label_column)
    if args.dataset:
        return _load_dataset(args).schema
    return flowdata.FlowSchema(
        tuple(f"feature_{i}" for i in range(tree.n_features)), args.label_column
    )


def cmd_emit(args) -> int:
    tree = cart.load_tree(args.model)
    schema = _resolve_schema(args, tree)
    styles = {
        "nested-if": [codegen.EmitterStyle.NESTED_IF],
        "array-recursive": [codegen.EmitterStyle.ARRAY_RECURSIVE],
        "both": [codegen.EmitterStyle.NESTED_IF, codegen.EmitterStyle.ARRAY_RECURSIVE],
    }[args.style]
    out_dir = Path(args.out)
    for style in styles:
        target = out_dir / style.value if len(styles) > 1 else out_dir
        target.mkdir(parents=True, exist_ok=True)
        src = codegen.emit(tree, schema, style)
        (target / "predict.c").write_text(src.text, encoding="utf-8")
        (target / "predict.h").write_text(codegen.emit_header(schema), encoding="utf-8")
        if args.firmware:
            bundle = codegen.emit_firmware(tree, schema, style, args.iterations)
            (target / "firmware.c").write_text(bundle.program_text, encoding="utf-8")
        print(f"{style.value}: wrote sources to {target}")
    write_manifest(out_dir, "emit", {
        "model": str(args.model), "style": args.style, "firmware": args.firmware,
        "iterations": args.iterations, "feature_names": list(schema.feature_names),
        "seed": args.seed,
    })
    return 0


def cmd_bench(args) -> int:
    tree = cart.load_tree(args.model)
    dataset = _load_dataset(args)
    schema = dataset.schema
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.port:
        bundle = codegen.emit_firmware(tree, schema, codegen.EmitterStyle.NESTED_IF, args.iterations)
        with bench.SerialTransport(args.port, args.baud) as transport:
            timing = bench.time_inference(bundle, tree, dataset, transport)
        print(f"serial: avg {timing.avg_ns_per_inference:.2f} ns/inference "
              f"over {timing.records_measured} records")
    else:
        report = bench.compare_emitters(tree, schema, dataset, args.iterations)
        print(report.render())
        (out_dir / "comparison.txt").write_text(report.render() + "\n", encoding="utf-8")
        raw = "\n".join(sizes.raw_output for _, sizes in report.size_rows)
        (out_dir / "size_raw.txt").write_text(raw, encoding="utf-8")
    write_manifest(out_dir, "bench", {
        "model": str(args.model), "dataset": str(args.dataset),
        "transport": "serial" if args.port else "host", "port": args.port,
        "iterations": args.iterations, "seed": args.seed,
    })
    return 0


def cmd_serial_send(args) -> int:
    tree = cart.load_tree(args.model) if args.model else None
    dataset = _load_dataset(args)
    if tree is not None and tree.n_features != dataset.schema.feature_count:
        raise SystemExit(
            f"model expects {tree.n_features} features, dataset has "
            f"{dataset.schema.feature_count}; aborting before sending"
        )
    if args.port:
        transport = bench.SerialTransport(args.port, args.baud)
    elif args.binary:
        transport = bench.HostTransport(Path(args.binary))
    else:
        raise SystemExit("serial-send needs --port or --binary")
    elapsed_total = 0
    n = 0
    iterations = None
    with transport:
        for row in dataset.features:
            response = transport.exchange(bench.format_request(row))
            cls, elapsed, iterations = bench.parse_response(response)
            print(f"{cls},{elapsed},{iterations}")
            elapsed_total += elapsed
            n += 1
    mean_us = elapsed_total / n
    print(f"records={n} mean_elapsed_us={mean_us:.1f} "
          f"mean_ns_per_inference={mean_us * 1000.0 / iterations:.2f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="edgetree", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p, dataset=True):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default="edgetree-out")
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--label-column", default="Label")
        p.add_argument("--label-map", default=None,
                       help="explicit string labels, e.g. benign=0,attack=1")
        if dataset:
            p.add_argument("dataset")

    p = sub.add_parser("train", help="fit a tree and write a model file")
    common(p)
    p.add_argument("--max-depth", type=int, default=12)
    p.add_argument("--ccp-alpha", type=float, default=0.0001)
    p.add_argument("--no-balance", action="store_true")
    p.add_argument("--model", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="cross-validated or holdout scoring")
    common(p)
    p.add_argument("--mode", choices=("cv", "holdout"), default="cv")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--holdout-fraction", type=float, default=0.3)
    p.add_argument("--max-depth", type=int, default=12)
    p.add_argument("--ccp-alpha", type=float, default=0.0001)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="holdout accuracy across max depths")
    common(p)
    p.add_argument("--depths", default="2-12")
    p.add_argument("--threshold", type=float, default=0.985)
    p.add_argument("--holdout-fraction", type=float, default=0.3)
    p.add_argument("--sweep-runs", type=int, default=3)
    p.add_argument("--ccp-alpha", type=float, default=0.0001)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("emit", help="transpile a model file to C sources")
    common(p, dataset=False)
    p.add_argument("model")
    p.add_argument("--dataset", default=None, help="CSV supplying feature names")
    p.add_argument("--feature-names", default=None, help="comma-separated feature names")
    p.add_argument("--style", choices=("nested-if", "array-recursive", "both"),
                   default="nested-if")
    p.add_argument("--firmware", action="store_true")
    p.add_argument("--iterations", type=int, default=100000)
    p.set_defaults(func=cmd_emit)

    p = sub.add_parser("bench", help="size and time both emitter styles")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--port", default=None)
    p.add_argument("--baud", type=int, default=115200)
    p.add_argument("--iterations", type=int, default=100000)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("serial-send", help="stream records to a running device")
    common(p)
    p.add_argument("--model", default=None, help="model file for arity checking")
    p.add_argument("--port", default=None)
    p.add_argument("--baud", type=int, default=115200)
    p.add_argument("--binary", default=None, help="host firmware binary instead of a port")
    p.set_defaults(func=cmd_serial_send)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (flowdata.DatasetError, cart.TrainError, cart.TreeFileError,
            metrics.MetricsError, codegen.CodegenError, bench.BenchError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
