"""Command-line harness.

Subcommands: gen-dataset, train, infer, sweep, compare, shm-demo.
Every flag can also come from a plain ``key=value`` config file passed via
``--config``; explicit flags win over the file.  Exit codes: 0 success,
1 usage error, 2 data/format error, 3 algorithm failure.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, bench, errors
from .bp import BpConfig
from .datasets import generate_dataset, read_dataset, write_dataset
from .gnn import GnnDims, TrainConfig, gnn_forward, init_params, load_params, save_params, train
from .manifest import deterministic_header, manifest_path, write_manifest
from .metrics import REPORT_COLUMNS, report_row
from .model import load_model, load_topology, save_model, zero_edges
from .shm import DemoScenario, run_demo

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_ALGORITHM = 3

_USAGE_ERRORS = (errors.DataFormatError,)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _aund_pair(text: str) -> tuple[float, float]:
    try:
        lo, hi = text.split(":")
        return float(lo), float(hi)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected LO:HI, got {text!r}") from exc


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _node_set(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(",") if x.strip())


def build_parser() -> _Parser:
    parser = _Parser(prog="isinglab", description=__doc__)
    parser.add_argument("--version", action="version", version=f"isinglab {__version__}")
    parser.add_argument("--config", help="key=value defaults file; flags override it")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-dataset", help="sample and exactly label random models")
    p.add_argument("--order", type=int, required=True)
    p.add_argument("--aund-lo", type=float, required=True)
    p.add_argument("--aund-hi", type=float, required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--label-with", choices=("auto", "brute", "ve", "none"), default="auto")
    p.add_argument("--allow-disconnected", action="store_true")

    p = sub.add_parser("train", help="train the GNN on a labeled dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out-weights", required=True)
    p.add_argument("--history-out", default=None, help="per-epoch loss CSV (default: <weights>.history.csv)")
    p.add_argument("--hidden-dim", type=int, default=5)
    p.add_argument("--message-dim", type=int, default=5)
    p.add_argument("--steps", type=int, default=10)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-shuffle", action="store_true")

    p = sub.add_parser("infer", help="run one inference algorithm on a model file")
    p.add_argument("--model", required=True)
    p.add_argument("--algorithm", choices=bench.ALGORITHMS, required=True)
    p.add_argument("--weights", default=None)
    p.add_argument("--zero-edges", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bp-tolerance", type=float, default=1e-6)
    p.add_argument("--bp-max-iterations", type=int, default=200)
    p.add_argument("--bp-damping", type=float, default=None)
    p.add_argument("--gibbs-burn", type=int, default=1000)
    p.add_argument("--gibbs-sweeps", type=int, default=10000)

    p = sub.add_parser("sweep", help="training-set size / degree / order sweeps")
    p.add_argument("--kind", choices=("samples", "degree", "order"), required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--order", type=int, default=10)
    p.add_argument("--aund", type=_aund_pair, default=(2.0, 3.0))
    p.add_argument("--sizes", type=_int_list, default=[100, 300, 1000])
    p.add_argument("--train-aunds", type=str, default="2:3,5:6")
    p.add_argument("--test-aunds", type=str, default="2:3,5:6")
    p.add_argument("--train-order", type=int, default=9)
    p.add_argument("--test-orders", type=_int_list, default=[9, 16, 36])
    p.add_argument("--train-count", type=int, default=1000)
    p.add_argument("--test-count", type=int, default=200)
    p.add_argument("--algorithms", type=str, default="gnn,bp,gibbs")
    p.add_argument("--gibbs-burn", type=int, default=1000)
    p.add_argument("--gibbs-sweeps", type=int, default=10000)

    p = sub.add_parser("compare", help="timing and accuracy comparison on a model set")
    p.add_argument("--models", required=True, help="JSON-lines dataset file")
    p.add_argument("--algorithms", type=str, default="ve,bp,gibbs,gnn")
    p.add_argument("--weights", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gibbs-burn", type=int, default=1000)
    p.add_argument("--gibbs-sweeps", type=int, default=10000)

    p = sub.add_parser("shm-demo", help="synthetic monitoring demo on a topology file")
    p.add_argument("--topology", required=True)
    p.add_argument("--damaged-nodes", type=_node_set, default=())
    p.add_argument("--shift-sigmas", type=float, default=6.0)
    p.add_argument("--correlation", type=float, default=0.7)
    p.add_argument("--intact-samples", type=int, default=300)
    p.add_argument("--current-samples", type=int, default=30)
    p.add_argument("--mi-samples", type=int, default=20000)
    p.add_argument("--k-max", type=int, default=3)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--zero-edges", action="store_true")
    p.add_argument("--algorithms", type=str, default="ve,bp,gibbs")
    p.add_argument("--weights", default=None)
    p.add_argument("--features-csv", default=None)
    p.add_argument("--means-csv", default=None)
    return parser


def _apply_config_file(parser: _Parser, argv: list[str]) -> argparse.Namespace:
    probe = _Parser(add_help=False)
    probe.add_argument("--config", default=None)
    known, _ = probe.parse_known_args(argv)
    if known.config:
        defaults = {}
        try:
            for lineno, raw in enumerate(Path(known.config).read_text().splitlines(), 1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise errors.DataFormatError(
                        f"{known.config}:{lineno}: expected key=value"
                    )
                key, value = line.split("=", 1)
                defaults[key.strip().replace("-", "_")] = value.strip()
        except OSError as exc:
            raise errors.DataFormatError(f"cannot read config file: {exc}") from exc
        for action_parser in parser._subparsers._group_actions[0].choices.values():
            known_dests = {a.dest: a for a in action_parser._actions}
            usable = {}
            for key, value in defaults.items():
                if key in known_dests:
                    action = known_dests[key]
                    if action.type is not None:
                        value = action.type(value)
                    elif isinstance(action, argparse._StoreTrueAction):
                        value = value.lower() in ("1", "true", "yes")
                    usable[key] = value
            action_parser.set_defaults(**usable)
    return parser.parse_args(argv)


def _csv_writer(path: str, columns: list[str], manifest_ref: str):
    fh = open(path, "w", encoding="utf-8", newline="\n")
    fh.write(f"# manifest: {manifest_ref}\n")
    writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    return fh, writer


def _fmt_cell(value):
    if isinstance(value, float):
        return format(value, ".10g")
    return value


def cmd_gen_dataset(args) -> int:
    started = datetime.datetime.now(datetime.timezone.utc)
    if args.order > 25 and args.label_with not in ("ve", "none"):
        raise _UsageError(
            f"order {args.order} > 25: pass --label-with ve (or none) explicitly"
        )
    config = {
        "order": args.order, "aund_lo": args.aund_lo, "aund_hi": args.aund_hi,
        "count": args.count, "seed": args.seed, "label_with": args.label_with,
        "allow_disconnected": args.allow_disconnected,
    }
    ds = generate_dataset(
        args.order, args.aund_lo, args.aund_hi, args.count, args.seed,
        labeler=args.label_with, require_connected=not args.allow_disconnected,
    )
    header = deterministic_header("gen-dataset", config)
    header["manifest"] = manifest_path(Path(args.out).name)
    write_dataset(args.out, ds, header)
    write_manifest(args.out, "gen-dataset", config, [], [args.out], started,
                   datetime.datetime.now(datetime.timezone.utc))
    print(f"wrote {len(ds)} records to {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    started = datetime.datetime.now(datetime.timezone.utc)
    _, ds = read_dataset(args.dataset)
    dims = GnnDims(hidden_dim=args.hidden_dim, message_dim=args.message_dim,
                   steps=args.steps)
    cfg = TrainConfig(learning_rate=args.lr, epochs=args.epochs,
                      batch_size=args.batch_size, seed=args.seed,
                      shuffle=not args.no_shuffle)
    params, history = train(ds.pairs, dims, cfg)
    config = {
        "dataset": args.dataset, "hidden_dim": args.hidden_dim,
        "message_dim": args.message_dim, "steps": args.steps, "lr": args.lr,
        "epochs": args.epochs, "batch_size": args.batch_size, "seed": args.seed,
        "shuffle": not args.no_shuffle,
    }
    manifest_ref = manifest_path(Path(args.out_weights).name)
    save_params(params, args.out_weights, extra={"manifest": manifest_ref})
    history_path = args.history_out or f"{args.out_weights}.history.csv"
    fh, writer = _csv_writer(history_path, ["epoch", "mean_loss"], manifest_ref)
    with fh:
        for epoch, loss in enumerate(history, 1):
            writer.writerow({"epoch": epoch, "mean_loss": _fmt_cell(float(loss))})
    write_manifest(args.out_weights, "train", config, [args.dataset],
                   [args.out_weights, history_path], started,
                   datetime.datetime.now(datetime.timezone.utc))
    print(f"final mean training loss: {history[-1]:.6f}")
    return EXIT_OK


def cmd_infer(args) -> int:
    model = load_model(args.model)
    params = None
    if args.algorithm == "gnn":
        if not args.weights:
            raise _UsageError("--algorithm gnn requires --weights")
        params = load_params(args.weights)
    cfg = bench.PredictConfig(
        bp=BpConfig(args.bp_tolerance, args.bp_max_iterations, args.bp_damping),
        gibbs_burn=args.gibbs_burn, gibbs_sweeps=args.gibbs_sweeps,
        seed=args.seed, zero_edges=args.zero_edges,
    )
    marg, seconds = bench.predict(args.algorithm, model, cfg, params)
    print("node p_minus p_plus")
    for i in range(marg.n):
        print(f"{i} {marg.p_minus[i]:.10f} {marg.p_plus[i]:.10f}")
    print(f"runtime_s {seconds:.6f}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    started = datetime.datetime.now(datetime.timezone.utc)
    algorithms = tuple(a for a in args.algorithms.split(",") if a)
    config = {
        "kind": args.kind, "order": args.order, "aund_lo": args.aund[0],
        "aund_hi": args.aund[1], "sizes": args.sizes,
        "train_aunds": args.train_aunds, "test_aunds": args.test_aunds,
        "train_order": args.train_order, "test_orders": args.test_orders,
        "train_count": args.train_count, "test_count": args.test_count,
        "algorithms": list(algorithms), "seed": args.seed,
        "gibbs_burn": args.gibbs_burn, "gibbs_sweeps": args.gibbs_sweeps,
    }
    manifest_ref = manifest_path(Path(args.out).name)
    predict_cfg = bench.PredictConfig(gibbs_burn=args.gibbs_burn,
                                      gibbs_sweeps=args.gibbs_sweeps, seed=args.seed)
    rows = bench.sweep_cells(
        args.kind, order=args.order, aund=args.aund, sizes=args.sizes,
        train_aunds=[_aund_pair(t) for t in args.train_aunds.split(",")],
        test_aunds=[_aund_pair(t) for t in args.test_aunds.split(",")],
        train_order=args.train_order, test_orders=args.test_orders,
        train_count=args.train_count, test_count=args.test_count,
        seed=args.seed, algorithms=algorithms, predict_cfg=predict_cfg,
    )
    fh, writer = _csv_writer(args.out, bench.SWEEP_COLUMNS, manifest_ref)
    with fh:
        for row in rows:
            writer.writerow({k: _fmt_cell(v) for k, v in row.items()})
            fh.flush()  # interrupted sweeps keep completed cells
    write_manifest(args.out, "sweep", config, [], [args.out], started,
                   datetime.datetime.now(datetime.timezone.utc))
    print(f"sweep written to {args.out}")
    return EXIT_OK


def cmd_compare(args) -> int:
    started = datetime.datetime.now(datetime.timezone.utc)
    _, ds = read_dataset(args.models)
    algorithms = tuple(a for a in args.algorithms.split(",") if a)
    params = load_params(args.weights) if args.weights else None
    if "gnn" in algorithms and params is None:
        raise _UsageError("compare with gnn requires --weights")
    config = {
        "models": args.models, "algorithms": list(algorithms),
        "reps": args.reps, "seed": args.seed,
        "gibbs_burn": args.gibbs_burn, "gibbs_sweeps": args.gibbs_sweeps,
    }
    cfg = bench.PredictConfig(gibbs_burn=args.gibbs_burn,
                              gibbs_sweeps=args.gibbs_sweeps, seed=args.seed)
    manifest_ref = manifest_path(Path(args.out).name)
    fh, writer = _csv_writer(args.out, bench.COMPARE_COLUMNS, manifest_ref)
    medians: dict[str, list[float]] = {}
    with fh:
        for row in bench.compare_rows(ds.models, algorithms, cfg, params, args.reps):
            medians.setdefault(row["algorithm"], []).append(row["runtime_s"])
            writer.writerow({k: _fmt_cell(v) for k, v in row.items()})
            fh.flush()
    write_manifest(args.out, "compare", config, [args.models], [args.out], started,
                   datetime.datetime.now(datetime.timezone.utc))
    for algorithm, times in medians.items():
        print(f"{algorithm}: median runtime {np.median(times):.6f} s over {len(times)} models")
    return EXIT_OK


def cmd_shm_demo(args) -> int:
    started = datetime.datetime.now(datetime.timezone.utc)
    topology = load_topology(args.topology)
    algorithms = tuple(a for a in args.algorithms.split(",") if a)
    params = load_params(args.weights) if args.weights else None
    if "gnn" in algorithms and params is None:
        raise _UsageError("shm-demo with gnn requires --weights")
    scenario = DemoScenario(
        damaged_nodes=args.damaged_nodes, shift_sigmas=args.shift_sigmas,
        correlation=args.correlation, intact_samples=args.intact_samples,
        current_samples=args.current_samples, mi_samples=args.mi_samples,
        k_max=args.k_max, threshold=args.threshold,
    )
    features = means = None
    if args.features_csv:
        from .potentials import load_feature_csv

        features = load_feature_csv(args.features_csv)
    if args.means_csv:
        from .potentials import load_means_csv

        means = load_means_csv(args.means_csv)
    result = run_demo(topology, scenario, args.seed, algorithms, params,
                      use_zero_edges=args.zero_edges, features=features,
                      current_means=means)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    config = {
        "topology": args.topology, "damaged_nodes": list(args.damaged_nodes),
        "shift_sigmas": args.shift_sigmas, "correlation": args.correlation,
        "intact_samples": args.intact_samples, "current_samples": args.current_samples,
        "mi_samples": args.mi_samples, "k_max": args.k_max,
        "threshold": args.threshold, "seed": args.seed,
        "zero_edges": args.zero_edges, "algorithms": list(algorithms),
    }
    report_path = out_dir / "report.csv"
    manifest_ref = manifest_path(report_path.name)
    case = "zero-edges" if args.zero_edges else "coupled"
    outputs = [str(report_path)]
    fh, writer = _csv_writer(str(report_path), REPORT_COLUMNS, manifest_ref)
    with fh:
        for algorithm in algorithms:
            row = report_row(algorithm, case, result.reports[algorithm],
                             result.runtimes[algorithm], result.mean_kls[algorithm])
            writer.writerow({k: _fmt_cell(v) for k, v in row.items()})
    for algorithm in algorithms:
        marg_path = out_dir / f"marginals_{algorithm}.json"
        table = result.marginals[algorithm].table
        from .util import canonical_json

        with open(marg_path, "w", encoding="utf-8") as mh:
            mh.write(canonical_json({
                "algorithm": algorithm,
                "case": case,
                "manifest": manifest_ref,
                "marginals": [[float(a), float(b)] for a, b in table],
            }))
            mh.write("\n")
        outputs.append(str(marg_path))
    model_path = out_dir / "learned_model.json"
    save_model(result.model, model_path)
    outputs.append(str(model_path))
    write_manifest(str(report_path), "shm-demo", config, [args.topology], outputs,
                   started, datetime.datetime.now(datetime.timezone.utc))
    for algorithm in algorithms:
        rep = result.reports[algorithm]
        print(f"{algorithm}: predicted={sorted(result.predicted[algorithm])} "
              f"fpr={rep.fpr:.4f} f1={rep.f1:.4f} accuracy={rep.accuracy:.4f}")
    return EXIT_OK


_COMMANDS = {
    "gen-dataset": cmd_gen_dataset,
    "train": cmd_train,
    "infer": cmd_infer,
    "sweep": cmd_sweep,
    "compare": cmd_compare,
    "shm-demo": cmd_shm_demo,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config_file(parser, argv)
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (errors.DataFormatError, errors.CorruptFile, errors.FormatVersionMismatch,
            FileNotFoundError, IsADirectoryError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (errors.GenerationExhausted, errors.TooLarge, errors.DegenerateComponent,
            errors.ZeroVariance, errors.NonPositiveEntropy) as exc:
        print(f"algorithm error: {exc}", file=sys.stderr)
        return EXIT_ALGORITHM


if __name__ == "__main__":
    sys.exit(main())
