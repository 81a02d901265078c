"""Command line interface.

One entry point with eight subcommands: run, eval, auprc, importance,
heatmap, simulate, gen-synthetic, summary.  Exit code 0 on success, 1 on
usage errors, 2 on data errors.  All randomness flows from --seed, so
identical invocations produce byte-identical outputs.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys

import numpy as np

from . import analysis, buildsim, metrics, sampler, surrogate
from .configspace import load_graph, random_configuration, save_graph
from .dataset import (
    Dataset,
    DatasetOracle,
    load_dataset,
    save_dataset,
    summarize,
)
from .rng import derive_seed, substream

__all__ = ["dispatch", "main"]

_ENUMERATION_EMIT_LIMIT = 100_000


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _write_text(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _json_text(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _csv_text(rows: list[list]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerows(rows)
    return buffer.getvalue()


def _load_data(path: str, graph_path: str | None) -> Dataset:
    graph = load_graph(graph_path) if graph_path else None
    return load_dataset(path, graph=graph)


def _fit_or_load_model(args) -> surrogate.FactorModel:
    if getattr(args, "model", None):
        return surrogate.load_model(args.model)
    if getattr(args, "data", None):
        dataset = _load_data(args.data, getattr(args, "graph", None))
        return surrogate.fit(dataset.records, dataset.graph, args.smoothing)
    raise _UsageError("either --model or --data is required")


def _cmd_run(args) -> int:
    kind, _, path = args.oracle.partition(":")
    if kind == "dataset":
        dataset = _load_data(path, args.graph)
        graph = dataset.graph
        oracle: sampler.BuildOracle = DatasetOracle(dataset)
    elif kind == "synthetic":
        if not args.graph:
            raise _UsageError("synthetic oracle needs --graph")
        graph = load_graph(args.graph)
        rules = buildsim.load_rules(path)
        oracle = buildsim.synthetic_oracle(graph, rules, seed=args.seed)
    else:
        raise _UsageError(
            f"oracle must be dataset:<path> or synthetic:<path>, got {args.oracle!r}"
        )
    cfg = sampler.SamplerConfig(
        strategy=args.strategy,
        bootstrap_size=args.bootstrap,
        budget=args.budget,
        candidate_mode=args.candidate_mode,
        pool_size=args.pool_size,
        seed=args.seed,
        smoothing=args.smoothing,
    )
    result = sampler.run(oracle, graph, cfg)
    lines = [json.dumps(entry.to_dict(), sort_keys=True) for entry in result.trace]
    _write_text(args.out, "".join(line + "\n" for line in lines))
    if args.model_out:
        surrogate.save_model(result.model, args.model_out)
    return 0


def _cmd_eval(args) -> int:
    dataset = _load_data(args.data, None)
    strategies = [s.strip() for s in args.strategies.split(",") if s.strip()]
    sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    reports = metrics.sweep_experiment(
        dataset,
        strategies,
        sizes,
        repetitions=args.reps,
        base_seed=args.seed,
        bootstrap_size=args.bootstrap,
        smoothing=args.smoothing,
    )
    rows = [["strategy", "size", "mean_p", "sd_p", "mean_r", "sd_r"]]
    for strategy in strategies:
        for row in reports[strategy].rows():
            rows.append([row["strategy"], row["size"], row["mean_p"],
                         row["sd_p"], row["mean_r"], row["sd_r"]])
    if args.format == "csv":
        _write_text(args.out, _csv_text(rows))
    else:
        payload = [report for s in strategies for report in reports[s].rows()]
        _write_text(args.out, _json_text(payload))
    return 0


def _cmd_auprc(args) -> int:
    dataset = _load_data(args.data, None)
    seeds = [derive_seed(args.seed, "auprc", i) for i in range(args.reps)]
    values = [
        metrics.auprc_experiment(
            dataset,
            args.strategy,
            seed,
            selections=args.selections,
            bootstrap_size=args.bootstrap,
            smoothing=args.smoothing,
        )
        for seed in seeds
    ]
    arr = np.asarray(values)
    payload = {
        "strategy": args.strategy,
        "seeds": seeds,
        "values": values,
        "mean": float(arr.mean()),
        "sd": float(np.std(arr, ddof=1)) if arr.size > 1 else 0.0,
    }
    _write_text(args.out, _json_text(payload))
    return 0


def _cmd_importance(args) -> int:
    model = _fit_or_load_model(args)
    entries = analysis.importance_ranking(model, top_k=args.top)
    if args.format == "csv":
        rows = [["target", "score"]] + [[e.target, e.score] for e in entries]
        _write_text(args.out, _csv_text(rows))
    else:
        _write_text(args.out, _json_text([e.to_dict() for e in entries]))
    return 0


def _cmd_heatmap(args) -> int:
    model = _fit_or_load_model(args)
    graph = model.graph
    edges = [
        (graph.packages[p], graph.packages[c]) for p, c in graph.edges
    ]
    if args.edge:
        parent, _, child = args.edge.partition(analysis.EDGE_SEPARATOR)
        if (parent, child) not in edges:
            raise ValueError(f"no edge {parent!r} -> {child!r} in the graph")
        edges = [(parent, child)]
    os.makedirs(args.out_dir, exist_ok=True)
    constraints = []
    for parent, child in edges:
        matrix = analysis.pair_compatibility(model, (parent, child))
        name = f"{parent}{analysis.EDGE_SEPARATOR}{child}.csv"
        _write_text(os.path.join(args.out_dir, name), _csv_text(matrix.to_rows()))
        constraints.extend(
            pair.to_dict()
            for pair in analysis.extract_constraints(matrix, threshold=args.threshold)
        )
    payload = {"threshold": args.threshold, "pairs": constraints}
    _write_text(os.path.join(args.out_dir, "constraints.json"), _json_text(payload))
    return 0


def _cmd_simulate(args) -> int:
    graph = load_graph(args.graph)
    rules = buildsim.load_rules(args.rules)
    rules.check_against(graph)
    if args.data:
        dataset = _load_data(args.data, args.graph)
        configs = [r.config for r in dataset.records]
    elif args.sample:
        rng = substream(args.seed, "simulate-sample")
        configs = [random_configuration(graph, rng) for _ in range(args.sample)]
    else:
        raise _UsageError("either --data or --sample is required")
    dag = buildsim.build_dag(configs, graph)
    outcome = buildsim.planted_outcome(dag, rules, graph, seed=args.seed)
    if args.latency == "lognormal":
        rng = substream(args.seed, "simulate-latency")
        latencies = {
            digest: float(rng.lognormal(mean=0.0, sigma=args.latency_sigma))
            for digest in sorted(dag.units)
        }
        latency_fn = lambda unit: latencies[unit.digest]
    else:
        latency_fn = None
    report = buildsim.simulate(dag, outcome, workers=args.workers,
                               latency_fn=latency_fn)
    _write_text(args.out, _json_text(report.to_dict()))
    return 0


def _cmd_gen_synthetic(args) -> int:
    if "," in args.versions:
        domain_sizes: int | list[int] = [int(s) for s in args.versions.split(",")]
    else:
        domain_sizes = int(args.versions)
    graph, rules = buildsim.generate_benchmark(
        n_packages=args.packages,
        domain_sizes=domain_sizes,
        rule_density=args.rule_density,
        target_rate=args.target_rate,
        seed=args.seed,
    )
    save_graph(graph, args.out_graph)
    buildsim.save_rules(rules, args.out_rules)
    if args.emit_data:
        oracle = buildsim.synthetic_oracle(graph, rules, seed=args.seed)
        from .configspace import space_size

        if space_size(graph) > _ENUMERATION_EMIT_LIMIT:
            raise ValueError(
                f"space of {space_size(graph)} configurations is too large to "
                f"enumerate into a dataset (limit {_ENUMERATION_EMIT_LIMIT})"
            )
        records = buildsim.enumerate_records(oracle)
        dataset = Dataset(graph, records)
        graph_rel = os.path.relpath(
            os.path.abspath(args.out_graph),
            os.path.dirname(os.path.abspath(args.emit_data)) or ".",
        )
        save_dataset(dataset, args.emit_data, graph_filename=graph_rel)
    return 0


def _cmd_summary(args) -> int:
    dataset = _load_data(args.data, None)
    summary = summarize(dataset)
    if args.format == "json":
        _write_text(args.out, _json_text(summary.to_dict()))
    else:
        pairs = [("configs", summary.configs), ("good", summary.good),
                 ("deps", summary.deps)]
        width = max(len(k) for k, _ in pairs)
        lines = [f"{k:<{width}}  {v}" for k, v in pairs]
        _write_text(args.out, "".join(line + "\n" for line in lines))
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="buildtuner",
                     description="Autotuning toolkit for package build configurations")
    commands = parser.add_subparsers(dest="command", required=True,
                                     parser_class=_Parser)

    p = commands.add_parser("run", help="adaptive sampling run; writes a trace")
    p.add_argument("--oracle", required=True,
                   help="dataset:<data.jsonl> or synthetic:<rules.json>")
    p.add_argument("--graph", help="graph JSON (required for synthetic oracles)")
    p.add_argument("--strategy", choices=sampler.STRATEGIES, default="bayesian")
    p.add_argument("--budget", type=int, default=100)
    p.add_argument("--bootstrap", type=int, default=20)
    p.add_argument("--candidate-mode", choices=sampler.CANDIDATE_MODES,
                   default="exhaustive")
    p.add_argument("--pool-size", type=int, default=1000)
    p.add_argument("--smoothing", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", help="trace JSONL path (default stdout)")
    p.add_argument("--model-out", help="also export the final model JSON")
    p.set_defaults(func=_cmd_run)

    p = commands.add_parser("eval", help="precision/recall sweep over strategies")
    p.add_argument("--data", required=True)
    p.add_argument("--strategies", default="bayesian,crowd,random")
    p.add_argument("--sizes", default="20,40,60,80,100")
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--bootstrap", type=int, default=20)
    p.add_argument("--smoothing", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_eval)

    p = commands.add_parser("auprc", help="split/train/rank evaluation")
    p.add_argument("--data", required=True)
    p.add_argument("--strategy", choices=sampler.STRATEGIES, default="bayesian")
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--selections", type=int, default=100)
    p.add_argument("--bootstrap", type=int, default=20)
    p.add_argument("--smoothing", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_auprc)

    p = commands.add_parser("importance",
                            help="rank packages and edges by outcome divergence")
    p.add_argument("--model", help="model JSON from run --model-out")
    p.add_argument("--data", help="fit a model from this dataset instead")
    p.add_argument("--graph", help="graph override when fitting from --data")
    p.add_argument("--smoothing", type=float, default=1.0)
    p.add_argument("--top", type=int)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_importance)

    p = commands.add_parser("heatmap",
                            help="per-edge compatibility matrices and constraints")
    p.add_argument("--model")
    p.add_argument("--data")
    p.add_argument("--graph")
    p.add_argument("--smoothing", type=float, default=1.0)
    p.add_argument("--edge", help="restrict to one edge, e.g. root+dep01")
    p.add_argument("--threshold", type=float, default=0.25)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_heatmap)

    p = commands.add_parser("simulate", help="farmer-worker build DAG simulation")
    p.add_argument("--graph", required=True)
    p.add_argument("--rules", required=True)
    p.add_argument("--data", help="take configurations from this dataset")
    p.add_argument("--sample", type=int, help="or draw this many at random")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--latency", choices=("unit", "lognormal"), default="unit")
    p.add_argument("--latency-sigma", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_simulate)

    p = commands.add_parser("gen-synthetic",
                            help="random benchmark graph with planted rules")
    p.add_argument("--packages", type=int, required=True)
    p.add_argument("--versions", default="3",
                   help="versions per package: one int or a comma list")
    p.add_argument("--rule-density", type=float, default=0.3)
    p.add_argument("--target-rate", type=float, required=True)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out-graph", required=True)
    p.add_argument("--out-rules", required=True)
    p.add_argument("--emit-data", help="also enumerate a labeled dataset JSONL")
    p.set_defaults(func=_cmd_gen_synthetic)

    p = commands.add_parser("summary", help="dataset size/good/deps counts")
    p.add_argument("--data", required=True)
    p.add_argument("--format", choices=("json", "table"), default="table")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_summary)

    return parser


def dispatch(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except (ValueError, OSError, RuntimeError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(dispatch())
