"""Factorized categorical surrogate over build outcomes.

Two densities are maintained over the configuration space, one fitted to
configurations that built (the good side) and one to configurations that
failed (the bad side).  Each density factorizes along the dependency graph
into one categorical factor per package and one joint factor per edge, so
a factor never spans more than two packages.  Factors are additive-smoothed
normalized empirical frequencies.

The acquisition score for a candidate is the expected improvement

    1 / (prior + ratio * (1 - prior))

where ratio is the bad/good density ratio at the candidate and prior is the
estimated probability that a fresh uniform sample builds.  The score is
computed in log space so that long factor products cannot underflow.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Iterable

import numpy as np

from .configspace import Configuration, DependencyGraph, check_configuration
from .dataset import BuildRecord

__all__ = [
    "FactorModel",
    "FactorTable",
    "Score",
    "SideStats",
    "crowd_score",
    "crowd_score_many",
    "ei_from_ratio",
    "expected_improvement",
    "expected_improvement_many",
    "fit",
    "load_model",
    "log_density",
    "log_density_many",
    "refit_incremental",
    "save_model",
]

# exp() overflows float64 just above 709; +/-700 keeps the ratio finite.
_LOG_RATIO_CLAMP = 700.0


@dataclass(frozen=True)
class Score:
    """A strategy score for one candidate configuration."""

    value: float
    kind: str


@dataclass(frozen=True, eq=False)
class SideStats:
    """Raw observation counts for one outcome side.

    node_counts[i][v] counts records with package i at version v;
    edge_counts[(p, c)][u, w] counts records with the pair (u, w) active.
    """

    n: int
    node_counts: tuple[np.ndarray, ...]
    edge_counts: tuple[np.ndarray, ...]

    @classmethod
    def empty(cls, graph: DependencyGraph) -> "SideStats":
        return cls(
            n=0,
            node_counts=tuple(np.zeros(m, dtype=np.int64) for m in graph.domain_sizes),
            edge_counts=tuple(
                np.zeros((len(graph.domains[p]), len(graph.domains[c])), dtype=np.int64)
                for p, c in graph.edges
            ),
        )

    def add(self, graph: DependencyGraph, config: Configuration) -> "SideStats":
        node = tuple(c.copy() for c in self.node_counts)
        edge = tuple(c.copy() for c in self.edge_counts)
        for i, v in enumerate(config):
            node[i][v] += 1
        for j, (p, c) in enumerate(graph.edges):
            edge[j][config[p], config[c]] += 1
        return SideStats(n=self.n + 1, node_counts=node, edge_counts=edge)


@dataclass(frozen=True, eq=False)
class FactorTable:
    """Per-package and per-edge factor weights, with cached logarithms.

    Fitted tables are normalized (every factor sums to 1); the density
    operations only require strictly positive weights.
    """

    node_weights: tuple[np.ndarray, ...]
    edge_weights: tuple[np.ndarray, ...]
    edges: tuple[tuple[int, int], ...]
    smoothing: float
    node_log: tuple[np.ndarray, ...]
    edge_log: tuple[np.ndarray, ...]

    @classmethod
    def from_weights(
        cls,
        node_weights: Iterable[np.ndarray],
        edge_weights: Iterable[np.ndarray],
        edges: tuple[tuple[int, int], ...],
        smoothing: float,
    ) -> "FactorTable":
        nodes = tuple(np.asarray(w, dtype=float) for w in node_weights)
        edgew = tuple(np.asarray(w, dtype=float) for w in edge_weights)
        for w in (*nodes, *edgew):
            if not np.all(w > 0):
                raise ValueError("factor weights must be strictly positive")
        return cls(
            node_weights=nodes,
            edge_weights=edgew,
            edges=edges,
            smoothing=smoothing,
            node_log=tuple(np.log(w) for w in nodes),
            edge_log=tuple(np.log(w) for w in edgew),
        )

    @classmethod
    def from_counts(
        cls, stats: SideStats, edges: tuple[tuple[int, int], ...], smoothing: float
    ) -> "FactorTable":
        node_weights = [
            (counts + smoothing) / (stats.n + smoothing * counts.size)
            for counts in stats.node_counts
        ]
        edge_weights = [
            (counts + smoothing) / (stats.n + smoothing * counts.size)
            for counts in stats.edge_counts
        ]
        return cls.from_weights(node_weights, edge_weights, edges, smoothing)


@dataclass(frozen=True, eq=False)
class FactorModel:
    """Good-side and bad-side factor tables plus the build success prior."""

    graph: DependencyGraph
    smoothing: float
    good_stats: SideStats
    bad_stats: SideStats
    good: FactorTable
    bad: FactorTable

    @property
    def n_good(self) -> int:
        return self.good_stats.n

    @property
    def n_bad(self) -> int:
        return self.bad_stats.n

    @property
    def success_prior(self) -> float:
        """Rule-of-succession estimate of the uniform-sample success rate."""
        return (self.n_good + 1) / (self.n_good + self.n_bad + 2)


def fit(
    history: Iterable[BuildRecord], graph: DependencyGraph, smoothing: float = 1.0
) -> FactorModel:
    """Fit both factor tables from scratch.

    An empty history yields uniform factors on both sides and a success
    prior of one half.
    """
    if smoothing <= 0:
        raise ValueError(f"smoothing must be positive, got {smoothing}")
    good = SideStats.empty(graph)
    bad = SideStats.empty(graph)
    for record in history:
        check_configuration(graph, record.config)
        if record.outcome:
            good = good.add(graph, record.config)
        else:
            bad = bad.add(graph, record.config)
    return FactorModel(
        graph=graph,
        smoothing=smoothing,
        good_stats=good,
        bad_stats=bad,
        good=FactorTable.from_counts(good, graph.edges, smoothing),
        bad=FactorTable.from_counts(bad, graph.edges, smoothing),
    )


def refit_incremental(model: FactorModel, record: BuildRecord) -> FactorModel:
    """Fold one new record into the model.

    Only the table on the record's outcome side changes; the result is
    cell-for-cell identical to a full refit on the extended history.
    """
    check_configuration(model.graph, record.config)
    if record.outcome:
        stats = model.good_stats.add(model.graph, record.config)
        return replace(
            model,
            good_stats=stats,
            good=FactorTable.from_counts(stats, model.graph.edges, model.smoothing),
        )
    stats = model.bad_stats.add(model.graph, record.config)
    return replace(
        model,
        bad_stats=stats,
        bad=FactorTable.from_counts(stats, model.graph.edges, model.smoothing),
    )


def log_density_many(table: FactorTable, matrix: np.ndarray) -> np.ndarray:
    """Log of the unnormalized factor product for each row of matrix."""
    out = np.zeros(matrix.shape[0], dtype=float)
    for i, logs in enumerate(table.node_log):
        out += logs[matrix[:, i]]
    for logs, (p, c) in zip(table.edge_log, table.edges):
        out += logs[matrix[:, p], matrix[:, c]]
    return out


def log_density(table: FactorTable, config: Configuration) -> float:
    """Sum of log node factors plus log edge factors at one configuration."""
    matrix = np.asarray(config, dtype=np.int64).reshape(1, -1)
    return float(log_density_many(table, matrix)[0])


def ei_from_ratio(ratio: float, success_prior: float) -> float:
    """Expected improvement as a function of the bad/good density ratio.

    Equals 1/success_prior at ratio 0, 1 at ratio 1, and decreases strictly
    as the ratio grows.
    """
    if ratio < 0:
        raise ValueError(f"density ratio must be nonnegative, got {ratio}")
    if not (0 < success_prior <= 1):
        raise ValueError(f"success prior must lie in (0, 1], got {success_prior}")
    return 1.0 / (success_prior + ratio * (1.0 - success_prior))


def expected_improvement_many(model: FactorModel, matrix: np.ndarray) -> np.ndarray:
    log_ratio = log_density_many(model.bad, matrix) - log_density_many(model.good, matrix)
    ratio = np.exp(np.clip(log_ratio, -_LOG_RATIO_CLAMP, _LOG_RATIO_CLAMP))
    prior = model.success_prior
    return 1.0 / (prior + ratio * (1.0 - prior))


def expected_improvement(model: FactorModel, config: Configuration) -> Score:
    """Score a candidate by the chance its build outcome improves on the prior."""
    matrix = np.asarray(config, dtype=np.int64).reshape(1, -1)
    return Score(
        value=float(expected_improvement_many(model, matrix)[0]),
        kind="expected-improvement",
    )


def crowd_score_many(
    model: FactorModel, matrix: np.ndarray, floor: float = 0.0
) -> np.ndarray:
    """Product of raw good-side per-package frequencies for each row.

    Frequencies are unsmoothed; with no good observations (or a version
    never seen good) the product is zero unless a positive floor is set.
    """
    n_good = model.good_stats.n
    total = np.zeros(matrix.shape[0], dtype=float)
    for i, counts in enumerate(model.good_stats.node_counts):
        freq = counts / n_good if n_good > 0 else np.zeros(counts.size)
        if floor > 0.0:
            freq = np.maximum(freq, floor)
        with np.errstate(divide="ignore"):
            total += np.log(freq)[matrix[:, i]]
    return np.exp(total)


def crowd_score(model: FactorModel, config: Configuration, floor: float = 0.0) -> Score:
    matrix = np.asarray(config, dtype=np.int64).reshape(1, -1)
    return Score(value=float(crowd_score_many(model, matrix, floor)[0]), kind="crowd")


def save_model(model: FactorModel, path: str) -> None:
    """Serialize counts, smoothing, and the graph; tables rebuild on load."""
    def side_payload(stats: SideStats) -> dict:
        return {
            "n": stats.n,
            "nodes": [c.tolist() for c in stats.node_counts],
            "edges": [
                {
                    "parent": model.graph.packages[p],
                    "child": model.graph.packages[c],
                    "counts": counts.tolist(),
                }
                for (p, c), counts in zip(model.graph.edges, stats.edge_counts)
            ],
        }

    payload = {
        "format": 1,
        "smoothing": model.smoothing,
        "success_prior": model.success_prior,
        "graph": model.graph.to_dict(),
        "good": side_payload(model.good_stats),
        "bad": side_payload(model.bad_stats),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path: str) -> FactorModel:
    from .configspace import DependencyGraph as _Graph

    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != 1:
        raise ValueError(f"unsupported model format {payload.get('format')!r}")
    graph = _Graph.from_dict(payload["graph"])
    smoothing = float(payload["smoothing"])

    def side_stats(data: dict) -> SideStats:
        nodes = tuple(np.asarray(c, dtype=np.int64) for c in data["nodes"])
        by_edge = {
            (entry["parent"], entry["child"]): np.asarray(entry["counts"], dtype=np.int64)
            for entry in data["edges"]
        }
        edges = []
        for p, c in graph.edges:
            key = (graph.packages[p], graph.packages[c])
            if key not in by_edge:
                raise ValueError(f"model is missing counts for edge {key}")
            edges.append(by_edge[key])
        return SideStats(n=int(data["n"]), node_counts=nodes, edge_counts=tuple(edges))

    good = side_stats(payload["good"])
    bad = side_stats(payload["bad"])
    return FactorModel(
        graph=graph,
        smoothing=smoothing,
        good_stats=good,
        bad_stats=bad,
        good=FactorTable.from_counts(good, graph.edges, smoothing),
        bad=FactorTable.from_counts(bad, graph.edges, smoothing),
    )
