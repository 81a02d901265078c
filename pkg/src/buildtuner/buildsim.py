"""Build campaign simulation over deduplicated dependency DAGs.

A set of configurations is compiled into one DAG whose nodes are unique
(package, version, dependency-subtree) units, so configurations sharing a
subtree share its nodes.  A farmer hands ready units to a bounded pool of
workers; a unit is ready once all of its dependency units succeeded, and a
failure marks every transitive dependent as skipped.

The module also provides synthetic ground truth: oracles that fail a
configuration exactly when it activates a planted forbidden version pair,
and a benchmark generator that plants rules until a target success rate is
met.
"""
from __future__ import annotations

import hashlib
import heapq
import json
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, Sequence

import numpy as np

from .configspace import (
    Configuration,
    DependencyGraph,
    check_configuration,
    config_digest,
    full_space_matrix,
    space_size,
    validate_graph,
)
from .dataset import BuildRecord
from .rng import substream

__all__ = [
    "BenchmarkError",
    "BuildDag",
    "BuildUnit",
    "NodeStatus",
    "PlantedRuleSet",
    "SimReport",
    "SyntheticOracle",
    "build_dag",
    "enumerate_records",
    "generate_benchmark",
    "load_rules",
    "planted_outcome",
    "save_rules",
    "simulate",
    "synthetic_oracle",
]


class BenchmarkError(ValueError):
    """The benchmark generator could not satisfy the requested target."""


class NodeStatus(Enum):
    PENDING = "pending"
    READY = "ready"
    BUILDING = "building"
    SUCCEEDED = "succeeded"
    FAILED = "failed"
    SKIPPED = "skipped"


@dataclass(frozen=True)
class BuildUnit:
    """One buildable unit: a package version with fixed dependency subtrees."""

    package: str
    version: str
    digest: str
    deps: tuple[str, ...]


class BuildDag:
    """Deduplicated build units plus the origin of every input configuration."""

    def __init__(self, units: dict[str, BuildUnit], origins: dict[str, str]):
        self.units = units
        self.origins = origins

    @property
    def node_count(self) -> int:
        return len(self.units)

    def dependents(self) -> dict[str, list[str]]:
        reverse: dict[str, list[str]] = {d: [] for d in self.units}
        for unit in self.units.values():
            for dep in unit.deps:
                reverse[dep].append(unit.digest)
        return reverse


def _unit_digest(package: str, version: str, dep_digests: Sequence[str]) -> str:
    h = hashlib.sha256()
    for text in (package, version, *sorted(dep_digests)):
        raw = text.encode("utf-8")
        h.update(len(raw).to_bytes(4, "big"))
        h.update(raw)
    return h.hexdigest()


def build_dag(configs: Iterable[Configuration], graph: DependencyGraph) -> BuildDag:
    """Merge the given configurations into one deduplicated build DAG."""
    # Children-first order so each unit's dependency digests already exist.
    order: list[int] = []
    visited: set[int] = set()

    def visit(node: int) -> None:
        if node in visited:
            return
        visited.add(node)
        for child in graph.children_map[node]:
            visit(child)
        order.append(node)

    visit(graph.root)
    for i in range(graph.n_packages):
        visit(i)

    units: dict[str, BuildUnit] = {}
    origins: dict[str, str] = {}
    for config in configs:
        check_configuration(graph, config)
        unit_of: dict[int, str] = {}
        for node in order:
            package = graph.packages[node]
            version = graph.domains[node][config[node]]
            deps = tuple(sorted(unit_of[c] for c in graph.children_map[node]))
            digest = _unit_digest(package, version, deps)
            unit_of[node] = digest
            if digest not in units:
                units[digest] = BuildUnit(
                    package=package, version=version, digest=digest, deps=deps
                )
        origins[config_digest(graph, config)] = unit_of[graph.root]
    return BuildDag(units=units, origins=origins)


@dataclass(frozen=True)
class SimEvent:
    """One completed build attempt."""

    unit: str
    worker: int
    start: float
    end: float
    succeeded: bool


@dataclass(frozen=True)
class SimReport:
    attempted: int
    succeeded: int
    failed: int
    skipped: int
    makespan: float
    statuses: dict[str, NodeStatus]
    events: tuple[SimEvent, ...]

    @property
    def failed_or_skipped(self) -> int:
        """Units that never produced an artifact, whatever the reason."""
        return self.failed + self.skipped

    def to_dict(self) -> dict:
        return {
            "nodes": len(self.statuses),
            "attempted": self.attempted,
            "succeeded": self.succeeded,
            "failed": self.failed,
            "skipped": self.skipped,
            "failed_or_skipped": self.failed_or_skipped,
            "makespan": self.makespan,
            "statuses": {d: s.value for d, s in sorted(self.statuses.items())},
        }


def simulate(
    dag: BuildDag,
    outcome_fn: Callable[[BuildUnit], bool],
    workers: int = 1,
    latency_fn: Callable[[BuildUnit], float] | None = None,
) -> SimReport:
    """Run the farmer-worker protocol to completion.

    Ready units enter a FIFO queue ordered by digest within each wave and
    are assigned to the lowest-numbered free worker, so the schedule is a
    pure function of the inputs.  Every unit ends succeeded, failed, or
    skipped, and attempted + skipped equals the node count.
    """
    if workers < 1:
        raise ValueError("workers must be at least 1")
    if latency_fn is None:
        latency_fn = lambda unit: 1.0

    status: dict[str, NodeStatus] = {d: NodeStatus.PENDING for d in dag.units}
    dependents = dag.dependents()
    waiting_on = {d: len(unit.deps) for d, unit in dag.units.items()}

    ready: list[str] = sorted(d for d, n in waiting_on.items() if n == 0)
    for d in ready:
        status[d] = NodeStatus.READY
    free_workers = list(range(workers))
    heapq.heapify(free_workers)
    building: list[tuple[float, str, int, float]] = []  # (end, digest, worker, start)
    events: list[SimEvent] = []
    now = 0.0
    makespan = 0.0

    def start_ready() -> None:
        while ready and free_workers:
            digest = ready.pop(0)
            worker = heapq.heappop(free_workers)
            unit = dag.units[digest]
            latency = float(latency_fn(unit))
            if latency < 0:
                raise ValueError(f"negative latency for unit {digest}")
            status[digest] = NodeStatus.BUILDING
            heapq.heappush(building, (now + latency, digest, worker, now))

    def mark_skipped(root: str) -> None:
        stack = [root]
        while stack:
            for dep in dependents[stack.pop()]:
                if status[dep] in (NodeStatus.PENDING, NodeStatus.READY):
                    if status[dep] is NodeStatus.READY:
                        ready.remove(dep)
                    status[dep] = NodeStatus.SKIPPED
                    stack.append(dep)

    start_ready()
    while building:
        end, digest, worker, start = heapq.heappop(building)
        now = end
        makespan = max(makespan, end)
        unit = dag.units[digest]
        ok = bool(outcome_fn(unit))
        events.append(SimEvent(unit=digest, worker=worker, start=start, end=end,
                               succeeded=ok))
        heapq.heappush(free_workers, worker)
        if ok:
            status[digest] = NodeStatus.SUCCEEDED
            newly_ready = []
            for dep in dependents[digest]:
                if status[dep] is not NodeStatus.PENDING:
                    continue
                waiting_on[dep] -= 1
                if waiting_on[dep] == 0:
                    status[dep] = NodeStatus.READY
                    newly_ready.append(dep)
            ready.extend(sorted(newly_ready))
        else:
            status[digest] = NodeStatus.FAILED
            mark_skipped(digest)
        start_ready()

    assert all(
        s in (NodeStatus.SUCCEEDED, NodeStatus.FAILED, NodeStatus.SKIPPED)
        for s in status.values()
    ), "simulation left units unresolved"
    succeeded = sum(1 for s in status.values() if s is NodeStatus.SUCCEEDED)
    failed = sum(1 for s in status.values() if s is NodeStatus.FAILED)
    skipped = sum(1 for s in status.values() if s is NodeStatus.SKIPPED)
    return SimReport(
        attempted=succeeded + failed,
        succeeded=succeeded,
        failed=failed,
        skipped=skipped,
        makespan=makespan,
        statuses=status,
        events=tuple(events),
    )


@dataclass(frozen=True)
class PlantedRuleSet:
    """Forbidden (parent version, child version) pairs plus noise rate.

    Rules are stored by name: (parent, parent_version, child, child_version).
    """

    forbidden: frozenset[tuple[str, str, str, str]]
    noise: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.noise < 1.0):
            raise ValueError(f"noise {self.noise} outside [0, 1)")

    def to_dict(self) -> dict:
        return {
            "forbidden": [
                {
                    "parent": p,
                    "parent_version": pv,
                    "child": c,
                    "child_version": cv,
                }
                for p, pv, c, cv in sorted(self.forbidden)
            ],
            "noise": self.noise,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "PlantedRuleSet":
        try:
            rules = frozenset(
                (
                    str(e["parent"]),
                    str(e["parent_version"]),
                    str(e["child"]),
                    str(e["child_version"]),
                )
                for e in payload["forbidden"]
            )
            noise = float(payload.get("noise", 0.0))
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed rule payload: {exc}") from exc
        return cls(forbidden=rules, noise=noise)

    def check_against(self, graph: DependencyGraph) -> None:
        """Every rule must name an existing edge and valid versions."""
        edge_names = {
            (graph.packages[p], graph.packages[c]) for p, c in graph.edges
        }
        for parent, pv, child, cv in sorted(self.forbidden):
            if (parent, child) not in edge_names:
                raise ValueError(f"rule references missing edge {parent!r} -> {child!r}")
            graph.version_index(graph.index_of(parent), pv)
            graph.version_index(graph.index_of(child), cv)

    def index_rules(
        self, graph: DependencyGraph
    ) -> tuple[tuple[int, int, int, int], ...]:
        """Rules as (parent, parent_version, child, child_version) indices."""
        self.check_against(graph)
        out = []
        for parent, pv, child, cv in sorted(self.forbidden):
            p = graph.index_of(parent)
            c = graph.index_of(child)
            out.append((p, graph.version_index(p, pv), c, graph.version_index(c, cv)))
        return tuple(out)


def load_rules(path: str) -> PlantedRuleSet:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    return PlantedRuleSet.from_dict(payload)


def save_rules(rules: PlantedRuleSet, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(rules.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _hash_unit_interval(seed: int, tag: str) -> float:
    """Deterministic pseudo-uniform value in [0, 1) for one tagged entity."""
    h = hashlib.sha256()
    h.update(str(int(seed)).encode("ascii"))
    h.update(b"/")
    h.update(tag.encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "big") / 2**64


class SyntheticOracle:
    """Ground-truth oracle: a configuration builds iff no planted rule fires.

    With a positive noise rate a configuration may also fail spontaneously;
    the noise decision is a deterministic hash of the config digest, so
    repeated queries agree.
    """

    def __init__(self, graph: DependencyGraph, rules: PlantedRuleSet, seed: int = 0):
        validate_graph(graph)
        self.graph = graph
        self.rules = rules
        self.seed = seed
        self._index_rules = rules.index_rules(graph)

    def candidate_configurations(self) -> None:
        return None

    def evaluate(self, config: Configuration) -> bool:
        check_configuration(self.graph, config)
        for p, pv, c, cv in self._index_rules:
            if config[p] == pv and config[c] == cv:
                return False
        if self.rules.noise > 0.0:
            digest = config_digest(self.graph, config)
            if _hash_unit_interval(self.seed, digest) < self.rules.noise:
                return False
        return True

    def good_mask(self, matrix: np.ndarray) -> np.ndarray:
        """Rule-only good mask for candidate rows (noise not applied)."""
        bad = np.zeros(matrix.shape[0], dtype=bool)
        for p, pv, c, cv in self._index_rules:
            bad |= (matrix[:, p] == pv) & (matrix[:, c] == cv)
        return ~bad

    def enumerate_good(self) -> list[Configuration]:
        """All good configurations, for spaces within the enumeration limit."""
        matrix = full_space_matrix(self.graph)
        mask = self.good_mask(matrix)
        configs = [tuple(int(v) for v in row) for row in matrix[mask]]
        if self.rules.noise > 0.0:
            configs = [c for c in configs if self.evaluate(c)]
        return configs

    def good_count(self) -> int:
        return len(self.enumerate_good())

    def success_rate(self) -> float:
        return self.good_count() / space_size(self.graph)


def synthetic_oracle(
    graph: DependencyGraph, rules: PlantedRuleSet, seed: int = 0
) -> SyntheticOracle:
    return SyntheticOracle(graph, rules, seed)


def planted_outcome(
    dag: BuildDag, rules: PlantedRuleSet, graph: DependencyGraph, seed: int = 0
) -> Callable[[BuildUnit], bool]:
    """Unit-level outcome function matching the config-level oracle.

    A unit fails when one of its direct dependency units activates a
    forbidden pair with it, or (with noise) by a deterministic hash of the
    unit digest.  A configuration's root unit then succeeds exactly when
    the configuration satisfies every rule.
    """
    rules.check_against(graph)
    by_parent: dict[tuple[str, str], set[tuple[str, str]]] = {}
    for parent, pv, child, cv in rules.forbidden:
        by_parent.setdefault((parent, pv), set()).add((child, cv))

    def outcome(unit: BuildUnit) -> bool:
        bad_children = by_parent.get((unit.package, unit.version))
        if bad_children:
            for dep_digest in unit.deps:
                dep = dag.units[dep_digest]
                if (dep.package, dep.version) in bad_children:
                    return False
        if rules.noise > 0.0:
            if _hash_unit_interval(seed, unit.digest) < rules.noise:
                return False
        return True

    return outcome


def enumerate_records(oracle: SyntheticOracle) -> list[BuildRecord]:
    """Label the whole space, for spaces within the enumeration limit."""
    matrix = full_space_matrix(oracle.graph)
    records = []
    for row in matrix:
        config = tuple(int(v) for v in row)
        records.append(BuildRecord(config=config, outcome=oracle.evaluate(config)))
    return records


def _random_tree_graph(
    n_packages: int,
    domain_sizes: Sequence[int],
    rng: np.random.Generator,
) -> DependencyGraph:
    names = ["root"] + [f"dep{i:02d}" for i in range(1, n_packages)]
    domains = tuple(
        tuple(f"v{j + 1}" for j in range(size)) for size in domain_sizes
    )
    edges = tuple(
        sorted((int(rng.integers(i)), i) for i in range(1, n_packages))
    )
    graph = DependencyGraph(
        packages=tuple(names), domains=domains, edges=edges, root=0
    )
    validate_graph(graph)
    return graph


def _resolve_domain_sizes(n_packages: int, domain_sizes: int | Sequence[int]) -> list[int]:
    if isinstance(domain_sizes, int):
        sizes = [domain_sizes] * n_packages
    else:
        sizes = [int(s) for s in domain_sizes]
        if len(sizes) != n_packages:
            raise ValueError(
                f"{len(sizes)} domain sizes given for {n_packages} packages"
            )
    if any(s < 1 for s in sizes):
        raise ValueError("domain sizes must be positive")
    return sizes


def generate_benchmark(
    n_packages: int,
    domain_sizes: int | Sequence[int],
    rule_density: float,
    target_rate: float,
    seed: int,
    max_attempts: int = 25,
    tolerance: float = 0.2,
) -> tuple[DependencyGraph, PlantedRuleSet]:
    """Generate a random tree graph plus rules hitting a target success rate.

    Rules are planted one at a time from a shuffled pool of version pairs
    until the measured rate falls within the relative tolerance band around
    the target; a pair that would overshoot the band is put back.  The rule
    count is capped at rule_density times the pool size.  Raises
    BenchmarkError when (graph, pool, cap) cannot reach the band after
    max_attempts fresh graphs.
    """
    if n_packages < 2:
        raise ValueError("a benchmark needs at least two packages")
    if not (0.0 < target_rate <= 1.0):
        raise ValueError(f"target rate {target_rate} outside (0, 1]")
    if not (0.0 <= rule_density <= 1.0):
        raise ValueError(f"rule density {rule_density} outside [0, 1]")
    sizes = _resolve_domain_sizes(n_packages, domain_sizes)
    rng = substream(seed, "benchmark")
    lo = target_rate * (1.0 - tolerance)
    hi = min(1.0, target_rate * (1.0 + tolerance))

    for _ in range(max_attempts):
        graph = _random_tree_graph(n_packages, sizes, rng)
        if target_rate == 1.0:
            return graph, PlantedRuleSet(forbidden=frozenset())
        matrix = _rate_matrix(graph, rng)
        pool = [
            (j, u, w)
            for j, (p, c) in enumerate(graph.edges)
            for u in range(sizes[p])
            for w in range(sizes[c])
        ]
        order = rng.permutation(len(pool))
        cap = max(1, round(rule_density * len(pool)))
        bad = np.zeros(matrix.shape[0], dtype=bool)
        chosen: list[tuple[str, str, str, str]] = []
        rate = 1.0
        for k in order:
            if rate <= hi or len(chosen) >= cap:
                break
            j, u, w = pool[int(k)]
            p, c = graph.edges[j]
            new_bad = bad | ((matrix[:, p] == u) & (matrix[:, c] == w))
            new_rate = 1.0 - float(new_bad.mean())
            if new_rate < lo:
                continue
            bad = new_bad
            rate = new_rate
            chosen.append(
                (
                    graph.packages[p],
                    graph.domains[p][u],
                    graph.packages[c],
                    graph.domains[c][w],
                )
            )
        if lo <= rate <= hi:
            return graph, PlantedRuleSet(forbidden=frozenset(chosen))
    raise BenchmarkError(
        f"could not reach a success rate of {target_rate} (+/-{tolerance:.0%}) "
        f"after {max_attempts} attempts; adjust rule_density or the space"
    )


def _rate_matrix(graph: DependencyGraph, rng: np.random.Generator) -> np.ndarray:
    """Rows used to measure the success rate: the space, or a large sample."""
    if space_size(graph) <= 10**6:
        return full_space_matrix(graph)
    return np.column_stack(
        [rng.integers(m, size=20000) for m in graph.domain_sizes]
    ).astype(np.int32)
