"""Dependency graphs, version assignments, and canonical config digests.

A configuration space is a rooted DAG of packages, each with a finite domain
of version labels.  A configuration assigns one version index to every
package, the root included.  Configurations are identified across runs,
files, and machines by a canonical content digest.
"""
from __future__ import annotations

import hashlib
import itertools
import json
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator

import numpy as np

__all__ = [
    "Configuration",
    "DependencyGraph",
    "GraphError",
    "check_configuration",
    "config_digest",
    "config_from_labels",
    "enumerate_configurations",
    "full_space_matrix",
    "labels_of",
    "load_graph",
    "random_configuration",
    "save_graph",
    "space_size",
    "validate_graph",
]

# A configuration is one version index per package, aligned with
# DependencyGraph.packages.
Configuration = tuple[int, ...]

EXHAUSTIVE_LIMIT = 10**6


class GraphError(ValueError):
    """A dependency graph or configuration violates a structural invariant."""


@dataclass(frozen=True)
class DependencyGraph:
    """A rooted DAG of packages with per-package version domains.

    Edges are directed parent -> child, meaning the parent package depends
    on the child.  The direction is metadata only; no operation in this
    module conditions on it.
    """

    packages: tuple[str, ...]
    domains: tuple[tuple[str, ...], ...]
    edges: tuple[tuple[int, int], ...]
    root: int

    @cached_property
    def _name_index(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(self.packages)}

    @cached_property
    def children_map(self) -> tuple[tuple[int, ...], ...]:
        out: list[list[int]] = [[] for _ in self.packages]
        for parent, child in self.edges:
            out[parent].append(child)
        return tuple(tuple(sorted(cs)) for cs in out)

    @property
    def n_packages(self) -> int:
        return len(self.packages)

    @property
    def domain_sizes(self) -> tuple[int, ...]:
        return tuple(len(d) for d in self.domains)

    def index_of(self, name: str) -> int:
        try:
            return self._name_index[name]
        except KeyError:
            raise GraphError(f"unknown package {name!r}") from None

    def version_index(self, package: int, label: str) -> int:
        try:
            return self.domains[package].index(label)
        except ValueError:
            raise GraphError(
                f"unknown version {label!r} for package {self.packages[package]!r}"
            ) from None

    def to_dict(self) -> dict:
        return {
            "root": self.packages[self.root],
            "packages": [
                {"name": name, "versions": list(domain)}
                for name, domain in zip(self.packages, self.domains)
            ],
            "edges": [
                [self.packages[p], self.packages[c]] for p, c in self.edges
            ],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "DependencyGraph":
        try:
            entries = payload["packages"]
            names = tuple(str(e["name"]) for e in entries)
            domains = tuple(tuple(str(v) for v in e["versions"]) for e in entries)
            root_name = payload["root"]
            raw_edges = payload["edges"]
        except (KeyError, TypeError) as exc:
            raise GraphError(f"malformed graph payload: {exc}") from exc
        index = {name: i for i, name in enumerate(names)}
        if len(index) != len(names):
            raise GraphError("duplicate package names")
        if root_name not in index:
            raise GraphError(f"root {root_name!r} is not a declared package")
        edges = []
        for pair in raw_edges:
            parent, child = pair
            if parent not in index or child not in index:
                raise GraphError(f"edge references unknown package: {pair!r}")
            edges.append((index[parent], index[child]))
        graph = cls(
            packages=names,
            domains=domains,
            edges=tuple(sorted(edges)),
            root=index[root_name],
        )
        validate_graph(graph)
        return graph


def validate_graph(graph: DependencyGraph) -> None:
    """Check all structural invariants; raise GraphError at the first failure.

    Checks run in a fixed order: root index, domains (empty, duplicates),
    edges (dangling, self-edge), acyclicity, reachability from the root.
    """
    n = graph.n_packages
    if n == 0:
        raise GraphError("graph has no packages")
    if not (0 <= graph.root < n):
        raise GraphError(f"root index {graph.root} out of range")
    if len(graph.domains) != n:
        raise GraphError("domain list length does not match package count")
    for i, domain in enumerate(graph.domains):
        if len(domain) == 0:
            raise GraphError(f"empty domain at package {i} ({graph.packages[i]!r})")
        if len(set(domain)) != len(domain):
            raise GraphError(
                f"duplicate version label at package {i} ({graph.packages[i]!r})"
            )
    for parent, child in graph.edges:
        if not (0 <= parent < n and 0 <= child < n):
            raise GraphError(f"dangling edge ({parent}, {child})")
        if parent == child:
            raise GraphError(f"self-edge at package {parent}")
    # Kahn's algorithm; leftover nodes sit on a directed cycle.
    indegree = [0] * n
    for _, child in graph.edges:
        indegree[child] += 1
    queue = [i for i in range(n) if indegree[i] == 0]
    seen = 0
    while queue:
        node = queue.pop()
        seen += 1
        for child in graph.children_map[node]:
            indegree[child] -= 1
            if indegree[child] == 0:
                queue.append(child)
    if seen != n:
        cyclic = min(i for i in range(n) if indegree[i] > 0)
        raise GraphError(f"cycle through package {cyclic} ({graph.packages[cyclic]!r})")
    reachable = {graph.root}
    stack = [graph.root]
    while stack:
        node = stack.pop()
        for child in graph.children_map[node]:
            if child not in reachable:
                reachable.add(child)
                stack.append(child)
    if len(reachable) != n:
        missing = min(set(range(n)) - reachable)
        raise GraphError(
            f"package {missing} ({graph.packages[missing]!r}) unreachable from root"
        )


def check_configuration(graph: DependencyGraph, config: Configuration) -> None:
    if len(config) != graph.n_packages:
        raise GraphError(
            f"configuration length {len(config)} does not match "
            f"{graph.n_packages} packages"
        )
    for i, v in enumerate(config):
        if not (0 <= v < len(graph.domains[i])):
            raise GraphError(
                f"version index {v} out of range for package {i} "
                f"({graph.packages[i]!r})"
            )


def space_size(graph: DependencyGraph) -> int:
    """Number of distinct configurations, as an exact (unbounded) integer."""
    size = 1
    for domain in graph.domains:
        size *= len(domain)
    return size


def random_configuration(graph: DependencyGraph, rng: np.random.Generator) -> Configuration:
    """Draw each package's version index independently and uniformly.

    Draw order is package index ascending, so the result is fully
    determined by the generator state.
    """
    return tuple(int(rng.integers(len(domain))) for domain in graph.domains)


def enumerate_configurations(graph: DependencyGraph) -> Iterator[Configuration]:
    """Yield every configuration, last package index varying fastest."""
    return itertools.product(*(range(len(d)) for d in graph.domains))


def full_space_matrix(graph: DependencyGraph) -> np.ndarray:
    """The whole space as an int32 matrix, one row per configuration.

    Row order matches enumerate_configurations.  Refuses spaces larger
    than EXHAUSTIVE_LIMIT.
    """
    size = space_size(graph)
    if size > EXHAUSTIVE_LIMIT:
        raise GraphError(
            f"space of {size} configurations exceeds the exhaustive limit "
            f"of {EXHAUSTIVE_LIMIT}"
        )
    grid = np.indices(graph.domain_sizes, dtype=np.int32)
    return grid.reshape(graph.n_packages, -1).T.copy()


def config_digest(graph: DependencyGraph, config: Configuration) -> str:
    """Canonical 256-bit digest of a configuration.

    Package names are visited in sorted order, each paired with its assigned
    version label, both encoded as length-prefixed UTF-8.  The digest is
    therefore invariant under permutation of the package declaration order.
    """
    check_configuration(graph, config)
    h = hashlib.sha256()
    for name in sorted(graph.packages):
        i = graph._name_index[name]
        label = graph.domains[i][config[i]]
        for text in (name, label):
            raw = text.encode("utf-8")
            h.update(len(raw).to_bytes(4, "big"))
            h.update(raw)
    return h.hexdigest()


def config_from_labels(graph: DependencyGraph, versions: dict[str, str]) -> Configuration:
    """Build a configuration from a {package name: version label} mapping."""
    if set(versions) != set(graph.packages):
        extra = sorted(set(versions) - set(graph.packages))
        missing = sorted(set(graph.packages) - set(versions))
        if extra:
            raise GraphError(f"unknown package {extra[0]!r}")
        raise GraphError(f"missing version for package {missing[0]!r}")
    return tuple(
        graph.version_index(i, versions[name]) for i, name in enumerate(graph.packages)
    )


def labels_of(graph: DependencyGraph, config: Configuration) -> dict[str, str]:
    check_configuration(graph, config)
    return {
        name: graph.domains[i][config[i]] for i, name in enumerate(graph.packages)
    }


def load_graph(path: str) -> DependencyGraph:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise GraphError(f"{path}: invalid JSON: {exc}") from exc
    return DependencyGraph.from_dict(payload)


def save_graph(graph: DependencyGraph, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(graph.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
