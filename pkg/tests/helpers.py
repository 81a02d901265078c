"""Shared fixtures for the test suite: small graphs and record builders."""
from __future__ import annotations

from buildtuner import BuildRecord, DependencyGraph, config_digest, random_configuration, validate_graph


def chain_graph(n: int = 3, versions: int = 2) -> DependencyGraph:
    """A -> B -> C ... with identical version domains."""
    names = tuple(chr(ord("A") + i) for i in range(n))
    graph = DependencyGraph(
        packages=names,
        domains=tuple(tuple(f"v{j + 1}" for j in range(versions)) for _ in range(n)),
        edges=tuple((i, i + 1) for i in range(n - 1)),
        root=0,
    )
    validate_graph(graph)
    return graph


def two_package_graph() -> DependencyGraph:
    return chain_graph(2, 2)


def diamond_graph() -> DependencyGraph:
    """R depends on M1 and M2, both of which depend on L."""
    graph = DependencyGraph(
        packages=("R", "M1", "M2", "L"),
        domains=(("v1",), ("v1",), ("v1",), ("v1",)),
        edges=((0, 1), (0, 2), (1, 3), (2, 3)),
        root=0,
    )
    validate_graph(graph)
    return graph


def distinct_records(graph, count, rng, outcome_fn) -> list[BuildRecord]:
    """Draw distinct random configurations labeled by outcome_fn."""
    seen: set[str] = set()
    records: list[BuildRecord] = []
    attempts = 0
    while len(records) < count:
        attempts += 1
        if attempts > 1000 * count:
            raise AssertionError(
                f"could not draw {count} distinct configurations; space too small?"
            )
        config = random_configuration(graph, rng)
        digest = config_digest(graph, config)
        if digest in seen:
            continue
        seen.add(digest)
        records.append(BuildRecord(config=config, outcome=bool(outcome_fn(config))))
    return records


def wide_graph(n_deps: int, versions: int = 2) -> DependencyGraph:
    """One root with n_deps direct dependencies."""
    names = ("root",) + tuple(f"dep{i:02d}" for i in range(1, n_deps + 1))
    graph = DependencyGraph(
        packages=names,
        domains=tuple(tuple(f"v{j + 1}" for j in range(versions)) for _ in names),
        edges=tuple((0, i) for i in range(1, n_deps + 1)),
        root=0,
    )
    validate_graph(graph)
    return graph
