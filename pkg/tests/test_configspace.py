"""Graph validation, space enumeration, and canonical digests."""
from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from buildtuner import (
    DependencyGraph,
    GraphError,
    config_digest,
    enumerate_configurations,
    load_graph,
    random_configuration,
    save_graph,
    space_size,
    validate_graph,
)
from buildtuner.configspace import (
    check_configuration,
    config_from_labels,
    full_space_matrix,
    labels_of,
)
from helpers import chain_graph, two_package_graph


def test_valid_chain_passes():
    validate_graph(chain_graph(4, 3))


@pytest.mark.parametrize(
    "edges, message",
    [
        (((0, 0),), "self-edge at package 0"),
        (((0, 1), (1, 0)), "cycle"),
        (((0, 5),), "dangling edge"),
    ],
)
def test_bad_edges_rejected(edges, message):
    graph = DependencyGraph(
        packages=("A", "B"),
        domains=(("v1",), ("v1",)),
        edges=edges,
        root=0,
    )
    with pytest.raises(GraphError, match=message):
        validate_graph(graph)


def test_empty_domain_rejected():
    graph = DependencyGraph(
        packages=("A", "B"), domains=(("v1",), ()), edges=((0, 1),), root=0
    )
    with pytest.raises(GraphError, match="empty domain at package 1"):
        validate_graph(graph)


def test_duplicate_version_rejected():
    graph = DependencyGraph(
        packages=("A", "B"), domains=(("v1", "v1"), ("v1",)), edges=((0, 1),), root=0
    )
    with pytest.raises(GraphError, match="duplicate version label at package 0"):
        validate_graph(graph)


def test_unreachable_package_rejected():
    graph = DependencyGraph(
        packages=("A", "B", "C"),
        domains=(("v1",), ("v1",), ("v1",)),
        edges=((0, 1),),
        root=0,
    )
    with pytest.raises(GraphError, match="package 2 .* unreachable"):
        validate_graph(graph)


def test_bad_root_rejected():
    graph = DependencyGraph(
        packages=("A",), domains=(("v1",),), edges=(), root=3
    )
    with pytest.raises(GraphError, match="root index 3"):
        validate_graph(graph)


def test_space_size_is_domain_product():
    graph = chain_graph(3, 2)
    assert space_size(graph) == 8
    # Unbounded integers: 40 packages with 10 versions each.
    big = DependencyGraph(
        packages=tuple(f"p{i}" for i in range(40)),
        domains=tuple(tuple(f"v{j}" for j in range(10)) for _ in range(40)),
        edges=tuple((0, i) for i in range(1, 40)),
        root=0,
    )
    validate_graph(big)
    assert space_size(big) == 10**40


def test_enumeration_matches_space_size():
    graph = chain_graph(3, 3)
    configs = list(enumerate_configurations(graph))
    assert len(configs) == space_size(graph) == 27
    assert len(set(configs)) == 27
    matrix = full_space_matrix(graph)
    assert matrix.shape == (27, 3)
    assert [tuple(int(v) for v in row) for row in matrix] == configs


def test_random_configuration_valid_and_deterministic():
    graph = chain_graph(5, 4)
    rng = np.random.default_rng(7)
    configs = [random_configuration(graph, rng) for _ in range(50)]
    for config in configs:
        check_configuration(graph, config)
    rng2 = np.random.default_rng(7)
    assert configs == [random_configuration(graph, rng2) for _ in range(50)]


def test_random_configuration_uniform_within_3_sigma():
    graph = DependencyGraph(
        packages=("A",), domains=(("v1", "v2", "v3", "v4"),), edges=(), root=0
    )
    rng = np.random.default_rng(123)
    draws = 10_000
    counts = np.zeros(4)
    for _ in range(draws):
        counts[random_configuration(graph, rng)[0]] += 1
    expected = draws / 4
    sigma = np.sqrt(draws * 0.25 * 0.75)
    assert np.all(np.abs(counts - expected) <= 3 * sigma)


class TestDigest:
    def test_digest_is_stable_and_hex(self):
        graph = two_package_graph()
        d1 = config_digest(graph, (0, 1))
        d2 = config_digest(graph, (0, 1))
        assert d1 == d2
        assert len(d1) == 64
        int(d1, 16)

    def test_distinct_configs_distinct_digests(self):
        graph = chain_graph(3, 3)
        digests = {config_digest(graph, c) for c in enumerate_configurations(graph)}
        assert len(digests) == space_size(graph)

    def test_single_version_change_changes_digest(self):
        graph = chain_graph(3, 2)
        assert config_digest(graph, (0, 0, 0)) != config_digest(graph, (0, 0, 1))

    def test_declaration_order_permutation_preserves_digest(self):
        graph = two_package_graph()
        flipped = DependencyGraph(
            packages=("B", "A"),
            domains=(("v1", "v2"), ("v1", "v2")),
            edges=((1, 0),),
            root=1,
        )
        validate_graph(flipped)
        original = config_from_labels(graph, {"A": "v1", "B": "v2"})
        permuted = config_from_labels(flipped, {"A": "v1", "B": "v2"})
        assert config_digest(graph, original) == config_digest(flipped, permuted)

    def test_out_of_range_config_rejected(self):
        graph = two_package_graph()
        with pytest.raises(GraphError, match="out of range"):
            config_digest(graph, (0, 5))
        with pytest.raises(GraphError, match="length"):
            config_digest(graph, (0,))


def test_labels_round_trip():
    graph = chain_graph(3, 2)
    config = (1, 0, 1)
    labels = labels_of(graph, config)
    assert labels == {"A": "v2", "B": "v1", "C": "v2"}
    assert config_from_labels(graph, labels) == config


def test_config_from_labels_errors():
    graph = two_package_graph()
    with pytest.raises(GraphError, match="unknown package"):
        config_from_labels(graph, {"A": "v1", "B": "v1", "Z": "v1"})
    with pytest.raises(GraphError, match="missing version for package"):
        config_from_labels(graph, {"A": "v1"})
    with pytest.raises(GraphError, match="unknown version"):
        config_from_labels(graph, {"A": "v1", "B": "v9"})


def test_graph_json_round_trip(tmp_path):
    graph = chain_graph(4, 3)
    path = tmp_path / "graph.json"
    save_graph(graph, str(path))
    assert load_graph(str(path)) == graph


def test_graph_file_uses_names(tmp_path):
    graph = two_package_graph()
    path = tmp_path / "graph.json"
    save_graph(graph, str(path))
    payload = json.loads(path.read_text())
    assert payload["root"] == "A"
    assert payload["edges"] == [["A", "B"]]
    assert payload["packages"][0] == {"name": "A", "versions": ["v1", "v2"]}


def test_load_graph_rejects_bad_payloads(tmp_path):
    path = tmp_path / "graph.json"
    path.write_text("not json")
    with pytest.raises(GraphError, match="invalid JSON"):
        load_graph(str(path))
    path.write_text(json.dumps({"root": "A", "packages": [], "edges": []}))
    with pytest.raises(GraphError, match="root 'A' is not a declared package"):
        load_graph(str(path))
    path.write_text(json.dumps({
        "root": "A",
        "packages": [{"name": "A", "versions": ["v1"]}],
        "edges": [["A", "Z"]],
    }))
    with pytest.raises(GraphError, match="unknown package"):
        load_graph(str(path))


def test_full_space_matrix_refuses_huge_spaces():
    graph = DependencyGraph(
        packages=tuple(f"p{i}" for i in range(21)),
        domains=tuple(tuple(f"v{j}" for j in range(2)) for _ in range(21)),
        edges=tuple((0, i) for i in range(1, 21)),
        root=0,
    )
    validate_graph(graph)
    with pytest.raises(GraphError, match="exceeds the exhaustive limit"):
        full_space_matrix(graph)


@st.composite
def tree_graphs(draw):
    n = draw(st.integers(min_value=1, max_value=6))
    sizes = [draw(st.integers(min_value=1, max_value=4)) for _ in range(n)]
    parents = [draw(st.integers(min_value=0, max_value=i - 1)) for i in range(1, n)]
    graph = DependencyGraph(
        packages=tuple(f"p{i}" for i in range(n)),
        domains=tuple(tuple(f"v{j}" for j in range(m)) for m in sizes),
        edges=tuple(sorted((p, i + 1) for i, p in enumerate(parents))),
        root=0,
    )
    return graph


@given(tree_graphs(), st.integers(min_value=0, max_value=2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_random_trees_validate_and_sample(graph, seed):
    validate_graph(graph)
    config = random_configuration(graph, np.random.default_rng(seed))
    check_configuration(graph, config)
    assert len(set(config_digest(graph, c) for c in enumerate_configurations(graph))) \
        == space_size(graph)
