"""Dataset parsing, persistence, splitting, and summaries."""
from __future__ import annotations

import json

import numpy as np
import pytest

from buildtuner import (
    BuildRecord,
    Dataset,
    DatasetError,
    DatasetOracle,
    load_dataset,
    save_dataset,
    split_train_test,
    summarize,
)
from buildtuner.configspace import save_graph
from helpers import chain_graph, distinct_records, wide_graph


def _write(tmp_path, lines):
    path = tmp_path / "data.jsonl"
    path.write_text("".join(line + "\n" for line in lines))
    return str(path)


def _header(graph_file="graph.json"):
    return json.dumps({"format": 1, "graph": graph_file})


def _prepared(tmp_path, record_lines):
    save_graph(chain_graph(2, 2), str(tmp_path / "graph.json"))
    return _write(tmp_path, [_header()] + record_lines)


def test_round_trip(tmp_path):
    graph = chain_graph(3, 4)
    rng = np.random.default_rng(5)
    records = distinct_records(graph, 30, rng, lambda c: c[0] == 0)
    dataset = Dataset(graph, records)
    save_graph(graph, str(tmp_path / "graph.json"))
    save_dataset(dataset, str(tmp_path / "data.jsonl"), "graph.json")
    assert load_dataset(str(tmp_path / "data.jsonl")) == dataset


def test_explicit_graph_override(tmp_path):
    graph = chain_graph(2, 2)
    dataset = Dataset(graph, [BuildRecord((0, 0), True)])
    save_dataset(dataset, str(tmp_path / "data.jsonl"), "missing.json")
    # No graph file on disk, but an in-memory graph skips resolution.
    assert load_dataset(str(tmp_path / "data.jsonl"), graph=graph) == dataset


def test_empty_file_rejected(tmp_path):
    path = tmp_path / "data.jsonl"
    path.write_text("")
    with pytest.raises(DatasetError, match="line 1: empty dataset"):
        load_dataset(str(path))


def test_header_errors(tmp_path):
    with pytest.raises(DatasetError, match="line 1: invalid JSON"):
        load_dataset(_write(tmp_path, ["{oops"]))
    with pytest.raises(DatasetError, match="line 1: header"):
        load_dataset(_write(tmp_path, [json.dumps({"format": 1})]))
    with pytest.raises(DatasetError, match="unsupported format"):
        load_dataset(_write(tmp_path, [json.dumps({"format": 99, "graph": "g.json"})]))


def test_record_parse_errors_carry_line_numbers(tmp_path):
    path = _prepared(tmp_path, [
        json.dumps({"versions": {"A": "v1", "B": "v1"}, "built": True}),
        "{broken",
    ])
    with pytest.raises(DatasetError, match="line 3: invalid JSON"):
        load_dataset(path)

    path = _prepared(tmp_path, [json.dumps({"versions": {"A": "v1"}})])
    with pytest.raises(DatasetError, match="line 2: record needs"):
        load_dataset(path)


def test_unknown_package_and_version(tmp_path):
    path = _prepared(tmp_path, [
        json.dumps({"versions": {"A": "v1", "Z": "v1"}, "built": True}),
    ])
    with pytest.raises(DatasetError, match="line 2: unknown package 'Z'"):
        load_dataset(path)

    path = _prepared(tmp_path, [
        json.dumps({"versions": {"A": "v1", "B": "v7"}, "built": True}),
    ])
    with pytest.raises(DatasetError, match="line 2: unknown version 'v7'"):
        load_dataset(path)


def test_duplicate_configuration_rejected(tmp_path):
    record = json.dumps({"versions": {"A": "v1", "B": "v1"}, "built": True})
    path = _prepared(tmp_path, [record, record])
    with pytest.raises(DatasetError, match="line 3: duplicate configuration"):
        load_dataset(path)


def test_dataset_constructor_rejects_duplicates():
    graph = chain_graph(2, 2)
    with pytest.raises(DatasetError, match="duplicate configuration"):
        Dataset(graph, [BuildRecord((0, 0), True), BuildRecord((0, 0), False)])


def test_summarize_counts():
    graph = wide_graph(36, versions=4)
    rng = np.random.default_rng(11)
    records = distinct_records(graph, 892, rng, lambda c: False)
    records = [
        BuildRecord(r.config, i < 133) for i, r in enumerate(records)
    ]
    summary = summarize(Dataset(graph, records))
    assert summary.configs == 892
    assert summary.good == 133
    assert summary.deps == 36
    assert summary.to_dict() == {"configs": 892, "good": 133, "deps": 36}


class TestSplit:
    def _dataset(self, n=40):
        graph = chain_graph(4, 3)
        rng = np.random.default_rng(2)
        return Dataset(graph, distinct_records(graph, n, rng, lambda c: c[0] == 0))

    def test_sizes_round_half_up(self):
        dataset = self._dataset(5)
        train, test = split_train_test(dataset, 0.5, np.random.default_rng(0))
        assert (len(train), len(test)) == (3, 2)
        one = Dataset(dataset.graph, dataset.records[:1])
        train, test = split_train_test(one, 0.5, np.random.default_rng(0))
        assert (len(train), len(test)) == (1, 0)

    def test_partition_is_disjoint_and_complete(self):
        dataset = self._dataset()
        train, test = split_train_test(dataset, 0.3, np.random.default_rng(3))
        assert len(train) + len(test) == len(dataset)
        assert set(train.digests).isdisjoint(test.digests)
        assert set(train.digests) | set(test.digests) == set(dataset.digests)

    def test_same_seed_same_split(self):
        dataset = self._dataset()
        a = split_train_test(dataset, 0.5, np.random.default_rng(9))
        b = split_train_test(dataset, 0.5, np.random.default_rng(9))
        assert a[0] == b[0] and a[1] == b[1]

    def test_different_seeds_differ(self):
        dataset = self._dataset()
        a = split_train_test(dataset, 0.5, np.random.default_rng(1))
        b = split_train_test(dataset, 0.5, np.random.default_rng(2))
        assert a[0] != b[0]

    def test_extreme_fractions(self):
        dataset = self._dataset()
        train, test = split_train_test(dataset, 1.0, np.random.default_rng(0))
        assert (len(train), len(test)) == (len(dataset), 0)
        train, test = split_train_test(dataset, 0.0, np.random.default_rng(0))
        assert (len(train), len(test)) == (0, len(dataset))

    def test_invalid_fraction(self):
        with pytest.raises(ValueError, match="outside"):
            split_train_test(self._dataset(), 1.5, np.random.default_rng(0))


def test_dataset_oracle_replays_outcomes():
    graph = chain_graph(2, 2)
    dataset = Dataset(graph, [BuildRecord((0, 0), True), BuildRecord((1, 1), False)])
    oracle = DatasetOracle(dataset)
    assert oracle.evaluate((0, 0)) is True
    assert oracle.evaluate((1, 1)) is False
    assert oracle.candidate_configurations() == ((0, 0), (1, 1))
    with pytest.raises(ValueError, match="not present in the replay dataset"):
        oracle.evaluate((0, 1))
