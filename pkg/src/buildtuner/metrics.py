"""Precision, recall, ranking quality, and the two evaluation protocols.

Precision and recall are prefix statistics of an evaluation history; the
recall denominator is the total number of good configurations in the ground
truth, not in the history.  Ranking quality is the area under the
precision-recall curve evaluated at every prefix of a ranked list.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .dataset import BuildRecord, Dataset, DatasetOracle, split_train_test
from .rng import derive_seed, substream
from .sampler import STRATEGIES, SamplerConfig, run
from .surrogate import crowd_score_many, expected_improvement_many

__all__ = [
    "ExperimentReport",
    "auprc",
    "auprc_experiment",
    "precision",
    "recall",
    "sweep_experiment",
]


def precision(history: Iterable[BuildRecord]) -> float:
    """Fraction of evaluated configurations that built."""
    outcomes = [r.outcome for r in history]
    if not outcomes:
        raise ValueError("precision of an empty history is undefined")
    return sum(outcomes) / len(outcomes)


def recall(history: Iterable[BuildRecord], total_good: int) -> float:
    """Fraction of all good configurations that the history has found."""
    if total_good <= 0:
        raise ValueError("recall needs a positive total good count")
    found = sum(1 for r in history if r.outcome)
    return found / total_good


def auprc(
    ranked: Sequence[tuple[float, bool]], recall_cutoff: float | None = None
) -> float:
    """Area under the precision-recall curve of a descending-ranked list.

    Each true item at prefix k contributes precision(k) / G where G is the
    number of true items in the whole list.  With a recall cutoff the
    summation stops once recall would exceed the cutoff; the truncated sum
    is returned as-is, not renormalized.
    """
    items = list(ranked)
    if not items:
        raise ValueError("auprc of an empty ranking is undefined")
    scores = [s for s, _ in items]
    for a, b in zip(scores, scores[1:]):
        if b > a:
            raise ValueError("ranking is not sorted by descending score")
    total_true = sum(1 for _, y in items if y)
    if total_true == 0:
        raise ValueError("auprc needs at least one true outcome")
    area = 0.0
    true_seen = 0
    for k, (_, y) in enumerate(items, start=1):
        if not y:
            continue
        true_seen += 1
        if recall_cutoff is not None and true_seen / total_true > recall_cutoff:
            break
        area += (true_seen / k) / total_true
    return area


@dataclass(frozen=True)
class ExperimentReport:
    """Mean and dispersion of prefix precision/recall over repetitions."""

    strategy: str
    sample_sizes: tuple[int, ...]
    mean_p: tuple[float, ...]
    sd_p: tuple[float, ...]
    mean_r: tuple[float, ...]
    sd_r: tuple[float, ...]
    repetitions: int
    seeds: tuple[int, ...]

    def rows(self) -> list[dict]:
        return [
            {
                "strategy": self.strategy,
                "size": size,
                "mean_p": self.mean_p[i],
                "sd_p": self.sd_p[i],
                "mean_r": self.mean_r[i],
                "sd_r": self.sd_r[i],
            }
            for i, size in enumerate(self.sample_sizes)
        ]


def _spread(values: np.ndarray) -> float:
    # Sample standard deviation; a single repetition has no spread.
    if values.size < 2:
        return 0.0
    return float(np.std(values, ddof=1))


def sweep_experiment(
    dataset: Dataset,
    strategies: Sequence[str],
    sample_sizes: Sequence[int],
    repetitions: int,
    base_seed: int,
    bootstrap_size: int = 20,
    smoothing: float = 1.0,
) -> dict[str, ExperimentReport]:
    """Replay each strategy on the dataset and report prefix P/R curves.

    Repetition seeds are derived from base_seed independently of the
    strategy, so strategies are compared on identical bootstrap draws.
    """
    for strategy in strategies:
        if strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {strategy!r}")
    sizes = tuple(int(s) for s in sample_sizes)
    if not sizes:
        raise ValueError("no sample sizes requested")
    if min(sizes) < 1:
        raise ValueError("sample sizes must be positive")
    if max(sizes) > len(dataset):
        raise ValueError(
            f"sample size {max(sizes)} exceeds the dataset size {len(dataset)}"
        )
    if repetitions < 1:
        raise ValueError("repetitions must be positive")
    total_good = dataset.good_count
    if total_good == 0:
        raise ValueError("dataset has no good configurations; recall is undefined")

    seeds = tuple(derive_seed(base_seed, "rep", r) for r in range(repetitions))
    budget = max(0, max(sizes) - bootstrap_size)
    oracle = DatasetOracle(dataset)
    reports: dict[str, ExperimentReport] = {}
    for strategy in strategies:
        p_values = np.zeros((repetitions, len(sizes)))
        r_values = np.zeros((repetitions, len(sizes)))
        for rep, seed in enumerate(seeds):
            cfg = SamplerConfig(
                strategy=strategy,
                bootstrap_size=bootstrap_size,
                budget=budget,
                seed=seed,
                smoothing=smoothing,
            )
            try:
                result = run(oracle, dataset.graph, cfg)
            except ValueError as exc:
                raise ValueError(
                    f"strategy {strategy!r} with seed {seed}: {exc}"
                ) from exc
            entries = result.history.entries
            for j, size in enumerate(sizes):
                prefix = entries[:size]
                p_values[rep, j] = precision(prefix)
                r_values[rep, j] = recall(prefix, total_good)
        reports[strategy] = ExperimentReport(
            strategy=strategy,
            sample_sizes=sizes,
            mean_p=tuple(float(np.mean(p_values[:, j])) for j in range(len(sizes))),
            sd_p=tuple(_spread(p_values[:, j]) for j in range(len(sizes))),
            mean_r=tuple(float(np.mean(r_values[:, j])) for j in range(len(sizes))),
            sd_r=tuple(_spread(r_values[:, j]) for j in range(len(sizes))),
            repetitions=repetitions,
            seeds=seeds,
        )
    return reports


def auprc_experiment(
    dataset: Dataset,
    strategy: str,
    seed: int,
    selections: int = 100,
    bootstrap_size: int = 20,
    smoothing: float = 1.0,
    train_fraction: float = 0.5,
) -> float:
    """Split, adapt on the training half, then rank and score the test half.

    The model fitted after the adaptive run scores every test configuration;
    the ranking is descending by score with digest order breaking ties.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    train, test = split_train_test(dataset, train_fraction, substream(seed, "split"))
    if len(train) < selections + bootstrap_size:
        raise ValueError(
            f"training half of {len(train)} records cannot support "
            f"{bootstrap_size} bootstrap draws plus {selections} selections"
        )
    if len(test) == 0:
        raise ValueError("test half is empty")
    cfg = SamplerConfig(
        strategy=strategy,
        bootstrap_size=bootstrap_size,
        budget=selections,
        seed=seed,
        smoothing=smoothing,
    )
    result = run(DatasetOracle(train), dataset.graph, cfg)
    matrix = np.asarray([r.config for r in test.records], dtype=np.int64)
    if strategy == "bayesian":
        scores = expected_improvement_many(result.model, matrix)
    elif strategy == "crowd":
        scores = crowd_score_many(result.model, matrix)
    else:
        scores = substream(seed, "rank").random(len(test))
    order = sorted(range(len(test)), key=lambda i: (-scores[i], test.digests[i]))
    ranked = [(float(scores[i]), test.records[i].outcome) for i in order]
    return auprc(ranked)
