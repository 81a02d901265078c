"""Adaptive selection of build configurations to evaluate.

The loop bootstraps with uniform random draws, fits the factorized
surrogate, then repeatedly evaluates the unseen candidate with the best
strategy score, folding each observation back into the model.  Three
strategies are supported: "bayesian" (expected improvement), "crowd"
(good-side frequency product), and "random" (uniform baseline).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Protocol, Sequence

import numpy as np

from .configspace import (
    Configuration,
    DependencyGraph,
    config_digest,
    full_space_matrix,
    random_configuration,
    space_size,
)
from .dataset import BuildRecord
from .rng import substream
from .surrogate import (
    FactorModel,
    crowd_score_many,
    expected_improvement_many,
    fit,
    refit_incremental,
)

__all__ = [
    "STRATEGIES",
    "BuildOracle",
    "NoCandidatesError",
    "ObservationHistory",
    "RunResult",
    "SamplerConfig",
    "TraceEntry",
    "bootstrap",
    "run",
    "select_next",
]

STRATEGIES = ("bayesian", "crowd", "random")
CANDIDATE_MODES = ("exhaustive", "pool")

# Pool mode redraws this many times before concluding the space is exhausted.
_POOL_RETRIES = 20


class NoCandidatesError(ValueError):
    """No unevaluated candidate is available for selection."""


class BuildOracle(Protocol):
    """Anything that can label a configuration as building or failing."""

    def evaluate(self, config: Configuration) -> bool: ...

    def candidate_configurations(self) -> Sequence[Configuration] | None:
        """Fixed candidate set, or None when the space is generative."""
        ...


@dataclass(frozen=True)
class SamplerConfig:
    strategy: str = "bayesian"
    bootstrap_size: int = 20
    budget: int = 100
    candidate_mode: str = "exhaustive"
    pool_size: int = 1000
    seed: int = 42
    smoothing: float = 1.0
    crowd_floor: float = 0.0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.candidate_mode not in CANDIDATE_MODES:
            raise ValueError(f"unknown candidate mode {self.candidate_mode!r}")
        if self.bootstrap_size < 1:
            raise ValueError("bootstrap_size must be at least 1")
        if self.budget < 0:
            raise ValueError("budget must be nonnegative")
        if self.pool_size < 1:
            raise ValueError("pool_size must be at least 1")


@dataclass(frozen=True)
class TraceEntry:
    """One adaptive selection: iteration, chosen digest, score, outcome."""

    t: int
    digest: str
    score: float | None
    built: bool

    def to_dict(self) -> dict:
        return {"t": self.t, "digest": self.digest, "score": self.score,
                "built": self.built}


class ObservationHistory:
    """Evaluated records in evaluation order, unique by config digest."""

    def __init__(self, graph: DependencyGraph):
        self.graph = graph
        self._entries: list[BuildRecord] = []
        self._digests: list[str] = []
        self._seen: set[str] = set()

    def add(self, record: BuildRecord, digest: str | None = None) -> str:
        if digest is None:
            digest = config_digest(self.graph, record.config)
        if digest in self._seen:
            raise ValueError(f"configuration {digest} already evaluated")
        self._seen.add(digest)
        self._entries.append(record)
        self._digests.append(digest)
        return digest

    def contains_digest(self, digest: str) -> bool:
        return digest in self._seen

    @property
    def entries(self) -> tuple[BuildRecord, ...]:
        return tuple(self._entries)

    @property
    def digests(self) -> tuple[str, ...]:
        return tuple(self._digests)

    @property
    def good_count(self) -> int:
        return sum(1 for r in self._entries if r.outcome)

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self):
        return iter(self._entries)


@dataclass(frozen=True)
class RunResult:
    history: ObservationHistory
    trace: tuple[TraceEntry, ...]
    model: FactorModel


def _strategy_scores(
    model: FactorModel, matrix: np.ndarray, strategy: str, crowd_floor: float
) -> np.ndarray:
    if strategy == "bayesian":
        return expected_improvement_many(model, matrix)
    if strategy == "crowd":
        return crowd_score_many(model, matrix, floor=crowd_floor)
    raise ValueError(f"strategy {strategy!r} has no score function")


def _pick_argmax(scores: np.ndarray, rng: np.random.Generator) -> int:
    """Index of the maximum score; exact ties are broken uniformly."""
    best = scores.max()
    tied = np.flatnonzero(scores == best)
    return int(tied[rng.integers(tied.size)])


def bootstrap(
    oracle: BuildOracle,
    graph: DependencyGraph,
    config: SamplerConfig,
    rng: np.random.Generator,
) -> ObservationHistory:
    """Evaluate bootstrap_size distinct uniform draws.

    Draws that collide with an already-evaluated digest are rejected and
    redrawn.  Raises NoCandidatesError when the space holds fewer distinct
    configurations than requested.
    """
    candidates = oracle.candidate_configurations()
    if candidates is not None:
        universe = _CandidateUniverse(graph, candidates)
        return universe.bootstrap(oracle, config.bootstrap_size, rng)
    if space_size(graph) < config.bootstrap_size:
        raise NoCandidatesError(
            f"space of {space_size(graph)} configurations cannot seed a "
            f"bootstrap of {config.bootstrap_size}"
        )
    history = ObservationHistory(graph)
    while len(history) < config.bootstrap_size:
        cand = random_configuration(graph, rng)
        digest = config_digest(graph, cand)
        if history.contains_digest(digest):
            continue
        history.add(BuildRecord(cand, oracle.evaluate(cand)), digest)
    return history


def select_next(
    model: FactorModel,
    candidates: Iterable[Configuration],
    history: ObservationHistory,
    strategy: str,
    rng: np.random.Generator,
    crowd_floor: float = 0.0,
) -> Configuration:
    """Pick the unevaluated candidate with the best score.

    Ties are broken uniformly with the given generator; the random strategy
    treats every unevaluated candidate as tied.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    unevaluated = [
        c for c in candidates
        if not history.contains_digest(config_digest(model.graph, c))
    ]
    if not unevaluated:
        raise NoCandidatesError("every candidate has already been evaluated")
    if strategy == "random":
        return unevaluated[int(rng.integers(len(unevaluated)))]
    matrix = np.asarray(unevaluated, dtype=np.int64)
    scores = _strategy_scores(model, matrix, strategy, crowd_floor)
    return unevaluated[_pick_argmax(scores, rng)]


class _CandidateUniverse:
    """A fixed candidate matrix with digest-keyed evaluation bookkeeping."""

    def __init__(self, graph: DependencyGraph, candidates: Sequence[Configuration] | np.ndarray):
        self.graph = graph
        self.matrix = np.asarray(candidates, dtype=np.int64)
        self.digests = [
            config_digest(graph, tuple(int(v) for v in row)) for row in self.matrix
        ]
        by_digest: dict[str, list[int]] = {}
        for i, d in enumerate(self.digests):
            by_digest.setdefault(d, []).append(i)
        self._by_digest = by_digest
        self.evaluated = np.zeros(self.matrix.shape[0], dtype=bool)

    @property
    def distinct(self) -> int:
        return len(self._by_digest)

    def mark(self, digest: str) -> None:
        for i in self._by_digest[digest]:
            self.evaluated[i] = True

    def config_at(self, index: int) -> Configuration:
        return tuple(int(v) for v in self.matrix[index])

    def bootstrap(
        self, oracle: BuildOracle, size: int, rng: np.random.Generator
    ) -> ObservationHistory:
        if self.distinct < size:
            raise NoCandidatesError(
                f"{self.distinct} distinct candidates cannot seed a bootstrap "
                f"of {size}"
            )
        history = ObservationHistory(self.graph)
        n = self.matrix.shape[0]
        while len(history) < size:
            index = int(rng.integers(n))
            if self.evaluated[index]:
                continue
            digest = self.digests[index]
            cand = self.config_at(index)
            history.add(BuildRecord(cand, oracle.evaluate(cand)), digest)
            self.mark(digest)
        return history


def run(
    oracle: BuildOracle, graph: DependencyGraph, config: SamplerConfig
) -> RunResult:
    """Bootstrap, then adaptively evaluate up to config.budget candidates.

    In exhaustive mode the history ends with exactly
    bootstrap_size + min(budget, remaining distinct candidates) records.
    """
    rng_boot = substream(config.seed, "bootstrap")
    rng_tie = substream(config.seed, "tie-break")
    rng_pool = substream(config.seed, "pool")

    candidates = oracle.candidate_configurations()
    universe: _CandidateUniverse | None = None
    if candidates is not None:
        universe = _CandidateUniverse(graph, candidates)
    elif config.candidate_mode == "exhaustive":
        universe = _CandidateUniverse(graph, full_space_matrix(graph))

    if universe is not None:
        history = universe.bootstrap(oracle, config.bootstrap_size, rng_boot)
    else:
        history = bootstrap(oracle, graph, config, rng_boot)
    model = fit(history, graph, config.smoothing)
    trace: list[TraceEntry] = []

    for t in range(1, config.budget + 1):
        if universe is not None:
            remaining = np.flatnonzero(~universe.evaluated)
            if remaining.size == 0:
                break
            rows = universe.matrix[remaining]
            if config.strategy == "random":
                pick = int(rng_tie.integers(remaining.size))
                score = None
            else:
                scores = _strategy_scores(model, rows, config.strategy,
                                          config.crowd_floor)
                pick = _pick_argmax(scores, rng_tie)
                score = float(scores[pick])
            index = int(remaining[pick])
            chosen = universe.config_at(index)
            digest = universe.digests[index]
            universe.mark(digest)
        else:
            drawn = _draw_pool(graph, config.pool_size, rng_pool, history)
            if drawn is None:
                break
            pool_rows, pool_digests = drawn
            if config.strategy == "random":
                pick = int(rng_tie.integers(len(pool_digests)))
                score = None
            else:
                scores = _strategy_scores(model, pool_rows, config.strategy,
                                          config.crowd_floor)
                pick = _pick_argmax(scores, rng_tie)
                score = float(scores[pick])
            chosen = tuple(int(v) for v in pool_rows[pick])
            digest = pool_digests[pick]

        try:
            outcome = oracle.evaluate(chosen)
        except Exception as exc:
            raise RuntimeError(
                f"oracle evaluation failed at iteration {t}: {exc}"
            ) from exc
        record = BuildRecord(chosen, outcome)
        history.add(record, digest)
        trace.append(TraceEntry(t=t, digest=digest, score=score, built=outcome))
        model = refit_incremental(model, record)

    return RunResult(history=history, trace=tuple(trace), model=model)


def _draw_pool(
    graph: DependencyGraph,
    pool_size: int,
    rng: np.random.Generator,
    history: ObservationHistory,
) -> tuple[np.ndarray, list[str]] | None:
    """Draw a fresh uniform candidate pool, dropping already-seen digests."""
    for _ in range(_POOL_RETRIES):
        rows = np.column_stack(
            [rng.integers(m, size=pool_size) for m in graph.domain_sizes]
        ).astype(np.int64)
        keep_rows: list[Configuration] = []
        keep_digests: list[str] = []
        seen_in_pool: set[str] = set()
        for row in rows:
            cand = tuple(int(v) for v in row)
            digest = config_digest(graph, cand)
            if history.contains_digest(digest) or digest in seen_in_pool:
                continue
            seen_in_pool.add(digest)
            keep_rows.append(cand)
            keep_digests.append(digest)
        if keep_rows:
            return np.asarray(keep_rows, dtype=np.int64), keep_digests
    return None
