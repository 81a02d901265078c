"""Autotuning toolkit for package build configurations.

Models build outcomes over a dependency graph with factorized good/bad
densities, adaptively samples configurations likely to build, analyzes
which packages and version pairs drive failure, and simulates build
campaigns over deduplicated dependency DAGs.
"""
from .analysis import (
    CompatibilityMatrix,
    ForbiddenPair,
    ImportanceEntry,
    extract_constraints,
    importance_ranking,
    js_divergence,
    pair_compatibility,
)
from .buildsim import (
    BuildDag,
    BuildUnit,
    NodeStatus,
    PlantedRuleSet,
    SimReport,
    SyntheticOracle,
    build_dag,
    generate_benchmark,
    simulate,
    synthetic_oracle,
)
from .configspace import (
    Configuration,
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
from .dataset import (
    BuildRecord,
    Dataset,
    DatasetError,
    DatasetOracle,
    DatasetSummary,
    load_dataset,
    save_dataset,
    split_train_test,
    summarize,
)
from .metrics import (
    ExperimentReport,
    auprc,
    auprc_experiment,
    precision,
    recall,
    sweep_experiment,
)
from .rng import derive_seed, substream
from .sampler import (
    STRATEGIES,
    BuildOracle,
    NoCandidatesError,
    ObservationHistory,
    RunResult,
    SamplerConfig,
    bootstrap,
    run,
    select_next,
)
from .surrogate import (
    FactorModel,
    FactorTable,
    Score,
    crowd_score,
    crowd_score_many,
    ei_from_ratio,
    expected_improvement,
    expected_improvement_many,
    fit,
    load_model,
    log_density,
    log_density_many,
    refit_incremental,
    save_model,
)

__version__ = "0.1.0"
