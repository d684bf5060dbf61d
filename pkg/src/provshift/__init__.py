"""provshift: robustness of text classifiers to confounding by provenance.

Build train/test splits with controlled provenance-conditional label
shift, train unadjusted and backdoor-adjusted logistic regression models,
and report AUPRC degradation slopes across shift magnitudes.
"""

from .corpus import (
    BinaryUnigramVectorizer,
    Corpus,
    EmbeddingTable,
    FeatureSpace,
    Record,
    attach_embeddings,
    build_vocabulary,
    featurize_unigram,
    load_corpus,
    load_embedding_table,
    tokenize,
    write_corpus,
    write_embedding_table,
)
from .metrics import PRPoint, SlopeFit, auprc, fit_slope, pr_curve
from .model import (
    BackdoorLogisticRegression,
    FittedLR,
    LRConfig,
    estimate_pz,
    fit_lr,
    objective,
)
from .sampler import (
    CellPlan,
    ShiftSetting,
    check_feasibility,
    derive_rates,
    draw_split,
    plan_cells,
    solve_test_rates,
)
from .synth import SynthConfig, generate_corpus, oracle_score
from .runner import (
    SweepSpec,
    aggregate_report,
    enumerate_settings,
    load_sweep_spec,
    run_sweep,
)

__version__ = "0.1.0"

__all__ = [
    "BackdoorLogisticRegression",
    "BinaryUnigramVectorizer",
    "CellPlan",
    "Corpus",
    "EmbeddingTable",
    "FeatureSpace",
    "FittedLR",
    "LRConfig",
    "PRPoint",
    "Record",
    "ShiftSetting",
    "SlopeFit",
    "SweepSpec",
    "SynthConfig",
    "aggregate_report",
    "attach_embeddings",
    "auprc",
    "build_vocabulary",
    "check_feasibility",
    "derive_rates",
    "draw_split",
    "enumerate_settings",
    "estimate_pz",
    "featurize_unigram",
    "fit_lr",
    "fit_slope",
    "generate_corpus",
    "load_corpus",
    "load_embedding_table",
    "load_sweep_spec",
    "objective",
    "oracle_score",
    "plan_cells",
    "pr_curve",
    "run_sweep",
    "solve_test_rates",
    "tokenize",
    "write_corpus",
    "write_embedding_table",
]
