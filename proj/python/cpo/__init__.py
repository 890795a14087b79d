"""Causal preference optimization of tabular sequence policies from direct outcome data.

The compiled core exposes the text space, exact autoregressive policies, the
randomized-experiment simulator, ridge outcome models, the IPW / outcome-only /
doubly robust value estimators, the CPO / DR-CPO / OO-RLHF trainers, and the
oracle-judged evaluation helpers.
"""

from ._core import (
    AlreadyObservational,
    ConfounderSpec,
    EnumerationTooLarge,
    ImpactResult,
    LabeledDataset,
    NonFiniteWeight,
    Objective,
    OutcomeModel,
    Policy,
    Population,
    Provenance,
    ProvenanceKind,
    Sample,
    SingularDesign,
    TraceRow,
    TrainConfig,
    ValueEstimate,
    Vocab,
    WeightOptions,
    WinRateResult,
    ZeroSupport,
    confound,
    confounding_impact,
    enumerate_texts,
    feature_dim,
    featurize,
    fit_outcome_model,
    load_dataset,
    load_outcome_model,
    load_policy,
    mle_fit,
    objective_gradient,
    potential_outcome,
    run_experiment,
    save_dataset,
    save_outcome_model,
    save_policy,
    stabilize,
    train,
    true_value,
    v_dr,
    v_ipw,
    v_out,
    win_rate,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
