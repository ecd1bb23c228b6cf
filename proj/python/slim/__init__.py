"""Structural landmarking and interaction modelling for graph classification."""

from ._slim import (
    MODEL_FORMAT_VERSION,
    ConfigError,
    Dataset,
    Error,
    Graph,
    IoError,
    Model,
    NumericError,
    ParseError,
    RangeError,
    ShapeError,
    TrainConfig,
    build_substructures,
    cluster_loss,
    cooccurrence_loss,
    cross_validate,
    floor_root,
    gradcheck,
    hop_distances,
    init_landmarks,
    load_model,
    load_tu_dataset,
    lower_bound,
    make_folds,
    mutual_coherence,
    one_hot_features,
    pool,
    recovery_support_bound,
    soft_assign,
    target_distribution,
    train,
    unit_ball_volume,
    write_tu_dataset,
)

__all__ = [name for name in dir() if not name.startswith("_")]
