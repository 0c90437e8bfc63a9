"""Graph-attention adversarial autoencoder for multivariate time series.

The heavy lifting lives in the compiled extension ``gatgan._core``; this
package re-exports its public surface: dataset helpers, the model and its
configurations, the two-phase trainer, checkpoint persistence, and the
embedding-distance / train-on-synthetic evaluation metrics.
"""

from gatgan._core import (
    VARIANTS,
    CheckpointError,
    ConfigError,
    Embedder,
    EmbedderConfig,
    ForecastConfig,
    Model,
    ModelConfig,
    ParseError,
    TrainingConfig,
    TrainingDiverged,
    __version__,
    apply_variant,
    frechet_distance,
    ftd_score,
    load_embedder,
    load_model,
    load_windows,
    pearson_corr,
    predictive_score,
    save_embedder,
    save_model,
    toy_dataset,
    train,
    train_embedder,
)

__all__ = [
    "VARIANTS",
    "CheckpointError",
    "ConfigError",
    "Embedder",
    "EmbedderConfig",
    "ForecastConfig",
    "Model",
    "ModelConfig",
    "ParseError",
    "TrainingConfig",
    "TrainingDiverged",
    "__version__",
    "apply_variant",
    "frechet_distance",
    "ftd_score",
    "load_embedder",
    "load_model",
    "load_windows",
    "pearson_corr",
    "predictive_score",
    "save_embedder",
    "save_model",
    "toy_dataset",
    "train",
    "train_embedder",
]
