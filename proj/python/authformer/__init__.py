"""Multimodal biometric transformer with a small autodiff core."""

from ._authformer import (
    Dataset,
    Model,
    ablation_combinations,
    classification_metrics,
    compute_eer,
    generate_synthetic,
    layer_norm,
    load_dataset,
    plan_route,
    run_gradcheck,
    save_dataset,
    softmax,
    train,
)

__all__ = [
    "Dataset",
    "Model",
    "ablation_combinations",
    "classification_metrics",
    "compute_eer",
    "generate_synthetic",
    "layer_norm",
    "load_dataset",
    "plan_route",
    "run_gradcheck",
    "save_dataset",
    "softmax",
    "train",
]
