from .checkpoint import checkpoint_bytes, load_checkpoint, read_checkpoint_header, save_checkpoint
from .graph import (
    ARCHITECTURES,
    ModelGraph,
    build_cnnpred2d,
    build_cnnpred3d,
    build_model,
    build_pca_ann,
    build_shallow_ann,
)
from .train import History, TrainConfig, fit_arrays, model_inputs, new_model, train_model

__all__ = [
    "checkpoint_bytes", "load_checkpoint", "read_checkpoint_header", "save_checkpoint", "ARCHITECTURES",
    "ModelGraph", "build_cnnpred2d", "build_cnnpred3d", "build_model", "build_pca_ann",
    "build_shallow_ann", "History", "TrainConfig", "fit_arrays", "model_inputs",
    "new_model", "train_model",
]
