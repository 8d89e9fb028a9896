"""Neural similarity model: encoder, adaptive pooling and cross-graph matching."""

from .model import CoSimModel, ModelConfig, load_checkpoint, save_checkpoint

__all__ = ["CoSimModel", "ModelConfig", "load_checkpoint", "save_checkpoint"]
