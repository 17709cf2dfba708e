from .adjacency import NormalizedAdjacency, build_normalized_adjacency
from .checkpoint import load_checkpoint, save_checkpoint
from .layers import GATConv, GCNConv, GINConv, Linear, PReLU
from .model import MODEL_KINDS, GnnModel, ModelConfig

__all__ = [
    "GATConv",
    "GCNConv",
    "GINConv",
    "GnnModel",
    "Linear",
    "MODEL_KINDS",
    "ModelConfig",
    "NormalizedAdjacency",
    "PReLU",
    "build_normalized_adjacency",
    "load_checkpoint",
    "save_checkpoint",
]
