from .module import Module, Parameter
from .layers import (
    GRU,
    LSTM,
    Bidirectional,
    Conv1D,
    Dense,
    Embedding,
    GlobalMaxPool1D,
    SpatialDropout1D,
    glorot_uniform,
)

__all__ = [
    "Module", "Parameter", "GRU", "LSTM", "Bidirectional", "Conv1D", "Dense", "Embedding",
    "GlobalMaxPool1D", "SpatialDropout1D", "glorot_uniform",
]
