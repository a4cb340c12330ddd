from .tensor import Function, Tensor, as_tensor, backward, concat, matmul, no_grad, set_debug, stack
from .functional import (
    conv1d,
    dense,
    embedding_lookup,
    global_max_pool,
    softmax,
    softmax_cross_entropy,
    spatial_dropout_1d,
)
from .recurrent import gru_cell_step, gru_sequence, lstm_cell_step, lstm_sequence
from .gradcheck import finite_diff_check, numerical_gradient

__all__ = [
    "Function", "Tensor", "as_tensor", "backward", "concat", "matmul", "no_grad", "set_debug", "stack",
    "conv1d", "dense", "embedding_lookup", "global_max_pool", "softmax",
    "softmax_cross_entropy", "spatial_dropout_1d",
    "gru_cell_step", "gru_sequence", "lstm_cell_step", "lstm_sequence",
    "finite_diff_check", "numerical_gradient",
]
