"""Minimal reverse-mode differentiation core used by the models."""

from . import kernels
from .functional import (
    conv1d_maxpool,
    conv1d_maxpool_batch,
    dropout,
    glorot_uniform,
    gru_step,
    lstm_step,
    softmax,
    softmax_xent,
    softmax_xent_batch,
)
from .gradcheck import grad_check, numeric_gradient, relative_error
from .nn import Dense, Embedding, GRUCell, LSTMCell, Module, run_cell
from .optim import Adam, adam_step
from .rng import SeededRng
from .tensor import (
    Parameter,
    Tensor,
    add,
    concat,
    masked_max,
    matmul,
    mean,
    mul,
    relu,
    reshape,
    sigmoid,
    stack,
    tanh,
    tensor_sum,
    where,
)

__all__ = [
    "Adam",
    "Dense",
    "Embedding",
    "GRUCell",
    "LSTMCell",
    "Module",
    "Parameter",
    "SeededRng",
    "Tensor",
    "adam_step",
    "add",
    "concat",
    "conv1d_maxpool",
    "conv1d_maxpool_batch",
    "dropout",
    "glorot_uniform",
    "grad_check",
    "gru_step",
    "kernels",
    "lstm_step",
    "masked_max",
    "matmul",
    "mean",
    "mul",
    "numeric_gradient",
    "relative_error",
    "relu",
    "reshape",
    "run_cell",
    "sigmoid",
    "softmax",
    "softmax_xent",
    "softmax_xent_batch",
    "stack",
    "tanh",
    "tensor_sum",
    "where",
]
