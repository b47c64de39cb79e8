from dar.numerics.gradcheck import grad_check, max_relative_error, numeric_grad, relative_error
from dar.numerics.optim import (
    AdamWHyper,
    LrSchedule,
    OptimizerState,
    adamw_step,
    clip_by_global_norm,
    global_norm,
    lr_at,
)
from dar.numerics.tensor import (
    NonFiniteError,
    Tensor,
    add,
    check_finite,
    concat,
    cross_entropy,
    dropout,
    embedding,
    getitem,
    is_grad_enabled,
    matmul,
    mul,
    neg,
    no_grad,
    reshape,
    rmsnorm,
    rotate_pairs,
    silu,
    softmax,
    sum_all,
    swiglu,
    transpose,
)

__all__ = [
    "AdamWHyper",
    "LrSchedule",
    "NonFiniteError",
    "OptimizerState",
    "Tensor",
    "adamw_step",
    "add",
    "check_finite",
    "clip_by_global_norm",
    "concat",
    "cross_entropy",
    "dropout",
    "embedding",
    "getitem",
    "global_norm",
    "grad_check",
    "is_grad_enabled",
    "lr_at",
    "matmul",
    "max_relative_error",
    "mul",
    "neg",
    "no_grad",
    "numeric_grad",
    "relative_error",
    "reshape",
    "rmsnorm",
    "rotate_pairs",
    "silu",
    "softmax",
    "sum_all",
    "swiglu",
    "transpose",
]
