from fusionnav.nn.gradcheck import finite_diff_grad, finite_diff_grad_at, rel_error
from fusionnav.nn.ops import (
    ShapeError,
    concat_backward,
    concat_forward,
    conv2d_backward,
    conv2d_forward,
    conv_output_size,
    linear_backward,
    linear_forward,
    maxpool2_backward,
    maxpool2_forward,
    mse_loss_backward,
    mse_loss_forward,
    relu_backward,
    relu_forward,
    softmax_backward,
    softmax_forward,
)
from fusionnav.nn.optim import ParamState, adam_step

__all__ = [
    "ShapeError",
    "ParamState",
    "adam_step",
    "concat_backward",
    "concat_forward",
    "conv2d_backward",
    "conv2d_forward",
    "conv_output_size",
    "finite_diff_grad",
    "finite_diff_grad_at",
    "linear_backward",
    "linear_forward",
    "maxpool2_backward",
    "maxpool2_forward",
    "mse_loss_backward",
    "mse_loss_forward",
    "rel_error",
    "relu_backward",
    "relu_forward",
    "softmax_backward",
    "softmax_forward",
]
