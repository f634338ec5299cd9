"""Dense compute kernels with explicit backward passes.

Every kernel comes as a (forward, backward) pair: forward returns
(output, cache), backward consumes the upstream gradient plus the cache and
returns gradients for each input. Kernels are pure functions of their
arguments and preserve the input dtype (float32 for training, float64 for
gradient checking); repeated calls on identical inputs are bitwise
reproducible.
"""

import numpy as np


class ShapeError(ValueError):
    """Raised when operand shapes are inconsistent with the kernel contract."""


def conv_output_size(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - kernel) // stride + 1


def _im2col(x_padded_nhwc, kh, kw, stride, out_h, out_w):
    """Gather sliding windows of a channels-last image into rows ordered
    (kh, kw, channel); channels-last keeps the gather nearly contiguous."""
    n = x_padded_nhwc.shape[0]
    c = x_padded_nhwc.shape[3]
    windows = np.lib.stride_tricks.sliding_window_view(
        x_padded_nhwc, (kh, kw), axis=(1, 2)
    )[:, ::stride, ::stride]  # [N, out_h, out_w, C, kh, kw]
    cols = windows.transpose(0, 1, 2, 4, 5, 3).reshape(n * out_h * out_w, kh * kw * c)
    return np.ascontiguousarray(cols)


def conv2d_forward(x, weight, bias, stride=1, padding=0):
    """2D cross-correlation with zero padding.

    x: [N, Cin, H, W]; weight: [Cout, Cin, kH, kW]; bias: [Cout].
    Returns out [N, Cout, H', W'] with H' = (H + 2*padding - kH)//stride + 1.
    """
    if x.ndim != 4 or weight.ndim != 4:
        raise ShapeError(f"conv2d expects 4-d input/kernel, got {x.shape} and {weight.shape}")
    n, c_in, h, w = x.shape
    c_out, c_in_k, kh, kw = weight.shape
    if c_in != c_in_k:
        raise ShapeError(f"input has {c_in} channels but kernel expects {c_in_k}")
    if bias.shape != (c_out,):
        raise ShapeError(f"bias shape {bias.shape} does not match {c_out} output channels")
    if stride < 1 or padding < 0:
        raise ShapeError(f"invalid stride/padding ({stride}, {padding})")
    out_h = conv_output_size(h, kh, stride, padding)
    out_w = conv_output_size(w, kw, stride, padding)
    if out_h < 1 or out_w < 1:
        raise ShapeError(
            f"kernel {kh}x{kw} stride {stride} pad {padding} leaves no output "
            f"for input {h}x{w}"
        )
    x_nhwc = np.ascontiguousarray(x.transpose(0, 2, 3, 1))
    if padding > 0:
        x_nhwc = np.pad(x_nhwc, ((0, 0), (padding, padding), (padding, padding), (0, 0)))
    cols = _im2col(x_nhwc, kh, kw, stride, out_h, out_w)
    w_flat = np.ascontiguousarray(weight.transpose(0, 2, 3, 1)).reshape(c_out, -1)
    out = cols @ w_flat.T + bias
    out = np.ascontiguousarray(
        out.reshape(n, out_h, out_w, c_out).transpose(0, 3, 1, 2)
    )
    cache = (cols, w_flat, x.shape, weight.shape, stride, padding, out_h, out_w)
    return out, cache


def conv2d_backward(dout, cache, need_dx=True):
    """Gradients of conv2d_forward w.r.t. input, kernel, and bias; pass
    need_dx=False to skip the input gradient (first layers of a net)."""
    cols, w_flat, x_shape, w_shape, stride, padding, out_h, out_w = cache
    n, c_in, h, w = x_shape
    c_out, _, kh, kw = w_shape
    dflat = np.ascontiguousarray(dout.transpose(0, 2, 3, 1).reshape(-1, c_out))
    dbias = dout.sum(axis=(0, 2, 3))
    # dw rows come back in (kh, kw, c) order; restore [Cout, Cin, kH, kW]
    dweight = np.ascontiguousarray(
        (dflat.T @ cols).reshape(c_out, kh, kw, c_in).transpose(0, 3, 1, 2)
    )
    if not need_dx:
        return None, dweight, dbias
    dcols = (dflat @ w_flat).reshape(n, out_h, out_w, kh, kw, c_in)
    dx_nhwc = np.zeros((n, h + 2 * padding, w + 2 * padding, c_in), dtype=dout.dtype)
    # scatter-add each kernel offset back onto the (strided) input positions
    for u in range(kh):
        for v in range(kw):
            dx_nhwc[:, u : u + stride * out_h : stride, v : v + stride * out_w : stride, :] += (
                dcols[:, :, :, u, v, :]
            )
    if padding > 0:
        dx_nhwc = dx_nhwc[:, padding:-padding, padding:-padding, :]
    return np.ascontiguousarray(dx_nhwc.transpose(0, 3, 1, 2)), dweight, dbias


def maxpool2_forward(x):
    """2x2 max pooling with stride 2; H and W must be even."""
    if x.ndim != 4:
        raise ShapeError(f"maxpool2 expects 4-d input, got {x.shape}")
    n, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ShapeError(f"maxpool2 needs even spatial dims, got {h}x{w}")
    quads = (
        x[:, :, 0::2, 0::2],
        x[:, :, 0::2, 1::2],
        x[:, :, 1::2, 0::2],
        x[:, :, 1::2, 1::2],
    )
    out = np.maximum(np.maximum(quads[0], quads[1]), np.maximum(quads[2], quads[3]))
    cache = (x.shape, quads, out)
    return out, cache


def maxpool2_backward(dout, cache):
    """Routes gradient to the window argmax; ties go to the first element in
    row-major window order."""
    x_shape, quads, out = cache
    dx = np.zeros(x_shape, dtype=dout.dtype)
    taken = np.zeros(out.shape, dtype=bool)
    views = (
        dx[:, :, 0::2, 0::2],
        dx[:, :, 0::2, 1::2],
        dx[:, :, 1::2, 0::2],
        dx[:, :, 1::2, 1::2],
    )
    for quad, view in zip(quads, views):
        mask = (quad == out) & ~taken
        view += dout * mask
        taken |= mask
    return dx


def linear_forward(x, weight, bias):
    """Affine map: out = x @ weight + bias, x [N, F], weight [F, G]."""
    if x.ndim != 2 or weight.ndim != 2 or x.shape[1] != weight.shape[0]:
        raise ShapeError(f"linear got x {x.shape} and weight {weight.shape}")
    if bias.shape != (weight.shape[1],):
        raise ShapeError(f"bias shape {bias.shape} does not match width {weight.shape[1]}")
    if weight.shape[1] <= 4:
        # matmul kernels for 1-2 column outputs pick a different accumulation
        # depending on the row count; an explicit per-row reduction keeps each
        # output row independent of the batch it sits in
        out = (x[:, :, None] * weight[None, :, :]).sum(axis=1) + bias
    else:
        out = x @ weight + bias
    return out, (x, weight)


def linear_backward(dout, cache):
    x, weight = cache
    dx = dout @ weight.T
    dweight = x.T @ dout
    dbias = dout.sum(axis=0)
    return dx, dweight, dbias


def relu_forward(x):
    out = np.maximum(x, 0)
    return out, (x > 0)


def relu_backward(dout, cache):
    # gradient is 0 at exactly 0 (the mask is strict)
    return dout * cache


def concat_forward(a, b):
    """Row-wise concatenation [N, F1] ++ [N, F2] -> [N, F1+F2]."""
    if a.ndim != 2 or b.ndim != 2 or a.shape[0] != b.shape[0]:
        raise ShapeError(f"concat needs matching batch dims, got {a.shape} and {b.shape}")
    out = np.concatenate([a, b], axis=1)
    return out, (a.shape[1], b.shape[1])


def concat_backward(dout, cache):
    f1, _ = cache
    return np.ascontiguousarray(dout[:, :f1]), np.ascontiguousarray(dout[:, f1:])


def softmax_forward(x):
    """Row-wise softmax, stabilized by subtracting each row's max."""
    if x.ndim != 2 or x.shape[1] < 1:
        raise ShapeError(f"softmax expects [N, K>=1], got {x.shape}")
    shifted = x - x.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    out = exp / exp.sum(axis=1, keepdims=True)
    return out, out


def softmax_backward(dout, cache):
    s = cache
    return (dout - (dout * s).sum(axis=1, keepdims=True)) * s


def mse_loss_forward(pred, target):
    """Mean squared error over all elements of pred [N, 1]."""
    if pred.shape != target.shape:
        raise ShapeError(f"pred {pred.shape} and target {target.shape} differ")
    if pred.shape[0] < 1:
        raise ShapeError("mse_loss needs at least one row")
    diff = pred - target
    loss = float(np.mean(diff * diff))
    return loss, diff


def mse_loss_backward(cache, upstream=1.0):
    diff = cache
    return (2.0 * upstream / diff.size) * diff
