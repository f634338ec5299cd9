"""Oracles and drivers shared between the unit tests and the acceptance
suite. Everything here stays independent of the implementation paths it
checks (brute-force loops, closed-form arithmetic, finite differences)."""

import math

import numpy as np

from fusionnav.models import FUSION_KINDS, FusionNet, desk_config
from fusionnav.nn import mse_loss_backward, mse_loss_forward
from fusionnav.world import (
    CameraModel,
    SimState,
    crossed_goal,
    expert_policy,
    render_rgbd,
    step,
)


def conv2d_reference(x, w, b, stride, pad):
    """Quadruple-loop cross-correlation with scalar accumulation."""
    n, cin, h, wd = x.shape
    cout, _, kh, kw = w.shape
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (wd + 2 * pad - kw) // stride + 1
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    out = np.zeros((n, cout, oh, ow), dtype=x.dtype)
    for ni in range(n):
        for co in range(cout):
            for i in range(oh):
                for j in range(ow):
                    acc = 0.0
                    for ci in range(cin):
                        for u in range(kh):
                            for v in range(kw):
                                acc += xp[ni, ci, i * stride + u, j * stride + v] * w[co, ci, u, v]
                    out[ni, co, i, j] = acc + b[co]
    return out


def reference_metrics(pred, truth):
    """Sort-based median, two-pass variance, plain scalar loops."""
    n = len(pred)
    errs = [p - t for p, t in zip(pred, truth)]
    abs_sorted = sorted(abs(e) for e in errs)
    mae = sum(abs_sorted) / n
    rmse = math.sqrt(sum(e * e for e in errs) / n)
    if n % 2 == 1:
        medae = abs_sorted[n // 2]
    else:
        medae = (abs_sorted[n // 2 - 1] + abs_sorted[n // 2]) / 2.0

    def variance(xs):
        mean = sum(xs) / len(xs)
        return sum((x - mean) ** 2 for x in xs) / len(xs)

    var_truth = variance(list(truth))
    resid = [t - p for p, t in zip(pred, truth)]
    vs = None if var_truth == 0.0 else 1.0 - variance(resid) / var_truth
    return mae, rmse, medae, vs


def directional_probe(loss, tensor, analytic_grad, h=1e-6):
    """Central-difference directional derivative along the analytic gradient
    direction, compared against the gradient norm it implies. Probing along
    the gradient keeps the projection free of cancellation; the small h
    keeps the probe from stepping across a relu kink."""
    flat = tensor.reshape(-1)
    grad_flat = analytic_grad.reshape(-1)
    norm = np.linalg.norm(grad_flat)
    if norm == 0.0:
        return 0.0
    u = grad_flat / norm
    orig = flat.copy()
    flat[:] = orig + h * u
    f_plus = loss()
    flat[:] = orig - h * u
    f_minus = loss()
    flat[:] = orig
    numeric = (f_plus - f_minus) / (2.0 * h)
    analytic = float(grad_flat @ u)
    return abs(analytic - numeric) / max(1e-8, abs(analytic) + abs(numeric))


def full_model_gradcheck(kind):
    """Worst relative directional-derivative error over every parameter
    tensor and both input tensors of a desk-config net (float64, batch 2)."""
    cfg = desk_config(kind)
    net = FusionNet.build(cfg, seed=11, dtype=np.float64)
    local = np.random.default_rng(20 + FUSION_KINDS.index(kind))
    color = local.random((2, cfg.color_channels, cfg.input_h, cfg.input_w))
    depth = local.random((2, cfg.depth_channels, cfg.input_h, cfg.input_w))
    target = local.standard_normal((2, 1))

    def loss():
        return mse_loss_forward(net.forward(color, depth), target)[0]

    net.zero_grads()
    out, cache = net.forward(color, depth, with_cache=True)
    _, lcache = mse_loss_forward(out, target)
    dcolor, ddepth = net.backward(mse_loss_backward(lcache), cache, input_grads=True)

    worst = 0.0
    for name, p in net.params.items():
        worst = max(worst, directional_probe(loss, p.value, p.grad))
    for arr, grad in ((color, dcolor), (depth, ddepth)):
        worst = max(worst, directional_probe(loss, arr, grad))
    return worst


def drive_expert(world, cam=None, spawn=None, max_ticks=600, v=0.1, cadence=0.2):
    """Roll the scripted pilot to termination; returns (outcome, ticks)."""
    cam = cam if cam is not None else CameraModel()
    state = SimState(world=world, pose=spawn if spawn is not None else world.spawn)
    for tick in range(max_ticks):
        frame = render_rgbd(world, state.pose, cam, state.t)
        omega = expert_policy(frame.depth, state.omega_max)
        prev = state.pose
        state = step(state, v, omega, cadence)
        if state.collided:
            return "collision", tick + 1
        if crossed_goal(world, prev.x, prev.y, state.pose.x, state.pose.y):
            return "success", tick + 1
    return "timeout", max_ticks
