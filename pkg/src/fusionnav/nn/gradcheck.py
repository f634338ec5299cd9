"""Finite-difference gradient oracles.

These stay deliberately independent of the analytic backward passes they
check: they only ever call a scalar-valued function f and difference it.
Use float64 inputs; float32 cannot reach the tolerances that make the
checks meaningful.
"""

import numpy as np


def finite_diff_grad(f, x, h=1e-5):
    """Full central-difference gradient of scalar f at x, element by element."""
    x = np.asarray(x)
    grad = np.zeros_like(x, dtype=np.float64)
    flat = x.reshape(-1)
    grad_flat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        f_plus = f(x)
        flat[i] = orig - h
        f_minus = f(x)
        flat[i] = orig
        grad_flat[i] = (f_plus - f_minus) / (2.0 * h)
    return grad


def finite_diff_grad_at(f, x, indices, h=1e-5):
    """Central differences of scalar f at a subset of flat indices of x.

    Returns a dict {flat_index: derivative}; used for spot-checking large
    parameter tensors where the full sweep is too expensive.
    """
    x = np.asarray(x)
    flat = x.reshape(-1)
    out = {}
    for i in indices:
        orig = flat[i]
        flat[i] = orig + h
        f_plus = f(x)
        flat[i] = orig - h
        f_minus = f(x)
        flat[i] = orig
        out[int(i)] = (f_plus - f_minus) / (2.0 * h)
    return out


def rel_error(a, b, floor=1e-8):
    """Elementwise max relative error, |a-b| / max(floor, |a|+|b|)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(floor, np.abs(a) + np.abs(b))
    return float(np.max(np.abs(a - b) / denom)) if a.size else 0.0
