"""Shared finite-difference harness for gradient verification."""

import numpy as np


def fd_grad(loss_fn, weights, name, step=1e-5):
    """Central finite differences of loss_fn over one named weight tensor."""
    base = weights.get(name)
    grad = np.zeros_like(base)
    flat = base.reshape(-1)
    for idx in range(flat.size):
        bumped = flat.copy()
        bumped[idx] = flat[idx] + step
        hi = loss_fn(weights.with_tensor(name, bumped.reshape(base.shape)))
        bumped[idx] = flat[idx] - step
        lo = loss_fn(weights.with_tensor(name, bumped.reshape(base.shape)))
        grad.reshape(-1)[idx] = (hi - lo) / (2.0 * step)
    return grad


def max_rel_err(analytic, numeric, floor=1e-4):
    """Worst relative disagreement; tiny gradients compare absolutely
    against the floor so finite-difference noise cannot dominate."""
    a = np.asarray(analytic).reshape(-1)
    n = np.asarray(numeric).reshape(-1)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    return float((np.abs(a - n) / denom).max())
