"""Finite-difference gradient verification."""

import numpy as np

from ..errors import NumericError


def relative_error(analytic, numeric):
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-8)


def numeric_gradient(loss_fn, param, eps=1e-5):
    """Central differences of ``loss_fn()`` with respect to every entry of ``param``."""
    grad = np.zeros_like(param.data)
    flat = param.data.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        fp = float(loss_fn().data)
        flat[i] = orig - eps
        fm = float(loss_fn().data)
        flat[i] = orig
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NumericError(f"non-finite loss while perturbing entry {i}")
        gflat[i] = (fp - fm) / (2.0 * eps)
    return grad


def grad_check(loss_fn, params, eps=1e-5):
    """Largest relative error between backprop and central differences.

    ``loss_fn`` takes no arguments and returns a scalar tensor built from
    ``params``; it must be deterministic.
    """
    params = list(params)
    for p in params:
        p.zero_grad()
    loss = loss_fn()
    if not np.isfinite(loss.data).all():
        raise NumericError("loss is not finite")
    loss.backward()
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]
    worst = 0.0
    for p, a in zip(params, analytic):
        num = numeric_gradient(loss_fn, p, eps)
        if num.size:
            worst = max(worst, float(relative_error(a, num).max()))
    return worst
