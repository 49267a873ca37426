"""Pure-numpy convolution + max-over-time kernels.

Reference implementation and fallback for the compiled ``_conv_cy``
extension. Each window position is a separate ``(N, w*d) @ (w*d, F)``
product, so the rows multiplied by BLAS never depend on how much padding
follows a sequence.
"""

import numpy as np


def conv_maxpool_forward(x, lengths, filters, bias):
    """Return ``(out, argmax)`` for a padded batch.

    x        (N, Lp, d) float64, Lp >= w, rows past ``lengths[n]`` are zero
    lengths  (N,) int64, true lengths (>= 1)
    filters  (F, w, d)
    bias     (F,)

    ``out[n, f]`` is relu of the best window score; ``argmax[n, f]`` is the
    position of that window (first one on ties).
    """
    n, lp, d = x.shape
    nf, w, _ = filters.shape
    wmat = filters.reshape(nf, w * d).T
    valid = np.maximum(lengths, w) - w + 1
    best = np.full((n, nf), -np.inf)
    arg = np.zeros((n, nf), dtype=np.int64)
    for p in range(int(valid.max())):
        score = x[:, p:p + w, :].reshape(n, w * d) @ wmat + bias
        better = (score > best) & (p < valid)[:, None]
        best = np.where(better, score, best)
        arg[better] = p
    return np.maximum(best, 0.0), arg


def conv_maxpool_backward(grad, x, filters, out, argmax):
    """Gradients ``(dx, dfilters, dbias)`` for :func:`conv_maxpool_forward`."""
    n, lp, d = x.shape
    nf, w, _ = filters.shape
    g = np.where(out > 0, grad, 0.0)
    dbias = g.sum(axis=0)
    dfilters = np.zeros_like(filters)
    dx = np.zeros_like(x)
    rows = np.arange(n)[:, None]
    for j in range(w):
        pos = argmax + j
        xj = x[rows, pos]                       # (N, F, d)
        dfilters[:, j, :] = np.einsum("nf,nfd->fd", g, xj)
        np.add.at(dx, (np.broadcast_to(rows, pos.shape), pos), g[:, :, None] * filters[None, :, j, :])
    return dx, dfilters, dbias
