"""Adam optimizer."""

import numpy as np

from ..errors import DimensionError


def adam_step(param, grad, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
    """Apply one bias-corrected Adam update to ``param`` in place."""
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != param.data.shape:
        raise DimensionError(f"gradient shape {grad.shape} does not match parameter {param.data.shape}")
    param.step += 1
    t = param.step
    param.adam_m *= beta1
    param.adam_m += (1.0 - beta1) * grad
    param.adam_v *= beta2
    param.adam_v += (1.0 - beta2) * grad * grad
    m_hat = param.adam_m / (1.0 - beta1 ** t)
    v_hat = param.adam_v / (1.0 - beta2 ** t)
    param.data -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return param


class Adam:
    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def step(self):
        for p in self.params:
            grad = p.grad if p.grad is not None else np.zeros_like(p.data)
            adam_step(p, grad, self.lr, self.beta1, self.beta2, self.eps)
