"""Adaptive-moment gradient descent over named numpy parameter dicts."""

import numpy as np


class Adam:
    """Standard Adam: beta1=0.9, beta2=0.999, eps=1e-8.

    lr_scales optionally multiplies the learning rate per parameter name
    (e.g. to update convolution weights slower than the head); weight_decay
    is decoupled (applied to the parameter, not the gradient).
    """

    def __init__(self, params, learning_rate, beta1=0.9, beta2=0.999, eps=1e-8,
                 lr_scales=None, weight_decay=0.0, decay_names=()):
        self.params = params
        self.lr = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.lr_scales = lr_scales or {}
        self.weight_decay = weight_decay
        self.decay_names = set(decay_names)
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, grads):
        """Apply one update from a name->gradient dict (missing keys skip)."""
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for name, g in grads.items():
            if g is None:
                continue
            lr = self.lr * self.lr_scales.get(name, 1.0)
            if self.weight_decay and name in self.decay_names:
                self.params[name] = self.params[name] * (1.0 - lr * self.weight_decay)
            m = self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * g
            v = self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * (g * g)
            # np.asarray keeps 0-d params as arrays (numpy ops would scalarize)
            self.params[name] = np.asarray(
                self.params[name] - lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            )
        return self.params
