"""
AdamW: Adam with bias correction and decoupled weight decay.

    m <- b1 m + (1 - b1) g
    v <- b2 v + (1 - b2) g^2
    p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + wd * p)

Decay is applied to every parameter, biases included. lr = 0 leaves parameters untouched.
"""

from dataclasses import dataclass, field

import numpy as np

from errors import ConfigError, NumericError


@dataclass
class AdamW:
    lr:           float = 1e-3
    betas:        tuple[float, float] = (0.9, 0.999)
    eps:          float = 1e-8
    weight_decay: float = 0.01
    step_count:   int = 0
    m:            dict = field(default_factory=dict, repr=False)
    v:            dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.lr < 0 or self.weight_decay < 0 or self.eps <= 0:
            raise ConfigError("lr and weight_decay must be >= 0, eps > 0")
        b1, b2 = self.betas
        if not (0.0 <= b1 < 1.0 and 0.0 <= b2 < 1.0):
            raise ConfigError(f"betas must lie in [0, 1), got {self.betas}")

    def step(self, params: dict, grads: dict):
        """Update params in place."""
        b1, b2 = self.betas
        self.step_count += 1
        t = self.step_count
        for name, g in grads.items():
            if not np.all(np.isfinite(g)):
                raise NumericError(f"non-finite gradient for {name}")
            if name not in self.m:
                self.m[name] = np.zeros_like(g)
                self.v[name] = np.zeros_like(g)
            self.m[name] = b1 * self.m[name] + (1.0 - b1) * g
            self.v[name] = b2 * self.v[name] + (1.0 - b2) * g * g
            if self.lr == 0.0:
                continue
            m_hat = self.m[name] / (1.0 - b1 ** t)
            v_hat = self.v[name] / (1.0 - b2 ** t)
            p = params[name]
            params[name] = p - self.lr * (m_hat / (np.sqrt(v_hat) + self.eps) + self.weight_decay * p)
