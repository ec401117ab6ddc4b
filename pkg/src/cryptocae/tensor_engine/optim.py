"""Nadam: Adam with a Nesterov-corrected first moment (Dozat, 2016)."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import ConfigurationError, DivergenceError, ShapeError


@dataclass(frozen=True)
class NadamState:
    """Optimizer state.

    ``mu_product`` is the running product of the momentum schedule
    ``mu_t = beta1 * (1 - 0.5 * 0.96 ** (t * momentum_decay))`` over the
    steps taken so far.
    """

    learning_rate: float = 2e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    momentum_decay: float = 0.004
    step: int = 0
    mu_product: float = 1.0
    first_moment: dict = field(default_factory=dict)
    second_moment: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ConfigurationError("beta1 and beta2 must lie in (0, 1)")
        if min(self.learning_rate, self.epsilon) <= 0:
            raise ConfigurationError("learning_rate and epsilon must be positive")
        if self.step < 0:
            raise ConfigurationError("step must be >= 0")

    def mu(self, t):
        return self.beta1 * (1.0 - 0.5 * 0.96 ** (t * self.momentum_decay))

    def hyperparameters(self):
        return {"learning_rate": self.learning_rate, "beta1": self.beta1, "beta2": self.beta2,
                "epsilon": self.epsilon, "momentum_decay": self.momentum_decay}


def nadam_step(params, grads, state: NadamState):
    """Apply one Nadam update to every key in ``grads``.

    Returns ``(new_params, new_state)``; the inputs are left untouched.
    Keys of ``params`` absent from ``grads`` (e.g. batch-norm running
    statistics) are carried over unchanged.
    """
    t = state.step + 1
    mu_t = state.mu(t)
    mu_next = state.mu(t + 1)
    mu_prod = state.mu_product * mu_t
    mu_prod_next = mu_prod * mu_next
    bias2 = 1.0 - state.beta2 ** t

    new_params = dict(params)
    m_new, v_new = {}, {}
    for key, g in grads.items():
        p = params[key]
        if g.shape != p.shape:
            raise ShapeError(f"gradient for {key} has shape {g.shape}, parameter {p.shape}")
        if not np.all(np.isfinite(g)):
            raise DivergenceError(f"non-finite gradient for {key} at step {t}")
        m = state.first_moment.get(key)
        v = state.second_moment.get(key)
        if m is None:
            m = np.zeros_like(p)
            v = np.zeros_like(p)
        m = mu_t * m + (1.0 - mu_t) * g
        v = state.beta2 * v + (1.0 - state.beta2) * g * g
        m_bar = (1.0 - mu_t) * g / (1.0 - mu_prod) + mu_next * m / (1.0 - mu_prod_next)
        v_hat = v / bias2
        new_params[key] = p - state.learning_rate * m_bar / (np.sqrt(v_hat) + state.epsilon)
        m_new[key] = m
        v_new[key] = v
    new_state = replace(state, step=t, mu_product=mu_prod,
                        first_moment={**state.first_moment, **m_new},
                        second_moment={**state.second_moment, **v_new})
    return new_params, new_state

