"""Central finite-difference gradient checking."""

from __future__ import annotations

import numpy as np


def numerical_gradient(f, x, h=1e-5):
    """Central differences of scalar ``f`` w.r.t. every entry of ``x`` (perturbed in place)."""
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f()
        flat[i] = orig - h
        fm = f()
        flat[i] = orig
        gflat[i] = (fp - fm) / (2 * h)
    return grad


def relative_error(analytic, numeric, floor=1e-8):
    """Largest elementwise ``|a - n| / max(|a|, |n|, floor)``.

    ``floor`` keeps entries that are zero in both routes from dividing by zero;
    set it relative to the gradient scale when comparing tiny gradients.
    """
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    if analytic.size == 0:
        return 0.0
    return float(np.max(np.abs(analytic - numeric) / denom))
