"""Finite-difference oracles shared by the gradient tests."""

import numpy as np

from cryptocae.tensor_engine import mse_loss, relative_error
from cryptocae.tensor_engine.layers import MaxPool1D, ReLU

H = 1e-5


def layer_gradcheck(layer, x, params, rng, train=True, floor=1e-8):
    """Compare analytic vs central-difference gradients of ``sum(g * layer(x))``.

    Returns the worst relative error over the input and every trainable tensor.
    """
    y, cache = layer.forward(x, params, train)
    g = rng.normal(size=y.shape)
    dx, grads = layer.backward(g, cache, params)

    def f():
        return float(np.sum(g * layer.forward(x, params, train)[0]))

    worst = relative_error(dx, _numeric(f, x), floor)
    for key in layer.trainable:
        worst = max(worst, relative_error(grads[key], _numeric(f, params[key]), floor))
    return worst


def _numeric(f, arr):
    out = np.zeros_like(arr)
    flat, oflat = arr.reshape(-1), out.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + H
        fp = f()
        flat[i] = orig - H
        fm = f()
        flat[i] = orig
        oflat[i] = (fp - fm) / (2 * H)
    return out


def _pattern(model, caches):
    """ReLU masks and max-pool argmax indices: the piecewise-linear regime of the net."""
    parts = []
    layers = model.encoder.layers + model.decoder.layers
    for layer, cache in zip(layers, caches):
        if isinstance(layer, ReLU):
            parts.append(cache.ravel())
        elif isinstance(layer, MaxPool1D):
            parts.append(cache[1].ravel())
    return np.concatenate(parts) if parts else np.zeros(0)


def model_gradcheck(model, x, floor=1e-5):
    """Worst relative error of the train-mode reconstruction-loss gradient.

    Coordinates whose +h and -h evaluations fall in different ReLU/max-pool
    regimes are skipped (the loss is not differentiable across them); the
    number skipped is returned alongside the error.
    """
    params = {k: v.copy() for k, v in model.params.items()}
    _, grads, _ = model.loss_and_gradients(x, params, train=True)

    def evaluate():
        out, ec, dc = model.forward(x, params, True)
        return mse_loss(out, x)[0], _pattern(model, ec + dc)

    worst, skipped = 0.0, 0
    for key in model.trainable_keys():
        flat = params[key].reshape(-1)
        analytic = grads[key].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + H
            fp, pp = evaluate()
            flat[i] = orig - H
            fm, pm = evaluate()
            flat[i] = orig
            if not np.array_equal(pp, pm):
                skipped += 1
                continue
            worst = max(worst, relative_error(analytic[i], (fp - fm) / (2 * H), floor))
    return worst, skipped


def random_layer_case(rng):
    """A random (layer, input, params, train) drawn from every trainable-or-not kind.

    Train-mode batch norm gets at least four positions per channel: with two
    positions the normalized output is +/-1 regardless of the input, so the
    true gradient is ~0 and finite differences measure only rounding noise.
    """
    from cryptocae.tensor_engine.layers import (BatchNorm1D, Conv1D, Dense, MaxPool1D, ReLU,
                                                Upsample1D)
    kind = rng.integers(7)
    b, c = int(rng.integers(1, 4)), int(rng.integers(1, 4))
    length = int(rng.integers(2, 10))
    if kind == 0:
        k = int(rng.integers(1, 6))
        layer = Conv1D(k, int(rng.integers(1, 4)), int(rng.integers(1, 3)),
                       str(rng.choice(["same", "valid"])))
        length = max(length, k)
    elif kind == 1:
        layer = MaxPool1D(int(rng.integers(1, 4)))
        length = layer.pool_size * int(rng.integers(1, 5))
    elif kind == 2:
        layer = Upsample1D(int(rng.integers(1, 4)))
    elif kind in (3, 4):
        layer = BatchNorm1D()
        if kind == 3:
            length = max(length, -(-4 // b))
    elif kind == 5:
        layer = ReLU()
    else:
        layer = Dense(int(rng.integers(1, 5)))
    x = rng.normal(size=(b, length, c)) if kind != 6 else rng.normal(size=(b, c))
    params = layer.init((length, c) if kind != 6 else (c,), rng)
    if kind in (3, 4):
        params = {"gain": rng.normal(size=c), "shift": rng.normal(size=c),
                  "running_mean": rng.normal(size=c), "running_var": rng.uniform(0.5, 2, size=c)}
    if kind == 5:
        # keep inputs away from the kink
        x = np.where(np.abs(x) < 1e-3, 0.5, x)
    return layer, x, params, kind != 4


def hand_count(length, channels, blocks, feature_dim, pool=2):
    """Trainable scalars counted directly from the layer formulas."""
    total, ch, ln = 0, channels, length
    for filters, k in blocks:
        total += k * ch * filters + filters      # conv
        total += 2 * filters                     # batch-norm gain and shift
        ch, ln = filters, ln // pool
    flat = ln * ch
    total += flat * feature_dim + feature_dim    # feature layer
    total += feature_dim * flat + flat           # decoder dense
    widths = [channels] + [f for f, _ in blocks]
    for j in range(len(blocks)):
        enc = len(blocks) - 1 - j
        k = blocks[enc][1]
        total += k * widths[enc + 1] * widths[enc] + widths[enc]
        if enc > 0:
            total += 2 * widths[enc]
    return total
