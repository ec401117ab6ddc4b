"""Layer specifications and the sequential stack that runs them."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import ConfigurationError, ShapeError
from . import ops


class Layer:
    """Base for layer specs.

    Subclasses are frozen dataclasses; parameters live outside the spec in a
    ``{name: array}`` dict so the same spec can be evaluated with perturbed
    parameters (gradient checks) or swapped-in checkpoints.
    """

    trainable: tuple[str, ...] = ()
    state: tuple[str, ...] = ()
    counted = False  # contributes to the conv/pool/upscale layer count

    def output_shape(self, in_shape):
        return in_shape

    def init(self, in_shape, rng):
        return {}

    def forward(self, x, params, train):
        raise NotImplementedError

    def backward(self, dout, cache, params):
        raise NotImplementedError

    def to_dict(self):
        return {"kind": type(self).__name__, **asdict(self)}


@dataclass(frozen=True)
class Conv1D(Layer):
    kernel_size: int = 3
    filters: int = 1
    stride: int = 1
    padding: str = "same"

    trainable = ("weight", "bias")
    counted = True

    def __post_init__(self):
        if min(self.kernel_size, self.filters, self.stride) < 1:
            raise ConfigurationError("kernel_size, filters and stride must be >= 1")
        if self.padding not in ("same", "valid"):
            raise ConfigurationError(f"unknown padding mode {self.padding!r}")

    def output_shape(self, in_shape):
        length, _ = in_shape
        if self.padding == "same":
            out = -(-length // self.stride)
        else:
            out = (length - self.kernel_size) // self.stride + 1
        return (out, self.filters)

    def init(self, in_shape, rng):
        fan_in = self.kernel_size * in_shape[1]
        return {
            "weight": rng.normal(0.0, math.sqrt(2.0 / fan_in),
                                 size=(self.kernel_size, in_shape[1], self.filters)),
            "bias": np.zeros(self.filters),
        }

    def forward(self, x, params, train):
        return ops.conv1d(x, params["weight"], params["bias"], self.stride, self.padding)

    def backward(self, dout, cache, params):
        dx, dw, db = ops.conv1d_backward(dout, cache)
        return dx, {"weight": dw, "bias": db}


@dataclass(frozen=True)
class MaxPool1D(Layer):
    pool_size: int = 2

    counted = True

    def __post_init__(self):
        if self.pool_size < 1:
            raise ConfigurationError("pool_size must be >= 1")

    def output_shape(self, in_shape):
        length, ch = in_shape
        if length % self.pool_size:
            raise ShapeError(f"length {length} not divisible by pool size {self.pool_size}")
        return (length // self.pool_size, ch)

    def forward(self, x, params, train):
        return ops.maxpool1d(x, self.pool_size)

    def backward(self, dout, cache, params):
        return ops.maxpool1d_backward(dout, cache), {}


@dataclass(frozen=True)
class Upsample1D(Layer):
    factor: int = 2

    counted = True

    def __post_init__(self):
        if self.factor < 1:
            raise ConfigurationError("factor must be >= 1")

    def output_shape(self, in_shape):
        return (in_shape[0] * self.factor, in_shape[1])

    def forward(self, x, params, train):
        return ops.upsample1d(x, self.factor)

    def backward(self, dout, cache, params):
        return ops.upsample1d_backward(dout, cache), {}


@dataclass(frozen=True)
class BatchNorm1D(Layer):
    epsilon: float = 1e-5
    momentum: float = 0.9

    trainable = ("gain", "shift")
    state = ("running_mean", "running_var")

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ConfigurationError("epsilon must be positive")
        if not 0 < self.momentum < 1:
            raise ConfigurationError("momentum must be in (0, 1)")

    def init(self, in_shape, rng):
        ch = in_shape[-1]
        return {"gain": np.ones(ch), "shift": np.zeros(ch),
                "running_mean": np.zeros(ch), "running_var": np.ones(ch)}

    def forward(self, x, params, train):
        return ops.batchnorm1d(x, params["gain"], params["shift"], params["running_mean"],
                               params["running_var"], self.epsilon, train)

    def backward(self, dout, cache, params):
        dx, dgain, dshift = ops.batchnorm1d_backward(dout, cache)
        return dx, {"gain": dgain, "shift": dshift}

    def updated_state(self, params, cache):
        """Running statistics after folding in one train-mode batch."""
        _, _, _, train, mean, var = cache
        if not train:
            return {}
        m = self.momentum
        return {"running_mean": m * params["running_mean"] + (1 - m) * mean,
                "running_var": m * params["running_var"] + (1 - m) * var}


@dataclass(frozen=True)
class ReLU(Layer):
    def forward(self, x, params, train):
        return ops.relu(x)

    def backward(self, dout, cache, params):
        return ops.relu_backward(dout, cache), {}


@dataclass(frozen=True)
class Dense(Layer):
    units: int = 1

    trainable = ("weight", "bias")

    def __post_init__(self):
        if self.units < 1:
            raise ConfigurationError("units must be >= 1")

    def output_shape(self, in_shape):
        return (self.units,)

    def init(self, in_shape, rng):
        fan_in = in_shape[0]
        return {"weight": rng.normal(0.0, math.sqrt(2.0 / fan_in), size=(fan_in, self.units)),
                "bias": np.zeros(self.units)}

    def forward(self, x, params, train):
        return ops.dense(x, params["weight"], params["bias"])

    def backward(self, dout, cache, params):
        dx, dw, db = ops.dense_backward(dout, cache)
        return dx, {"weight": dw, "bias": db}


@dataclass(frozen=True)
class Flatten(Layer):
    def output_shape(self, in_shape):
        return (math.prod(in_shape),)

    def forward(self, x, params, train):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, dout, cache, params):
        return dout.reshape(cache), {}


@dataclass(frozen=True)
class Reshape(Layer):
    target_shape: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "target_shape", tuple(self.target_shape))

    def output_shape(self, in_shape):
        if math.prod(in_shape) != math.prod(self.target_shape):
            raise ShapeError(f"cannot reshape {in_shape} to {self.target_shape}")
        return self.target_shape

    def forward(self, x, params, train):
        return x.reshape((x.shape[0], *self.target_shape)), x.shape

    def backward(self, dout, cache, params):
        return dout.reshape(cache), {}


LAYER_KINDS = {cls.__name__: cls for cls in
               (Conv1D, MaxPool1D, Upsample1D, BatchNorm1D, ReLU, Dense, Flatten, Reshape)}


def layer_from_dict(d):
    d = dict(d)
    kind = d.pop("kind")
    try:
        return LAYER_KINDS[kind](**d)
    except KeyError:
        raise ConfigurationError(f"unknown layer kind {kind!r}") from None


class Sequential:
    """An ordered stack of named layers with a flat parameter dict.

    Parameter keys are ``"<layer name>.<tensor name>"``.
    """

    def __init__(self, layers, input_shape):
        self.names = [name for name, _ in layers]
        self.layers = [layer for _, layer in layers]
        if len(set(self.names)) != len(self.names):
            raise ConfigurationError("layer names must be unique")
        self.input_shape = tuple(input_shape)
        shapes = [self.input_shape]
        for layer in self.layers:
            shapes.append(tuple(layer.output_shape(shapes[-1])))
        self.shapes = shapes

    @property
    def output_shape(self):
        return self.shapes[-1]

    def init_params(self, rng):
        params = {}
        for name, layer, shape in zip(self.names, self.layers, self.shapes):
            for key, value in layer.init(shape, rng).items():
                params[f"{name}.{key}"] = value
        return params

    def trainable_keys(self):
        return [f"{n}.{k}" for n, layer in zip(self.names, self.layers) for k in layer.trainable]

    def _local(self, params, name):
        prefix = name + "."
        return {k[len(prefix):]: v for k, v in params.items() if k.startswith(prefix)}

    def forward(self, x, params, train=False):
        """Return the output and the per-layer caches needed by ``backward``."""
        if tuple(x.shape[1:]) != self.input_shape:
            raise ShapeError(f"expected input shape [batch, {self.input_shape}], got {x.shape}")
        caches = []
        for name, layer in zip(self.names, self.layers):
            x, cache = layer.forward(x, self._local(params, name), train)
            caches.append(cache)
        return x, caches

    def backward(self, dout, caches, params):
        grads = {}
        for name, layer, cache in zip(reversed(self.names), reversed(self.layers), reversed(caches)):
            dout, local = layer.backward(dout, cache, self._local(params, name))
            for k, v in local.items():
                grads[f"{name}.{k}"] = v
        return dout, grads

    def state_updates(self, params, caches):
        """New running statistics implied by a train-mode forward pass."""
        updates = {}
        for name, layer, cache in zip(self.names, self.layers, caches):
            if isinstance(layer, BatchNorm1D):
                for k, v in layer.updated_state(self._local(params, name), cache).items():
                    updates[f"{name}.{k}"] = v
        return updates

    def to_dict(self):
        return {"input_shape": list(self.input_shape),
                "layers": [{"name": n, **layer.to_dict()} for n, layer in zip(self.names, self.layers)]}
