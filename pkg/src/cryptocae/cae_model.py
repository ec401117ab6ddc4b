"""1-D convolutional autoencoder: architecture assembly, training and encode/decode."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DivergenceError, ShapeError
from .fsutil import write_atomic
from .tensor_engine import (BatchNorm1D, Conv1D, Dense, Flatten, MaxPool1D, NadamState, ReLU,
                            Reshape, Sequential, Upsample1D, load_parameters, mse_loss,
                            nadam_step, save_parameters)

log = logging.getLogger(__name__)

FULL_SCALE_FILTERS = (64, 128, 256, 512, 512, 512)


@dataclass(frozen=True)
class ArchitectureSpec:
    """Encoder geometry; the decoder mirrors it.

    ``blocks`` holds one ``(filters, kernel_size)`` pair per
    conv -> batchnorm -> relu -> maxpool stage.
    """

    input_length: int = 192
    input_channels: int = 3
    blocks: tuple = tuple((f, 3) for f in FULL_SCALE_FILTERS)
    feature_dim: int = 10
    pool_factor: int = 2
    filter_bounds: tuple = (1, 512)
    bn_epsilon: float = 1e-5
    bn_momentum: float = 0.9

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(tuple(int(v) for v in b) for b in self.blocks))
        object.__setattr__(self, "filter_bounds", tuple(self.filter_bounds))
        if self.feature_dim < 1 or self.input_channels < 1 or self.input_length < 1:
            raise ConfigurationError("feature_dim, input_channels and input_length must be >= 1")
        if self.pool_factor < 1:
            raise ConfigurationError("pool_factor must be >= 1")
        if self.input_length % self.pool_factor ** len(self.blocks):
            raise ConfigurationError(
                f"input_length {self.input_length} is not divisible by "
                f"{self.pool_factor}**{len(self.blocks)}")
        lo, hi = self.filter_bounds
        for filters, kernel in self.blocks:
            if not lo <= filters <= hi:
                raise ConfigurationError(f"{filters} filters outside bounds [{lo}, {hi}]")
            if kernel < 1:
                raise ConfigurationError("kernel_size must be >= 1")

    @classmethod
    def full_scale(cls, input_channels=3, input_length=192):
        return cls(input_length=input_length, input_channels=input_channels,
                   blocks=tuple((f, 3) for f in FULL_SCALE_FILTERS), feature_dim=10,
                   pool_factor=2, filter_bounds=(64, 512))

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    def to_dict(self):
        d = asdict(self)
        d["blocks"] = [list(b) for b in self.blocks]
        d["filter_bounds"] = list(self.filter_bounds)
        return d


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 500
    batch_size: int | None = None  # None: min(16, sample count)
    seed: int = 0
    learning_rate: float = 2e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigurationError("epochs must be >= 1")
        if self.batch_size is not None and self.batch_size < 1:
            raise ConfigurationError("batch_size must be >= 1")

    def optimizer(self):
        return NadamState(learning_rate=self.learning_rate, beta1=self.beta1,
                          beta2=self.beta2, epsilon=self.epsilon)


@dataclass
class TrainReport:
    loss_curve: list = field(default_factory=list)
    final_loss: float = float("nan")
    wall_time: float = 0.0

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epoch", "loss"])
        for epoch, loss in enumerate(self.loss_curve):
            w.writerow([epoch, repr(float(loss))])
        return buf.getvalue()


def _encoder_layers(spec):
    layers = []
    for i, (filters, kernel) in enumerate(spec.blocks):
        layers += [
            (f"enc_conv{i}", Conv1D(kernel, filters)),
            (f"enc_bn{i}", BatchNorm1D(spec.bn_epsilon, spec.bn_momentum)),
            (f"enc_relu{i}", ReLU()),
            (f"enc_pool{i}", MaxPool1D(spec.pool_factor)),
        ]
    layers += [("flatten", Flatten()), ("feature", Dense(spec.feature_dim))]
    return layers


def _decoder_layers(spec):
    n = len(spec.blocks)
    if n == 0:
        return [("dec_dense", Dense(spec.input_length * spec.input_channels)),
                ("dec_reshape", Reshape((spec.input_length, spec.input_channels)))]
    bottleneck_len = spec.input_length // spec.pool_factor ** n
    bottleneck_ch = spec.blocks[-1][0]
    layers = [("dec_dense", Dense(bottleneck_len * bottleneck_ch)),
              ("dec_relu", ReLU()),
              ("dec_reshape", Reshape((bottleneck_len, bottleneck_ch)))]
    # mirror: decoder stage j undoes encoder block n-1-j, restoring that block's input width
    for j in range(n):
        enc = n - 1 - j
        kernel = spec.blocks[enc][1]
        out_ch = spec.blocks[enc - 1][0] if enc > 0 else spec.input_channels
        layers += [(f"dec_up{j}", Upsample1D(spec.pool_factor)),
                   (f"dec_conv{j}", Conv1D(kernel, out_ch))]
        if enc > 0:
            layers += [(f"dec_bn{j}", BatchNorm1D(spec.bn_epsilon, spec.bn_momentum)),
                       (f"dec_relu{j}", ReLU())]
    return layers


class CAEModel:
    """Encoder/decoder pair sharing one flat parameter dict.

    ``params`` keys are prefixed by layer name; encoder layers start with
    ``enc_`` or are ``flatten``/``feature``, everything else is decoder.
    """

    def __init__(self, spec: ArchitectureSpec, params=None):
        self.spec = spec
        in_shape = (spec.input_length, spec.input_channels)
        self.encoder = Sequential(_encoder_layers(spec), in_shape)
        self.decoder = Sequential(_decoder_layers(spec), self.encoder.output_shape)
        if self.decoder.output_shape != in_shape:
            raise ShapeError(f"decoder output {self.decoder.output_shape} != input {in_shape}")
        self.params = params if params is not None else {}

    @property
    def encoder_params(self):
        keys = {n for n in self.encoder.names}
        return {k: v for k, v in self.params.items() if k.split(".")[0] in keys}

    @property
    def decoder_params(self):
        keys = {n for n in self.decoder.names}
        return {k: v for k, v in self.params.items() if k.split(".")[0] in keys}

    def trainable_keys(self):
        return self.encoder.trainable_keys() + self.decoder.trainable_keys()

    def layer_count(self):
        """Conv, pool and upscale layers plus the feature layer."""
        return (sum(layer.counted for layer in self.encoder.layers + self.decoder.layers) + 1)

    def _check_input(self, x):
        x = np.asarray(x, dtype=np.float64)
        expected = (self.spec.input_length, self.spec.input_channels)
        if x.ndim != 3 or x.shape[1:] != expected:
            raise ConfigurationError(f"expected input [n, {expected[0]}, {expected[1]}], got {x.shape}")
        return x

    def forward(self, x, params=None, train=False):
        """Full pass; returns ``(reconstruction, encoder caches, decoder caches)``."""
        params = self.params if params is None else params
        h, enc_caches = self.encoder.forward(x, params, train)
        out, dec_caches = self.decoder.forward(h, params, train)
        return out, enc_caches, dec_caches

    def loss_and_gradients(self, x, params=None, train=True):
        params = self.params if params is None else params
        out, enc_caches, dec_caches = self.forward(x, params, train)
        loss, dout = mse_loss(out, x)
        dh, grads = self.decoder.backward(dout, dec_caches, params)
        _, enc_grads = self.encoder.backward(dh, enc_caches, params)
        grads.update(enc_grads)
        state = {**self.encoder.state_updates(params, enc_caches),
                 **self.decoder.state_updates(params, dec_caches)} if train else {}
        return loss, grads, state

    def save(self, directory):
        save_parameters(directory, self.params, extra={"architecture": self.spec.to_dict()})

    @classmethod
    def load(cls, directory):
        params, _, extra = load_parameters(directory)
        return cls(ArchitectureSpec.from_dict(extra["architecture"]), params)


def build(spec: ArchitectureSpec, seed: int = 0) -> CAEModel:
    model = CAEModel(spec)
    rng = np.random.default_rng(seed)
    params = model.encoder.init_params(rng)
    params.update(model.decoder.init_params(rng))
    model.params = params
    return model


def param_count(model: CAEModel) -> int:
    """Number of trainable scalars; batch-norm running statistics are excluded."""
    return sum(model.params[k].size for k in model.trainable_keys())


def encode(model: CAEModel, x) -> np.ndarray:
    x = model._check_input(x)
    h, _ = model.encoder.forward(x, model.params, train=False)
    return h


def decode(model: CAEModel, h) -> np.ndarray:
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != 2 or h.shape[1] != model.spec.feature_dim:
        raise ShapeError(f"latent width must be {model.spec.feature_dim}, got shape {h.shape}")
    out, _ = model.decoder.forward(h, model.params, train=False)
    return out


def reconstruct(model: CAEModel, x) -> np.ndarray:
    return decode(model, encode(model, x))


def reconstruction_loss(model: CAEModel, x) -> float:
    x = model._check_input(x)
    loss, _ = mse_loss(reconstruct(model, x), x)
    return loss


def train(model: CAEModel, data, config: TrainConfig) -> TrainReport:
    """Minimize mean squared reconstruction error with Nadam, updating ``model`` in place.

    ``data`` is a FeatureTensor or a ``[n, length, channels]`` array.  The
    loss curve holds the sample-weighted mean train-mode batch loss of each
    epoch; ``final_loss`` is the inference-mode loss over the whole dataset
    after the last epoch.
    """
    x = getattr(data, "data", data)
    x = model._check_input(x)
    n = x.shape[0]
    if n == 0:
        raise ConfigurationError("training data is empty")
    batch_size = config.batch_size or min(16, n)
    if batch_size > n:
        raise ConfigurationError(f"batch_size {batch_size} exceeds sample count {n}")

    rng = np.random.default_rng(config.seed)
    keys = model.trainable_keys()
    opt = config.optimizer()
    params = dict(model.params)
    report = TrainReport()
    start = time.perf_counter()
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        total = 0.0
        for b, lo in enumerate(range(0, n, batch_size)):
            idx = order[lo:lo + batch_size]
            loss, grads, state = model.loss_and_gradients(x[idx], params, train=True)
            if not math.isfinite(loss):
                raise DivergenceError(f"non-finite loss at epoch {epoch}, batch {b}")
            try:
                params, opt = nadam_step(params, {k: grads[k] for k in keys}, opt)
            except DivergenceError as exc:
                raise DivergenceError(f"epoch {epoch}, batch {b}: {exc}") from exc
            params.update(state)
            total += loss * len(idx)
        report.loss_curve.append(total / n)
        if epoch % 50 == 0:
            log.debug("epoch %d loss %.6g", epoch, report.loss_curve[-1])
    model.params = params
    report.final_loss = reconstruction_loss(model, x)
    report.wall_time = time.perf_counter() - start
    return report


def architecture_from_json(text):
    return ArchitectureSpec.from_dict(json.loads(text))


def write_train_report(report: TrainReport, path):
    write_atomic(path, report.to_csv())
