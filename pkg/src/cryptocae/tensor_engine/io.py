"""ParameterSet persistence: a JSON manifest plus one little-endian float64 blob per tensor."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError
from ..fsutil import write_atomic
from .optim import NadamState

FORMAT_NAME = "cryptocae-params"
FORMAT_VERSION = 1


def _blob_name(key):
    return key.replace("/", "_") + ".f64"


def save_parameters(directory, params, optimizer: NadamState | None = None, extra=None):
    """Write ``params`` (and optionally Nadam moments) under ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {"format": FORMAT_NAME, "version": FORMAT_VERSION, "tensors": [], "optimizer": None}
    for key in sorted(params):
        arr = np.ascontiguousarray(params[key], dtype="<f8")
        name = _blob_name(key)
        write_atomic(directory / name, arr.tobytes())
        manifest["tensors"].append({"name": key, "shape": list(arr.shape), "file": name})
    if optimizer is not None:
        opt = {"step": optimizer.step, "mu_product": optimizer.mu_product,
               **optimizer.hyperparameters(), "moments": []}
        for which, moments in (("m", optimizer.first_moment), ("v", optimizer.second_moment)):
            for key in sorted(moments):
                arr = np.ascontiguousarray(moments[key], dtype="<f8")
                name = f"{which}__{_blob_name(key)}"
                write_atomic(directory / name, arr.tobytes())
                opt["moments"].append({"kind": which, "name": key, "shape": list(arr.shape),
                                       "file": name})
        manifest["optimizer"] = opt
    if extra is not None:
        manifest["extra"] = extra
    write_atomic(directory / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _read_blob(directory, entry):
    data = np.frombuffer((directory / entry["file"]).read_bytes(), dtype="<f8")
    shape = tuple(entry["shape"])
    if data.size != int(np.prod(shape)):
        raise ConfigurationError(f"blob {entry['file']} does not match shape {shape}")
    return data.reshape(shape).astype(np.float64)


def load_parameters(directory):
    """Inverse of :func:`save_parameters`; returns ``(params, optimizer_or_None, extra)``."""
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    if manifest.get("format") != FORMAT_NAME:
        raise ConfigurationError(f"{directory} is not a parameter checkpoint")
    if manifest.get("version") != FORMAT_VERSION:
        raise ConfigurationError(f"unsupported checkpoint version {manifest.get('version')}")
    params = {e["name"]: _read_blob(directory, e) for e in manifest["tensors"]}
    optimizer = None
    opt = manifest.get("optimizer")
    if opt is not None:
        m = {e["name"]: _read_blob(directory, e) for e in opt["moments"] if e["kind"] == "m"}
        v = {e["name"]: _read_blob(directory, e) for e in opt["moments"] if e["kind"] == "v"}
        optimizer = NadamState(learning_rate=opt["learning_rate"], beta1=opt["beta1"],
                               beta2=opt["beta2"], epsilon=opt["epsilon"],
                               momentum_decay=opt["momentum_decay"], step=opt["step"],
                               mu_product=opt["mu_product"], first_moment=m, second_moment=v)
    return params, optimizer, manifest.get("extra")
