"""Pipeline configuration: a single JSON document with a canonical serialized form."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from datetime import date
from pathlib import Path

from .cae_model import ArchitectureSpec, TrainConfig
from .errors import ConfigurationError
from .market_data import CHANNELS


@dataclass(frozen=True)
class ClusterConfig:
    k: int | str = "auto"
    k_min: int = 2
    k_max: int = 6
    seed: int = 0
    restarts: int = 10

    def __post_init__(self):
        if self.k != "auto" and (not isinstance(self.k, int) or self.k < 1):
            raise ConfigurationError(f"cluster.k must be 'auto' or a positive integer, got {self.k!r}")


@dataclass(frozen=True)
class TestsConfig:
    max_lag: int = 10
    dims: tuple = (2, 3, 4, 5)
    distance_mult: float = 2.5
    min_length: int = 30

    __test__ = False

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(self.dims))


@dataclass(frozen=True)
class PipelineConfig:
    snapshot_dir: str
    symbols: tuple | None = None
    anchor_date: date = date(2013, 5, 15)
    period_months: int = 6
    period_count: int = 12
    channels: tuple = CHANNELS
    architecture: ArchitectureSpec = field(default_factory=ArchitectureSpec.full_scale)
    train: TrainConfig = field(default_factory=TrainConfig)
    cluster: ClusterConfig = field(default_factory=ClusterConfig)
    tests: TestsConfig = field(default_factory=TestsConfig)
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        if self.symbols is not None:
            object.__setattr__(self, "symbols", tuple(self.symbols))
        for ch in self.channels:
            if ch not in CHANNELS:
                raise ConfigurationError(f"unknown channel {ch!r}")
        if self.architecture.input_channels != len(self.channels):
            raise ConfigurationError(
                f"architecture expects {self.architecture.input_channels} channels, "
                f"config selects {len(self.channels)}")
        if self.workers < 1:
            raise ConfigurationError("workers must be >= 1")

    @classmethod
    def from_dict(cls, d, base_dir=None):
        d = dict(d)
        if "snapshot_dir" not in d:
            raise ConfigurationError("config is missing snapshot_dir")
        snap = Path(d["snapshot_dir"])
        if base_dir is not None and not snap.is_absolute():
            snap = Path(base_dir) / snap
        d["snapshot_dir"] = str(snap)
        if "anchor_date" in d:
            d["anchor_date"] = date.fromisoformat(d["anchor_date"])
        channels = d.get("channels", CHANNELS)
        arch = dict(d.get("architecture", {}))
        arch.setdefault("input_channels", len(channels))
        base = ArchitectureSpec.full_scale(input_channels=arch["input_channels"]).to_dict()
        base.update(arch)
        d["architecture"] = ArchitectureSpec.from_dict(base)
        d["train"] = TrainConfig(**d.get("train", {}))
        d["cluster"] = ClusterConfig(**d.get("cluster", {}))
        d["tests"] = TestsConfig(**d.get("tests", {}))
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path):
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(data, base_dir=path.parent)

    def with_seed(self, seed):
        return replace(self, train=replace(self.train, seed=seed),
                       cluster=replace(self.cluster, seed=seed))

    def to_dict(self):
        return {
            "snapshot_dir": self.snapshot_dir,
            "symbols": None if self.symbols is None else list(self.symbols),
            "anchor_date": self.anchor_date.isoformat(),
            "period_months": self.period_months,
            "period_count": self.period_count,
            "channels": list(self.channels),
            "architecture": self.architecture.to_dict(),
            "train": asdict(self.train),
            "cluster": asdict(self.cluster),
            "tests": {**asdict(self.tests), "dims": list(self.tests.dims)},
            "workers": self.workers,
        }

    def canonical_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def digest(self):
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()
