"""Pipeline configuration (JSON file, command-line flags override)."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .distance_model import CIRCUITY_FACTOR, KNN_K, V_WALK_M_PER_MIN
from .errors import ConfigurationError

DEFAULT_FILES = {
    "sites": "sites.csv",
    "demographics": "demographics.csv",
    "wait_times": "wait_times.csv",
    "zip_districts": "zip_districts.csv",
    "zip_overrides": "zip_overrides.csv",
    "walk_lengths": "walk_lengths.csv",
    "travel_times": "travel_times.csv",
}
OPTIONAL_FILES = ("zip_overrides", "walk_lengths", "travel_times")


@dataclass
class RegionConfig:
    label: str
    city: str
    sites: Path
    demographics: Path
    wait_times: Path
    zip_districts: Path
    zip_overrides: Path | None = None
    walk_lengths: Path | None = None
    travel_times: Path | None = None
    boundary: Path | None = None

    def files(self):
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, Path):
                out[f.name] = value
        return out

    @classmethod
    def from_dict(cls, raw, base_dir):
        if "label" not in raw:
            raise ConfigurationError(f"region entry without a label: {raw}")
        base = Path(base_dir)
        data_dir = base / raw["data_dir"] if "data_dir" in raw else None
        kwargs = {"label": raw["label"], "city": raw.get("city", raw["label"])}
        for key, default in DEFAULT_FILES.items():
            if key in raw:
                kwargs[key] = None if raw[key] is None else base / raw[key]
            elif data_dir is not None:
                candidate = data_dir / default
                if key in OPTIONAL_FILES and not candidate.exists():
                    continue
                kwargs[key] = candidate
            elif key not in OPTIONAL_FILES:
                raise ConfigurationError(f"region {raw['label']}: no {key} file and no data_dir")
        if raw.get("boundary"):
            kwargs["boundary"] = (data_dir or base) / raw["boundary"]
        return cls(**kwargs)


@dataclass
class ProviderConfig:
    type: str = "file"
    path: Path | None = None
    url: str | None = None
    api_key_env: str = "ROUTING_API_KEY"
    timeout: float = 30.0

    @classmethod
    def from_dict(cls, raw, base_dir):
        raw = dict(raw or {})
        if raw.get("path"):
            raw["path"] = Path(base_dir) / raw["path"]
        cfg = cls(**raw)
        if cfg.type not in ("file", "http"):
            raise ConfigurationError(f"provider type must be 'file' or 'http', got {cfg.type!r}")
        if cfg.type == "http" and not cfg.url:
            raise ConfigurationError("http provider needs a url")
        return cfg


@dataclass
class PipelineConfig:
    regions: list = field(default_factory=list)
    v_walk: float = V_WALK_M_PER_MIN
    knn_k: int = KNN_K
    z_threshold: float = 1.0
    circuity_factor: float = CIRCUITY_FACTOR
    max_dim: int = 2
    truncation: object = "auto"
    provider: ProviderConfig = field(default_factory=ProviderConfig)
    cache_dir: Path = Path("cache")
    max_requests: int | None = None
    concurrency: int = 4
    retries: int = 3
    backoff: float = 0.5
    std_ddof: int = 0
    default_car_fraction: float = 0.0
    max_triangles: int = 5_000_000
    dump_filtration: bool = False
    base_dir: Path = Path(".")

    def __post_init__(self):
        for name in ("v_walk", "knn_k", "z_threshold", "circuity_factor", "concurrency"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive, got {getattr(self, name)}")
        if self.max_dim != 2:
            raise ConfigurationError("max_dim is fixed at 2")
        if self.retries < 0 or self.backoff < 0:
            raise ConfigurationError("retries and backoff must be non-negative")
        if self.max_requests is not None and self.max_requests < 0:
            raise ConfigurationError("max_requests must be non-negative")
        if not 0.0 <= self.default_car_fraction <= 1.0:
            raise ConfigurationError("default_car_fraction must lie in [0, 1]")
        if self.truncation not in ("auto", "none", None):
            try:
                if float(self.truncation) <= 0:
                    raise ValueError
            except (TypeError, ValueError):
                raise ConfigurationError(f"truncation must be auto, none or positive minutes, got {self.truncation!r}")
        labels = [r.label for r in self.regions]
        if len(set(labels)) != len(labels):
            raise ConfigurationError(f"duplicate region labels: {labels}")

    def cities(self):
        """City name -> regions, in first-appearance order."""
        out = {}
        for r in self.regions:
            out.setdefault(r.city, []).append(r)
        return out

    def region(self, label):
        for r in self.regions:
            if r.label == label:
                return r
        raise ConfigurationError(f"no region labelled {label!r}")

    def as_dict(self):
        def rel(p):
            try:
                return str(Path(p).resolve().relative_to(self.base_dir.resolve()))
            except ValueError:
                return str(p)

        out = {}
        for f in fields(self):
            if f.name in ("regions", "provider", "base_dir"):
                continue
            v = getattr(self, f.name)
            out[f.name] = rel(v) if isinstance(v, Path) else v
        prov = asdict(self.provider)
        if prov["path"] is not None:
            prov["path"] = rel(prov["path"])
        out["provider"] = prov
        out["regions"] = [
            {k: (rel(v) if isinstance(v, Path) else v) for k, v in asdict(r).items() if v is not None}
            for r in self.regions
        ]
        return out


def load_config(path, **overrides):
    """Read a JSON config; keyword overrides (e.g. from CLI flags) win when not None."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}")
    return config_from_dict(raw, path.parent, **overrides)


def config_from_dict(raw, base_dir=".", **overrides):
    raw = dict(raw)
    base_dir = Path(base_dir)
    known = {f.name for f in fields(PipelineConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
    raw.update({k: v for k, v in overrides.items() if v is not None})
    regions = [RegionConfig.from_dict(r, base_dir) for r in raw.pop("regions", [])]
    provider = ProviderConfig.from_dict(raw.pop("provider", None), base_dir)
    cache_dir = base_dir / raw.pop("cache_dir", "cache")
    return PipelineConfig(regions=regions, provider=provider, cache_dir=cache_dir, base_dir=base_dir, **raw)
