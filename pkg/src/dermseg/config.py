"""Pipeline configuration: nested dataclasses <-> JSON, plus ``key=value`` overrides."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

from .preprocess import PreprocessParams
from .segment import SegmentParams


@dataclass
class ColorModelParams:
    percentile_lo: float = 1.0
    percentile_hi: float = 99.0

    def __post_init__(self):
        if not 0 <= self.percentile_lo < self.percentile_hi <= 100:
            raise ValueError("need 0 <= percentile_lo < percentile_hi <= 100")


@dataclass
class EvaluateParams:
    # False: ground truth is shrunk to the processing size with the image rule
    score_at_original: bool = False


@dataclass
class PipelineConfig:
    preprocess: PreprocessParams = field(default_factory=PreprocessParams)
    colormodel: ColorModelParams = field(default_factory=ColorModelParams)
    segment: SegmentParams = field(default_factory=SegmentParams)
    evaluate: EvaluateParams = field(default_factory=EvaluateParams)
    workers: int = 1
    output_dir: str | None = None


# keys that do not influence results and are left out of run manifests
RUNTIME_KEYS = ("workers", "output_dir")


def to_dict(cfg) -> dict:
    return dataclasses.asdict(cfg)


def _build(cls, data: dict, path: str = ""):
    if not isinstance(data, dict):
        raise ValueError(f"config section {path or '<root>'} must be an object")
    defaults = cls()
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ValueError(f"unknown config keys at {path or '<root>'}: {sorted(unknown)}")
    kwargs = {}
    for name in known:
        if name not in data:
            continue
        current = getattr(defaults, name)
        value = data[name]
        if dataclasses.is_dataclass(current):
            value = _build(type(current), value, f"{path}{name}.")
        kwargs[name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"invalid config at {path or '<root>'}: {exc}") from exc


def from_dict(data: dict) -> PipelineConfig:
    return _build(PipelineConfig, data)


def dumps(cfg: PipelineConfig, drop_runtime: bool = False) -> str:
    d = to_dict(cfg)
    if drop_runtime:
        for k in RUNTIME_KEYS:
            d.pop(k, None)
    return json.dumps(d, indent=2, sort_keys=True) + "\n"


def load(path) -> PipelineConfig:
    with open(path, encoding="utf-8") as fh:
        return from_dict(json.load(fh))


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(cfg: PipelineConfig, assignments) -> PipelineConfig:
    """Apply ``section.sub.key=value`` strings; values are parsed as JSON when possible."""
    d = to_dict(cfg)
    for item in assignments:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ValueError(f"override {item!r} is not of the form key=value")
        parts = key.strip().split(".")
        node = d
        for p in parts[:-1]:
            if not isinstance(node.get(p), dict):
                raise ValueError(f"unknown config section {p!r} in {key!r}")
            node = node[p]
        if parts[-1] not in node:
            raise ValueError(f"unknown config key {key!r}")
        node[parts[-1]] = _parse_value(raw)
    return from_dict(d)
