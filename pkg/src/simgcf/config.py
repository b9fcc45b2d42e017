"""Run configuration: TOML sections mapped onto dataclasses.

Unknown sections or keys are rejected. ``None`` values are omitted when
serializing, so ``dumps(loads(text))`` is a fixed point.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import tomli
import tomli_w

from .dataset import DEFAULT_RATIOS
from .errors import SimGCFError
from .evaluation import DEFAULT_KS
from .filters import FilterSpec, ScalerParams
from .training import TrainConfig
from .variants import Variant, build_filter, resolve_variant


class ConfigError(SimGCFError):
    """Malformed or unknown configuration (a usage error)."""


@dataclass(frozen=True)
class DataConfig:
    input: str | None = None
    format: str = "tsv"
    split_dir: str = "data/split"


@dataclass(frozen=True)
class SplitConfig:
    ratios: tuple[float, float, float] = DEFAULT_RATIOS
    split_seed: int = 2024


@dataclass(frozen=True)
class FilterConfig:
    variant: str = "simgcf-i"
    basis: str = "jacobi"
    degree: int = 3
    a: float = 1.0
    b: float = 1.0
    mu: float = 1.0
    alpha: float = -3.0
    beta: float = 0.0
    base_coefficients: tuple[float, ...] | None = None
    samples: int = 1024
    sample_seed: int | None = None
    use_scaler: bool | None = None  # None: the variant's default
    space_flip: bool | None = None

    def variant_spec(self) -> Variant:
        v = resolve_variant(self.variant)
        if self.use_scaler is not None:
            v = replace(v, use_scaler=self.use_scaler)
        if self.space_flip is not None:
            v = replace(v, space_flip=self.space_flip)
        return v

    def build(self) -> FilterSpec:
        """Fitted filter for the configured variant."""
        variant = self.variant_spec()
        if variant.basis == "jacobi":
            # named variants only pin the basis when it is not the default
            variant = replace(variant, basis=self.basis)
        base = FilterSpec(
            basis=variant.basis,
            degree=self.degree,
            a=self.a,
            b=self.b,
            base_coefficients=self.base_coefficients,
            samples=self.samples,
            sample_seed=self.sample_seed,
        )
        return build_filter(variant, base, ScalerParams(self.mu, self.alpha, self.beta))


@dataclass(frozen=True)
class EvalConfig:
    ks: tuple[int, ...] = DEFAULT_KS
    split: str = "test"


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "runs/default"


@dataclass(frozen=True)
class RunConfig:
    data: DataConfig = field(default_factory=DataConfig)
    split: SplitConfig = field(default_factory=SplitConfig)
    filter: FilterConfig = field(default_factory=FilterConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def seeds(self) -> dict[str, int | None]:
        return {
            "split_seed": self.split.split_seed,
            "init_seed": self.train.init_seed,
            "sampler_seed": self.train.sampler_seed,
            "filter_sample_seed": self.filter.sample_seed,
        }

    def with_overrides(self, section: str, **values) -> "RunConfig":
        values = {k: v for k, v in values.items() if v is not None}
        if not values:
            return self
        current = getattr(self, section)
        try:
            return replace(self, **{section: _coerce_section(type(current), {**_section_dict(current), **values})})
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[{section}]: {exc}") from None


_SECTIONS = {f.name: f for f in fields(RunConfig)}


def _section_dict(obj) -> dict:
    return {f.name: getattr(obj, f.name) for f in fields(obj)}


def _coerce_value(name: str, typ: str, value):
    if value is None:
        return None
    if "tuple" in typ:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{name} must be a list")
        elem = int if "int" in typ else float
        return tuple(elem(v) for v in value)
    if typ.startswith("bool"):
        if not isinstance(value, bool):
            raise ConfigError(f"{name} must be true or false")
        return value
    if typ.startswith("int"):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{name} must be an integer")
        return value
    if typ.startswith("float"):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{name} must be a number")
        return float(value)
    if typ.startswith("str"):
        if not isinstance(value, str):
            raise ConfigError(f"{name} must be a string")
        return value
    return value


def _coerce_section(cls, values: dict):
    known = {f.name: f for f in fields(cls)}
    unknown = set(values) - set(known)
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}")
    kwargs = {k: _coerce_value(k, str(known[k].type), v) for k, v in values.items()}
    return cls(**kwargs)


def from_dict(d: dict) -> RunConfig:
    unknown = set(d) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config sections {sorted(unknown)}")
    kwargs = {}
    for name, f in _SECTIONS.items():
        if name not in d:
            continue
        section = d[name]
        if not isinstance(section, dict):
            raise ConfigError(f"[{name}] must be a table")
        cls = type(f.default_factory())
        try:
            kwargs[name] = _coerce_section(cls, section)
        except ConfigError as exc:
            raise ConfigError(f"[{name}]: {exc}") from None
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[{name}]: {exc}") from None
    return RunConfig(**kwargs)


def to_dict(cfg: RunConfig) -> dict:
    out = {}
    for name in _SECTIONS:
        section = {}
        for k, v in _section_dict(getattr(cfg, name)).items():
            if v is None:
                continue
            section[k] = list(v) if isinstance(v, tuple) else v
        out[name] = section
    return out


def loads(text: str) -> RunConfig:
    try:
        return from_dict(tomli.loads(text))
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}") from None


def dumps(cfg: RunConfig) -> str:
    return tomli_w.dumps(to_dict(cfg))


def load(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"{path}: no such config file")
    return loads(path.read_text(encoding="utf-8"))


def save(cfg: RunConfig, path: str | Path) -> None:
    Path(path).write_text(dumps(cfg), encoding="utf-8")


__all__ = [
    "ConfigError", "DataConfig", "SplitConfig", "FilterConfig", "EvalConfig", "OutputConfig",
    "RunConfig", "TrainConfig", "loads", "dumps", "load", "save", "from_dict", "to_dict",
]
