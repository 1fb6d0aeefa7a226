"""Experiment configuration. Every field has a default; reports embed the
fully resolved configuration."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SchemeConfig:
    b_max: float = 8000.0
    band_limits: tuple = (3, 5, 9, 11)
    cond_bound: float = 100.0

    @property
    def n_shells(self):
        return len(self.band_limits)


@dataclass(frozen=True)
class GeemConfig:
    alpha: float = 0.5
    seed: int = 0
    iters: int = 10000
    lambda_l: float = 1e-7
    lambda_n: float = 5e-8
    penalty_units: str = "scheme"
    even_only: bool = True


@dataclass(frozen=True)
class ModelsConfig:
    eigenvalues: tuple = (1.7e-3, 0.2e-3, 0.2e-3)
    fractions: tuple = (0.5, 0.5)
    isotropic_diffusivity: float = 0.7e-3


@dataclass(frozen=True)
class OdfConfig:
    rel_threshold: float = 0.5
    min_separation_deg: float = 10.0
    icosphere_level: int = 4
    kernel_decay: float = 1e-10
    kernel_r_max: float | None = None
    kernel_panels: int = 24


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 7
    n_eval: int = 10000
    n_rotations: int = 30
    angle_start: float = 30.0
    angle_stop: float = 90.0
    angle_step: float = 5.0
    sht_method: str = "ring"


@dataclass(frozen=True)
class Config:
    scheme: SchemeConfig = field(default_factory=SchemeConfig)
    geem: GeemConfig = field(default_factory=GeemConfig)
    models: ModelsConfig = field(default_factory=ModelsConfig)
    odf: OdfConfig = field(default_factory=OdfConfig)
    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)

    def to_dict(self):
        return asdict(self)

    def replace(self, section, **kw):
        from dataclasses import replace
        return replace(self, **{section: replace(getattr(self, section), **kw)})

    @classmethod
    def from_dict(cls, d):
        sections = {f.name: f.default_factory for f in fields(cls)}
        unknown = set(d) - set(sections)
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        kw = {}
        for name, factory in sections.items():
            proto = factory()
            given = dict(d.get(name, {}))
            allowed = {f.name for f in fields(proto)}
            bad = set(given) - allowed
            if bad:
                raise ConfigError(f"unknown keys in [{name}]: {sorted(bad)}")
            for k, v in given.items():
                if isinstance(v, list):
                    given[k] = tuple(v)
            kw[name] = type(proto)(**given)
        cfg = cls(**kw)
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, text):
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(d)

    def validate(self):
        s, e, o = self.scheme, self.experiment, self.odf
        if s.b_max <= 0:
            raise ConfigError("scheme.b_max must be positive")
        if not s.band_limits or any(int(L) % 2 == 0 or L < 1 for L in s.band_limits):
            raise ConfigError("scheme.band_limits must be odd positive integers")
        if list(s.band_limits) != sorted(s.band_limits):
            raise ConfigError("scheme.band_limits must be nondecreasing")
        if not 0.0 <= self.geem.alpha <= 1.0:
            raise ConfigError("geem.alpha must be in [0, 1]")
        if self.geem.penalty_units not in ("scheme", "dimensionless"):
            raise ConfigError("geem.penalty_units must be 'scheme' or 'dimensionless'")
        if not 0.0 < o.rel_threshold < 1.0:
            raise ConfigError("odf.rel_threshold must be in (0, 1)")
        if e.n_eval < 1 or e.n_rotations < 1 or e.angle_step <= 0 or e.angle_stop < e.angle_start:
            raise ConfigError("invalid experiment ranges")
        if e.sht_method not in ("ring", "dense"):
            raise ConfigError("experiment.sht_method must be 'ring' or 'dense'")
