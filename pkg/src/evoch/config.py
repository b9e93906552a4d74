"""Run configuration: YAML in, validated RunConfig out, resolved YAML echoed back."""

from __future__ import annotations

import os
from pathlib import Path
from typing import Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigurationError
from .geometry import FlowField

RESOLVED_CONFIG_NAME = "resolved_config.yaml"
RNG_NAME = "numpy.PCG64"


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class SurfaceSpec(_Strict):
    preset: Literal["unit_sphere", "sphere"] = "unit_sphere"
    refinement: int = Field(3, ge=0, le=7)
    radius: float = Field(1.0, gt=0)


class FlowSpec(_Strict):
    preset: Literal["static", "breathing_sphere", "ellipsoid_stretch", "translate_rotate"] = "static"
    params: dict = Field(default_factory=dict)


class AdvectiveSpec(_Strict):
    preset: Literal["zero", "rigid_rotation", "user_tangent_field"] = "zero"
    params: dict = Field(default_factory=dict)


class InitialSpec(_Strict):
    preset: Literal["constant", "random_uniform", "harmonic_patch"] = "random_uniform"
    value: float = 0.0
    seed: int = 0
    amplitude: float = Field(0.05, ge=0)
    mean: float = 0.0
    rng: Literal["numpy.PCG64"] = RNG_NAME

    @model_validator(mode="after")
    def _range(self):
        if self.preset == "constant" and not -1.0 <= self.value <= 1.0:
            raise ValueError(f"constant u0 value must lie in [-1, 1], got {self.value}")
        if self.preset != "constant" and not -1.0 < self.mean < 1.0:
            raise ValueError(f"u0 mean must lie in (-1, 1), got {self.mean}")
        return self


class OutputSpec(_Strict):
    directory: str = "output"
    snapshot_every: int = Field(10, ge=1)
    csv_name: str = "diagnostics.csv"


class RunConfig(_Strict):
    model: Literal["advected", "weighted"]
    surface: SurfaceSpec
    flow: FlowSpec
    theta: float = Field(gt=0, lt=1)
    T: float = Field(ge=0)
    dt: float = Field(gt=0)
    advective: AdvectiveSpec = AdvectiveSpec()
    delta: float = Field(1e-4, ge=0, lt=1)
    delta_continuation: int = Field(0, ge=0, le=20)
    scheme: Literal["convex_split", "fully_implicit"] = "convex_split"
    quadrature: Literal["lumped", "midpoint3", "gauss6"] = "midpoint3"
    u0: InitialSpec = InitialSpec()
    admissibility_samples: int = Field(401, ge=2)
    output: OutputSpec = OutputSpec()

    @model_validator(mode="after")
    def _consistency(self):
        if self.model == "weighted" and self.advective.preset != "zero":
            raise ValueError(
                f"advective={self.advective.preset!r} is not allowed with model='weighted' "
                "(the weighted model has no separate advective velocity)"
            )
        try:
            self.flow_field()
        except ConfigurationError as exc:
            raise ValueError(str(exc)) from None
        return self

    def flow_field(self):
        return FlowField(self.flow.preset, dict(self.flow.params), self.advective.preset, dict(self.advective.params))

    def resolved(self):
        return self.model_dump(mode="json")


def _format_errors(exc):
    lines = []
    for err in exc.errors():
        key = ".".join(str(p) for p in err["loc"]) or "<root>"
        value = err.get("input")
        lines.append(f"{key}: {err['msg']} (value: {value!r})")
    return "invalid configuration:\n  " + "\n  ".join(lines)


def load_config(data):
    if not isinstance(data, dict):
        raise ConfigurationError(f"configuration must be a mapping, got {type(data).__name__}")
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigurationError(_format_errors(exc)) from None


def parse_config(path):
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"configuration file not found: {path}")
    with path.open() as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigurationError(f"could not parse {path}: {exc}") from None
    return load_config(data)


def dump_config(cfg, path):
    with Path(path).open("w") as fh:
        yaml.safe_dump(cfg.resolved(), fh, sort_keys=False)


def output_directory(cfg, root: Optional[str] = None):
    """Output directory, rebased under EVOCH_OUTPUT_ROOT (or ``root``) when relative."""
    root = root if root is not None else os.environ.get("EVOCH_OUTPUT_ROOT")
    out = Path(cfg.output.directory)
    if root and not out.is_absolute():
        out = Path(root) / out
    return out
