"""Experiment configuration schema (JSON files)."""

from __future__ import annotations

import json
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .errors import ConfigError

OBSERVABLES = ("p_origin", "p_far", "msd", "distribution", "offdiag_rates")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ModelConfig(_Strict):
    kind: Literal["hypercube", "hyperlattice"]
    D: Optional[int] = Field(None, ge=1)
    d: Optional[int] = Field(None, ge=1)
    L: Optional[int] = Field(None, ge=1)
    delta0: float = 1.0


class DecoherenceConfig(_Strict):
    kind: Literal["none", "site", "qubit", "spinbath", "classical"] = "none"
    gamma: float = Field(0.0, ge=0)
    rate: Optional[float] = Field(None, gt=0)
    lam: Optional[float] = Field(None, gt=0)
    quadrature_points: int = Field(64, ge=64)


class TimeConfig(_Strict):
    t_max: float = Field(gt=0)
    num_points: int = Field(ge=2)
    grid: Literal["linear", "log"] = "linear"
    t_min: Optional[float] = Field(None, gt=0)


class IntegratorSettings(_Strict):
    method: Literal["rk45", "rk4"] = "rk45"
    abs_tol: float = Field(1e-10, gt=0)
    rel_tol: float = Field(1e-8, gt=0)
    max_step: Optional[float] = Field(None, gt=0)
    renormalize_trace: bool = False


class ExperimentConfig(_Strict):
    model: ModelConfig
    decoherence: DecoherenceConfig = DecoherenceConfig()
    time: TimeConfig
    observables: List[Literal[OBSERVABLES]] = Field(min_length=1)
    integrator: IntegratorSettings = IntegratorSettings()
    output_dir: str = "qwalk-out"


def _check_compatibility(cfg: ExperimentConfig):
    m, dec = cfg.model, cfg.decoherence
    if m.kind == "hypercube":
        if m.D is None:
            raise ConfigError("model.D", "required for a hypercube")
        if m.d is not None or m.L is not None:
            raise ConfigError("model", "d and L apply to hyperlattices only")
    else:
        if m.d is None:
            raise ConfigError("model.d", "required for a hyperlattice")
        if m.L is None:
            raise ConfigError("model.L", "required for a hyperlattice")
        if m.D is not None:
            raise ConfigError("model.D", "D applies to hypercubes only")
    if m.delta0 == 0:
        raise ConfigError("model.delta0", "hop amplitude must be non-zero")
    if dec.kind == "spinbath":
        if m.kind != "hyperlattice":
            raise ConfigError("decoherence.kind", "spinbath requires a hyperlattice model")
        if dec.lam is None or dec.lam < 10:
            raise ConfigError("decoherence.lam", "spinbath needs strong coupling, lam >= 10")
    if dec.kind == "qubit" and m.kind != "hypercube":
        raise ConfigError("decoherence.kind", "qubit dephasing requires a hypercube model")
    if dec.gamma > 0 and dec.kind not in ("site", "qubit"):
        raise ConfigError("decoherence.gamma", f"gamma is not used by decoherence kind {dec.kind!r}")
    if dec.rate is not None and dec.kind != "classical":
        raise ConfigError("decoherence.rate", "rate applies to classical walks only")
    obs = cfg.observables
    if len(set(obs)) != len(obs):
        raise ConfigError("observables", "duplicate entries")
    if "p_far" in obs and m.kind != "hypercube":
        raise ConfigError("observables", "p_far requires a hypercube model")
    if "msd" in obs and m.kind != "hyperlattice":
        raise ConfigError("observables", "msd requires a hyperlattice model")
    if "offdiag_rates" in obs and dec.kind not in ("site", "qubit"):
        raise ConfigError("observables", "offdiag_rates requires site or qubit decoherence")
    t = cfg.time
    if t.grid == "log" and t.t_min is not None and t.t_min >= t.t_max:
        raise ConfigError("time.t_min", "must be smaller than time.t_max")
    if t.grid == "linear" and t.t_min is not None:
        raise ConfigError("time.t_min", "only used with the log grid")


def parse_config(doc: dict) -> ExperimentConfig:
    """Validate a config document.

    Raises:
        ConfigError: naming the first offending field.
    """
    try:
        cfg = ExperimentConfig.model_validate(doc)
    except ValidationError as exc:
        err = exc.errors()[0]
        loc = ".".join(str(p) for p in err["loc"]) or "config"
        raise ConfigError(loc, err["msg"]) from None
    _check_compatibility(cfg)
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON: {exc}") from None
    return parse_config(doc)
