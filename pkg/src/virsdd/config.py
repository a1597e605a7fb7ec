"""Run configuration: a flat ``section.key = value`` text format.

Lines starting with ``#`` and blank lines are ignored; trailing ``# ...``
comments are allowed. Every key has a default, so an empty document is the
reference parameter set with the default pointwise delay centred at the
equilibrium and a start at the equilibrium shifted by ``init.epsilon``.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .delay import Constant, DelaySpec, PointwiseQuadratic, Reciprocal
from .errors import ConfigError, DomainError
from .history import ConstantHistory, InitialFunction
from .integrator import SimConfig
from .lyapunov import QuadratureConfig
from .model import STATE_NAMES, ModelParams

FAMILIES = ("constant", "pointwise_quadratic", "reciprocal")
INIT_KINDS = ("equilibrium", "constant", "random")


@dataclass(frozen=True)
class DelayConfig:
    family: str = "pointwise_quadratic"
    h0: float = 0.5
    a1: float = 0.01
    a2: float = 0.01
    center_T: float | None = None
    center_V: float | None = None
    etamin: float = 0.05
    hmin: float = 0.2
    hmax: float = 1.0
    cv: float = 1.0

    def build(self, params: ModelParams) -> DelaySpec:
        """Delay spec; missing centres default to the equilibrium ``(T_hat, V_hat)``."""
        if self.family == "constant":
            spec = Constant(self.h0)
        elif self.family == "reciprocal":
            spec = Reciprocal(self.hmin, self.hmax, self.cv)
        else:
            cT, cV = self.center_T, self.center_V
            if cT is None or cV is None:
                from .equilibrium import equilibrium
                eq = equilibrium(params)
                cT = eq.That if cT is None else cT
                cV = eq.Vhat if cV is None else cV
            spec = PointwiseQuadratic(self.h0, self.a1, self.a2, cT, cV, self.etamin)
        spec.validate(params.h)
        return spec


@dataclass(frozen=True)
class InitConfig:
    """``equilibrium``: ``u_hat + epsilon`` in every coordinate (constant history).
    ``constant``: the five values ``T, Tstar, V, Y, A``.
    ``random``: seeded piecewise-linear history inside the invariant box.
    """

    kind: str = "equilibrium"
    epsilon: float = 0.01
    values: tuple | None = None
    seed: int = 0
    lipschitz_cap: float = 10.0

    def build(self, params: ModelParams, seed: int | None = None) -> InitialFunction:
        if self.kind == "constant":
            return ConstantHistory(np.array(self.values, dtype=float))
        if self.kind == "random":
            from .invariants import omega_c_bounds, sample_initial_in_omega_c
            return sample_initial_in_omega_c(params, omega_c_bounds(params),
                                             self.seed if seed is None else seed, self.lipschitz_cap)
        from .equilibrium import equilibrium
        return ConstantHistory(equilibrium(params).as_array() + self.epsilon)


@dataclass(frozen=True)
class VerifyConfig:
    seeds: int = 3


@dataclass(frozen=True)
class RunConfig:
    params: ModelParams = field(default_factory=ModelParams)
    delay: DelayConfig = field(default_factory=DelayConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    init: InitConfig = field(default_factory=InitConfig)
    output_path: str | None = None
    quad: QuadratureConfig = field(default_factory=QuadratureConfig)
    verify: VerifyConfig = field(default_factory=VerifyConfig)

    def delay_spec(self) -> DelaySpec:
        return self.delay.build(self.params)

    def initial(self) -> InitialFunction:
        return self.init.build(self.params)


_MODEL_KEYS = {("lambda" if f.name == "lam" else f.name): f.name for f in fields(ModelParams)}


def _schema():
    rows = []
    defaults = RunConfig()
    for key, attr in _MODEL_KEYS.items():
        rows.append((f"model.{key}", "float", getattr(defaults.params, attr)))
    rows.append(("delay.family", "str", defaults.delay.family))
    for f in fields(DelayConfig):
        if f.name != "family":
            rows.append((f"delay.{f.name}", "float?", getattr(defaults.delay, f.name)))
    for f in fields(SimConfig):
        kind = "int" if f.name in ("fp_maxiter", "output_stride") else "float"
        rows.append((f"sim.{f.name}", kind, getattr(defaults.sim, f.name)))
    rows.append(("init.kind", "str", defaults.init.kind))
    rows.append(("init.epsilon", "float", defaults.init.epsilon))
    for name in STATE_NAMES:
        rows.append((f"init.{name}", "float?", None))
    rows.append(("init.seed", "int", defaults.init.seed))
    rows.append(("init.lipschitz_cap", "float", defaults.init.lipschitz_cap))
    rows.append(("output.path", "str?", None))
    rows.append(("quad.panels", "int", defaults.quad.panels))
    rows.append(("verify.seeds", "int", defaults.verify.seeds))
    return rows


SCHEMA = {key: (kind, default) for key, kind, default in _schema()}


def describe_keys() -> str:
    """One line per key with its default, for ``--help``."""
    out = []
    for key, (kind, default) in SCHEMA.items():
        shown = "equilibrium" if key in ("delay.center_T", "delay.center_V") else default
        out.append(f"  {key:<22} {kind:<7} default: {shown}")
    return "\n".join(out)


def _convert(key, raw, line):
    kind = SCHEMA[key][0]
    base = kind.rstrip("?")
    try:
        if base == "int":
            val = int(raw)
        elif base == "float":
            val = float(raw)
            if not math.isfinite(val):
                raise ValueError
        else:
            val = raw
    except ValueError:
        raise ConfigError(f"{key}: expected {base}, got {raw!r}", line) from None
    return val


def parse_config(text: str) -> RunConfig:
    """Parse a configuration document; see :func:`describe_keys` for the schema.

    Raises :class:`ConfigError` with the offending line number on unknown or
    duplicate keys, malformed values and constraint violations.
    """
    values = {}
    where = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'section.key = value', got {raw_line.strip()!r}", lineno)
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in values:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        values[key] = _convert(key, raw, lineno)
        where[key] = lineno
    return _build(values, where)


def _build(values, where) -> RunConfig:
    def fail(keys, exc):
        lines = [where[k] for k in keys if k in where]
        raise ConfigError(str(exc), min(lines) if lines else None) from None

    def get(key):
        return values.get(key, SCHEMA[key][1])

    model_keys = [f"model.{k}" for k in _MODEL_KEYS]
    try:
        params = ModelParams(**{attr: get(f"model.{k}") for k, attr in _MODEL_KEYS.items()})
    except DomainError as exc:
        m = re.search(r"parameter (\w+)", str(exc))
        attr = m.group(1) if m else None
        bad = [f"model.{k}" for k, a in _MODEL_KEYS.items() if a == attr]
        fail(bad or model_keys, str(exc).replace("parameter lam ", "parameter lambda "))

    family = get("delay.family")
    if family not in FAMILIES:
        fail(["delay.family"], f"delay.family must be one of {', '.join(FAMILIES)}, got {family!r}")
    delay_cfg = DelayConfig(family=family, **{f.name: get(f"delay.{f.name}")
                                              for f in fields(DelayConfig) if f.name != "family"})
    delay_keys = [k for k in values if k.startswith("delay.")]
    try:
        _check_delay(delay_cfg, params)
    except DomainError as exc:
        fail(delay_keys or ["delay.family"], exc)

    sim_keys = [k for k in values if k.startswith("sim.")]
    try:
        sim = SimConfig(**{f.name: get(f"sim.{f.name}") for f in fields(SimConfig)})
    except DomainError as exc:
        fail(sim_keys, exc)

    kind = get("init.kind")
    if kind not in INIT_KINDS:
        fail(["init.kind"], f"init.kind must be one of {', '.join(INIT_KINDS)}, got {kind!r}")
    state_keys = [f"init.{n}" for n in STATE_NAMES]
    given = [k for k in state_keys if k in values]
    if kind == "constant":
        missing = [k for k in state_keys if k not in values]
        if missing:
            fail(["init.kind"], f"init.kind = constant requires {', '.join(missing)}")
        vals = tuple(values[k] for k in state_keys)
        if any(v < 0.0 for v in vals):
            fail(given, "initial values must be >= 0")
    else:
        if given:
            fail(given, f"{given[0]} is only used with init.kind = constant")
        vals = None
    if get("init.lipschitz_cap") < 0.0:
        fail(["init.lipschitz_cap"], "init.lipschitz_cap must be >= 0")
    init = InitConfig(kind=kind, epsilon=get("init.epsilon"), values=vals, seed=get("init.seed"),
                      lipschitz_cap=get("init.lipschitz_cap"))
    try:
        quad = QuadratureConfig(get("quad.panels"))
    except DomainError as exc:
        fail(["quad.panels"], exc)
    if get("verify.seeds") < 1:
        fail(["verify.seeds"], "verify.seeds must be >= 1")
    return RunConfig(params, delay_cfg, sim, init, get("output.path"), quad, VerifyConfig(get("verify.seeds")))


def _check_delay(cfg: DelayConfig, params: ModelParams) -> None:
    # centres may be left to the equilibrium; check the rest without solving for it
    probe = cfg if cfg.family != "pointwise_quadratic" else replace(
        cfg, center_T=0.0 if cfg.center_T is None else cfg.center_T,
        center_V=0.0 if cfg.center_V is None else cfg.center_V)
    probe.build(params)


def serialize(cfg: RunConfig) -> str:
    """Inverse of :func:`parse_config`; every set key is written, floats with ``repr``."""
    lines = []
    for key, attr in _MODEL_KEYS.items():
        lines.append(f"model.{key} = {getattr(cfg.params, attr)!r}")
    lines.append(f"delay.family = {cfg.delay.family}")
    for f in fields(DelayConfig):
        if f.name != "family" and getattr(cfg.delay, f.name) is not None:
            lines.append(f"delay.{f.name} = {getattr(cfg.delay, f.name)!r}")
    for f in fields(SimConfig):
        lines.append(f"sim.{f.name} = {getattr(cfg.sim, f.name)!r}")
    lines.append(f"init.kind = {cfg.init.kind}")
    lines.append(f"init.epsilon = {cfg.init.epsilon!r}")
    if cfg.init.values is not None:
        for name, val in zip(STATE_NAMES, cfg.init.values):
            lines.append(f"init.{name} = {val!r}")
    lines.append(f"init.seed = {cfg.init.seed!r}")
    lines.append(f"init.lipschitz_cap = {cfg.init.lipschitz_cap!r}")
    if cfg.output_path is not None:
        lines.append(f"output.path = {cfg.output_path}")
    lines.append(f"quad.panels = {cfg.quad.panels!r}")
    lines.append(f"verify.seeds = {cfg.verify.seeds!r}")
    return "\n".join(lines) + "\n"


def with_override(cfg: RunConfig, key: str, value) -> RunConfig:
    """Copy of ``cfg`` with one dotted key replaced (``delay.a`` sets both curvatures)."""
    text = serialize(cfg)
    keys = ["delay.a1", "delay.a2"] if key == "delay.a" else [key]
    for k in keys:
        if k not in SCHEMA:
            raise ConfigError(f"unknown key {k!r}")
    kept = [ln for ln in text.splitlines() if ln.split("=", 1)[0].strip() not in keys]
    kept += [f"{k} = {value!r}" if not isinstance(value, str) else f"{k} = {value}" for k in keys]
    return parse_config("\n".join(kept) + "\n")
