"""Experiment configuration files.

A config is an INI file with four sections::

    [operator]      kind, dimension and kind-specific parameters
    [contraction]   kind (affine | constant), alpha, b / u, orthogonal
    [schedule]      preset (example1 | example2 | generic | custom) and its parameters
    [run]           x0, z, horizon, k_max, seed, m, output_dir, shrink

Vectors are comma-separated; matrix rows are separated by ``;``. Custom
schedules give ``alpha_n`` and ``lambda_n`` as expressions in ``n`` and moduli
as expressions in ``k`` (``Lambda_m`` in ``m``), using ``+ - * / // % **``,
``ceil floor sqrt exp log min max abs`` and the constants ``pi`` and ``e``.
"""

from __future__ import annotations

import ast
import configparser
import io
import math
import operator as op_
from dataclasses import dataclass, field, fields, replace
from typing import Any, Callable

import numpy as np

from .core import DomainError
from .iteration import ErrorTerms, ParamSchedule, ScheduleModuli
from .moduli import Modulus
from .operators import (
    ContractionMap,
    ResolventOperator,
    affine_map,
    box_normal_cone,
    constant_map,
    l1_subdifferential,
    linear_operator,
    random_operator,
    random_orthogonal,
    scaled_identity,
)
from .schedules import brute_force_moduli, error_moduli, example1, example2, generic


class ConfigError(ValueError):
    """A config file is malformed or describes an invalid experiment."""

    def __init__(self, where: str, msg: str):
        self.where = where
        super().__init__(f"[{where}] {msg}")


# -- expressions ------------------------------------------------------------

def _pow(a, b):
    # exact integer powers beyond a few thousand bits only ever saturate a modulus
    if isinstance(a, int) and isinstance(b, int) and abs(a) > 1 and b > 0 and b * math.log2(abs(a)) > 4096:
        return math.inf if a > 0 or b % 2 == 0 else -math.inf
    return op_.pow(a, b)


_BINOPS = {
    ast.Add: op_.add,
    ast.Sub: op_.sub,
    ast.Mult: op_.mul,
    ast.Div: op_.truediv,
    ast.FloorDiv: op_.floordiv,
    ast.Mod: op_.mod,
    ast.Pow: _pow,
}
_UNARY = {ast.USub: op_.neg, ast.UAdd: op_.pos}
_FUNCS = {
    "ceil": np.ceil,
    "floor": np.floor,
    "sqrt": np.sqrt,
    "exp": np.exp,
    "log": np.log,
    "min": np.minimum,
    "max": np.maximum,
    "abs": np.abs,
}
_CONSTS = {"pi": math.pi, "e": math.e}


def compile_expression(text: str, variable: str) -> Callable:
    """Compile an arithmetic expression in one variable into a function.

    Only numbers, the variable, the whitelisted functions and constants and
    arithmetic operators are accepted.
    """
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise ValueError(f"cannot parse expression {text!r}: {exc.msg}") from None

    def ev(node, x):
        if isinstance(node, ast.Expression):
            return ev(node.body, x)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            return node.value
        if isinstance(node, ast.Name):
            if node.id == variable:
                return x
            if node.id in _CONSTS:
                return _CONSTS[node.id]
            raise ValueError(f"unknown name {node.id!r} in {text!r} (variable is {variable!r})")
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left, x), ev(node.right, x))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
            return _UNARY[type(node.op)](ev(node.operand, x))
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS and not node.keywords:
            args = [ev(a, x) for a in node.args]
            fn = _FUNCS[node.func.id]
            if node.func.id in ("min", "max"):
                out = args[0]
                for a in args[1:]:
                    out = fn(out, a)
                return out
            return fn(*args)
        raise ValueError(f"unsupported syntax in {text!r}")

    ev(tree, 1)  # validate eagerly

    def f(x):
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            return ev(tree, x)

    return f


def _modulus_from_expression(text: str, name: str) -> Modulus:
    fn = compile_expression(text, "k")

    def raw(k: int):
        v = fn(k)
        return float(v) if isinstance(v, (np.floating, float)) else v

    return Modulus(raw, f"{name}(k) = {text}")


# -- value codecs -----------------------------------------------------------


def _vec(s: str) -> tuple[float, ...]:
    return tuple(float(v) for v in s.replace(",", " ").split())


def _vec_fmt(v) -> str:
    return ", ".join(repr(float(x)) for x in v)


def _matrix(s: str) -> tuple[tuple[float, ...], ...]:
    return tuple(_vec(row) for row in s.split(";") if row.strip())


def _matrix_fmt(m) -> str:
    return "; ".join(_vec_fmt(r) for r in m)


def _bool(s: str) -> bool:
    low = s.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _ints(s: str) -> tuple[int, ...]:
    return tuple(int(v) for v in s.replace(",", " ").split())


def _ints_fmt(v) -> str:
    return ", ".join(str(x) for x in v)


_CODECS: dict[str, tuple[Callable[[str], Any], Callable[[Any], str]]] = {
    "str": (str.strip, str),
    "int": (int, str),
    "float": (float, repr),
    "vec": (_vec, _vec_fmt),
    "matrix": (_matrix, _matrix_fmt),
    "bool": (_bool, lambda b: "true" if b else "false"),
    "ints": (_ints, _ints_fmt),
}


def _f(codec: str, default=None):
    return field(default=default, metadata={"codec": codec})


@dataclass(frozen=True)
class OperatorSpec:
    kind: str = _f("str", "scaled_identity")
    dimension: int = _f("int", 1)
    c: float | None = _f("float")
    matrix: tuple | None = _f("matrix")
    lo: tuple | None = _f("vec")
    hi: tuple | None = _f("vec")
    weight: float | None = _f("float")


@dataclass(frozen=True)
class ContractionSpec:
    kind: str = _f("str", "affine")
    alpha: float = _f("float", 0.5)
    orthogonal: str = _f("str", "identity")
    b: tuple | None = _f("vec")
    u: tuple | None = _f("vec")


_MODULUS_KEYS = ("sigma1", "sigma2", "sigma3", "gamma1", "gamma1_star", "gamma3", "theta1", "theta2")


@dataclass(frozen=True)
class ScheduleSpec:
    preset: str = _f("str", "example1")
    lam: float | None = _f("float")
    e_star: tuple | None = _f("vec")
    a: float | None = _f("float")
    p: float | None = _f("float")
    lam0: float | None = _f("float")
    errors: str | None = _f("str")
    error_e_star: tuple | None = _f("vec")
    error_shift: int | None = _f("int")
    error_scale: float | None = _f("float")
    error_power: float | None = _f("float")
    alpha_n: str | None = _f("str")
    lambda_n: str | None = _f("str")
    sigma1: str | None = _f("str")
    sigma2: str | None = _f("str")
    sigma3: str | None = _f("str")
    gamma1: str | None = _f("str")
    gamma1_star: str | None = _f("str")
    gamma3: str | None = _f("str")
    theta1: str | None = _f("str")
    theta2: str | None = _f("str")
    Lambda: int | None = _f("int")
    N_Lambda: int | None = _f("int")
    E: int | None = _f("int")
    Lambda_m: str | None = _f("str")
    brute_force: bool = _f("bool", False)


@dataclass(frozen=True)
class RunSpec:
    x0: tuple | None = _f("vec")
    z: tuple | None = _f("vec")
    horizon: int = _f("int", 1000)
    k_max: int = _f("int", 20)
    seed: int = _f("int", 0)
    m: tuple = _f("ints", (0, 1))
    output_dir: str = _f("str", "out")
    shrink: int = _f("int", 0)


# INI keys that differ from the field names
_KEY_ALIASES = {"lam": "lambda"}

SECTIONS = (("operator", OperatorSpec), ("contraction", ContractionSpec), ("schedule", ScheduleSpec), ("run", RunSpec))


@dataclass(frozen=True)
class ExperimentConfig:
    operator: OperatorSpec = field(default_factory=OperatorSpec)
    contraction: ContractionSpec = field(default_factory=ContractionSpec)
    schedule: ScheduleSpec = field(default_factory=ScheduleSpec)
    run: RunSpec = field(default_factory=RunSpec)

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        for name, cls in SECTIONS:
            spec = getattr(self, name)
            cp.add_section(name)
            for fl in fields(cls):
                v = getattr(spec, fl.name)
                if v is None:
                    continue
                cp.set(name, _KEY_ALIASES.get(fl.name, fl.name), _CODECS[fl.metadata["codec"]][1](v))
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    def with_overrides(self, *, seed: int | None = None, output_dir: str | None = None) -> "ExperimentConfig":
        run = self.run
        if seed is not None:
            run = replace(run, seed=seed)
        if output_dir is not None:
            run = replace(run, output_dir=output_dir)
        return replace(self, run=run)


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate config text; raises :class:`ConfigError` with the offending key."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("file", str(exc).splitlines()[0]) from None
    known = {name for name, _ in SECTIONS}
    for sec in cp.sections():
        if sec not in known:
            raise ConfigError(sec, "unknown section")
    parts = {}
    for name, cls in SECTIONS:
        by_key = {_KEY_ALIASES.get(fl.name, fl.name): fl for fl in fields(cls)}
        kwargs = {}
        if cp.has_section(name):
            for key, raw in cp.items(name):
                fl = by_key.get(key)
                if fl is None:
                    raise ConfigError(f"{name}.{key}", "unknown key")
                try:
                    kwargs[fl.name] = _CODECS[fl.metadata["codec"]][0](raw)
                except ValueError as exc:
                    raise ConfigError(f"{name}.{key}", f"bad value {raw!r}: {exc}") from None
        parts[name] = cls(**kwargs)
    cfg = ExperimentConfig(**parts)
    validate(cfg)
    return cfg


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(fh.read())


# -- building ----------------------------------------------------------------


def validate(cfg: ExperimentConfig) -> None:
    """Static checks plus a scan of the schedule over the horizon."""
    r = cfg.run
    if r.horizon < 10:
        raise ConfigError("run.horizon", "horizon must be at least 10")
    if r.k_max < 0:
        raise ConfigError("run.k_max", "k_max must be natural")
    if any(m < 0 for m in r.m):
        raise ConfigError("run.m", "m values must be natural")
    if r.shrink < 0:
        raise ConfigError("run.shrink", "shrink must be natural")
    if cfg.operator.dimension < 1:
        raise ConfigError("operator.dimension", "dimension must be positive")
    f = build_contraction(cfg)
    sched = build_schedule(cfg, f)
    al = sched.alphas(r.horizon)
    la = sched.lambdas(r.horizon)
    bad = np.flatnonzero(~((al >= 0) & (al <= 1)))
    if bad.size:
        raise ConfigError("schedule.alpha_n", f"alpha_n must lie in [0, 1]; fails at n={bad[0]} ({al[bad[0]]!r})")
    bad = np.flatnonzero(~(la > 0) | ~np.isfinite(la))
    if bad.size:
        raise ConfigError("schedule.lambda_n", f"lambda_n must be positive; fails at n={bad[0]} ({la[bad[0]]!r})")
    op = build_operator(cfg)
    if r.z is not None and len(r.z) == cfg.operator.dimension:
        z = np.array(r.z, dtype=float)
        if np.linalg.norm(op(1.0, z) - z) > 1e-9:
            raise ConfigError("run.z", "z is not a zero of the operator (J_1 z != z)")
    for key in ("x0", "z"):
        v = getattr(r, key)
        if v is not None and len(v) != cfg.operator.dimension:
            raise ConfigError(f"run.{key}", f"expected {cfg.operator.dimension} coordinates, got {len(v)}")


def _rng(cfg: ExperimentConfig, stream: int) -> np.random.Generator:
    return np.random.default_rng([cfg.run.seed, stream])


def build_operator(cfg: ExperimentConfig) -> ResolventOperator:
    o = cfg.operator
    d = o.dimension
    try:
        if o.kind == "scaled_identity":
            return scaled_identity(1.0 if o.c is None else o.c, d)
        if o.kind == "linear":
            if o.matrix is None:
                return random_operator("linear", d, _rng(cfg, 1))
            return linear_operator(np.array(o.matrix))
        if o.kind == "box":
            return box_normal_cone(-1.0 if o.lo is None else o.lo, 1.0 if o.hi is None else o.hi, d)
        if o.kind == "l1":
            return l1_subdifferential(1.0 if o.weight is None else o.weight, d)
    except (DomainError, ValueError) as exc:
        raise ConfigError("operator", str(exc)) from None
    raise ConfigError("operator.kind", f"unknown operator kind {o.kind!r}")


def build_contraction(cfg: ExperimentConfig) -> ContractionMap:
    c = cfg.contraction
    d = cfg.operator.dimension
    try:
        if c.kind == "constant":
            return constant_map(np.zeros(d) if c.u is None else c.u)
        if c.kind == "affine":
            if c.orthogonal == "identity":
                Q = np.eye(d)
            elif c.orthogonal == "random":
                Q = random_orthogonal(d, _rng(cfg, 2))
            else:
                raise ConfigError("contraction.orthogonal", "expected identity or random")
            return affine_map(c.alpha, Q, np.zeros(d) if c.b is None else c.b)
    except DomainError as exc:
        raise ConfigError("contraction", str(exc)) from None
    raise ConfigError("contraction.kind", f"unknown contraction kind {c.kind!r}")


def _errors(s: ScheduleSpec, seed: int) -> ErrorTerms:
    kind = s.errors or "zero"
    try:
        if kind == "zero":
            return ErrorTerms.zero()
        if kind in ("inverse_square", "harmonic"):
            if s.error_e_star is None:
                raise ConfigError("schedule.error_e_star", f"{kind} errors need error_e_star")
            shift = 1 if s.error_shift is None else s.error_shift
            return getattr(ErrorTerms, kind)(s.error_e_star, shift)
        if kind == "random":
            return ErrorTerms.random(
                0.5 if s.error_scale is None else s.error_scale, seed, 2.0 if s.error_power is None else s.error_power
            )
    except DomainError as exc:
        raise ConfigError("schedule.errors", str(exc)) from None
    raise ConfigError("schedule.errors", f"unknown error family {kind!r}")


def _custom_moduli(s: ScheduleSpec, errors: ErrorTerms) -> ScheduleModuli | None:
    given = {k: getattr(s, k) for k in _MODULUS_KEYS if getattr(s, k) is not None}
    if not given and s.Lambda is None and s.E is None:
        return None
    mods = {}
    for key, text in given.items():
        try:
            mods[key] = _modulus_from_expression(text, key)
        except ValueError as exc:
            raise ConfigError(f"schedule.{key}", str(exc)) from None
    if errors.kind != "random" or errors.power > 1:
        theta1, theta2, E = error_moduli(errors)
        mods.setdefault("theta1", theta1)
        mods.setdefault("theta2", theta2)
    else:
        E = None
    lam_m = None
    if s.Lambda_m is not None:
        try:
            fn = compile_expression(s.Lambda_m, "m")
        except ValueError as exc:
            raise ConfigError("schedule.Lambda_m", str(exc)) from None
        lam_m = lambda m: max(1, math.ceil(float(fn(m))))
    return ScheduleModuli(
        **mods,
        Lambda=s.Lambda,
        N_Lambda=0 if s.N_Lambda is None and s.Lambda is not None else s.N_Lambda,
        E=s.E if s.E is not None else E,
        Lambda_m=lam_m,
    )


def build_schedule(cfg: ExperimentConfig, f: ContractionMap | None = None) -> ParamSchedule:
    s = cfg.schedule
    f = build_contraction(cfg) if f is None else f
    d = cfg.operator.dimension
    try:
        if s.preset == "example1":
            return example1(f.alpha, 1.0 if s.lam is None else s.lam)
        if s.preset == "example2":
            e_star = np.zeros(d) if s.e_star is None else np.array(s.e_star)
            if len(e_star) != d:
                raise ConfigError("schedule.e_star", f"expected {d} coordinates")
            return example2(f.alpha, e_star)
        if s.preset == "generic":
            return generic(
                0.5 if s.a is None else s.a,
                0.0 if s.p is None else s.p,
                1.0 if s.lam0 is None else s.lam0,
                _errors(s, cfg.run.seed),
            )
    except DomainError as exc:
        raise ConfigError("schedule", str(exc)) from None
    if s.preset != "custom":
        raise ConfigError("schedule.preset", f"unknown preset {s.preset!r}")
    if s.alpha_n is None or s.lambda_n is None:
        raise ConfigError("schedule", "custom schedules need alpha_n and lambda_n")
    try:
        a_fn = compile_expression(s.alpha_n, "n")
        l_fn = compile_expression(s.lambda_n, "n")
    except ValueError as exc:
        raise ConfigError("schedule", str(exc)) from None
    errors = _errors(s, cfg.run.seed)
    return ParamSchedule(
        lambda n: np.asarray(a_fn(np.asarray(n, dtype=float)), dtype=float),
        lambda n: np.asarray(l_fn(np.asarray(n, dtype=float)), dtype=float),
        errors,
        _custom_moduli(s, errors),
        f"custom(alpha_n={s.alpha_n}, lambda_n={s.lambda_n}, errors={errors.kind})",
        {"preset": "custom"},
    )


def schedule_with_moduli(cfg: ExperimentConfig, sched: ParamSchedule) -> ParamSchedule:
    """Fill missing moduli by brute force over the horizon when the config allows it."""
    if not cfg.schedule.brute_force:
        return sched
    brute = brute_force_moduli(sched, cfg.run.horizon, cfg.operator.dimension)
    if sched.moduli is None:
        return sched.with_moduli(brute)
    merged = {
        fl.name: getattr(sched.moduli, fl.name) if getattr(sched.moduli, fl.name) is not None else getattr(brute, fl.name)
        for fl in fields(ScheduleModuli)
        if fl.name != "horizon_limited"
    }
    return sched.with_moduli(ScheduleModuli(**merged, horizon_limited=True))


def start_point(cfg: ExperimentConfig, op: ResolventOperator) -> tuple[np.ndarray, np.ndarray]:
    """``(x0, z)``: configured values, else a seeded draw and the operator's declared zero."""
    d = cfg.operator.dimension
    z = op.known_zero if cfg.run.z is None else np.array(cfg.run.z, dtype=float)
    if z is None:
        raise ConfigError("run.z", "operator has no declared zero; give z")
    x0 = 2 * _rng(cfg, 3).standard_normal(d) if cfg.run.x0 is None else np.array(cfg.run.x0, dtype=float)
    return x0, z


__all__ = [
    "ConfigError",
    "ContractionSpec",
    "ExperimentConfig",
    "OperatorSpec",
    "RunSpec",
    "ScheduleSpec",
    "build_contraction",
    "build_operator",
    "build_schedule",
    "compile_expression",
    "load_config",
    "parse_config",
    "schedule_with_moduli",
    "start_point",
]
