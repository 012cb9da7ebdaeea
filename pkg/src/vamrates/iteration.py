"""The viscosity iteration with error terms, its bookkeeping sequence and checks.

The recurrence is

    x_{n+1} = alpha_n f(x_n) + (1 - alpha_n) J_{lambda_n} x_n + e_n

with a contraction ``f``, resolvents ``J`` of an m-accretive operator, weights
``alpha_n in [0, 1]``, orders ``lambda_n > 0`` and error vectors ``e_n``.
Dropping the errors gives the plain viscosity scheme; a constant ``f`` gives
the Halpern-type proximal point algorithm.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .core import TOL_FLOAT, DomainError, Verdict
from .moduli import Modulus
from .operators import ContractionMap, ResolventOperator, as_point, norm


@dataclass(frozen=True)
class ErrorTerms:
    """Closed-form families of error vectors.

    ``zero``            e_n = 0
    ``inverse_square``  e_n = e_star / (n + shift)^2
    ``harmonic``        e_n = e_star / (n + shift)      (not summable)
    ``random``          e_n = scale / (n + 1)^power * u_n, u_n seeded unit vectors
    """

    kind: str = "zero"
    e_star: tuple[float, ...] | None = None
    shift: int = 1
    scale: float = 0.0
    power: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("zero", "inverse_square", "harmonic", "random"):
            raise DomainError(f"unknown error family {self.kind!r}")
        if self.kind in ("inverse_square", "harmonic") and self.e_star is None:
            raise DomainError(f"{self.kind} errors need e_star")
        if self.kind in ("inverse_square", "harmonic") and self.shift < 1:
            raise DomainError("shift must be at least 1")

    @classmethod
    def zero(cls) -> "ErrorTerms":
        return cls()

    @classmethod
    def inverse_square(cls, e_star, shift: int) -> "ErrorTerms":
        return cls("inverse_square", tuple(float(v) for v in np.atleast_1d(e_star)), shift=int(shift))

    @classmethod
    def harmonic(cls, e_star, shift: int = 1) -> "ErrorTerms":
        return cls("harmonic", tuple(float(v) for v in np.atleast_1d(e_star)), shift=int(shift))

    @classmethod
    def random(cls, scale: float, seed: int, power: float = 2.0) -> "ErrorTerms":
        return cls("random", scale=float(scale), power=float(power), seed=int(seed))

    @property
    def is_zero(self) -> bool:
        if self.kind == "zero":
            return True
        if self.kind == "random":
            return self.scale == 0
        return not any(self.e_star)

    def vectors(self, n_max: int, dim: int) -> np.ndarray:
        """Rows ``e_0 .. e_{n_max}``, shape ``(n_max + 1, dim)``."""
        n = np.arange(n_max + 1, dtype=float)
        if self.kind == "zero":
            return np.zeros((n_max + 1, dim))
        if self.kind == "random":
            # one draw of the whole block keeps prefixes identical across horizons
            u = np.random.default_rng(self.seed).standard_normal((n_max + 1, dim))
            u /= np.linalg.norm(u, axis=1, keepdims=True)
            return (self.scale / (n + 1) ** self.power)[:, None] * u
        e = as_point(self.e_star, dim)
        if self.kind == "inverse_square":
            return e[None, :] / ((n + self.shift) ** 2)[:, None]
        return e[None, :] / (n + self.shift)[:, None]

    def e_star_norm(self) -> float:
        return norm(self.e_star) if self.e_star is not None else 0.0


@dataclass(frozen=True)
class ScheduleModuli:
    """Moduli attached to a parameter schedule, one per quantitative hypothesis.

    ``None`` means the schedule does not provide (or does not satisfy) the
    hypothesis. ``Lambda_m`` maps ``m`` to a positive natural ``>= lambda_m``.
    """

    sigma1: Modulus | None = None  # divergence rate of sum alpha_n
    sigma2: Modulus | None = None  # Cauchy modulus of sum |alpha_n - alpha_{n+1}|
    sigma3: Modulus | None = None  # rate of alpha_n -> 0
    gamma1: Modulus | None = None  # Cauchy modulus of sum |1 - lambda_{n+1}/lambda_n|
    gamma1_star: Modulus | None = None  # Cauchy modulus of sum |1 - lambda_n/lambda_{n+1}|
    gamma3: Modulus | None = None  # Cauchy modulus of sum |lambda_n - lambda_{n+1}|
    Lambda: int | None = None  # lambda_n >= 1/Lambda for n >= N_Lambda
    N_Lambda: int | None = None
    theta1: Modulus | None = None  # Cauchy modulus of sum ||e_n||
    theta2: Modulus | None = None  # rate of ||e_n|| -> 0
    E: int | None = None  # upper bound on sum ||e_n||
    Lambda_m: Callable[[int], int] | None = None
    horizon_limited: bool = False


@dataclass(frozen=True)
class ParamSchedule:
    """Weights, orders and errors given by closed-form generators.

    ``alpha_fn`` and ``lam_fn`` take an integer index array and return the
    corresponding values, so horizons can be extended freely.
    """

    alpha_fn: Callable[[np.ndarray], np.ndarray]
    lam_fn: Callable[[np.ndarray], np.ndarray]
    errors: ErrorTerms = ErrorTerms()
    moduli: ScheduleModuli | None = None
    label: str = ""
    params: dict = field(default_factory=dict, compare=False)

    def alphas(self, n_max: int) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.alpha_fn(np.arange(n_max + 1)), dtype=float), (n_max + 1,)).copy()

    def lambdas(self, n_max: int) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.lam_fn(np.arange(n_max + 1)), dtype=float), (n_max + 1,)).copy()

    def alpha(self, n: int) -> float:
        return float(self.alphas(n)[n])

    def lam(self, n: int) -> float:
        return float(self.lambdas(n)[n])

    def with_moduli(self, moduli: ScheduleModuli) -> "ParamSchedule":
        return ParamSchedule(self.alpha_fn, self.lam_fn, self.errors, moduli, self.label, self.params)

    def with_errors(self, errors: ErrorTerms) -> "ParamSchedule":
        return ParamSchedule(self.alpha_fn, self.lam_fn, errors, self.moduli, self.label, self.params)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class IterationTrace:
    """A recorded orbit ``x_0 .. x_N`` with its residuals.

    ``successive[n] = ||x_{n+1} - x_n||`` for ``n < N``;
    ``scheme[n] = ||x_n - J_{lambda_n} x_n||`` for ``n <= N``;
    ``kz`` holds ``K_{z,0..N}`` when a zero was supplied.
    """

    points: np.ndarray
    resolvents: np.ndarray
    alphas: np.ndarray
    lambdas: np.ndarray
    errors: np.ndarray
    err_norms: np.ndarray
    successive: np.ndarray
    scheme: np.ndarray
    operator: ResolventOperator
    contraction: ContractionMap
    schedule: ParamSchedule
    zero: np.ndarray | None = None
    kz: np.ndarray | None = None
    label: str = ""

    @property
    def horizon(self) -> int:
        return len(self.points) - 1

    @property
    def x0(self) -> np.ndarray:
        return self.points[0]


def run_vame(
    x0,
    op: ResolventOperator,
    f: ContractionMap,
    sched: ParamSchedule,
    n_max: int,
    z=None,
    label: str = "",
) -> IterationTrace:
    """Run the iteration for ``n_max`` steps and record the trace.

    ``z`` defaults to the operator's declared zero and is only used for the
    ``K_{z,n}`` column.
    """
    if n_max < 1:
        raise DomainError("n_max must be at least 1")
    d = op.dimension
    if f.dimension != d:
        raise DomainError(f"contraction acts on R^{f.dimension}, operator on R^{d}")
    x = as_point(x0, d).astype(float)
    alphas = sched.alphas(n_max)
    lams = sched.lambdas(n_max)
    if np.any((alphas < 0) | (alphas > 1)) or not np.all(np.isfinite(alphas)):
        raise DomainError(f"alpha_n must lie in [0, 1] (first bad n={int(np.argmax((alphas < 0) | (alphas > 1)))})")
    if np.any(~(lams > 0)) or not np.all(np.isfinite(lams)):
        raise DomainError(f"lambda_n must be positive (first bad n={int(np.argmax(~(lams > 0)))})")
    errs = sched.errors.vectors(n_max - 1, d)

    points = np.empty((n_max + 1, d))
    jpoints = np.empty((n_max + 1, d))
    oracle, apply_f = op.oracle, f.apply
    for n in range(n_max):
        jx = oracle(lams[n], x)
        points[n] = x
        jpoints[n] = jx
        a = alphas[n]
        x = a * apply_f(x) + (1 - a) * jx + errs[n]
    points[n_max] = x
    jpoints[n_max] = oracle(lams[n_max], x)
    if not np.all(np.isfinite(points)):
        raise FloatingPointError("iteration produced non-finite points")

    err_norms = np.linalg.norm(errs, axis=1)
    trace = IterationTrace(
        points=_frozen(points),
        resolvents=_frozen(jpoints),
        alphas=_frozen(alphas),
        lambdas=_frozen(lams),
        errors=_frozen(errs),
        err_norms=_frozen(err_norms),
        successive=_frozen(np.linalg.norm(points[1:] - points[:-1], axis=1)),
        scheme=_frozen(np.linalg.norm(points - jpoints, axis=1)),
        operator=op,
        contraction=f,
        schedule=sched,
        label=label,
    )
    if z is None:
        z = op.known_zero
    if z is not None:
        z = _frozen(as_point(z, d).copy())
        object.__setattr__(trace, "zero", z)
        object.__setattr__(trace, "kz", _frozen(kz_sequence(trace, z)))
    return trace


def kz_start(x0, z, f: ContractionMap) -> float:
    """``max{||x0 - z||, ||f(z) - z|| / (1 - alpha)}``."""
    if f.alpha >= 1:
        raise DomainError("contraction constant must be < 1")
    z = as_point(z, f.dimension)
    return max(norm(as_point(x0) - z), norm(f(z) - z) / (1 - f.alpha))


def kz_sequence(trace: IterationTrace, z) -> np.ndarray:
    """``K_{z,0} = max{||x0 - z||, ||f(z)-z||/(1-alpha)}``, ``K_{z,n+1} = K_{z,n} + ||e_n||``."""
    k0 = kz_start(trace.x0, z, trace.contraction)
    out = np.empty(trace.horizon + 1)
    out[0] = k0
    out[1:] = k0 + np.cumsum(trace.err_norms)
    return out


def resolvent_stack(trace: IterationTrace, lam: float) -> np.ndarray:
    """``J_lam x_n`` for every point of the trace."""
    return trace.operator(lam, trace.points)


def _first(bad: np.ndarray) -> int | None:
    idx = np.flatnonzero(bad)
    return int(idx[0]) if idx.size else None


def check_bound_lemma(
    trace: IterationTrace, z, m_samples: Iterable[int], *, tol: float = TOL_FLOAT
) -> Verdict:
    """Check the four a-priori bounds in terms of ``K_{z,n}`` along the trace.

    (1) ``||x_n - z||, ||f(x_n) - z|| <= K_{z,n}``
    (2) ``||x_{n+1} - x_n|| <= 2 K_{z,n+1}``
    (3) ``||J_{lambda_m} x_n - z|| <= K_{z,n}``
    (4) ``||J_{lambda_m} x_n - x_n||, ||J_{lambda_m} x_n - f(x_n)|| <= 2 K_{z,n}``

    Residuals are recomputed from the stored points.
    """
    z = as_point(z, trace.operator.dimension)
    X = trace.points
    K = kz_sequence(trace, z)
    FX = trace.contraction.apply(X)
    dist = lambda A, B: np.linalg.norm(A - B, axis=-1)

    n = _first(dist(X, z) > K + tol)
    if n is not None:
        return Verdict.failed(n, f"item 1: ||x_n - z|| > K_z,n at n={n}")
    n = _first(dist(FX, z) > K + tol)
    if n is not None:
        return Verdict.failed(n, f"item 1: ||f(x_n) - z|| > K_z,n at n={n}")
    n = _first(dist(X[1:], X[:-1]) > 2 * K[1:] + tol)
    if n is not None:
        return Verdict.failed(n, f"item 2: ||x_(n+1) - x_n|| > 2 K_z,(n+1) at n={n}")
    for m in m_samples:
        JX = resolvent_stack(trace, trace.schedule.lam(m))
        n = _first(dist(JX, z) > K + tol)
        if n is not None:
            return Verdict.failed(n, f"item 3: m={m}, n={n}")
        n = _first(np.maximum(dist(JX, X), dist(JX, FX)) > 2 * K + tol)
        if n is not None:
            return Verdict.failed(n, f"item 4: m={m}, n={n}")
    return Verdict.passed()


def main_inequality_terms(trace: IterationTrace, z, variant: str = "lambda_ratio", kz=None):
    """Both sides of the one-step contraction estimate, for ``n = 0 .. N-2``.

    ``kz`` overrides ``K_{z,n}`` by a constant bound (or array).
    """
    if trace.horizon < 2:
        raise DomainError("main inequality needs at least three points")
    if variant not in ("lambda_ratio", "lambda_ratio_star"):
        raise DomainError(f"unknown variant {variant!r}")
    X, a, lam, e = trace.points, trace.alphas, trace.lambdas, trace.errors
    K = kz_sequence(trace, as_point(z, trace.operator.dimension)) if kz is None else np.broadcast_to(kz, (trace.horizon + 1,))
    s = np.linalg.norm(X[1:] - X[:-1], axis=1)
    alpha = trace.contraction.alpha
    N = trace.horizon
    if variant == "lambda_ratio":
        ratio = np.abs(1 - lam[1:N] / lam[: N - 1])
    else:
        ratio = np.abs(1 - lam[: N - 1] / lam[1:N])
    M = 2 * K[: N - 1] * (np.abs(a[1:N] - a[: N - 1]) + (1 - a[1:N]) * ratio)
    lhs = s[1:]
    rhs = (1 - (1 - alpha) * a[1:N]) * s[:-1] + M + np.linalg.norm(e[1:] - e[:-1], axis=1)
    return lhs, rhs, M


def check_main_inequality(
    trace: IterationTrace, z, variant: str = "lambda_ratio", *, kz=None, tol: float = TOL_FLOAT
) -> Verdict:
    """``||x_{n+2}-x_{n+1}|| <= (1-(1-alpha)alpha_{n+1})||x_{n+1}-x_n|| + M_{z,n} + ||e_{n+1}-e_n||``.

    ``variant="lambda_ratio_star"`` uses ``|1 - lambda_n/lambda_{n+1}|`` in ``M``.
    """
    lhs, rhs, _ = main_inequality_terms(trace, z, variant, kz)
    n = _first(lhs > rhs + tol)
    if n is not None:
        return Verdict.failed(n, f"{variant}: {lhs[n]:.6g} > {rhs[n]:.6g} at n={n}")
    return Verdict.passed()


def check_kz_bounded(trace: IterationTrace, z, K_z: float, *, tol: float = TOL_FLOAT) -> Verdict:
    """``K_{z,n} <= K_z`` along the whole trace."""
    K = kz_sequence(trace, z)
    n = _first(K > K_z + tol)
    if n is not None:
        return Verdict.failed(n, f"K_z,{n} = {K[n]:.6g} > {K_z}")
    return Verdict.passed()


# -- CSV ---------------------------------------------------------------------

TRACE_COLUMNS = ("n", "alpha_n", "lambda_n", "err_norm", "succ_residual", "scheme_residual", "kz")


def _fmt(v: float) -> str:
    return repr(float(v))


def trace_rows(trace: IterationTrace) -> list[list[str]]:
    N = trace.horizon
    cols = TRACE_COLUMNS if trace.kz is not None else TRACE_COLUMNS[:-1]
    rows = [list(cols)]
    for n in range(N + 1):
        row = [
            str(n),
            _fmt(trace.alphas[n]),
            _fmt(trace.lambdas[n]),
            _fmt(trace.err_norms[n]) if n < N else "",
            _fmt(trace.successive[n]) if n < N else "",
            _fmt(trace.scheme[n]),
        ]
        if trace.kz is not None:
            row.append(_fmt(trace.kz[n]))
        rows.append(row)
    return rows


def write_trace_csv(trace: IterationTrace, path) -> None:
    """One header row, then one row per iteration ``n = 0 .. N``.

    The last row has no successive residual or error norm (they need ``x_{N+1}``
    and ``e_N``). The ``kz`` column is present only when a zero was supplied.
    """
    with open(path, "w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(trace_rows(trace))


def trace_csv_text(trace: IterationTrace) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(trace_rows(trace))
    return buf.getvalue()
