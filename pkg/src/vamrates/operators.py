"""m-accretive operators on R^d given by their resolvents, and contractions.

Points are 1-D float arrays. Every resolvent oracle also accepts a stack of
points of shape ``(..., d)`` and maps them row-wise, which is what the trace
checkers use to evaluate a resolvent along a whole orbit at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .core import TOL_FLOAT, DomainError, Verdict


def as_point(x, dim: int | None = None) -> np.ndarray:
    """Validate and convert to a finite float vector (or stack of vectors)."""
    p = np.asarray(x, dtype=float)
    if p.ndim == 0:
        p = p.reshape(1)
    if dim is not None and p.shape[-1] != dim:
        raise DomainError(f"dimension mismatch: expected {dim}, got {p.shape[-1]}")
    if not np.all(np.isfinite(p)):
        raise DomainError("point has non-finite coordinates")
    return p


def norm(x) -> float:
    return float(np.linalg.norm(x))


@dataclass(frozen=True)
class ResolventOperator:
    """An m-accretive operator ``A`` known through ``J_gamma = (Id + gamma A)^{-1}``.

    ``known_zero`` is a declared point of ``zer A`` (a fixed point of every
    resolvent). ``params`` records the construction parameters so the operator
    can be written back to a config file.
    """

    dimension: int
    oracle: Callable[[float, np.ndarray], np.ndarray]
    known_zero: np.ndarray | None = None
    label: str = ""
    params: dict = field(default_factory=dict, compare=False)

    def __call__(self, gamma: float, x) -> np.ndarray:
        return resolvent(self, gamma, x)


def resolvent(op: ResolventOperator, gamma: float, x) -> np.ndarray:
    """``J_gamma^A x`` with domain checks."""
    if not (np.isfinite(gamma) and gamma > 0):
        raise DomainError(f"resolvent order must be positive, got {gamma}")
    return op.oracle(float(gamma), as_point(x, op.dimension))


def scaled_identity(c: float, dimension: int) -> ResolventOperator:
    """``A x = c x`` with ``c >= 0``; ``J_gamma x = x / (1 + gamma c)``."""
    if c < 0:
        raise DomainError("scaled identity needs c >= 0")
    c = float(c)
    return ResolventOperator(
        dimension,
        lambda g, x: x / (1.0 + g * c),
        np.zeros(dimension),
        f"scaled_identity(c={c:g})",
        {"kind": "scaled_identity", "c": c},
    )


def linear_operator(M) -> ResolventOperator:
    """``A x = M x`` for a matrix with positive-semidefinite symmetric part.

    Each call factors ``I + gamma M`` afresh and solves for the resolvent.
    """
    M = np.array(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DomainError("matrix must be square")
    sym_min = np.linalg.eigvalsh((M + M.T) / 2).min()
    if sym_min < -1e-12 * max(1.0, np.abs(M).max()):
        raise DomainError(f"matrix is not monotone (min eigenvalue of symmetric part {sym_min:.3g})")
    M.setflags(write=False)
    d = M.shape[0]
    eye = np.eye(d)

    def oracle(g: float, x: np.ndarray) -> np.ndarray:
        flat = x.reshape(-1, d)
        y = np.linalg.solve(eye + g * M, flat.T).T
        return y.reshape(x.shape)

    return ResolventOperator(
        d, oracle, np.zeros(d), f"linear(d={d})", {"kind": "linear", "matrix": M}
    )


def box_normal_cone(lo, hi, dimension: int) -> ResolventOperator:
    """Normal cone of the box ``[lo, hi]^d``; the resolvent is the clamp."""
    lo_v = np.broadcast_to(np.asarray(lo, dtype=float), (dimension,)).copy()
    hi_v = np.broadcast_to(np.asarray(hi, dtype=float), (dimension,)).copy()
    if np.any(lo_v > hi_v):
        raise DomainError("box needs lo <= hi")
    lo_v.setflags(write=False)
    hi_v.setflags(write=False)
    return ResolventOperator(
        dimension,
        lambda g, x: np.clip(x, lo_v, hi_v),
        (lo_v + hi_v) / 2,
        f"box_normal_cone(d={dimension})",
        {"kind": "box", "lo": lo_v, "hi": hi_v},
    )


def l1_subdifferential(weight: float, dimension: int) -> ResolventOperator:
    """Subdifferential of ``weight * ||x||_1``; the resolvent soft-thresholds at ``gamma * weight``."""
    if weight < 0:
        raise DomainError("l1 weight must be nonnegative")
    w = float(weight)

    def oracle(g: float, x: np.ndarray) -> np.ndarray:
        return np.sign(x) * np.maximum(np.abs(x) - g * w, 0.0)

    return ResolventOperator(
        dimension, oracle, np.zeros(dimension), f"l1(w={w:g})", {"kind": "l1", "weight": w}
    )


def random_operator(kind: str, dimension: int, rng: np.random.Generator) -> ResolventOperator:
    """One of the four instances with randomized parameters."""
    if kind == "scaled_identity":
        return scaled_identity(rng.uniform(0.0, 2.0), dimension)
    if kind == "linear":
        B = rng.standard_normal((dimension, dimension)) / np.sqrt(dimension)
        S = rng.standard_normal((dimension, dimension)) / np.sqrt(dimension)
        return linear_operator(B @ B.T + 0.5 * (S - S.T))
    if kind == "box":
        lo = rng.uniform(-1.0, 0.0, dimension)
        return box_normal_cone(lo, lo + rng.uniform(0.1, 1.0, dimension), dimension)
    if kind == "l1":
        return l1_subdifferential(rng.uniform(0.1, 2.0), dimension)
    raise DomainError(f"unknown operator kind {kind!r}")


OPERATOR_KINDS = ("scaled_identity", "linear", "box", "l1")


# -- contractions -----------------------------------------------------------


@dataclass(frozen=True)
class ContractionMap:
    """An ``alpha``-contraction ``f`` with its certified constant ``alpha in [0, 1)``."""

    dimension: int
    apply: Callable[[np.ndarray], np.ndarray]
    alpha: float
    label: str = ""
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not 0 <= self.alpha < 1:
            raise DomainError(f"contraction constant must lie in [0, 1), got {self.alpha}")

    def __call__(self, x) -> np.ndarray:
        return self.apply(as_point(x, self.dimension))


def constant_map(u) -> ContractionMap:
    """``f(x) = u``: the anchor of the Halpern-type scheme, with ``alpha = 0``."""
    u = as_point(u).copy()
    u.setflags(write=False)
    return ContractionMap(
        len(u),
        lambda x: np.broadcast_to(u, x.shape).copy(),
        0.0,
        "constant",
        {"kind": "constant", "u": u},
    )


def affine_map(alpha: float, Q=None, b=None, *, dimension: int | None = None, factor: float | None = None) -> ContractionMap:
    """``f(x) = factor * Q x + b`` with ``Q`` orthogonal; ``factor`` defaults to ``alpha``.

    Passing a ``factor`` larger than ``alpha`` builds a map whose claimed
    constant is wrong, which the negative-control tests use.
    """
    if Q is None:
        if dimension is None:
            raise DomainError("give Q or dimension")
        Q = np.eye(dimension)
    Q = np.array(Q, dtype=float)
    d = Q.shape[0]
    if not np.allclose(Q @ Q.T, np.eye(d), atol=1e-12):
        raise DomainError("Q must be orthogonal")
    b = np.zeros(d) if b is None else as_point(b, d).copy()
    factor = alpha if factor is None else float(factor)
    Q.setflags(write=False)
    b.setflags(write=False)
    return ContractionMap(
        d,
        lambda x: factor * (x @ Q.T) + b,
        float(alpha),
        f"affine(alpha={alpha:g})",
        {"kind": "affine", "Q": Q, "b": b, "factor": factor},
    )


def random_orthogonal(dimension: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((dimension, dimension)))
    return q * np.sign(np.diag(r))


# -- checks -----------------------------------------------------------------


def check_resolvent_identity(op: ResolventOperator, lam: float, gamma: float, x) -> float:
    """``|| J_lam x - J_gamma((gamma/lam) x + (1 - gamma/lam) J_lam x) ||``.

    Evaluated in the order written; for an m-accretive operator it vanishes.
    """
    if lam <= 0 or gamma <= 0:
        raise DomainError("resolvent orders must be positive")
    x = as_point(x, op.dimension)
    j_lam = resolvent(op, lam, x)
    r = gamma / lam
    inner = r * x + (1 - r) * j_lam
    return norm(j_lam - resolvent(op, gamma, inner))


def check_resolvent_inequality(
    op: ResolventOperator, lam: float, gamma: float, x, *, tol: float = TOL_FLOAT
) -> Verdict:
    """``||J_gamma x - J_lam x|| <= |1 - gamma/lam| ||J_lam x - x||``."""
    if lam <= 0 or gamma <= 0:
        raise DomainError("resolvent orders must be positive")
    x = as_point(x, op.dimension)
    j_lam = resolvent(op, lam, x)
    lhs = norm(resolvent(op, gamma, x) - j_lam)
    rhs = abs(1 - gamma / lam) * norm(j_lam - x)
    if lhs > rhs + tol:
        return Verdict.failed(None, f"{lhs:.6g} > {rhs:.6g}")
    return Verdict.passed()


def _check_pairs(
    mapping: Callable[[np.ndarray], np.ndarray], const: float, pairs: Iterable, tol: float
) -> Verdict:
    for i, (x, y) in enumerate(pairs):
        x, y = as_point(x), as_point(y)
        lhs = norm(mapping(x) - mapping(y))
        rhs = const * norm(x - y)
        if lhs > rhs + tol:
            return Verdict.failed(i, f"pair {i}: {lhs:.6g} > {rhs:.6g}")
    return Verdict.passed()


def check_nonexpansive(
    op: ResolventOperator, gamma: float, sample_pairs: Iterable, *, tol: float = TOL_FLOAT
) -> Verdict:
    return _check_pairs(lambda p: resolvent(op, gamma, p), 1.0, sample_pairs, tol)


def check_contraction(f: ContractionMap, sample_pairs: Iterable, *, tol: float = TOL_FLOAT) -> Verdict:
    return _check_pairs(f, f.alpha, sample_pairs, tol)
