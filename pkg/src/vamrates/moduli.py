"""Moduli, real sequences and the checkers that validate one against the other.

A :class:`Modulus` is a nondecreasing map from naturals to naturals. It is the
common currency of the rate formulas: Cauchy moduli, rates of convergence,
rates of divergence and rates of asymptotic regularity all live here. Values
are Python integers (exact, no overflow); anything at or above the declared
``ceiling`` is *saturated*, which downstream code treats as "beyond every
horizon".
"""

from __future__ import annotations

import itertools
import math
import operator
import threading
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

from .core import (
    TOL_FLOAT,
    DomainError,
    HorizonExceeded,
    PreconditionViolation,
    Verdict,
)

DEFAULT_CEILING = 2**63 - 1

# Non-monotone user functions are normalized by scanning every smaller argument.
SCAN_LIMIT = 1 << 22


def ceil_ln(x) -> int:
    """Upper bound for ``ceil(ln x)``, never an underestimate.

    The float logarithm is pushed up by one ulp before the ceiling is taken,
    so ``ceil_ln(1) == 1`` rather than 0.
    """
    if x <= 0:
        raise DomainError(f"logarithm of non-positive value {x}")
    if isinstance(x, Fraction):
        val = math.log(x.numerator) - math.log(x.denominator)
    else:
        val = math.log(x)
    return math.ceil(math.nextafter(val, math.inf))


def ceil_div(num: int, den) -> int:
    """Exact ``ceil(num / den)`` for an integer numerator and float/Fraction denominator."""
    return math.ceil(Fraction(num) / Fraction(den))


def recip_ceil(one_minus_alpha) -> int:
    """Exact ``ceil(1 / (1 - alpha))`` given ``1 - alpha`` as a float or Fraction."""
    return math.ceil(1 / Fraction(one_minus_alpha))


def _to_natural(v, ceiling: int) -> int:
    if isinstance(v, (float, np.floating)):
        if math.isnan(v):
            raise ValueError("modulus evaluated to NaN")
        if math.isinf(v):
            return ceiling if v > 0 else 0
        v = math.ceil(v)
    v = operator.index(v)
    if v < 0:
        return 0
    return min(v, ceiling)


class Modulus:
    """A nondecreasing map ``k -> modulus(k)`` on the naturals.

    Parameters
    ----------
    fn : callable
        Raw map. Float outputs are rounded up, negative outputs clamp to 0.
        ``OverflowError`` raised by ``fn`` saturates the value.
    label : str
        Free-form provenance.
    monotone : bool
        Promise that ``fn`` is already nondecreasing. Otherwise the running
        maximum over ``0..k`` is taken (memoized).
    ceiling : int
        Saturation level. Arguments at or above it map to the ceiling, so
        saturation propagates through compositions.
    """

    def __init__(
        self,
        fn: Callable[[int], int],
        label: str = "",
        *,
        monotone: bool = False,
        ceiling: int = DEFAULT_CEILING,
    ):
        self.fn = fn
        self.label = label
        self.monotone = monotone
        self.ceiling = ceiling
        self._prefix: list[int] = []
        self._lock = threading.Lock()

    def _raw(self, k: int) -> int:
        try:
            v = self.fn(k)
        except OverflowError:
            return self.ceiling
        return _to_natural(v, self.ceiling)

    def __call__(self, k: int) -> int:
        k = operator.index(k)
        if k < 0:
            raise DomainError(f"modulus argument must be natural, got {k}")
        if k >= self.ceiling:
            return self.ceiling
        if self.monotone:
            return self._raw(k)
        if k >= SCAN_LIMIT:
            raise DomainError(
                f"cannot normalize {self.label or 'modulus'} at k={k}; declare it monotone"
            )
        with self._lock:
            prefix = self._prefix
            while len(prefix) <= k:
                raw = self._raw(len(prefix))
                prefix.append(max(raw, prefix[-1]) if prefix else raw)
            return prefix[k]

    def is_saturated(self, k: int) -> bool:
        return self(k) >= self.ceiling

    def values(self, k_max: int) -> list[int]:
        return [self(k) for k in range(k_max + 1)]

    def relabel(self, label: str) -> "Modulus":
        return Modulus(self, label, monotone=True, ceiling=self.ceiling)

    def __repr__(self) -> str:
        return f"Modulus({self.label!r})"

    @classmethod
    def constant(cls, c: int, label: str = "") -> "Modulus":
        c = operator.index(c)
        return cls(lambda k: c, label or f"const {c}", monotone=True)

    @classmethod
    def from_values(cls, values: Sequence[int], label: str = "") -> "Modulus":
        """Tabulated modulus; arguments past the table are saturated."""
        table = list(itertools.accumulate((operator.index(v) for v in values), max))

        def fn(k: int) -> int:
            return table[k] if k < len(table) else math.inf

        return cls(fn, label, monotone=True)


class RealSequence:
    """A real sequence presented by a term function or a finite table.

    ``horizon`` is the last valid index (``None`` means unbounded). Asking for
    a term beyond it raises :class:`HorizonExceeded`.
    """

    def __init__(
        self,
        term: Callable[[int], float] | None = None,
        description: str = "",
        *,
        values: Iterable[float] | None = None,
        horizon: int | None = None,
    ):
        if (term is None) == (values is None):
            raise ValueError("give exactly one of term or values")
        self.term = term
        self.description = description
        self._values = None
        if values is not None:
            self._values = np.asarray(values, dtype=float)
            self._values.setflags(write=False)
            horizon = len(self._values) - 1 if horizon is None else min(horizon, len(self._values) - 1)
        self.horizon = horizon

    @classmethod
    def from_array(cls, values, description: str = "") -> "RealSequence":
        return cls(values=values, description=description)

    def _guard(self, n: int) -> None:
        if self.horizon is not None and n > self.horizon:
            raise HorizonExceeded(
                f"{self.description or 'sequence'} is defined up to n={self.horizon}, asked for n={n}"
            )

    def __call__(self, n: int) -> float:
        self._guard(n)
        if self._values is not None:
            return float(self._values[n])
        return float(self.term(n))

    def array(self, n_max: int) -> np.ndarray:
        """Terms ``0..n_max`` as a float array."""
        self._guard(n_max)
        if self._values is not None:
            return self._values[: n_max + 1]
        return np.fromiter((self.term(i) for i in range(n_max + 1)), dtype=float, count=n_max + 1)

    def check_nonnegative(self, n_max: int) -> Verdict:
        arr = self.array(n_max)
        bad = np.flatnonzero(arr < 0)
        if bad.size:
            return Verdict.failed(int(bad[0]), f"term {arr[bad[0]]!r} < 0")
        return Verdict.passed()


def _as_sequence(seq) -> RealSequence:
    if isinstance(seq, RealSequence):
        return seq
    if callable(seq):
        return RealSequence(seq)
    return RealSequence.from_array(seq)


def _suffix_max(arr: np.ndarray) -> np.ndarray:
    return np.maximum.accumulate(arr[::-1])[::-1]


def _suffix_min(arr: np.ndarray) -> np.ndarray:
    return np.minimum.accumulate(arr[::-1])[::-1]


def cauchy_deviation(arr: np.ndarray) -> np.ndarray:
    """``dev[n] = max_{n <= m <= len-1} |arr[m] - arr[n]|``."""
    return np.maximum(_suffix_max(arr) - arr, arr - _suffix_min(arr))


# -- checkers ---------------------------------------------------------------


def check_rate_of_divergence(
    theta: Modulus, b, n_max: int, *, beyond: str = "raise", tol: float = TOL_FLOAT
) -> Verdict:
    """Check ``sum_{i <= theta(n)} b_i >= n`` for ``n <= n_max``.

    ``beyond="raise"`` raises :class:`HorizonExceeded` when ``theta(n)``
    indexes past the sequence; ``beyond="skip"`` leaves such ``n`` unchecked.
    """
    if n_max < 1:
        raise DomainError("n_max must be at least 1")
    b = _as_sequence(b)
    targets = []
    for n in range(n_max + 1):
        idx = theta(n)
        if b.horizon is not None and idx > b.horizon:
            if beyond == "raise":
                raise HorizonExceeded(f"theta({n}) = {idx} exceeds horizon {b.horizon}")
            break  # theta is nondecreasing, so every later n is out of range too
        targets.append((n, idx))
    if not targets:
        return Verdict.passed("nothing within horizon")
    sums = np.cumsum(b.array(max(idx for _, idx in targets)))
    for n, idx in targets:
        if sums[idx] < n - tol:
            return Verdict.failed(n, f"partial sum to theta({n})={idx} is {sums[idx]:.6g} < {n}")
    return Verdict.passed(f"checked n <= {targets[-1][0]}")


def divergence_floor_check(theta: Modulus, n_max: int) -> Verdict:
    """A divergence rate of a [0,1]-valued series is at least ``n - 2``."""
    for n in range(n_max + 1):
        if theta(n) < n - 2:
            return Verdict.failed(n, f"theta({n})={theta(n)} < {n - 2}")
    return Verdict.passed()


def _tail_check(phi: Modulus, dev: np.ndarray, k_max: int, tol: float, what: str) -> Verdict:
    n_max = len(dev) - 1
    worst = _suffix_max(dev)
    for k in range(k_max + 1):
        start = phi(k)
        if start > n_max:
            continue
        bound = 1.0 / (k + 1) + tol
        if worst[start] > bound:
            n = start + int(np.argmax(dev[start:] > bound))
            return Verdict.failed(n, f"k={k}: {what} {dev[n]:.6g} > 1/{k + 1}")
    return Verdict.passed(f"checked k <= {k_max}, n <= {n_max}")


def check_cauchy_modulus(
    phi: Modulus, a, k_max: int, n_max: int, *, tol: float = TOL_FLOAT
) -> Verdict:
    """Check ``|a(n+p) - a(n)| <= 1/(k+1)`` for ``phi(k) <= n <= n+p <= n_max``."""
    arr = _as_sequence(a).array(n_max)
    return _tail_check(phi, cauchy_deviation(arr), k_max, tol, "Cauchy deviation")


def check_rate_of_convergence(
    phi: Modulus, a, limit: float, k_max: int, n_max: int, *, tol: float = TOL_FLOAT
) -> Verdict:
    """Check ``|a(n) - limit| <= 1/(k+1)`` for ``phi(k) <= n <= n_max``."""
    arr = _as_sequence(a).array(n_max)
    return _tail_check(phi, np.abs(arr - limit), k_max, tol, "distance to limit")


# -- combinators ------------------------------------------------------------


def combine_cauchy_moduli(p: int, q: int, phi1: Modulus, phi2: Modulus) -> Modulus:
    """Cauchy modulus of ``p*a_n + q*b_n`` from moduli of ``a`` and ``b``.

    A zero coefficient drops its branch (its modulus may then be ``None``);
    ``p = q = 0`` gives the zero modulus.
    """
    if p < 0 or q < 0:
        raise DomainError("coefficients must be natural")

    def fn(k: int) -> int:
        out = 0
        if p:
            out = max(out, phi1(2 * p * (k + 1) - 1))
        if q:
            out = max(out, phi2(2 * q * (k + 1) - 1))
        return out

    name = lambda m: getattr(m, "label", "-")
    return Modulus(fn, f"combine({p}*{name(phi1)}, {q}*{name(phi2)})", monotone=True)


def xu_rate(theta: Modulus, chi: Modulus, L: int) -> Modulus:
    """Rate of convergence to 0 for ``s_{n+1} <= (1-a_n) s_n + c_n``.

    ``theta`` is a rate of divergence of ``sum a_n``, ``chi`` a Cauchy modulus
    of ``sum c_n`` and ``L`` a natural upper bound on ``s``.
    """
    L = operator.index(L)
    if L < 1:
        raise DomainError("L must be a positive natural")

    def fn(k: int) -> int:
        return theta(chi(2 * k + 1) + 1 + ceil_ln(2 * L * (k + 1))) + 1

    return Modulus(fn, f"xu(theta={theta.label}, chi={chi.label}, L={L})", monotone=True)


def check_xu_recurrence_bound(
    s, a, c, L: float, Sigma: Modulus, k_max: int, n_max: int, *, tol: float = TOL_FLOAT
) -> Verdict:
    """Re-check the recurrence hypotheses, then check ``Sigma`` as a rate ``s -> 0``.

    Raises :class:`PreconditionViolation` naming the first failing hypothesis.
    """
    s_arr = _as_sequence(s).array(n_max)
    a_arr = _as_sequence(a).array(n_max)
    c_arr = _as_sequence(c).array(n_max)
    for tag, bad in (
        ("a in [0,1]", (a_arr < 0) | (a_arr > 1)),
        ("c >= 0", c_arr < 0),
        ("s >= 0", s_arr < 0),
        ("s <= L", s_arr > L + tol),
    ):
        idx = np.flatnonzero(bad)
        if idx.size:
            raise PreconditionViolation(tag, int(idx[0]))
    rhs = (1 - a_arr[:-1]) * s_arr[:-1] + c_arr[:-1]
    idx = np.flatnonzero(s_arr[1:] > rhs + tol)
    if idx.size:
        raise PreconditionViolation("recurrence", int(idx[0]), "s_{n+1} > (1-a_n)s_n + c_n")
    return check_rate_of_convergence(Sigma, s_arr, 0.0, k_max, n_max, tol=tol)


def sabach_shtern_bound(L: float, J: int, n: int, gamma: float) -> float:
    """``J L / (gamma (n + J))``."""
    if not 0 < gamma <= 1:
        raise DomainError(f"gamma must lie in (0, 1], got {gamma}")
    if J < 2:
        raise DomainError(f"J must be at least 2, got {J}")
    if L <= 0:
        raise DomainError(f"L must be positive, got {L}")
    return J * L / (gamma * (n + J))


def check_sabach_shtern(
    s,
    c,
    L: float,
    N: int,
    J: int,
    gamma: float,
    n_max: int,
    *,
    tol: float = TOL_FLOAT,
    check_preconditions: bool = True,
) -> Verdict:
    """Check ``s_n <= J L / (gamma (n+J))`` after re-checking the lemma's hypotheses.

    The weights are ``a_n = N / (gamma (n + J))``. With ``check_preconditions``
    a failing hypothesis raises :class:`PreconditionViolation`; without it only
    the bound itself is compared.
    """
    if not J >= N >= 2:
        raise PreconditionViolation("J >= N >= 2", None, f"J={J}, N={N}")
    if not 0 < gamma <= 1:
        raise PreconditionViolation("gamma in (0,1]", None, f"gamma={gamma}")
    s_arr = _as_sequence(s).array(n_max)
    n = np.arange(n_max + 1)
    if check_preconditions:
        c_arr = _as_sequence(c).array(n_max)
        if s_arr[0] > L + tol:
            raise PreconditionViolation("s_0 <= L", 0)
        for tag, bad in (("s >= 0", s_arr < 0), ("c <= L", c_arr > L + tol)):
            idx = np.flatnonzero(bad)
            if idx.size:
                raise PreconditionViolation(tag, int(idx[0]))
        a = N / (gamma * (n + J))
        rhs = (1 - gamma * a[1:]) * s_arr[:-1] + (a[:-1] - a[1:]) * c_arr[:-1]
        idx = np.flatnonzero(s_arr[1:] > rhs + tol)
        if idx.size:
            raise PreconditionViolation(
                "recurrence", int(idx[0]), "s_{n+1} > (1 - gamma a_{n+1}) s_n + (a_n - a_{n+1}) c_n"
            )
    bound = J * L / (gamma * (n + J))
    idx = np.flatnonzero(s_arr > bound + tol)
    if idx.size:
        i = int(idx[0])
        return Verdict.failed(i, f"s_{i}={s_arr[i]:.6g} > bound {bound[i]:.6g}")
    return Verdict.passed()


# -- brute-force moduli -----------------------------------------------------


def brute_divergence_rate(b_values, label: str = "") -> Modulus:
    """Least index whose partial sum reaches ``n``; saturated past the table."""
    sums = np.cumsum(np.asarray(b_values, dtype=float))
    H = len(sums)

    def fn(n: int):
        idx = int(np.searchsorted(sums, n, side="left"))
        return idx if idx < H else math.inf

    return Modulus(fn, label or f"brute divergence rate (H={H - 1})", monotone=True)


def _first_below(worst: np.ndarray, usable: int, label: str) -> Modulus:
    # worst is nonincreasing: searchsorted on its negation finds the first index <= bound
    neg = -worst

    def fn(k: int):
        idx = int(np.searchsorted(neg, -1.0 / (k + 1), side="left"))
        return idx if idx <= usable else math.inf

    return Modulus(fn, label, monotone=True)


def brute_cauchy_modulus(values, *, usable: int | None = None, label: str = "") -> Modulus:
    """Smallest index from which the table's Cauchy deviation stays below ``1/(k+1)``.

    Indices above ``usable`` (default: half the table) count as not
    brute-forceable and saturate.
    """
    arr = np.asarray(values, dtype=float)
    H = len(arr) - 1
    usable = H // 2 if usable is None else usable
    worst = _suffix_max(cauchy_deviation(arr))
    return _first_below(worst, usable, label or f"brute Cauchy modulus (horizon-limited, H={H})")


def brute_rate_of_convergence(
    values, limit: float = 0.0, *, usable: int | None = None, label: str = ""
) -> Modulus:
    """Smallest index from which ``|a_n - limit|`` stays below ``1/(k+1)`` on the table."""
    arr = np.asarray(values, dtype=float)
    H = len(arr) - 1
    usable = H // 2 if usable is None else usable
    worst = _suffix_max(np.abs(arr - limit))
    return _first_below(worst, usable, label or f"brute rate of convergence (horizon-limited, H={H})")
