"""Parameter-schedule presets with closed-form moduli, and brute-forced moduli.

Weights follow the power family ``alpha_n = a / (n + s)^p`` (``0 <= p <= 1``).
The two linear-rate presets use ``a = 2/(1 - alpha)``, ``s = J`` with
``J = 2 ceil(1/(1 - alpha))``; the generic preset uses ``s = 1``.

Closed-form moduli are obtained from integral comparisons and are padded by a
relative ``1e-12`` before rounding up, so float evaluation can only enlarge
them.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from .core import DomainError
from .iteration import ErrorTerms, ParamSchedule, ScheduleModuli
from .moduli import Modulus, brute_cauchy_modulus, brute_divergence_rate, brute_rate_of_convergence, recip_ceil

_PAD = 1 + 1e-12


def _up(x: float) -> int:
    return math.ceil(x * _PAD)


def linear_J(alpha: float) -> int:
    """``J = 2 ceil(1 / (1 - alpha))`` (exact for the float ``alpha``)."""
    if not 0 <= alpha < 1:
        raise DomainError("contraction constant must lie in [0, 1)")
    return 2 * recip_ceil(1 - Fraction(alpha))


# -- weights ----------------------------------------------------------------


def power_weight_moduli(a: float, s: int, p: float) -> tuple[Modulus, Modulus, Modulus | None]:
    """(sigma1, sigma2, sigma3) for ``alpha_n = a / (n + s)^p``.

    sigma1: the partial sum to ``m`` dominates ``a * integral_s^{m+s+1} x^-p dx``.
    sigma2: for decreasing weights the tail of ``sum |alpha_i - alpha_{i+1}|``
    after ``n`` is at most ``alpha_{n+1}``. sigma3 is ``None`` when ``p = 0``.
    """
    if p == 0:
        sigma1 = Modulus(lambda n: max(0, _up(n / a) - 1), f"ceil(n/{a:g})-1", monotone=True)
        return sigma1, Modulus.constant(0, "0 (constant weights)"), None
    if p == 1:
        sigma1 = Modulus(
            lambda n: max(0, _up(s * math.exp(n / a)) - s - 1),
            f"ceil({s}*exp(n/{a:g}))-{s + 1}",
            monotone=True,
        )
    else:
        q = 1 - p
        sigma1 = Modulus(
            lambda n: max(0, _up((n * q / a + s**q) ** (1 / q)) - s - 1),
            f"divergence rate of {a:g}/(n+{s})^{p:g}",
            monotone=True,
        )
    sigma2 = Modulus(
        lambda k: max(0, _up((a * (k + 1)) ** (1 / p)) - s - 1),
        f"Cauchy modulus of sum |dalpha| for {a:g}/(n+{s})^{p:g}",
        monotone=True,
    )
    sigma3 = Modulus(
        lambda k: max(0, _up((a * (k + 1)) ** (1 / p)) - s),
        f"rate alpha_n -> 0 for {a:g}/(n+{s})^{p:g}",
        monotone=True,
    )
    return sigma1, sigma2, sigma3


# -- errors -----------------------------------------------------------------


def error_moduli(errors: ErrorTerms) -> tuple[Modulus | None, Modulus | None, int | None]:
    """(theta1, theta2, E) for a closed-form error family.

    Non-summable families return ``theta1 = E = None``.
    """
    if errors.is_zero:
        z = Modulus.constant(0, "0 (no errors)")
        return z, z, 0
    if errors.kind == "inverse_square":
        c, s = errors.e_star_norm(), errors.shift
        theta1 = Modulus(lambda k: max(0, _up(c * (k + 1)) - s), f"ceil({c:g}(k+1))-{s}", monotone=True)
        theta2 = Modulus(lambda k: max(0, _up(math.sqrt(c * (k + 1))) - s), f"ceil(sqrt({c:g}(k+1)))-{s}", monotone=True)
        # sum_{n>=0} 1/(n+s)^2 < 1/(s-1) for s >= 2, and pi^2/6 < 2 for s = 1
        E = _up(c / (s - 1)) if s >= 2 else _up(2 * c)
        return theta1, theta2, E
    if errors.kind == "harmonic":
        c, s = errors.e_star_norm(), errors.shift
        theta2 = Modulus(lambda k: max(0, _up(c * (k + 1)) - s), f"ceil({c:g}(k+1))-{s}", monotone=True)
        return None, theta2, None
    c, p = errors.scale, errors.power
    if p <= 1:
        theta2 = Modulus(lambda k: max(0, _up((c * (k + 1)) ** (1 / p)) - 1), "rate ||e_n|| -> 0", monotone=True)
        return None, theta2, None
    # tail after n: sum_{i>n} c/(i+1)^p <= c (n+1)^(1-p) / (p-1)
    theta1 = Modulus(
        lambda k: max(0, _up((c * (k + 1) / (p - 1)) ** (1 / (p - 1))) - 1),
        f"Cauchy modulus of sum {c:g}/(n+1)^{p:g}",
        monotone=True,
    )
    theta2 = Modulus(lambda k: max(0, _up((c * (k + 1)) ** (1 / p)) - 1), "rate ||e_n|| -> 0", monotone=True)
    return theta1, theta2, _up(c * p / (p - 1))


# -- presets ----------------------------------------------------------------


def example1(alpha: float, lam: float = 1.0) -> ParamSchedule:
    """Constant order, no errors, ``alpha_n = 2 / ((1 - alpha)(n + J))``."""
    if lam <= 0:
        raise DomainError("lambda must be positive")
    J = linear_J(alpha)
    a = 2 / (1 - alpha)
    sigma1, sigma2, _ = power_weight_moduli(a, J, 1)
    zero = Modulus.constant(0, "0 (constant lambda)")
    theta1, theta2, E = error_moduli(ErrorTerms.zero())
    moduli = ScheduleModuli(
        sigma1=sigma1,
        sigma2=sigma2,
        sigma3=Modulus(lambda k: J * k, f"{J}k", monotone=True),
        gamma1=zero,
        gamma1_star=zero,
        gamma3=zero,
        Lambda=math.ceil(1 / lam),
        N_Lambda=0,
        theta1=theta1,
        theta2=theta2,
        E=E,
        Lambda_m=lambda m, c=math.ceil(lam): max(1, c),
    )
    return ParamSchedule(
        lambda n: 2 / ((1 - alpha) * (n + J)),
        lambda n: np.full(np.shape(n), float(lam)),
        ErrorTerms.zero(),
        moduli,
        f"example1(alpha={alpha:g}, lambda={lam:g})",
        {"preset": "example1", "alpha": alpha, "lam": lam, "J": J},
    )


def example2(alpha: float, e_star) -> ParamSchedule:
    """``lambda_n = (n+J)/(n+J-1)``, ``e_n = e_star/(n+J)^2``, same weights as :func:`example1`.

    The three lambda moduli coincide: each tail after ``n`` is at most ``1/(n+J)``.
    """
    J = linear_J(alpha)
    a = 2 / (1 - alpha)
    errors = ErrorTerms.inverse_square(e_star, J)
    sigma1, sigma2, _ = power_weight_moduli(a, J, 1)
    lam_mod = Modulus(lambda k: max(0, k + 1 - J), f"max(0, k+1-{J})", monotone=True)
    theta1, theta2, E = error_moduli(errors)
    moduli = ScheduleModuli(
        sigma1=sigma1,
        sigma2=sigma2,
        sigma3=Modulus(lambda k: J * k, f"{J}k", monotone=True),
        gamma1=lam_mod,
        gamma1_star=lam_mod,
        gamma3=lam_mod,
        Lambda=1,
        N_Lambda=0,
        theta1=theta1,
        theta2=theta2,
        E=E,
        Lambda_m=lambda m: 2,
    )
    return ParamSchedule(
        lambda n: 2 / ((1 - alpha) * (n + J)),
        lambda n: (n + J) / (n + J - 1.0),
        errors,
        moduli,
        f"example2(alpha={alpha:g}, |e*|={errors.e_star_norm():g})",
        {"preset": "example2", "alpha": alpha, "J": J, "e_star": errors.e_star},
    )


def generic(
    a: float = 0.5,
    p: float = 0.0,
    lam0: float = 1.0,
    errors: ErrorTerms | None = None,
) -> ParamSchedule:
    """``alpha_n = a/(n+1)^p``, ``lambda_n = lam0 (1 + 1/(n+2))`` and the given errors.

    ``|1 - lambda_{n+1}/lambda_n| = 1/(n+3)^2`` and
    ``|1 - lambda_n/lambda_{n+1}| = 1/((n+2)(n+4))``; both tails after ``n``
    are at most ``1/(n+3)``. The tail of ``sum |lambda_i - lambda_{i+1}|`` after
    ``n`` is ``lam0/(n+3)``.
    """
    if not 0 < a <= 1:
        raise DomainError("weight scale a must lie in (0, 1]")
    if not 0 <= p <= 1:
        raise DomainError("weight exponent p must lie in [0, 1]")
    if lam0 <= 0:
        raise DomainError("lam0 must be positive")
    errors = ErrorTerms.zero() if errors is None else errors
    sigma1, sigma2, sigma3 = power_weight_moduli(a, 1, p)
    ratio_mod = Modulus(lambda k: max(0, k - 2), "max(0, k-2)", monotone=True)
    theta1, theta2, E = error_moduli(errors)
    moduli = ScheduleModuli(
        sigma1=sigma1,
        sigma2=sigma2,
        sigma3=sigma3,
        gamma1=ratio_mod,
        gamma1_star=ratio_mod,
        gamma3=Modulus(lambda k: max(0, _up(lam0 * (k + 1)) - 3), f"ceil({lam0:g}(k+1))-3", monotone=True),
        Lambda=math.ceil(1 / lam0),
        N_Lambda=0,
        theta1=theta1,
        theta2=theta2,
        E=E,
        Lambda_m=lambda m: max(1, _up(lam0 * (m + 3) / (m + 2))),
    )
    return ParamSchedule(
        lambda n: a / (n + 1.0) ** p,
        lambda n: lam0 * (1 + 1 / (n + 2.0)),
        errors,
        moduli,
        f"generic(a={a:g}, p={p:g}, lam0={lam0:g}, errors={errors.kind})",
        {"preset": "generic", "a": a, "p": p, "lam0": lam0},
    )


def _usable(mod: Modulus) -> Modulus | None:
    # saturated already at k = 0: the window shows no evidence for the hypothesis
    return None if mod.is_saturated(0) else mod


def brute_force_moduli(sched: ParamSchedule, horizon: int, dim: int) -> ScheduleModuli:
    """Moduli read off the schedule's own values on ``0..horizon``.

    Each one is exact for the tabulated window only; indices past half the
    window count as not brute-forceable and saturate.
    """
    al = sched.alphas(horizon)
    la = sched.lambdas(horizon)
    en = np.linalg.norm(sched.errors.vectors(horizon - 1, dim), axis=1)
    tag = f" (horizon-limited, H={horizon})"
    theta1 = brute_cauchy_modulus(np.cumsum(en), label="brute theta1" + tag)
    t0 = theta1(0)
    E = math.ceil(math.fsum(en[: t0 + 1])) + 1 if t0 < len(en) else None
    Lam = math.ceil(1 / la.min())
    return ScheduleModuli(
        sigma1=_usable(brute_divergence_rate(al, "brute sigma1" + tag)),
        sigma2=_usable(brute_cauchy_modulus(np.cumsum(np.abs(np.diff(al))), label="brute sigma2" + tag)),
        sigma3=_usable(brute_rate_of_convergence(al, 0.0, label="brute sigma3" + tag)),
        gamma1=_usable(brute_cauchy_modulus(np.cumsum(np.abs(1 - la[1:] / la[:-1])), label="brute gamma1" + tag)),
        gamma1_star=_usable(brute_cauchy_modulus(np.cumsum(np.abs(1 - la[:-1] / la[1:])), label="brute gamma1*" + tag)),
        gamma3=_usable(brute_cauchy_modulus(np.cumsum(np.abs(np.diff(la))), label="brute gamma3" + tag)),
        Lambda=Lam,
        N_Lambda=0,
        theta1=_usable(theta1),
        theta2=_usable(brute_rate_of_convergence(en, 0.0, label="brute theta2" + tag)),
        E=E,
        Lambda_m=lambda m: max(1, _up(sched.lam(m))),
        horizon_limited=True,
    )
