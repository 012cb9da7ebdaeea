"""Explicit rate certificates for the viscosity iteration and its specializations.

Every constructor returns a :class:`RateCertificate`: a modulus, the residual
it bounds and a record of the hypotheses it was built from. The record maps a
hypothesis tag to its witness (a modulus, a number or a parent certificate),
which is what :func:`vamrates.verify.certify` re-checks on a trace.

Hypothesis tags
---------------
``H1alpha`` sigma1 divergence rate of sum alpha_n
``H2alpha`` sigma2 Cauchy modulus of sum |alpha_n - alpha_{n+1}|
``H3alpha`` sigma3 rate of alpha_n -> 0
``H1lambda`` / ``H1lambda*`` gamma1 / gamma1* Cauchy moduli of the lambda ratio series
``H2lambda`` (Lambda, N_Lambda) with lambda_n >= 1/Lambda for n >= N_Lambda
``H3lambda`` gamma3 Cauchy modulus of sum |lambda_n - lambda_{n+1}|
``H1e`` / ``H2e`` / ``H3e`` theta1, theta2, E for the error norms
``Lambda_m`` (m, Lambda_m) with Lambda_m >= lambda_m
``e=0`` exact scheme
``Kz`` (rule, K) where rule is ``eq10``, ``vam``, ``example2`` or ``bound``
``example1`` / ``example2`` the closed-form schedules the linear rates need
``rate:<name>`` the parent certificate must itself be valid
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable

import numpy as np

from .core import DomainError
from .moduli import Modulus, ceil_div, ceil_ln, recip_ceil
from .operators import ContractionMap, as_point, norm

RESIDUAL_KINDS = ("successive", "scheme", "fixed_m")


@dataclass(frozen=True)
class RateCertificate:
    """A named modulus together with the residual it bounds and its provenance.

    ``residual_kind`` is ``successive`` (``||x_{n+1} - x_n||``), ``scheme``
    (``||x_n - J_{lambda_n} x_n||``) or ``fixed_m`` (``||x_n - J_{lambda_m} x_n||``).
    """

    name: str
    modulus: Modulus
    residual_kind: str
    provenance: str
    m: int | None = None
    witnesses: dict = field(default_factory=dict, compare=False)
    inputs: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.residual_kind not in RESIDUAL_KINDS:
            raise DomainError(f"unknown residual kind {self.residual_kind!r}")
        if (self.residual_kind == "fixed_m") != (self.m is not None):
            raise DomainError("m is required exactly for the fixed_m kind")
        if not self.provenance:
            raise DomainError("provenance must be nonempty")

    @property
    def preconditions(self) -> tuple[str, ...]:
        return tuple(self.witnesses)

    @property
    def kind_label(self) -> str:
        return f"fixed_m({self.m})" if self.residual_kind == "fixed_m" else self.residual_kind

    def __call__(self, k: int) -> int:
        return self.modulus(k)

    def for_m(self, m: int) -> "RateCertificate":
        """The same modulus read as a rate for ``J_{lambda_m}`` (needs a fixed_m certificate)."""
        if self.residual_kind != "fixed_m":
            raise DomainError("only fixed_m certificates can be re-targeted")
        w = dict(self.witnesses)
        if "Lambda_m" in w:
            raise DomainError("certificate depends on Lambda_m; rebuild it for the new m")
        return replace(self, m=int(m), name=_with_m(self.name, m), witnesses=w)

    def as_fixed_m(self, m: int) -> "RateCertificate":
        """Read a scheme certificate as a fixed_m one (valid when lambda is constant)."""
        if self.residual_kind != "scheme":
            raise DomainError("only scheme certificates can be read as fixed_m")
        return replace(self, residual_kind="fixed_m", m=int(m), name=_with_m(self.name, m))


def _with_m(name: str, m: int) -> str:
    base = name.split("[m=")[0]
    return f"{base}[m={m}]"


@dataclass(frozen=True)
class LinearRateParams:
    """Constants of the two closed-form schedules: ``J = 2c`` with ``c = ceil(1/(1-alpha))``."""

    alpha: float
    c: int
    J: int

    @classmethod
    def from_alpha(cls, alpha: float) -> "LinearRateParams":
        if not 0 <= alpha < 1:
            raise DomainError("contraction constant must lie in [0, 1)")
        c = recip_ceil(1 - Fraction(alpha))
        return cls(float(alpha), c, 2 * c)


def _nat(x, name: str) -> int:
    if isinstance(x, bool) or int(x) != x or x < 0:
        raise DomainError(f"{name} must be a natural number, got {x!r}")
    return int(x)


def _pos(x, name: str) -> int:
    v = _nat(x, name)
    if v < 1:
        raise DomainError(f"{name} must be positive, got {x!r}")
    return v


def _alpha(alpha: float) -> Fraction:
    if not 0 <= alpha < 1:
        raise DomainError(f"contraction constant must lie in [0, 1), got {alpha}")
    return 1 - Fraction(alpha)


# -- K_z and derived hypotheses ---------------------------------------------


def err_sum_head(theta1: Modulus, err_norms) -> int:
    """``ceil(sum_{i <= theta1(0)} ||e_i||)``; ``err_norms`` is an array or ``n -> norm`` map."""
    t0 = theta1(0)
    if callable(err_norms):
        vals = [float(err_norms(i)) for i in range(t0 + 1)]
    else:
        arr = np.asarray(err_norms, dtype=float)
        if t0 >= len(arr):
            raise DomainError(f"theta1(0) = {t0} lies beyond the {len(arr)} supplied error norms")
        vals = arr[: t0 + 1]
    return math.ceil(math.fsum(vals))


def kz_bound(x0, z, f: ContractionMap, err_sum_head: int = 0, mode: str = "vame", *, inexact: bool = False) -> int:
    """Least positive natural admissible as ``K_z`` for the given scheme.

    ``vame``: ``max{||x0-z||, ||f(z)-z||/(1-alpha)} + head + 1``;
    ``vam``: ``max{||x0-z||, ||f(z)-z||/(1-alpha)}``;
    ``hppa``: ``max{||x0-z||, ||u-z||}`` for the constant map ``u``, plus
    ``head + 1`` when ``inexact``.
    """
    z = as_point(z, f.dimension)
    if mode == "hppa":
        if f.alpha != 0:
            raise DomainError("hppa needs the constant map (alpha = 0)")
        base = max(norm(as_point(x0) - z), norm(f(z) - z))
        extra = err_sum_head + 1 if inexact else 0
    elif mode in ("vame", "vam"):
        base = max(norm(as_point(x0) - z), norm(f(z) - z) / (1 - f.alpha))
        extra = err_sum_head + 1 if mode == "vame" else 0
    else:
        raise DomainError(f"unknown mode {mode!r}")
    return max(1, math.ceil(base) + extra)


def derive_error_moduli(theta1: Modulus, err_norms) -> tuple[Modulus, int]:
    """``theta2(k) = theta1(k) + 1`` and ``E = ceil(sum_{i <= theta1(0)} ||e_i||) + 1``."""
    theta2 = Modulus(lambda k: theta1(k) + 1, f"{theta1.label}+1", monotone=True)
    return theta2, err_sum_head(theta1, err_norms) + 1


def derive_gamma1(gamma3: Modulus, Lambda: int, N_Lambda: int) -> Modulus:
    """``k -> max{N_Lambda, gamma3(Lambda (k+1) - 1)}``, serving as gamma1 and gamma1*."""
    Lambda = _pos(Lambda, "Lambda")
    N_Lambda = _nat(N_Lambda, "N_Lambda")
    return Modulus(
        lambda k: max(N_Lambda, gamma3(Lambda * (k + 1) - 1)),
        f"max({N_Lambda}, {gamma3.label}({Lambda}(k+1)-1))",
        monotone=True,
    )


def derived_lambda_witnesses(gamma3: Modulus, Lambda: int, N_Lambda: int) -> dict:
    """Hypothesis record for a gamma1 obtained from :func:`derive_gamma1`."""
    return {"H2lambda": (int(Lambda), int(N_Lambda)), "H3lambda": gamma3}


# -- general rates ----------------------------------------------------------


def _regularity_rate(sigma1: Modulus, chi: Modulus, K: int, one_minus_alpha: Fraction) -> Callable[[int], int]:
    def fn(k: int) -> int:
        P = chi(2 * k + 1) + 1 + ceil_ln(4 * K * (k + 1))
        return sigma1(ceil_div(P, one_minus_alpha) + 1)

    return fn


def phi_rate(
    sigma1: Modulus,
    sigma2: Modulus,
    gamma1: Modulus,
    theta1: Modulus,
    K_z: int,
    alpha: float,
    *,
    lambda_witnesses: dict | None = None,
) -> RateCertificate:
    """Rate of asymptotic regularity ``||x_{n+1} - x_n|| -> 0`` for the scheme with errors.

    ``chi(k) = max{sigma2(6K(k+1)-1), gamma1(6K(k+1)-1), theta1(6k+5)}`` and
    ``Phi(k) = sigma1(ceil((chi(2k+1) + 1 + ceil(ln(4K(k+1)))) / (1-alpha)) + 1)``.

    Passing gamma1* (with ``lambda_witnesses={"H1lambda*": gamma1_star}``) or a
    modulus from :func:`derive_gamma1` (with :func:`derived_lambda_witnesses`)
    gives the two variants with alternative hypotheses on ``lambda_n``.
    """
    K = _pos(K_z, "K_z")
    oma = _alpha(alpha)
    chi = Modulus(
        lambda k: max(sigma2(6 * K * (k + 1) - 1), gamma1(6 * K * (k + 1) - 1), theta1(6 * k + 5)),
        "chi",
        monotone=True,
    )
    witnesses = {"H1alpha": sigma1, "H2alpha": sigma2}
    witnesses.update({"H1lambda": gamma1} if lambda_witnesses is None else lambda_witnesses)
    witnesses.update({"H1e": theta1, "Kz": ("eq10", K)})
    return RateCertificate(
        "Phi",
        Modulus(_regularity_rate(sigma1, chi, K, oma), "Phi", monotone=True),
        "successive",
        f"Phi from sigma1={sigma1.label}, sigma2={sigma2.label}, gamma1={gamma1.label}, "
        f"theta1={theta1.label}; K_z={K}, alpha={alpha:g}",
        witnesses=witnesses,
        inputs={"K_z": K, "alpha": alpha, "chi": chi},
    )


def _inherit_kz(parent: RateCertificate, K: int) -> tuple:
    # rules that read sibling witnesses stay with the parent, whose validity is re-checked anyway
    w = parent.witnesses.get("Kz")
    return w if w is not None and w[1] == K and w[0] in ("vam", "bound") else ("bound", K)


def psi_rate(phi: RateCertificate, sigma3: Modulus, theta2: Modulus, K_z: int) -> RateCertificate:
    """Rate for ``||x_n - J_{lambda_n} x_n|| -> 0``:
    ``Psi(k) = max{sigma3(6K(k+1)-1), Phi(3k+2), theta2(3k+2)}``."""
    if phi.residual_kind != "successive":
        raise DomainError("psi_rate needs a certificate for successive residuals")
    K = _pos(K_z, "K_z")
    Phi = phi.modulus
    return RateCertificate(
        f"Psi[{phi.name}]" if phi.name != "Phi" else "Psi",
        Modulus(
            lambda k: max(sigma3(6 * K * (k + 1) - 1), Phi(3 * k + 2), theta2(3 * k + 2)),
            "Psi",
            monotone=True,
        ),
        "scheme",
        f"Psi from {phi.name}, sigma3={sigma3.label}, theta2={theta2.label}; K_z={K}",
        witnesses={f"rate:{phi.name}": phi, "H3alpha": sigma3, "H2e": theta2, "Kz": _inherit_kz(phi, K)},
        inputs={"K_z": K},
    )


def theta_m_rate(psi: RateCertificate, Lambda: int, N_Lambda: int, Lambda_m: int, m: int) -> RateCertificate:
    """Rate for ``||x_n - J_{lambda_m} x_n|| -> 0``:
    ``Theta_m(k) = max{N_Lambda, Psi(Lambda_m Lambda (k+1) - 1), Psi(2k+1)}``."""
    if psi.residual_kind != "scheme":
        raise DomainError("theta_m_rate needs a certificate for scheme residuals")
    Lambda = _pos(Lambda, "Lambda")
    N_Lambda = _nat(N_Lambda, "N_Lambda")
    Lambda_m = _pos(Lambda_m, "Lambda_m")
    m = _nat(m, "m")
    Psi = psi.modulus
    base = psi.name.replace("Psi", "Theta", 1)
    return RateCertificate(
        f"{base}[m={m}]",
        Modulus(
            lambda k: max(N_Lambda, Psi(Lambda_m * Lambda * (k + 1) - 1), Psi(2 * k + 1)),
            f"{base}_{m}",
            monotone=True,
        ),
        "fixed_m",
        f"{base}_m from {psi.name}; Lambda={Lambda}, N_Lambda={N_Lambda}, Lambda_m={Lambda_m}, m={m}",
        m=m,
        witnesses={f"rate:{psi.name}": psi, "H2lambda": (Lambda, N_Lambda), "Lambda_m": (m, Lambda_m)},
        inputs={"Lambda": Lambda, "N_Lambda": N_Lambda, "Lambda_m": Lambda_m},
    )


# -- exact scheme -----------------------------------------------------------


def vam_phi_rate(
    sigma1: Modulus, sigma2: Modulus, gamma1: Modulus, K_z_star: int, alpha: float, *, lambda_witnesses: dict | None = None
) -> RateCertificate:
    """``chi*(k) = max{sigma2(4K(k+1)-1), gamma1(4K(k+1)-1)}``; Phi* has the shape of Phi."""
    K = _pos(K_z_star, "K_z_star")
    oma = _alpha(alpha)
    chi = Modulus(
        lambda k: max(sigma2(4 * K * (k + 1) - 1), gamma1(4 * K * (k + 1) - 1)), "chi*", monotone=True
    )
    witnesses = {"H1alpha": sigma1, "H2alpha": sigma2}
    witnesses.update({"H1lambda": gamma1} if lambda_witnesses is None else lambda_witnesses)
    witnesses.update({"e=0": None, "Kz": ("vam", K)})
    return RateCertificate(
        "Phi*",
        Modulus(_regularity_rate(sigma1, chi, K, oma), "Phi*", monotone=True),
        "successive",
        f"Phi* (no errors) from sigma1={sigma1.label}, sigma2={sigma2.label}, gamma1={gamma1.label}; "
        f"K_z*={K}, alpha={alpha:g}",
        witnesses=witnesses,
        inputs={"K_z": K, "alpha": alpha, "chi": chi},
    )


def vam_psi_rate(phi: RateCertificate, sigma3: Modulus, K_z_star: int) -> RateCertificate:
    """``Psi*(k) = max{sigma3(4K(k+1)-1), Phi*(2k+1)}`` for any successive-residual rate ``Phi*``."""
    if phi.residual_kind != "successive":
        raise DomainError("vam_psi_rate needs a certificate for successive residuals")
    K = _pos(K_z_star, "K_z_star")
    Phi = phi.modulus
    return RateCertificate(
        "Psi*" if phi.name == "Phi*" else f"Psi*[{phi.name}]",
        Modulus(lambda k: max(sigma3(4 * K * (k + 1) - 1), Phi(2 * k + 1)), "Psi*", monotone=True),
        "scheme",
        f"Psi* (no errors) from {phi.name}, sigma3={sigma3.label}; K_z*={K}",
        witnesses={f"rate:{phi.name}": phi, "H3alpha": sigma3, "e=0": None, "Kz": _inherit_kz(phi, K)},
        inputs={"K_z": K},
    )


def vam_rates(
    sigma1: Modulus,
    sigma2: Modulus,
    gamma1: Modulus,
    sigma3: Modulus,
    K_z_star: int,
    alpha: float,
    Lambda: int,
    N_Lambda: int,
    Lambda_m: int,
    m: int,
) -> tuple[RateCertificate, RateCertificate, RateCertificate]:
    """``(Phi*, Psi*, Theta*_m)`` for the scheme without errors."""
    phi = vam_phi_rate(sigma1, sigma2, gamma1, K_z_star, alpha)
    psi = vam_psi_rate(phi, sigma3, K_z_star)
    return phi, psi, theta_m_rate(psi, Lambda, N_Lambda, Lambda_m, m)


# -- closed-form linear rates -----------------------------------------------


def linear_rates_example1(K_z_star: int, alpha: float) -> tuple[RateCertificate, RateCertificate]:
    """Linear rates for constant lambda, no errors and ``alpha_n = 2/((1-alpha)(n+J))``.

    ``Phi0(k) = 4Kc^2(k+1) - 2c`` and ``Psi0(k) = (4Kc^2 + 4Kc)(k+1) - 2c``
    with ``c = ceil(1/(1-alpha))``.
    """
    K = _pos(K_z_star, "K_z_star")
    p = LinearRateParams.from_alpha(alpha)
    c = p.c
    w = {"example1": alpha, "e=0": None, "Kz": ("vam", K)}
    inputs = {"K_z": K, "alpha": alpha, "J": p.J, "c": c}
    phi0 = RateCertificate(
        "Phi0",
        Modulus(lambda k: 4 * K * c * c * (k + 1) - 2 * c, f"{4 * K * c * c}(k+1)-{2 * c}", monotone=True),
        "successive",
        f"Phi0 linear rate, constant lambda, no errors; K_z*={K}, alpha={alpha:g}, J={p.J}",
        witnesses=dict(w),
        inputs=inputs,
    )
    slope = 4 * K * c * c + 4 * K * c
    psi0 = RateCertificate(
        "Psi0",
        Modulus(lambda k: slope * (k + 1) - 2 * c, f"{slope}(k+1)-{2 * c}", monotone=True),
        "scheme",
        f"Psi0 linear rate, constant lambda, no errors; K_z*={K}, alpha={alpha:g}, J={p.J}",
        witnesses=dict(w),
        inputs=inputs,
    )
    return phi0, psi0


def linear_rates_example2(
    K_z: int, alpha: float, e_star_norm: float
) -> tuple[RateCertificate, RateCertificate, RateCertificate, Callable[[int], float]]:
    """Linear rates for ``lambda_n = (n+J)/(n+J-1)``, ``e_n = e*/(n+J)^2``.

    ``Phi0(k) = (3JK + ceil|e*|) c (k+1) - J``,
    ``Psi0(k) = 18Kc^2(k+1) + 3 ceil|e*| c (k+1) - 2c``,
    ``Theta0(k) = 36Kc^2(k+1) + 6 ceil|e*| c (k+1) - 2c`` (for every ``m``),
    and the pointwise bound ``||x_{n+1} - x_n|| <= (3JK + |e*|) / ((1-alpha)(n+J))``.
    """
    K = _pos(K_z, "K_z")
    if e_star_norm < 0:
        raise DomainError("e_star_norm must be nonnegative")
    p = LinearRateParams.from_alpha(alpha)
    c, J = p.c, p.J
    e = math.ceil(e_star_norm)
    w = {"example2": (alpha, float(e_star_norm)), "Kz": ("example2", K)}
    inputs = {"K_z": K, "alpha": alpha, "J": J, "c": c, "e_star_norm": e_star_norm}
    tail = f"K_z={K}, alpha={alpha:g}, |e*|={e_star_norm:g}, J={J}"
    s1 = (3 * J * K + e) * c
    phi0 = RateCertificate(
        "Phi0",
        Modulus(lambda k: s1 * (k + 1) - J, f"{s1}(k+1)-{J}", monotone=True),
        "successive",
        f"Phi0 linear rate, increasing lambda with inverse-square errors; {tail}",
        witnesses=dict(w),
        inputs=inputs,
    )
    s2 = 18 * K * c * c + 3 * e * c
    psi0 = RateCertificate(
        "Psi0",
        Modulus(lambda k: s2 * (k + 1) - 2 * c, f"{s2}(k+1)-{2 * c}", monotone=True),
        "scheme",
        f"Psi0 linear rate, increasing lambda with inverse-square errors; {tail}",
        witnesses=dict(w),
        inputs=inputs,
    )
    s3 = 36 * K * c * c + 6 * e * c
    theta0 = RateCertificate(
        "Theta0[m=0]",
        Modulus(lambda k: s3 * (k + 1) - 2 * c, f"{s3}(k+1)-{2 * c}", monotone=True),
        "fixed_m",
        f"Theta0 linear rate for every m, increasing lambda with inverse-square errors; {tail}",
        m=0,
        witnesses=dict(w),
        inputs=inputs,
    )
    num = 3 * J * K + float(e_star_norm)
    oma = 1 - alpha

    def pointwise_bound(n):
        return num / (oma * (np.asarray(n, dtype=float) + J))

    return phi0, psi0, theta0, pointwise_bound


def example2_kz(x0, z, f: ContractionMap, e_star_norm: float) -> int:
    """Least positive natural ``K >= max{||x0-z||, ||f(z)-z||/(1-alpha)} + ceil(|e*|/(J-1))``."""
    J = LinearRateParams.from_alpha(f.alpha).J
    z = as_point(z, f.dimension)
    base = max(norm(as_point(x0) - z), norm(f(z) - z) / (1 - f.alpha))
    return max(1, math.ceil(base) + math.ceil(Fraction(e_star_norm) / (J - 1)))


# -- export -----------------------------------------------------------------


def certificate_rows(cert: RateCertificate, k_max: int) -> list[list[str]]:
    rows = [["k", "modulus_value", "bound"]]
    for k in range(k_max + 1):
        v = cert.modulus(k)
        rows.append([str(k), "saturated" if v >= cert.modulus.ceiling else str(v), repr(1.0 / (k + 1))])
    return rows


def certificate_csv_text(cert: RateCertificate, k_max: int) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(certificate_rows(cert, k_max))
    return buf.getvalue()


def write_certificate_csv(cert: RateCertificate, path, k_max: int) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(certificate_csv_text(cert, k_max))


def _describe_witness(tag: str, w) -> str:
    if isinstance(w, RateCertificate):
        return f"valid rate {w.name} ({w.kind_label})"
    if isinstance(w, Modulus):
        return w.label or "modulus"
    if w is None:
        return "asserted"
    return repr(w)


def provenance_text(cert: RateCertificate) -> str:
    """Human-readable description of a certificate and its hypotheses."""
    lines = [f"certificate: {cert.name}", f"residual: {cert.kind_label}", f"construction: {cert.provenance}"]
    lines.append("hypotheses:")
    for tag, w in cert.witnesses.items():
        lines.append(f"  {tag}: {_describe_witness(tag, w)}")
    return "\n".join(lines) + "\n"
