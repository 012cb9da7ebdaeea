"""Experiment setups: operator, map, schedule and start point, plus every certificate that applies."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import MissingModulus
from .iteration import ErrorTerms, IterationTrace, ParamSchedule, run_vame
from .moduli import Modulus
from .operators import (
    OPERATOR_KINDS,
    ContractionMap,
    ResolventOperator,
    affine_map,
    constant_map,
    random_operator,
    random_orthogonal,
)
from .rates import (
    RateCertificate,
    derive_gamma1,
    derived_lambda_witnesses,
    err_sum_head,
    example2_kz,
    kz_bound,
    linear_rates_example1,
    linear_rates_example2,
    phi_rate,
    psi_rate,
    theta_m_rate,
    vam_phi_rate,
    vam_psi_rate,
)
from .schedules import brute_force_moduli, example1, example2, generic

SCHEMES = ("vame", "vam", "hppa")
SCHEDULES = ("example1", "example2", "generic")


@dataclass(frozen=True)
class Setup:
    """Everything needed to run one trace. ``scheme`` is ``vame``, ``vam`` or ``hppa``."""

    operator: ResolventOperator
    contraction: ContractionMap
    schedule: ParamSchedule
    x0: np.ndarray
    z: np.ndarray
    scheme: str
    horizon: int
    label: str

    def run(self, horizon: int | None = None) -> IterationTrace:
        n = self.horizon if horizon is None else horizon
        return run_vame(self.x0, self.operator, self.contraction, self.schedule, n, self.z, self.label)


def make_schedule(name: str, alpha: float, scheme: str, rng: np.random.Generator, dim: int, seed: int) -> ParamSchedule:
    """The named schedule for the scheme; the exact scheme drops all errors."""
    exact = scheme == "vam"
    if name == "example1":
        return example1(alpha, float(rng.uniform(0.5, 2.0)))
    if name == "example2":
        e_star = np.zeros(dim) if exact else rng.standard_normal(dim)
        return example2(alpha, e_star)
    if name == "generic":
        errors = ErrorTerms.zero() if exact else ErrorTerms.random(0.5, seed)
        return generic(a=0.5, p=0.0, lam0=float(rng.uniform(0.5, 2.0)), errors=errors)
    raise ValueError(f"unknown schedule {name!r}")


def make_setup(
    operator_kind: str,
    scheme: str,
    schedule: str,
    seed: int,
    *,
    dim: int = 3,
    horizon: int = 10_000,
    alpha: float = 0.5,
) -> Setup:
    """A randomized instance of the configuration matrix."""
    rng = np.random.default_rng([seed, OPERATOR_KINDS.index(operator_kind), SCHEMES.index(scheme), SCHEDULES.index(schedule)])
    op = random_operator(operator_kind, dim, rng)
    if scheme == "hppa":
        f = constant_map(rng.standard_normal(dim))
    else:
        f = affine_map(alpha, random_orthogonal(dim, rng), rng.standard_normal(dim))
    sched = make_schedule(schedule, f.alpha, scheme, rng, dim, seed)
    x0 = 2 * rng.standard_normal(dim)
    label = f"{op.label}|{scheme}|{sched.label}|seed={seed}"
    return Setup(op, f, sched, x0, op.known_zero, scheme, horizon, label)


def small_k_setup(
    operator_kind: str, scheme: str, seed: int, *, dim: int = 3, horizon: int = 100_000, p: float = 0.5
) -> Setup:
    """An instance whose general certificates land inside a moderate horizon.

    The start point and the anchor sit near the zero ``z`` (``f(z) = z`` for
    the viscosity schemes), so ``K_z`` is 1 or 2, and ``alpha_n = 0.5/(n+1)^p``
    with ``p < 1`` keeps the divergence modulus polynomial.
    """
    rng = np.random.default_rng([seed, 7, OPERATOR_KINDS.index(operator_kind), SCHEMES.index(scheme)])
    op = random_operator(operator_kind, dim, rng)
    z = op.known_zero
    if scheme == "hppa":
        f = constant_map(z + 0.1 * rng.standard_normal(dim) / np.sqrt(dim))
    else:
        Q = random_orthogonal(dim, rng)
        f = affine_map(0.5, Q, z - 0.5 * Q @ z)
    errors = ErrorTerms.random(0.05, seed, 2.0) if scheme == "vame" else ErrorTerms.zero()
    sched = generic(a=0.5, p=p, lam0=float(rng.uniform(0.5, 1.0)), errors=errors)
    x0 = z + 0.3 * rng.standard_normal(dim) / np.sqrt(dim)
    label = f"{op.label}|{scheme}|{sched.label}|small-K|seed={seed}"
    return Setup(op, f, sched, x0, z, scheme, horizon, label)


def configuration_matrix(seeds=(0, 1, 2), **kw):
    """All (operator, scheme, schedule, seed) combinations."""
    for kind in OPERATOR_KINDS:
        for scheme in SCHEMES:
            for sched in SCHEDULES:
                for seed in seeds:
                    yield make_setup(kind, scheme, sched, seed, **kw)


def _need(value, what: str):
    if value is None:
        raise MissingModulus(f"no modulus for {what}")
    return value


def general_certificates(setup: Setup, moduli=None, ms=(0, 1, 5), *, suffix: str = "") -> list[RateCertificate]:
    """Certificates from the general constructions, given the schedule's moduli.

    Raises :class:`MissingModulus` when not even the asymptotic-regularity
    rate can be built.
    """
    mods = setup.schedule.moduli if moduli is None else moduli
    if mods is None:
        raise MissingModulus("schedule has no moduli")
    sigma1 = _need(mods.sigma1, "divergence of sum alpha_n")
    sigma2 = _need(mods.sigma2, "Cauchy property of sum |alpha_n - alpha_{n+1}|")
    gamma1 = _need(mods.gamma1, "Cauchy property of the lambda ratio series")
    f, x0, z = setup.contraction, setup.x0, setup.z
    dim = setup.operator.dimension
    errors = setup.schedule.errors
    certs: list[RateCertificate] = []
    theta1 = mods.theta1
    if theta1 is not None and not theta1.is_saturated(0):
        head = err_sum_head(theta1, np.linalg.norm(errors.vectors(theta1(0), dim), axis=1))
        K = kz_bound(x0, z, f, head, "vame")
        phi = phi_rate(sigma1, sigma2, gamma1, theta1, K, f.alpha)
        certs.append(_rename(phi, "Phi" + suffix))
        if mods.gamma1_star is not None:
            certs.append(
                _rename(
                    phi_rate(sigma1, sigma2, mods.gamma1_star, theta1, K, f.alpha, lambda_witnesses={"H1lambda*": mods.gamma1_star}),
                    f"Phi{suffix}[gamma1*]",
                )
            )
        if mods.gamma3 is not None and mods.Lambda is not None:
            g = derive_gamma1(mods.gamma3, mods.Lambda, mods.N_Lambda)
            w = derived_lambda_witnesses(mods.gamma3, mods.Lambda, mods.N_Lambda)
            certs.append(_rename(phi_rate(sigma1, sigma2, g, theta1, K, f.alpha, lambda_witnesses=w), f"Phi{suffix}[gamma3]"))
        if mods.sigma3 is not None and mods.theta2 is not None:
            psi = _rename(psi_rate(certs[0], mods.sigma3, mods.theta2, K), "Psi" + suffix)
            certs.append(psi)
            if mods.Lambda is not None and mods.Lambda_m is not None:
                for m in ms:
                    certs.append(theta_m_rate(psi, mods.Lambda, mods.N_Lambda, mods.Lambda_m(m), m))
    if errors.is_zero:
        mode = "hppa" if setup.scheme == "hppa" else "vam"
        K_star = kz_bound(x0, z, f, 0, mode)
        phi_s = vam_phi_rate(sigma1, sigma2, gamma1, K_star, f.alpha)
        certs.append(_rename(phi_s, "Phi*" + suffix))
        if mods.sigma3 is not None:
            psi_s = _rename(vam_psi_rate(certs[-1], mods.sigma3, K_star), "Psi*" + suffix)
            certs.append(psi_s)
            if mods.Lambda is not None and mods.Lambda_m is not None:
                for m in ms:
                    certs.append(theta_m_rate(psi_s, mods.Lambda, mods.N_Lambda, mods.Lambda_m(m), m))
    if not certs:
        raise MissingModulus("no modulus for the Cauchy property of sum ||e_n||")
    return certs


def _rename(cert: RateCertificate, name: str) -> RateCertificate:
    return replace(cert, name=name)


def linear_certificates(setup: Setup, ms=(0, 1, 5)) -> list[RateCertificate]:
    """Closed-form linear rates for the two preset schedules, plus their compositions."""
    sched = setup.schedule
    preset = sched.params.get("preset")
    f, x0, z = setup.contraction, setup.x0, setup.z
    mods = sched.moduli
    certs: list[RateCertificate] = []
    if preset == "example1":
        K_star = kz_bound(x0, z, f, 0, "hppa" if setup.scheme == "hppa" else "vam")
        phi0, psi0 = linear_rates_example1(K_star, f.alpha)
        certs += [phi0, psi0] + [psi0.as_fixed_m(m) for m in ms]
        psi = vam_psi_rate(phi0, mods.sigma3, K_star)
        certs.append(psi)
        certs += [theta_m_rate(psi, mods.Lambda, mods.N_Lambda, mods.Lambda_m(m), m) for m in ms]
    elif preset == "example2":
        e_norm = sched.errors.e_star_norm()
        K = example2_kz(x0, z, f, e_norm)
        phi0, psi0, theta0, _ = linear_rates_example2(K, f.alpha, e_norm)
        certs += [phi0, psi0] + [theta0.for_m(m) for m in ms]
        psi = psi_rate(phi0, mods.sigma3, mods.theta2, K)
        certs.append(psi)
        certs += [theta_m_rate(psi, mods.Lambda, mods.N_Lambda, mods.Lambda_m(m), m) for m in ms]
    return certs


def all_certificates(setup: Setup, ms=(0, 1, 5), *, brute_horizon: int | None = None) -> list[RateCertificate]:
    """General and closed-form certificates; with ``brute_horizon`` also those from brute-forced moduli."""
    certs = general_certificates(setup, ms=ms) + linear_certificates(setup, ms)
    if brute_horizon is not None:
        mods = brute_force_moduli(setup.schedule, brute_horizon, setup.operator.dimension)
        try:
            certs += general_certificates(setup, mods, ms, suffix="[brute]")
        except MissingModulus:
            pass
    return certs


def shrink(cert: RateCertificate, by: int) -> RateCertificate:
    """Negative control: ``k -> max(0, modulus(k) - by)``."""
    mod = cert.modulus
    return RateCertificate(
        cert.name + "[shrunk]",
        Modulus(lambda k: max(0, mod(k) - by), f"{mod.label}-{by}", monotone=True),
        cert.residual_kind,
        f"{cert.provenance}; shrunk by {by}",
        m=cert.m,
        witnesses=dict(cert.witnesses),
        inputs=dict(cert.inputs),
    )
