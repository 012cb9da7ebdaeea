"""Acceptance suite: one test per criterion, each logging a PASS/FAIL line.

The lines are collected in ``RESULTS`` and printed in the pytest terminal
summary (see ``conftest.py``). Run this file directly to execute the suite
without pytest.
"""

import math
import time
from collections import Counter
from dataclasses import replace
from pathlib import Path

import numpy as np

from vamrates.cli import build_certificates, setup_from_config
from vamrates.config import load_config
from vamrates.core import PreconditionViolation
from vamrates.experiments import (
    SCHEMES,
    configuration_matrix,
    general_certificates,
    linear_certificates,
    make_setup,
    shrink,
    small_k_setup,
)
from vamrates.iteration import ErrorTerms, check_bound_lemma, check_main_inequality, run_vame
from vamrates.moduli import (
    Modulus,
    brute_cauchy_modulus,
    brute_divergence_rate,
    check_cauchy_modulus,
    check_rate_of_convergence,
    check_rate_of_divergence,
    check_sabach_shtern,
    check_xu_recurrence_bound,
    xu_rate,
)
from vamrates.operators import (
    OPERATOR_KINDS,
    check_nonexpansive,
    check_resolvent_identity,
    check_resolvent_inequality,
    random_operator,
)
from vamrates.rates import derive_error_moduli, derive_gamma1, example2_kz, linear_rates_example2, phi_rate
from vamrates.schedules import example2, generic
from vamrates.verify import certify, certify_all

ROOT = Path(__file__).resolve().parents[1]
TOL = 1e-9
RESULTS: list[str] = []


def record(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS.append(line)
    print(line)


def _resolvent_grid(draws: int = 1200, seed: int = 2024):
    """Randomized (operator, lambda, gamma, x) with log-uniform orders in [1e-3, 1e3]."""
    rng = np.random.default_rng(seed)
    for i in range(draws):
        kind = OPERATOR_KINDS[i % len(OPERATOR_KINDS)]
        d = int(rng.integers(1, 101))
        op = random_operator(kind, d, rng)
        lam, gamma = 10.0 ** rng.uniform(-3, 3, 2)
        x = rng.standard_normal(d) / math.sqrt(d)
        y = rng.standard_normal(d) / math.sqrt(d)
        yield kind, d, op, float(lam), float(gamma), x, y


# -- 1 ------------------------------------------------------------------------------


def test_criterion_01_resolvent_identity():
    t0 = time.perf_counter()
    worst, kinds, dims = 0.0, Counter(), set()
    for kind, d, op, lam, gamma, x, _ in _resolvent_grid():
        worst = max(worst, check_resolvent_identity(op, lam, gamma, x))
        kinds[kind] += 1
        dims.add(d)
    elapsed = time.perf_counter() - t0
    n = sum(kinds.values())
    ok = n >= 1000 and len(kinds) == 4 and max(dims) <= 100 and worst <= TOL and elapsed < 10
    record(1, ok, f"{n} draws over {len(kinds)} operators, max residual {worst:.2e}, {elapsed:.1f} s")
    assert ok


# -- 2 ------------------------------------------------------------------------------


def test_criterion_02_resolvent_inequality_and_nonexpansive():
    bad_ineq = bad_nonexp = n = 0
    for _, _, op, lam, gamma, x, y in _resolvent_grid():
        n += 1
        bad_ineq += not check_resolvent_inequality(op, lam, gamma, x, tol=TOL)
        bad_nonexp += not check_nonexpansive(op, gamma, [(x, y)], tol=TOL)
        bad_nonexp += not check_nonexpansive(op, lam, [(x, y)], tol=TOL)
    ok = bad_ineq == 0 and bad_nonexp == 0
    record(2, ok, f"{n} draws: {bad_ineq} inequality and {bad_nonexp} nonexpansiveness violations")
    assert ok


# -- 3 ------------------------------------------------------------------------------


def test_criterion_03_bound_lemma_and_main_inequality():
    t0 = time.perf_counter()
    failures, n = [], 0
    for s in configuration_matrix(horizon=10_000):
        n += 1
        tr = s.run()
        for name, v in (
            ("bound lemma", check_bound_lemma(tr, s.z, (0, 1, 5, 100, 5000), tol=TOL)),
            ("lambda_ratio", check_main_inequality(tr, s.z, "lambda_ratio", tol=TOL)),
            ("lambda_ratio_star", check_main_inequality(tr, s.z, "lambda_ratio_star", tol=TOL)),
        ):
            if not v:
                failures.append(f"{s.label} {name}: {v.detail}")
    elapsed = time.perf_counter() - t0
    ok = n == 108 and not failures and elapsed < 120
    record(3, ok, f"{n} configs at horizon 1e4, {len(failures)} violations, {elapsed:.1f} s")
    assert ok, failures[:3]


# -- 4 ------------------------------------------------------------------------------


def test_criterion_04_inverse_n_bound():
    rng = np.random.default_rng(4)
    H = 10_000
    n = np.arange(H + 1)
    failures = 0
    for _ in range(100):
        N = int(rng.integers(2, 11))
        J = int(rng.integers(N, 11))
        gamma = float(rng.choice([0.25, 0.5, 1.0]))
        L = float(10.0 ** rng.uniform(-2, 2))
        c = rng.uniform(0, L, H + 1)
        a = N / (gamma * (n + J))
        s = np.empty(H + 1)
        s[0] = rng.uniform(0, L)
        for i in range(H):
            s[i + 1] = (1 - gamma * a[i + 1]) * s[i] + (a[i] - a[i + 1]) * c[i]
        failures += not check_sabach_shtern(s, c, L, N, J, gamma, H, tol=1e-12)
    record(4, failures == 0, f"100 equality runs to n = 1e4, {failures} bound violations")
    assert failures == 0


# -- 5 ------------------------------------------------------------------------------


def test_criterion_05_recurrence_rate():
    rng = np.random.default_rng(5)
    H = 10_000
    n = np.arange(H + 1)
    failures, in_horizon = [], 0
    for cfg in range(100):
        a0, pexp = rng.uniform(0.05, 1.0), rng.uniform(0.0, 1.0)
        a = np.minimum(1.0, a0 / (n + 1.0) ** pexp)
        c = rng.uniform(0, 1, H + 1) / (n + 1.0) ** rng.uniform(1.5, 3.0)
        s = np.empty(H + 1)
        s[0] = rng.uniform(0, 2)
        for i in range(H):
            s[i + 1] = (1 - a[i]) * s[i] + c[i]
        L = max(1, math.ceil(s.max()))
        theta = brute_divergence_rate(a)
        chi = brute_cauchy_modulus(np.cumsum(c), usable=H)
        # the brute-forced inputs are themselves re-checked before use
        if not check_rate_of_divergence(theta, a, 50, beyond="skip"):
            failures.append(f"config {cfg}: theta")
        if not check_cauchy_modulus(chi, np.cumsum(c), 50, H):
            failures.append(f"config {cfg}: chi")
        sigma = xu_rate(theta, chi, L)
        if not check_xu_recurrence_bound(s, a, c, L, sigma, 20, H):
            failures.append(f"config {cfg}: Sigma")
        in_horizon += sum(sigma(k) <= H for k in range(21))
    ok = not failures
    record(5, ok, f"100 configs at horizon 1e4, {len(failures)} failures, {in_horizon} in-horizon (config, k) checks")
    assert ok, failures[:3]


# -- 6 ------------------------------------------------------------------------------


def _family(name: str) -> str:
    base = name.split("[")[0]
    return base if base in ("Phi", "Psi", "Theta", "Phi*", "Psi*", "Theta*") else name


def test_criterion_06_general_certificates():
    t0 = time.perf_counter()
    setups = list(configuration_matrix(horizon=100_000))
    setups += [small_k_setup(kind, scheme, seed) for kind in OPERATOR_KINDS for scheme in SCHEMES for seed in (0, 1)]
    passes, fails, skipped, errors = Counter(), Counter(), Counter(), []
    for s in setups:
        tr = s.run()
        try:
            reports = certify_all(tr, general_certificates(s), 20, tol=TOL)
        except PreconditionViolation as exc:
            errors.append(f"{s.label}: {exc}")
            continue
        for r in reports:
            fam = _family(r.certificate)
            passes[fam] += r.count("pass")
            fails[fam] += r.count("fail")
            skipped[fam] += r.count("skipped")
    elapsed = time.perf_counter() - t0
    total_fail = sum(fails.values())
    covered = all(passes[f] > 0 for f in ("Phi", "Phi*", "Psi*", "Theta*"))
    ok = total_fail == 0 and not errors and covered
    per = ", ".join(f"{f} {passes[f]}" for f in sorted(passes))
    record(
        6,
        ok,
        f"{len(setups)} configs at horizon 1e5: {total_fail} fail, {sum(skipped.values())} horizon-skipped, "
        f"in-horizon passes {per}; {elapsed:.0f} s",
    )
    assert ok, (errors[:3], dict(fails))


# -- 7 ------------------------------------------------------------------------------


def test_criterion_07_linear_rates_constant_lambda():
    H = 100_000
    problems, checked = [], 0
    for alpha in (0.0, 0.5, 0.9):
        for kind in OPERATOR_KINDS:
            s = make_setup(kind, "vam", "example1", 0, horizon=H, alpha=alpha)
            tr = s.run()
            phi0, psi0 = linear_certificates(s)[:2]
            for cert in (phi0, psi0):
                k_max = 0
                while cert.modulus(k_max + 1) < H:
                    k_max += 1
                rep = certify(tr, cert, k_max, tol=TOL)
                if rep.count("pass") != k_max + 1:
                    problems.append(f"{s.label} {cert.name}: {rep.summary()}")
                checked += rep.count("pass")
                if cert is phi0:
                    for row in rep.rows:
                        if row.empirical is None or row.empirical > row.certified:
                            problems.append(f"{s.label} k={row.k}: empirical {row.empirical} > {row.certified}")
    ok = not problems
    record(7, ok, f"alpha in {{0, 0.5, 0.9}} x 4 operators: {checked} passing rows, {len(problems)} problems")
    assert ok, problems[:3]


# -- 8 ------------------------------------------------------------------------------


def test_criterion_08_linear_rates_increasing_lambda():
    H = 100_000
    problems, slowest, rows = [], 0.0, 0
    for alpha in (0.0, 0.5):
        for e_norm in (0.0, 1.0, 10.0):
            for kind in OPERATOR_KINDS:
                t0 = time.perf_counter()
                base = make_setup(kind, "vame", "example2", 1, horizon=H, alpha=alpha)
                rng = np.random.default_rng([8, int(10 * alpha), int(e_norm)])
                u = rng.standard_normal(base.operator.dimension)
                sched = example2(alpha, e_norm * u / np.linalg.norm(u))
                s = replace(base, schedule=sched, scheme="vame" if e_norm else "vam")
                tr = s.run()
                K = example2_kz(s.x0, s.z, s.contraction, e_norm)
                phi0, psi0, theta0, bound = linear_rates_example2(K, alpha, e_norm)
                over = np.flatnonzero(tr.successive > bound(np.arange(H)) + TOL)
                if over.size:
                    problems.append(f"{s.label}: pointwise bound fails at n={over[0]}")
                for cert in (phi0, psi0, theta0, theta0.for_m(3)):
                    rep = certify(tr, cert, 60, tol=TOL)
                    rows += rep.count("pass")
                    if not rep.ok or rep.count("pass") == 0:
                        problems.append(f"{s.label} {cert.name}: {rep.summary()}")
                slowest = max(slowest, time.perf_counter() - t0)
    ok = not problems and slowest < 60
    record(8, ok, f"24 configs at horizon 1e5: {rows} passing rows, {len(problems)} problems, slowest {slowest:.1f} s")
    assert ok, problems[:3]


# -- 9 ------------------------------------------------------------------------------


def test_criterion_09_negative_controls():
    problems = []
    shrunk_checked = 0
    for kind in OPERATOR_KINDS:
        for sched in ("example1", "example2"):
            s = make_setup(kind, "vam", sched, 0, horizon=5000)
            tr = s.run()
            for cert in linear_certificates(s)[:2]:
                rep = certify(tr, shrink(cert, tr.horizon), 20, tol=TOL)
                shrunk_checked += 1
                if not rep.failures:
                    problems.append(f"{s.label} {cert.name}: shrunken modulus produced no fail row")
        s = small_k_setup(kind, "hppa", 0, horizon=20_000)
        tr = s.run()
        phi_star = next(c for c in general_certificates(s) if c.name == "Phi*")
        shrunk_checked += 1
        if not certify(tr, shrink(phi_star, 10**6), 20, tol=TOL).failures:
            problems.append(f"{s.label} Phi*: shrunken modulus produced no fail row")

    violations = 0
    for kind in OPERATOR_KINDS:
        s = make_setup(kind, "vame", "generic", 0, horizon=3000)
        sched = generic(0.5, 0.0, 1.0, ErrorTerms.harmonic(np.eye(s.operator.dimension)[0]))
        tr = run_vame(s.x0, s.operator, s.contraction, sched, 3000, s.z)
        m = sched.moduli
        claimed = Modulus(lambda k: 2 * k, "claimed theta1", monotone=True)
        phi = phi_rate(m.sigma1, m.sigma2, m.gamma1, claimed, 50, s.contraction.alpha)
        try:
            certify(tr, phi, 5, tol=TOL)
            problems.append(f"{kind}: harmonic errors passed")
        except PreconditionViolation:
            violations += 1
    cfg = load_config(ROOT / "configs" / "custom_harmonic_errors.ini")
    setup = setup_from_config(cfg)
    try:
        certify_all(setup.run(), build_certificates(cfg, setup), cfg.run.k_max)
        problems.append("custom_harmonic_errors.ini passed")
    except PreconditionViolation:
        violations += 1
    ok = not problems
    record(9, ok, f"{shrunk_checked} shrunken certificates failed as expected, {violations} precondition violations")
    assert ok, problems


# -- 10 -----------------------------------------------------------------------------


def test_criterion_10_derivation_lemmas():
    H = 10_000
    problems = []
    for alpha in (0.0, 0.5, 0.9):
        sched = example2(alpha, [1.0, 0.0])
        m = sched.moduli
        g = derive_gamma1(m.gamma3, m.Lambda, m.N_Lambda)
        la = sched.lambdas(H)
        for name, ratio in (
            ("ratio", np.abs(1 - la[1:] / la[:-1])),
            ("ratio*", np.abs(1 - la[:-1] / la[1:])),
        ):
            if not check_cauchy_modulus(g, np.cumsum(ratio), 200, H - 1, tol=TOL):
                problems.append(f"alpha={alpha} {name}")
        en = np.linalg.norm(sched.errors.vectors(H, 2), axis=1)
        theta2, E = derive_error_moduli(brute_cauchy_modulus(np.cumsum(en), usable=H), en)
        if not check_rate_of_convergence(theta2, en, 0.0, 200, H, tol=TOL) or en.sum() > E:
            problems.append(f"alpha={alpha} theta2")
    for errors in (ErrorTerms.random(0.5, 3), ErrorTerms.inverse_square([3.0, 4.0], 1)):
        en = np.linalg.norm(errors.vectors(H, 2), axis=1)
        theta2, _ = derive_error_moduli(brute_cauchy_modulus(np.cumsum(en), usable=H), en)
        if not check_rate_of_convergence(theta2, en, 0.0, 200, H, tol=TOL):
            problems.append(f"{errors.kind} theta2")
    ok = not problems
    record(10, ok, f"derive_gamma1 on both ratio series and derived theta2 checked, {len(problems)} failures")
    assert ok, problems


if __name__ == "__main__":
    import sys

    failed = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion") and callable(fn):
            try:
                fn()
            except AssertionError:
                failed += 1
    print("\n".join(["", "acceptance summary"] + RESULTS))
    sys.exit(1 if failed else 0)
