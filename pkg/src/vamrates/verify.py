"""Certified-versus-empirical checks of rate certificates along recorded traces."""

from __future__ import annotations

import csv
import hashlib
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .core import TOL_FLOAT, DomainError, PreconditionViolation, Verdict
from .iteration import IterationTrace, kz_start, resolvent_stack
from .moduli import (
    Modulus,
    _suffix_max,
    check_cauchy_modulus,
    check_rate_of_convergence,
    check_rate_of_divergence,
)
from .rates import LinearRateParams, RateCertificate

# Hypothesis checks evaluate each modulus on arguments up to this bound.
ARG_CAP = 2000


def residuals(trace: IterationTrace, kind: str, m: int | None = None) -> np.ndarray:
    """Residual sequence of the given kind along the trace."""
    if kind == "successive":
        return np.asarray(trace.successive)
    if kind == "scheme":
        return np.asarray(trace.scheme)
    if kind == "fixed_m":
        if m is None:
            raise DomainError("fixed_m residuals need m")
        J = resolvent_stack(trace, trace.schedule.lam(m))
        return np.linalg.norm(trace.points - J, axis=1)
    raise DomainError(f"unknown residual kind {kind!r}")


def _empirical_from_worst(worst: np.ndarray, k: int, tol: float) -> int | None:
    # worst is the nonincreasing suffix maximum of the residuals
    idx = int(np.searchsorted(-worst, -(1.0 / (k + 1) + tol), side="left"))
    return None if idx == len(worst) else idx


def _empirical(res: np.ndarray, k: int, tol: float) -> int | None:
    return _empirical_from_worst(_suffix_max(res), k, tol)


def empirical_rate(
    trace: IterationTrace, residual_kind: str, k: int, m: int | None = None, *, tol: float = TOL_FLOAT
) -> int | None:
    """Least ``n`` with every residual at index ``>= n`` at most ``1/(k+1) + tol``.

    ``None`` when even the last residual exceeds the threshold.
    """
    return _empirical(residuals(trace, residual_kind, m), k, tol)


def fingerprint(trace: IterationTrace) -> str:
    h = hashlib.sha256()
    h.update(trace.label.encode())
    h.update(np.ascontiguousarray(trace.points[0]).tobytes())
    h.update(str(trace.horizon).encode())
    return f"{trace.label}#{h.hexdigest()[:12]}"


@dataclass(frozen=True)
class ReportRow:
    k: int
    certified: int
    empirical: int | None
    max_residual: float | None
    status: str  # pass | fail | skipped
    saturated: bool = False


@dataclass(frozen=True)
class VerificationReport:
    """Per-``k`` comparison of one certificate with one trace."""

    certificate: str
    residual_kind: str
    horizon: int
    fingerprint: str
    rows: tuple[ReportRow, ...]
    preconditions: tuple[str, ...] = field(default=())

    @property
    def failures(self) -> list[ReportRow]:
        return [r for r in self.rows if r.status == "fail"]

    @property
    def ok(self) -> bool:
        return not self.failures

    def count(self, status: str) -> int:
        return sum(r.status == status for r in self.rows)

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "certified", "empirical", "max_residual", "status"])
        for r in self.rows:
            w.writerow([
                r.k,
                "saturated" if r.saturated else r.certified,
                "" if r.empirical is None else r.empirical,
                "" if r.max_residual is None else repr(r.max_residual),
                r.status,
            ])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.csv_text())

    def summary(self) -> str:
        return (
            f"{self.certificate} [{self.residual_kind}] on {self.fingerprint}: "
            f"{self.count('pass')} pass, {self.count('fail')} fail, "
            f"{self.count('skipped')} horizon-skipped (horizon {self.horizon})"
        )


# -- hypothesis re-checks ----------------------------------------------------


def _raise_on(tag: str, v: Verdict) -> None:
    if not v:
        raise PreconditionViolation(tag, v.index, v.detail)


def _cauchy(tag: str, mod: Modulus, terms: np.ndarray, tol: float) -> None:
    series = np.cumsum(terms)
    _raise_on(tag, check_cauchy_modulus(mod, series, ARG_CAP, len(series) - 1, tol=tol))


def _first_bad(tag: str, bad: np.ndarray, detail: str) -> None:
    idx = np.flatnonzero(bad)
    if idx.size:
        raise PreconditionViolation(tag, int(idx[0]), detail)


def check_hypothesis(
    trace: IterationTrace,
    tag: str,
    witness,
    *,
    context: dict | None = None,
    tol: float = TOL_FLOAT,
    cache: dict | None = None,
) -> None:
    """Re-check one asserted hypothesis on the trace.

    ``context`` holds the sibling witnesses of the same certificate (the
    ``eq10`` rule for ``K_z`` reads ``H1e`` from it). Raises
    :class:`PreconditionViolation` on failure.
    """
    context = context or {}
    al, la, en = trace.alphas, trace.lambdas, trace.err_norms
    if tag == "H1alpha":
        _raise_on(tag, check_rate_of_divergence(witness, al, max(min(ARG_CAP, trace.horizon), 1), beyond="skip", tol=tol))
    elif tag == "H2alpha":
        _cauchy(tag, witness, np.abs(np.diff(al)), tol)
    elif tag == "H3alpha":
        _raise_on(tag, check_rate_of_convergence(witness, al, 0.0, ARG_CAP, trace.horizon, tol=tol))
    elif tag == "H1lambda":
        _cauchy(tag, witness, np.abs(1 - la[1:] / la[:-1]), tol)
    elif tag == "H1lambda*":
        _cauchy(tag, witness, np.abs(1 - la[:-1] / la[1:]), tol)
    elif tag == "H2lambda":
        Lam, N = witness
        _first_bad(tag, la[N:] < 1 / Lam - tol, f"lambda_n < 1/{Lam}")
    elif tag == "H3lambda":
        _cauchy(tag, witness, np.abs(np.diff(la)), tol)
    elif tag == "H1e":
        _cauchy(tag, witness, en, tol)
    elif tag == "H2e":
        _raise_on(tag, check_rate_of_convergence(witness, en, 0.0, ARG_CAP, len(en) - 1, tol=tol))
    elif tag == "H3e":
        _first_bad(tag, np.cumsum(en) > witness + tol, f"partial sum of ||e_n|| exceeds E={witness}")
    elif tag == "Lambda_m":
        m, Lm = witness
        lam_m = trace.schedule.lam(m)
        if Lm < 1 or Lm < lam_m - tol:
            raise PreconditionViolation(tag, m, f"Lambda_m={Lm} < lambda_m={lam_m:.6g}")
    elif tag == "e=0":
        _first_bad(tag, en > 0, "nonzero error term")
    elif tag == "Kz":
        _check_kz(trace, witness, context, tol)
    elif tag == "example1":
        _check_example_weights(trace, witness)
        _first_bad(tag, np.abs(la - la[0]) > tol, "lambda_n is not constant")
        _first_bad(tag, en > 0, "nonzero error term")
    elif tag == "example2":
        alpha, e_norm = witness
        J = _check_example_weights(trace, alpha)
        n = np.arange(trace.horizon + 1)
        _first_bad(tag, np.abs(la - (n + J) / (n + J - 1.0)) > tol, "lambda_n != (n+J)/(n+J-1)")
        scaled = trace.errors * ((n[:-1] + J) ** 2)[:, None]
        spread = np.abs(scaled - scaled[0]).max(axis=1)
        _first_bad(tag, spread > tol * (1 + np.abs(scaled[0]).max()), "e_n (n+J)^2 is not constant")
        if abs(np.linalg.norm(scaled[0]) - e_norm) > tol * (1 + e_norm):
            raise PreconditionViolation(tag, 0, f"||e*|| != {e_norm}")
    elif tag.startswith("rate:"):
        k = _first_failing_k(trace, witness, tol, cache)
        if k is not None:
            raise PreconditionViolation(tag, witness.modulus(k), f"parent {witness.name} fails at k={k}")
    else:
        raise DomainError(f"unknown hypothesis tag {tag!r}")


def _check_example_weights(trace: IterationTrace, alpha: float) -> int:
    if trace.contraction.alpha != alpha:
        raise PreconditionViolation("example", None, f"contraction constant {trace.contraction.alpha} != {alpha}")
    J = LinearRateParams.from_alpha(alpha).J
    n = np.arange(trace.horizon + 1)
    _first_bad("example", np.abs(trace.alphas - 2 / ((1 - alpha) * (n + J))) > TOL_FLOAT, "alpha_n != 2/((1-alpha)(n+J))")
    return J


def _check_kz(trace: IterationTrace, witness, context: dict, tol: float) -> None:
    rule, K = witness
    if trace.zero is None:
        raise PreconditionViolation("Kz", None, "trace has no zero of the operator")
    _first_bad("Kz", trace.kz > K + tol, f"K_z,n exceeds K_z={K}")
    if rule == "bound":
        return
    need = kz_start(trace.x0, trace.zero, trace.contraction)
    if rule == "example2":
        J = LinearRateParams.from_alpha(trace.contraction.alpha).J
        need += math.ceil(context["example2"][1] / (J - 1) - tol)
    elif rule == "eq10":
        theta1 = context["H1e"]
        t0 = theta1(0)
        if t0 < len(trace.err_norms):
            head = math.fsum(trace.err_norms[: t0 + 1])
        else:
            head = math.fsum(np.linalg.norm(trace.schedule.errors.vectors(t0, trace.operator.dimension), axis=1))
        need += math.ceil(head - tol) + 1
    elif rule != "vam":
        raise DomainError(f"unknown K_z rule {rule!r}")
    if K < need - tol:
        raise PreconditionViolation("Kz", None, f"K_z={K} < required {need:.6g} ({rule})")


def _cached_residuals(trace: IterationTrace, cert: RateCertificate, cache: dict | None) -> np.ndarray:
    if cache is None:
        return residuals(trace, cert.residual_kind, cert.m)
    key = ("residuals", cert.residual_kind, cert.m)
    if key not in cache:
        cache[key] = residuals(trace, cert.residual_kind, cert.m)
    return cache[key]


def _first_failing_k(trace: IterationTrace, cert: RateCertificate, tol: float, cache: dict | None) -> int | None:
    """First ``k <= ARG_CAP`` at which ``cert`` fails on the trace (preconditions included)."""
    key = ("rate", id(cert))
    if cache is not None and key in cache:
        return cache[key]
    check_preconditions(trace, cert, tol=tol, cache=cache)
    res = _cached_residuals(trace, cert, cache)
    worst = _suffix_max(res)
    out = None
    for k in range(ARG_CAP + 1):
        idx = cert.modulus(k)
        if idx >= len(res):
            break
        if worst[idx] > 1.0 / (k + 1) + tol:
            out = k
            break
    if cache is not None:
        cache[key] = out
    return out


def check_preconditions(
    trace: IterationTrace, cert: RateCertificate, *, tol: float = TOL_FLOAT, cache: dict | None = None
) -> None:
    """Re-check every hypothesis recorded on the certificate."""
    for tag, witness in cert.witnesses.items():
        key = ("hyp", tag, id(witness) if not isinstance(witness, tuple) else witness)
        if tag == "Kz":
            key = key + (id(cert.witnesses.get("H1e")), cert.witnesses.get("example2"))
        if cache is not None and key in cache:
            continue
        check_hypothesis(trace, tag, witness, context=cert.witnesses, tol=tol, cache=cache)
        if cache is not None:
            cache[key] = True


def certify(
    trace: IterationTrace,
    cert: RateCertificate,
    k_max: int,
    *,
    check_preconditions_first: bool = True,
    tol: float = TOL_FLOAT,
    cache: dict | None = None,
) -> VerificationReport:
    """Compare the certified index with the residuals for every ``k <= k_max``.

    ``k`` whose certified index lies past the horizon are marked ``skipped``.
    Raises :class:`PreconditionViolation` when an asserted hypothesis fails.
    """
    if k_max < 0:
        raise DomainError("k_max must be natural")
    if check_preconditions_first:
        check_preconditions(trace, cert, tol=tol, cache=cache)
    res = _cached_residuals(trace, cert, cache)
    worst = _suffix_max(res)
    last = len(res) - 1
    rows = []
    for k in range(k_max + 1):
        idx = cert.modulus(k)
        sat = idx >= cert.modulus.ceiling
        emp = _empirical_from_worst(worst, k, tol)
        if idx > last:
            rows.append(ReportRow(k, idx, emp, None, "skipped", sat))
            continue
        mx = float(worst[idx])
        rows.append(ReportRow(k, idx, emp, mx, "pass" if mx <= 1.0 / (k + 1) + tol else "fail"))
    return VerificationReport(
        cert.name, cert.kind_label, trace.horizon, fingerprint(trace), tuple(rows), cert.preconditions
    )


def certify_all(trace: IterationTrace, certs, k_max: int, *, tol: float = TOL_FLOAT) -> list[VerificationReport]:
    """:func:`certify` for several certificates, sharing hypothesis checks."""
    cache: dict = {}
    return [certify(trace, c, k_max, tol=tol, cache=cache) for c in certs]


def compare_certificates(reports) -> list[dict]:
    """Side-by-side certified indices per ``k`` plus the empirical index.

    All reports must come from the same trace and residual kind.
    """
    reports = list(reports)
    if not reports:
        return []
    first = reports[0]
    for r in reports[1:]:
        if r.fingerprint != first.fingerprint or r.residual_kind != first.residual_kind:
            raise DomainError(
                f"mismatched configuration: {r.certificate} ({r.residual_kind}, {r.fingerprint}) vs "
                f"{first.certificate} ({first.residual_kind}, {first.fingerprint})"
            )
    n = min(len(r.rows) for r in reports)
    table = []
    for i in range(n):
        row = {"k": first.rows[i].k}
        for r in reports:
            row[r.certificate] = r.rows[i].certified
        row["empirical"] = first.rows[i].empirical
        table.append(row)
    return table


def comparison_csv_text(table: list[dict]) -> str:
    if not table:
        return ""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(table[0]), lineterminator="\n")
    w.writeheader()
    for row in table:
        w.writerow({k: ("" if v is None else v) for k, v in row.items()})
    return buf.getvalue()
