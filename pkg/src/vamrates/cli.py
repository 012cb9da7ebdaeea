"""Command-line front end: ``vamrates {run,certify,verify,report} CONFIG``.

Exit codes: 0 success, 1 verification failure (a fail row or a violated
hypothesis), 2 configuration error, 3 numeric error.
"""

from __future__ import annotations

import argparse
import csv
import re
import sys
from pathlib import Path

from .config import (
    ConfigError,
    ExperimentConfig,
    build_contraction,
    build_operator,
    build_schedule,
    load_config,
    schedule_with_moduli,
    start_point,
)
from .core import DomainError, MissingModulus, PreconditionViolation
from .experiments import Setup, all_certificates, shrink
from .iteration import IterationTrace, write_trace_csv
from .rates import RateCertificate, provenance_text, write_certificate_csv
from .verify import certify_all

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def slug(name: str) -> str:
    """File-name-safe form of a certificate name."""
    return re.sub(r"[^A-Za-z0-9]+", "_", name.replace("*", "star")).strip("_")


def setup_from_config(cfg: ExperimentConfig) -> Setup:
    op = build_operator(cfg)
    f = build_contraction(cfg)
    sched = schedule_with_moduli(cfg, build_schedule(cfg, f))
    x0, z = start_point(cfg, op)
    scheme = "hppa" if f.alpha == 0 and cfg.contraction.kind == "constant" else ("vam" if sched.errors.is_zero else "vame")
    label = f"{op.label}|{scheme}|{sched.label}|seed={cfg.run.seed}"
    return Setup(op, f, sched, x0, z, scheme, cfg.run.horizon, label)


def build_certificates(cfg: ExperimentConfig, setup: Setup) -> list[RateCertificate]:
    certs = all_certificates(setup, ms=cfg.run.m)
    if cfg.run.shrink:
        certs = [shrink(c, cfg.run.shrink) for c in certs]
    return certs


def _out(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.run.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _run_trace(cfg: ExperimentConfig, setup: Setup) -> IterationTrace:
    trace = setup.run()
    write_trace_csv(trace, _out(cfg) / "trace.csv")
    return trace


def cmd_run(cfg: ExperimentConfig) -> int:
    setup = setup_from_config(cfg)
    trace = _run_trace(cfg, setup)
    N = trace.horizon
    print(
        f"{setup.label}: N={N}, ||x_N - x_(N-1)|| = {trace.successive[-1]:.6g}, "
        f"||x_N - J x_N|| = {trace.scheme[-1]:.6g} -> {Path(cfg.run.output_dir) / 'trace.csv'}"
    )
    return EXIT_OK


def _write_certificates(cfg: ExperimentConfig, certs: list[RateCertificate]) -> None:
    d = _out(cfg) / "certificates"
    d.mkdir(exist_ok=True)
    for c in certs:
        write_certificate_csv(c, d / f"{slug(c.name)}.csv", cfg.run.k_max)
        (d / f"{slug(c.name)}.txt").write_text(provenance_text(c))


def cmd_certify(cfg: ExperimentConfig) -> int:
    setup = setup_from_config(cfg)
    certs = build_certificates(cfg, setup)
    _write_certificates(cfg, certs)
    for c in certs:
        head = [c.modulus(k) for k in range(min(cfg.run.k_max, 2) + 1)]
        shown = ", ".join("saturated" if v >= c.modulus.ceiling else str(v) for v in head)
        print(f"{c.name:<24} {c.kind_label:<12} {shown}, ...")
    return EXIT_OK


def cmd_verify(cfg: ExperimentConfig) -> int:
    setup = setup_from_config(cfg)
    trace = _run_trace(cfg, setup)
    certs = build_certificates(cfg, setup)
    _write_certificates(cfg, certs)
    try:
        reports = certify_all(trace, certs, cfg.run.k_max)
    except PreconditionViolation as exc:
        print(f"precondition violation: {exc}", file=sys.stderr)
        return EXIT_FAIL
    d = _out(cfg) / "reports"
    d.mkdir(exist_ok=True)
    lines = []
    for r in reports:
        r.write_csv(d / f"{slug(r.certificate)}.csv")
        lines.append(r.summary())
    failed = sum(len(r.failures) for r in reports)
    lines.append(f"{len(reports)} certificates, {failed} fail rows")
    text = "\n".join(lines) + "\n"
    (_out(cfg) / "summary.txt").write_text(text)
    print(text, end="")
    return EXIT_FAIL if failed else EXIT_OK


def cmd_report(cfg: ExperimentConfig) -> int:
    d = Path(cfg.run.output_dir) / "reports"
    files = sorted(d.glob("*.csv")) if d.is_dir() else []
    if not files:
        print(f"no reports under {d}; run verify first", file=sys.stderr)
        return EXIT_CONFIG
    out_rows = []
    totals = {}
    for path in files:
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                out_rows.append([path.stem, row["k"], row["certified"], row["empirical"], row["max_residual"], row["status"]])
                totals.setdefault(path.stem, {"pass": 0, "fail": 0, "skipped": 0})[row["status"]] += 1
    with open(Path(cfg.run.output_dir) / "report.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["certificate", "k", "certified", "empirical", "max_residual", "status"])
        w.writerows(out_rows)
    for name, t in totals.items():
        print(f"{name:<28} pass {t['pass']:>4}  fail {t['fail']:>4}  skipped {t['skipped']:>4}")
    return EXIT_FAIL if any(t["fail"] for t in totals.values()) else EXIT_OK


COMMANDS = {"run": cmd_run, "certify": cmd_certify, "verify": cmd_verify, "report": cmd_report}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vamrates", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("config", help="experiment config (INI)")
    p.add_argument("--output-dir", help="override [run] output_dir")
    p.add_argument("--seed", type=int, help="override [run] seed")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config).with_overrides(seed=args.seed, output_dir=args.output_dir)
        return COMMANDS[args.command](cfg)
    except MissingModulus as exc:
        print(f"missing modulus: {exc}; declare it in [schedule] or set brute_force = true", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigError, DomainError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FloatingPointError, ArithmeticError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
