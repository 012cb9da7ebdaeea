import csv
import subprocess
import sys
from pathlib import Path


from vamrates.cli import main, slug

ROOT = Path(__file__).resolve().parent.parent

EXAMPLE2 = """
[operator]
kind = scaled_identity
dimension = 1

[contraction]
kind = affine
alpha = 0.0
b = {b}

[schedule]
preset = example2
e_star = {e}

[run]
x0 = {x0}
horizon = {horizon}
k_max = {k_max}
m = 0, 2
"""

EXAMPLE1 = """
[operator]
kind = l1
dimension = 2

[contraction]
kind = affine
alpha = 0.0

[schedule]
preset = example1
lambda = 1.0

[run]
x0 = {x0}
z = 0, 0
horizon = 500
k_max = 10
"""


def write(tmp_path, text, name="cfg.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def ex2(tmp_path, b=0.5, e=1.0, x0=3.0, horizon=2000, k_max=20, extra=""):
    return write(tmp_path, EXAMPLE2.format(b=b, e=e, x0=x0, horizon=horizon, k_max=k_max) + extra)


def test_run_writes_trace(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["run", ex2(tmp_path, horizon=300), "--output-dir", str(out)]) == 0
    r = rows(out / "trace.csv")
    assert r[0] == ["n", "alpha_n", "lambda_n", "err_norm", "succ_residual", "scheme_residual", "kz"]
    assert len(r) == 302
    assert "N=300" in capsys.readouterr().out


def test_minimal_run(tmp_path):
    assert main(["run", ex2(tmp_path, horizon=10), "--output-dir", str(tmp_path / "o")]) == 0


def test_nonpositive_lambda_is_a_config_error(tmp_path, capsys):
    text = EXAMPLE1.format(x0="1, 1").replace("lambda = 1.0", "lambda = -1.0")
    assert main(["run", write(tmp_path, text), "--output-dir", str(tmp_path)]) == 2
    assert "schedule" in capsys.readouterr().err
    custom = EXAMPLE1.format(x0="1, 1").replace("preset = example1\nlambda = 1.0", "preset = custom\nalpha_n = 0.5\nlambda_n = 1 - n")
    assert main(["run", write(tmp_path, custom), "--output-dir", str(tmp_path)]) == 2


def test_certify_example1_phi0(tmp_path):
    out = tmp_path / "o"
    assert main(["certify", write(tmp_path, EXAMPLE1.format(x0="0, 0")), "--output-dir", str(out)]) == 0
    r = rows(out / "certificates" / "Phi0.csv")
    assert [int(x[1]) for x in r[1:]] == [4 * k + 2 for k in range(11)]
    assert (out / "certificates" / "Phi0.txt").read_text().startswith("certificate: Phi0")


def test_certify_example2_theta0(tmp_path):
    out = tmp_path / "o"
    assert main(["certify", ex2(tmp_path, b=0.0, e=0.0, x0=0.5), "--output-dir", str(out)]) == 0
    r = rows(out / "certificates" / f"{slug('Theta0[m=0]')}.csv")
    assert [int(x[1]) for x in r[1:]] == [36 * k + 34 for k in range(21)]


def test_custom_without_moduli_is_missing_modulus(tmp_path, capsys):
    text = EXAMPLE1.format(x0="1, 1").replace("preset = example1\nlambda = 1.0", "preset = custom\nalpha_n = 1/(n+2)\nlambda_n = 1")
    assert main(["certify", write(tmp_path, text), "--output-dir", str(tmp_path / "o")]) == 2
    assert "missing modulus" in capsys.readouterr().err


def test_verify_example2_passes(tmp_path):
    out = tmp_path / "o"
    assert main(["verify", ex2(tmp_path), "--output-dir", str(out)]) == 0
    summary = (out / "summary.txt").read_text()
    assert summary.rstrip().endswith("0 fail rows")
    assert (out / "reports" / "Phi0.csv").exists()


def test_verify_shrunk_fails(tmp_path):
    assert main(["verify", ex2(tmp_path, x0=40.0, extra="shrink = 1000\n"), "--output-dir", str(tmp_path / "o")]) == 1


def test_verify_stationary(tmp_path):
    out = tmp_path / "o"
    assert main(["verify", write(tmp_path, EXAMPLE1.format(x0="0, 0")), "--output-dir", str(out)]) == 0
    for report in (out / "reports").glob("*.csv"):
        for row in rows(report)[1:]:
            assert row[2] == "0"
            assert row[4] in ("pass", "skipped")


def test_negative_control_config(tmp_path, capsys):
    assert main(["verify", str(ROOT / "configs" / "custom_harmonic_errors.ini"), "--output-dir", str(tmp_path)]) == 1
    assert "H1e" in capsys.readouterr().err


def test_report_merges(tmp_path, capsys):
    cfg = ex2(tmp_path)
    out = tmp_path / "o"
    assert main(["report", cfg, "--output-dir", str(out)]) == 2
    main(["verify", cfg, "--output-dir", str(out)])
    capsys.readouterr()
    assert main(["report", cfg, "--output-dir", str(out)]) == 0
    merged = rows(out / "report.csv")
    assert merged[0] == ["certificate", "k", "certified", "empirical", "max_residual", "status"]
    assert {r[0] for r in merged[1:]} >= {"Phi0", "Psi0"}
    assert "Phi0" in capsys.readouterr().out


def test_outputs_are_byte_identical(tmp_path):
    cfg = write(tmp_path, (ROOT / "configs" / "example1.ini").read_text())
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["verify", cfg, "--output-dir", str(a)]) == 0
    assert main(["verify", cfg, "--output-dir", str(b)]) == 0
    files = sorted(p.relative_to(a) for p in a.rglob("*.csv"))
    assert len(files) > 5
    for rel in files:
        assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel
    c = tmp_path / "c"
    main(["run", cfg, "--output-dir", str(c), "--seed", "7"])
    assert (c / "trace.csv").read_bytes() != (a / "trace.csv").read_bytes()


def test_missing_file(tmp_path):
    assert main(["run", str(tmp_path / "nope.ini")]) == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "vamrates", "verify", "configs/example2.ini", "--output-dir", str(tmp_path)],
        capture_output=True,
        text=True,
        cwd=ROOT,
    )
    assert proc.returncode == 0, proc.stderr
    assert "0 fail rows" in proc.stdout
