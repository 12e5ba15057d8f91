import csv
import io

import pytest

from nsgalerkin.cli import build_parser, main, resolve_config


def run(*argv):
    buf = io.StringIO()
    code = main(list(argv), stream=buf)
    return code, buf.getvalue()


def test_constants(tmp_path):
    code, out = run("constants", "--out", str(tmp_path), "--set", "r_max=8")
    assert code == 0 and "PASS" in out
    with open(tmp_path / "constants.csv") as fh:
        assert next(csv.reader(fh)) == ["p", "range", "lattice_sum", "integral", "ratio"]


def test_simulate(tmp_path):
    code, _ = run("simulate", "--out", str(tmp_path), "--cutoff", "5", "--epsilon", "0.01",
                  "--t-end", "0.05", "--dt", "0.01", "--seed", "3")
    assert code == 0
    header = (tmp_path / "trajectory.csv").read_text().splitlines()[0].split(",")
    assert header[:9] == ["time", "phi2", "l2", "h_half", "h1", "tail_phi", "tail_K_min",
                          "tail_enstrophy", "tail_k0"]


@pytest.mark.parametrize("scheme", ["exponential-euler", "if-rk4"])
def test_smallness_complex(tmp_path, scheme):
    code, out = run("smallness", "--out", str(tmp_path), "--cutoff", "5", "--epsilon", "0.001",
                    "--t-end", "0.05", "--dt", "0.01", "--complex", "--scheme", scheme)
    assert code == 0 and "real-valued" in out


def test_no_nonlinear_flag():
    args = build_parser().parse_args(["smallness", "--no-nonlinear", "--complex"])
    cfg = resolve_config(args, "smallness")
    assert cfg.nonlinear is False and cfg.real is False


def test_precedence(tmp_path):
    cfg_file = tmp_path / "c.cfg"
    cfg_file.write_text("cutoff = 7\nepsilon = 0.002  # small\ndt = 0.004\n")
    args = build_parser().parse_args(["smallness", "--config", str(cfg_file), "--set",
                                      "epsilon=0.003", "--dt", "0.005"])
    cfg = resolve_config(args, "smallness")
    assert (cfg.cutoff, cfg.epsilon, cfg.dt) == (7.0, 0.003, 0.005)


def test_bootstrap_and_h_half(tmp_path):
    code, _ = run("bootstrap-study", "--out", str(tmp_path / "b"), "--cutoff", "12",
                  "--epsilon", "0.1", "--dt", "0.005", "--no-nonlinear")
    assert code == 0
    code, out = run("h-half-study", "--out", str(tmp_path / "h"), "--set", "L0=0.05")
    assert code == 1 and "REFUSED" in out


def test_verify_bounds_reports_margins(tmp_path):
    code, _ = run("verify-bounds", "--out", str(tmp_path), "--cutoff", "4",
                  "--epsilon", "0.001", "--scheme", "T2")
    rows = list(csv.DictReader(open(tmp_path / "verify_bounds.csv")))
    assert rows and set(rows[0]) == {"k1", "k2", "k3", "region", "computed", "claimed", "margin"}
    for r in rows:
        assert float(r["margin"]) == pytest.approx(float(r["claimed"]) - float(r["computed"]))
    failed = any(float(r["margin"]) < 0 for r in rows)
    assert code == (1 if failed else 0)


def test_report(tmp_path):
    good = tmp_path / "good"
    run("constants", "--out", str(good), "--set", "r_max=8")
    code, out = run("report", str(good))
    assert code == 0 and "PASS" in out
    refused = tmp_path / "refused"
    run("h-half-study", "--out", str(refused), "--set", "L0=0.05")
    code, _ = run("report", str(good), str(refused))
    assert code == 1
    code, out = run("report", str(tmp_path / "missing"))
    assert code == 1 and "no checks.csv" in out
    assert run("report")[0] == 2


@pytest.mark.parametrize(
    "argv", [["smallness", "--set", "bogus=1"], ["simulate", "--dt", "-1", "--t-end", "0.1"],
             ["verify-bounds", "--scheme", "T9", "--cutoff", "4"], ["smallness", "--set", "cutoff"],
             ["constants", "--config", "/nonexistent/run.cfg"]],
)
def test_invalid_input_exits_2(argv, tmp_path):
    assert main(argv + ["--out", str(tmp_path)], stream=io.StringIO()) == 2
