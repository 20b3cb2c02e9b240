"""Command-line surface: exit codes, CSV contract, JSON determinism,
spec files, and the verification suite wiring."""

import io
import json
import math

import numpy as np
import pytest

from crossprob import cli
from crossprob.special import norm_cdf


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def parse_csv(text):
    lines = text.strip().splitlines()
    assert lines[0] == "t,cdf,pdf"
    rows = [tuple(float(x) for x in line.split(",")) for line in lines[1:]]
    return rows


# -- prob ---------------------------------------------------------------------


def test_prob_linear(capsys):
    code, out, _ = run(capsys, "prob", "--family", "linear",
                       "--a", "1", "--b", "0", "--T", "1", "--json")
    assert code == 0
    payload = json.loads(out)
    assert payload["probability"] == pytest.approx(0.31731050786291415, abs=1e-14)
    assert payload["conditions_met"] is True


def test_prob_refusal_exit_2(capsys):
    code, out, _ = run(capsys, "prob", "--family", "log-remaining",
                       "--a", "0.5", "--b", "2.718281828", "--T", "1")
    assert code == 2
    assert "refused" in out
    assert "sqrt(T*ln(b/T))" in out


def test_prob_missing_parameter(capsys):
    code, _, err = run(capsys, "prob", "--family", "linear", "--a", "1", "--b", "0")
    assert code == 2
    assert "--T" in err


def test_usage_error_is_64():
    with pytest.raises(SystemExit) as exc:
        cli.main(["frobnicate"])
    assert exc.value.code == 64
    with pytest.raises(SystemExit) as exc:
        cli.main(["prob", "--family", "cubic", "--T", "1"])
    assert exc.value.code == 64


def test_prob_spec_file_curved(capsys, tmp_path):
    spec = {"schema": 1, "family": "two-sided-curved",
            "params": {"a": 1.0, "b": -1.0, "c": 0.5}, "horizon": 1.0}
    path = tmp_path / "barrier.json"
    path.write_text(json.dumps(spec))
    code, out, _ = run(capsys, "prob", "--spec", str(path), "--json")
    assert code == 0
    ref = (norm_cdf(-1.0) + norm_cdf(-1.0)) / 0.5
    assert json.loads(out)["probability"] == pytest.approx(ref, abs=1e-14)


def test_prob_spec_file_unknown_schema(capsys, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"schema": 3, "family": "linear",
                                "params": {"a": 1, "b": 0}, "horizon": 1}))
    code, _, err = run(capsys, "prob", "--spec", str(path))
    assert code == 2
    assert "schema" in err


# -- density ------------------------------------------------------------------


def test_density_csv_round_trip(capsys):
    code, out, _ = run(capsys, "density", "--family", "sqrt-remaining",
                       "--a", "1", "--b", "1", "--T", "1",
                       "--kind", "sigma", "--points", "50")
    assert code == 0
    rows = parse_csv(out)
    assert len(rows) == 50
    # 17 significant digits round-trip exactly
    for line in out.strip().splitlines()[1:3]:
        for field in line.split(","):
            v = float(field)
            assert f"{v:.17g}" == field


def test_density_arcsine_symmetry(capsys):
    code, out, _ = run(capsys, "density", "--family", "linear",
                       "--a", "0", "--b", "0", "--T", "1",
                       "--kind", "lambda", "--points", "999",
                       "--t-min", "0.001", "--t-max", "0.999")
    assert code == 0
    rows = parse_csv(out)
    pdf = [r[2] for r in rows]
    for left, right in zip(pdf, pdf[::-1]):
        assert left == pytest.approx(right, abs=1e-13)


@pytest.mark.parametrize("argv", [
    ("--family", "linear", "--a", "1", "--b", "0.5", "--T", "1"),
    ("--family", "sqrt-remaining", "--a", "1", "--b", "1", "--T", "1"),
    ("--family", "log-remaining", "--a", "1.5", "--b", "2.718281828459045",
     "--T", "1"),
    ("--family", "hermite", "--a", "3", "--b", "7", "--n", "3", "--T", "2"),
    ("--family", "two-sided-constant", "--a", "1", "--b", "-1", "--T", "1"),
    ("--family", "two-sided-curved", "--a", "1", "--b", "-1", "--c", "0.5",
     "--T", "1"),
    ("--family", "time-inverted", "--a", "1", "--b", "1", "--T", "1",
     "--kind", "hitting_inverted"),
    ("--family", "images-lambert", "--a", "1", "--b", "2", "--T", "1",
     "--kind", "hitting_images"),
], ids=lambda a: a[1])
def test_density_cdf_monotone_every_family(capsys, argv):
    code, out, _ = run(capsys, "density", *argv, "--points", "64")
    assert code == 0
    rows = parse_csv(out)
    cdf = [r[1] for r in rows]
    assert all(b >= a - 1e-12 for a, b in zip(cdf, cdf[1:]))


def test_density_trapezoid_consistency(capsys):
    code, out, _ = run(capsys, "density", "--family", "sqrt-remaining",
                       "--a", "1", "--b", "1", "--T", "1",
                       "--kind", "sigma", "--points", "10000",
                       "--t-min", "0.01", "--t-max", "0.99")
    assert code == 0
    rows = np.array(parse_csv(out))
    t, cdf, pdf = rows[:, 0], rows[:, 1], rows[:, 2]
    integral = float(np.sum(0.5 * (pdf[1:] + pdf[:-1]) * np.diff(t)))
    assert abs(integral - (cdf[-1] - cdf[0])) < 1e-4


def test_density_out_file(capsys, tmp_path):
    target = tmp_path / "curve.csv"
    code, out, _ = run(capsys, "density", "--family", "linear",
                       "--a", "1", "--b", "0", "--T", "1",
                       "--points", "10", "--out", str(target))
    assert code == 0
    assert "wrote 10 rows" in out
    assert len(parse_csv(target.read_text())) == 10


# -- mc -----------------------------------------------------------------------


MC_FAST = ("--paths", "8192", "--steps", "64", "--seed", "5")


def test_mc_json_deterministic(capsys):
    argv = ("mc", "--family", "linear", "--a", "1", "--b", "0", "--T", "1",
            *MC_FAST, "--json")
    code1, out1, _ = run(capsys, *argv)
    code2, out2, _ = run(capsys, *argv)
    assert code1 == code2 == 0
    assert out1 == out2
    payload = json.loads(out1)
    assert abs(payload["z"]) < 5.0
    assert payload["analytic"] == pytest.approx(0.31731050786291415, abs=1e-14)


def test_mc_text_report(capsys):
    code, out, _ = run(capsys, "mc", "--family", "linear", "--a", "1",
                       "--b", "0", "--T", "1", *MC_FAST)
    assert code == 0
    assert "estimate:" in out and "analytic" in out and "z:" in out


def test_mc_no_bridge_flag(capsys):
    on = run(capsys, "mc", "--family", "sqrt-remaining", "--a", "1", "--b", "1",
             "--T", "1", *MC_FAST, "--json")[1]
    off = run(capsys, "mc", "--family", "sqrt-remaining", "--a", "1", "--b", "1",
              "--T", "1", *MC_FAST, "--no-bridge", "--json")[1]
    assert json.loads(on)["estimate"] > json.loads(off)["estimate"]


def test_mc_fortet(capsys):
    code, out, _ = run(capsys, "mc", "--family", "linear", "--a", "1",
                       "--b", "0", "--T", "1", "--fortet", "--v", "1.5",
                       *MC_FAST, "--json")
    assert code == 0
    payload = json.loads(out)
    assert payload["lhs"] == pytest.approx(
        math.exp(-0.5 * 1.5 ** 2) / math.sqrt(2 * math.pi), rel=1e-12)
    assert abs(payload["z"]) < 5.0


def test_mc_fortet_needs_v(capsys):
    code, _, err = run(capsys, "mc", "--family", "linear", "--a", "1",
                       "--b", "0", "--T", "1", "--fortet", *MC_FAST)
    assert code == 2
    assert "--v" in err


def test_mc_last_exit_times(capsys):
    code, out, _ = run(capsys, "mc", "--family", "sqrt-remaining", "--a", "1",
                       "--b", "1", "--T", "1", "--times", "0.25,0.75",
                       *MC_FAST, "--json")
    assert code == 0
    rows = json.loads(out)["rows"]
    assert len(rows) == 2
    for row in rows:
        assert abs(row["sigma_mc"] - row["sigma_analytic"]) < 6 * row["sigma_se"]
        assert row["lambda_mc"] >= row["sigma_mc"]


def test_mc_last_exit_two_sided(capsys):
    code, out, _ = run(capsys, "mc", "--family", "two-sided-constant",
                       "--a", "1", "--b", "-1", "--T", "1",
                       "--times", "0.5", *MC_FAST, "--json")
    assert code == 0
    (row,) = json.loads(out)["rows"]
    assert abs(row["sigma_mc"] - row["sigma_analytic"]) < 6 * row["sigma_se"]


# -- verify -------------------------------------------------------------------


def test_verify_default_passes(capsys):
    code, out, _ = run(capsys, "verify")
    assert code == 0
    assert "overall: PASS" in out
    assert "[FAIL]" not in out


def test_verify_json(capsys):
    code, out, _ = run(capsys, "verify", "--json")
    assert code == 0
    report = json.loads(out)
    assert report["all_pass"] is True
    names = {c["check"] for c in report["checks"]}
    assert "identity:images-lambert" in names
    assert "gstar:unboundedness-detected" in names


def test_verify_gstar_mode_fails(capsys):
    code, out, _ = run(capsys, "verify", "--gstar")
    assert code == 1
    assert "overall: FAIL" in out
    assert "gstar:bounded-below-barrier" in out


def test_verify_include_mc_reduced(capsys):
    argv = ("verify", "--include-mc", "--paths", "8192", "--exit-paths", "8192",
            "--steps", "64", "--seed", "1", "--json")
    code1, out1, _ = run(capsys, *argv)
    code2, out2, _ = run(capsys, *argv)
    assert out1 == out2            # deterministic report, byte for byte
    report = json.loads(out1)
    assert "mc" in report and "crossing" in report["mc"]
    # at this scale statistical rows may fail; structure must be intact
    assert {r["name"] for r in report["mc"]["crossing"]} == {
        "linear", "sqrt-remaining", "log-remaining", "hermite",
        "time-inverted", "two-sided-constant", "two-sided-curved",
        "images-lambert"}
