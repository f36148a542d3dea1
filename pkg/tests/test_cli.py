import csv
import io
import json
import math
import subprocess
import sys
from importlib import resources

import jsonschema
import numpy as np
import pytest

from hjbwaves.cli import PROFILE_HEADER, SWEEP_HEADER, main


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def json_of(argv, capsys):
    code, out, _ = run(argv, capsys)
    return code, json.loads(out)


def rows_of(text):
    return list(csv.DictReader(io.StringIO(text)))


def schema(name):
    text = resources.files("hjbwaves").joinpath(f"schemas/{name}.schema.json").read_text()
    return json.loads(text)


GENERAL = ["--variant", "general", "--m", "1.5", "--omega", "1", "--v-left", "1", "--v-right", "3.3333333333333335"]


# --------------------------------------------------------------------------
# spec


def test_spec_general_example(capsys):
    code, rep = json_of(["spec", *GENERAL], capsys)
    assert code == 0
    assert rep["c"] == pytest.approx(-0.1, abs=1e-12)
    assert rep["K0"] == pytest.approx(0.1, abs=1e-12)
    assert rep["validation"]["valid"]
    vs = [r["v"] for r in rep["roots"]]
    assert vs == pytest.approx([0.65, 1.0, 10 / 3], abs=1e-9)
    assert [r["g_prime_sign"] for r in rep["roots"]] == [-1, 1, -1]
    jsonschema.validate(rep, schema("spec"))


def test_spec_rounded_limit(capsys):
    code, rep = json_of(["spec", "--variant", "general", "--m", "1.5", "--v-left", "1", "--v-right", "3.3333"], capsys)
    assert code == 0
    assert rep["c"] == pytest.approx(-0.1, abs=1e-5)
    assert rep["K0"] == pytest.approx(0.1, abs=1e-5)


def test_spec_simple_example(capsys):
    code, rep = json_of(["spec", "--variant", "simple", "--v-left", "2", "--v-right", "0.5"], capsys)
    assert code == 0
    assert rep["c"] == pytest.approx(1 / 12, rel=1e-14)
    assert rep["K0"] == pytest.approx(-1 / 6, rel=1e-14)
    jsonschema.validate(rep, schema("spec"))


def test_spec_no_wave_exit_code(capsys):
    code, out, err = run(["spec", "--variant", "general", "--m", "2.5", "--v-left", "1", "--v-right", "3"], capsys)
    assert code == 3
    rep = json.loads(out)
    assert not rep["validation"]["valid"] and rep["validation"]["failures"]
    assert "no traveling wave" in err
    jsonschema.validate(rep, schema("spec"))


@pytest.mark.parametrize(
    "limits",
    [("2", "3"), ("0.5", "0.7"), ("2", "2"), ("-1", "2")],
    ids=["both-above", "both-below", "equal", "negative"],
)
def test_spec_invalid_limits(capsys, limits):
    code, out, err = run(["spec", "--v-left", limits[0], "--v-right", limits[1]], capsys)
    assert code == 2 and out == ""
    assert "invalid input" in err


def test_bad_option_value(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["spec", "--omega", "abc"])
    assert exc.value.code == 2
    capsys.readouterr()
    code, _, err = run(["spec", "--omega", "-1"], capsys)
    assert code == 2 and "omega" in err


# --------------------------------------------------------------------------
# profile


@pytest.fixture(scope="module")
def simple_csv():
    buf = io.StringIO()
    old, sys.stdout = sys.stdout, buf
    try:
        assert main(["profile", "--variant", "simple", "--v-left", "2", "--v-right", "0.5"]) == 0
    finally:
        sys.stdout = old
    return buf.getvalue()


def test_profile_header_exact(simple_csv):
    assert simple_csv.splitlines()[0] == "xi,z,v,theta"
    assert PROFILE_HEADER == ["xi", "z", "v", "theta"]


def test_profile_origin_row(simple_csv):
    assert "\n0,0.5,1,1\n" in simple_csv


def test_profile_columns(simple_csv):
    data = np.loadtxt(io.StringIO(simple_csv), delimiter=",", skiprows=1)
    xi, z, v, theta = data.T
    assert np.all(np.diff(xi) > 0)
    assert np.all(np.diff(z) < 0) and np.all(np.diff(v) < 0)
    assert np.all((theta > 0) & (theta <= 1))
    # every number round-trips through its printed form
    for line in simple_csv.splitlines()[1:50]:
        for cell in line.split(","):
            assert "%.17g" % float(cell) == cell


def test_profile_general_range(capsys):
    code, out, _ = run(["profile", *GENERAL], capsys)
    assert code == 0
    v = np.loadtxt(io.StringIO(out), delimiter=",", skiprows=1)[:, 2]
    assert np.all(v > 1) and np.all(v < 10 / 3)
    assert np.all(np.diff(v) > 0)


# --------------------------------------------------------------------------
# config layering and output location


def test_config_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# example A\nvariant = general\nm = 1.5\nv-left = 1\nv_right = 3.3333333333333335\nomega = 2\n")
    code, rep = json_of(["spec", "--config", str(cfg)], capsys)
    assert code == 0 and rep["variant"] == "general" and rep["omega"] == 2.0
    code, rep = json_of(["spec", "--config", str(cfg), "--omega", "1"], capsys)
    assert code == 0 and rep["omega"] == 1.0
    assert rep["c"] == pytest.approx(-0.1, abs=1e-12)


@pytest.mark.parametrize(
    "text", ["nonsense = 1\n", "omega 1\n", "variant = cubic\n", "omega = x\n"], ids=["unknown", "no-eq", "choice", "type"]
)
def test_config_errors(tmp_path, capsys, text):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(text)
    code, _, err = run(["spec", "--config", str(cfg)], capsys)
    assert code == 2 and "invalid input" in err


def test_missing_config_file(tmp_path, capsys):
    code, _, err = run(["spec", "--config", str(tmp_path / "nope.cfg")], capsys)
    assert code == 2


def test_output_locations(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("HJBWAVES_OUTPUT_DIR", str(tmp_path / "out"))
    code, out, _ = run(["spec"], capsys)
    assert code == 0 and out == ""
    rep = json.loads((tmp_path / "out" / "spec.json").read_text())
    assert rep["c"] == pytest.approx(1 / 12)
    target = tmp_path / "explicit.json"
    assert run(["spec", "-o", str(target)], capsys)[0] == 0
    assert json.loads(target.read_text()) == rep


def test_help_lists_defaults(capsys):
    with pytest.raises(SystemExit):
        main(["verify", "--help"])
    out = capsys.readouterr().out
    assert "default: 2048" in out and "--config" in out


# --------------------------------------------------------------------------
# verify


def test_verify_simple(capsys):
    code, rep = json_of(["verify", "--n-cells", "512", "--snapshots", "41"], capsys)
    assert code == 0 and rep["passed"]
    assert rep["c_relative_error"] < 0.02
    assert rep["residual_constant"] < 1e-6
    assert rep["bounds"]["passed"]
    jsonschema.validate(rep, schema("verify"))


def test_verify_failed_check_exit_code(capsys):
    # a level outside the profile range has no crossing
    code, out, err = run(["verify", "--n-cells", "256", "--level", "5"], capsys)
    assert code == 4 and "numerical failure" in err


# --------------------------------------------------------------------------
# simulate

SIM = ["simulate", "--n-paths", "4000", "--n-steps", "100", "--seed", "17", "--thetas", "0.5,1"]


def test_simulate_deterministic(capsys):
    code, first, _ = run(SIM, capsys)
    assert code == 0
    _, second, _ = run([*SIM, "--threads", "3"], capsys)
    assert first == second
    rep = json.loads(first)
    jsonschema.validate(rep, schema("simulate"))
    assert [r["policy"] for r in rep["results"]] == ["wave_optimal", "constant(0.5)", "constant(1)"]
    _, other, _ = run([*SIM[:-4], "--seed", "18", "--thetas", "0.5,1"], capsys)
    assert other != first


def test_simulate_cara_oracle(capsys):
    code, rep = json_of([*SIM, "--utility", "cara", "--lam", "1.3"], capsys)
    assert code == 0
    for block in rep["results"][1:]:
        assert abs(block["oracle_z"]) < 3
    jsonschema.validate(rep, schema("simulate"))


def test_simulate_bad_theta(capsys):
    code, _, err = run([*SIM[:-1], "0,1"], capsys)
    assert code == 2


# --------------------------------------------------------------------------
# sweep


def lower_upper_roots(c, K0, lo, hi):
    """Roots of G for the General model m = 3/2, alpha = beta = 0, omega = 1.

    On v <= 1, G = (2/3) v^2 + (c - 1) v + K0 + 1/3; on v > 1, v G =
    c v^2 + (K0 + 1/3) v - 1/3.
    """
    out = []
    for coeffs, keep in (
        ([2 / 3, c - 1, K0 + 1 / 3], lambda v: lo <= v <= min(1.0 + 1e-9, hi)),  # v = 1 may come back a hair above
        ([c, K0 + 1 / 3, -1 / 3], lambda v: max(1.0 + 1e-9, lo) < v <= hi),
    ):
        r = np.roots(coeffs)
        out += [x.real for x in r if abs(x.imag) < 1e-12 and keep(x.real)]
    # a double root counts once
    out = sorted(out)
    return [v for i, v in enumerate(out) if i == 0 or v - out[i - 1] > 1e-7]


def test_sweep_general_counts(capsys):
    code, out, _ = run(
        ["sweep", "--variant", "general", "--m", "1.5", "--c-range=-0.12:-0.06:7", "--k0-range", "0.1:0.1:1",
         "--search", "0.1:20"],
        capsys,
    )
    assert code == 0
    assert out.splitlines()[0] == ",".join(SWEEP_HEADER)
    rows = rows_of(out)
    assert len(rows) == 7
    counts = []
    for row in rows:
        c, K0 = float(row["c"]), float(row["K0"])
        assert int(row["root_count"]) == len(lower_upper_roots(c, K0, 0.1, 20.0))
        counts.append(int(row["root_count"]))
    assert counts == [3, 3, 3, 3, 3, 1, 1]
    by_c = {round(float(r["c"]), 3): r for r in rows}
    assert by_c[-0.1]["wave_exists"] == "true"
    assert float(by_c[-0.1]["v_left"]) == pytest.approx(1.0, abs=1e-9)
    assert float(by_c[-0.1]["v_right"]) == pytest.approx(10 / 3, abs=1e-8)
    assert by_c[-0.06]["wave_exists"] == "false"


def test_sweep_simple_region_always_has_wave(capsys):
    # c > 0 and K0 + c < 0; K0 > -1/2 keeps the lower root positive
    code, out, _ = run(
        ["sweep", "--variant", "simple", "--c-range", "0.05:0.3:6", "--k0-range=-0.45:-0.36:4", "--search", "0.001:100"],
        capsys,
    )
    assert code == 0
    rows = rows_of(out)
    assert len(rows) == 24
    for row in rows:
        assert row["root_count"] == "2" and row["wave_exists"] == "true", row
        c, K0 = float(row["c"]), float(row["K0"])
        assert float(row["v_left"]) == pytest.approx(-K0 / c, rel=1e-9)


def test_sweep_limits_flags_degenerate(capsys):
    code, out, _ = run(
        ["sweep", "--over", "limits", "--v-left-range", "0.5:2:4", "--v-right-range", "0.5:2:4"], capsys
    )
    assert code == 0
    rows = rows_of(out)
    assert len(rows) == 16
    for row in rows:
        vl, vr = float(row["v_left"]), float(row["v_right"])
        if not min(vl, vr) <= 1 < max(vl, vr):
            assert row["status"].startswith("invalid") and row["wave_exists"] == "false"
        elif 1.0 in (vl, vr):
            # B = 0 for v >= 1, so c = K0 = 0 and G vanishes on the upper branch
            assert row["status"].startswith("degenerate") and row["wave_exists"] == "false"
        elif vl > 1:
            assert row["status"] == "ok" and row["wave_exists"] == "true"
            assert float(row["c"]) > 0 and row["root_count"] == "2"
        else:
            # increasing Simple waves do not exist
            assert row["status"] == "ok" and row["wave_exists"] == "false"


def test_spec_degenerate_simple_limit(capsys):
    code, _, err = run(["spec", "--v-left", "2", "--v-right", "1"], capsys)
    assert code == 3 and "vanishes identically" in err


# --------------------------------------------------------------------------
# console script


def test_console_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "hjbwaves.cli", "spec", "--variant", "general", "--m", "2.5", "--v-left", "1",
         "--v-right", "3"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 3
    proc = subprocess.run([sys.executable, "-m", "hjbwaves.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("hjbwaves ")
    assert math.isfinite(json.loads(
        subprocess.run([sys.executable, "-m", "hjbwaves.cli", "spec"], capture_output=True, text=True).stdout
    )["c"])
