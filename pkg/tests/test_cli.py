import csv
import io
import json
import math

import jsonschema
import pytest

from monopole_algebra.cli import (DEFAULT_SEED, SCAN_COLUMNS, SEED_ENV, ConfigError, build_config, build_parser,
                                  fmt_float, load_schema, main, read_config, to_json)


def run(argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(argv, out, err)
    return code, out.getvalue(), err.getvalue()


def config(args):
    return build_config(build_parser().parse_args(args))


def test_verify_clean_build(tmp_path):
    code, out, _ = run(["verify", "--out", str(tmp_path)])
    assert code == 0
    assert out.splitlines()[-1].startswith("OK: ")
    doc = json.loads((tmp_path / "report.json").read_text())
    jsonschema.validate(doc, load_schema())
    assert doc["summary"]["pass"] and doc["summary"]["n_failed"] == 0
    assert doc["summary"]["n_checks"] == len(doc["identities"]) + len(doc["quantization"])
    assert {e["suite"] for e in doc["identities"]} >= {"so3", "so31_monopole", "gauge_covariance"}
    assert (tmp_path / "report.txt").read_text() == out


def test_verify_json_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(["verify", "--seed", "7", "--out", str(a), "--format", "json"])[0] == 0
    assert run(["verify", "--seed", "7", "--out", str(b), "--format", "json"])[0] == 0
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
    assert not (a / "report.txt").exists()


def test_unknown_suite_is_a_usage_error(tmp_path):
    out_dir = tmp_path / "never"
    code, out, err = run(["verify", "--suite", "so7", "--out", str(out_dir)])
    assert code == 2 and "so7" in err and out == ""
    assert not out_dir.exists()


def test_tight_tolerance_reports_residuals(tmp_path):
    code, out, _ = run(["verify", "--suite", "so31_monopole", "--mu", "1.5", "--tolerance", "1e-15",
                        "--out", str(tmp_path), "--format", "json"])
    assert code == 1
    doc = json.loads((tmp_path / "report.json").read_text())
    jsonschema.validate(doc, load_schema())
    failed = [e for e in doc["identities"] if not e["pass"]]
    assert failed and all(e["residual"] > 1e-15 for e in failed)
    assert "FAIL so31_monopole" in out and out.splitlines()[-1].startswith("FAILED")


def test_mutation_flips_the_verdict():
    code, out, _ = run(["verify", "--suite", "so3", "--mutate", "L(A)_x:theta:1e-3"])
    assert code == 1 and "FAIL so3" in out
    assert run(["verify", "--suite", "so3"])[0] == 0
    assert run(["verify", "--mutate", "L_x:psi"])[0] == 2


def test_config_file_and_precedence(tmp_path):
    cfg_file = tmp_path / "run.ini"
    cfg_file.write_text("[run]\nsuites = so3, lz_forms\nseed = 11  ; comment\n\n[params]\nmu = 1.0\ngauge = south\n\n"
                        "[grid]\nn_theta = 8\nn_phi = 12\n\n[scan]\ndelta_z = 1e-2, 1e-3, 1e-4\n")
    cfg = config(["verify", "--config", str(cfg_file)])
    assert cfg.suites == ["so3", "lz_forms"] and cfg.seed == 11 and cfg.mu == 1.0
    assert cfg.gauges == ("south",) and (cfg.grid.n_theta, cfg.grid.n_phi) == (8, 12)
    assert cfg.delta_z == (1e-2, 1e-3, 1e-4)
    cfg = config(["verify", "--config", str(cfg_file), "--seed", "3", "--mu", "0.5", "--gauge", "north"])
    assert (cfg.seed, cfg.mu, cfg.gauges) == (3, 0.5, ("north",))
    assert math.isclose(cfg.params.mu, 0.5)


def test_seed_fallback(monkeypatch):
    monkeypatch.delenv(SEED_ENV, raising=False)
    assert config(["verify"]).seed == DEFAULT_SEED
    monkeypatch.setenv(SEED_ENV, "99")
    assert config(["verify"]).seed == 99
    assert config(["verify", "--seed", "5"]).seed == 5
    monkeypatch.setenv(SEED_ENV, "many")
    with pytest.raises(ConfigError):
        config(["verify"])


@pytest.mark.parametrize("text", ["[bogus]\nx = 1\n", "[run]\ncolour = red\n", "[grid]\nn_theta = 1\n",
                                  "[grid]\nmargin = 2.0\n", "[params]\nr = -1\n", "[params]\npreset = moon\n",
                                  "[run]\ntolerance = 0\n", "[params]\nmu = nan\n", "no section\n"])
def test_bad_config_exits_2(tmp_path, text):
    p = tmp_path / "bad.ini"
    p.write_text(text)
    code, _, err = run(["verify", "--config", str(p)])
    assert code == 2 and "configuration error" in err


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        read_config(tmp_path / "absent.ini")


def test_json_writer():
    assert to_json({"b": 0.1, "a": [1, True, None, float("inf")]}) == '{"a": [1, true, null, null], "b": 0.1}'
    assert float(fmt_float(1 / 3)) == 1 / 3
    with pytest.raises(TypeError):
        to_json(object())


def test_scan_outputs(tmp_path):
    code, out, _ = run(["scan", "--out", str(tmp_path)])
    assert code == 0 and out.splitlines()[-1] == "OK"
    rows = list(csv.reader((tmp_path / "scan.csv").read_text().splitlines()))
    assert tuple(rows[0]) == SCAN_COLUMNS
    data, footer = rows[1:-1], rows[-1]
    assert len(data) == 4 and all(len(r) == len(SCAN_COLUMNS) for r in data)
    assert footer[0::2] == ["slope", "extrapolated_ratio", "extrapolated_error"]
    assert float(footer[1]) >= 1.4 and float(footer[5]) <= 1e-4
    errors = [float(r[5]) for r in data]
    assert all(b < a for a, b in zip(errors, errors[1:]))
    doc = json.loads((tmp_path / "report.json").read_text())
    jsonschema.validate(doc, load_schema())
    assert doc["scan"]["expected_ratio"] == 0.5


def test_scan_without_monopole(tmp_path):
    code, _, _ = run(["scan", "--mu", "0", "--out", str(tmp_path), "--format", "csv"])
    assert code == 0
    rows = list(csv.reader((tmp_path / "scan.csv").read_text().splitlines()))[1:-1]
    assert all(abs(float(r[3])) <= 1e-11 for r in rows)


def test_scan_rejects_short_range(tmp_path):
    p = tmp_path / "s.ini"
    p.write_text("[scan]\ndelta_z = 1e-2, 1e-3, 1e-4\n")
    assert run(["scan", "--config", str(p)])[0] == 2


def test_spectrum_verdicts(tmp_path):
    code, out, _ = run(["spectrum", "--mu", "0.5", "--out", str(tmp_path)])
    assert code == 0
    assert "Dirac condition: allowed, n=1" in out
    assert "north L_z: -3.5 -2.5 -1.5 -0.5 0.5 1.5 2.5" in out
    assert "south L_z: -2.5 -1.5 -0.5 0.5 1.5 2.5 3.5" in out
    phi0 = -2 * math.pi  # default charge q = -1
    assert f"2  {format(2 * phi0, '.12g')}  2" in out.splitlines()
    doc = json.loads((tmp_path / "report.json").read_text())
    jsonschema.validate(doc, load_schema())
    row = next(r for r in doc["spectrum"]["flux"] if r["m"] == 2)
    assert row["flux"] == pytest.approx(2 * phi0, rel=1e-15)
    _, out, _ = run(["spectrum", "--mu", "0.3", "--m-min", "0", "--m-max", "1"])
    assert "forbidden, defect 0.4" in out
    assert run(["spectrum", "--m-min", "2", "--m-max", "1"])[0] == 2


def test_list_suites():
    code, out, _ = run(["list-suites"])
    lines = out.splitlines()
    assert code == 0 and len(lines) >= 6
    assert lines[0].split()[0] == "decomposition"
    assert all("[Eq." in line for line in lines)


def test_bad_usage():
    assert run([])[0] == 2
    assert run(["verify", "--gauge", "east"])[0] == 2
