import json
import subprocess
import sys

import pytest
from hypothesis import given
from hypothesis import strategies as st

from wmfred.cli import (
    EXIT_CONFIG,
    SCHEMA,
    ReportRow,
    emit_report,
    main,
    parse_range,
    read_csv_report,
)

HEADER = "method,N,a,t,h,value,error,warnings,seed,wall_time_ms"


def _run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr().out
    return code, out


def test_schema_string():
    assert ",".join(SCHEMA) == HEADER
    row = ReportRow("fredholm", 2, 0.5, 1.0, 0.0, 0.1, 0.0)
    assert emit_report([row]).splitlines()[0] == HEADER


def test_empty_report_is_an_error():
    with pytest.raises(ValueError):
        emit_report([])


def test_unknown_method_rejected():
    with pytest.raises(ValueError):
        ReportRow("guess", 2, 0.5, 1.0, 0.0, 0.1, 0.0)


@given(st.floats(allow_nan=False, allow_infinity=False), st.floats(-5, 5), st.text(
    alphabet=st.characters(blacklist_categories=("Cs",), blacklist_characters="\r\x00"), max_size=12))
def test_csv_and_json_roundtrip(value, h, warn):
    row = ReportRow("cbm", 2, 0.5, 1.0, h, value, 1e-3, warn, 42, 0.0)
    back = read_csv_report(emit_report([row]))[0]
    js = json.loads(emit_report([row], "json"))[0]
    assert back["value"] == value and js["value"] == value
    assert back["warnings"] == warn and js["warnings"] == warn
    assert back == js


def test_floats_carry_17_digits():
    row = ReportRow("fredholm", 2, 0.5, 1.0, 0.0, 0.1, 0.0)
    assert "0.10000000000000001" in emit_report([row])


def test_parse_range():
    assert parse_range("-2:2:0.5") == tuple(-2 + 0.5 * k for k in range(9))
    assert parse_range("0.3") == (0.3,)


def test_fredholm_grid_output(capsys):
    code, out = _run(["fredholm", "--h", "-2:2:0.5"], capsys)
    assert code == 0
    rows = read_csv_report(out)
    assert len(rows) == 9
    vals = [r["value"] for r in rows]
    assert all(b <= a for a, b in zip(vals, vals[1:]))
    assert rows[4]["value"] == pytest.approx(0.09700928915576604, abs=1e-12)


def test_cbm_reruns_are_byte_identical(capsys):
    argv = ["cbm", "--seed", "42", "--samples", "5000", "--h", "-1:1:1"]
    _, first = _run(argv, capsys)
    _, second = _run(argv, capsys)
    _, threaded = _run(argv + ["--workers", "4"], capsys)
    assert first == second == threaded


@pytest.mark.parametrize("argv", [
    ["fredholm", "--a", "-1"],
    ["fredholm", "--gh-order", "63"],
    ["cbm", "--samples", "10"],
    ["fredholm", "--nu-hat", "0,0.1,0.2,0.3"],
    ["fredholm", "--format", "xml"],
    ["fredholm", "--h", "2:1:0.5"],
])
def test_bad_configs_exit_one(argv, capsys):
    # argparse-level rejections exit directly, validation failures return the code
    try:
        code = main(argv)
    except SystemExit as exc:
        code = exc.code
    assert code == EXIT_CONFIG
    assert "error" in capsys.readouterr().err


def test_config_file_and_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"nu_hat": [0.3], "a": 0.5, "h": [0.0, 1.0]}))
    _, out = _run(["fredholm", "--config", str(cfg)], capsys)
    rows = read_csv_report(out)
    assert [r["h"] for r in rows] == [0.0, 1.0] and rows[0]["N"] == 1
    _, out = _run(["fredholm", "--config", str(cfg), "--h", "-1"], capsys)
    rows = read_csv_report(out)
    assert [r["h"] for r in rows] == [-1.0]


def test_config_file_unknown_field(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"nu_hats": [0.3]}))
    assert main(["fredholm", "--config", str(cfg)]) == EXIT_CONFIG


def test_out_path_and_json(tmp_path, capsys):
    path = tmp_path / "r.json"
    assert main(["oracle-ncbm", "--h", "0", "--format", "json", "--out", str(path)]) == 0
    rows = json.loads(path.read_text())
    assert rows[0]["method"] == "ncbm_oracle"
    assert rows[0]["value"] == pytest.approx(0.0785275379398322, abs=1e-10)


@pytest.mark.parametrize("sub", ["series", "oracle-direct", "bc-contour", "moments", "kernel-dump"])
def test_other_subcommands_run_and_repeat(sub, capsys):
    argv = [sub, "--nu-hat", "0.3", "--grid", "-1:1:1"]
    code, first = _run(argv, capsys)
    assert code == 0 and first
    assert _run(argv, capsys)[1] == first


def test_limit_sweep_rows(capsys):
    code, out = _run(["limit-sweep", "--a-values", "0.4,0.2", "--h", "0"], capsys)
    rows = read_csv_report(out)
    assert code == 0 and len(rows) == 3
    assert rows[1]["error"] == pytest.approx(abs(rows[1]["value"] - rows[0]["value"]), rel=1e-12)


def test_selftest_exits_zero():
    proc = subprocess.run([sys.executable, "-m", "wmfred.cli", "selftest"], capture_output=True, text=True,
                          timeout=600)
    assert proc.returncode == 0
    assert all(line.startswith("ok") for line in proc.stdout.splitlines() if line.strip())
