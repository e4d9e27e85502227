import csv
import io
import json
import subprocess
import sys

import pytest

from circqba.cli import main, parse_grid

HEADERS = {
    "bounds": "protocol,N,f,m,n,eps_case1,eps_case2,eps_qba,complexity,complexity_sci",
    "channel": "altitude,zenith,eta_ext,W_ST,eta_mean,xi",
    "keyrate": "altitude,zenith,eta_mean,l_key,KR_bps,SR,CR",
    "consensus-rate": "altitude,zenith,eta_mean,KR_bps,SR,CR",
    "cvmodel": "mode,quadrature,x,outcome,value",
    "forge-bench": "strategy,n,msg_bits,trials,successes,frequency,bound,sigma,within_3sigma",
}
QUICK = {
    "bounds": [],
    "channel": ["--altitude", "300,500"],
    "keyrate": ["--altitude", "300"],
    "consensus-rate": ["--altitude", "200:400:100"],
    "cvmodel": [],
    "forge-bench": ["--trials", "300", "--n", "8", "--msg-bits", "16"],
}


def _run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def _table(text):
    body = [line for line in text.splitlines() if not line.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(body))))


@pytest.mark.parametrize("cmd", sorted(HEADERS))
def test_golden_headers(cmd, capsys):
    code, out, _ = _run([cmd, *QUICK[cmd]], capsys)
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith(f"# circqba ") and lines[0].endswith(cmd)
    header = next(line for line in lines if not line.startswith("#"))
    assert header == HEADERS[cmd]


@pytest.mark.parametrize("cmd", sorted(HEADERS))
def test_deterministic_files(cmd, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main([cmd, *QUICK[cmd], "--seed", "3", "--out", str(a)]) == 0
    assert main([cmd, *QUICK[cmd], "--seed", "3", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_bounds_f10_table(capsys):
    _, out, _ = _run(["bounds", "--f", "10"], capsys)
    rows = {r["protocol"]: r for r in _table(out)}
    assert rows["circular"]["complexity"] == "132" and rows["circular"]["N"] == "12"
    assert rows["qkd_based"]["complexity_sci"] == "2.295e+15"
    assert rows["recursive"]["complexity_sci"] == "7.441e+12"
    assert rows["qkd_based"]["eps_qba"] == ""


def test_bounds_f0_own_minima(capsys):
    _, out, _ = _run(["bounds", "--f", "0"], capsys)
    rows = {r["protocol"]: r for r in _table(out)}
    assert rows["circular"]["N"] == "3" and rows["circular"]["complexity"] == "6"
    assert rows["qkd_based"]["N"] == "1" and rows["recursive"]["N"] == "1"


def test_bounds_explicit_grid_skips_insecure(capsys):
    _, out, _ = _run(["bounds", "--N", "3:6:1", "--f", "2", "--protocol", "circular"], capsys)
    assert [r["N"] for r in _table(out)] == ["4", "5", "6"]


def test_json_format(capsys):
    code, out, _ = _run(["bounds", "--format", "json"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["command"] == "bounds" and len(doc["rows"]) == 3


def test_keyrate_columns_consistent(capsys):
    _, out, _ = _run(["keyrate", "--altitude", "300,600"], capsys)
    meta = [line for line in out.splitlines() if line.startswith("# signature_bits=")]
    n = int(meta[0].split("=")[1])
    for r in _table(out):
        kr, sr, cr = float(r["KR_bps"]), float(r["SR"]), float(r["CR"])
        assert sr == pytest.approx(kr / (3 * n), rel=1e-9)
        assert cr == pytest.approx(sr / 42, rel=1e-9)


def test_metadata_echoes_assumptions(capsys):
    _, out, _ = _run(["keyrate"], capsys)
    for key in ("optics.W0=0.15", "optics.aperture=0.75", "optics.pointing_error=1e-06",
                "decoy.rep_rate=1000000000", "decoy.n_pulses=1e+10"):
        assert f"# {key}" in out


def test_cvmodel_tables_normalised(capsys):
    _, out, _ = _run(["cvmodel", "--mode", "heterodyne"], capsys)
    rows = [r for r in _table(out) if r["x"] != "all"]
    for x in "0123":
        assert sum(float(r["value"]) for r in rows if r["x"] == x) == pytest.approx(1.0, abs=1e-9)
    assert "no CV key rate" in out


def _scenario(tmp_path, doc, name="s.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def test_simulate_honest_exit_zero(tmp_path, capsys):
    path = _scenario(tmp_path, {"players": 5, "message_bits": 8, "signature_bits": 32, "seed": 2})
    code, out, _ = _run(["simulate", path, "--out", str(tmp_path / "t")], capsys)
    assert code == 0
    summary = json.loads(out)
    assert summary["qds_invocations"] == 20 and summary["ic1"] and summary["ic2"]
    assert (tmp_path / "t" / "events.csv").exists()


def test_simulate_tiny_n_forgery_exit_one(tmp_path, capsys):
    # two-bit digests let forged orders through now and then
    doc = {"players": 4, "message_bits": 4, "signature_bits": 2, "malicious": [2, 3],
           "adversary": [{"party": 2, "kind": "forge_message_only", "persistence": 40},
                         {"party": 3, "kind": "forge_message_only", "persistence": 40}]}
    codes = []
    for seed in range(12):
        code, _, err = _run(["simulate", _scenario(tmp_path, {**doc, "seed": seed})], capsys)
        codes.append(code)
        if code == 1:
            assert "forgery" in err
    assert 1 in codes and set(codes) <= {0, 1}


def test_simulate_seed_flag_overrides(tmp_path, capsys):
    path = _scenario(tmp_path, {"players": 4, "message_bits": 8, "signature_bits": 32, "seed": 1})
    _, a, _ = _run(["simulate", path, "--seed", "9"], capsys)
    _, b, _ = _run(["simulate", path, "--seed", "9"], capsys)
    _, c, _ = _run(["simulate", path], capsys)
    assert a == b and a != c


@pytest.mark.parametrize("content", ["{not json", json.dumps({"players": 4}),
                                     json.dumps({"players": 4, "message_bits": 8, "signature_bits": 8,
                                                 "bogus": 1})])
def test_simulate_bad_scenario_exit_two(tmp_path, capsys, content):
    p = tmp_path / "bad.json"
    p.write_text(content)
    code, _, err = _run(["simulate", str(p)], capsys)
    assert code == 2 and "error" in err


@pytest.mark.parametrize("argv", [
    [],
    ["nope"],
    ["bounds", "--f", "x"],
    ["channel", "--altitude", "5:1:1"],
    ["forge-bench", "--n", "1"],
    ["keyrate", "--signature-bits", "1"],
    ["channel", "--aperture", "-1"],
    ["simulate", "/no/such/file.json"],
])
def test_usage_errors_exit_two(argv, capsys):
    code, _, _ = _run(argv, capsys)
    assert code == 2


def test_forge_bench_report(capsys):
    code, out, _ = _run(["forge-bench", "--n", "2", "--msg-bits", "8", "--trials", "200"], capsys)
    row = _table(out)[0]
    assert code == 0 and float(row["bound"]) == 1.0
    assert {"bound", "frequency", "trials"} <= row.keys()


def test_parse_grid():
    assert parse_grid("200:1000:400") == [200.0, 600.0, 1000.0]
    assert parse_grid("0.1,0.2") == [0.1, 0.2]
    assert parse_grid("0:0.3:0.1") == pytest.approx([0.0, 0.1, 0.2, 0.3])


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "circqba", "bounds", "--f", "1"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0 and HEADERS["bounds"] in res.stdout
