import json
import subprocess
import sys

import numpy as np
import pytest
from fixture_suite import SUITE, cli, f, run_capture

import kantorovich.cli as cli_module
from kantorovich.cli import EXIT_INFINITE, EXIT_INPUT, EXIT_NUMERICAL, EXIT_OK, dumps
from kantorovich.errors import NumericalFailure
from kantorovich.oracles import upper_concave_envelope


def test_martingale_step_prints_one_and_exits_zero():
    code, out, _ = cli(*SUITE[0])
    assert code == EXIT_OK
    assert out["primal"] == pytest.approx(1.0) and out["dual"] == pytest.approx(1.0, abs=1e-6)
    assert out["command"] == "transfer eval" and out["schema_version"] == 1


def test_infinite_value_exits_three():
    code, out, _ = cli(*SUITE[2])
    assert code == EXIT_INFINITE
    assert out["value"] == "inf" and out["finite"] is False
    code, out, _ = cli(*SUITE[1])
    assert code == EXIT_OK and out["value"] == 0


def test_batch_is_ordered_and_parallel_safe():
    _, serial, _ = cli(*SUITE[3])
    _, parallel, _ = cli("--jobs", 3, *SUITE[3])
    assert serial == parallel
    assert [r["value"] for r in serial["results"]] == [2, 0.5]


def test_transport_oracle_agrees_with_eval():
    _, ev, _ = cli("transfer", "eval", "--cost", f("linear_cost.json"), "--mu", f("linear_mu.json"),
                   "--nu", f("linear_nu.json"))
    _, orc, _ = cli(*SUITE[17])
    assert ev["value"] == pytest.approx(orc["value"], abs=1e-12)


def test_epsilon_sweep_and_csv(tmp_path):
    csv = tmp_path / "sweep.csv"
    code, out, _ = cli("--csv", csv, *SUITE[4])
    assert code == EXIT_OK
    vals = [row["value"] for row in out["sweep"]]
    assert vals == sorted(vals, reverse=True)
    assert all(v >= out["value"] - 1e-9 for v in vals)
    lines = csv.read_text().splitlines()
    assert lines[0] == "eps,value" and len(lines) == 4


def test_balayage_fixtures():
    assert cli(*SUITE[8])[1]["ordered"] is True
    assert cli(*SUITE[9])[1]["ordered"] is False


def test_envelope_matches_the_hull_oracle(tmp_path):
    _, env, _ = cli(*SUITE[10])
    _, hull, _ = cli(*SUITE[15])
    assert np.allclose(env["values"], hull["values"], atol=1e-6)
    expect = json.loads(f("grid_fn_hull.json").read_text())["values"]
    assert np.allclose(env["values"], expect, atol=1e-6)
    grid = json.loads(f("grid_dilations.json").read_text())["X"]
    xs = [c[0] for c in grid["coords"]]
    fn = json.loads(f("grid_fn.json").read_text())
    assert np.allclose(env["values"], upper_concave_envelope(xs, fn["values"]), atol=1e-6)
    csv = tmp_path / "trace.csv"
    cli("--csv", csv, *SUITE[10])
    assert csv.read_text().startswith("iteration,point,value")


def test_capacity_reports():
    _, sq, _ = cli(*SUITE[11])
    assert sq["strongly_subadditive"] and sq["equivalences_hold"]
    _, two, _ = cli(*SUITE[12])
    assert not two["strongly_subadditive"] and two["subadditivity_witness"] is not None


def test_exact_choquet_prints_a_fraction():
    code, out, _ = cli(*SUITE[14])
    assert code == EXIT_OK
    num, den = (int(v) for v in out["exact"].split("/"))
    assert num / den == pytest.approx(out["value"], abs=1e-12)


def test_unknown_fields_fail_unless_lax(tmp_path):
    fn = tmp_path / "fn.json"
    fn.write_text('{"values": [1, 2], "colour": "red"}')
    code, out, _ = cli("op", "apply", "--operator", f("op_half.json"), "--fn", fn)
    assert code == EXIT_INPUT and out["error"] == "Malformed"
    code, out, err = cli("--lax", "op", "apply", "--operator", f("op_half.json"), "--fn", fn)
    assert code == EXIT_OK and "colour" in err and out["values"] == [1.5]


def test_input_errors_exit_one(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli("op", "apply", "--operator", bad, "--fn", f("fn_two.json"))[0] == EXIT_INPUT
    assert cli("op", "apply", "--operator", tmp_path / "missing.json", "--fn", f("fn_two.json"))[0] == EXIT_INPUT
    assert cli("capacity", "choquet", "--capacity", f("cap_sqrt.json"), "--fn", f("fn_two.json"))[0] == EXIT_INPUT
    assert cli("no-such-command")[0] == EXIT_INPUT


def test_numerical_failures_exit_two(monkeypatch):
    def stalled(args, reader):
        raise NumericalFailure("stalled")

    monkeypatch.setitem(cli_module._COMMANDS, "op", stalled)
    code, out, _ = cli("op", "apply", "--operator", f("op_half.json"), "--fn", f("fn_two.json"))
    assert code == EXIT_NUMERICAL and out["error"] == "NumericalFailure"


def test_dump_lp_writes_to_stderr():
    _, _, err = cli("--dump-lp", *SUITE[17])
    assert err.strip()


def test_dumps_is_canonical():
    assert dumps({"b": -0.0, "a": float("inf"), "c": 0.1}) == (
        '{"a": "inf", "b": 0, "c": 0.10000000000000001, "schema_version": 1}')


def test_suite_output_is_byte_identical():
    first = [run_capture(a) for a in SUITE]
    second = [run_capture(a) for a in SUITE]
    assert first == second


def test_module_entry_point_matches_in_process_run():
    argv = [str(a) for a in SUITE[0]]
    proc = subprocess.run([sys.executable, "-m", "kantorovich", *argv], capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert proc.stdout == run_capture(SUITE[0])
