import json
import math

import pytest

from decohist import cli, io as dio
from decohist.acceptance import determinism_argvs


def run_json(tmp_path, argv):
    out = tmp_path / "out.json"
    assert cli.run(argv + ["-o", str(out)]) == 0
    return json.loads(out.read_text())


def run_csv(tmp_path, argv):
    out = tmp_path / "out.csv"
    assert cli.run(argv + ["--format", "csv", "-o", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# ")
    meta = json.loads(lines[0][2:])
    return meta, [line.split(",") for line in lines[1:]]


def test_oscillator_phase_decoheres(tmp_path):
    doc = run_json(tmp_path, ["oscillator-phase", "--N", "8", "--steps", "3", "--seed", "7"])
    assert doc["command"] == "oscillator-phase" and doc["seed"] == 7
    assert doc["result"]["max_ratio"] <= 1e-10
    assert doc["result"]["decoherent"] is True


def test_cosmo_point_row(tmp_path):
    meta, rows = run_csv(tmp_path, ["cosmo", "--lambda0", "3", "--lambda1", "3", "--C", "1"])
    assert rows[0] == ["lambda1", "log_p_reinflate", "log_tau1"]
    assert float(rows[1][1]) == pytest.approx(-7 * math.pi, rel=1e-14)
    assert float(rows[1][2]) == pytest.approx(math.log(4 * math.pi ** 2) + 7 * math.pi, rel=1e-14)
    assert meta["config"]["lambda0"] == 3.0


def test_cosmo_lengths_equal_lambdas(tmp_path):
    a = run_json(tmp_path, ["cosmo", "--ell0", "1", "--ell1", "10"])
    b = run_json(tmp_path, ["cosmo", "--lambda0", "3", "--lambda1", "0.03"])
    assert a["result"]["log_p_reinflate"] == pytest.approx(-61 * math.pi, rel=1e-14)
    assert a["result"]["log_p_reinflate"] == pytest.approx(b["result"]["log_p_reinflate"], rel=1e-14)


def test_cosmo_sweep_rows(tmp_path):
    _, rows = run_csv(tmp_path, ["cosmo", "sweep", "--lambda0", "3", "--lambda1-range", "0.003:3:4",
                                 "--brain-dE", "30"])
    assert len(rows) == 5 and "log_odds" in rows[0]
    lam = [float(r[0]) for r in rows[1:]]
    assert lam[0] == pytest.approx(0.003) and lam[-1] == pytest.approx(3.0)
    assert lam[1] / lam[0] == pytest.approx(lam[2] / lam[1])


def test_jump_ensemble_csv(tmp_path):
    _, rows = run_csv(tmp_path, ["jump-ensemble", "--trajectories", "20", "--dt", "0.01",
                                 "--horizon", "1", "--seed", "2"])
    assert rows[0] == ["trajectory_id", "time", "channel", "event"]
    ends = [r for r in rows[1:] if r[3] == "end"]
    assert len(ends) == 20
    assert all(r[2] == "0" for r in rows[1:] if r[3] == "jump")


def test_jump_ensemble_summary(tmp_path):
    doc = run_json(tmp_path, ["jump-ensemble", "--trajectories", "500", "--dt", "0.01", "--horizon", "1"])
    assert doc["result"]["trace_distance_to_exact"] < 0.1


def test_random_histories_csv(tmp_path):
    _, rows = run_csv(tmp_path, ["random-histories", "--d", "4", "--rank", "2", "--samples", "3"])
    assert rows[0] == ["sample", "pair", "p", "p_prime", "ratio"]
    assert len(rows) > 1


def test_functional_from_file(tmp_path):
    argv = determinism_argvs(str(tmp_path))
    functional = next(a for a in argv if a[0] == "functional")
    doc = run_json(tmp_path, functional + ["--epsilon", "0.01"])
    assert doc["result"]["decoherent"] is False
    assert doc["result"]["max_ratio"] == pytest.approx(1.0)


def test_tolerance_override_recorded(tmp_path):
    doc = run_json(tmp_path, ["mixed-coherence", "--N", "4", "--events", "1", "--tolerance", "epsilon=0.5"])
    assert doc["tolerances"]["epsilon"] == 0.5
    assert cli.run(["mixed-coherence", "--tolerance", "nonsense=1"]) == 1
    assert cli.run(["mixed-coherence", "--tolerance", "epsilon"]) == 1


def test_usage_errors(capsys):
    assert cli.run(["no-such-command"]) == 1
    assert cli.run([]) == 1
    assert cli.run(["oscillator-phase", "--N", "many"]) == 1
    assert "decohist" in capsys.readouterr().err


def test_malformed_inputs_exit_one(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"dim": 2, "events": [}')
    assert cli.run(["functional", "--schedule", str(bad)]) == 1
    assert f"{bad}:1:" in capsys.readouterr().err
    wrong = tmp_path / "wrong.json"
    wrong.write_text(dio.dumps({"dim": 2, "events": []}))
    assert cli.run(["functional", "--schedule", str(wrong)]) == 1
    assert "$.events" in capsys.readouterr().err
    assert cli.run(["functional", "--schedule", str(tmp_path / "missing.json")]) == 1
    assert cli.run(["jump-ensemble", "--dt", "0.3", "--horizon", "1"]) == 1


def test_model_file(tmp_path):
    from decohist import openquantum as oq

    path = tmp_path / "model.json"
    path.write_text(dio.dumps(dio.model_to_json(oq.qubit_damping(2.0))))
    assert cli.run(["lindblad-propagate", "--model", str(path)]) == 1
    state = tmp_path / "state.json"
    state.write_text(dio.dumps({"ket": {"re": [0, 1]}}))
    doc = run_json(tmp_path, ["lindblad-propagate", "--model", str(path), "--state", str(state), "--time", "0.5"])
    assert doc["result"]["relaxation_time"] == pytest.approx(1.0)


def test_outputs_are_byte_identical(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    argv = ["random-histories", "--d", "8", "--rank", "4", "--samples", "4", "--seed", "3"]
    assert cli.run(argv + ["-o", str(a)]) == 0
    assert cli.run(argv + ["-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_selftest_subset(capsys):
    assert cli.run(["selftest", "--only", "1,7"]) == 0
    err = capsys.readouterr().err
    assert "[PASS] criterion  1" in err and "[PASS] criterion  7" in err
