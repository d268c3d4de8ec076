import json

import numpy as np
import pytest

from decohist import histories, io as dio, openquantum as oq, qops
from decohist.acceptance import interferometer_schedule


def test_floats_round_trip_exactly():
    g = np.random.default_rng(0)
    xs = list(g.standard_normal(200) * 10.0 ** g.integers(-300, 300, 200)) + [0.1, 1 / 3, -0.0, 5e-324]
    back = json.loads(dio.dumps(xs))
    assert back == [float(x) for x in xs]
    assert json.loads(dio.dumps([np.inf, np.nan])) == [None, None]


def test_dumps_is_deterministic_and_compact_rows():
    doc = {"b": [1.0, 2.5], "a": {"x": np.float64(0.1), "flag": np.bool_(True)}, "c": 1 + 2j}
    text = dio.dumps(doc)
    assert text == dio.dumps(doc) and text.endswith("\n")
    assert '"b": [1, 2.5]' in text
    assert json.loads(text)["c"] == {"re": 1, "im": 2}
    with pytest.raises(TypeError):
        dio.dumps({"x": object()})


def test_operator_round_trip():
    g = np.random.default_rng(1)
    A = g.standard_normal((3, 3)) + 1j * g.standard_normal((3, 3))
    back = dio.operator_from_json(json.loads(dio.dumps(dio.operator_to_json(A))))
    assert np.array_equal(back, A)


def test_real_operator_may_omit_imaginary_part():
    A = dio.operator_from_json({"re": [[1, 0], [0, 2]]})
    assert np.array_equal(A, np.diag([1.0, 2.0]).astype(complex))


@pytest.mark.parametrize("doc,where", [
    ({"im": [[0]]}, "$.re"),
    ({"re": [[1, 2]]}, "$"),
    ({"re": [["a"]]}, "$.re"),
    ({"dim": 3, "re": [[1, 0], [0, 1]]}, "$.dim"),
])
def test_operator_errors_name_location(doc, where):
    with pytest.raises(dio.InputError) as err:
        dio.operator_from_json(doc)
    assert err.value.where == where


def test_states():
    ket = dio.state_from_json({"ket": {"re": [0, 1]}}, "$.s", 2)
    assert np.array_equal(ket, np.diag([0.0, 1.0]).astype(complex))
    with pytest.raises(dio.InputError):
        dio.state_from_json({"ket": {"re": [1, 1]}}, "$.s", 2)
    with pytest.raises(dio.InputError):
        dio.state_from_json({"re": [[1, 0], [0, 1]]}, "$.s", 2)


def schedule_doc():
    sched, rho = interferometer_schedule()
    return {
        "dim": 2,
        "initial_state": dio.operator_to_json(rho),
        "events": [{"t": float(t), "family": [dio.operator_to_json(P) for P in f]}
                   for t, f in zip(sched.times, sched.families)],
        "propagator": {"unitaries": [dio.operator_to_json(U) for U in sched.unitaries]},
        "epsilon": 0.01,
    }


def test_schedule_document_reproduces_functional():
    sched, rho_i, rho_f, eps = dio.schedule_from_json(schedule_doc())
    ref_sched, ref_rho = interferometer_schedule()
    assert rho_f is None and eps == 0.01
    a = histories.decoherence_functional(sched, rho_i).matrix()
    b = histories.decoherence_functional(ref_sched, ref_rho).matrix()
    assert np.abs(a - b).max() < 1e-15


@pytest.mark.parametrize("mutate,where", [
    (lambda d: d.update(extra=1), "$"),
    (lambda d: d.pop("events"), "$.events"),
    (lambda d: d["events"][1].update(kind="weird"), "$.events[1].kind"),
    (lambda d: d["events"][0]["family"].pop(), "$.events[0].family"),
    (lambda d: d.pop("initial_state"), "$.initial_state"),
    (lambda d: d["events"][1].update(t=-1.0), "$.events"),
])
def test_schedule_errors(mutate, where):
    doc = schedule_doc()
    mutate(doc)
    with pytest.raises(dio.InputError) as err:
        dio.schedule_from_json(doc)
    assert err.value.where == where


def test_model_round_trip():
    model = oq.thermal_oscillator_model(4, 1.0, 0.5, 0.3)
    back = dio.model_from_json(json.loads(dio.dumps(dio.model_to_json(model))))
    assert np.array_equal(back.H, model.H)
    for (L1, g1), (L2, g2) in zip(back.channels, model.channels):
        assert np.array_equal(L1, L2) and g1 == g2


def test_load_json_reports_position(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "dim": 2,\n  "events": [,]\n}\n')
    with pytest.raises(dio.InputError) as err:
        dio.load_json(str(path))
    assert str(err.value).startswith(f"{path}:3:")


def test_functional_report():
    sched, rho = interferometer_schedule()
    rep = dio.functional_report(histories.decoherence_functional(sched, rho), epsilon=0.01)
    assert rep["decoherent"] is False
    assert rep["max_ratio"] == pytest.approx(1.0)
    assert sum(rep["probabilities"]) == pytest.approx(1.0)
    assert len(rep["D_re"]) == len(rep["labels"])


def test_csv_text():
    text = dio.csv_text(["a", "b"], [[1, 0.1], ["x", 2.0]])
    assert text == "a,b\n1,0.10000000000000001\nx,2\n"
