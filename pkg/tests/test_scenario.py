import json

import numpy as np
import pytest

from mimocs.cli import SHIPPED, shipped_config
from mimocs.scenario import ScenarioError, load_scenario, scenario_from_dict


def _doc(**changes):
    doc = json.loads(shipped_config("paper-fig1a").read_text())
    doc.update(changes)
    return doc


def test_shipped_fig1a():
    scn = load_scenario(shipped_config("paper-fig1a"))
    assert (scn.n_tx, scn.snapshots, scn.measurements, scn.active_rx) == (30, 512, 15, 1)
    assert len(scn.grid) == 51 and scn.grid.degrees[0] == -5 and scn.grid.degrees[-1] == 5
    assert scn.solver["mu"] == 3 and scn.kind == "matched"
    assert scn.jammer.beta == 10 and scn.snr_db == 20
    assert scn.wavelength == pytest.approx(299792458 / 8.62e9)


@pytest.mark.parametrize("name", SHIPPED)
def test_all_shipped_configs_parse(name):
    scn = load_scenario(shipped_config(name))
    assert scn.trials >= 50 and scn.seed == 0


def test_fig1b_and_fig2_differ_only_where_intended():
    b = load_scenario(shipped_config("paper-fig1b"))
    assert b.n_rx == b.active_rx == 10
    f2 = load_scenario(shipped_config("paper-fig2"))
    assert f2.sweep == {"axis": "L", "values": [128, 256, 512]}


def test_missing_jammer_is_none():
    doc = _doc()
    del doc["jammer"]
    assert scenario_from_dict(doc).jammer is None


def test_defaults():
    doc = _doc()
    for key in ("solver", "carrier_hz", "trials", "active_rx"):
        doc.pop(key)
    doc["array"] = {"n_tx": 30, "n_rx": 4}
    scn = scenario_from_dict(doc)
    assert scn.carrier_hz == 8.62e9 and scn.trials == 50 and scn.active_rx == 4
    assert scn.radius_wavelengths == 50
    assert scn.solver["mu"] is None and scn.solver["kind"] == "matched"
    assert scn.solver["log_base"] == pytest.approx(np.e)


@pytest.mark.parametrize("changes,field", [
    ({"measurements": 600, "solver": {"kind": "plain"}}, "measurements"),
    ({"measurements": 31}, "measurements"),
    ({"snapshots": 20}, "snapshots"),
    ({"active_rx": 2}, "active_rx"),
    ({"bogus": 1}, "bogus"),
    ({"solver": {"mu": 3, "speed": 1}}, "solver.speed"),
    ({"grid": {"start_deg": 5, "stop_deg": -5, "step_deg": 0.2}}, "grid"),
    ({"jammer": {"range_m": 7000, "azimuth_deg": 0, "beta": 0}}, "jammer.beta"),
    ({"targets": [{"range_m": -1, "azimuth_deg": 0}]}, "targets[0].range_m"),
    ({"seed": -3}, "seed"),
    ({"snr_db": "high"}, "snr_db"),
])
def test_validation_names_field(changes, field):
    with pytest.raises(ScenarioError) as err:
        scenario_from_dict(_doc(**changes))
    assert err.value.field == field


def test_seed_required():
    doc = _doc()
    del doc["seed"]
    with pytest.raises(ScenarioError):
        scenario_from_dict(doc)
    assert scenario_from_dict(doc, seed=7).seed == 7


def test_parse_error_has_line(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "name": "x",\n  "snapshots": ,\n}\n')
    with pytest.raises(ScenarioError) as err:
        load_scenario(path)
    assert err.value.line == 3


def test_missing_file(tmp_path):
    with pytest.raises(ScenarioError):
        load_scenario(tmp_path / "nope.json")


def test_config_hash_ignores_seed():
    a = scenario_from_dict(_doc(), seed=1)
    b = scenario_from_dict(_doc(), seed=2)
    c = scenario_from_dict(_doc(snr_db=10), seed=1)
    assert a.config_hash() == b.config_hash() != c.config_hash()


def test_replace_revalidates():
    scn = scenario_from_dict(_doc())
    assert scn.replace(snapshots=128).snapshots == 128
    assert scn.replace(kind="plain").kind == "plain"
    with pytest.raises(ScenarioError):
        scn.replace(snapshots=10)


def test_explicit_positions():
    doc = _doc(array={"tx_positions": [[0, 0], [0.1, 0]], "rx_positions": [[0, 0]]},
               measurements=2, snapshots=16)
    scn = scenario_from_dict(doc)
    assert scn.n_tx == 2 and scn.n_rx == 1


def test_complex_beta():
    doc = _doc(targets=[{"range_m": 5000, "azimuth_deg": -3, "beta": [0.5, -0.5]}])
    assert scenario_from_dict(doc).targets[0].beta == 0.5 - 0.5j
