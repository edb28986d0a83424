import json
import os

import numpy as np
import pytest

import qsdlab as q
from qsdlab.cli import main
from qsdlab.errors import SchemaError
from qsdlab.specfile import dump_spec, load_spec, spec_from_dict, spec_to_dict


# -- spec files ---------------------------------------------------------------

def test_spec_roundtrip(tmp_path):
    for name in q.builtin_names():
        spec = q.get_spec(name)
        path = tmp_path / f"{name}.json"
        dump_spec(spec, path)
        back = load_spec(path)
        assert back.family == spec.family
        assert back.params == spec.params
        assert back.grid_size == spec.grid_size


def test_unknown_top_level_field_is_hard_error():
    with pytest.raises(SchemaError):
        spec_from_dict({"family": "gaussian_shift", "domain": [0, 1],
                        "grid_size": 11, "params": {}, "surprise": 1})


def test_unknown_param_is_hard_error():
    with pytest.raises(SchemaError):
        spec_from_dict({"family": "cubic_uniform", "domain": [-2, 2],
                        "grid_size": 11, "params": {"noise_halfwidth": 6, "zz": 0}})


def test_missing_file_is_schema_error():
    with pytest.raises(SchemaError):
        load_spec("/nonexistent/spec.json")


def test_scaled_measure_parsed():
    spec = spec_from_dict({"family": "gaussian_shift", "domain": [0, 1],
                           "grid_size": 11, "params": {"sigma": 1.0},
                           "measure": {"name": "lebesgue_scaled", "scale": 2.0}})
    assert spec.measure == "lebesgue_scaled" and spec.measure_scale == 2.0
    assert spec_to_dict(spec)["measure"] == {"name": "lebesgue_scaled", "scale": 2.0}


# -- CLI ----------------------------------------------------------------------

def test_analyze_bundled_and_file_spec_agree(tmp_path):
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    spec_path = tmp_path / "sym2.json"
    dump_spec(q.get_spec("sym2"), spec_path)
    assert main(["analyze", "--spec", "sym2", "--out", str(out1), "--canonical"]) == 0
    assert main(["analyze", "--spec", str(spec_path), "--out", str(out2),
                 "--canonical"]) == 0
    assert (out1 / "analysis.json").read_bytes() == (out2 / "analysis.json").read_bytes()


def test_analyze_emits_required_fields(tmp_path):
    out = tmp_path / "o"
    assert main(["analyze", "--spec", "cycle3", "--out", str(out), "--canonical"]) == 0
    doc = json.loads((out / "analysis.json").read_text())
    assert doc["schema_version"] == 1
    assert doc["m"] == 3
    assert doc["classes"] == [[0, 1], [2, 3], [4, 5]]
    assert "cesaro" in doc["rates"]
    assert doc["decay"]["n0"] == 1
    curve = (out / "tv_curve.csv").read_text().splitlines()
    assert curve[0] == "n,tv"
    assert len(curve) > 100
    spec_doc = json.loads((out / "spectral.json").read_text())
    assert len(spec_doc["eigvals"]) == 3
    assert all(len(z) == 2 for z in spec_doc["eigvals"])


def test_verify_hypothesis_verdicts_have_evidence(tmp_path):
    out = tmp_path / "v"
    assert main(["verify-hypothesis", "--spec", "example21", "--grid-size", "101",
                 "--out", str(out), "--canonical"]) == 0
    doc = json.loads((out / "hypothesis_report.json").read_text())
    assert doc["h1"]["verdict"] == "PASS"
    assert len(doc["h1"]["deltas"]) == len(doc["h1"]["sup_distances"]) > 0
    assert doc["h2"]["verdict"] == "PASS"
    assert doc["h2"]["graph_period"] == 1
    assert doc["h2"]["escape_indices"] == [0, 100]


def test_verify_hypothesis_explicit_h1_indeterminate(tmp_path):
    out = tmp_path / "v2"
    assert main(["verify-hypothesis", "--spec", "ds3", "--out", str(out),
                 "--canonical"]) == 0
    doc = json.loads((out / "hypothesis_report.json").read_text())
    assert doc["h1"]["verdict"] == "INDETERMINATE"
    assert doc["h2"]["verdict"] == "PASS"


def test_missing_spec_file_exits_2_without_partial_output(tmp_path):
    out = tmp_path / "none"
    assert main(["analyze", "--spec", str(tmp_path / "ghost.json"),
                 "--out", str(out)]) == 2
    assert not out.exists()


def test_numerical_refusal_exits_3(tmp_path):
    bad = tmp_path / "red.json"
    bad.write_text(json.dumps({
        "family": "explicit_matrix",
        "params": {"matrix": [[0.5, 0.0], [0.0, 0.5]]},
    }))
    assert main(["analyze", "--spec", str(bad), "--out", str(tmp_path / "o")]) == 3


def test_simulate_csv_and_env_seed(tmp_path, monkeypatch):
    out1 = tmp_path / "s1"
    out2 = tmp_path / "s2"
    out3 = tmp_path / "s3"
    args = ["simulate", "--spec", "sym2", "--n", "10", "--n-paths", "20000"]
    assert main(args + ["--out", str(out1), "--seed", "7"]) == 0
    monkeypatch.setenv("QSDLAB_SEED", "7")
    assert main(args + ["--out", str(out2)]) == 0
    # flag wins over the environment
    monkeypatch.setenv("QSDLAB_SEED", "99")
    assert main(args + ["--out", str(out3), "--seed", "7"]) == 0
    b1 = (out1 / "estimates.csv").read_bytes()
    assert b1 == (out2 / "estimates.csv").read_bytes()
    assert b1 == (out3 / "estimates.csv").read_bytes()
    header = b1.decode().splitlines()[0]
    assert header == "kind,n,n_paths,survivors,value,stderr"


def test_lobo_table(tmp_path):
    out = tmp_path / "l"
    assert main(["lobo", "--spec", "cycle3", "--out", str(out), "--canonical",
                 "--h-state", "2", "--n-list", "61,122,244"]) == 0
    doc = json.loads((out / "lobo_table.json").read_text())
    devs = [abs(row["ratio"] - 1) for row in doc["table"]]
    assert devs[0] > devs[1] > devs[2]
    assert devs[2] < 0.02


def test_fixtures_regeneration_deterministic(tmp_path):
    out1 = tmp_path / "f1"
    out2 = tmp_path / "f2"
    assert main(["fixtures", "--out", str(out1)]) == 0
    assert main(["fixtures", "--out", str(out2)]) == 0
    names = sorted(os.listdir(out1))
    assert names == sorted(os.listdir(out2))
    for n in names:
        assert (out1 / n).read_bytes() == (out2 / n).read_bytes()
    assert "ds3.json" in names and "example21.spec.json" in names


def test_checked_in_fixtures_match_oracle():
    here = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    path = os.path.join(here, "fixtures", "ds3.json")
    doc = json.loads(open(path).read())
    from qsdlab.oracle import FiniteChain, exact_qsd_qed

    mu, eta, lam, m = exact_qsd_qed(FiniteChain(Q=np.asarray(doc["Q"])))
    assert np.allclose(doc["mu"], mu, atol=1e-12)
    assert np.allclose(doc["eta"], eta, atol=1e-12)
    assert doc["lambda"] == pytest.approx(lam, abs=1e-14)
    assert doc["m"] == m
