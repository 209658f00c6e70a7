import csv
import json

import pytest

from lqriss import __version__
from lqriss.cli import CONFIG_SCHEMA, EXIT_CONFIG, EXIT_LEFT, EXIT_OK, main
from lqriss.errors import ConfigError
from lqriss.cli import validate_config


def run(tmp_path, cfg, command, *extra):
    cfg = dict(cfg)
    cfg.setdefault("output_dir", str(tmp_path / "out"))
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return main([command, "--config", str(path), *extra]), tmp_path / "out"


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(line for line in fh if not line.startswith("#")))


def test_certify_one_dim(tmp_path):
    code, out = run(tmp_path, {"plant": {"builtin": "one_dim"}, "certify": {"count": 10}}, "certify")
    assert code == EXIT_OK
    doc = json.loads((out / "certify.json").read_text())
    assert doc["violations"] == 0 and doc["version"] == __version__
    assert doc["certificate"]["a5"] == pytest.approx(2.0)
    rows = read_csv(out / "lemmas.csv")
    assert rows[0] == ["lemma_id", "seed", "dist", "lhs", "rhs", "slack"]
    assert len(rows) == 1 + 10 * 3 * 6


def test_certify_random(tmp_path):
    cfg = {"plant": {"builtin": "random", "n": 4, "m": 2, "seed": 7}, "certify": {"count": 10, "radii": [0.5]}}
    assert run(tmp_path, cfg, "certify")[0] == EXIT_OK


def test_malformed_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    assert main(["certify", "--config", str(path)]) == EXIT_CONFIG
    assert main(["certify", "--config", str(tmp_path / "missing.json")]) == EXIT_CONFIG


@pytest.mark.parametrize("cfg", [
    {"unknown": 1},
    {"sweep": {"amplitudes": []}},
    {"plant": {"builtin": "random", "n": 2}},
    {"flow": {"kind": "Sideways"}},
    {"counterexample": {"w_bar": 0.7, "chi0": [1.0]}},
    {"plant": {"inline": {"A": [[1.0]], "B": [[1.0]], "Q": [[1.0]]}}},
])
def test_schema_rejections(cfg, tmp_path):
    with pytest.raises(ConfigError):
        validate_config(cfg)
    assert run(tmp_path, cfg, "flow")[0] == EXIT_CONFIG


def test_schema_is_strict():
    assert CONFIG_SCHEMA["additionalProperties"] is False


def test_flow_converges(tmp_path):
    cfg = {"plant": {"builtin": "one_dim"}, "flow": {"K0": [[3.0]]}, "integration": {"h": 0.01, "s_max": 50}}
    code, out = run(tmp_path, cfg, "flow")
    assert code == EXIT_OK
    side = json.loads((out / "trajectory.json").read_text())
    assert side["exit"] == "Converged" and side["config"]["flow"]["K0"] == [[3.0]]
    rows = read_csv(out / "trajectory.csv")
    assert rows[0] == ["s", "V3", "V4", "V5", "V6", "grad_norm", "W_norm", "abscissa"]
    first = (out / "trajectory.csv").read_text().splitlines()[:2]
    assert __version__ in first[0] and first[1].startswith("# config ")


def test_flow_from_optimum(tmp_path):
    cfg = {"plant": {"builtin": "random", "n": 3, "m": 2, "seed": 1}, "flow": {"K0": "optimal", "kind": "Newton"}}
    code, out = run(tmp_path, cfg, "flow")
    side = json.loads((out / "trajectory.json").read_text())
    assert code == EXIT_OK and side["exit"] == "Converged" and side["samples"] == 1


def test_flow_leaves(tmp_path):
    cfg = {"plant": {"builtin": "one_dim"}, "flow": {"K0": [[3.0]]},
           "disturbance": {"kind": "ConstantMatrix", "amplitude": 1e6, "direction": [[-1.0]]}}
    assert run(tmp_path, cfg, "flow")[0] == EXIT_LEFT


def test_flow_bad_k0_shape(tmp_path):
    cfg = {"plant": {"builtin": "one_dim"}, "flow": {"K0": [[3.0, 1.0]]}}
    assert run(tmp_path, cfg, "flow")[0] == EXIT_CONFIG


def test_flow_estimator_residual(tmp_path):
    cfg = {"plant": {"builtin": "random", "n": 2, "m": 1, "seed": 3}, "flow": {"kind": "Natural"},
           "disturbance": {"kind": "EstimatorResidual", "estimator": {"radius": 1e-3, "num_samples": 20}},
           "integration": {"s_max": 1, "h": 0.1}}
    code, out = run(tmp_path, cfg, "flow")
    side = json.loads((out / "trajectory.json").read_text())
    assert code == EXIT_OK and side["diagnostics"]["rejected_probes"] == 0


def test_inline_and_path_plants(tmp_path):
    inline = {"A": [[1.0]], "B": [[1.0]], "Q": [[1.0]], "R": [[1.0]]}
    cfg = {"plant": {"inline": inline}, "certify": {"count": 2}}
    assert run(tmp_path, cfg, "certify")[0] == EXIT_OK
    (tmp_path / "plant.json").write_text(json.dumps(inline))
    cfg = {"plant": {"path": str(tmp_path / "plant.json")}, "certify": {"count": 2}}
    assert run(tmp_path, cfg, "certify")[0] == EXIT_OK
    cfg = {"plant": {"path": str(tmp_path / "nope.json")}}
    assert run(tmp_path, cfg, "certify")[0] == EXIT_CONFIG


def test_sweep_and_determinism(tmp_path):
    cfg = {"plant": {"builtin": "one_dim"}, "sweep": {"amplitudes": [0.0, 0.05], "num_seeds": 2, "kinds": ["Natural"]},
           "integration": {"s_max": 5, "h": 0.1}, "seed": 3}
    code, out = run(tmp_path, cfg, "sweep")
    assert code == EXIT_OK
    first = (out / "envelope.json").read_bytes(), (out / "envelope.csv").read_bytes()
    assert run(tmp_path, cfg, "sweep")[0] == EXIT_OK
    assert ((out / "envelope.json").read_bytes(), (out / "envelope.csv").read_bytes()) == first
    doc = json.loads(first[0])
    assert doc["envelopes"]["Natural"]["gamma"][0] <= 1e-8


def test_seed_override(tmp_path):
    cfg = {"plant": {"builtin": "one_dim"}, "certify": {"count": 2}}
    code, out = run(tmp_path, cfg, "certify", "--seed", "11")
    assert code == EXIT_OK
    assert json.loads((out / "certify.json").read_text())["config"]["seed"] == 11


def test_counterexample(tmp_path):
    cfg = {"counterexample": {"w_bar": 0.4, "chi0": [1.0, 3.0]}}
    code, out = run(tmp_path, cfg, "counterexample")
    doc = json.loads((out / "counterexample.json").read_text())
    assert code == EXIT_OK
    assert [r["diverged"] for r in doc["runs"]] == [False, True]
    assert [r["predicted_divergent"] for r in doc["runs"]] == [False, True]
    assert (out / "counterexample_1.csv").exists()
    assert run(tmp_path, {}, "counterexample")[0] == EXIT_CONFIG


def test_saturation(tmp_path):
    code, out = run(tmp_path, {}, "saturation")
    doc = json.loads((out / "saturation.json").read_text())
    assert code == EXIT_OK and doc["dominated"] and doc["max_xi1"] < 0.5
    rows = read_csv(out / "saturation.csv")
    assert abs(float(rows[-1][1]) - 0.5) <= 1e-4


def test_module_entry(tmp_path):
    import subprocess
    import sys
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"output_dir": str(tmp_path / "o")}))
    res = subprocess.run([sys.executable, "-m", "lqriss", "saturation", "--config", str(cfg)], capture_output=True)
    assert res.returncode == 0


def test_schema_document_in_sync():
    from pathlib import Path
    doc = Path(__file__).resolve().parents[1] / "docs" / "config.schema.json"
    assert json.loads(doc.read_text()) == json.loads(json.dumps(CONFIG_SCHEMA))


def test_sample_configs_validate():
    from pathlib import Path
    from lqriss.cli import load_config
    configs = sorted((Path(__file__).resolve().parents[1] / "configs").glob("*.json"))
    assert configs
    for path in configs:
        load_config(path)
