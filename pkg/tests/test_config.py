import json

import pytest

from bosonlr import ConfigError, parse_config
from bosonlr.config import (
    EXPERIMENT_PRESETS,
    PRESETS,
    config_for_experiment,
    from_dict,
    from_preset,
)


def write_cfg(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


def test_presets_all_valid():
    for name in PRESETS:
        cfg = from_preset(name)
        assert cfg.name == name
        assert cfg.experiments


def test_experiment_preset_mapping_complete():
    for exp, preset in EXPERIMENT_PRESETS.items():
        cfg = config_for_experiment(exp)
        assert exp in cfg.experiments
        assert preset in PRESETS


def test_preset_with_overrides(tmp_path):
    path = write_cfg(tmp_path, {"preset": "chain-6", "sweeps": {"times": [0.0, 0.5]}})
    cfg = parse_config(path)
    assert cfg.sweeps["times"] == [0.0, 0.5]
    assert cfg.sweeps["moment_p"] == 4  # inherited
    assert cfg.graph["length"] == 6
    # defaults echoed in the resolved dict
    assert cfg.to_dict()["tolerances"]["kms_residual"] == 1e-9


def test_moment_exponent_hypothesis_enforced(tmp_path):
    path = write_cfg(tmp_path, {"preset": "chain-10", "sweeps": {"moment_p": 4}})
    with pytest.raises(ConfigError, match="p > 2d\\+2"):
        parse_config(path)


def test_missing_file():
    with pytest.raises(ConfigError, match="not found"):
        parse_config("/nonexistent/path.json")


def test_invalid_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError, match="not valid JSON"):
        parse_config(path)


def test_unknown_keys_rejected(tmp_path):
    path = write_cfg(tmp_path, {"preset": "chain-6", "tyop": 1})
    with pytest.raises(ConfigError, match="unknown keys"):
        parse_config(path)


def test_unknown_preset():
    with pytest.raises(ConfigError, match="unknown preset"):
        from_preset("chain-999")


def test_cutoff_sweep_must_stay_below_cap(tmp_path):
    path = write_cfg(tmp_path, {"preset": "chain-4", "sweeps": {"cutoffs": [1, 5]}})
    with pytest.raises(ConfigError, match="strictly below"):
        parse_config(path)


def test_basis_needs_exactly_one_mode():
    with pytest.raises(ConfigError, match="exactly one"):
        from_dict({"preset": "chain-6", "basis": {"sector": 3, "n_max": 3}})
    with pytest.raises(ConfigError, match="exactly one"):
        from_dict({"preset": "chain-6", "basis": {"sector": None, "n_max": None}})


def test_beta_positive():
    with pytest.raises(ConfigError, match="beta"):
        from_dict({"preset": "two-site", "thermal": {"beta": -1.0}})


def test_hopping_normalization_guard():
    with pytest.raises(ConfigError, match="hopping"):
        from_dict({"preset": "chain-6", "model": {"hopping": 2.0}})


def test_sweeps_must_ascend():
    with pytest.raises(ConfigError, match="ascending"):
        from_dict({"preset": "chain-6", "sweeps": {"times": [1.0, 0.5]}})


def test_unknown_experiment_name():
    with pytest.raises(ConfigError, match="unknown experiment"):
        from_dict({"preset": "chain-6", "experiments": ["quantum-supremacy"]})


def test_edges_graph_spec():
    cfg = from_dict(
        {
            "name": "triangle",
            "experiments": [],
            "graph": {"type": "edges", "n_vertices": 3, "edges": [[0, 1], [1, 2], [0, 2]], "dimension": 1},
            "basis": {"sector": 1},
        }
    )
    from bosonlr.experiments import build_graph

    g = build_graph(cfg.graph)
    assert g.n_vertices == 3
    assert g.dist[0, 2] == 1
