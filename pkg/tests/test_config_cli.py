import json

import numpy as np
import pytest

from twotemp import cli, config, io
from twotemp.errors import ConfigError

SMALL = {
    "ou_kl": {"alphas": [1.0, 2.0], "n_times": 101, "t_max": 5.0},
    "ratio": {"n_grid": 50},
    "bistable": {"d": 2, "integrator": {"dt": 0.01, "n_steps": 2000, "thin": 20}, "replicas": 5, "chunk": 2, "max_lag": 5},
    "lj_cool": {"n_particles": 3, "integrator": {"dt": 0.005, "n_steps": 1000, "thin": 50}, "replicas": 3,
                "chunk": 1, "oracle_starts": 3, "oracle_steps": 2000},
    "limits": {"eps": [0.4, 0.2], "replicas": 4, "chunk": 3, "horizon": 0.2},
    "aep": {"n_samples": 20_000, "n_times": 21, "m": [[0.0, 0.3], [-0.3, 0.0]]},
}


def _write(tmp_path, name, params, **top):
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps({"experiment": name, "params": params, **top}))
    return path


def _run(tmp_path, name, params, out="out", **top):
    cfg = _write(tmp_path, name, params, **top)
    return cli.main([name, "--config", str(cfg), "--out", str(tmp_path / out)]), tmp_path / out


# --------------------------------------------------------------------------
# config


def test_unknown_key_names_its_path():
    with pytest.raises(ConfigError, match=r"params\.integrator\.dtt"):
        config.parse_config({"experiment": "bistable", "params": {"integrator": {"dtt": 1.0}}})
    with pytest.raises(ConfigError, match="colour"):
        config.parse_config({"experiment": "ou_kl", "colour": 1})


def test_bad_values_rejected():
    with pytest.raises(ConfigError, match=r"params\.integrator\.dt"):
        config.parse_config({"experiment": "bistable", "params": {"integrator": {"dt": -1.0}}})
    with pytest.raises(ConfigError, match="experiment"):
        config.parse_config({"experiment": "nope"})
    with pytest.raises(ConfigError, match="seed"):
        config.parse_config({"experiment": "ou_kl", "seed": -3})


def test_defaults_and_digest():
    a = config.parse_config({"experiment": "ou_kl"})
    b = config.parse_config({"experiment": "ou_kl", "out": "elsewhere", "workers": 4})
    c = config.parse_config({"experiment": "ou_kl"}, seed=9)
    assert a.params.alphas == [0.5, 1.0, 2.0, 4.0]
    assert a.digest() == b.digest()
    assert a.digest() != c.digest()
    assert c.stamp().endswith("seed=9")


def test_matrix_spec():
    assert np.allclose(config.as_matrix_spec(2.0, 3, "x"), 2 * np.eye(3))
    assert np.allclose(config.as_matrix_spec([1.0, 2.0], 2, "x"), np.diag([1.0, 2.0]))
    with pytest.raises(ConfigError, match="x"):
        config.as_matrix_spec([[1.0, 2.0]], 2, "x")


def test_shipped_configs_parse():
    from pathlib import Path

    files = sorted(Path(__file__).resolve().parents[1].joinpath("configs").glob("*.json"))
    assert files
    for f in files:
        config.load_config(f)


# --------------------------------------------------------------------------
# cli


@pytest.mark.parametrize("name", sorted(SMALL))
def test_every_experiment_runs_and_stamps_outputs(tmp_path, name):
    rc, out = _run(tmp_path, name, SMALL[name], seed=4)
    assert rc == 0
    files = sorted(out.glob("*.csv"))
    assert files
    stamp = config.parse_config({"experiment": name, "params": SMALL[name], "seed": 4}).stamp()
    for f in files:
        assert f.read_text().splitlines()[0] == f"# {stamp}"


@pytest.mark.parametrize("name", ["bistable", "lj_cool", "limits"])
def test_rerun_is_byte_identical_and_worker_independent(tmp_path, name):
    rc1, out1 = _run(tmp_path, name, SMALL[name], out="a", seed=2)
    rc2, out2 = _run(tmp_path, name, SMALL[name], out="b", seed=2, workers=3)
    assert rc1 == rc2 == 0
    names = sorted(p.name for p in out1.glob("*.csv"))
    assert names == sorted(p.name for p in out2.glob("*.csv"))
    for n in names:
        assert (out1 / n).read_bytes() == (out2 / n).read_bytes(), n


def test_seed_override_changes_output(tmp_path):
    cfg = _write(tmp_path, "bistable", SMALL["bistable"], seed=1)
    assert cli.main(["bistable", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert cli.main(["bistable", "--config", str(cfg), "--out", str(tmp_path / "b"), "--seed", "5"]) == 0
    a = (tmp_path / "a" / "trajectory_controlled.csv").read_text()
    b = (tmp_path / "b" / "trajectory_controlled.csv").read_text()
    assert a.splitlines()[0].endswith("seed=1") and b.splitlines()[0].endswith("seed=5")
    assert a.splitlines()[3:] != b.splitlines()[3:]


def test_exit_code_config_errors(tmp_path, caplog):
    assert _run(tmp_path, "bistable", {"integrator": {"dtt": 1.0}})[0] == 2
    assert "params.integrator.dtt" in caplog.text
    # inadmissible explicit control
    assert _run(tmp_path, "aep", {"b": [[5.0, 0.0], [0.0, 5.0]]})[0] == 2
    # subcommand disagrees with the file
    cfg = _write(tmp_path, "ou_kl", {})
    assert cli.main(["ratio", "--config", str(cfg), "--out", str(tmp_path / "x")]) == 2
    assert cli.main(["ratio", "--config", str(tmp_path / "missing.json")]) == 2


def test_exit_code_numerical_failure(tmp_path):
    params = {"d": 2, "integrator": {"dt": 3.0, "n_steps": 2000, "thin": 10}, "replicas": 1}
    with pytest.warns(RuntimeWarning):
        assert _run(tmp_path, "bistable", params)[0] == 3


def test_ou_kl_single_alpha(tmp_path):
    rc, out = _run(tmp_path, "ou_kl", {"alphas": [3.0], "n_times": 101})
    assert rc == 0
    assert [p.name for p in sorted(out.glob("kl_alpha_*.csv"))] == ["kl_alpha_3.csv"]
    _, header, data = io.read_csv(out / "rates.csv")
    assert data.shape[0] == 1 and "fitted_rate" in header


def test_ratio_closed_form_only_when_commuting(tmp_path):
    rc, out = _run(tmp_path, "ratio", {"k": [1.0, 1.0], "gamma": [1.0, 2.0], "n_grid": 50}, out="c")
    assert rc == 0
    _, header, data = io.read_csv(out / "ratio_summary.csv")
    assert "alpha_closed_form" in header
    row = dict(zip(header, data[0]))
    assert row["alpha_search"] == pytest.approx(row["alpha_closed_form"], rel=1e-4)
    k = [[2.0, 1.0], [1.0, 2.0]]
    rc, out = _run(tmp_path, "ratio", {"k": k, "gamma": [1.0, 2.0], "n_grid": 50}, out="n")
    assert rc == 0
    assert "alpha_closed_form" not in io.read_csv(out / "ratio_summary.csv")[1]


def test_limits_single_eps_skips_fit(tmp_path):
    params = dict(SMALL["limits"], eps=[0.3])
    rc, out = _run(tmp_path, "limits", params)
    assert rc == 0
    assert (out / "limits.csv").exists() and not (out / "limits_fit.csv").exists()
