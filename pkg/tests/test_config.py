import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from irsho.config import (
    ConfigError,
    NetworkConfig,
    config_from_mapping,
    config_to_mapping,
    db_to_lin,
    dbm_to_watt,
    lin_to_db,
    load_config,
    watt_to_dbm,
)
from irsho.channel import ChannelParams, threshold_from_serving_distance


def test_defaults_in_si():
    c = NetworkConfig()
    assert c.lambda_b == pytest.approx(10 / 1e6)
    assert c.P_t == pytest.approx(dbm_to_watt(40.0))
    assert c.delta_x == pytest.approx(0.2)
    assert c.j == 49
    assert c.u == 52
    assert lin_to_db(c.Q_out) == pytest.approx(-8.0)


def test_state_counts():
    c = NetworkConfig(T_t=0.0)
    assert c.j == 1
    c = NetworkConfig(T_t=0.1, T_p=0.25)
    assert c.j == 11
    assert c.u == 15


@given(st.floats(-60, 60))
def test_db_round_trip(x):
    assert lin_to_db(db_to_lin(x)) == pytest.approx(x, rel=1e-12, abs=1e-12)


@given(st.floats(-30, 80))
def test_dbm_round_trip(x):
    assert watt_to_dbm(dbm_to_watt(x)) == pytest.approx(x, rel=1e-12, abs=1e-12)


def test_mapping_round_trip():
    raw = {"lambda_r_per_km2": 500, "gamma_ho_db": -2, "t_t_ms": 240, "d_m": 10, "f_c_ghz": 3.5}
    cfg, _ = config_from_mapping(raw)
    assert cfg.lambda_r == pytest.approx(5e-4)
    assert cfg.T_t == pytest.approx(0.24)
    back = config_to_mapping(cfg)
    for k, v in raw.items():
        assert back[k] == pytest.approx(v, rel=1e-12)
    cfg2, _ = config_from_mapping(back)
    again = config_to_mapping(cfg2)
    assert again.keys() == back.keys()
    for k in back:
        assert again[k] == pytest.approx(back[k], rel=1e-12)


def test_gamma_irs_alternative():
    cfg0 = NetworkConfig()
    g = threshold_from_serving_distance(30.0, ChannelParams.from_config(cfg0))
    cfg, run = config_from_mapping({"gamma_irs_db": lin_to_db(g)})
    assert cfg.D == pytest.approx(30.0, rel=1e-10)
    assert "gamma_irs_db" not in run


@pytest.mark.parametrize(
    "raw, field",
    [
        ({"nope": 1}, "nope"),
        ({"d_m": "x"}, "d_m"),
        ({"d_m": True}, "d_m"),
        ({"d_m": 10, "gamma_irs_db": 0}, "d_m"),
        ({"d_m": -1}, "D"),
        ({"t_t_ms": 1200}, "T_p"),
        ({"lambda_b_per_km2": 0}, "lambda_b"),
        ({"seed": -3}, "seed"),
        ({"n_trials": 0}, "n_trials"),
        ({"pp_coupling": "other"}, "pp_coupling"),
    ],
)
def test_invalid_configs_name_the_field(raw, field):
    with pytest.raises(ConfigError) as ei:
        config_from_mapping(raw)
    assert ei.value.field == field


def test_load_config(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"n_elements": 200, "seed": 7}))
    cfg, run = load_config(p)
    assert cfg.N == 200
    assert run == {"seed": 7}
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(p)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")


def test_replace_validates():
    with pytest.raises(ConfigError):
        NetworkConfig().replace(alpha=2.0)
    assert math.isinf(-lin_to_db(0.0))


def test_quadrature_block():
    cfg, _ = config_from_mapping({"quadrature": {"n_d": 32, "n_phi": 64, "refine": False}})
    assert (cfg.quad.n_d, cfg.quad.n_phi, cfg.quad.refine) == (32, 64, False)
    again, _ = config_from_mapping(config_to_mapping(cfg))
    assert again.quad == cfg.quad
    assert "quadrature" not in config_to_mapping(NetworkConfig())
    for bad in ({"n_d": 1}, {"n_d": 2.5}, {"refine": 1}, {"bogus": 1}, {"tail_mass": 2.0}):
        with pytest.raises(ConfigError):
            config_from_mapping({"quadrature": bad})
    with pytest.raises(ConfigError):
        config_from_mapping({"quadrature": [1]})
