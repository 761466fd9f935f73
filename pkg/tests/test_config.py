import numpy as np
import pytest

from qdspin.config import (
    config_sha256,
    default_scenario_document,
    get_default_geometry,
    load_config,
    load_default_config,
    parse_document,
)
from qdspin.constants import SCENARIOS, SCHEMA_ID
from qdspin.errors import ConfigError
from qdspin.models import LinearPolarization


def _doc(**extra):
    return {"schema": SCHEMA_ID, "scenario": "fig3", **extra}


@pytest.mark.parametrize("scenario", [s for s in SCENARIOS if s != "fit"])
def test_builtin_scenarios_parse(scenario):
    cfg = load_default_config(scenario)
    assert cfg.scenario == scenario
    assert cfg.stem == scenario
    assert len(cfg.sha256) == 64


def test_builtin_fit_scenario_parses_without_reading_data():
    cfg = load_default_config("fit")
    assert cfg.fit["model"] == "damped_sine"


def test_presets_resolve():
    cfg = load_default_config("fig5b")
    assert [d.name for d in cfg.dots] == ["qd-c"]
    assert cfg.dots[0].fss_zero.value == pytest.approx(13.2)
    assert [d.polarization for d in cfg.drives] == [LinearPolarization.H, LinearPolarization.V]
    assert cfg.intensities.size == 89


def test_preset_fields_can_be_overridden():
    cfg = parse_document(_doc(dots=[{"preset": "qd-c", "fss": {"value": 5.0, "unit": "ueV"}}]))
    assert cfg.dots[0].fss_zero.value == 5.0
    assert cfg.dots[0].name == "qd-c"
    assert cfg.dots[0].chi_e.value == pytest.approx(-0.10)


def test_missing_dot_field_points_at_it():
    dot = {"fss": {"value": 2.0, "unit": "ueV"}, "gamma_h": {"value": 0.0, "unit": "1/ps"}}
    with pytest.raises(ConfigError) as exc:
        parse_document(_doc(dots=[dot]))
    assert exc.value.path == "/dots/0/gamma_e"


def test_unknown_key_points_at_it():
    with pytest.raises(ConfigError) as exc:
        parse_document(_doc(bogus=1))
    assert exc.value.path == "/bogus"


def test_wrong_unit_is_rejected():
    dot = {"preset": "qd-c", "fss": {"value": 13.2, "unit": "meV"}}
    with pytest.raises(ConfigError) as exc:
        parse_document(_doc(dots=[dot]))
    assert exc.value.path == "/dots/0/fss/unit"


def test_wrong_schema_id():
    with pytest.raises(ConfigError) as exc:
        parse_document({"schema": "qdspin/v0", "scenario": "fig3"})
    assert exc.value.path == "/schema"


def test_unknown_preset():
    with pytest.raises(ConfigError) as exc:
        parse_document(_doc(dots=[{"preset": "qd-z"}]))
    assert exc.value.path == "/dots/0/preset"


def test_negative_rate_is_rejected():
    dot = {"preset": "qd-c", "gamma_e": {"value": -0.02, "unit": "1/ps"}}
    with pytest.raises(ConfigError) as exc:
        parse_document(_doc(dots=[dot]))
    assert exc.value.path.startswith("/dots/0/gamma_e")


def test_gamma_e_not_above_gamma_h_is_config_error():
    dot = {"preset": "qd-c", "gamma_h": {"value": 0.05, "unit": "1/ps"}}
    with pytest.raises(ConfigError) as exc:
        parse_document(_doc(dots=[dot]))
    assert exc.value.path == "/dots/0"


def test_sweep_forms():
    cfg = parse_document(_doc(sweep={"unit": "ueV", "values": [0.0, 1.0, 2.5]}))
    assert np.array_equal(cfg.sweep, [0.0, 1.0, 2.5])
    cfg = parse_document(_doc(sweep={"unit": "ueV", "start": 0.0, "stop": 10.0, "num": 11}))
    assert cfg.sweep[-1] == 10.0
    with pytest.raises(ConfigError):
        parse_document(_doc(sweep={"unit": "ueV", "values": [0.0, 2.0, 1.0]}))
    with pytest.raises(ConfigError) as exc:
        parse_document(_doc(sweep={"unit": "ueV", "start": 0.0, "num": 11}))
    assert exc.value.path == "/sweep/stop"


def test_rate_rows_by_bias():
    rates = {
        "rows": [
            {"bias": {"value": 0.4, "unit": "V"}, "gamma_e": {"value": 0.005, "unit": "1/ps"}, "gamma_h": {"value": 1e-5, "unit": "1/ps"}},
            {"bias": {"value": 0.8, "unit": "V"}, "gamma_e": {"value": 0.02, "unit": "1/ps"}, "gamma_h": {"value": 1e-4, "unit": "1/ps"}},
        ]
    }
    cfg = parse_document({"schema": SCHEMA_ID, "scenario": "fig4", "rates": rates})
    assert cfg.rates.field_range[0] == pytest.approx((0.4 + 0.76) / 230.0 * 1e4)
    assert not cfg.rates.illustrative


def test_environment_sets_diode_geometry(monkeypatch):
    monkeypatch.setenv("QDSPIN_V_BI", "0.5")
    monkeypatch.setenv("QDSPIN_W_I_NM", "150")
    geom = get_default_geometry()
    assert geom.v_bi.value == 0.5
    assert geom.w_i_nm == 150.0


@pytest.mark.parametrize("value", ["abc", "-1"])
def test_bad_environment_geometry(monkeypatch, value):
    monkeypatch.setenv("QDSPIN_W_I_NM", value)
    with pytest.raises(ConfigError):
        get_default_geometry()


def test_output_dir_from_environment(monkeypatch, tmp_path):
    monkeypatch.setenv("QDSPIN_OUTPUT_DIR", str(tmp_path / "env-out"))
    cfg = parse_document(_doc())
    assert cfg.output_dir == (tmp_path / "env-out").resolve()


def test_relative_output_dir_follows_config_file(write_config, tmp_path):
    path = write_config(_doc(output={"dir": "out", "stem": "run1", "format": "json"}))
    cfg = load_config(path)
    assert cfg.output_dir == (tmp_path / "out").resolve()
    assert cfg.stem == "run1"
    assert cfg.fmt == "json"


def test_invalid_json_is_config_error(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(path)


def test_config_hash_ignores_key_order():
    a = _doc(noise={"seed": 1, "level": 0.1})
    b = {"noise": {"level": 0.1, "seed": 1}, "scenario": "fig3", "schema": SCHEMA_ID}
    assert config_sha256(a) == config_sha256(b)
    assert config_sha256(a) != config_sha256(_doc(noise={"seed": 2, "level": 0.1}))


def test_unknown_scenario_name():
    with pytest.raises(ConfigError):
        default_scenario_document("fig9")
