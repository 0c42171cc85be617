import json
import math

import pytest

from models.errors import ConfigError
from models.experiment import AntennaKind, ExperimentSpec, Scheme
from services import config_service, experiment_service


# ============================================================
# Parsing
# ============================================================

def test_empty_config_gives_defaults():
    assert config_service.parse_config("") == ExperimentSpec()


def test_values_are_parsed_into_their_types():
    spec = config_service.parse_config(
        "[experiment]\n"
        "trials = 2e4\n"
        "engines = analytic, mc\n"
        "schemes = rb, es\n"
        "antenna = ula\n"
        "sweep_values = 1e-5, 1e-4\n"
        "[system]\n"
        "lambda_bs = 0.001\n"
        "alpha_nlos = 4\n"
        "include_bs_gain = no\n"
        "sidelobe_slots = none\n"
        "[search]\n"
        "nlos_enabled = true\n"
    )
    assert spec.trials == 20000
    assert spec.engines == ("analytic", "monte_carlo")
    assert spec.schemes == (Scheme.RANDOM, Scheme.EXHAUSTIVE)
    assert spec.antenna is AntennaKind.ULA
    assert spec.sweep_values == (1e-5, 1e-4)
    assert spec.params.lambda_bs == 1e-3
    assert spec.params.alpha_nlos == 4.0
    assert spec.params.include_bs_gain is False
    assert spec.params.sidelobe_slots is None
    assert spec.nlos_enabled is True


def test_decibel_keys_are_converted():
    spec = config_service.parse_config("[system]\nsinr_threshold_db = 0\np_bs_control_dbm = 30\n")
    assert spec.params.sinr_threshold == pytest.approx(1.0)
    assert spec.params.p_bs_control == pytest.approx(1.0)


def test_decibel_and_linear_forms_conflict():
    with pytest.raises(ConfigError, match="sinr_threshold"):
        config_service.parse_config("[system]\nsinr_threshold = 2\nsinr_threshold_db = 3\n")


def test_invariant_violation_names_key_and_line():
    with pytest.raises(ConfigError) as info:
        config_service.parse_config("[experiment]\ntrials = 200\n\n[system]\nn_bs = 0\n")
    assert info.value.key == "n_bs"
    assert info.value.line == 5


def test_unknown_key_is_rejected():
    with pytest.raises(ConfigError) as info:
        config_service.parse_config("[system]\nlambda = 1e-4\n")
    assert info.value.key == "lambda"
    assert info.value.line == 2


def test_unknown_section_is_rejected():
    with pytest.raises(ConfigError, match="unknown section"):
        config_service.parse_config("[network]\nlambda_bs = 1e-4\n")


@pytest.mark.parametrize("text, key", [
    ("[experiment]\ntrials = many\n", "trials"),
    ("[experiment]\ntrials = 2.5\n", "trials"),
    ("[system]\ninclude_bs_gain = maybe\n", "include_bs_gain"),
    ("[experiment]\nschemes = rb, xx\n", "schemes"),
])
def test_malformed_values_are_rejected(text, key):
    with pytest.raises(ConfigError) as info:
        config_service.parse_config(text)
    assert info.value.key == key


def test_missing_section_header_is_a_syntax_error():
    with pytest.raises(ConfigError):
        config_service.parse_config("lambda_bs = 1e-4\n")


def test_config_error_is_a_value_error():
    assert issubclass(ConfigError, ValueError)


# ============================================================
# Emitting
# ============================================================

def test_default_spec_round_trips():
    spec = ExperimentSpec()
    assert config_service.parse_config(config_service.emit_config(spec)) == spec


@pytest.mark.parametrize("preset", ["fig2", "fig4", "fig6", "fig7"])
def test_preset_spec_round_trips(preset):
    spec = experiment_service.expand_preset(preset, trials=500, seed=9)
    assert config_service.parse_config(config_service.emit_config(spec)) == spec


def test_emitted_config_is_linear():
    text = config_service.emit_config(ExperimentSpec())
    assert "sinr_threshold = 1.0" in text
    assert "sinr_threshold_db" not in text
    assert "alpha_nlos = inf" in text


def test_load_config_file(tmp_path):
    path = tmp_path / "sweep.ini"
    path.write_text("[experiment]\nseed = 4\n", encoding="utf-8")
    assert config_service.load_config_file(str(path)).seed == 4


def test_missing_config_file(tmp_path):
    with pytest.raises(IOError):
        config_service.load_config_file(str(tmp_path / "absent.ini"))


def test_overrides_skip_none():
    spec = config_service.with_overrides(ExperimentSpec(), trials=None, seed=3)
    assert spec.seed == 3
    assert spec.trials == ExperimentSpec().trials


# ============================================================
# Settings
# ============================================================

def test_settings_default_when_missing(settings_home):
    assert config_service.load_settings() == config_service.get_default_settings()


def test_settings_update_persists(settings_home):
    config_service.update_settings({"workers": 4})
    assert config_service.load_settings()["workers"] == 4
    stored = json.loads((settings_home / ".cellsearch" / "settings.json").read_text(encoding="utf-8"))
    assert stored["output_dir"] is None


def test_corrupt_settings_fall_back_to_defaults(settings_home):
    settings_dir = settings_home / ".cellsearch"
    settings_dir.mkdir()
    (settings_dir / "settings.json").write_text("{not json", encoding="utf-8")
    assert config_service.load_settings() == config_service.get_default_settings()


def test_infinite_exponent_survives_round_trip():
    spec = config_service.parse_config(config_service.emit_config(ExperimentSpec()))
    assert math.isinf(spec.params.alpha_nlos)
