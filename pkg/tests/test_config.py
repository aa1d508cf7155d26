import math

import pytest

from spinexchange.cli import preset_names, preset_text
from spinexchange.config import (ConfigError, config_hash, load_config, parse_config,
                                 result_config)

HOP = """\
scenario = "hop"
seed = 1

[params]
kappa_hz = 200e3
g_hz = 1.5e6
gamma_atom_hz = 6e6
delta_atom_hz = -10e9
delta_c_hz = -1.1e6
n_bar = 1000
n_atoms = 1e5
q_over_b2_hz = 144
b_field = 4.0

[profile]
kind = "gaussian"
waist_um = 16.0
cloud_center_um = 2000.0
cloud_rms_um = 150.0
omega_peak_hz = 3000.0
n_sites = 16

[protocol]
a_min_um = 2000.0
a_max_um = 2450.0

[cuts]
a_um = 2200.0
b_um = 1700.0

[evolution]
t_final_us = 100.0
samples = 11
"""


def test_defaults_resolved_and_hz_converted():
    cfg = parse_config(HOP)
    assert cfg["params"]["kappa"] == pytest.approx(2 * math.pi * 200e3)
    assert "kappa_hz" not in cfg["params"]
    assert cfg["profile"]["x_min_um"] == 1550.0 and cfg["profile"]["x_max_um"] == 2450.0
    assert cfg["coupling"]["dissipation_scale"] == 1.0
    assert cfg["evolution"]["rtol"] == 1e-8
    assert cfg["protocol"]["transition"] == "-1,0"
    assert cfg["output_dir"] == "output"


def test_unknown_key_reports_line():
    text = HOP.replace("n_sites = 16", "n_sites = 16\nwaste_um = 3")
    with pytest.raises(ConfigError) as exc:
        parse_config(text, "x.toml")
    err = exc.value
    assert err.key == "profile.waste_um"
    assert err.line == text.splitlines().index("waste_um = 3") + 1
    assert str(err).startswith(f"x.toml:{err.line}: key 'profile.waste_um'")


def test_missing_physics_key_rejected():
    with pytest.raises(ConfigError, match="required") as exc:
        parse_config(HOP.replace("n_bar = 1000\n", ""))
    assert exc.value.key == "params.n_bar"


def test_both_units_rejected():
    with pytest.raises(ConfigError, match="not both"):
        parse_config(HOP.replace("kappa_hz = 200e3", "kappa_hz = 200e3\nkappa = 1.0"))


@pytest.mark.parametrize("old,new,key", [
    ("n_sites = 16", 'n_sites = "16"', "profile.n_sites"),
    ("samples = 11", "samples = 1", "evolution.samples"),
    ("b_field = 4.0", "b_field = -4.0", "params.b_field"),
    ('scenario = "hop"', 'scenario = "dance"', "scenario"),
    ("a_max_um = 2450.0", "a_max_um = 1000.0", "protocol.a_max_um"),
    ("kappa_hz = 200e3", "kappa_hz = -200e3", "params.kappa_hz"),
    ("t_final_us = 100.0", "t_final_us = nan", "evolution.t_final_us"),
])
def test_invalid_values(old, new, key):
    with pytest.raises(ConfigError) as exc:
        parse_config(HOP.replace(old, new))
    assert exc.value.key == key


def test_zeeman_input_required():
    with pytest.raises(ConfigError, match="b_field"):
        parse_config(HOP.replace("b_field = 4.0\n", ""))


def test_unused_section_rejected():
    with pytest.raises(ConfigError, match="not used"):
        parse_config(HOP + "\n[sweep]\nn_points = 3\n")


def test_missing_section_rejected():
    with pytest.raises(ConfigError, match=r"\[cuts\]"):
        parse_config(HOP.replace("[cuts]\na_um = 2200.0\nb_um = 1700.0\n", ""))


def test_syntax_error_line():
    with pytest.raises(ConfigError) as exc:
        parse_config(HOP.replace("seed = 1", "seed = = 1"))
    assert exc.value.line == 2


def test_sign_sweep_forbids_drive_detuning():
    text = preset_text("fig3_like").replace("b_field = 4.0", "b_field = 4.0\ndelta_c_hz = 1.0")
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config(text)


def test_spin_mixing_exclusive_options():
    base = preset_text("fig4_like")
    with pytest.raises(ConfigError, match="exactly one"):
        parse_config(base.replace("growth_time_us = 160.0", "growth_time_us = 160.0\nchi = -1.0"))
    with pytest.raises(ConfigError, match="either"):
        parse_config(base.replace("b_field = 1.14", "b_field = 1.14\nq = 3.0"))
    with pytest.raises(ConfigError, match="together"):
        parse_config(base.replace("b_field = 1.14\n", ""))


def test_table_profile_path_relative_to_config(tmp_path):
    (tmp_path / "prof.txt").write_text("0 1 1\n1 1 1\n")
    text = HOP.replace("""kind = "gaussian"
waist_um = 16.0
cloud_center_um = 2000.0
cloud_rms_um = 150.0
omega_peak_hz = 3000.0
n_sites = 16""", 'kind = "table"\npath = "prof.txt"')
    cfg_path = tmp_path / "c.toml"
    cfg_path.write_text(text)
    cfg = load_config(cfg_path)
    assert cfg["profile"]["path"] == str(tmp_path / "prof.txt")


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "nope.toml")


def test_hash_ignores_non_result_keys():
    a = parse_config(HOP)
    b = parse_config(HOP.replace("seed = 1", 'seed = 1\noutput_dir = "elsewhere"\n'
                                              'description = "x"'))
    assert config_hash(a) == config_hash(b)
    assert "output_dir" not in result_config(a)
    c = parse_config(HOP.replace("seed = 1", "seed = 2"))
    assert config_hash(c) != config_hash(a)


@pytest.mark.parametrize("name", preset_names())
def test_presets_parse(name):
    cfg = parse_config(preset_text(name), name)
    assert cfg["description"]
    assert cfg["output_dir"] == f"out_{name}"
