import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from giant_vortex.config import ConfigError, RunConfig, dumps, parse_config, to_csv


def test_parse_with_comments():
    cfg = parse_config("# header\nomega = 100  # scaled\n\nd_omega=0.5\ng_coupling = 1\nseed = 3\n")
    assert cfg == {"omega": 100.0, "d_omega": 0.5, "g_coupling": 1.0, "seed": 3}


@pytest.mark.parametrize("text, where, what", [
    ("omega = 1\nbogus = 2\n", ":2", "unknown key"),
    ("omega = 1\nomega = 2\n", ":2", "duplicate"),
    ("omega 1\n", ":1", "expected"),
    ("\nomega = abc\n", ":2", "invalid value"),
    ("omega =\n", ":1", "missing value"),
    ("seed = 1.5\n", ":1", "invalid value"),
    ("omega = nan\n", ":1", "invalid value"),
])
def test_parse_errors_carry_line_numbers(text, where, what):
    with pytest.raises(ConfigError) as exc:
        parse_config(text, "run.cfg")
    assert f"run.cfg{where}" in str(exc.value) and what in str(exc.value)


def test_physical_parameters_scale():
    s = RunConfig.from_mapping(parse_config("omega_phys = 3\nk_trap = 1\ng_coupling = 1\n")).scaled()
    assert s.omega == pytest.approx(12.0) and s.D_Omega == pytest.approx(8 / 9)


def test_missing_key_named():
    with pytest.raises(ConfigError, match="g_coupling"):
        RunConfig(omega=100.0, d_omega=0.5).scaled()
    with pytest.raises(ConfigError, match="d_omega"):
        RunConfig(omega=100.0, g_coupling=1.0).scaled()
    with pytest.raises(ConfigError, match="k_trap"):
        RunConfig(omega_phys=3.0, g_coupling=1.0).scaled()


def test_ambiguous_parameters_rejected():
    with pytest.raises(ConfigError, match="ambiguous"):
        RunConfig(omega=12.0, d_omega=0.5, omega_phys=3.0, k_trap=1.0, g_coupling=1.0).scaled()


def test_zero_coupling_with_physical_input():
    s = RunConfig(omega_phys=3.0, k_trap=1.0, g_coupling=0.0).scaled()
    assert s.G == 0.0


def test_dumps_is_valid_stable_json():
    obj = {"b": 1.0 / 3.0, "a": [1, 2.5, float("nan")], "c": {"x": True, "y": None, "z": "é"}}
    text = dumps(obj)
    back = json.loads(text)
    assert list(back) == ["b", "a", "c"]
    assert back["b"] == 1.0 / 3.0 and back["a"][2] is None
    assert dumps(obj) == text


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_round_trip(x):
    assert json.loads(dumps([x]))[0] == x
    row = to_csv(["v"], [(x,)]).splitlines()[1]
    assert float(row) == x


def test_csv_has_header_and_newlines():
    text = to_csv(["n", "v"], [(1, 0.5), (2, math.pi)])
    assert text == "n,v\n1,0.5\n2,3.1415926535897931\n"
