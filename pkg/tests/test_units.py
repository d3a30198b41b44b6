import math
import warnings

import pytest
from hypothesis import given, strategies as st

from optotherm.errors import DegenerateParameterError, DomainError
from optotherm.presets import get_preset
from optotherm.units import (
    RegimeWarning,
    SystemParams,
    UnitConversion,
    displaced_rest_position,
    mechanical_displacement,
)


def test_valid_params_accept_negative_coupling():
    p = SystemParams(nu0=1e4, gm=-0.1, omega=1e-3, temperature=10.0)
    assert p.gm == -0.1


@pytest.mark.parametrize("kwargs, exc", [
    ({"nu0": 0.0}, DomainError),
    ({"nu0": -1.0}, DomainError),
    ({"omega": 0.0}, DegenerateParameterError),
    ({"omega": -1e-3}, DegenerateParameterError),
    ({"temperature": -1.0}, DomainError),
    ({"gamma": 2.0}, DomainError),
    ({"gm": math.nan}, DomainError),
    ({"bath_exponent": 1.5}, DomainError),
])
def test_invalid_params(kwargs, exc):
    base = {"nu0": 1e4, "gm": 0.1, "omega": 1e-3, "temperature": 1.0}
    base.update(kwargs)
    with pytest.raises(exc):
        SystemParams(**base)


def test_regime_flags():
    fig3 = get_preset("fig3a").params
    assert fig3.is_dispersive and fig3.is_semiclassical
    strong = get_preset("fig3d").params
    assert strong.is_dispersive and not strong.is_semiclassical
    with pytest.warns(RegimeWarning, match="semiclassical"):
        strong.warn_regime()
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        fig3.warn_regime()


def test_dict_round_trip_and_unknown_keys():
    p = get_preset("fig3d").params
    assert SystemParams.from_dict(p.to_dict()) == p
    with pytest.raises(DomainError):
        SystemParams.from_dict({**p.to_dict(), "kappa": 1.0})


@pytest.mark.parametrize("beta, x", [(0, 0.0), (500, 1000.0), (3j, 0.0), (1.5 - 2j, 3.0)])
def test_mechanical_displacement(beta, x):
    assert mechanical_displacement(beta) == x


@pytest.mark.parametrize("gm, omega, x", [(0.0, 1e-3, 0.0), (0.1, 1e-3, -200.0), (1.0, 1.0, -2.0)])
def test_displaced_rest_position(gm, omega, x):
    assert displaced_rest_position(SystemParams(nu0=1e4, gm=gm, omega=omega)) == pytest.approx(x, rel=1e-15)


def test_rest_position_needs_oscillation():
    with pytest.raises(DegenerateParameterError):
        SystemParams(nu0=1e4, gm=0.1, omega=0.0)


_finite = st.floats(min_value=1e-30, max_value=1e30)


@given(gamma_si=st.floats(min_value=1e3, max_value=1e15), value=_finite)
def test_unit_round_trips(gamma_si, value):
    c = UnitConversion(gamma_si)
    for to_si, from_si in ((c.time_to_si, c.time_from_si),
                           (c.frequency_to_si, c.frequency_from_si),
                           (c.energy_to_si, c.energy_from_si),
                           (c.power_to_si, c.power_from_si),
                           (c.temperature_to_kelvin, c.temperature_from_kelvin)):
        assert from_si(to_si(value)) == pytest.approx(value, rel=1e-12)
        assert to_si(from_si(value)) == pytest.approx(value, rel=1e-12)


def test_si_scales():
    c = UnitConversion(1e9)
    # hbar * gamma for gamma = 1e9 s^-1
    assert c.energy_to_si(1.0) == pytest.approx(1.054571817e-34 * 1e9, rel=1e-9)
    assert c.power_to_si(1.0) == pytest.approx(1.054571817e-34 * 1e18, rel=1e-9)
    assert c.time_to_si(1.0) == 1e-9
    with pytest.raises(DomainError):
        UnitConversion(0.0)


def test_replace_revalidates():
    p = get_preset("fig3a").params
    assert p.replace(omega=1.0).omega == 1.0
    with pytest.raises(DegenerateParameterError):
        p.replace(omega=0.0)
