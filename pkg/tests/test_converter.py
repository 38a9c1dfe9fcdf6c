import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from flyback_mi.converter import (ConverterState, FlybackParams, Mode, ModulatorConfig,
                                  duty_reference, gate_state, injected_current,
                                  magnetizing_derivative, mode_transition, polarity)

F0 = 50.0


def test_flyback_param_validation():
    for bad in ({"v_dc": 0}, {"l_m": -1e-6}, {"n": 0}, {"r1": -0.1}, {"v_d": -1}):
        with pytest.raises(ValueError):
            FlybackParams(**bad)


def test_modulator_validation():
    with pytest.raises(ValueError):
        ModulatorConfig(f_sw=90.0, f0=50.0)
    with pytest.raises(ValueError):
        ModulatorConfig(d_max=0.96)
    with pytest.raises(ValueError):
        ModulatorConfig(m=0.5, d_max=0.4)


def test_state_invariants():
    with pytest.raises(ValueError):
        ConverterState(-1.0, Mode.DISCHARGE)
    with pytest.raises(ValueError):
        ConverterState(1.0, Mode.IDLE)


def test_duty_reference_examples():
    assert duty_reference(0.0, ModulatorConfig(m=0.7)) == 0.0
    assert duty_reference(1 / (4 * F0), ModulatorConfig(m=0.4)) == pytest.approx(0.4)
    assert duty_reference(1 / (4 * F0), ModulatorConfig(m=0.95)) == pytest.approx(0.95)


def test_duty_reference_ceiling():
    # the config refuses m > d_max, so bypass validation to exercise the clip
    cfg = ModulatorConfig(m=0.6, d_max=0.95)
    object.__setattr__(cfg, "m", 1.2)
    assert duty_reference(1 / (4 * F0), cfg) == pytest.approx(0.95)


@given(st.floats(0.0, 0.2), st.floats(0.0, 0.95))
def test_duty_within_bounds(t, m):
    d = duty_reference(t, ModulatorConfig(m=m))
    assert 0.0 <= d <= m + 1e-15


def test_gate_zero_duty_never_on():
    cfg = ModulatorConfig(m=0.0)
    assert not any(gate_state(k * 1e-6, cfg) for k in range(200))


def test_gate_on_at_cycle_start_with_duty():
    cfg = ModulatorConfig(m=0.95)
    assert gate_state(1 / (4 * F0), cfg)


def test_gate_on_fraction_matches_duty():
    cfg = ModulatorConfig(m=0.5)
    f_sw = cfg.f_sw
    t0 = 1 / (4 * F0)  # crest, carrier at cycle start (5000 periods exactly)
    n = 200
    on = sum(gate_state(t0 + k / (f_sw * n), cfg) for k in range(n))
    assert abs(on / n - duty_reference(t0, cfg)) <= 1.0 / n


def test_polarity():
    assert polarity(1 / (4 * F0), F0) == 1
    assert polarity(3 / (4 * F0), F0) == -1
    assert polarity(0.0, F0) == 1


def test_magnetizing_derivative_examples():
    p = FlybackParams(v_dc=50.0, l_m=40e-6, n=0.1, r1=0.0, r_on=0.0, v_d=0.0)
    assert magnetizing_derivative(ConverterState(0.0, Mode.CHARGE), 0.0, 1, p) == pytest.approx(1.25e6)
    assert magnetizing_derivative(ConverterState(0.0, Mode.IDLE), 325.0, 1, p) == 0.0
    d = magnetizing_derivative(ConverterState(0.0, Mode.DISCHARGE), 325.0, 1, p)
    assert d == pytest.approx(-8.125e5)


def test_magnetizing_derivative_resistive_terms():
    p = FlybackParams(r1=0.1, r_on=0.05, r2=0.2, n=0.15, v_d=0.7, l_m=28e-6)
    st_c = ConverterState(10.0, Mode.CHARGE)
    assert magnetizing_derivative(st_c, 0.0, 1, p) == pytest.approx((50 - 0.2 * 10) / 28e-6)
    st_d = ConverterState(10.0, Mode.DISCHARGE)
    want = -(0.15 * (-1 * -300.0 + 0.7) + 0.15 ** 2 * 0.2 * 10) / 28e-6
    assert magnetizing_derivative(st_d, -300.0, -1, p) == pytest.approx(want)


def test_injected_current():
    p = FlybackParams(n=0.1)
    assert injected_current(ConverterState(12.5, Mode.CHARGE), 0.005, p, F0) == 0.0
    assert injected_current(ConverterState(12.5, Mode.DISCHARGE), 0.005, p, F0) == pytest.approx(1.25)
    assert injected_current(ConverterState(12.5, Mode.DISCHARGE), 0.015, p, F0) == pytest.approx(-1.25)
    assert injected_current(ConverterState(0.0, Mode.IDLE), 0.005, p, F0) == 0.0


def test_mode_transition_table():
    assert mode_transition(ConverterState(5.0, Mode.CHARGE), False) is Mode.DISCHARGE
    assert mode_transition(ConverterState(0.0, Mode.DISCHARGE), False) is Mode.IDLE
    assert mode_transition(ConverterState(0.0, Mode.IDLE), True) is Mode.CHARGE
    assert mode_transition(ConverterState(3.0, Mode.DISCHARGE), True) is Mode.CHARGE
