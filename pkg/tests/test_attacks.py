import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from laacosim.attacks import (
    DlaaSpec,
    SlaaSpec,
    attack_capacity,
    dlaa_inject,
    predict_critical_gain,
    sensing_weights,
    slaa_inject,
)
from laacosim.errors import ConfigError
from laacosim.grid import SimState, dlaa_matrix, reduced_model, sensing_matrix, simulate_reduced, step


def idx(case, *buses):
    return [case.load_index[b] for b in buses]


def test_slaa_inactive_before_start(ieee39):
    spec = SlaaSpec((4, 20), (0.2, 0.2), start=30.0)
    assert not slaa_inject(spec, 29.9, ieee39.nominal_load, ieee39).any()


def test_slaa_magnitudes(ieee39):
    spec = SlaaSpec((4, 20), (1.0, 0.76))
    eps = slaa_inject(spec, 30.0, ieee39.nominal_load, ieee39)
    i4, i20 = idx(ieee39, 4, 20)
    assert eps[i4] == ieee39.nominal_load[i4]
    assert eps[i20] == pytest.approx(0.76 * ieee39.nominal_load[i20])
    assert np.count_nonzero(eps) == 2


def test_slaa_zero_fraction(ieee39):
    assert not slaa_inject(SlaaSpec((4,), (0.0,)), 100.0, ieee39.nominal_load, ieee39).any()


def test_slaa_target_must_be_load_bus(ieee39):
    with pytest.raises(ConfigError, match="not load buses"):
        slaa_inject(SlaaSpec((30,), (0.1,)), 40.0, ieee39.nominal_load, ieee39)


def test_spec_validation():
    with pytest.raises(ConfigError):
        SlaaSpec((4, 20), (0.1,))
    with pytest.raises(ConfigError):
        SlaaSpec((4,), (-0.1,))
    with pytest.raises(ConfigError):
        DlaaSpec((4,), (0.0,))
    with pytest.raises(ConfigError):
        DlaaSpec((4,), (1.0,), unit="pu/MW")


def test_dlaa_zero_deviation_zero_injection(ieee39):
    spec = DlaaSpec((4, 20), (70.0, 70.0))
    assert not dlaa_inject(spec, 0.0, 40.0, ieee39).any()


def test_dlaa_feedback_sign_and_size(ieee39):
    spec = DlaaSpec((4, 20), (70.0, 70.0))
    eps = dlaa_inject(spec, -0.01, 40.0, ieee39)
    i4, i20 = idx(ieee39, 4, 20)
    assert eps[i4] == pytest.approx(0.7) and eps[i20] == pytest.approx(0.7)


def test_dlaa_holds_last_on_missing_measurement(ieee39):
    spec = DlaaSpec((4,), (5.0,))
    last = dlaa_inject(spec, -0.1, 40.0, ieee39)
    assert np.array_equal(dlaa_inject(spec, None, 40.1, ieee39, last=last), last)
    assert not dlaa_inject(spec, -0.1, 10.0, ieee39).any()


def test_gain_units(ieee39):
    hz = DlaaSpec((4,), (1.0,)).gain_vector(ieee39)
    rad = DlaaSpec((4,), (1.0,), unit="pu/(rad/s)").gain_vector(ieee39)
    assert rad.sum() == pytest.approx(2 * math.pi * hz.sum())


@given(st.floats(-50.0, 50.0), st.floats(0.01, 500.0), st.floats(0.0, 1.0))
def test_saturation_bounds(dw, k, kick):
    from laacosim.grid import load_case

    case = load_case("ieee39")
    spec = DlaaSpec((4, 20, 8), (k, k, k), kick=kick)
    eps = dlaa_inject(spec, dw, 31.0, case)
    cap = attack_capacity(case)
    assert np.all(np.abs(eps) <= cap + 1e-12)


def test_zero_gain_closed_loop_matches_baseline(three_bus):
    red = reduced_model(three_bus)
    s0 = SimState.initial(red, three_bus.nominal_load)
    s0.load = s0.load + 0.3
    w = sensing_weights(three_bus, "coi")
    a, b = s0.copy(), s0.copy()
    for _ in range(500):
        a = step(a, red, dt=0.01)
        b = step(b, red, inputs=lambda x: b.load_dev - 0.0 * (w @ x[red.omega_slice]), dt=0.01)
    assert np.array_equal(a.x, b.x)


def test_slaa_leaves_spectrum_unchanged(ieee39):
    # a static attack only enters through the input channel
    red = reduced_model(ieee39.with_generators(KI=0.0))
    assert np.array_equal(dlaa_matrix(red, np.zeros(ieee39.n_load)), red.A)


def test_matrix_and_agent_agree(three_bus):
    case = three_bus
    red = reduced_model(case)
    k = np.array([1.5])
    w = sensing_weights(case, "coi")
    A_star = dlaa_matrix(red, k, w)
    x0 = np.array([0.02, -0.01, 0.05, -0.03])
    _, X = simulate_reduced(red, x0, lambda t: np.zeros(1), 10.0, dt=0.01, A=A_star)
    s = SimState.initial(red, case.nominal_load)
    s.set_x(x0)
    for _ in range(1000):
        s = step(s, red, inputs=lambda x: -k * (w @ x[red.omega_slice]), dt=0.01)
    assert np.abs(s.x - X[-1]).max() <= 1e-6


def test_critical_gain_baseline_stable(ieee39):
    red = reduced_model(ieee39.with_generators(KI=0.0))
    rep = predict_critical_gain(red, ieee39, (4, 20))
    assert rep.table[0][0] == 0.0 and rep.table[0][1] <= 1e-6


def test_critical_gain_ieee39_frozen(ieee39):
    case = ieee39.with_generators(KI=0.0)
    rep = predict_critical_gain(reduced_model(case), case, (4, 20), k_max=10.0)
    assert rep.k_crit == pytest.approx(1.9508, abs=1e-3)
    assert rep.tol == 1e-3
    assert len(rep.to_dict()["table"]) == 101


def test_critical_gain_two_bus_analytic(two_bus):
    rep = predict_critical_gain(reduced_model(two_bus), two_bus, (2,), k_max=5.0)
    gen = two_bus.generators[0]
    assert rep.k_crit == pytest.approx(gen.D + gen.KP, abs=1e-3)
    assert rep.k_crit >= gen.D + gen.KP


def test_critical_gain_stable_throughout(two_bus):
    rep = predict_critical_gain(reduced_model(two_bus), two_bus, (2,), k_max=1.0)
    assert rep.stable_throughout and rep.k_crit is None


def test_sensing_weights(ieee39):
    w = sensing_weights(ieee39, "coi")
    assert w.sum() == pytest.approx(1.0)
    one = sensing_weights(ieee39, 30)
    assert one[ieee39.gen_index[30]] == 1.0 and one.sum() == 1.0
    with pytest.raises(ConfigError):
        sensing_weights(ieee39, 4)
    assert sensing_matrix(np.array([1.0, 2.0]), np.array([0.5, 0.5])).tolist() == [[0.5, 0.5], [1.0, 1.0]]
