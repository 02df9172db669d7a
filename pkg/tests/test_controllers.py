import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from laacosim.attacks import SlaaSpec
from laacosim.controllers import (
    ACC_LIMIT,
    AreaControllerState,
    ControllerConfig,
    Measurement,
    apply_setpoints,
    compute_ace,
    default_bias,
    lfc_step,
    receive,
    tick,
)
from laacosim.cosim import Scenario, run
from laacosim.errors import ConfigError, ParameterError
from laacosim.grid import SimState, reduced_model
from laacosim.netem import NetProfile


def ctrl_for(alpha, ks=0.1, limit=ACC_LIMIT):
    alpha = np.asarray(alpha, float)
    return AreaControllerState(1, list(range(len(alpha))), alpha, ks, beta=20.0, acc_limit=limit)


def meas(df, tie=0.0, t=0.0, seq=0):
    return Measurement("1", df, tie, t, seq)


@pytest.mark.parametrize("df, tie, beta, ace", [
    (0.0, 0.0, 20.0, 0.0),
    (-0.1, 0.0, 20.0, -2.0),
    (-0.05, 0.5, 20.0, -0.5),
])
def test_compute_ace(df, tie, beta, ace):
    assert compute_ace(meas(df, tie), beta) == pytest.approx(ace, abs=1e-15)


def test_zero_ace_keeps_setpoints_zero():
    c = ctrl_for([0.6, 0.4])
    for _ in range(1000):
        out = lfc_step(c, 0.0, 0.1)
    assert not out.any()


def test_constant_ace_integrates():
    c = ctrl_for([0.6, 0.4], ks=0.1)
    for _ in range(100):
        out = lfc_step(c, 1.0, 0.1)
    np.testing.assert_allclose(out, [-0.6, -0.4], rtol=1e-12)


def test_anti_windup_clamp_and_event():
    c = ctrl_for([1.0], ks=1.0, limit=10.0)
    events = []
    for _ in range(50):
        lfc_step(c, 1.0, 1.0, events)
    assert c.acc == 10.0
    assert events and all(e["kind"] == "clamp" for e in events)
    lfc_step(c, -100.0, 1.0, events)
    assert c.acc == -10.0


def test_lfc_step_rejects_bad_dt():
    with pytest.raises(ParameterError):
        lfc_step(ctrl_for([1.0]), 1.0, 0.0)


@given(st.lists(st.floats(0.01, 10.0), min_size=2, max_size=6),
       st.lists(st.floats(-5.0, 5.0), min_size=1, max_size=40))
def test_dispatch_totals_area_command(raw_alpha, aces):
    alpha = np.array(raw_alpha) / sum(raw_alpha)
    c = ctrl_for(alpha, ks=0.3)
    for ace in aces:
        out = lfc_step(c, ace, 0.1)
    assert out.sum() == pytest.approx(-0.3 * c.acc, abs=1e-9)


@given(st.lists(st.floats(0.01, 2.0), min_size=1, max_size=50))
def test_zero_ace_fixed_point(dts):
    c = ctrl_for([0.5, 0.5])
    t = 0.0
    for i, dt in enumerate(dts):
        t += dt
        receive(c, meas(0.0, 0.0, t=t, seq=i))
        out = tick(c, t, [])
        if out is not None:
            assert not out.any()
    assert c.acc == 0.0


def test_receive_discards_stale_sequence():
    c = ctrl_for([1.0])
    assert receive(c, meas(-0.1, seq=5))
    assert not receive(c, meas(-0.2, seq=3))
    assert c.pending.freq_dev == -0.1


def test_missing_measurements_hold_output_and_flag_stale():
    c = ctrl_for([1.0], ks=1.0)
    events = []
    receive(c, meas(-0.1, t=0.0, seq=0))
    first = tick(c, 0.0, events)
    assert first is not None
    for k in range(1, 80):
        assert tick(c, 0.1 * k, events) is None
    assert np.array_equal(c.output, first)
    assert [e["kind"] for e in events] == ["stale"]


def test_old_measurement_is_not_used():
    c = ctrl_for([1.0])
    events = []
    receive(c, meas(-0.1, t=0.0, seq=0))
    assert tick(c, 6.0, events) is None
    assert events[0]["kind"] == "stale"


def test_apply_setpoints(three_bus):
    red = reduced_model(three_bus)
    s = SimState.initial(red, three_bus.nominal_load)
    same = apply_setpoints(s, {}, three_bus)
    assert np.array_equal(same.x, s.x) and np.array_equal(same.setpoints, s.setpoints)
    moved = apply_setpoints(s, {0: 0.25}, three_bus)
    assert moved.setpoints.tolist() == [0.25, 0.0]
    with pytest.raises(ParameterError):
        apply_setpoints(s, {0: math.nan}, three_bus)


def test_non_participant_rejected(three_bus):
    case = three_bus.with_generators(alpha=[1.0, 0.0])
    red = reduced_model(case)
    with pytest.raises(ParameterError, match="does not participate"):
        apply_setpoints(SimState.initial(red, case.nominal_load), {1: 0.1}, case)


def test_only_participants_dispatched(ieee39):
    for area in ieee39.area_ids:
        c = AreaControllerState.for_area(ieee39, area, ControllerConfig())
        assert all(ieee39.generators[g].alpha > 0 for g in c.gens)
        assert c.alpha.sum() == pytest.approx(1.0)


def test_default_bias(two_bus):
    assert default_bias(two_bus, 1) == 2.0


def test_config_validation():
    assert ControllerConfig.from_dict({"gain_Ks": 0.5}).gain_Ks == 0.5
    with pytest.raises(ConfigError):
        ControllerConfig.from_dict({"gain": 1.0})
    with pytest.raises(ConfigError):
        ControllerConfig.from_dict({"period_ms": 0})


def _two_bus_run(case, lfc, links=None, duration=300.0):
    sc = Scenario("step", duration=duration, attack=SlaaSpec((2,), (0.2,)), lfc=lfc,
                  **({"links": links} if links else {}))
    return run(sc, case=case)


def test_closed_loop_restores_frequency(two_bus):
    on = _two_bus_run(two_bus, ControllerConfig(enabled=True))
    off = _two_bus_run(two_bus, ControllerConfig(enabled=False))
    assert abs(on.f_coi[-1] - 60.0) <= 1e-4
    gen = two_bus.generators[0]
    droop = -0.2 * two_bus.nominal_load[0] / (gen.D + gen.KP)
    assert off.f_coi[-1] - 60.0 == pytest.approx(droop, abs=1e-6)


def test_total_loss_freezes_controller(two_bus):
    dead = {"plant_to_ctrl": NetProfile(loss=1.0), "ctrl_to_plant": NetProfile(),
            "plant_to_attacker": NetProfile()}
    r = _two_bus_run(two_bus, ControllerConfig(enabled=True), links=dead, duration=60.0)
    assert not r.lfc.any()
    assert any(e["kind"] == "stale" for e in r.events)
