import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from laacosim.errors import ConfigError, ExcitationError
from laacosim.grid import reduced_model
from laacosim.mdlaa.agent import (
    MdlaaAgent,
    OfflineRecord,
    PlantHandle,
    collect_offline,
    offline_signal_ok,
    run_mdlaa,
)
from laacosim.mdlaa.config import Excitation, MdlaaConfig, MdlaaSpec, pe_bound
from laacosim.mdlaa.hankel import HankelBlocks, check_persistent_excitation, hankel
from laacosim.mdlaa.qp import solve_attack_qp

from mdlaa_oracle import instance, projected_gradient_objective, reference_objective


# -- Hankel --------------------------------------------------------------------

def test_hankel_pattern():
    assert hankel([1, 2, 3, 4, 5], 2).tolist() == [[1, 2, 3, 4], [2, 3, 4, 5]]


def test_hankel_depth_one():
    assert hankel([3, 1, 4, 1], 1).tolist() == [[3, 1, 4, 1]]


def test_hankel_multichannel_layout():
    x = np.array([[1, 10], [2, 20], [3, 30], [4, 40]])
    H = hankel(x, 3)
    assert H.shape == (6, 2)
    assert H[:, 0].tolist() == [1, 10, 2, 20, 3, 30]
    assert H[:, 1].tolist() == [2, 20, 3, 30, 4, 40]


def test_hankel_depth_too_large():
    with pytest.raises(ConfigError):
        hankel([1, 2, 3], 4)


def test_constant_signal_not_exciting():
    chk = check_persistent_excitation(np.ones(10), 2)
    assert chk.rank == 1 and not chk.persistently_exciting


def test_affine_signal_exciting_order_two():
    chk = check_persistent_excitation([1, 2, 3, 4, 5], 2)
    assert chk.rank == 2 and chk.persistently_exciting


def test_multisine_exciting():
    exc = Excitation.multisine(np.array([1.0]), n_sines=6, sample_period=0.1, scale=0.5, seed=2)
    signal = exc.sample(np.arange(200) * 0.1)
    assert check_persistent_excitation(signal, 12).persistently_exciting
    assert not check_persistent_excitation(signal, 13).persistently_exciting


@settings(max_examples=30)
@given(st.integers(1, 3), st.integers(1, 2), st.integers(1, 4), st.integers(1, 4), st.integers(0, 2**31))
def test_hankel_window_identity(m, s, T_ini, N_ap, seed):
    rng = np.random.default_rng(seed)
    T = T_ini + N_ap + 12
    p, w = rng.normal(size=(T, m)), rng.normal(size=(T, s))
    b = HankelBlocks.from_data(p, w, T_ini, N_ap)
    assert b.columns == T - T_ini - N_ap + 1
    for j in range(b.columns):
        assert np.array_equal(b.P_p[:, j], p[j:j + T_ini].ravel())
        assert np.array_equal(b.P_f[:, j], p[j + T_ini:j + T_ini + N_ap].ravel())
        assert np.array_equal(b.W_p[:, j], w[j:j + T_ini].ravel())
        assert np.array_equal(b.W_f[:, j], w[j + T_ini:j + T_ini + N_ap].ravel())


# -- configuration -------------------------------------------------------------

def test_pe_bound():
    assert pe_bound(1, 5, 10, 2) == 33
    assert pe_bound(28, 4, 10, 20) == 29 * 34 - 1


def small_config(**kw):
    base = dict(T_a=120, T_ini=4, N_ap=10, N_ac=2, omega_r=-0.5, p_max=np.array([0.5]),
                Q=np.eye(2), R=1e-3 * np.eye(1), k_max=40, sample_period=0.1, n=4)
    base.update(kw)
    if "excitation" not in kw:
        base["excitation"] = Excitation.multisine(base["p_max"], 10, base["sample_period"], 0.5, seed=1)
    return MdlaaConfig(**base)


def test_short_record_rejected_with_inequality():
    with pytest.raises(ConfigError, match=r"T_a=20 violates T_a >= \(\|L\|\+1\)"):
        small_config(T_a=20)


@pytest.mark.parametrize("kw", [
    {"N_ac": 10}, {"N_ac": 0}, {"p_max": np.array([-1.0])}, {"Q": -np.eye(2)},
    {"R": np.array([[1.0, 2.0], [0.0, 1.0]])}, {"k_max": 0},
])
def test_config_invariants(kw):
    with pytest.raises(ConfigError):
        small_config(**kw)


def test_budget_capped_by_vulnerable_share(ieee39):
    targets = MdlaaSpec(budget=0.9).targets(ieee39)
    assert len(targets) == np.count_nonzero(ieee39.nominal_load)
    idx = [ieee39.load_index[b] for b in targets]
    load, vuln = ieee39.nominal_load[idx], ieee39.vulnerable_fraction[idx]
    for budget in (0.0, 0.3, 0.9):
        p = MdlaaSpec(budget=budget).p_max(ieee39)
        assert np.all(p <= vuln * load + 1e-12) and np.all(p <= budget * load + 1e-12)
        assert np.allclose(p, np.minimum(budget, vuln) * load)


def test_spec_round_trip():
    spec = MdlaaSpec(budget=0.6, omega_r=-2.0, T_ini=3, seed=9, sensors=(30, 31))
    assert MdlaaSpec.from_dict({k: v for k, v in spec.to_dict().items() if k != "type"}) == spec
    with pytest.raises(ConfigError):
        MdlaaSpec.from_dict({"horizon": 3})


# -- offline collection ----------------------------------------------------------

@pytest.fixture
def plant(three_bus):
    red = reduced_model(three_bus)
    return lambda: PlantHandle(red, targets=[0], sensors=[0, 1])


def test_zero_excitation_fails_pe(plant):
    cfg = small_config(excitation=Excitation.multisine(np.array([0.5]), 10, 0.1, 0.0, seed=1))
    assert not offline_signal_ok(cfg)
    with pytest.raises(ExcitationError, match="persistently exciting"):
        collect_offline(plant(), cfg)


def test_two_bus_collection(two_bus):
    red = reduced_model(two_bus.with_generators(KI=0.0))
    cfg = MdlaaConfig(T_a=pe_bound(1, 5, 10, 2), T_ini=5, N_ap=10, N_ac=1, omega_r=-0.5,
                      p_max=np.array([0.5]), Q=np.eye(1), R=np.eye(1), k_max=5, sample_period=0.1, n=2,
                      excitation=Excitation.multisine(np.array([0.5]), 9, 0.1, 0.5, seed=4))
    rec = collect_offline(PlantHandle(red, [0], [0]), cfg)
    assert rec.p.shape == (33, 1) and rec.omega.shape == (33, 1)
    assert check_persistent_excitation(rec.p, cfg.order).persistently_exciting
    assert np.abs(rec.omega).max() > 0


def test_record_csv_round_trip(plant, tmp_path):
    rec = collect_offline(plant(), small_config())
    path = tmp_path / "rec.csv"
    rec.save_csv(path)
    again = OfflineRecord.load_csv(path)
    assert np.array_equal(again.p, rec.p) and np.array_equal(again.omega, rec.omega)
    buf = io.StringIO()
    rec.write_csv(buf)
    assert buf.getvalue() == path.read_text()


# -- QP ------------------------------------------------------------------------

@pytest.mark.parametrize("seed", range(10))
def test_qp_matches_reference(seed):
    inst = instance(seed)
    sol = solve_attack_qp(inst["blocks"], inst["p_ini"], inst["w_ini"], inst["Q"], inst["R"],
                          inst["omega_r"], inst["p_max"])
    ref, _ = reference_objective(inst)
    pg, _ = projected_gradient_objective(inst)
    assert abs(sol.objective - ref) <= 1e-5
    assert abs(sol.objective - pg) <= 1e-5
    assert sol.eq_residual <= 1e-6
    assert sol.kkt_residual <= 1e-6
    assert np.abs(sol.p_f).max() <= inst["p_max"][0]


def test_zero_box_forces_zero_attack():
    inst = instance(3)
    sol = solve_attack_qp(inst["blocks"], inst["p_ini"], inst["w_ini"], inst["Q"], inst["R"], -5.0,
                          np.array([0.0]))
    assert not sol.p_f.any()


def test_zero_attack_optimum_at_free_response():
    inst = instance(5)
    zeros = np.zeros((2, 1))
    sol = solve_attack_qp(inst["blocks"], zeros, zeros, inst["Q"], 1e3 * np.eye(1), 0.0, np.array([1.0]))
    assert np.abs(sol.p_f).max() <= 1e-9
    assert sol.objective <= 1e-12


# -- receding horizon ----------------------------------------------------------------

def test_bookkeeping_uses_latest_true_samples(plant):
    cfg = small_config(k_max=30)
    agent = MdlaaAgent(cfg, record=collect_offline(plant(), cfg))
    seen = []
    solve = agent.qp.solve

    def spy(p_ini, w_ini, **kw):
        seen.append((len(agent.p_hist), p_ini.copy(), w_ini.copy()))
        return solve(p_ini, w_ini, **kw)

    agent.qp.solve = spy
    h = plant()
    while agent.phase != "done":
        h.apply(agent.on_sample(h.measure()))
        h.advance(cfg.sample_period)
    assert agent.applied_count == len(agent.solutions) * cfg.N_ac == cfg.k_max
    for n, p_ini, w_ini in seen:
        assert np.array_equal(p_ini, np.asarray(agent.p_hist[n - cfg.T_ini:n]))
        assert np.array_equal(w_ini, np.asarray(agent.w_hist[n - cfg.T_ini:n]))
    assert agent.status == "exhausted"


def test_zero_budget_is_baseline_and_fails(plant):
    rec = collect_offline(plant(), small_config())
    tr = run_mdlaa(plant(), small_config(p_max=np.array([0.0]), excitation=None), record=rec)
    assert not tr.p.any()
    assert np.abs(tr.omega).max() <= 1e-12
    assert tr.outcome == "failed"


def test_saturated_attack_settles_at_droop_offset(plant, three_bus):
    # a constant saturated injection settles at -p_max / sum(D + KP)
    cfg = small_config(k_max=200, omega_r=-2.0)
    tr = run_mdlaa(plant(), cfg, limit_hz=0.3)
    beta = sum(g.D + g.KP for g in three_bus.generators)
    assert tr.outcome == "failed"
    assert np.abs(tr.p).max() == pytest.approx(0.5)
    assert tr.omega[-1].mean() == pytest.approx(-0.5 / beta, abs=0.01)


def test_larger_budget_crosses_limit(plant):
    cfg = small_config(k_max=200, omega_r=-2.0, p_max=np.array([1.5]))
    tr = run_mdlaa(plant(), cfg, limit_hz=0.3)
    assert tr.outcome == "destabilized"
    assert tr.violation_time is not None


def test_loop_condition_variants(plant):
    cfg = small_config(k_max=4, omega_r=-0.01)
    agent = MdlaaAgent(cfg)
    agent.k_online = 0
    below = np.array([-1.0, -1.0])
    assert not agent._keep_going(below)
    literal = MdlaaAgent(small_config(k_max=4, omega_r=-0.01, literal_loop=True))
    literal.k_online = 10
    assert literal._keep_going(below)
    assert not literal._keep_going(np.zeros(2))


def test_runs_are_bit_identical(plant):
    cfg = small_config(k_max=20)
    a, b = run_mdlaa(plant(), cfg), run_mdlaa(plant(), cfg)
    assert np.array_equal(a.p, b.p) and np.array_equal(a.omega, b.omega)
