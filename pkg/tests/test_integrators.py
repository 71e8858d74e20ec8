import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from consbug.integrators import (
    PRESETS,
    VARIANTS,
    IntegratorConfig,
    SimulationDiverged,
    conservative_s_step,
    dense_reference,
    preset,
    run,
    step,
)
from consbug.linalg import inner
from consbug.lowrank import LowRankState, TruncationPolicy, evaluate
from consbug.model import SeparableLinearModel, invariant_density
from consbug.rte import SlabRteModel, planesource_init
from consbug.scenarios import SCENARIOS, build_model, initial_state, time_grid
from consbug.timestep import rk_step, tableau
from consbug.vlasov import VlasovModel, bump_on_tail_init

from conftest import ortho_error, random_frame, random_state


class ZeroModel(SeparableLinearModel):
    def __init__(self, n_x, n_v):
        self.n_x, self.n_v = n_x, n_v
        self.velocity_weights = np.ones(n_v)
        self.conserved_basis = np.eye(n_v)[:, :1]
        self.cell_volume = 1.0
        self.terms = [(None, np.zeros((n_v, n_v)))]


def _cfg(variant, kl="euler", s="euler", conservative=True, theta=0.0, **kw):
    return IntegratorConfig(variant, kl, s, conservative, TruncationPolicy(theta, **kw))


def _phi(model, state):
    return invariant_density(model, state)


@pytest.mark.parametrize("variant", VARIANTS)
@pytest.mark.parametrize("conservative", [True, False])
def test_zero_rhs_is_identity(rng, variant, conservative):
    m = ZeroModel(10, 7)
    s = random_state(rng, 10, 7, 3, lead=m.conserved_basis, decay=0.5)
    out = step(m, s, 0.1, _cfg(variant, "rk4", "rk4", conservative))
    np.testing.assert_allclose(evaluate(out), evaluate(s), atol=1e-13)


def _full_rank_problem(rng, n=8):
    m = SlabRteModel(n, n, domain=(0.0, 1.0))
    X = random_frame(rng, n, n)
    V = np.eye(n)
    S = rng.standard_normal((n, n))
    return m, LowRankState(X, S, V)


@pytest.mark.parametrize("tab", ["euler", "heun", "rk4"])
@pytest.mark.parametrize("conservative", [True, False])
def test_full_rank_matches_dense_step(rng, tab, conservative):
    m, s = _full_rank_problem(rng)
    dt = 0.5 * m.cfl_dt(0.9)
    Y0 = evaluate(s)
    Y1, _ = rk_step(m.dense_rhs, Y0, dt, tab)
    out = step(m, s, dt, _cfg("aug_bug", tab, tab, conservative, min_rank=0))
    assert np.linalg.norm(evaluate(out) - Y1) <= 1e-10 * np.linalg.norm(Y1)


@pytest.mark.parametrize(
    "name, tab",
    [
        ("cons_midp_bug_rk4", "rk4"),
        ("cons_midp_bug_heun", "rk4"),
        ("cons_midp_bug_euler", "midpoint"),
        ("cons_parallel2_rk4", "rk4"),
    ],
)
def test_full_rank_higher_order_variants_match_dense(rng, name, tab):
    m, s = _full_rank_problem(rng)
    dt = 0.5 * m.cfl_dt(0.9)
    Y1, _ = rk_step(m.dense_rhs, evaluate(s), dt, tab)
    out = step(m, s, dt, preset(name, policy=TruncationPolicy(0.0, min_rank=0)))
    assert np.linalg.norm(evaluate(out) - Y1) <= 1e-10 * np.linalg.norm(Y1)


def _rte_local_setup(rng):
    m = SlabRteModel(16, 16, domain=(0.0, 1.0))
    s = random_state(rng, 16, 16, 3, lead=m.conserved_basis, decay=0.5)
    return m, s


def _vlasov_local_setup(rng):
    m = VlasovModel(16, 16, enforce_c2=False)
    s = random_state(rng, 16, 16, 4, m.velocity_weights, lead=m.conserved_basis, decay=0.5)
    return m, s


@pytest.mark.parametrize("setup", [_rte_local_setup, _vlasov_local_setup], ids=["rte", "vlasov"])
def test_conservative_s_step_local_law(rng, setup):
    m, s = setup(rng)
    w, U = m.velocity_weights, m.conserved_basis
    dt = 0.01
    Xhat = random_frame(rng, 16, 7, lead=s.X)
    Vhat = random_frame(rng, 16, 7, w, lead=s.V)
    Shat0 = Xhat.T @ s.X @ s.S @ inner(s.V, Vhat, w)
    rec = {}
    Xbar, Sbar1 = conservative_s_step(m, Xhat, Vhat, Shat0, dt, "rk4", record=rec)
    phi0 = Xhat @ Shat0 @ inner(Vhat, U, w)
    phi1 = Xbar @ Sbar1 @ inner(Vhat, U, w)
    b = tableau("rk4").b
    flux = sum(
        bi * m.dense_rhs(Xhat @ S @ Vhat.T) @ (w[:, None] * U) for bi, S in zip(b, rec["S_stages"])
    )
    res = phi1 - phi0 - dt * flux
    assert np.max(np.abs(res)) <= 1e-12 * np.max(np.abs(phi0))
    assert ortho_error(Xbar) <= 1e-13


@pytest.mark.parametrize("setup", [_rte_local_setup, _vlasov_local_setup], ids=["rte", "vlasov"])
def test_parallel2_local_law(rng, setup):
    m, s = setup(rng)
    w, U = m.velocity_weights, m.conserved_basis
    dt = 0.01
    rec = {}
    out = step(m, s, dt, preset("cons_parallel2_rk4", policy=TruncationPolicy(0.05)), record=rec)
    Vh0 = rec["Vh0"]
    b = tableau("rk4").b
    flux = sum(bi * m.dense_rhs(K @ Vh0.T) @ (w[:, None] * U) for bi, K in zip(b, rec["K_stages"]))
    phi0 = _phi(m, s)
    res = _phi(m, out) - phi0 - dt * flux
    assert np.max(np.abs(res)) <= 1e-12 * np.max(np.abs(phi0))


def test_parallel2_block_reconstruction(rng):
    m = SlabRteModel(10, 10, domain=(0.0, 1.0))
    s = random_state(rng, 10, 10, 2, lead=m.conserved_basis)
    rec = {}
    step(m, s, 0.01, preset("cons_parallel2_rk4"), record=rec)
    Xhat, Vhat, Shat = rec["Xhat"], rec["Vhat"], rec["Shat1"]
    assert ortho_error(Xhat) <= 1e-13 and ortho_error(Vhat) <= 1e-13
    # K1 is recovered in full, L1 through its part orthogonal to the old frame
    Y = Xhat @ Shat @ Vhat.T
    np.testing.assert_allclose(Y @ rec["Vh0"], rec["K1"], atol=1e-12)
    Xh0, Vt = rec["Xh0"], Vhat[:, rec["Vh0"].shape[1] :]
    np.testing.assert_allclose(Xh0.T @ Y @ Vt, rec["L1"].T @ Vt, atol=1e-12)
    Xt = Xhat[:, Xh0.shape[1] :]
    np.testing.assert_allclose(Xt.T @ Y @ Vt, 0.0, atol=1e-13)


@pytest.mark.parametrize("name", [n for n in PRESETS if n != "noncons_bug"])
def test_global_mass_conservation(name):
    m = SlabRteModel(64, 16)
    s = planesource_init(m)
    _, recs = run(m, s, m.cfl_dt(0.9), 500, preset(name))
    assert max(r.drift[0] for r in recs) <= 1e-11


def test_noncons_baseline_drifts():
    m = SlabRteModel(64, 16)
    s = planesource_init(m)
    _, recs = run(m, s, m.cfl_dt(0.9), 500, preset("noncons_bug"))
    assert max(r.drift[0] for r in recs) >= 1e-6


@given(seed=st.integers(0, 2**32 - 1), name=st.sampled_from(sorted(PRESETS)))
def test_rank_growth_bounded(seed, name):
    rng = np.random.default_rng(seed)
    m = SlabRteModel(24, 12, domain=(0.0, 1.0))
    s = random_state(rng, 24, 12, 3, lead=m.conserved_basis, decay=0.3)
    cfg = preset(name, policy=TruncationPolicy(0.0))
    out = step(m, s, 0.5 * m.cfl_dt(0.9), cfg)
    m_cons = m.conserved_count if cfg.conservative else 0
    assert out.rank <= 4 * s.rank + 2 * m_cons
    assert ortho_error(out.X) <= 1e-12 and ortho_error(out.V) <= 1e-12
    capped = step(m, s, 0.01, preset(name, policy=TruncationPolicy(0.0, max_rank=4)))
    assert capped.rank <= 4 + m_cons


def test_conservative_rank_floor_keeps_basis():
    m = VlasovModel(16, 16)
    s = bump_on_tail_init(m, 4)
    out = step(m, s, 0.05, preset("cons_bug_euler", policy=TruncationPolicy(0.9)))
    np.testing.assert_array_equal(out.V[:, :2], m.conserved_basis)


def test_run_is_deterministic():
    m = SlabRteModel(40, 10)
    s = planesource_init(m)
    a, ra = run(m, s, m.cfl_dt(0.9), 30, preset("cons_midp_bug_heun"))
    b, rb = run(m, s, m.cfl_dt(0.9), 30, preset("cons_midp_bug_heun"))
    np.testing.assert_array_equal(evaluate(a), evaluate(b))
    assert [r.invariants for r in ra] == [r.invariants for r in rb]


def test_zero_steps_returns_initial_state():
    m = SlabRteModel(20, 6)
    s = planesource_init(m)
    out, recs = run(m, s, 0.1, 0, preset("cons_bug_euler"))
    assert out is s
    assert len(recs) == 1 and recs[0].drift == (0.0,)


def test_hooks_see_every_record():
    m = SlabRteModel(20, 6)
    seen = []
    run(m, planesource_init(m), m.cfl_dt(0.9), 5, preset("cons_bug_euler"), hooks=[lambda r, s: seen.append(r.step)])
    assert seen == list(range(6))


def test_divergence_is_reported():
    m = SlabRteModel(20, 6)
    s = planesource_init(m)
    with pytest.raises(SimulationDiverged) as err:
        run(m, s, 1e120, 50, preset("noncons_bug"))
    assert 1 <= err.value.step <= 50


def test_dense_reference_conserves_mass():
    m = SlabRteModel(30, 8)
    s = planesource_init(m)
    Y0 = evaluate(s)
    Y1 = dense_reference(m, Y0, m.cfl_dt(0.9), 20)
    assert abs(Y1[:, 0].sum() - Y0[:, 0].sum()) <= 1e-13 * abs(Y0[:, 0].sum())


def test_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig("bug")
    with pytest.raises(ValueError):
        IntegratorConfig("aug_bug", "rk45")
    with pytest.raises(ValueError):
        IntegratorConfig(stage_field="lagged")
    with pytest.raises(ValueError):
        preset("cons_everything")


def test_extra_augmentation_rule():
    assert not preset("cons_bug_euler").extra_augmentation
    assert preset("cons_bug_euler", s_tableau="rk4").extra_augmentation
    assert not preset("cons_midp_bug_euler").extra_augmentation
    assert preset("cons_midp_bug_heun").extra_augmentation
    assert not preset("cons_parallel2_rk4").extra_augmentation
    assert not preset("noncons_bug", s_tableau="rk4").extra_augmentation


def test_preset_table():
    assert len(PRESETS) == 7
    heun = PRESETS["cons_midp_bug_heun"]
    assert (heun.variant, heun.kl_tableau, heun.s_tableau) == ("midpoint_bug", "heun", "rk4")
    assert PRESETS["noncons_bug"].conservative is False
    assert sum(not c.conservative for c in PRESETS.values()) == 1


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_planesource_rank_trace_adapts(name):
    sc = SCENARIOS["planesource_small"]
    m = build_model(sc)
    dt, n = time_grid(sc, m, sc.t_end)
    cfg = preset(name)
    _, recs = run(m, initial_state(sc, m, sc.rank, cfg.conservative), dt, n, cfg)
    ranks = [r.rank for r in recs]
    assert len(set(ranks)) > 1
    assert all(b <= 2 * a for a, b in zip(ranks, ranks[1:]))
