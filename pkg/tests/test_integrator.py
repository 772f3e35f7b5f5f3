"""Stepper and run-loop tests: exactness, convergence order, invariants."""

import numpy as np
import pytest

from lansfrac import (
    InitialData,
    Params,
    Regime,
    SchemeKind,
    SimConfig,
    StepScheme,
    dealias,
    galerkin_truncate,
    make_grid,
    make_initial,
    norm_DAr,
    phi_functions,
    run,
    run_pair_uniqueness,
    semigroup_apply,
    step,
    suggest_dt,
)
from lansfrac.errors import DivergedError
from lansfrac.integrator import _times_for
from lansfrac.spectral import stokes_multiplier

from conftest import random_field, rel_err


def config(grid, p, dt=1e-3, t_end=1.0, init=None, **kw):
    return SimConfig(
        grid=grid,
        params=p,
        scheme=StepScheme(kind=kw.pop("kind", SchemeKind.ETD2RK), dt=dt),
        t_end=t_end,
        initial=init or InitialData(kind="shear"),
        **kw,
    )


# ----------------------------------------------------------- phi functions

def test_phi_at_zero():
    p1, p2 = phi_functions(0.0)
    assert p1 == 1.0 and p2 == 0.5


def test_phi_at_minus_one():
    p1, p2 = phi_functions(-1.0)
    assert abs(p1 - (1 - np.exp(-1))) < 1e-15
    assert abs(p2 - np.exp(-1)) < 1e-15  # (e^-1 - 1 + 1)/1


def test_phi_branch_continuity():
    # compare the two branches straddling the switch at |z| = 1e-4
    for sign in (+1.0, -1.0):
        lo = sign * 1e-4 * (1 - 1e-9)   # series branch
        hi = sign * 1e-4 * (1 + 1e-9)   # closed-form branch
        p1l, p2l = phi_functions(lo)
        p1h, p2h = phi_functions(hi)
        assert abs(p1l - p1h) < 1e-12
        assert abs(p2l - p2h) < 1e-12


def test_phi_array_input():
    z = np.array([-2.0, -1e-5, 0.0])
    p1, p2 = phi_functions(z)
    assert p1.shape == z.shape
    assert abs(p1[0] - (1 - np.exp(-2)) / 2) < 1e-14


# ------------------------------------------------------- galerkin truncation

def test_galerkin_identity_above_nyquist(grid2):
    u = random_field(grid2, seed=1, band=grid2.N // 2 - 1)
    out = galerkin_truncate(u, grid2.N // 2)
    assert np.array_equal(out.coeffs, u.coeffs)


def test_galerkin_taylor_green_unchanged(grid2):
    tg = make_initial(InitialData(kind="taylor-green"), grid2)
    out = galerkin_truncate(tg, 1)
    assert rel_err(out.coeffs, tg.coeffs) < 1e-15


def test_galerkin_commutes_with_semigroup(grid2, params):
    u = random_field(grid2, seed=2)
    a = galerkin_truncate(semigroup_apply(u, 0.4, params), 5)
    b = semigroup_apply(galerkin_truncate(u, 5), 0.4, params)
    assert rel_err(a.coeffs, b.coeffs) < 1e-14


def test_galerkin_rejects_bad_cut(grid2):
    u = random_field(grid2, seed=3)
    with pytest.raises(ValueError):
        galerkin_truncate(u, 0)


def test_galerkin_projection_order_irrelevant_for_band_limited(grid2, params):
    # open question: truncating after the full rhs equals projecting the
    # nonlinearity before the Stokes projector, since the cutoff commutes
    # with every multiplier; band-limited data makes both sides exact
    from lansfrac.operators import rhs_f
    from lansfrac.spectral import leray_project

    u = dealias(random_field(grid2, seed=4, band=5))
    cut = 7
    after = galerkin_truncate(rhs_f(u, u, params).f, cut)
    ev = rhs_f(u, u, params, keep_parts=True)
    before = -(leray_project(galerkin_truncate(ev.advection + ev.stress, cut)))
    assert rel_err(after.coeffs, before.coeffs) < 1e-13


# ------------------------------------------------------------------- step

def test_step_shear_exact_any_dt(grid2):
    p = Params(alpha=0.5, nu=1.3, s=0.75, regime=Regime.GLOBAL_RANGE)
    u = make_initial(InitialData(kind="shear"), grid2)
    for dt in (0.3, 0.05):
        out = step(u, p, StepScheme(dt=dt))
        assert rel_err(out.coeffs, np.exp(-p.nu * dt) * u.coeffs) < 1e-13


def test_step_dt_zero_identity(grid2, params):
    u = random_field(grid2, seed=5)
    out = step(u, params, StepScheme(dt=1.0), dt=0.0)
    assert out is u


def _self_convergence_order(grid, kind):
    # Richardson: order = log2(|u_dt - u_dt/2| / |u_dt/2 - u_dt/4|). Data must
    # have an active nonlinearity: 2D Taylor-Green is f-free (see the exactness
    # test below), so a band-limited random field is used instead.
    p = Params(alpha=0.5, nu=0.05, s=0.75, regime=Regime.GLOBAL_RANGE)
    u0 = dealias(random_field(grid, seed=20, amplitude=2.0, decay=2.0, band=8))
    finals = []
    for dt in (2e-2, 1e-2, 5e-3):
        traj = run(config(grid, p, dt=dt, t_end=0.4, kind=kind), initial_field=u0)
        finals.append(traj.snapshots[-1])
    e1 = norm_DAr(finals[0] - finals[1], 1.0)
    e2 = norm_DAr(finals[1] - finals[2], 1.0)
    return np.log2(e1 / e2)


def test_etd2rk_self_convergence_order(grid2):
    order = _self_convergence_order(grid2, SchemeKind.ETD2RK)
    assert 1.7 < order < 2.3


def test_exp_euler_self_convergence_order(grid2):
    order = _self_convergence_order(grid2, SchemeKind.EXP_EULER)
    assert 0.7 < order < 1.3


def test_etd2rk_convergence_order_3d_taylor_green(grid3):
    # in 3D the Taylor-Green nonlinearity survives the projection
    p = Params(alpha=0.5, nu=0.05, s=0.75, regime=Regime.GLOBAL_RANGE)
    finals = []
    for dt in (2e-2, 1e-2, 5e-3):
        traj = run(config(grid3, p, dt=dt, t_end=0.2, init=InitialData(kind="taylor-green")))
        finals.append(traj.snapshots[-1])
    order = np.log2(
        norm_DAr(finals[0] - finals[1], 1.0) / norm_DAr(finals[1] - finals[2], 1.0)
    )
    assert 1.7 < order < 2.3


def test_run_taylor_green_2d_exact_solution(grid2):
    # advection and averaged stress of 2D TG are both pure gradients, so TG
    # decays exactly by the semigroup on the |k|^2 = 2 shell
    p = Params(alpha=0.5, nu=0.4, s=0.75, regime=Regime.GLOBAL_RANGE)
    tg = make_initial(InitialData(kind="taylor-green"), grid2)
    traj = run(config(grid2, p, dt=5e-3, t_end=0.5, init=InitialData(kind="taylor-green")))
    expect = np.exp(-p.nu * 0.5 * 2.0**p.s)
    err = norm_DAr(traj.snapshots[-1] - expect * tg, 1.0) / norm_DAr(tg, 1.0)
    assert err < 1e-10


# -------------------------------------------------------------- suggest_dt

def test_suggest_dt_zero_field(grid2, params):
    from lansfrac.spectral import zero_field

    assert suggest_dt(zero_field(grid2), grid2, params, 0.5) == 1.0


def test_suggest_dt_shear_formula(params):
    g = make_grid(2, 64)
    u = make_initial(InitialData(kind="shear"), g)
    dt = suggest_dt(u, g, params, 0.8)
    assert abs(dt - 0.8 * (2 * np.pi / 64)) < 1e-12


def test_suggest_dt_amplitude_scaling(grid2, params):
    u = make_initial(InitialData(kind="shear"), grid2)
    d1 = suggest_dt(u, grid2, params, 1.0)
    d2 = suggest_dt(2.0 * u, grid2, params, 1.0)
    assert abs(d1 - 2 * d2) < 1e-12


# ------------------------------------------------------------ initial data

def test_initial_data_validation():
    with pytest.raises(ValueError):
        InitialData(kind="vortex")
    with pytest.raises(ValueError):
        InitialData(kind="snapshot")


def test_taylor_green_flags(grid2, grid3):
    for g in (grid2, grid3):
        tg = make_initial(InitialData(kind="taylor-green"), g)
        assert tg.hermitian and tg.solenoidal and tg.zero_mean


def test_random_spectrum_properties(grid2_64):
    init = InitialData(kind="random-spectrum", amplitude=0.3, seed=9, decay_exponent=3.0, band=12)
    u = make_initial(init, grid2_64)
    assert u.hermitian and u.solenoidal and u.zero_mean
    assert abs(norm_DAr(u, 1.0) - 0.3) < 1e-12
    # per-mode vector modulus follows |k|^{-p} inside the band, zero outside
    mod = np.sqrt(np.sum(np.abs(u.coeffs) ** 2, axis=0))
    kmax = np.max(np.abs(grid2_64.k), axis=0)
    inside = (kmax <= 12) & (grid2_64.k2 > 0)
    expect = stokes_multiplier(grid2_64.k2, -1.5)
    scale = mod[1, 0] / expect[1, 0]
    assert np.max(np.abs(mod[inside] - scale * expect[inside])) < 1e-12 * scale
    assert np.max(mod[~inside]) == 0.0


def test_random_spectrum_seeded_determinism(grid2):
    a = make_initial(InitialData(kind="random-spectrum", seed=4), grid2)
    b = make_initial(InitialData(kind="random-spectrum", seed=4), grid2)
    c = make_initial(InitialData(kind="random-spectrum", seed=5), grid2)
    assert np.array_equal(a.coeffs, b.coeffs)
    assert not np.array_equal(a.coeffs, c.coeffs)


# -------------------------------------------------------------------- run

def test_run_shear_exact_decay(grid2):
    p = Params(alpha=0.5, nu=1.0, s=0.5, regime=Regime.GLOBAL_RANGE)
    traj = run(config(grid2, p, dt=1e-3, t_end=1.0))
    u0, uT = traj.snapshots[0], traj.snapshots[-1]
    err = norm_DAr(uT - np.exp(-1.0) * u0, 1.0) / norm_DAr(u0, 1.0)
    assert err < 1e-10
    assert traj.times[-1] == 1.0


def test_run_t_end_zero(grid2, params):
    traj = run(config(grid2, params, t_end=0.0))
    assert len(traj.snapshots) == 1 and len(traj.diag) == 1


def test_run_linear_exactness_per_mode(grid2):
    # with the nonlinearity disabled every mode decays by exp(-nu t |k|^{2s})
    # regardless of the dt partition
    p = Params(alpha=0.5, nu=0.8, s=0.6, regime=Regime.GLOBAL_RANGE)
    u0 = random_field(grid2, seed=11)
    for dt in (0.7, 0.13, 0.01):
        traj = run(config(grid2, p, dt=dt, t_end=1.0, linear_only=True), initial_field=u0)
        expect = u0.coeffs * np.exp(-p.nu * 1.0 * stokes_multiplier(grid2.k2, p.s))
        assert rel_err(traj.snapshots[-1].coeffs, expect) < 1e-12


def test_run_taylor_green_bounded(grid2):
    p = Params(alpha=0.5, nu=0.5, s=0.5, regime=Regime.GLOBAL_RANGE)
    traj = run(config(grid2, p, dt=2e-3, t_end=0.5, init=InitialData(kind="taylor-green")))
    ndas = [r.nDA for r in traj.diag]
    assert max(ndas) <= ndas[0] * (1 + 1e-8)  # decaying flow
    # hermitian/solenoidal/zero-mean preserved (flags measured on access)
    last = traj.snapshots[-1]
    assert last.hermitian and last.solenoidal and last.zero_mean


def test_run_snapshot_cadence(grid2, params):
    traj = run(config(grid2, params, dt=0.1, t_end=1.0, snapshot_every=3))
    assert np.allclose(traj.times, [0.0, 0.3, 0.6, 0.9, 1.0])
    assert len(traj.snapshots) == 5
    assert len(traj.diag) == 11


def test_run_galerkin_consistency_band_limited(grid2):
    # data supported inside the dealias cutoff: truncating at the band is a
    # no-op because products are dealiased below it anyway
    p = Params(alpha=0.5, nu=0.5, s=0.5, regime=Regime.GLOBAL_RANGE)
    u0 = dealias(random_field(grid2, seed=12, band=grid2.band_limit))
    plain = run(config(grid2, p, dt=5e-3, t_end=0.1), initial_field=u0)
    cut = run(
        config(grid2, p, dt=5e-3, t_end=0.1, galerkin_N=grid2.band_limit),
        initial_field=u0,
    )
    assert rel_err(cut.snapshots[-1].coeffs, plain.snapshots[-1].coeffs) < 1e-12


def test_run_divergence_detection(grid2):
    p = Params(alpha=0.1, nu=1e-6, s=0.5, regime=Regime.GLOBAL_RANGE)
    init = InitialData(kind="random-spectrum", amplitude=1e5, seed=13)
    with pytest.raises(DivergedError):
        run(config(grid2, p, dt=0.5, t_end=50.0, init=init))


def test_times_for_partial_final_step():
    t = _times_for(1.0, 0.3)
    assert np.allclose(t, [0.0, 0.3, 0.6, 0.9, 1.0])
    t2 = _times_for(1.0, 1e-3)
    assert len(t2) == 1001 and t2[-1] == 1.0


# ------------------------------------------------------------- v-form runs

def test_run_v_form_matches_u_form(grid2):
    from lansfrac import u_from_v

    p = Params(alpha=0.5, nu=0.2, s=0.75, regime=Regime.GLOBAL_RANGE)
    init = InitialData(kind="random-spectrum", amplitude=0.05, seed=14)
    ut = run(config(grid2, p, dt=5e-3, t_end=0.5, init=init))
    vt = run(config(grid2, p, dt=5e-3, t_end=0.5, init=init), form="v")
    mapped = u_from_v(vt.snapshots[-1], p.alpha)
    err = norm_DAr(mapped - ut.snapshots[-1], 1.0) / norm_DAr(ut.snapshots[-1], 1.0)
    assert err < 1e-6


# ------------------------------------------------------------- uniqueness

def test_uniqueness_zero_perturbation_identical(grid2, params):
    rep = run_pair_uniqueness(config(grid2, params, dt=0.05, t_end=0.2), 0.0)
    assert rep.identical
    assert rep.max_growth == 1.0


def test_uniqueness_shear_perturbation_decays(grid2):
    p = Params(alpha=0.5, nu=1.0, s=0.5, regime=Regime.GLOBAL_RANGE)
    rep = run_pair_uniqueness(config(grid2, p, dt=2e-3, t_end=0.3), 1e-8)
    assert rep.max_growth <= 1.0 + 1e-6
    assert np.isfinite(rep.c_fit)


def test_uniqueness_growth_stable_under_dt_halving(grid2):
    p = Params(alpha=0.5, nu=0.3, s=0.5, regime=Regime.GLOBAL_RANGE)
    init = InitialData(kind="taylor-green", amplitude=0.5)
    g1 = run_pair_uniqueness(config(grid2, p, dt=4e-3, t_end=0.3, init=init), 1e-6).final_growth
    g2 = run_pair_uniqueness(config(grid2, p, dt=2e-3, t_end=0.3, init=init), 1e-6).final_growth
    assert abs(g1 - g2) <= 0.05 * max(g1, g2)


def test_step_overflow_raises_diverged(grid2, params):
    huge = 1e200 * random_field(grid2, seed=99)
    with pytest.raises(DivergedError):
        step(huge, params, StepScheme(dt=1.0))
