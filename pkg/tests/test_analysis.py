import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from accel_ode.analysis import (BoundContext, Quantity, bound_catalog, bounds_for, check_all_bounds, check_bound,
                                dominant_eigenvalue, envelope_series, fit_rate, get_bound, iteration_matrix,
                                max_spectral_radius, oracle_iterates, spectral_radius, theorem_step_size)
from accel_ode.integrators import SchemeSpec, iterations_to_reach, run
from accel_ode.objectives import balanced_start, make_problem, make_quadratic, make_scalar_quadratic
from accel_ode.phase_dynamics import OdeFamily

from oracles import mode_matrix

HALF_SQUARE = make_scalar_quadratic(1.0)
STRONG_FAMILIES = (OdeFamily.SC_HR, OdeFamily.HB_HR, OdeFamily.LOW_SC)


def _ctx(D=1.0, mu=0.01, L=1.0, s=1.0, F0=1.0, t0=0.0):
    return BoundContext(mu=mu, L=L, D=D, s=s, F0=F0, t0=t0)


def test_symplectic_fixed_envelope_at_start():
    assert get_bound("sc_hr.symplectic.fixed").evaluate(0, _ctx()) == pytest.approx(5.0)


def test_gd_min_grad_envelope_at_start():
    assert get_bound("gd.lyapunov.min_grad").evaluate(0, _ctx(s=1.0)) == pytest.approx(1.0)


def test_every_envelope_vanishes_with_zero_distance():
    ctx = _ctx(D=0.0, s=0.1, F0=0.0, t0=0.5)
    for b in bound_catalog():
        idx = 3.0 if b.continuous else 3
        assert b.evaluate(idx, ctx) == 0.0, b.id


def test_catalog_shape():
    ids = [b.id for b in bound_catalog()]
    assert len(ids) == len(set(ids))
    for fid in ("sc_hr.symplectic.fixed", "sc_hr.explicit.fixed", "sc_hr.implicit.fixed", "nag_sc.fixed",
                "heavy_ball.fixed", "c_hr_mod.symplectic.fgap", "c_hr_mod.symplectic.min_grad",
                "igd.lyapunov.min_grad", "low_sc.explicit.fixed", "flow.low_c.fgap", "flow.c_hr.fgap"):
        assert fid in ids
    continuous = [b.continuous for b in bound_catalog()]
    assert continuous == sorted(continuous)
    with pytest.raises(KeyError):
        get_bound("missing")
    assert {b.id for b in bounds_for(OdeFamily.C_HR)} == {"flow.c_hr.fgap", "flow.c_hr.min_grad"}
    assert bounds_for(OdeFamily.C_HR, "SYMPLECTIC") == []


def test_implicit_fixed_envelope_carries_no_lipschitz():
    b = get_bound("sc_hr.implicit.fixed")
    assert b.evaluate(0, _ctx(L=1.0)) == b.evaluate(0, _ctx(L=7.0)) == pytest.approx(13 / 4)


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-4, 0.5), st.floats(0.1, 10.0), st.floats(0.01, 1.0), st.integers(0, 3000))
def test_envelopes_positive_and_finite(mu_frac, D, s_frac, k):
    L = 1.0
    mu = mu_frac * L
    for b in bound_catalog():
        s = s_frac / L
        if b.fixed_step is not None:
            s = b.fixed_step(mu, L)
        ctx = _ctx(D=D, mu=mu, L=L, s=s, F0=0.5 * D, t0=1.5 * np.sqrt(s))
        idx = 2.0 + k / 10 if b.continuous else k + (1 if b.id.endswith("lyapunov.fgap") else 0)
        val = b.evaluate(idx, ctx)
        assert np.isfinite(val) and val >= 0, b.id


def test_symplectic_trace_passes_fixed_step_bound(quad):
    tr = run(SchemeSpec("SC_HR", "SYMPLECTIC", 4 / 9), make_problem(quad), 2000)
    rep = check_bound(get_bound("sc_hr.symplectic.fixed"), tr)
    assert rep.status == "pass" and rep.checked == 2001 and rep.max_ratio < 1


def test_nag_c_on_log_sum_exp_passes(lse):
    s = 1 / (3 * lse.lipschitz)
    tr = run(SchemeSpec("C_HR_MOD", "CLASSICAL", s), make_problem(lse), 5000)
    for bid in ("c_hr_mod.symplectic.fgap", "c_hr_mod.symplectic.min_grad"):
        assert check_bound(get_bound(bid), tr).status == "pass", bid


def test_start_at_minimizer_passes_with_zero_ratio(quad):
    tr = run(SchemeSpec("SC_HR", "SYMPLECTIC", 4 / 9), make_problem(quad, quad.minimizer.copy()), 50)
    rep = check_bound(get_bound("sc_hr.symplectic.fixed"), tr)
    assert rep.status == "pass" and rep.max_ratio == 0.0


def test_inapplicable_reasons(quad, lse):
    tr = run(SchemeSpec("SC_HR", "SYMPLECTIC", 0.3), make_problem(quad), 10)
    assert "4/(9L)" in check_bound(get_bound("sc_hr.symplectic.fixed"), tr).reason
    assert check_bound(get_bound("heavy_ball.fixed"), tr).status == "inapplicable"
    thin = run(SchemeSpec("C_HR_MOD", "SYMPLECTIC", 0.1 / lse.lipschitz), make_problem(lse), 20, record_every=5)
    assert "dense" in check_bound(get_bound("c_hr_mod.symplectic.min_grad"), thin).reason


def test_violation_is_reported(quad):
    tr = run(SchemeSpec("SC_HR", "SYMPLECTIC", 4 / 9), make_problem(quad), 100)
    tr.f_gap[40] = 1e9
    rep = check_bound(get_bound("sc_hr.symplectic.fixed"), tr)
    assert rep.status == "fail" and rep.first_violation == 40 and rep.first_violation_ratio > 1


def test_min_grad_uses_running_minimum():
    tr = run(SchemeSpec("GRAD_FLOW", "EXPLICIT", 1.0), make_problem(HALF_SQUARE, np.array([1.0])), 5)
    b = get_bound("gd.lyapunov.min_grad")
    assert b.quantity is Quantity.MIN_GRAD_SQ
    assert check_bound(b, tr).status == "pass"


def test_check_all_bounds_and_envelope_series(quad):
    tr = run(SchemeSpec("SC_HR", "IMPLICIT", 1.0), make_problem(quad), 30)
    reps = {r.bound_id: r for r in check_all_bounds(tr)}
    assert set(reps) == {"sc_hr.implicit.fixed", "sc_hr.implicit.general"}
    assert all(r.status == "pass" for r in reps.values())
    env = envelope_series(get_bound("sc_hr.symplectic.fixed"), tr)
    assert np.all(np.isnan(env))
    env = envelope_series(get_bound("sc_hr.implicit.fixed"), tr)
    assert env[0] == pytest.approx(13 / 4 * make_problem(quad).dist_sq)


def test_theorem_step_sizes():
    mu, L = 0.01, 2.0
    assert theorem_step_size("SC_HR", "SYMPLECTIC", mu, L) == pytest.approx(4 / (9 * L))
    assert theorem_step_size("SC_HR", "EXPLICIT", mu, L) == pytest.approx(mu / (100 * L * L))
    assert theorem_step_size("HB_HR", "EXPLICIT", mu, L) == pytest.approx(mu / (36 * L * L))
    assert theorem_step_size("LOW_SC", "EXPLICIT", mu, L) == pytest.approx(mu / (25 * L * L))
    assert theorem_step_size("C_HR_MOD", "CLASSICAL", 0.0, L) == pytest.approx(1 / (3 * L))
    with pytest.raises(KeyError):
        theorem_step_size("C_HR", "SYMPLECTIC", mu, L)
    with pytest.raises(ValueError):
        theorem_step_size("SC_HR", "EXPLICIT", 0.0, L)


# -- empirical rates -------------------------------------------------------------


def test_fit_rate_on_scalar_gd():
    tr = run(SchemeSpec("GRAD_FLOW", "EXPLICIT", 0.5), make_problem(HALF_SQUARE, np.array([1.0])), 200)
    fit = fit_rate(tr)
    assert abs(fit.rho_hat - 0.25) <= 1e-6 and not fit.degenerate


def test_accelerated_versus_heavy_ball_rates(quad_ill):
    mu = quad_ill.mu
    pb = make_problem(quad_ill)
    sc = fit_rate(run(SchemeSpec("SC_HR", "SYMPLECTIC", 4 / 9), pb, 2000))
    hb = fit_rate(run(SchemeSpec("HB_HR", "SYMPLECTIC", mu / 16), pb, 2000))
    assert sc.rho_hat <= 1 - 0.5 * np.sqrt(mu)
    assert hb.rho_hat >= 1 - 10 * mu


def test_fit_rate_degenerate_on_constant_trace(quad):
    tr = run(SchemeSpec("SC_HR", "SYMPLECTIC", 4 / 9), make_problem(quad, quad.minimizer.copy()), 20)
    fit = fit_rate(tr)
    assert fit.degenerate and np.isnan(fit.rho_hat)
    with pytest.raises(ValueError):
        fit_rate(tr, tail_fraction=0.0)


# -- linear-map oracle -------------------------------------------------------------


def test_gd_radius_vanishes_at_unit_step():
    assert spectral_radius(SchemeSpec("GRAD_FLOW", "EXPLICIT", 1.0), 1.0, 1.0) == 0.0


def test_symplectic_radius_below_one():
    assert spectral_radius(SchemeSpec("SC_HR", "SYMPLECTIC", 4 / 9), 1.0, 0.01) < 1


def test_explicit_scheme_radius_above_one_at_unit_step():
    assert spectral_radius(SchemeSpec("SC_HR", "EXPLICIT", 1.0), 1.0, 0.01, lipschitz=1.0) > 1


def test_explicit_heavy_ball_radius_above_one_at_unit_step():
    assert spectral_radius(SchemeSpec("HB_HR", "EXPLICIT", 1.0), 1.0, 0.01, lipschitz=1.0) > 1


@pytest.mark.parametrize("family", list(OdeFamily))
def test_implicit_radius_below_one_at_unit_step(family, quad):
    for lam in np.linalg.eigvalsh(quad.matrix):
        assert spectral_radius(SchemeSpec(family, "IMPLICIT", 1.0), lam, quad.mu) < 1


def test_out_of_range_eigenvalue_warns():
    with pytest.warns(UserWarning):
        r = spectral_radius(SchemeSpec("SC_HR", "SYMPLECTIC", 0.1), 5.0, 0.01, lipschitz=1.0)
    assert np.isfinite(r)


@pytest.mark.parametrize("family", ["SC_HR", "HB_HR", "LOW_SC"])
@pytest.mark.parametrize("rule", ["SYMPLECTIC", "EXPLICIT", "IMPLICIT", "CLASSICAL"])
def test_iteration_matrix_matches_hand_assembly(family, rule):
    if family == "LOW_SC" and rule == "CLASSICAL":
        pytest.skip("no classical method for this family")
    mu, s = 0.01, 0.2
    for lam in (0.01, 0.3, 1.0):
        M, asym = iteration_matrix(SchemeSpec(family, rule, s), lam, mu, k=5)
        np.testing.assert_allclose(M, mode_matrix(OdeFamily(family), rule, lam, mu, s, k=5), rtol=1e-12, atol=1e-14)
        assert not asym


def test_convex_family_matrix_is_flagged_asymptotic():
    _, asym = iteration_matrix(SchemeSpec("C_HR_MOD", "SYMPLECTIC", 0.1), 0.5, 0.0)
    assert asym
    _, asym = iteration_matrix(SchemeSpec("C_HR_MOD", "SYMPLECTIC", 0.1), 0.5, 0.0, k=3)
    assert not asym


def test_oracle_iterates_match_run(quad):
    spec = SchemeSpec("C_HR", "EXPLICIT", 0.3)
    pb = make_problem(quad)
    np.testing.assert_allclose(oracle_iterates(spec, pb, 200), run(spec, pb, 200).x, rtol=1e-10, atol=1e-10)


def _consistency_cases():
    cases = []
    for fam in STRONG_FAMILIES:
        for rule in ("SYMPLECTIC", "EXPLICIT", "IMPLICIT", "CLASSICAL"):
            if fam is OdeFamily.LOW_SC and rule == "CLASSICAL":
                continue
            for scale in (1.0, 0.5):
                cases.append((fam.value, rule, scale))
    cases += [("GRAD_FLOW", "EXPLICIT", 1.0), ("GRAD_FLOW", "IMPLICIT", 1.0), ("GRAD_FLOW", "IMPLICIT", 5.0)]
    return cases


@pytest.mark.parametrize("family,rule,scale", _consistency_cases())
def test_fit_rate_agrees_with_spectral_radius(family, rule, scale):
    obj = make_quadratic(10, 0.01, 1.0, seed=0, centered=True)
    s = scale * theorem_step_size(family, rule, obj.mu, obj.lipschitz)
    spec = SchemeSpec(family, rule, s)
    radius, real = max_spectral_radius(spec, obj)
    if not real:
        pytest.skip("dominant eigenvalue is complex")
    fit = fit_rate(run(spec, make_problem(obj), 2000))
    assert fit.rho_hat == pytest.approx(radius ** 2, rel=0.02)


def test_dominant_eigenvalue_is_largest(quad):
    spec = SchemeSpec("SC_HR", "SYMPLECTIC", 4 / 9)
    z = dominant_eigenvalue(spec, 0.01, quad.mu)
    assert abs(z) == pytest.approx(spectral_radius(spec, 0.01, quad.mu))


# -- acceleration in iteration counts ----------------------------------------------


def _count(family, rule, kappa):
    obj = make_quadratic(10, 1 / kappa, 1.0, seed=0)
    pb = make_problem(obj, balanced_start(obj, gap=1.0))
    s = theorem_step_size(family, rule, obj.mu, obj.lipschitz)
    n = iterations_to_reach(SchemeSpec(family, rule, s), pb, 1e-6, max_iterations=2_000_000)
    assert n is not None
    return n


def test_symplectic_count_scales_with_root_kappa():
    ratio = _count("SC_HR", "SYMPLECTIC", 1e4) / _count("SC_HR", "SYMPLECTIC", 1e2)
    assert 8 <= ratio <= 12


@pytest.mark.parametrize("family,rule", [("HB_HR", "SYMPLECTIC"), ("SC_HR", "EXPLICIT")])
def test_non_accelerated_count_scales_with_kappa(family, rule):
    ratio = _count(family, rule, 1e4) / _count(family, rule, 1e2)
    assert 80 <= ratio <= 120
