"""Tests for convex potentials, resolvents, Yosida slopes and Moreau
envelopes, including the full smoothing-inequality suite."""

import numpy as np
import pytest

from graphspde.monotone import (
    MoreauYosida,
    ResolventError,
    check_assumptions,
    cross_monotonicity_defect,
    fast_diffusion,
    piecewise_quadratic,
    porous_medium,
    zhang,
)


def builtin_potentials():
    return [
        fast_diffusion(0.5),
        fast_diffusion(0.3),
        porous_medium(2.0),
        zhang(),
        sample_piecewise(),
    ]


def sample_piecewise():
    # Convex with a flat middle and genuinely multi-valued kinks at the
    # knots: slope jumps from -1 to 0 at -1 and from 0 to 2 at +1.
    return piecewise_quadratic(
        knots=[-1.0, 1.0],
        pieces=[(1.0, 1.0, 0.0), (0.0, 0.0, 0.0), (2.0, -2.0, 0.0)],
    )


def prox_grid_argmin(potential, eps, r, lo=-20.0, hi=20.0, step=1e-4):
    # Independent oracle: brute-force minimization of the prox objective.
    grid = np.arange(lo, hi + step, step)
    objective = (r - grid) ** 2 / (2 * eps) + potential.value(grid)
    return grid[np.argmin(objective)]


def bisect_scalar(f, lo, hi, iters=200):
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


# -- resolvent ---------------------------------------------------------------


def test_resolvent_fixes_origin():
    for pot in builtin_potentials():
        for eps in (0.1, 0.5, 0.9):
            assert MoreauYosida(pot, eps).resolvent(0.0) == pytest.approx(0.0)


def test_zhang_resolvent_branches_match_oracle():
    my = MoreauYosida(zhang(), 0.5)
    assert my.resolvent(2.0) == pytest.approx(1.0)
    assert my.resolvent(2.0) == pytest.approx(
        prox_grid_argmin(zhang(), 0.5, 2.0), abs=1e-4)
    # all three branches against the grid oracle
    for r in (-3.0, -0.2, 0.1, 0.4, 0.5, 0.6, 2.0, 7.5):
        expected = prox_grid_argmin(zhang(), 0.5, r)
        assert my.resolvent(r) == pytest.approx(expected, abs=1.01e-4)
    # closed-form branch shapes
    r = np.array([-1.5, 0.25, 3.0])
    got = my.resolvent(r)
    assert got[0] == pytest.approx(-1.5)
    assert got[1] == pytest.approx(0.0)
    assert got[2] == pytest.approx((3.0 - 0.5) / 1.5)


def test_fast_diffusion_resolvent_against_bisection():
    # theta = 1/2 at eps = 1: s + sqrt(s) = 2 has the root s = 1.
    my = MoreauYosida(fast_diffusion(0.5), 1.0)
    assert my.resolvent(2.0) == pytest.approx(1.0, rel=1e-12)
    root = bisect_scalar(lambda s: s + np.sqrt(s) - 2.0, 0.0, 2.0)
    assert my.resolvent(2.0) == pytest.approx(root, abs=1e-10)
    # generic exponent goes through the safeguarded Newton path
    my = MoreauYosida(fast_diffusion(0.3), 0.7)
    root = bisect_scalar(lambda s: s + 0.7 * s**0.3 - 1.9, 0.0, 1.9)
    assert my.resolvent(1.9) == pytest.approx(root, abs=1e-9)
    assert my.resolvent(-1.9) == pytest.approx(-root, abs=1e-9)


def test_porous_medium_resolvent_against_bisection():
    my = MoreauYosida(porous_medium(2.0), 0.4)
    root = bisect_scalar(lambda s: s + 0.4 * s**2 - 3.0, 0.0, 3.0)
    assert my.resolvent(3.0) == pytest.approx(root, rel=1e-12)
    my = MoreauYosida(porous_medium(3.5), 0.4)
    root = bisect_scalar(lambda s: s + 0.4 * s**3.5 - 3.0, 0.0, 3.0)
    assert my.resolvent(3.0) == pytest.approx(root, abs=1e-9)


def test_piecewise_resolvent_against_grid():
    pot = sample_piecewise()
    my = MoreauYosida(pot, 0.3)
    for r in (-4.0, -1.3, -1.0, -0.7, 0.0, 0.4, 1.0, 1.2, 5.0):
        expected = prox_grid_argmin(pot, 0.3, r)
        assert my.resolvent(r) == pytest.approx(expected, abs=1.01e-4)


def test_prox_oracle_equivalence_refining_grid():
    # Ten thousand random (kind, smoothing, point) cases against the
    # brute-force minimizer on a two-stage refining grid; the oracle never
    # touches the resolvent.
    rng = np.random.default_rng(31)
    kinds = builtin_potentials()
    for pot in kinds:
        grid1 = np.arange(-20.0, 20.0 + 1e-2, 1e-2)
        vals1 = pot.value(grid1)
        eps = rng.uniform(0.05, 0.95, size=10000 // len(kinds))
        rs = rng.uniform(-10, 10, size=eps.size)
        resolved = np.array([MoreauYosida(pot, float(e)).resolvent(float(r))
                             for e, r in zip(eps, rs)])
        for e, r, got in zip(eps, rs, resolved):
            center = grid1[np.argmin((r - grid1) ** 2 / (2 * e) + vals1)]
            # refine to 1e-5, the finest step whose objective differences
            # still clear floating-point roundoff near the minimum
            grid = np.arange(center - 0.02, center + 0.02, 1e-5)
            obj = (r - grid) ** 2 / (2 * e) + pot.value(grid)
            fine = grid[np.argmin(obj)]
            assert got == pytest.approx(fine, abs=1.1e-5)


def test_sublinear_resolvent_extreme_magnitudes():
    # For exponents below one the root at tiny inputs sits near
    # (|r|/eps)**(1/exponent), exponentially small; the solve must resolve
    # it (regression: bisection in the raw variable stalled here).
    my = MoreauYosida(fast_diffusion(0.2), 0.025)
    r = -4.65254e-09
    s = float(my.resolvent(r))
    assert s == pytest.approx(-((abs(r) / 0.025) ** 5), rel=1e-6)
    for theta in (0.1, 0.35, 0.9):
        pot = fast_diffusion(theta)
        for eps in (0.01, 0.6, 1.5):
            my = MoreauYosida(pot, eps)
            mags = 10.0 ** np.arange(-14.0, 7.0)
            rr = np.concatenate([mags, -mags, [0.0]])
            y = my.yosida(rr)  # resolvent self-checks its residual
            lo, hi = pot.subdiff(my.resolvent(rr))
            tol = 1e-9 * (1 + np.abs(rr))
            assert np.all(y >= lo - tol) and np.all(y <= hi + tol)


def test_resolvent_requires_convexity():
    concave = piecewise_quadratic([0.0], [(-1.0, 0.0, 0.0), (-1.0, 0.0, 0.0)])
    with pytest.raises(ResolventError, match="convex"):
        MoreauYosida(concave, 0.5).resolvent(1.0)


def test_smoothing_parameter_validation():
    with pytest.raises(ValueError, match="positive"):
        MoreauYosida(zhang(), 0.0)
    MoreauYosida(zhang(), 1.0)  # values above one are legitimate here


# -- Yosida slope -------------------------------------------------------------


def test_yosida_zero():
    for pot in builtin_potentials():
        assert MoreauYosida(pot, 0.5).yosida(0.0) == pytest.approx(0.0)


def test_zhang_yosida_values_and_membership():
    my = MoreauYosida(zhang(), 0.5)
    assert my.yosida(2.0) == pytest.approx(2.0)
    lo, hi = zhang().subdiff(my.resolvent(2.0))
    assert lo - 1e-12 <= my.yosida(2.0) <= hi + 1e-12
    # small positive inputs collapse onto the multi-valued point
    assert my.resolvent(0.25) == pytest.approx(0.0)
    assert my.yosida(0.25) == pytest.approx(0.5)
    lo, hi = zhang().subdiff(0.0)
    assert lo <= 0.5 <= hi


def test_yosida_membership_random():
    rng = np.random.default_rng(37)
    for pot in builtin_potentials():
        r = rng.uniform(-8, 8, size=500)
        eps = float(rng.uniform(0.05, 0.95))
        my = MoreauYosida(pot, eps)
        s = my.resolvent(r)
        y = my.yosida(r)
        lo, hi = pot.subdiff(s)
        tol = 1e-9 * (1 + np.abs(r))
        assert np.all(y >= lo - tol)
        assert np.all(y <= hi + tol)


def test_yosida_lipschitz_and_monotone():
    rng = np.random.default_rng(41)
    for pot in builtin_potentials():
        for eps in (0.1, 0.5):
            my = MoreauYosida(pot, eps)
            a = rng.uniform(-10, 10, size=800)
            b = rng.uniform(-10, 10, size=800)
            ya, yb = my.yosida(a), my.yosida(b)
            assert np.all((ya - yb) * (a - b) >= -1e-12)
            assert np.all(np.abs(ya - yb) <= np.abs(a - b) / eps + 1e-12)


def test_yosida_dominated_by_minimal_section():
    rng = np.random.default_rng(43)
    for pot in builtin_potentials():
        r = rng.uniform(-10, 10, size=1000)
        for eps in (0.05, 0.4, 0.9):
            y = np.abs(MoreauYosida(pot, eps).yosida(r))
            assert np.all(y <= pot.minimal_section(r) + 1e-10)


# -- envelope -----------------------------------------------------------------


def test_envelope_zero():
    for pot in builtin_potentials():
        assert MoreauYosida(pot, 0.3).envelope(0.0) == pytest.approx(0.0)


def test_zhang_envelope_value():
    my = MoreauYosida(zhang(), 0.5)
    # transport cost 1 plus potential value 1.5 at the resolvent point
    assert my.envelope(2.0) == pytest.approx(2.5)
    assert zhang().value(1.0) <= my.envelope(2.0) <= zhang().value(2.0)


def test_fast_diffusion_envelope_value():
    my = MoreauYosida(fast_diffusion(0.5), 1.0)
    assert my.envelope(2.0) == pytest.approx(0.5 + 2.0 / 3.0)
    pot = fast_diffusion(0.5)
    assert pot.value(1.0) <= my.envelope(2.0) <= pot.value(2.0)


def test_envelope_sandwich_and_gap():
    rng = np.random.default_rng(47)
    for pot in builtin_potentials():
        r = rng.uniform(-10, 10, size=1000)
        for eps in (0.05, 0.5, 0.95):
            my = MoreauYosida(pot, eps)
            env = my.envelope(r)
            val = pot.value(r)
            at_res = pot.value(my.resolvent(r))
            assert np.all(env <= val + 1e-10 * (1 + val))
            assert np.all(env >= at_res - 1e-10 * (1 + np.abs(at_res)))
            gap = np.abs(val - env)
            assert np.all(gap <= eps * pot.minimal_section(r) ** 2
                          + 1e-10 * (1 + val))


def test_gradient_of_envelope_is_yosida():
    rng = np.random.default_rng(53)
    h = 1e-6
    for pot in builtin_potentials():
        r = rng.uniform(-10, 10, size=1000)
        keep = np.min(np.abs(r[:, None] - pot.breakpoints[None, :]), axis=1) >= 1e-2
        r = r[keep]
        for eps in (0.1, 0.6):
            my = MoreauYosida(pot, eps)
            fd = (my.envelope(r + h) - my.envelope(r - h)) / (2 * h)
            assert np.abs(fd - my.yosida(r)).max() <= 1e-4


# -- paired smoothing ----------------------------------------------------------


def test_cross_monotonicity_equal_points():
    d = cross_monotonicity_defect(zhang(), 0.5, 0.1, 1.3, 1.3)
    assert d.product == pytest.approx(0.0)
    assert d.slope_bound <= 0.0
    assert d.slack_slope >= 0.0


def test_cross_monotonicity_equal_smoothing():
    rng = np.random.default_rng(59)
    for _ in range(50):
        r, rp = rng.uniform(-5, 5, size=2)
        d = cross_monotonicity_defect(fast_diffusion(0.5), 0.3, 0.3, r, rp)
        assert d.product >= -1e-12
        assert d.slack_slope >= abs(d.slope_bound) - 1e-12


def test_cross_monotonicity_zhang_mixed():
    # Branch values: slope at 2 with eps 0.5 is 2, at -1 with eps 0.1 is 0.
    d = cross_monotonicity_defect(zhang(), 0.5, 0.1, 2.0, -1.0)
    assert d.product == pytest.approx(6.0)
    assert d.slack_slope == pytest.approx(6.0 + 0.5 * 0.6 * 4.0)
    assert d.slack_growth == pytest.approx(6.0 + 2.0 * 0.6 * 6.0)


def test_cross_monotonicity_suite_random():
    rng = np.random.default_rng(61)
    for pot in builtin_potentials():
        e = rng.uniform(0.02, 0.98, size=(400, 2))
        pts = rng.uniform(-8, 8, size=(400, 2))
        for (e1, e2), (r, rp) in zip(e, pts):
            d = cross_monotonicity_defect(pot, e1, e2, r, rp)
            assert d.slack_slope >= -1e-10 * d.scale
            if d.slack_growth is not None:
                assert d.slack_growth >= -1e-10 * d.scale


def test_cross_monotonicity_porous_has_no_growth_bound():
    d = cross_monotonicity_defect(porous_medium(2.0), 0.2, 0.3, 1.0, -1.0)
    assert d.growth_bound is None
    assert d.slack_growth is None


# -- assumption checks ----------------------------------------------------------


def test_check_assumptions_fast_diffusion():
    report = check_assumptions(fast_diffusion(0.5), np.linspace(-10, 10, 2001))
    assert report.passed
    by_name = {e.name: e for e in report.entries}
    assert "certified constant 1" in by_name["linear_minimal_section_bound"].detail


def test_check_assumptions_zhang():
    report = check_assumptions(zhang(), np.linspace(-10, 10, 2001))
    assert report.passed
    assert zhang().minimal_section(0.0) == pytest.approx(0.0)


def test_check_assumptions_porous_medium_flagged():
    report = check_assumptions(porous_medium(2.0), np.linspace(-10, 10, 2001))
    assert not report.passed
    by_name = {e.name: e for e in report.entries}
    assert not by_name["linear_minimal_section_bound"].passed
    assert by_name["convexity"].passed


def test_check_assumptions_concave_counterexample():
    concave = piecewise_quadratic([0.0], [(-1.0, 0.0, 0.0), (-1.0, 0.0, 0.0)])
    report = check_assumptions(concave, np.linspace(-5, 5, 501))
    by_name = {e.name: e for e in report.entries}
    assert not by_name["convexity"].passed
    assert not report.passed
    assert "FAIL" in report.to_text()


def test_piecewise_validation():
    with pytest.raises(ValueError, match="ascending"):
        piecewise_quadratic([1.0, 0.0], np.zeros((3, 3)))
    with pytest.raises(ValueError, match="row per interval"):
        piecewise_quadratic([0.0], np.zeros((3, 3)))
    with pytest.raises(ValueError, match="agree at the knots"):
        piecewise_quadratic([0.0], [(0.0, 0.0, 0.0), (0.0, 0.0, 5.0)])


def test_exponent_validation():
    with pytest.raises(ValueError, match=r"\(0, 1\)"):
        fast_diffusion(1.0)
    with pytest.raises(ValueError, match="exceed 1"):
        porous_medium(1.0)


def test_zhang_subdiff_table():
    pot = zhang()
    lo, hi = pot.subdiff(np.array([-2.0, 0.0, 3.0]))
    assert np.allclose(lo, [0.0, 0.0, 4.0])
    assert np.allclose(hi, [0.0, 1.0, 4.0])
