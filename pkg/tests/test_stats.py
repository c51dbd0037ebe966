import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from knudsen.config import build_scenario
from knudsen.errors import (DegenerateWindow, MomentDiverges, TooFewSamples)
from knudsen.rng import Stream
from knudsen.stats import (RateFunction, SurvivalCurve, chi2_test,
                           fit_tail_slope, ks_test, ks_two_sample, make_grid,
                           moment_C0, survival_curve, tv_histogram,
                           tv_histogram_sweep, uniform_position_probs)
from knudsen.velocity import Maxwellian

from oracles import pareto_tail_samples


# -- survival curves -------------------------------------------------------------

def test_survival_point_mass():
    taus = np.ones(200)
    curve = survival_curve(taus, np.zeros(200, bool),
                           np.array([0.5, 2.0]), t_max=3.0)
    assert curve.survival.tolist() == [1.0, 0.0]


def test_survival_all_censored():
    taus = np.full(150, 10.0)
    curve = survival_curve(taus, np.ones(150, bool),
                           make_grid(0.1, 10.0, 10), t_max=10.0)
    assert np.all(curve.survival == 1.0)
    assert curve.censor_fraction == 1.0


def test_survival_too_few_samples():
    with pytest.raises(TooFewSamples):
        survival_curve(np.ones(50), np.zeros(50, bool),
                       np.array([1.0]), 2.0)


def test_survival_monotone_with_intervals():
    stream = Stream(51, 0)
    taus = pareto_tail_samples(stream, 5000, 1.5)
    cens = taus > 50.0
    curve = survival_curve(np.where(cens, 50.0, taus), cens,
                           make_grid(0.5, 50.0), 50.0)
    assert np.all(np.diff(curve.survival) <= 1e-15)
    assert np.all(curve.ci_lo <= curve.survival + 1e-12)
    assert np.all(curve.survival <= curve.ci_hi + 1e-12)


def test_pareto_slope_recovered():
    # synthetic generator oracle: exact Pareto(2) tail
    stream = Stream(51, 1)
    taus = pareto_tail_samples(stream, 100_000, 2.0)
    cens = taus > 1000.0
    curve = survival_curve(np.where(cens, 1000.0, taus), cens,
                           make_grid(0.05, 1000.0), 1000.0)
    fit = fit_tail_slope(curve, (2.0, 200.0))
    assert abs(fit.slope + 2.0) < 0.15


# -- tail fits ---------------------------------------------------------------------

def _curve_from_values(grid, values, n=10**6):
    return SurvivalCurve(np.asarray(grid), np.asarray(values),
                         np.asarray(values), np.asarray(values), n, 0.0,
                         float(grid[-1]))


def test_fit_exact_power_curve():
    grid = make_grid(1.0, 1000.0)
    curve = _curve_from_values(grid, grid ** -2.0)
    fit = fit_tail_slope(curve, (1.0, 1000.0))
    assert fit.slope == pytest.approx(-2.0, abs=1e-6)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)


def test_fit_log_corrected_shape():
    # direct evaluation of the bounded-data tail shape on the window; the
    # weighted fit of a smooth curve must land between the extreme local
    # slopes there, d log P / d log t = -2 + 2u/(1+u^2) at u = log t
    grid = make_grid(10.0, 100.0)
    vals = (1.0 + np.log(grid) ** 2) / grid**2
    vals /= vals[0]
    fit = fit_tail_slope(_curve_from_values(grid, vals), (10.0, 100.0))
    u_lo, u_hi = math.log(10.0), math.log(100.0)
    slope_at = lambda u: -2.0 + 2.0 * u / (1.0 + u * u)
    assert slope_at(u_hi) - 1e-9 <= fit.slope <= slope_at(u_lo) + 1e-9


def test_fit_degenerate_window():
    grid = make_grid(1.0, 100.0)
    curve = _curve_from_values(grid, np.zeros_like(grid) + 1e-12)
    with pytest.raises(DegenerateWindow):
        fit_tail_slope(curve, (200.0, 300.0))


def test_fit_constant_curve_flat_slope():
    grid = make_grid(1.0, 100.0)
    fit = fit_tail_slope(_curve_from_values(grid, np.full_like(grid, 0.5)),
                         (1.0, 100.0))
    assert abs(fit.slope) < 1e-12


# -- histogram TV ------------------------------------------------------------------

def _phase_sample(stream, n, theta):
    law = Maxwellian(2, theta)
    pos = stream.gen.random((n, 2)) * 2.0 - 1.0
    vel = np.array([law.draw_velocity(stream) for _ in range(n)])
    return pos, vel


def test_tv_identical_samples_zero():
    stream = Stream(52, 0)
    pos, vel = _phase_sample(stream, 5000, 1.0)
    assert tv_histogram(pos, vel, pos, vel) == 0.0


def test_tv_disjoint_supports_near_one():
    stream = Stream(52, 1)
    pos, vel = _phase_sample(stream, 5000, 1.0)
    assert tv_histogram(pos, vel, pos + 10.0, vel) == pytest.approx(1.0)


def test_tv_between_temperatures_matches_quadrature():
    # oracle: for radial laws the TV equals the 1-D TV of speed densities
    t1, t2 = 1.0, 1.2
    def speed_pdf(theta):
        return lambda s: s / theta * math.exp(-s * s / (2 * theta))
    tv_true = 0.5 * integrate.quad(
        lambda s: abs(speed_pdf(t1)(s) - speed_pdf(t2)(s)), 0, 20)[0]
    stream = Stream(52, 2)
    pos1, vel1 = _phase_sample(stream, 100_000, t1)
    pos2, vel2 = _phase_sample(stream, 100_000, t2)
    est = tv_histogram(pos1, vel1, pos2, vel2, binning=(2, 24, 4))
    # noise floor estimated from an equal-law split
    pos1b, vel1b = _phase_sample(stream, 100_000, t1)
    floor = tv_histogram(pos1, vel1, pos1b, vel1b, binning=(2, 24, 4))
    assert abs(est - tv_true) < 0.02 + floor
    sweep = tv_histogram_sweep(pos1, vel1, pos2, vel2)
    assert max(sweep) - min(sweep) < 0.05


# -- moment gate -------------------------------------------------------------------

def _scenario():
    return build_scenario({})


def test_moment_constant_rate_is_one():
    sc = _scenario()
    rate = RateFunction("one")
    assert moment_C0(rate, sc.initial, sc.wall_law, sc.domain) == \
        pytest.approx(1.0, rel=1e-6)


def test_moment_power_one_matches_quadrature():
    sc = _scenario()
    rate = RateFunction("power", 1.0)
    got = moment_C0(rate, sc.initial, sc.wall_law, sc.domain)
    # independent radial quadrature of the largest of the three integrals
    d = sc.domain.diameter

    def emission_integrand(s):
        return (1.0 + d / s) * s**2 * math.exp(-s * s / 2.0)

    norm = integrate.quad(lambda s: s**2 * math.exp(-s * s / 2), 0, 20)[0]
    i_emission = integrate.quad(emission_integrand, 0, 30)[0] / norm

    def equilibrium_integrand(s):
        return (1.0 + d / s) * s * math.exp(-s * s / 2.0)

    i_equilibrium = integrate.quad(equilibrium_integrand, 0, 30)[0]
    expect = max(i_emission, i_equilibrium)
    assert got == pytest.approx(expect, rel=0.01)


@pytest.mark.parametrize("d_exp", [0.5, 1.0, 1.9])
def test_moment_finite_below_dimension(d_exp):
    sc = _scenario()
    val = moment_C0(RateFunction("power", d_exp), sc.initial, sc.wall_law,
                    sc.domain)
    assert np.isfinite(val) and val > 1.0


def test_moment_diverges_at_dimension():
    sc = _scenario()
    with pytest.raises(MomentDiverges):
        moment_C0(RateFunction("power", 2.0), sc.initial, sc.wall_law,
                  sc.domain)


def test_moment_power_log_finite():
    sc = _scenario()
    val = moment_C0(RateFunction("power_log", 2.0), sc.initial,
                    sc.wall_law, sc.domain)
    assert np.isfinite(val)


def test_moment_heavy_initial_data():
    sc = build_scenario({"initial": {
        "position": {"kind": "uniform"},
        "velocity": {"kind": "truncated_power", "alpha": 1.0}}})
    assert np.isfinite(moment_C0(RateFunction("power", 0.5), sc.initial,
                                 sc.wall_law, sc.domain))
    with pytest.raises(MomentDiverges):
        moment_C0(RateFunction("power", 1.0), sc.initial, sc.wall_law,
                  sc.domain)


# -- test wrappers -----------------------------------------------------------------

def test_ks_calibration():
    stream = Stream(53, 0)
    low = 0
    reps = 200
    for _ in range(reps):
        samples = stream.uniform_vec(1000)
        if ks_test(samples, "uniform") < 0.05:
            low += 1
    assert abs(low / reps - 0.05) < 0.03


def test_ks_power():
    stream = Stream(53, 1)
    samples = stream.uniform_vec(100_000) + 0.05
    assert ks_test(samples, "uniform") < 1e-6


def test_ks_too_few():
    with pytest.raises(TooFewSamples):
        ks_test(np.ones(10), "uniform")
    with pytest.raises(TooFewSamples):
        ks_two_sample(np.ones(10), np.ones(2000))


def test_chi2_bin_merging():
    # tiny expected bins must merge instead of blowing up the statistic
    counts = np.array([1000.0, 998.0, 2.0, 1.0, 1.0])
    probs = np.array([0.499, 0.499, 0.00067, 0.00067, 0.00066])
    p = chi2_test(counts, probs)
    assert 0.0 < p <= 1.0


def test_chi2_detects_shift():
    counts = np.array([700.0, 300.0])
    probs = np.array([0.5, 0.5])
    assert chi2_test(counts, probs) < 1e-6


@given(st.integers(2, 30))
def test_grid_is_log_spaced(per_decade):
    g = make_grid(0.1, 100.0, per_decade)
    ratios = np.diff(np.log(g))
    assert np.allclose(ratios, ratios[0])


def test_uniform_position_probs_disk():
    sc = _scenario()
    probs = uniform_position_probs(sc.domain, 4, subgrid=256)
    assert probs.sum() == pytest.approx(1.0)
    # the four central cells cover equal area quarters of the disk corners
    grid = probs.reshape(4, 4)
    assert np.allclose(grid, grid[::-1, :], atol=2e-3)
    assert np.allclose(grid, grid[:, ::-1], atol=2e-3)
    assert grid[0, 0] < grid[1, 1]
