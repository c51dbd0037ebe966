import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate
from scipy import stats as sps

from knudsen.errors import NotInward
from knudsen.geometry import Ball
from knudsen.rng import Stream
from knudsen.velocity import (Innovation, Maxwellian, TabulatedRadial,
                              TruncatedPower, draw_innovation,
                              emit_velocity, frame_at, post_collision,
                              sample_angles, sample_upsilon, vartheta,
                              vartheta_inverse)

from conftest import vec


def bp_at(angle, domain=None):
    domain = domain or Ball([0.0, 0.0], 1.0)
    return domain.boundary_point(vec(math.cos(angle), math.sin(angle)))


# -- flux constant ------------------------------------------------------------

def flux_oracle_2d(law):
    """Direct planar quadrature of M(v) (v . e_y)_+, independent of the
    radial reduction used by the implementation."""
    val, _ = integrate.dblquad(
        lambda vy, vx: law.profile(math.hypot(vx, vy)) * vy,
        -np.inf, np.inf, lambda _: 0.0, lambda _: np.inf)
    return val


def test_c0_maxwellian_unit():
    law = Maxwellian(2, 1.0)
    assert law.c0 == pytest.approx(flux_oracle_2d(law), rel=1e-6)
    assert law.c0 == pytest.approx(1.0 / math.sqrt(2 * math.pi), rel=1e-8)


def test_c0_temperature_scaling():
    hot = Maxwellian(2, 4.0)
    assert hot.c0 == pytest.approx(flux_oracle_2d(hot), rel=1e-6)
    assert hot.c0 == pytest.approx(2.0 / math.sqrt(2 * math.pi), rel=1e-8)


def test_c0_dimension_free():
    for n in (2, 3, 4):
        assert Maxwellian(n, 1.0).c0 == pytest.approx(
            1.0 / math.sqrt(2 * math.pi), rel=1e-8)


def test_c0_tabulated_cross_method():
    ref = Maxwellian(2, 1.0)
    grid = np.linspace(0.0, 9.0, 2000)
    law = TabulatedRadial(2, grid, [ref.profile(r) for r in grid])
    assert law.c0 == pytest.approx(ref.c0, abs=1e-4)


def test_mass_normalization_quadrature():
    for law in (Maxwellian(2, 1.0), Maxwellian(3, 2.0),
                TruncatedPower(2, 1.0)):
        n = law.n
        area = 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)
        mass, _ = integrate.quad(lambda s: area * s ** (n - 1)
                                 * law.profile(s), 0, law.speed_support)
        assert mass == pytest.approx(1.0, abs=1e-6)


# -- frames --------------------------------------------------------------------

def test_frame_2d_axis():
    bp = bp_at(math.pi / 2)  # normal (0, -1)
    f = frame_at(bp)
    assert np.allclose(f[0], [0, -1], atol=1e-12)
    assert abs(abs(f[1][0]) - 1.0) < 1e-12  # tangent along x, fixed sign


def test_frame_3d_spans_tangent_plane():
    ball = Ball([0.0, 0.0, 0.0], 1.0)
    bp = ball.boundary_point(np.array([0.0, 0.0, -1.0]))  # normal (0,0,1)
    f = frame_at(bp)
    assert np.allclose(f[0], [0, 0, 1], atol=1e-12)
    assert np.abs(f[1:, 2]).max() < 1e-12


@given(st.floats(0, 2 * math.pi))
def test_frame_gram_identity(ang):
    f = frame_at(bp_at(ang))
    assert np.abs(f @ f.T - np.eye(2)).max() < 1e-12


def test_frame_bitwise_deterministic():
    for ang in np.linspace(0, 2 * math.pi, 17):
        a = frame_at(bp_at(ang)).copy()
        b = frame_at(bp_at(ang))
        assert np.array_equal(a, b)


# -- direction map --------------------------------------------------------------

def test_vartheta_polar_axis():
    bp = bp_at(0.31)
    assert np.allclose(vartheta(bp, (0.0,)), bp.normal, atol=1e-15)


def test_vartheta_cosine_component():
    bp = bp_at(1.2)
    u = vartheta(bp, (math.pi / 3,))
    assert float(u @ bp.normal) == pytest.approx(0.5, abs=1e-12)


@given(st.floats(-math.pi / 2 + 1e-6, math.pi / 2 - 1e-6),
       st.floats(0, 2 * math.pi))
def test_vartheta_unit_norm(t1, ang):
    u = vartheta(bp_at(ang), (t1,))
    assert float(u @ u) == pytest.approx(1.0, abs=1e-12)


def test_vartheta_inverse_identity_on_normal():
    bp = bp_at(2.2)
    theta = vartheta_inverse(bp, bp.normal)
    assert len(theta) == 1
    assert theta[0] == pytest.approx(0.0, abs=1e-15)


def test_vartheta_inverse_sign_convention():
    # 2-D oracle: the signed angle is measured toward the frame tangent
    bp = bp_at(0.0)
    f = frame_at(bp)
    for sign in (+1.0, -1.0):
        u = math.cos(math.pi / 4) * f[0] + sign * math.sin(math.pi / 4) * f[1]
        theta = vartheta_inverse(bp, u)
        assert theta[0] == pytest.approx(sign * math.pi / 4, abs=1e-12)


@pytest.mark.parametrize("dim", [2, 3, 4])
def test_vartheta_roundtrip(dim):
    ball = Ball([0.0] * dim, 1.0)
    stream = Stream(11, dim)
    worst = 0.0
    for _ in range(10_000 if dim == 2 else 4000):
        p = stream.normal_vec(dim)
        p /= math.sqrt(float(p @ p))
        bp = ball.boundary_point(p)
        u = stream.normal_vec(dim)
        u /= math.sqrt(float(u @ u))
        if float(u @ bp.normal) <= 1e-9:
            continue
        theta = vartheta_inverse(bp, u)
        worst = max(worst, float(np.abs(vartheta(bp, theta) - u).max()))
    assert worst < 1e-10


def test_not_inward_raises():
    bp = bp_at(0.0)
    with pytest.raises(NotInward):
        vartheta_inverse(bp, -bp.normal)


# -- sampling laws ---------------------------------------------------------------

def test_emission_speed_is_chi3():
    # oracle: the normalized r^2 M(r) density coincides with chi(3)
    law = Maxwellian(2, 1.0)
    norm, _ = integrate.quad(lambda r: r**2 * law.profile(r), 0, np.inf)
    chi3 = sps.chi(df=3)
    for r in (0.3, 0.9, 1.7, 2.5):
        assert r**2 * law.profile(r) / norm == pytest.approx(
            chi3.pdf(r), rel=1e-9)
    stream = Stream(12, 0)
    draws = np.array([law.draw_emission_speed(stream)
                      for _ in range(100_000)])
    assert sps.kstest(draws, chi3.cdf).pvalue > 1e-3


def test_angle_density_cosine_half():
    # c_Theta = 1/2 because the cosine integrates to 2 over the range
    norm, _ = integrate.quad(math.cos, -math.pi / 2, math.pi / 2)
    assert norm == pytest.approx(2.0, abs=1e-12)
    stream = Stream(12, 1)
    t1 = np.array([sample_angles(stream, 2)[0] for _ in range(100_000)])
    cdf = lambda t: 0.5 * (np.sin(t) + 1.0)
    assert sps.kstest(t1, cdf).pvalue > 1e-3


def test_mean_cosine_matches_quadrature():
    # oracle: E[cos theta_1] = int cos^2/2 = pi/4
    expect, _ = integrate.quad(lambda t: 0.5 * math.cos(t) ** 2,
                               -math.pi / 2, math.pi / 2)
    assert expect == pytest.approx(math.pi / 4, abs=1e-12)
    stream = Stream(12, 2)
    n = 100_000
    vals = np.array([math.cos(sample_angles(stream, 2)[0])
                     for _ in range(n)])
    sigma = vals.std() / math.sqrt(n)
    assert abs(vals.mean() - expect) < 3 * sigma + 1e-12


def test_upsilon_components_independent():
    law = Maxwellian(2, 1.0)
    stream = Stream(12, 3)
    n = 100_000
    rs = np.empty(n)
    ts = np.empty(n)
    for i in range(n):
        rs[i], th = sample_upsilon(stream, law)
        ts[i] = th[0]
    r_edges = np.quantile(rs, np.linspace(0, 1, 9))
    t_edges = np.quantile(ts, np.linspace(0, 1, 9))
    counts = np.histogram2d(rs, ts, bins=(r_edges, t_edges))[0]
    assert sps.chi2_contingency(counts).pvalue > 1e-3


def test_mean_inverse_speed_matches_quadrature():
    law = Maxwellian(2, 1.0)
    num, _ = integrate.quad(lambda r: r * law.profile(r), 0, np.inf)
    den, _ = integrate.quad(lambda r: r**2 * law.profile(r), 0, np.inf)
    expect = num / den
    stream = Stream(12, 4)
    draws = np.array([1.0 / law.draw_emission_speed(stream)
                      for _ in range(200_000)])
    assert draws.mean() == pytest.approx(expect, rel=0.02)


def test_truncated_power_equilibrium_speed():
    law = TruncatedPower(2, 1.0)
    stream = Stream(12, 5)
    draws = np.array([law.draw_equilibrium_speed(stream)
                      for _ in range(50_000)])
    # n - alpha = 1: the speed is uniform on (0, 1]
    assert sps.kstest(draws, lambda r: np.clip(r, 0, 1)).pvalue > 1e-3
    assert draws.max() <= 1.0


def test_truncated_power_emission_table():
    law = TruncatedPower(2, 1.0)
    stream = Stream(12, 6)
    draws = np.array([law.draw_emission_speed(stream)
                      for _ in range(50_000)])
    assert sps.kstest(draws, law.emission_speed_cdf).pvalue > 1e-3


def test_tabulated_emission_matches_reference():
    ref = Maxwellian(2, 1.0)
    grid = np.linspace(0.0, 9.0, 3000)
    law = TabulatedRadial(2, grid, [ref.profile(r) for r in grid])
    stream = Stream(12, 7)
    draws = np.array([law.draw_emission_speed(stream)
                      for _ in range(50_000)])
    assert sps.kstest(draws, sps.chi(df=3).cdf).pvalue > 1e-3


# -- the boundary update map -----------------------------------------------------

def test_post_collision_specular_branch():
    bp = bp_at(0.0)  # x=(1,0), normal (-1,0)
    out = post_collision(bp, vec(1, 1), Innovation(0.99, 2.0, (0.0,)), 0.5)
    assert np.allclose(out, [-1, 1])


def test_post_collision_diffuse_normal_emission():
    bp = bp_at(0.0)
    out = post_collision(bp, vec(1, 1), Innovation(0.01, 2.0, (0.0,)), 0.5)
    assert np.allclose(out, 2.0 * bp.normal)


def test_post_collision_always_diffuse_matches_density():
    # chi-square on a 20 x 20 speed x angle binning against the product
    # density h_R x h_Theta evaluated by quadrature
    law = Maxwellian(2, 1.0)
    bp = bp_at(0.7)
    stream = Stream(12, 8)
    n = 100_000
    speeds = np.empty(n)
    angles = np.empty(n)
    for i in range(n):
        inn = draw_innovation(stream, law)
        out = post_collision(bp, vec(0.3, -0.2), inn, 1.0)
        speeds[i] = math.sqrt(float(out @ out))
        angles[i] = math.asin(
            min(1.0, max(-1.0, float(out @ frame_at(bp)[1]) / speeds[i])))
    chi3 = sps.chi(df=3)
    s_edges = chi3.ppf(np.linspace(0, 1, 21))
    a_edges = np.arcsin(np.linspace(-1, 1, 21))
    counts = np.histogram2d(speeds, angles, bins=(s_edges, a_edges))[0]
    proba = np.diff(chi3.cdf(s_edges))
    probb = np.diff(0.5 * (np.sin(a_edges) + 1.0))
    probs = np.outer(proba, probb)
    stat = ((counts - n * probs) ** 2 / (n * probs)).sum()
    p = sps.chi2.sf(stat, counts.size - 1)
    assert p > 1e-3


def test_emit_velocity_outgoing(disk):
    law = Maxwellian(2, 1.0)
    stream = Stream(12, 9)
    for _ in range(200):
        bp = bp_at(2 * math.pi * stream.uniform())
        v, r, theta = emit_velocity(stream, law, bp)
        assert float(v @ bp.normal) > 0.0
        assert math.sqrt(float(v @ v)) == pytest.approx(r, rel=1e-12)
