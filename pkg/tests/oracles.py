"""Independent numerical oracles shared by the unit and acceptance tests.

Everything here computes expectations straight from the density formulas
with grid or Gauss quadrature, bypassing the samplers and ray tracers
under test.
"""

import math

import numpy as np


def disk_mu_grid(law, anchor_x, anchor_n, taus, phis, shift=0.0,
                 radius=1.0, center=(0.0, 0.0)):
    """Hitting density on a circle boundary, vectorized over a grid.

    Returns the matrix mu(tau_i - shift, z(phi_j)) for z on the circle of
    the given radius; the boundary measure is radius * dphi.
    """
    center = np.asarray(center, dtype=float)
    z = center + radius * np.stack([np.cos(phis), np.sin(phis)], axis=1)
    nz = (center - z) / radius
    dvec = z - np.asarray(anchor_x)[None, :]
    dn_x = np.abs(dvec @ np.asarray(anchor_n))
    dn_z = np.abs(np.einsum("ij,ij->i", dvec, nz))
    dist = np.sqrt(np.einsum("ij,ij->i", dvec, dvec))
    T = np.asarray(taus)[:, None] - shift
    valid = T > 0.0
    T_safe = np.where(valid, T, 1.0)
    r = dist[None, :] / T_safe
    prof = np.array([[law.profile(val) for val in row] for row in r])
    out = (1.0 / law.c0) * prof * T_safe ** -(law.n + 2) \
        * dn_x[None, :] * dn_z[None, :]
    return np.where(valid, out, 0.0)


def disk_overlap_integral(law, x0, n0, xt, nt, lag, nphi=2000,
                          tau_blocks=((1e-9, 0.01, 200), (0.01, 0.5, 2000),
                                      (0.5, 5.0, 6000), (5.0, 50.0, 6000),
                                      (50.0, 1500.0, 6000))):
    """Mass of min(mu_x0(tau, z), mu_xt(tau - lag, z)) on the unit circle."""
    phis = (np.arange(nphi) + 0.5) * 2 * math.pi / nphi
    dphi = 2 * math.pi / nphi
    total = 0.0
    for lo, hi, npts in tau_blocks:
        edges = np.linspace(lo, hi, npts + 1)
        mid = 0.5 * (edges[1:] + edges[:-1])
        dt = np.diff(edges)
        g0 = disk_mu_grid(law, x0, n0, mid, phis)
        gt = disk_mu_grid(law, xt, nt, mid, phis, shift=lag)
        total += float(((np.minimum(g0, gt).sum(axis=1) * dphi) * dt).sum())
    return total


def time_quad_nodes(lo, hi, nodes, weights):
    """Gauss nodes/weights for a flight-time bin.

    Unbounded bins are mapped through u = 1/t, which turns the t^-(n+2)
    tail into a polynomial-like integrand a fixed-order rule resolves.
    """
    if np.isfinite(hi):
        tm = 0.5 * (lo + hi) + 0.5 * (hi - lo) * nodes
        tw = (0.5 * (hi - lo)) * weights
        return tm, tw
    u_hi = 1.0 / lo
    um = 0.5 * u_hi + 0.5 * u_hi * nodes
    uw = (0.5 * u_hi) * weights
    return 1.0 / um, uw / (um * um)


def gauss_cell_masses(mu, domain, t_edges, a_edges, boundary_radius,
                      center=(0.0, 0.0), order=24):
    """Quadrature masses of a hitting density over (time x angle) cells on
    one circular boundary component."""
    nodes, weights = np.polynomial.legendre.leggauss(order)
    center = np.asarray(center, dtype=float)
    probs = np.empty((len(t_edges) - 1, len(a_edges) - 1))
    for i in range(len(t_edges) - 1):
        tm, tw = time_quad_nodes(t_edges[i], t_edges[i + 1], nodes, weights)
        for j in range(len(a_edges) - 1):
            am = 0.5 * (a_edges[j] + a_edges[j + 1]) \
                + 0.5 * (a_edges[j + 1] - a_edges[j]) * nodes
            aw = 0.5 * (a_edges[j + 1] - a_edges[j]) * weights
            acc = 0.0
            for a_val, a_w in zip(am, aw):
                zx = center + boundary_radius * np.array(
                    [math.cos(a_val), math.sin(a_val)])
                z = domain.boundary_point(zx)
                acc += a_w * boundary_radius * sum(
                    t_w * mu(t_val, z) for t_val, t_w in zip(tm, tw))
            probs[i, j] = acc
    return probs


def pareto_tail_samples(stream, n, exponent=2.0):
    """Exact Pareto(exponent) variates with survival t^-exponent, t >= 1."""
    u = stream.uniform_vec(n)
    return (1.0 - u) ** (-1.0 / exponent)
