"""Estimators and hypothesis tests for the simulation experiments.

Survival curves of merge times are the primary evidence for the
convergence rate (binning-free); histogram total-variation distances
corroborate them.  Everything here is a pure function of the sample
multiset, so results do not depend on worker scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy import stats as sps

from .errors import DegenerateWindow, MomentDiverges, TooFewSamples


@dataclass(frozen=True)
class SurvivalCurve:
    """Empirical tail of the merge time on a log-spaced grid."""

    grid: np.ndarray
    survival: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    n_pairs: int
    censor_fraction: float
    t_max: float


@dataclass(frozen=True)
class RateFit:
    window: tuple[float, float]
    slope: float
    intercept: float
    slope_stderr: float
    r_squared: float
    n_points: int


def make_grid(t_min: float, t_max: float, per_decade: int = 40) -> np.ndarray:
    decades = math.log10(t_max / t_min)
    count = max(2, int(round(decades * per_decade)) + 1)
    return np.geomspace(t_min, t_max, count)


def survival_curve(taus, censored, grid, t_max: float,
                   z: float = 1.96) -> SurvivalCurve:
    """Tail estimate with Wilson intervals.

    Censored pairs never merged before t_max, so they contribute survival
    one on the whole grid (which must not extend past t_max).
    """
    taus = np.asarray(taus, dtype=float)
    censored = np.asarray(censored, dtype=bool)
    n = len(taus)
    if n < 100:
        raise TooFewSamples(f"need >= 100 pairs, got {n}")
    grid = np.asarray(grid, dtype=float)
    if np.any(grid > t_max):
        grid = grid[grid <= t_max]
    merged_times = np.sort(taus[~censored])
    # censored pairs outlive every grid point by construction
    k = n - np.searchsorted(merged_times, grid, side="right")
    p = k / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return SurvivalCurve(grid, p, np.maximum(center - half, 0.0),
                         np.minimum(center + half, 1.0), n,
                         float(censored.mean()), t_max)


def fit_tail_slope(curve: SurvivalCurve, window) -> RateFit:
    """Weighted least squares of log survival against log time.

    Weights come from the binomial variance of the log-transformed tail
    (delta method, half-count smoothed so boundary values stay finite).
    """
    lo, hi = window
    mask = (curve.grid >= lo) & (curve.grid <= hi) & (curve.survival > 0)
    if mask.sum() < 8:
        raise DegenerateWindow(
            f"only {int(mask.sum())} usable grid points in {window}")
    t = curve.grid[mask]
    p = curve.survival[mask]
    n = curve.n_pairs
    x = np.log(t)
    y = np.log(p)
    var = (1.0 - p + 0.5 / n) / (n * p)
    w = 1.0 / var
    sw = w.sum()
    xb = (w * x).sum() / sw
    yb = (w * y).sum() / sw
    sxx = (w * (x - xb) ** 2).sum()
    slope = (w * (x - xb) * (y - yb)).sum() / sxx
    intercept = yb - slope * xb
    resid = y - intercept - slope * x
    ss_res = (w * resid**2).sum()
    ss_tot = (w * (y - yb) ** 2).sum()
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return RateFit((float(lo), float(hi)), float(slope), float(intercept),
                   float(math.sqrt(1.0 / sxx)), float(r2), int(mask.sum()))


# ---------------------------------------------------------------------------
# Histogram total variation.


def tv_histogram(pos_a, vel_a, pos_b, vel_b,
                 binning=(4, 10, 8)) -> float:
    """Half L1 distance between phase-space histograms.

    ``binning`` = (position bins per axis, speed bins, angle bins); speed
    edges are pooled-sample quantiles so both ensembles share them.
    """
    idx_a, idx_b, size = _phase_bins(pos_a, vel_a, pos_b, vel_b, binning)
    ha = np.bincount(idx_a, minlength=size) / len(idx_a)
    hb = np.bincount(idx_b, minlength=size) / len(idx_b)
    return 0.5 * float(np.abs(ha - hb).sum())


def tv_histogram_sweep(pos_a, vel_a, pos_b, vel_b,
                       binnings=((3, 8, 6), (4, 10, 8), (5, 12, 10))):
    """The estimate across several binnings (sensitivity report)."""
    return [tv_histogram(pos_a, vel_a, pos_b, vel_b, b) for b in binnings]


def _phase_bins(pos_a, vel_a, pos_b, vel_b, binning):
    pb, sb, ab = binning
    pos_a, vel_a = np.asarray(pos_a), np.asarray(vel_a)
    pos_b, vel_b = np.asarray(pos_b), np.asarray(vel_b)
    pos_all = np.vstack([pos_a, pos_b])
    vel_all = np.vstack([vel_a, vel_b])
    lo = pos_all.min(axis=0)
    hi = pos_all.max(axis=0) * (1 + 1e-12) + 1e-300
    dim = pos_all.shape[1]
    speed_all = np.sqrt(np.einsum("ij,ij->i", vel_all, vel_all))
    s_edges = np.quantile(speed_all, np.linspace(0, 1, sb + 1))
    s_edges[-1] = np.inf

    def cell(pos, vel):
        idx = np.zeros(len(pos), dtype=np.int64)
        for j in range(dim):
            c = np.clip(((pos[:, j] - lo[j]) / (hi[j] - lo[j]) * pb)
                        .astype(np.int64), 0, pb - 1)
            idx = idx * pb + c
        speed = np.sqrt(np.einsum("ij,ij->i", vel, vel))
        idx = idx * sb + np.clip(np.searchsorted(s_edges, speed,
                                                 side="right") - 1, 0, sb - 1)
        ang = np.arctan2(vel[:, 1], vel[:, 0])
        c = np.clip(((ang + np.pi) / (2 * np.pi) * ab).astype(np.int64),
                    0, ab - 1)
        return idx * ab + c

    size = pb**dim * sb * ab
    return cell(pos_a, vel_a), cell(pos_b, vel_b), size


# ---------------------------------------------------------------------------
# Moment gate for the rate hypothesis.


@dataclass(frozen=True)
class RateFunction:
    """Rate families supported by the moment gate.

    kind "power": (1+t)^d; kind "power_log": (1+t)^n / (1 + log^2(1+t));
    kind "one": constant 1.
    """

    kind: str
    exponent: float = 1.0

    def __call__(self, t):
        if self.kind == "one":
            return np.ones_like(np.asarray(t, dtype=float)) \
                if np.ndim(t) else 1.0
        if self.kind == "power":
            return (1.0 + t) ** self.exponent
        if self.kind == "power_log":
            lt = np.log1p(t)
            return (1.0 + t) ** self.exponent / (1.0 + lt * lt)
        raise ValueError(f"unknown rate kind {self.kind!r}")

    def log_eval(self, t: float) -> float:
        """log r(t), overflow-free for huge arguments."""
        if self.kind == "one":
            return 0.0
        lt = math.log1p(t)
        if self.kind == "power":
            return self.exponent * lt
        if self.kind == "power_log":
            return self.exponent * lt - math.log1p(lt * lt)
        raise ValueError(f"unknown rate kind {self.kind!r}")


def moment_C0(rate: RateFunction, initial_law, wall_law, domain) -> float:
    """Largest of the three moment integrals the rate hypothesis needs.

    Integrates rate(d(D)/speed) against the initial speed law, the
    equilibrium speed law, and the re-emission speed law; raises
    MomentDiverges when the integrand fails to be summable near zero
    speed.
    """
    d = domain.diameter
    vals = [
        _speed_moment(rate, d, _initial_speed_pdf(initial_law, wall_law),
                      _initial_support(initial_law, wall_law)),
        _speed_moment(rate, d, _equilibrium_speed_pdf(wall_law),
                      wall_law.speed_support),
        _speed_moment(rate, d, _emission_speed_pdf(wall_law),
                      wall_law.speed_support),
    ]
    return max(vals)


def _initial_speed_pdf(initial_law, wall_law):
    kind = initial_law.velocity_kind
    if kind == "point":
        v0 = np.asarray(initial_law.v0, dtype=float)
        s0 = math.sqrt(float(v0 @ v0))
        return ("point", s0)
    law = wall_law if kind == "equilibrium" else initial_law.velocity_law
    return _speed_pdf_pair(law, law.n - 1)


def _initial_support(initial_law, wall_law):
    if initial_law.velocity_kind == "point":
        return math.inf
    law = wall_law if initial_law.velocity_kind == "equilibrium" \
        else initial_law.velocity_law
    return law.speed_support


def _equilibrium_speed_pdf(law):
    return _speed_pdf_pair(law, law.n - 1)


def _emission_speed_pdf(law):
    return _speed_pdf_pair(law, law.n)


def _speed_pdf_pair(law, power):
    """(pdf, log pdf) of the normalized speed density ~ s^power M(s)."""
    from .velocity import sphere_area
    if power == law.n - 1:
        log_norm = math.log(sphere_area(law.n))
    else:
        norm, _ = integrate.quad(lambda s: s**power * law.profile(s), 0.0,
                                 law.speed_support, limit=200)
        log_norm = -math.log(norm)

    def pdf(s):
        return math.exp(log_norm) * s**power * law.profile(s)

    def log_pdf(s):
        if s <= 0.0:
            return -math.inf
        return log_norm + power * math.log(s) + law.log_profile(s)

    return pdf, log_pdf


def _speed_moment(rate, diameter, pdf, support):
    if pdf[0] == "point":
        s0 = pdf[1]
        if s0 <= 0.0:
            raise MomentDiverges("point mass at zero velocity")
        return float(rate(diameter / s0))
    pdf_fn, log_pdf = pdf

    def f(s):
        return float(rate(diameter / s)) * pdf_fn(s)

    def window_integrand(y):
        # log-space form survives the huge rate values near zero speed
        s = math.exp(y)
        ell = rate.log_eval(diameter / s) + log_pdf(s) + y
        return math.exp(ell) if ell < 700.0 else math.inf

    hi = support if math.isfinite(support) else np.inf
    s_knee = math.exp(-10.0)
    main, _ = integrate.quad(f, s_knee, hi, limit=400)
    # Doubling log-space windows probe the behavior at zero speed: the
    # window masses of a summable integrand decay geometrically (or
    # faster), a divergent one keeps growing with the window width.
    pieces = []
    for k in range(6):
        y_hi, y_lo = -10.0 * 2**k, -10.0 * 2**(k + 1)
        p, _ = integrate.quad(window_integrand, y_lo, y_hi, limit=100)
        pieces.append(max(p, 0.0))
    total = main + sum(pieces)
    if not math.isfinite(total):
        raise MomentDiverges(
            "moment integrand is not summable near zero speed")
    last = pieces[-1]
    if last <= 1e-14 * max(total, 1e-300):
        return total
    ratios = [pieces[k + 1] / pieces[k]
              for k in range(len(pieces) - 1) if pieces[k] > 0]
    tail_ratio = ratios[-1] if ratios else 0.0
    if tail_ratio >= 0.9:
        raise MomentDiverges(
            "moment integrand is not summable near zero speed")
    return total + last * tail_ratio / (1.0 - tail_ratio)


# ---------------------------------------------------------------------------
# Hypothesis-test wrappers.


def ks_test(samples, cdf) -> float:
    """One-sample Kolmogorov-Smirnov p-value against a reference CDF."""
    samples = np.asarray(samples, dtype=float)
    if len(samples) < 1000:
        raise TooFewSamples(f"KS test needs >= 1000 samples, got {len(samples)}")
    return float(sps.kstest(samples, cdf).pvalue)


def ks_two_sample(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if min(len(a), len(b)) < 1000:
        raise TooFewSamples("two-sample KS needs >= 1000 samples per side")
    return float(sps.ks_2samp(a, b).pvalue)


def chi2_test(counts, expected_probs) -> float:
    """Goodness-of-fit p-value; adjacent bins below 5 expected are merged."""
    counts = np.asarray(counts, dtype=float).ravel()
    probs = np.asarray(expected_probs, dtype=float).ravel()
    n = counts.sum()
    if n < 1000:
        raise TooFewSamples("chi-square test needs >= 1000 observations")
    probs = probs / probs.sum()
    merged_c, merged_p = _merge_small_bins(counts, probs * n)
    stat = float(((merged_c - merged_p) ** 2 / merged_p).sum())
    dof = len(merged_c) - 1
    if dof <= 0:
        return 1.0
    return float(sps.chi2.sf(stat, dof))


def _merge_small_bins(counts, expected, floor: float = 5.0):
    out_c, out_p = [], []
    acc_c = acc_p = 0.0
    for c, e in zip(counts, expected):
        acc_c += c
        acc_p += e
        if acc_p >= floor:
            out_c.append(acc_c)
            out_p.append(acc_p)
            acc_c = acc_p = 0.0
    if acc_p > 0:
        if out_p:
            out_c[-1] += acc_c
            out_p[-1] += acc_p
        else:
            out_c.append(acc_c)
            out_p.append(acc_p)
    return np.array(out_c), np.array(out_p)


def uniform_position_probs(domain, bins_per_axis: int,
                           subgrid: int = 128) -> np.ndarray:
    """Cell probabilities of the uniform law on D over a bounding-box grid.

    Midpoint quadrature with ``subgrid^dim`` points per cell; accurate to
    well below the statistical resolution of the chi-square tests using it.
    """
    lo, hi = domain.bounds()
    if len(lo) != 2:
        raise ValueError("positional grid implemented for dimension 2")
    edges_x = np.linspace(lo[0], hi[0], bins_per_axis + 1)
    edges_y = np.linspace(lo[1], hi[1], bins_per_axis + 1)
    probs = np.zeros((bins_per_axis, bins_per_axis))
    for i in range(bins_per_axis):
        xs = np.linspace(edges_x[i], edges_x[i + 1], subgrid + 1)[:-1] \
            + 0.5 * (edges_x[i + 1] - edges_x[i]) / subgrid
        for j in range(bins_per_axis):
            ys = np.linspace(edges_y[j], edges_y[j + 1], subgrid + 1)[:-1] \
                + 0.5 * (edges_y[j + 1] - edges_y[j]) / subgrid
            gx, gy = np.meshgrid(xs, ys, indexing="ij")
            pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
            probs[i, j] = np.count_nonzero(domain.phi_many(pts) < 0.0)
    total = probs.sum()
    return (probs / total).ravel()


def position_cell_index(pos, domain, bins_per_axis: int) -> np.ndarray:
    """Flattened grid-cell index of each position (same grid as above)."""
    lo, hi = domain.bounds()
    pos = np.asarray(pos)
    ix = np.clip(((pos[:, 0] - lo[0]) / (hi[0] - lo[0]) * bins_per_axis)
                 .astype(np.int64), 0, bins_per_axis - 1)
    iy = np.clip(((pos[:, 1] - lo[1]) / (hi[1] - lo[1]) * bins_per_axis)
                 .astype(np.int64), 0, bins_per_axis - 1)
    return ix * bins_per_axis + iy
