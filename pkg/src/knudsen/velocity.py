"""Wall velocity laws and the diffuse-reflection machinery.

A wall law is a radially symmetric probability density M on R^n.  What the
dynamics actually consumes is derived from it:

* the flux constant ``c0`` (integral of M(u) (u.n)_+ over velocities),
* the re-emission speed density proportional to r^n M(r),
* the angular density on A = (-pi/2, pi/2) x [0, pi)^{n-2} proportional to
  cos(theta_1) |sin(theta_1)|^{n-2} sin(theta_2)^{n-3} ... ,
* the direction map taking an angle vector and a boundary frame to a unit
  vector u with u . n = cos(theta_1).

Speeds and angles are sampled exactly for the Maxwellian case (a chi
distribution with n+1 degrees of freedom times sqrt(theta)); other radial
profiles go through 4096-knot monotone-cubic inverse-CDF tables.
"""

from __future__ import annotations

import math
from collections import namedtuple

import numpy as np
from scipy import integrate, interpolate, stats

from .errors import NotInward, QuadratureNotConverged
from .geometry import BoundaryPoint, reflect_specular

# One boundary innovation: uniform mark, speed, angle vector.
Innovation = namedtuple("Innovation", ["u", "r", "theta"])

_MIN_SPEED = 1e-12
_MIN_COS = 1e-12


def unit_ball_volume(m: int) -> float:
    return math.pi ** (m / 2.0) / math.gamma(m / 2.0 + 1.0)


def sphere_area(n: int) -> float:
    """Surface measure of the unit sphere S^{n-1} in R^n."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def compute_c0(law: "VelocityLaw") -> float:
    """Flux constant: integral of M(u) (u.n)_+ du, any unit n.

    Radial symmetry reduces it to vol(B^{n-1}) * int r^n M(r) dr.
    """
    n = law.n
    val, err = integrate.quad(lambda s: s**n * law.profile(s),
                              0.0, law.speed_support, limit=200)
    if val <= 0.0 or err > 1e-7 * val:
        raise QuadratureNotConverged("flux constant integral did not converge")
    return unit_ball_volume(n - 1) * val


class VelocityLaw:
    """Base class; subclasses fix the radial profile and its samplers."""

    kind = "abstract"
    speed_support = math.inf  # upper end of the radial support

    def __init__(self, n: int):
        if n < 2:
            raise ValueError("dimension must be >= 2")
        self.n = n
        self._c0 = None

    def profile(self, r: float) -> float:
        """M evaluated at any velocity of norm r."""
        raise NotImplementedError

    def log_profile(self, r: float) -> float:
        """log M at norm r; -inf outside the support.  Kept separate so
        moment integrals can probe the origin without overflow."""
        p = self.profile(r)
        return math.log(p) if p > 0.0 else -math.inf

    @property
    def c0(self) -> float:
        if self._c0 is None:
            self._c0 = compute_c0(self)
        return self._c0

    # -- samplers ------------------------------------------------------------

    def draw_emission_speed(self, stream) -> float:
        """Speed with density proportional to r^n M(r)."""
        raise NotImplementedError

    def draw_velocity(self, stream) -> np.ndarray:
        """A velocity distributed according to M itself."""
        u = stream.normal_vec(self.n)
        u /= math.sqrt(float(u @ u))
        return self.draw_equilibrium_speed(stream) * u

    def draw_equilibrium_speed(self, stream) -> float:
        """Speed with density proportional to r^{n-1} M(r)."""
        raise NotImplementedError

    # -- reference CDFs (tests, KS statistics) -------------------------------

    def emission_speed_cdf(self, r):
        raise NotImplementedError

    def equilibrium_speed_cdf(self, r):
        raise NotImplementedError


class Maxwellian(VelocityLaw):
    """Gaussian wall law with temperature theta."""

    kind = "maxwellian"

    def __init__(self, n: int, theta: float = 1.0):
        super().__init__(n)
        if theta <= 0:
            raise ValueError("temperature must be positive")
        self.theta = float(theta)
        self._coef = (2.0 * math.pi * self.theta) ** (-n / 2.0)
        self._inv2t = 0.5 / self.theta
        self._sqrt_t = math.sqrt(self.theta)
        self._chi_shape = (n + 1) / 2.0

    def profile(self, r):
        return self._coef * math.exp(-r * r * self._inv2t)

    def log_profile(self, r):
        return math.log(self._coef) - r * r * self._inv2t

    def draw_emission_speed(self, stream):
        # chi(n+1) scaled by sqrt(theta); guard against denormal speeds.
        while True:
            r = self._sqrt_t * math.sqrt(2.0 * stream.standard_gamma(self._chi_shape))
            if r > _MIN_SPEED:
                return r

    def draw_equilibrium_speed(self, stream):
        while True:
            r = self._sqrt_t * math.sqrt(2.0 * stream.standard_gamma(self.n / 2.0))
            if r > _MIN_SPEED:
                return r

    def draw_velocity(self, stream):
        return self._sqrt_t * stream.normal_vec(self.n)

    def emission_speed_cdf(self, r):
        return stats.chi(df=self.n + 1, scale=self._sqrt_t).cdf(r)

    def equilibrium_speed_cdf(self, r):
        return stats.chi(df=self.n, scale=self._sqrt_t).cdf(r)


class TruncatedPower(VelocityLaw):
    """Density proportional to |v|^(-alpha) on {|v| <= cutoff}, alpha in (0, n).

    Used as an initial condition with mass concentrated near v = 0; the
    equilibrium-speed density is proportional to r^{n-1-alpha}.
    """

    kind = "truncated_power"

    def __init__(self, n: int, alpha: float, cutoff: float = 1.0):
        super().__init__(n)
        if not 0.0 < alpha < n:
            raise ValueError("alpha must lie in (0, n)")
        self.alpha = float(alpha)
        self.cutoff = float(cutoff)
        self.speed_support = self.cutoff
        self._norm = (n - alpha) / (sphere_area(n) * cutoff ** (n - alpha))
        self._table = None

    def profile(self, r):
        if r <= 0.0 or r > self.cutoff:
            return 0.0
        return self._norm * r ** (-self.alpha)

    def log_profile(self, r):
        if r <= 0.0 or r > self.cutoff:
            return -math.inf
        return math.log(self._norm) - self.alpha * math.log(r)

    def draw_emission_speed(self, stream):
        if self._table is None:
            self._table = _inverse_cdf_table(self, power=self.n)
        while True:
            r = float(self._table(stream.uniform()))
            if r > _MIN_SPEED:
                return r

    def draw_equilibrium_speed(self, stream):
        # Closed-form inverse CDF of r^{n-1-alpha} on (0, cutoff].
        while True:
            r = self.cutoff * stream.uniform() ** (1.0 / (self.n - self.alpha))
            if r > _MIN_SPEED:
                return r

    def emission_speed_cdf(self, r):
        p = self.n + 1 - self.alpha
        return np.clip(np.asarray(r) / self.cutoff, 0.0, 1.0) ** p

    def equilibrium_speed_cdf(self, r):
        p = self.n - self.alpha
        return np.clip(np.asarray(r) / self.cutoff, 0.0, 1.0) ** p


class TabulatedRadial(VelocityLaw):
    """Radial profile given by samples (r_i, M(r_i)); interpolated monotone-cubically.

    The profile is renormalized at construction so that M integrates to one.
    """

    kind = "tabulated"

    def __init__(self, n: int, grid, values):
        super().__init__(n)
        grid = np.asarray(grid, dtype=float)
        values = np.asarray(values, dtype=float)
        if grid.ndim != 1 or grid.shape != values.shape or len(grid) < 4:
            raise ValueError("need matching 1-D grids with >= 4 knots")
        if grid[0] > 0.0:
            grid = np.concatenate([[0.0], grid])
            values = np.concatenate([[values[0]], values])
        self.speed_support = float(grid[-1])
        self._interp = interpolate.PchipInterpolator(grid, values, extrapolate=False)
        mass = sphere_area(n) * integrate.quad(
            lambda s: s ** (n - 1) * float(self._interp(s)),
            0.0, self.speed_support, limit=200)[0]
        self._scale = 1.0 / mass
        self._emission = None
        self._equilibrium = None

    def profile(self, r):
        if r < 0.0 or r > self.speed_support:
            return 0.0
        v = self._interp(r)
        return float(v) * self._scale if np.isfinite(v) else 0.0

    def draw_emission_speed(self, stream):
        if self._emission is None:
            self._emission = _inverse_cdf_table(self, power=self.n)
        while True:
            r = float(self._emission(stream.uniform()))
            if r > _MIN_SPEED:
                return r

    def draw_equilibrium_speed(self, stream):
        if self._equilibrium is None:
            self._equilibrium = _inverse_cdf_table(self, power=self.n - 1)
        while True:
            r = float(self._equilibrium(stream.uniform()))
            if r > _MIN_SPEED:
                return r

    def emission_speed_cdf(self, r):
        return _numeric_cdf(self, self.n)(r)

    def equilibrium_speed_cdf(self, r):
        return _numeric_cdf(self, self.n - 1)(r)


def _speed_density_knots(law, power, knots=4097):
    hi = law.speed_support if math.isfinite(law.speed_support) else None
    if hi is None:
        # Cover essentially all Maxwellian-like mass.
        hi = 1.0
        while law.profile(hi) * hi**power > 1e-300 and hi < 1e6:
            hi *= 2.0
    rs = np.linspace(0.0, hi, knots)
    dens = np.array([r**power * law.profile(r) for r in rs])
    return rs, dens


def _inverse_cdf_table(law, power):
    rs, dens = _speed_density_knots(law, power)
    cdf = integrate.cumulative_trapezoid(dens, rs, initial=0.0)
    cdf /= cdf[-1]
    # Collapse flat stretches so the inverse interpolant stays monotone.
    keep = np.concatenate([[True], np.diff(cdf) > 0.0])
    return interpolate.PchipInterpolator(cdf[keep], rs[keep])


def _numeric_cdf(law, power):
    rs, dens = _speed_density_knots(law, power)
    cdf = integrate.cumulative_trapezoid(dens, rs, initial=0.0)
    cdf /= cdf[-1]
    f = interpolate.interp1d(rs, cdf, bounds_error=False, fill_value=(0.0, 1.0))
    return lambda r: np.asarray(f(r), dtype=float)


# ---------------------------------------------------------------------------
# Boundary frames and the angular machinery.


def frame_at(bp: BoundaryPoint) -> np.ndarray:
    """Deterministic orthonormal frame with the inward normal first.

    Rows are (n_x, f_2, ..., f_n): the canonical basis vector least aligned
    with n_x is orthogonalized first, then the remaining ones in index
    order.  Identical inputs give bitwise-identical frames.
    """
    if bp._frame is not None:
        return bp._frame
    n_vec = bp.normal
    dim = n_vec.shape[0]
    if dim == 2:
        n0, n1 = float(n_vec[0]), float(n_vec[1])
        if abs(n0) <= abs(n1):
            t0, t1 = 1.0 - n0 * n0, -n0 * n1
        else:
            t0, t1 = -n1 * n0, 1.0 - n1 * n1
        norm = math.sqrt(t0 * t0 + t1 * t1)
        frame = np.array([[n0, n1], [t0 / norm, t1 / norm]])
    else:
        k = int(np.argmin(np.abs(n_vec)))
        order = [k] + [j for j in range(dim) if j != k]
        rows = [n_vec]
        for j in order:
            e = np.zeros(dim)
            e[j] = 1.0
            for f in rows:
                e = e - float(e @ f) * f
            norm = math.sqrt(float(e @ e))
            if norm > 1e-12:
                rows.append(e / norm)
            if len(rows) == dim:
                break
        frame = np.array(rows)
    bp._frame = frame
    return frame


def vartheta(bp: BoundaryPoint, theta) -> np.ndarray:
    """Unit direction with normal component cos(theta_1).

    ``theta`` has length n-1: theta_1 in (-pi/2, pi/2) is the signed polar
    angle from the inward normal; the rest are spherical angles in [0, pi)
    for the tangential part.
    """
    frame = frame_at(bp)
    dim = bp.normal.shape[0]
    t1 = theta[0]
    c1, s1 = math.cos(t1), math.sin(t1)
    if dim == 2:
        f = frame
        return np.array([c1 * f[0, 0] + s1 * f[1, 0], c1 * f[0, 1] + s1 * f[1, 1]])
    coeff = np.empty(dim)
    coeff[0] = c1
    prod = s1
    for j in range(1, dim - 1):
        cj, sj = math.cos(theta[j]), math.sin(theta[j])
        coeff[j] = prod * cj
        prod *= sj
    coeff[dim - 1] = prod
    return coeff @ frame


def vartheta_inverse(bp: BoundaryPoint, u: np.ndarray):
    """Angle vector reproducing the inward unit direction u."""
    frame = frame_at(bp)
    dim = bp.normal.shape[0]
    c1 = float(u @ frame[0])
    if c1 <= 0.0:
        raise NotInward("direction must have a positive normal component")
    if dim == 2:
        s1 = float(u @ frame[1])
        return (math.atan2(s1, c1),)
    a = frame[1:] @ u
    w = math.sqrt(float(a @ a))
    if w < 1e-300:
        return (0.0,) * (dim - 1)
    sign = 1.0
    if a[-1] < 0.0:
        sign, a = -1.0, -a
    theta = [sign * math.atan2(w, c1)]
    m = dim - 1
    for j in range(m - 2):
        tail = math.sqrt(float(a[j + 1:] @ a[j + 1:]))
        theta.append(math.atan2(tail, float(a[j])))
    theta.append(math.atan2(float(a[-1]), float(a[-2])))
    return tuple(theta)


def sample_angles(stream, n: int):
    """Angle vector with the cosine-weighted hemisphere density."""
    while True:
        if n == 2:
            s = 2.0 * stream.uniform() - 1.0
        else:
            mag = stream.uniform() ** (1.0 / (n - 1))
            s = mag if stream.uniform() < 0.5 else -mag
        if 1.0 - s * s > _MIN_COS * _MIN_COS:
            t1 = math.asin(s)
            break
    if n == 2:
        return (t1,)
    theta = [t1]
    for j in range(1, n - 2):
        k = n - 1 - j  # sin^k density on (0, pi)
        c = 2.0 * stream.beta((k + 1) / 2.0, (k + 1) / 2.0) - 1.0
        theta.append(math.acos(c))
    theta.append(math.pi * stream.uniform())
    return tuple(theta)


def sample_upsilon(stream, law: VelocityLaw):
    """Independent (speed, angles) pair for one diffuse re-emission."""
    r = law.draw_emission_speed(stream)
    theta = sample_angles(stream, law.n)
    return r, theta


def draw_innovation(stream, law: VelocityLaw) -> Innovation:
    """One full boundary innovation (uniform mark, speed, angles)."""
    u = stream.uniform()
    r, theta = sample_upsilon(stream, law)
    return Innovation(u, r, theta)


def emit_velocity(stream, law: VelocityLaw, bp: BoundaryPoint):
    """Diffuse re-emission velocity at bp; returns (v, r, theta)."""
    r, theta = sample_upsilon(stream, law)
    return r * vartheta(bp, theta), r, theta


def post_collision(bp: BoundaryPoint, v_in: np.ndarray, innovation: Innovation,
                   alpha_at_x: float) -> np.ndarray:
    """Maxwell boundary update: specular above the mark, diffuse below."""
    if innovation.u > alpha_at_x:
        return reflect_specular(bp, v_in)
    return innovation.r * vartheta(bp, innovation.theta)
