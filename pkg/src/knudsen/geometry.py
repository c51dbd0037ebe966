"""Bounded C2 domains and the ray/boundary primitives built on them.

A domain is described by a level set ``phi`` that is negative inside,
positive outside, with a nonvanishing gradient near the zero set.  The
inward unit normal at a boundary point is ``-grad phi / |grad phi|``.
Balls, ellipsoids and spherical shells ("annulus") get analytic ray
intersections; arbitrary smooth level sets fall back to marching plus a
safeguarded Newton/bisection root polish.

All objects here are immutable after construction and every operation is
pure, so geometry values can be shared freely between worker processes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonPositiveSpeed, PatchSearchFailed, RootNotBracketed

# Fractional part of the golden ratio; drives the low-discrepancy angle
# sequences used for deterministic boundary sampling.
_GOLDEN = 0.6180339887498949


class BoundaryPoint:
    """A point on the boundary together with its unit inward normal."""

    __slots__ = ("x", "normal", "_frame")

    def __init__(self, x: np.ndarray, normal: np.ndarray):
        self.x = x
        self.normal = normal
        self._frame = None

    def __repr__(self):  # pragma: no cover
        return f"BoundaryPoint(x={self.x!r}, normal={self.normal!r})"


@dataclass(frozen=True)
class BoundaryCap:
    """Ball on the boundary around a center point.

    The radius is geodesic (arclength within the boundary) where the
    domain provides that metric, chordal otherwise; geodesic caps never
    leak across disconnected boundary components.
    """

    center: np.ndarray
    radius: float
    metric: str = "chordal"

    def distance(self, x: np.ndarray, domain=None) -> float:
        if self.metric == "geodesic" and domain is not None:
            d = domain.boundary_geodesic(self.center, x)
            if d is not None:
                return d
        d = x - self.center
        return math.sqrt(float(d @ d))

    def contains(self, x: np.ndarray, domain=None) -> bool:
        return self.distance(x, domain) <= self.radius


@dataclass(frozen=True)
class PatchReport:
    """Result of the boundary-patch search.

    ``whole_boundary`` marks convex domains where any boundary point sees
    any other; otherwise ``patch_a``/``patch_b`` are two caps whose sampled
    cross pairs all communicate and ``min_distance`` separates them.
    """

    whole_boundary: bool
    patch_a: BoundaryCap | None = None
    patch_b: BoundaryCap | None = None
    min_distance: float = 0.0
    pairs_checked: int = 0


def reflect_specular(bp: BoundaryPoint, v: np.ndarray) -> np.ndarray:
    """Mirror v across the tangent plane at bp, preserving its norm."""
    n = bp.normal
    return v - (2.0 * float(v @ n)) * n


class DomainGeometry:
    """Common interface for all supported domain kinds."""

    kind = "abstract"
    convex: bool | None = None

    def __init__(self, dim: int, diameter: float):
        if dim < 2:
            raise ValueError("dimension must be >= 2")
        self.dim = dim
        self.diameter = diameter
        self.boundary_tolerance = 1e-9 * diameter

    # -- level set ---------------------------------------------------------

    def phi(self, x: np.ndarray) -> float:
        raise NotImplementedError

    def phi_many(self, pts: np.ndarray) -> np.ndarray:
        return np.array([self.phi(p) for p in pts])

    def grad_phi(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def inward_normal(self, x: np.ndarray) -> np.ndarray:
        g = self.grad_phi(x)
        return -g / math.sqrt(float(g @ g))

    def on_boundary(self, x: np.ndarray) -> bool:
        return abs(self.phi(x)) <= self.boundary_tolerance

    def contains(self, x: np.ndarray) -> bool:
        return self.phi(x) <= self.boundary_tolerance

    def boundary_point(self, x: np.ndarray) -> BoundaryPoint:
        return BoundaryPoint(x, self.inward_normal(x))

    # -- sampling ----------------------------------------------------------

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def sample_interior(self, rng) -> np.ndarray:
        """Uniform point of D via rejection from the bounding box."""
        lo, hi = self.bounds()
        span = hi - lo
        while True:
            x = lo + span * rng.uniform_vec(self.dim)
            if self.phi(x) < -self.boundary_tolerance:
                return x

    def boundary_samples(self, count: int) -> list[BoundaryPoint]:
        """Deterministic low-discrepancy points on the boundary."""
        raise NotImplementedError

    # -- ray tracing -------------------------------------------------------

    def hit(self, x: np.ndarray, v: np.ndarray) -> tuple[float, BoundaryPoint]:
        """First boundary crossing (time, point) of the ray t -> x + t v.

        Pairs already on the boundary with an incoming or tangential
        velocity get (0, x): nothing travels.
        """
        raise NotImplementedError

    def hitting_time(self, x: np.ndarray, v: np.ndarray) -> float:
        return self.hit(x, v)[0]

    def hitting_point(self, x: np.ndarray, v: np.ndarray) -> BoundaryPoint:
        return self.hit(x, v)[1]

    # -- boundary metric -----------------------------------------------------

    def boundary_geodesic(self, x: np.ndarray, y: np.ndarray) -> float | None:
        """Arclength between boundary points, where available.

        None means the metric is not implemented for this kind (callers
        fall back to chordal distance); inf separates distinct boundary
        components.
        """
        return None


class Ball(DomainGeometry):
    kind = "ball"
    convex = True

    def __init__(self, center, radius: float, dim: int | None = None):
        center = np.asarray(center, dtype=float)
        super().__init__(dim or center.shape[0], 2.0 * radius)
        self.center = center
        self.radius = float(radius)

    def phi(self, x):
        d = x - self.center
        return math.sqrt(float(d @ d)) - self.radius

    def phi_many(self, pts):
        d = pts - self.center
        return np.sqrt(np.einsum("ij,ij->i", d, d)) - self.radius

    def grad_phi(self, x):
        d = x - self.center
        return d / math.sqrt(float(d @ d))

    def bounds(self):
        r = self.radius
        return self.center - r, self.center + r

    def sample_interior(self, rng):
        u = rng.normal_vec(self.dim)
        u /= math.sqrt(float(u @ u))
        r = self.radius * rng.uniform() ** (1.0 / self.dim)
        return self.center + r * u

    def boundary_samples(self, count):
        pts = _sphere_sequence(self.dim, count)
        out = []
        for p in pts:
            x = self.center + self.radius * p
            out.append(BoundaryPoint(x, -p))
        return out

    def boundary_geodesic(self, x, y):
        dx = x - self.center
        dy = y - self.center
        c = float(dx @ dy) / (self.radius * self.radius)
        return self.radius * math.acos(min(1.0, max(-1.0, c)))

    def hit(self, x, v):
        vv = float(v @ v)
        if vv <= 0.0:
            raise NonPositiveSpeed("hitting time requires a nonzero velocity")
        d = x - self.center
        b = float(d @ v)
        c2 = float(d @ d) - self.radius * self.radius
        if c2 > -2.0 * self.radius * self.boundary_tolerance and b >= 0.0:
            # On the boundary (or an outward whisker) moving outward or
            # tangentially: incoming set, zero flight.
            return 0.0, BoundaryPoint(x, -d / math.sqrt(float(d @ d)))
        disc = b * b - vv * c2
        sq = math.sqrt(disc)
        s = (sq - b) / vv if b <= 0.0 else -c2 / (b + sq)
        y = x + s * v
        dy = y - self.center
        y = self.center + dy * (self.radius / math.sqrt(float(dy @ dy)))
        return s, BoundaryPoint(y, (self.center - y) / self.radius)


class Ellipsoid(DomainGeometry):
    kind = "ellipsoid"
    convex = True

    def __init__(self, center, semi_axes):
        center = np.asarray(center, dtype=float)
        axes = np.asarray(semi_axes, dtype=float)
        if np.any(axes <= 0):
            raise ValueError("semi-axes must be positive")
        super().__init__(center.shape[0], 2.0 * float(axes.max()))
        self.center = center
        self.axes = axes
        self._scale = float(axes.min())

    def phi(self, x):
        y = (x - self.center) / self.axes
        return (math.sqrt(float(y @ y)) - 1.0) * self._scale

    def phi_many(self, pts):
        y = (pts - self.center) / self.axes
        return (np.sqrt(np.einsum("ij,ij->i", y, y)) - 1.0) * self._scale

    def grad_phi(self, x):
        y = (x - self.center) / self.axes
        r = math.sqrt(float(y @ y))
        return (y / self.axes) * (self._scale / r)

    def bounds(self):
        return self.center - self.axes, self.center + self.axes

    def sample_interior(self, rng):
        u = rng.normal_vec(self.dim)
        u /= math.sqrt(float(u @ u))
        r = rng.uniform() ** (1.0 / self.dim)
        return self.center + self.axes * (r * u)

    def boundary_samples(self, count):
        pts = _sphere_sequence(self.dim, count)
        out = []
        for p in pts:
            x = self.center + self.axes * p
            out.append(self.boundary_point(x))
        return out

    def hit(self, x, v):
        vv0 = float(v @ v)
        if vv0 <= 0.0:
            raise NonPositiveSpeed("hitting time requires a nonzero velocity")
        y = (x - self.center) / self.axes
        u = v / self.axes
        vv = float(u @ u)
        b = float(y @ u)
        c2 = float(y @ y) - 1.0
        if c2 > -4.0 * self.boundary_tolerance / self._scale and b >= 0.0:
            return 0.0, self.boundary_point(x)
        disc = b * b - vv * c2
        sq = math.sqrt(disc)
        s = (sq - b) / vv if b <= 0.0 else -c2 / (b + sq)
        # One Newton step on the ray keeps the hit on the level set.
        yh = y + s * u
        g = float(yh @ yh) - 1.0
        dg = 2.0 * (float(yh @ u))
        if dg != 0.0:
            s -= g / dg
        return s, self.boundary_point(x + s * v)


class Annulus(DomainGeometry):
    """Spherical shell r_inner < |x - center| < r_outer: C2 but not convex."""

    kind = "annulus"
    convex = False

    def __init__(self, center, r_inner: float, r_outer: float):
        if not 0 < r_inner < r_outer:
            raise ValueError("need 0 < r_inner < r_outer")
        center = np.asarray(center, dtype=float)
        super().__init__(center.shape[0], 2.0 * r_outer)
        self.center = center
        self.r_inner = float(r_inner)
        self.r_outer = float(r_outer)

    def phi(self, x):
        d = x - self.center
        rho = math.sqrt(float(d @ d))
        return max(self.r_inner - rho, rho - self.r_outer)

    def phi_many(self, pts):
        d = pts - self.center
        rho = np.sqrt(np.einsum("ij,ij->i", d, d))
        return np.maximum(self.r_inner - rho, rho - self.r_outer)

    def grad_phi(self, x):
        d = x - self.center
        rho = math.sqrt(float(d @ d))
        sign = -1.0 if (self.r_inner - rho) > (rho - self.r_outer) else 1.0
        return sign * d / rho

    def bounds(self):
        r = self.r_outer
        return self.center - r, self.center + r

    def sample_interior(self, rng):
        u = rng.normal_vec(self.dim)
        u /= math.sqrt(float(u @ u))
        n = self.dim
        rn = self.r_inner**n + rng.uniform() * (self.r_outer**n - self.r_inner**n)
        return self.center + rn ** (1.0 / n) * u

    def boundary_samples(self, count):
        # Split proportionally to the surface measure of the two spheres.
        w_out = self.r_outer ** (self.dim - 1)
        w_in = self.r_inner ** (self.dim - 1)
        n_out = max(1, round(count * w_out / (w_out + w_in)))
        n_in = max(1, count - n_out)
        out = []
        for p in _sphere_sequence(self.dim, n_out):
            out.append(BoundaryPoint(self.center + self.r_outer * p, -p))
        for p in _sphere_sequence(self.dim, n_in, offset=0.5):
            out.append(BoundaryPoint(self.center + self.r_inner * p, p))
        return out

    def boundary_geodesic(self, x, y):
        dx = x - self.center
        dy = y - self.center
        rx = math.sqrt(float(dx @ dx))
        ry = math.sqrt(float(dy @ dy))
        mid = 0.5 * (self.r_inner + self.r_outer)
        if (rx < mid) != (ry < mid):
            return math.inf  # different boundary components
        band = self.r_inner if rx < mid else self.r_outer
        c = float(dx @ dy) / (rx * ry)
        return band * math.acos(min(1.0, max(-1.0, c)))

    def hit(self, x, v):
        vv = float(v @ v)
        if vv <= 0.0:
            raise NonPositiveSpeed("hitting time requires a nonzero velocity")
        d = x - self.center
        b = float(d @ v)
        rho2 = float(d @ d)
        rho = math.sqrt(rho2)
        tol = self.boundary_tolerance
        if rho >= self.r_outer - tol and b >= 0.0:
            return 0.0, BoundaryPoint(x, -d / rho)
        if rho <= self.r_inner + tol and b <= 0.0:
            return 0.0, BoundaryPoint(x, d / rho)
        c2_out = rho2 - self.r_outer * self.r_outer
        disc = b * b - vv * c2_out
        sq = math.sqrt(disc)
        s = (sq - b) / vv if b <= 0.0 else -c2_out / (b + sq)
        inner = False
        if b < 0.0:
            c2_in = rho2 - self.r_inner * self.r_inner
            disc_in = b * b - vv * c2_in
            if disc_in > 0.0 and c2_in > 0.0:
                s_in = c2_in / (-b + math.sqrt(disc_in))
                if 0.0 < s_in < s:
                    s, inner = s_in, True
        y = x + s * v
        dy = y - self.center
        r_target = self.r_inner if inner else self.r_outer
        y = self.center + dy * (r_target / math.sqrt(float(dy @ dy)))
        n = (y - self.center) / r_target if inner else (self.center - y) / r_target
        return s, BoundaryPoint(y, n)


class ImplicitSmooth(DomainGeometry):
    """Arbitrary user level set with gradient.

    ``phi`` must be negative strictly inside, positive outside, with a
    nonvanishing gradient in a tube around its zero set.  An interior
    anchor point is required; the diameter is estimated (and then fixed)
    from ray-cast boundary samples.
    """

    kind = "implicit"
    convex = None

    def __init__(self, phi, grad_phi, interior_point, dim: int | None = None,
                 phi_many=None, n_probe: int = 256, march_scale: float = 4.0):
        self._phi = phi
        self._grad = grad_phi
        anchor = np.asarray(interior_point, dtype=float)
        dim = dim or anchor.shape[0]
        self.anchor = anchor
        self._phi_many_user = phi_many
        # Probe rays establish a working scale before the real diameter
        # estimate; march_scale bounds the search length in anchor units.
        super().__init__(dim, march_scale)
        if phi(anchor) >= 0:
            raise ValueError("interior_point is not inside the domain")
        samples = self._raycast_samples(n_probe)
        pts = np.array([bp.x for bp in samples])
        dmax = 0.0
        for i in range(len(pts)):
            d = pts[i + 1:] - pts[i]
            if len(d):
                dmax = max(dmax, float(np.sqrt(np.einsum("ij,ij->i", d, d)).max()))
        # Sampled sup of pairwise distances, padded: the cached value must
        # dominate any later sampled pair.
        self.diameter = 1.001 * dmax
        self.boundary_tolerance = 1e-9 * self.diameter
        self._samples = samples
        lo = pts.min(axis=0)
        hi = pts.max(axis=0)
        pad = 0.01 * (hi - lo)
        self._bounds = (lo - pad, hi + pad)

    def phi(self, x):
        return float(self._phi(x))

    def phi_many(self, pts):
        if self._phi_many_user is not None:
            return np.asarray(self._phi_many_user(pts), dtype=float)
        return np.array([float(self._phi(p)) for p in pts])

    def grad_phi(self, x):
        return np.asarray(self._grad(x), dtype=float)

    def bounds(self):
        return self._bounds

    def boundary_samples(self, count):
        if count <= len(self._samples):
            return self._samples[:count]
        return self._raycast_samples(count)

    def _raycast_samples(self, count):
        out = []
        for u in _sphere_sequence(self.dim, count):
            s, bp = self.hit(self.anchor, u)
            out.append(bp)
        return out

    def hit(self, x, v):
        vv = float(v @ v)
        if vv <= 0.0:
            raise NonPositiveSpeed("hitting time requires a nonzero velocity")
        speed = math.sqrt(vv)
        tol = self.boundary_tolerance
        phi_x = self.phi(x)
        if phi_x > tol:
            raise RootNotBracketed("ray origin lies outside the domain")
        s0 = 0.0
        if abs(phi_x) <= tol:
            n = self.inward_normal(x)
            if float(v @ n) <= 0.0:
                return 0.0, BoundaryPoint(x, n)
            # Departing the boundary: offset the search past the surface.
            s0 = 1e-7 * self.diameter / speed
        h = self.diameter / 1024.0 / speed
        s_max = s0 + 1.25 * self.diameter / speed
        lo = s0
        f_lo = self.phi(x + lo * v)
        if f_lo >= 0.0:
            # The offset overshot a thin feature; fall back to the surface.
            lo, f_lo = 0.0, -tol
        s = lo
        chunk = 64
        found = False
        while s < s_max and not found:
            ss = s + h * np.arange(1, chunk + 1)
            vals = self.phi_many(x[None, :] + ss[:, None] * v[None, :])
            pos = np.nonzero(vals >= 0.0)[0]
            if len(pos):
                k = int(pos[0])
                hi = float(ss[k])
                lo = float(ss[k - 1]) if k > 0 else lo
                found = True
            else:
                lo = float(ss[-1])
                s = lo
        if not found:
            raise RootNotBracketed(
                "no boundary crossing within the marching range; check the "
                "level-set sign convention")
        s_hit = self._polish(x, v, lo, hi, 1e-12 * self.diameter / speed)
        y = x + s_hit * v
        return s_hit, BoundaryPoint(y, self.inward_normal(y))

    def _polish(self, x, v, lo, hi, xtol):
        # Bisection bracket maintained around Newton proposals.
        s = 0.5 * (lo + hi)
        for _ in range(200):
            val = self.phi(x + s * v)
            if val < 0.0:
                lo = s
            else:
                hi = s
            if hi - lo <= xtol:
                break
            g = float(self.grad_phi(x + s * v) @ v)
            s_new = s - val / g if g != 0.0 else 0.5 * (lo + hi)
            if not (lo < s_new < hi):
                s_new = 0.5 * (lo + hi)
            s = s_new
        return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# Communication between boundary points and the patch search.


def communicates(domain: DomainGeometry, a: BoundaryPoint, b: BoundaryPoint,
                 grid: int = 64, angle_tol: float = 1e-10) -> bool:
    """Open chord inside D with strictly inward mutual visibility.

    The chord test evaluates phi on a fixed interior grid and then refines
    around the worst point; tangencies within tolerance count as failure.
    """
    d = b.x - a.x
    dist = math.sqrt(float(d @ d))
    if dist == 0.0:
        return False
    if float(a.normal @ d) <= angle_tol * dist:
        return False
    if float(b.normal @ d) >= -angle_tol * dist:
        return False
    ts = np.arange(1, grid + 1) / (grid + 1.0)
    pts = a.x[None, :] + ts[:, None] * d[None, :]
    vals = domain.phi_many(pts)
    thresh = -domain.boundary_tolerance
    k = int(np.argmax(vals))
    if vals[k] >= thresh:
        return False
    if vals[k] < -1e-4 * domain.diameter:
        # Deep clearance everywhere on the grid: no refinement needed.
        return True
    # Local refinement: maximize phi on the bracket around the worst grid
    # point (ternary search; phi is smooth along the chord).  The bracket
    # stays strictly inside (0, 1): phi vanishes at the chord endpoints by
    # construction, and endpoint tangency is already excluded by the
    # normal-component checks above.
    t_lo = ts[k - 1] if k > 0 else ts[0]
    t_hi = ts[k + 1] if k + 1 < grid else ts[-1]
    for _ in range(28):
        m1 = t_lo + (t_hi - t_lo) / 3.0
        m2 = t_hi - (t_hi - t_lo) / 3.0
        f1 = domain.phi(a.x + m1 * d)
        f2 = domain.phi(a.x + m2 * d)
        if max(f1, f2) >= thresh:
            return False
        if f1 < f2:
            t_lo = m1
        else:
            t_hi = m2
    return True


_RADIUS_SCHEDULE = (0.50, 0.4875, 0.475, 0.4625, 0.45, 0.425, 0.40, 0.35,
                    0.30, 0.25, 0.20, 0.15, 0.10, 0.06, 0.03, 0.015)


def find_patches(domain: DomainGeometry, budget: int = 4096,
                 n_boundary: int = 1024, cap_points: int = 12) -> PatchReport:
    """Two communicating boundary caps, or a whole-boundary marker.

    Convex domains need no patches.  Otherwise the search grows a cap
    around communicating seed pairs as far as cross-communication
    (checked over sampled point pairs) allows, and reports the verified
    caps with their minimum separation.  Caps are geodesic where the
    boundary metric exists, chordal otherwise.
    """
    if domain.convex:
        return PatchReport(whole_boundary=True)
    samples = domain.boundary_samples(n_boundary)
    checked = 0
    if domain.convex is None:
        # Unknown shape: probe pairs; if everything communicates, treat the
        # domain as effectively convex.
        probe = samples[:: max(1, len(samples) // 12)]
        all_ok = True
        for i in range(len(probe)):
            for j in range(i + 1, len(probe)):
                checked += 1
                if not communicates(domain, probe[i], probe[j]):
                    all_ok = False
                    break
            if not all_ok:
                break
        if all_ok:
            return PatchReport(whole_boundary=True, pairs_checked=checked)

    probe = domain.boundary_geodesic(samples[0].x, samples[0].x)
    metric = "chordal" if probe is None else "geodesic"
    best = None
    for a, b, _sep in _seed_pairs(domain, samples):
        cap_probe = BoundaryCap(a.x, 0.0, metric)
        sep = cap_probe.distance(b.x, domain)
        if not math.isfinite(sep):
            continue
        for rad_a in _RADIUS_SCHEDULE:
            if best is not None and rad_a <= best[0]:
                break  # cannot improve on the verified patch
            cap_a = BoundaryCap(a.x, rad_a * domain.diameter, metric)
            pts_a = _spread(cap_a, domain, samples, cap_points)
            if len(pts_a) < 3:
                continue
            for rad_b in _RADIUS_SCHEDULE:
                if checked >= budget:
                    break
                if (rad_a + rad_b) * domain.diameter >= 0.98 * sep:
                    continue  # caps would touch: separation impossible
                cap_b = BoundaryCap(b.x, rad_b * domain.diameter, metric)
                pts_b = _spread(cap_b, domain, samples, cap_points)
                if len(pts_b) < 3:
                    continue
                ok = True
                d0 = math.inf
                for p in pts_a:
                    for q in pts_b:
                        checked += 1
                        if not communicates(domain, p, q):
                            ok = False
                            break
                        d0 = min(d0, float(np.linalg.norm(p.x - q.x)))
                    if not ok:
                        break
                if ok and d0 > 0.0:
                    best = (rad_a, PatchReport(False, cap_a, cap_b, d0,
                                               checked))
                    break
        if checked >= budget:
            break
    if best is not None:
        rep = best[1]
        return PatchReport(False, rep.patch_a, rep.patch_b,
                           rep.min_distance, checked)
    raise PatchSearchFailed(f"no verified patch pair within {budget} checks")


def _spread(cap, domain, samples, count):
    """Verification points covering a cap in every direction.

    Greedy farthest-point subsample of the matches: cap rims and detached
    components are the likeliest to break cross-communication, and this
    covering reaches all of them.
    """
    matches = [p for p in samples if cap.contains(p.x, domain)]
    if len(matches) <= count:
        return matches
    pts = np.array([p.x for p in matches])
    chosen = [0]
    dist = np.linalg.norm(pts - pts[0], axis=1)
    for _ in range(count - 1):
        k = int(np.argmax(dist))
        chosen.append(k)
        dist = np.minimum(dist, np.linalg.norm(pts - pts[k], axis=1))
    return [matches[k] for k in chosen]


def _seed_pairs(domain, samples):
    """Communicating sample pairs with room to grow caps around them.

    A cap around one seed can reach at most half the extremal
    communicating separation before its rim stops seeing the partner, so
    seeds are ranked by closeness to that half-way separation (measured
    in the boundary metric when available).
    """
    probe = domain.boundary_geodesic(samples[0].x, samples[0].x)

    def sep_of(a, b):
        if probe is not None:
            s = domain.boundary_geodesic(a.x, b.x)
            if s is not None:
                return s
        return float(np.linalg.norm(a.x - b.x))

    pairs = []
    m = len(samples)
    stride = max(1, m // 48)
    idx = list(range(0, m, stride))
    for ii, i in enumerate(idx):
        for j in idx[ii + 1:]:
            a, b = samples[i], samples[j]
            if np.linalg.norm(a.x - b.x) < 0.15 * domain.diameter:
                continue
            if communicates(domain, a, b):
                pairs.append((sep_of(a, b), i, j))
    if not pairs:
        return []
    target = 0.5 * max(s for s, _, _ in pairs if math.isfinite(s))
    pairs.sort(key=lambda p: abs(p[0] - target))
    return [(samples[i], samples[j], s) for s, i, j in pairs[:12]]


def normal_reach(domain: DomainGeometry, n_samples: int = 64) -> float:
    """Sampled inner reach along inward normals (cone-condition diagnostic).

    Purely informational: the smallest sampled distance one can travel
    inward from the boundary before leaving the domain again.
    """
    reach = math.inf
    for bp in domain.boundary_samples(n_samples):
        s, _ = domain.hit(bp.x, bp.normal)
        if s > 0:
            reach = min(reach, s)
    return reach


def _sphere_sequence(dim: int, count: int, offset: float = 0.0) -> np.ndarray:
    """Deterministic low-discrepancy unit vectors.

    Golden-angle sequence in 2-D, Fibonacci lattice on S^2, and a
    Kronecker-sequence-through-Gaussian map in higher dimensions.
    """
    if dim == 2:
        ang = 2.0 * math.pi * ((offset + _GOLDEN * np.arange(count)) % 1.0)
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)
    if dim == 3:
        k = np.arange(count)
        z = 1.0 - (2.0 * k + 1.0) / count
        ang = 2.0 * math.pi * ((offset + _GOLDEN * k) % 1.0)
        r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
        return np.stack([r * np.cos(ang), r * np.sin(ang), z], axis=1)
    # Kronecker sequence pushed through the inverse normal CDF.
    from scipy.special import ndtri

    alphas = _kronecker_alphas(dim)
    u = ((offset + np.outer(np.arange(1, count + 1), alphas)) % 1.0)
    g = ndtri(np.clip(u, 1e-12, 1.0 - 1e-12))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g


def _kronecker_alphas(dim):
    # Generalized golden ratios give a well-spread lattice in [0,1)^dim.
    phi = 2.0
    for _ in range(40):
        phi = (1.0 + phi) ** (1.0 / (dim + 1))
    return np.array([(1.0 / phi) ** (k + 1) for k in range(dim)])
