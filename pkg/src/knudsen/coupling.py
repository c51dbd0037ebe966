"""Coupled pair dynamics built to merge two free-transport chains.

One chain starts from the initial condition under study, the other from
equilibrium.  Both evolve jointly on the union of their boundary-event
times.  At each event the pair of boundary innovations is drawn from a
three-branch mixture: identical innovations when the chains sit at the
same wall point, a maximal coupling of the (speed, angle) laws when the
primary chain hits while the other flies with enough speed, independent
draws otherwise.  A stored innovation Z carries randomness generated at a
primary-chain event to the other chain's next wall contact.

Exact coincidence is engineered, not tested: a successful coupling draw
stores one shared (arrival time, boundary point) record that both chains
consume verbatim, so the merge comparison is between identical stored
floats rather than recomputed ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ExplosionGuardTripped, LagTooLarge, \
    ResidualRejectionBudgetExceeded
from .geometry import (BoundaryCap, BoundaryPoint, communicates,
                       reflect_specular)
from .transport import FreeTransport, InitialLaw, ParticleState
from .velocity import (Innovation, draw_innovation, sample_upsilon, vartheta,
                       vartheta_inverse)

PAIR_STEP_CAP = 10_000_000


class HittingDensity:
    """Density of (flight time, hit point) for a diffuse re-emission.

    Anchored at a boundary point x: the value at (tau, z) is
    M((z-x)/tau) tau^-(n+2) |(z-x).n_x| |(z-x).n_z| / c0, times the
    communication indicator when the domain is not convex.  Dividing by
    the flux constant normalizes the cosine re-emission law, so the
    density integrates to one over (0, inf) x boundary.
    """

    __slots__ = ("domain", "law", "anchor", "with_communication", "_pow",
                 "_norm")

    def __init__(self, domain, law, anchor: BoundaryPoint,
                 with_communication: bool):
        self.domain = domain
        self.law = law
        self.anchor = anchor
        self.with_communication = with_communication
        self._pow = -(law.n + 2)
        self._norm = 1.0 / law.c0

    def __call__(self, tau: float, z: BoundaryPoint) -> float:
        if tau <= 0.0:
            return 0.0
        d = z.x - self.anchor.x
        dist2 = float(d @ d)
        if dist2 <= 0.0:
            return 0.0
        p = self.law.profile(math.sqrt(dist2) / tau)
        if p <= 0.0:
            return 0.0
        val = (self._norm * p * tau**self._pow
               * abs(float(d @ self.anchor.normal))
               * abs(float(d @ z.normal)))
        if val > 0.0 and self.with_communication and \
                not communicates(self.domain, self.anchor, z):
            return 0.0
        return val


class StoredInnovation:
    """The Z memory variable: an innovation waiting for the other chain's
    next wall contact, with its precomputed diffuse outcome and, after a
    successful coupling draw, the shared arrival record."""

    __slots__ = ("u", "r", "theta", "out_velocity", "shared_time",
                 "shared_point")

    def __init__(self, u, r, theta, out_velocity, shared_time, shared_point):
        self.u = u
        self.r = r
        self.theta = theta
        self.out_velocity = out_velocity
        self.shared_time = shared_time
        self.shared_point = shared_point


@dataclass
class CouplingAttempt:
    """Outcome of one maximal-coupling draw.

    The primary side always keeps its unconditional emission (velocity,
    flight_time, target).  On success the tilde side is reconstructed to
    arrive at the same target at the same absolute time; on failure it is
    an independent residual draw.
    """

    success: bool
    r: float
    theta: tuple
    velocity: np.ndarray
    flight_time: float
    target: BoundaryPoint
    r_tilde: float
    theta_tilde: tuple
    tilde_velocity: np.ndarray
    lag: float
    residual_proposals: int


class CoupledState:
    __slots__ = ("a", "b", "z", "merged", "merge_time", "steps",
                 "lambda_attempts", "lambda_successes")

    def __init__(self, a: ParticleState, b: ParticleState):
        self.a = a
        self.b = b
        self.z = None
        self.merged = False
        self.merge_time = None
        self.steps = 0
        self.lambda_attempts = 0
        self.lambda_successes = 0


@dataclass
class PairResult:
    tau: float | None
    censored: bool
    events: int
    lambda_attempts: int
    lambda_successes: int
    collisions_primary: int
    collisions_stationary: int


# Table rows (audit codes): which chain hit, same point or not, Z state.
ROW_A_HIT_FAST = 1      # primary hits, other interior, Z empty, speeds >= a
ROW_A_HIT_SLOW = 2      # same but some speed below the threshold
ROW_BOTH_SAME = 3       # both hit the same point, Z empty
ROW_BOTH_DIFF = 4       # both hit different points, Z empty
ROW_A_HIT_FAST_Z = 5    # primary hits, Z occupied, speeds >= a
ROW_A_HIT_SLOW_Z = 6    # primary hits, Z occupied, low speed
ROW_BOTH_SAME_Z = 7     # both hit same point, Z occupied
ROW_BOTH_DIFF_Z = 8     # both hit different points, Z occupied
ROW_B_HIT = 9           # only the stationary chain hits, Z empty
ROW_B_HIT_Z = 10        # only the stationary chain hits, Z occupied


class CouplingKernel:
    """Joint stepping of a coupled pair over one domain and wall law."""

    def __init__(self, transport: FreeTransport, mode: str = "convex",
                 patch: BoundaryCap | None = None,
                 speed_threshold: float = 1.0,
                 residual_budget: int = 1_000_000,
                 pair_step_cap: int = PAIR_STEP_CAP):
        if mode not in ("convex", "patch"):
            raise ValueError("mode must be 'convex' or 'patch'")
        if mode == "patch" and patch is None:
            raise ValueError("patch mode needs a boundary cap")
        self.transport = transport
        self.domain = transport.domain
        self.law = transport.law
        self.mode = mode
        self.patch = patch
        self.speed_threshold = speed_threshold
        self.residual_budget = residual_budget
        self.pair_step_cap = pair_step_cap
        self._thr2 = speed_threshold * speed_threshold

    # -- densities -----------------------------------------------------------

    def hitting_density(self, anchor: BoundaryPoint) -> HittingDensity:
        return HittingDensity(self.domain, self.law, anchor,
                              self.mode == "patch")

    def mu_eval(self, anchor: BoundaryPoint, tau: float,
                z: BoundaryPoint) -> float:
        return self.hitting_density(anchor)(tau, z)

    # -- the maximal coupling --------------------------------------------------

    def maximal_coupling_draw(self, stream, x0: BoundaryPoint,
                              x_tilde0, v_tilde0) -> CouplingAttempt:
        """Coupled (speed, angle) pairs for a primary reflection at x0 and a
        stationary chain flying from x_tilde0 with velocity v_tilde0."""
        x_tilde0 = np.asarray(x_tilde0, dtype=float)
        v_tilde0 = np.asarray(v_tilde0, dtype=float)
        lag, target = self.domain.hit(x_tilde0, v_tilde0)
        if lag > self.domain.diameter * (1.0 + 1e-9):
            raise LagTooLarge(
                f"remaining flight {lag:.3g} exceeds the domain diameter")
        return self._lambda_draw(stream, x0, target, lag)

    def _lambda_draw(self, stream, x0: BoundaryPoint, xt: BoundaryPoint,
                     lag: float) -> CouplingAttempt:
        domain, law = self.domain, self.law
        mu0 = self.hitting_density(x0)
        mut = self.hitting_density(xt)
        # Unconditional emission for the primary side.
        r, theta = sample_upsilon(stream, law)
        vel = r * vartheta(x0, theta)
        flight, target = domain.hit(x0.x, vel)
        f = mu0(flight, target)
        g = mut(flight - lag, target)
        acc = stream.uniform()
        if f > 0.0 and g > 0.0 and acc * f < min(f, g):
            dt = flight - lag
            dvec = target.x - xt.x
            dist = math.sqrt(float(dvec @ dvec))
            tilde_vel = dvec / dt
            return CouplingAttempt(True, r, theta, vel, flight, target,
                                   dist / dt,
                                   vartheta_inverse(xt, dvec / dist),
                                   tilde_vel, lag, 0)
        # Residual: propose from the tilde side, reject into overlap mass.
        for k in range(1, self.residual_budget + 1):
            r_p, th_p = sample_upsilon(stream, law)
            v_p = r_p * vartheta(xt, th_p)
            zeta_p, z_p = domain.hit(xt.x, v_p)
            g_p = mut(zeta_p, z_p)
            if g_p <= 0.0:
                continue
            f_p = mu0(zeta_p + lag, z_p)
            if stream.uniform() * g_p >= min(f_p, g_p):
                return CouplingAttempt(False, r, theta, vel, flight, target,
                                       r_p, th_p, v_p, lag, k)
        raise ResidualRejectionBudgetExceeded(
            f"no residual acceptance in {self.residual_budget} proposals")

    # -- the innovation mixture ------------------------------------------------

    def gamma_draw(self, stream, x, v_minus, x_tilde, v_tilde_minus):
        """(Q, Q_tilde, attempt) at a moment when either chain touches the wall.

        Standalone entry point; positions are raw phase-space points and
        boundary membership is decided by the domain.
        """
        x = np.asarray(x, dtype=float)
        x_tilde = np.asarray(x_tilde, dtype=float)
        a_on = self.domain.on_boundary(x)
        b_on = self.domain.on_boundary(x_tilde)
        if not (a_on or b_on):
            raise ValueError("gamma_draw needs a chain at the boundary")
        same = a_on and b_on and bool(np.array_equal(x, x_tilde))
        a_bp = self.domain.boundary_point(x) if a_on else None
        lag = 0.0
        b_target = None
        if not b_on:
            lag, b_target = self.domain.hit(x_tilde,
                                            np.asarray(v_tilde_minus, float))
        sa = float(np.dot(v_minus, v_minus))
        sb = float(np.dot(v_tilde_minus, v_tilde_minus))
        return self._gamma(stream, a_bp, b_on, b_target, lag, sa, sb, same)

    def _gamma(self, stream, a_bp, b_on_boundary, b_target, lag,
               speed2_a, speed2_b, same_point):
        if same_point:
            q = draw_innovation(stream, self.law)
            return q, q, None
        if (a_bp is not None and not b_on_boundary
                and speed2_a >= self._thr2 and speed2_b >= self._thr2
                and self._patch_gate(a_bp, b_target)):
            attempt = self._lambda_draw(stream, a_bp, b_target, lag)
            u = stream.uniform()
            q = Innovation(u, attempt.r, attempt.theta)
            qt = Innovation(u, attempt.r_tilde, attempt.theta_tilde)
            return q, qt, attempt
        return (draw_innovation(stream, self.law),
                draw_innovation(stream, self.law), None)

    def _patch_gate(self, a_bp, b_target):
        if self.mode == "convex":
            return True
        return (self.patch.contains(a_bp.x, self.domain)
                and self.patch.contains(b_target.x, self.domain))

    # -- pair construction and stepping ----------------------------------------

    def new_pair(self, stream, initial: InitialLaw) -> CoupledState:
        tr = self.transport
        a = tr.sample_state(stream, initial)
        b = tr.sample_state(stream, _EQUILIBRIUM)
        return CoupledState(a, b)

    def step(self, cs: CoupledState, stream) -> int:
        """Advance to the next joint event, apply one update row, return the
        row code."""
        tr = self.transport
        a, b = cs.a, cs.b
        ta, _ = tr.schedule(a)
        tb, _ = tr.schedule(b)
        s_next = ta if ta <= tb else tb
        a_hits = ta <= s_next
        b_hits = tb <= s_next
        same = a_hits and b_hits and bool(
            np.array_equal(a.event_point.x, b.event_point.x))
        z_was = cs.z is not None

        speed2_a = float(a.v @ a.v)
        speed2_b = float(b.v @ b.v)
        lag = tb - s_next
        q, qt, attempt = self._gamma(
            stream, a.event_point if a_hits else None, b_hits,
            b.event_point if not b_hits else None, lag,
            speed2_a, speed2_b, same)
        if attempt is not None:
            cs.lambda_attempts += 1
            if attempt.success:
                cs.lambda_successes += 1
        shared_time = s_next + attempt.flight_time \
            if attempt is not None and attempt.success else None

        if same:
            bp = a.event_point
            alpha_x = tr.alpha_fn(bp)
            if q.u <= alpha_x:
                v_new = q.r * vartheta(bp, q.theta)
                va = vb = v_new
            else:
                va = reflect_specular(bp, a.v)
                vb = va if np.array_equal(a.v, b.v) \
                    else reflect_specular(bp, b.v)
            tr.fire(a, q, velocity=va)
            tr.fire(b, qt, velocity=vb)
            cs.z = None
            row = ROW_BOTH_SAME_Z if z_was else ROW_BOTH_SAME
        else:
            if a_hits:
                bp = a.event_point
                alpha_x = tr.alpha_fn(bp)
                if q.u <= alpha_x:
                    va = attempt.velocity if attempt is not None \
                        else q.r * vartheta(bp, q.theta)
                else:
                    va = reflect_specular(bp, a.v)
                diffuse_a = q.u <= alpha_x
                tr.fire(a, q, velocity=va)
                if attempt is not None and diffuse_a:
                    # The draw already traced the emission to the wall;
                    # reuse it verbatim as the scheduled event.
                    t_arr = shared_time if shared_time is not None \
                        else a.t + attempt.flight_time
                    tr.install_event(a, t_arr, attempt.target)
            if b_hits:
                bp = b.event_point
                alpha_x = tr.alpha_fn(bp)
                zz = cs.z
                if zz is not None:
                    if zz.u <= alpha_x:
                        tr.fire(b, None, velocity=zz.out_velocity)
                        if zz.shared_time is not None:
                            tr.install_event(b, zz.shared_time,
                                             zz.shared_point)
                    else:
                        tr.fire(b, None, velocity=reflect_specular(bp, b.v))
                    cs.z = None
                else:
                    if qt.u <= alpha_x:
                        vb = qt.r * vartheta(bp, qt.theta)
                    else:
                        vb = reflect_specular(bp, b.v)
                    tr.fire(b, qt, velocity=vb)
                row = (ROW_B_HIT_Z if z_was else ROW_B_HIT) if not a_hits \
                    else (ROW_BOTH_DIFF_Z if z_was else ROW_BOTH_DIFF)
            else:
                # Stationary chain keeps flying; store or retain Z.
                if cs.z is None:
                    anchor = b.event_point
                    if attempt is not None:
                        out_v = attempt.tilde_velocity
                        cs.z = StoredInnovation(
                            qt.u, qt.r, qt.theta, out_v, shared_time,
                            attempt.target if shared_time is not None
                            else None)
                    else:
                        cs.z = StoredInnovation(
                            qt.u, qt.r, qt.theta,
                            qt.r * vartheta(anchor, qt.theta), None, None)
                    fast = (speed2_a >= self._thr2
                            and speed2_b >= self._thr2)
                    row = ROW_A_HIT_FAST if fast else ROW_A_HIT_SLOW
                else:
                    fast = (speed2_a >= self._thr2
                            and speed2_b >= self._thr2)
                    row = ROW_A_HIT_FAST_Z if fast else ROW_A_HIT_SLOW_Z

        cs.steps += 1
        if cs.steps > self.pair_step_cap:
            raise ExplosionGuardTripped(
                f"coupled pair exceeded {self.pair_step_cap} joint events")
        if (not cs.merged and cs.z is None and a_hits and b_hits
                and np.array_equal(a.x, b.x) and np.array_equal(a.v, b.v)):
            cs.merged = True
            cs.merge_time = s_next
        return row

    def check_merged_now(self, cs: CoupledState):
        """Recognize pairs born identical (merge time zero)."""
        if (not cs.merged and cs.z is None
                and np.array_equal(cs.a.x, cs.b.x)
                and np.array_equal(cs.a.v, cs.b.v)
                and cs.a.t == cs.b.t):
            cs.merged = True
            cs.merge_time = cs.a.t

    def run_until_merged(self, cs: CoupledState, t_max: float,
                         stream) -> PairResult:
        """Step until the chains coincide or the horizon censors the pair."""
        tr = self.transport
        self.check_merged_now(cs)
        while not cs.merged:
            ta, _ = tr.schedule(cs.a)
            tb, _ = tr.schedule(cs.b)
            if (ta if ta <= tb else tb) > t_max:
                return PairResult(None, True, cs.steps, cs.lambda_attempts,
                                  cs.lambda_successes, cs.a.collisions,
                                  cs.b.collisions)
            self.step(cs, stream)
        return PairResult(cs.merge_time, False, cs.steps, cs.lambda_attempts,
                          cs.lambda_successes, cs.a.collisions,
                          cs.b.collisions)

    def advance_pair_to(self, cs: CoupledState, t: float, stream):
        """Run joint events until both chains coast past time t."""
        tr = self.transport
        while True:
            ta, _ = tr.schedule(cs.a)
            tb, _ = tr.schedule(cs.b)
            if (ta if ta <= tb else tb) > t:
                return cs
            self.step(cs, stream)


_EQUILIBRIUM = InitialLaw(position_kind="uniform", velocity_kind="equilibrium")
