"""Event-driven free transport of a single particle.

Between boundary events the particle moves in a straight line; at an
event the velocity is replaced through the Maxwell boundary update
(specular with probability 1 - alpha(x), diffuse re-emission otherwise).
Each state caches its next scheduled event (absolute time and boundary
point) so the same floats drive both the flight interpolation and the
event loop; event times accumulate with compensated summation to keep
drift negligible over millions of events.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ExplosionGuardTripped
from .geometry import BoundaryPoint, DomainGeometry
from .velocity import (Innovation, VelocityLaw, draw_innovation,
                       post_collision)

COLLISION_CAP = 10_000_000


class ParticleState:
    """One particle: anchor (t, x), velocity, and the cached next event."""

    __slots__ = ("t", "x", "v", "event_time", "event_point", "event_incr",
                 "collisions", "t_comp")

    def __init__(self, t: float, x: np.ndarray, v: np.ndarray):
        self.t = t
        self.x = x
        self.v = v
        self.event_time = None
        self.event_point = None
        self.event_incr = None
        self.collisions = 0
        self.t_comp = 0.0

    def position_at(self, t: float) -> np.ndarray:
        return self.x + (t - self.t) * self.v

    def copy(self) -> "ParticleState":
        s = ParticleState(self.t, self.x, self.v)
        s.event_time = self.event_time
        s.event_point = self.event_point
        s.event_incr = self.event_incr
        s.collisions = self.collisions
        s.t_comp = self.t_comp
        return s


@dataclass(frozen=True)
class InitialLaw:
    """Product initial condition: spatial part times velocity part.

    position_kind: "uniform" (over D), "point", or "ball" (uniform over a
    ball inside D).  velocity_kind: "law" (sample the attached velocity
    law), "point", or "equilibrium" (the wall law itself).
    """

    position_kind: str = "uniform"
    velocity_kind: str = "equilibrium"
    x0: np.ndarray | None = None
    ball_center: np.ndarray | None = None
    ball_radius: float = 0.0
    v0: np.ndarray | None = None
    velocity_law: VelocityLaw | None = None

    def sample(self, stream, domain: DomainGeometry, wall_law: VelocityLaw):
        if self.position_kind == "uniform":
            x = domain.sample_interior(stream)
        elif self.position_kind == "point":
            x = np.array(self.x0, dtype=float)
        elif self.position_kind == "ball":
            u = stream.normal_vec(domain.dim)
            u /= math.sqrt(float(u @ u))
            r = self.ball_radius * stream.uniform() ** (1.0 / domain.dim)
            x = np.asarray(self.ball_center, dtype=float) + r * u
        else:
            raise ValueError(f"unknown position kind {self.position_kind!r}")
        if self.velocity_kind == "equilibrium":
            v = wall_law.draw_velocity(stream)
        elif self.velocity_kind == "law":
            v = self.velocity_law.draw_velocity(stream)
        elif self.velocity_kind == "point":
            v = np.array(self.v0, dtype=float)
        else:
            raise ValueError(f"unknown velocity kind {self.velocity_kind!r}")
        return x, v


class FreeTransport:
    """Simulator for one particle in a fixed domain with a fixed wall law."""

    def __init__(self, domain: DomainGeometry, law: VelocityLaw, alpha_fn,
                 alpha0: float, collision_cap: int = COLLISION_CAP):
        if domain.dim != law.n:
            raise ValueError("domain and velocity law dimensions differ")
        if not 0.0 < alpha0 <= 1.0:
            raise ValueError("alpha0 must lie in (0, 1]")
        self.domain = domain
        self.law = law
        self.alpha_fn = alpha_fn
        self.alpha0 = alpha0
        self.collision_cap = collision_cap

    # -- construction --------------------------------------------------------

    def new_state(self, x, v, stream, t: float = 0.0) -> ParticleState:
        """State from a phase-space point; boundary starts with an incoming
        velocity immediately resolve one boundary update with an extra
        innovation draw."""
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        state = ParticleState(t, x, v)
        if self.domain.on_boundary(x):
            bp = self.domain.boundary_point(x)
            while float(state.v @ bp.normal) <= 0.0:
                inn = draw_innovation(stream, self.law)
                state.v = post_collision(bp, state.v, inn, self.alpha_fn(bp))
        return state

    def sample_state(self, stream, initial: InitialLaw) -> ParticleState:
        x, v = initial.sample(stream, self.domain, self.law)
        return self.new_state(x, v, stream)

    # -- event loop ----------------------------------------------------------

    def schedule(self, state: ParticleState):
        """Fill (idempotently) and return the cached next event."""
        if state.event_time is None:
            zeta, bp = self.domain.hit(state.x, state.v)
            incr = zeta - state.t_comp
            state.event_time = state.t + incr
            state.event_point = bp
            state.event_incr = incr
        return state.event_time, state.event_point

    def install_event(self, state: ParticleState, t_event: float,
                      bp: BoundaryPoint):
        """Override the schedule with an exact, externally stored event."""
        state.event_time = t_event
        state.event_point = bp
        state.event_incr = None

    def fire(self, state: ParticleState, innovation: Innovation | None,
             velocity: np.ndarray | None = None):
        """Consume the cached event: move to the wall, update the velocity.

        ``velocity`` overrides the boundary update with a value the caller
        already computed (the coupling layer stores shared outcomes so
        both chains consume identical floats).
        """
        bp = state.event_point
        t_new = state.event_time
        if state.event_incr is not None:
            state.t_comp = (t_new - state.t) - state.event_incr
        else:
            state.t_comp = 0.0
        state.t = t_new
        state.x = bp.x
        if velocity is None:
            velocity = post_collision(bp, state.v, innovation,
                                      self.alpha_fn(bp))
        state.v = velocity
        state.collisions += 1
        if state.collisions > self.collision_cap:
            raise ExplosionGuardTripped(
                f"more than {self.collision_cap} collisions for one particle")
        state.event_time = None
        state.event_point = None
        state.event_incr = None
        return state

    def advance_to(self, state: ParticleState, t_query: float, stream):
        """Fire events until the next one lies strictly beyond t_query."""
        while True:
            t_event, _ = self.schedule(state)
            if t_event > t_query:
                return state
            self.fire(state, draw_innovation(stream, self.law))

    def state_at(self, state: ParticleState, t_query: float):
        """Free-flight interpolation (cadlag: post-collision at event times)."""
        if t_query < state.t:
            raise ValueError("state_at cannot look back in time")
        return state.position_at(t_query), state.v

    def collisions_in(self, state: ParticleState, horizon: float, stream) -> int:
        """Number of boundary events in [0, horizon] from a fresh state."""
        start = state.collisions
        self.advance_to(state, horizon, stream)
        return state.collisions - start


def constant_alpha(value: float):
    """Alpha specification that ignores the boundary point."""
    def alpha(_bp):
        return value
    return alpha
