"""Collisionless-gas Monte Carlo with Maxwell boundary conditions.

Event-driven free transport in a C2 bounded domain, a trajectory
coupling of a chain started from arbitrary data with a stationary chain,
and the statistics used to measure the total-variation convergence rate
through coupling-time tails.
"""

__version__ = "0.1.0"
