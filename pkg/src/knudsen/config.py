"""Scenario configuration: one JSON document drives every experiment.

No environment variables affect the numerics; every default lives here.
A scenario fixes the domain, the wall law, the accommodation coefficient
alpha (constant or an expression in the boundary angle), the initial law,
ensemble sizes, the time grid, the seed, and the coupling mode.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from .errors import ConfigError
from .geometry import (Annulus, Ball, BoundaryCap, DomainGeometry, Ellipsoid,
                       ImplicitSmooth, find_patches)
from .transport import FreeTransport, InitialLaw
from .velocity import Maxwellian, TabulatedRadial, TruncatedPower, VelocityLaw

DEFAULTS = {
    "domain": {"kind": "ball", "center": [0.0, 0.0], "radius": 1.0},
    "wall_law": {"kind": "maxwellian", "theta": 1.0},
    "alpha": {"kind": "constant", "value": 1.0},
    "initial": {"position": {"kind": "uniform"},
                "velocity": {"kind": "equilibrium"}},
    "n_pairs": 1000,
    "t_max": 200.0,
    "grid": {"t_min": 0.05, "per_decade": 40},
    "fit_window": None,          # defaults to [10, t_max / 2]
    "seed": 1,
    "mode": "auto",              # convex | patch | auto
    "speed_threshold": 1.0,
    "residual_budget": 1_000_000,
    "snapshot_t": 5.0,
    "snapshot_pairs": 2000,
    "threads": 1,
    "out": "out",
}


@dataclass
class Scenario:
    """Validated configuration plus the objects built from it."""

    raw: dict
    domain: DomainGeometry
    wall_law: VelocityLaw
    alpha_fn: Any
    alpha0: float
    initial: InitialLaw
    n_pairs: int
    t_max: float
    grid_t_min: float
    grid_per_decade: int
    fit_window: tuple[float, float]
    seed: int
    mode: str
    speed_threshold: float
    residual_budget: int
    snapshot_t: float
    snapshot_pairs: int
    patch: BoundaryCap | None = None
    patch_partner: BoundaryCap | None = None
    patch_min_distance: float = 0.0

    def transport(self) -> FreeTransport:
        return FreeTransport(self.domain, self.wall_law, self.alpha_fn,
                             self.alpha0)


def load_config(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def merged_with_defaults(cfg: dict) -> dict:
    out = dict(DEFAULTS)
    out.update(cfg or {})
    return out


def build_scenario(cfg: dict, *, resolve_patches: bool = True) -> Scenario:
    cfg = merged_with_defaults(cfg)
    domain = build_domain(cfg["domain"])
    wall_law = build_wall_law(cfg["wall_law"], domain.dim)
    alpha_fn, alpha0 = build_alpha(cfg["alpha"], domain)
    initial = build_initial(cfg["initial"], domain.dim)

    n_pairs = int(cfg["n_pairs"])
    if n_pairs < 1:
        raise ConfigError("n_pairs must be >= 1")
    t_max = float(cfg["t_max"])
    if t_max <= 0:
        raise ConfigError("t_max must be positive")
    grid = cfg["grid"]
    fit_window = cfg.get("fit_window") or (10.0, t_max / 2.0)

    mode = cfg["mode"]
    if mode == "auto":
        mode = "convex" if domain.convex else "patch"
    if mode not in ("convex", "patch"):
        raise ConfigError(f"unknown mode {mode!r}")
    if mode == "convex" and domain.convex is not True:
        raise ConfigError(
            "convex mode requires a convex domain; use patch mode")

    scenario = Scenario(
        raw=cfg, domain=domain, wall_law=wall_law, alpha_fn=alpha_fn,
        alpha0=alpha0, initial=initial, n_pairs=n_pairs, t_max=t_max,
        grid_t_min=float(grid.get("t_min", 0.05)),
        grid_per_decade=int(grid.get("per_decade", 40)),
        fit_window=(float(fit_window[0]), float(fit_window[1])),
        seed=int(cfg["seed"]), mode=mode,
        speed_threshold=float(cfg["speed_threshold"]),
        residual_budget=int(cfg["residual_budget"]),
        snapshot_t=float(cfg["snapshot_t"]),
        snapshot_pairs=int(cfg["snapshot_pairs"]),
    )
    if mode == "patch" and resolve_patches:
        if "patch" in cfg and cfg["patch"] is not None:
            p = cfg["patch"]
            scenario.patch = BoundaryCap(np.asarray(p["center"], float),
                                         float(p["radius"]),
                                         p.get("metric", "chordal"))
            if "partner" in p:
                scenario.patch_partner = BoundaryCap(
                    np.asarray(p["partner"]["center"], float),
                    float(p["partner"]["radius"]),
                    p["partner"].get("metric", "chordal"))
            scenario.patch_min_distance = float(p.get("min_distance", 0.0))
        else:
            report = find_patches(domain)
            if report.whole_boundary:
                lo, hi = domain.bounds()
                scenario.patch = BoundaryCap(0.5 * (lo + hi),
                                             2.0 * domain.diameter)
            else:
                scenario.patch = report.patch_a
                scenario.patch_partner = report.patch_b
                scenario.patch_min_distance = report.min_distance
    return scenario


def build_domain(spec: dict) -> DomainGeometry:
    kind = spec.get("kind")
    if kind == "ball":
        return Ball(spec.get("center", [0.0, 0.0]), float(spec["radius"]))
    if kind in ("ellipse", "ellipsoid"):
        return Ellipsoid(spec.get("center", [0.0, 0.0]), spec["semi_axes"])
    if kind == "annulus":
        return Annulus(spec.get("center", [0.0, 0.0]),
                       float(spec["r_inner"]), float(spec["r_outer"]))
    if kind == "implicit":
        return _implicit_from_expression(spec)
    raise ConfigError(f"unknown domain kind {kind!r}")


def _implicit_from_expression(spec: dict) -> ImplicitSmooth:
    # The level set arrives as a sympy-parseable expression in x0..x{n-1}.
    import sympy

    interior = np.asarray(spec["interior_point"], dtype=float)
    dim = len(interior)
    symbols = sympy.symbols(f"x0:{dim}")
    expr = sympy.sympify(spec["expr"])
    grad_exprs = [sympy.diff(expr, s) for s in symbols]
    phi_l = sympy.lambdify(symbols, expr, "math")
    grad_l = sympy.lambdify(symbols, grad_exprs, "math")
    phi_vec = sympy.lambdify(symbols, expr, "numpy")

    def phi(x):
        return float(phi_l(*x))

    def grad(x):
        return np.asarray(grad_l(*x), dtype=float)

    def phi_many(pts):
        cols = [pts[:, j] for j in range(dim)]
        return np.asarray(phi_vec(*cols), dtype=float)

    return ImplicitSmooth(phi, grad, interior, dim=dim, phi_many=phi_many)


def build_wall_law(spec: dict, dim: int) -> VelocityLaw:
    kind = spec.get("kind")
    if kind == "maxwellian":
        return Maxwellian(dim, float(spec.get("theta", 1.0)))
    if kind == "tabulated":
        return TabulatedRadial(dim, spec["grid"], spec["values"])
    if kind == "truncated_power":
        raise ConfigError(
            "truncated_power is an initial-condition law, not a wall law")
    raise ConfigError(f"unknown wall law kind {kind!r}")


def build_velocity_law(spec: dict, dim: int) -> VelocityLaw:
    kind = spec.get("kind")
    if kind == "truncated_power":
        return TruncatedPower(dim, float(spec["alpha"]),
                              float(spec.get("cutoff", 1.0)))
    if kind == "maxwellian":
        return Maxwellian(dim, float(spec.get("theta", 1.0)))
    if kind == "tabulated":
        return TabulatedRadial(dim, spec["grid"], spec["values"])
    raise ConfigError(f"unknown velocity law kind {kind!r}")


def build_initial(spec: dict, dim: int) -> InitialLaw:
    pos = spec.get("position", {"kind": "uniform"})
    vel = spec.get("velocity", {"kind": "equilibrium"})
    kwargs = {}
    pk = pos.get("kind", "uniform")
    if pk == "point":
        kwargs["x0"] = np.asarray(pos["x0"], dtype=float)
    elif pk == "ball":
        kwargs["ball_center"] = np.asarray(pos["center"], dtype=float)
        kwargs["ball_radius"] = float(pos["radius"])
    elif pk != "uniform":
        raise ConfigError(f"unknown position kind {pk!r}")
    vk = vel.get("kind", "equilibrium")
    if vk == "point":
        kwargs["v0"] = np.asarray(vel["v0"], dtype=float)
        velocity_kind = "point"
    elif vk == "equilibrium":
        velocity_kind = "equilibrium"
    else:
        kwargs["velocity_law"] = build_velocity_law(vel, dim)
        velocity_kind = "law"
    return InitialLaw(position_kind=pk, velocity_kind=velocity_kind, **kwargs)


def build_alpha(spec: dict, domain: DomainGeometry):
    kind = spec.get("kind", "constant")
    if kind == "constant":
        value = float(spec["value"])
        alpha0 = float(spec.get("alpha0", value))
        if not 0.0 < alpha0 <= 1.0 or value < alpha0 or value > 1.0:
            raise ConfigError(
                "constant alpha needs 0 < alpha0 <= value <= 1")
        const = value

        def alpha_fn(_bp, _v=const):
            return _v

        return alpha_fn, alpha0
    if kind == "expression":
        alpha0 = float(spec["alpha0"])
        if not 0.0 < alpha0 <= 1.0:
            raise ConfigError("alpha0 must lie in (0, 1]")
        expr = spec["expr"]
        center = np.asarray(spec.get("center", domain.bounds()[0] * 0.0),
                            dtype=float)
        code = compile(expr, "<alpha>", "eval")
        ns = {"cos": math.cos, "sin": math.sin, "pi": math.pi,
              "exp": math.exp, "abs": abs, "min": min, "max": max}

        def alpha_fn(bp):
            phi_ang = math.atan2(bp.x[1] - center[1], bp.x[0] - center[0])
            return eval(code, {"__builtins__": {}}, dict(ns, phi=phi_ang))

        # Spot-check the declared lower bound on sampled boundary points.
        for bp in domain.boundary_samples(256):
            a = alpha_fn(bp)
            if not alpha0 - 1e-12 <= a <= 1.0 + 1e-12:
                raise ConfigError(
                    f"alpha({bp.x}) = {a} violates [alpha0, 1]")
        return alpha_fn, alpha0
    raise ConfigError(f"unknown alpha kind {kind!r}")
