"""Method-of-lines dynamics of a planar rod rolling without sliding.

Fields on the rod are the centerline coordinates ``x(s, t)``, ``y(s, t)``
and the material rotation ``theta(s, t)``.  Rolling couples them through

    xdot = -R thetadot y'      ydot = R thetadot x'

so ``(x, y, theta, thetadot)`` is the full state: the translational
velocities are reconstructed from the constraints and satisfy them
exactly by construction.  The multipliers enforcing the rolling are
eliminated analytically: differentiate the constraints in time,
substitute into the translational field equations

    rho xddot + K x'''' = lambda
    rho yddot + K y'''' = mu
    alpha thetaddot - beta theta'' = R (lambda y' - mu x')

and resolve for ``thetaddot``:

    [alpha + rho R^2 ((x')^2 + (y')^2)] thetaddot =
        beta theta'' - rho R^2 thetadot (xdot' x' + ydot' y')
        + R K (x'''' y' - y'''' x')

after which ``lambda = rho xddot + K x''''`` and likewise ``mu`` are
recovered for verification.  The bracket is at least ``alpha > 0``, so the
solve is never singular.

Space is discretized on a uniform grid with second-order centered
stencils; the grid is periodic up to optional per-period offsets
("wraps"), which let straight or uniformly wound rods live on the ring
(the field increases by a fixed amount per circuit).  Offsets are
constants of the motion because all nodal rates are strictly periodic.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import BlowUpError, ParameterError
from .jets import (NONCOVARIANT, ROD_SIG, ConstraintSpec, JetSystem,
                   SymmetrySection)


@dataclass(frozen=True)
class RodParams:
    """Material and geometric parameters, all strictly positive."""

    rho: float = 1.0
    alpha: float = 1.0
    beta: float = 1.0
    K: float = 1.0
    R: float = 1.0
    length: float = 1.0

    def __post_init__(self):
        for name in ("rho", "alpha", "beta", "K", "R", "length"):
            if getattr(self, name) <= 0:
                raise ParameterError(f"rod parameter {name} must be positive")


@dataclass(frozen=True)
class RodGrid:
    """Uniform periodic grid: nodes j * spacing, j = 0 .. n_nodes - 1."""

    n_nodes: int
    length: float = 1.0

    def __post_init__(self):
        if self.n_nodes < 8:
            raise ParameterError("grid needs at least 8 nodes")
        if self.length <= 0:
            raise ParameterError("grid length must be positive")

    @property
    def spacing(self) -> float:
        return self.length / self.n_nodes

    @property
    def nodes(self) -> np.ndarray:
        return self.spacing * np.arange(self.n_nodes)


@dataclass(frozen=True)
class RodState:
    """Nodal fields at one instant.  ``wrap`` holds the per-period
    increments of (x, y, theta); zero for a closed ring.  Translational
    velocities are not stored, they follow from the rolling constraints."""

    t: float
    x: np.ndarray
    y: np.ndarray
    theta: np.ndarray
    theta_dot: np.ndarray
    wrap: np.ndarray = None

    def __post_init__(self):
        arrays = {}
        n = None
        for name in ("x", "y", "theta", "theta_dot"):
            a = np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
            if n is None:
                n = a.size
            elif a.size != n:
                raise ParameterError(f"nodal vector {name} has size {a.size}, expected {n}")
            arrays[name] = a
        for name, a in arrays.items():
            object.__setattr__(self, name, a)
        wrap = np.zeros(3) if self.wrap is None else np.asarray(self.wrap, dtype=float)
        if wrap.shape != (3,):
            raise ParameterError("wrap must hold the three per-period offsets (x, y, theta)")
        object.__setattr__(self, "wrap", wrap)

    @property
    def n_nodes(self) -> int:
        return self.x.size


@dataclass
class FieldHistory:
    """Recorded snapshots at uniform interval ``dt`` with the recovered
    multipliers and total energy."""

    dt: float
    states: list = field(default_factory=list)
    lam: list = field(default_factory=list)
    mu: list = field(default_factory=list)
    energy: list = field(default_factory=list)

    def append(self, s: RodState, lam: np.ndarray, mu: np.ndarray, energy: float) -> None:
        self.states.append(s)
        self.lam.append(lam)
        self.mu.append(mu)
        self.energy.append(energy)

    def __len__(self) -> int:
        return len(self.states)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    @property
    def energy_array(self) -> np.ndarray:
        return np.array(self.energy)


_STENCILS = {
    1: {-1: -0.5, 1: 0.5},
    2: {-1: 1.0, 0: -2.0, 1: 1.0},
    3: {-2: -0.5, -1: 1.0, 1: -1.0, 2: 0.5},
    4: {-2: 1.0, -1: -4.0, 0: 6.0, 1: -4.0, 2: 1.0},
}


def _shift(u: np.ndarray, offset: int, wrap: float) -> np.ndarray:
    """Nodal values at j + offset on the affine-periodic extension
    u(s + L) = u(s) + wrap."""
    if offset == 0:
        return u
    v = np.roll(u, -offset)
    if wrap != 0.0:
        if offset > 0:
            v[-offset:] += wrap
        else:
            v[:-offset] -= wrap
    return v


def spatial_derivs(u: np.ndarray, order: int, grid: RodGrid,
                   wrap: float = 0.0) -> np.ndarray:
    """Centered periodic finite difference of the given order (1..4)."""
    if order not in _STENCILS:
        raise ParameterError(f"derivative order must be 1..4, got {order}")
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    for offset, weight in _STENCILS[order].items():
        out += weight * _shift(u, offset, wrap)
    return out / grid.spacing ** order


def reconstruct_velocities(params: RodParams, s: RodState, grid: RodGrid):
    """Translational velocities implied by the rolling constraints."""
    x1 = spatial_derivs(s.x, 1, grid, s.wrap[0])
    y1 = spatial_derivs(s.y, 1, grid, s.wrap[1])
    xdot = -params.R * s.theta_dot * y1
    ydot = params.R * s.theta_dot * x1
    return xdot, ydot


def _four_shifts(u: np.ndarray, wrap: float):
    up1 = _shift(u, 1, wrap)
    um1 = _shift(u, -1, wrap)
    up2 = _shift(u, 2, wrap)
    um2 = _shift(u, -2, wrap)
    return um2, um1, up1, up2


def _rates(params: RodParams, grid: RodGrid, wrap: np.ndarray,
           x: np.ndarray, y: np.ndarray, theta: np.ndarray,
           theta_dot: np.ndarray, with_multipliers: bool = False):
    # Hot path: the stencils are inlined with shared shifted arrays.
    R, rho, alpha, beta, K = params.R, params.rho, params.alpha, params.beta, params.K
    ds = grid.spacing
    xm2, xm1, xp1, xp2 = _four_shifts(x, wrap[0])
    ym2, ym1, yp1, yp2 = _four_shifts(y, wrap[1])
    x1 = (xp1 - xm1) / (2.0 * ds)
    y1 = (yp1 - ym1) / (2.0 * ds)
    x4 = (xp2 - 4.0 * xp1 + 6.0 * x - 4.0 * xm1 + xm2) / ds ** 4
    y4 = (yp2 - 4.0 * yp1 + 6.0 * y - 4.0 * ym1 + ym2) / ds ** 4
    th2 = (_shift(theta, 1, wrap[2]) - 2.0 * theta
           + _shift(theta, -1, wrap[2])) / ds ** 2
    xdot = -R * theta_dot * y1
    ydot = R * theta_dot * x1
    xdot1 = (_shift(xdot, 1, 0.0) - _shift(xdot, -1, 0.0)) / (2.0 * ds)
    ydot1 = (_shift(ydot, 1, 0.0) - _shift(ydot, -1, 0.0)) / (2.0 * ds)
    bracket = alpha + rho * R * R * (x1 * x1 + y1 * y1)
    thdd = (beta * th2
            - rho * R * R * theta_dot * (xdot1 * x1 + ydot1 * y1)
            + R * K * (x4 * y1 - y4 * x1)) / bracket
    if not with_multipliers:
        return xdot, ydot, thdd
    xdd = -R * (thdd * y1 + theta_dot * ydot1)
    ydd = R * (thdd * x1 + theta_dot * xdot1)
    lam = rho * xdd + K * x4
    mu = rho * ydd + K * y4
    return xdot, ydot, thdd, lam, mu


def _full_rates(params: RodParams, s: RodState, grid: RodGrid) -> dict:
    """All discrete quantities entering the field equations at one state,
    evaluated with the solver's own operators (no independent rounding)."""
    R, rho, K = params.R, params.rho, params.K
    ds = grid.spacing
    x, y = s.x, s.y
    xm2, xm1, xp1, xp2 = _four_shifts(x, s.wrap[0])
    ym2, ym1, yp1, yp2 = _four_shifts(y, s.wrap[1])
    out = {
        "x1": (xp1 - xm1) / (2.0 * ds),
        "y1": (yp1 - ym1) / (2.0 * ds),
        "x4": (xp2 - 4.0 * xp1 + 6.0 * x - 4.0 * xm1 + xm2) / ds ** 4,
        "y4": (yp2 - 4.0 * yp1 + 6.0 * y - 4.0 * ym1 + ym2) / ds ** 4,
        "th2": (_shift(s.theta, 1, s.wrap[2]) - 2.0 * s.theta
                + _shift(s.theta, -1, s.wrap[2])) / ds ** 2,
    }
    thdd, lam, mu = rod_accel(params, s, grid)
    xdot = -R * s.theta_dot * out["y1"]
    ydot = R * s.theta_dot * out["x1"]
    out.update(
        xdot=xdot, ydot=ydot,
        xdot1=(_shift(xdot, 1, 0.0) - _shift(xdot, -1, 0.0)) / (2.0 * ds),
        ydot1=(_shift(ydot, 1, 0.0) - _shift(ydot, -1, 0.0)) / (2.0 * ds),
        thdd=thdd, lam=lam, mu=mu,
    )
    out["xdd"] = -R * (thdd * out["y1"] + s.theta_dot * out["ydot1"])
    out["ydd"] = R * (thdd * out["x1"] + s.theta_dot * out["xdot1"])
    return out


def rod_accel(params: RodParams, s: RodState, grid: RodGrid):
    """Angular acceleration and recovered multipliers at one instant.

    Returns ``(theta_ddot, lam, mu)``; together with the accelerations
    implied by the differentiated constraints these satisfy all three
    field equations to roundoff.
    """
    _, _, thdd, lam, mu = _rates(params, grid, s.wrap, s.x, s.y, s.theta,
                                 s.theta_dot, with_multipliers=True)
    return thdd, lam, mu


def rod_step(params: RodParams, s: RodState, grid: RodGrid, h: float) -> RodState:
    """One RK4 step on ``(x, y, theta, theta_dot)``.  The rolling
    constraints hold exactly at every stage because the translational
    rates are reconstructed, never integrated independently."""
    if h < 0:
        raise ParameterError("step size must be nonnegative")
    if h == 0:
        return s
    w = s.wrap

    def f(x, y, th, thd):
        xd, yd, thdd = _rates(params, grid, w, x, y, th, thd)
        return xd, yd, thd, thdd

    x, y, th, thd = s.x, s.y, s.theta, s.theta_dot
    k1 = f(x, y, th, thd)
    k2 = f(x + 0.5 * h * k1[0], y + 0.5 * h * k1[1],
           th + 0.5 * h * k1[2], thd + 0.5 * h * k1[3])
    k3 = f(x + 0.5 * h * k2[0], y + 0.5 * h * k2[1],
           th + 0.5 * h * k2[2], thd + 0.5 * h * k2[3])
    k4 = f(x + h * k3[0], y + h * k3[1], th + h * k3[2], thd + h * k3[3])
    sixth = h / 6.0
    new = [old + sixth * (a + 2.0 * b + 2.0 * c + d)
           for old, a, b, c, d in zip((x, y, th, thd), k1, k2, k3, k4)]
    if not all(np.isfinite(arr).all() for arr in new):
        raise BlowUpError(f"non-finite nodal values after step from t={s.t:.6g}")
    return RodState(s.t + h, new[0], new[1], new[2], new[3], wrap=w)


def energy_density(params: RodParams, s: RodState, grid: RodGrid) -> np.ndarray:
    """Nodal energy density: kinetic + bending + torsion."""
    xdot, ydot = reconstruct_velocities(params, s, grid)
    x2 = spatial_derivs(s.x, 2, grid, s.wrap[0])
    y2 = spatial_derivs(s.y, 2, grid, s.wrap[1])
    th1 = spatial_derivs(s.theta, 1, grid, s.wrap[2])
    return 0.5 * (params.rho * (xdot ** 2 + ydot ** 2)
                  + params.alpha * s.theta_dot ** 2
                  + params.K * (x2 ** 2 + y2 ** 2)
                  + params.beta * th1 ** 2)


def rod_energy(params: RodParams, s: RodState, grid: RodGrid) -> float:
    """Total energy: nodal density summed times the grid spacing."""
    return float(np.sum(energy_density(params, s, grid)) * grid.spacing)


def stable_step(params: RodParams, grid: RodGrid) -> float:
    """Heuristic explicit-step bound.  Flexural waves on the grid reach
    angular frequency about 4 sqrt(K/rho) / ds^2 and torsion about
    2 sqrt(beta/alpha) / ds; RK4 tolerates |h w| up to ~2.8, kept with
    margin."""
    ds = grid.spacing
    omega = (4.0 * math.sqrt(params.K / params.rho) / ds ** 2
             + 2.0 * math.sqrt(params.beta / params.alpha) / ds)
    return 2.5 / omega


def rod_simulate(params: RodParams, s0: RodState, grid: RodGrid, T: float,
                 h: float, record_every: int = 1) -> FieldHistory:
    """Integrate for ``ceil(T/h)`` steps, recording every
    ``record_every``-th state with its multipliers and total energy."""
    if h <= 0:
        raise ParameterError("step size must be positive")
    if T < 0:
        raise ParameterError("horizon must be nonnegative")
    if record_every < 1:
        raise ParameterError("record_every must be at least 1")
    if s0.n_nodes != grid.n_nodes:
        raise ParameterError(
            f"state has {s0.n_nodes} nodes but grid has {grid.n_nodes}")
    bound = stable_step(params, grid)
    if h > bound:
        warnings.warn(
            f"step {h:.3e} exceeds the stability heuristic {bound:.3e}; "
            f"expect blow-up", stacklevel=2)
    n_steps = int(math.ceil(T / h - 1e-12))
    hist = FieldHistory(dt=h * record_every)
    s = s0
    for i in range(n_steps + 1):
        if i % record_every == 0:
            thdd, lam, mu = rod_accel(params, s, grid)
            hist.append(s, lam, mu, rod_energy(params, s, grid))
        if i < n_steps:
            try:
                s = rod_step(params, s, grid, h)
            except BlowUpError as exc:
                exc.step_index = i + 1
                raise
    return hist


def _rel_residual(residual, *terms) -> float:
    scale = max((float(np.abs(t).max()) for t in terms), default=0.0)
    return float(np.abs(residual).max()) / max(scale, 1e-300)


def field_equation_residuals(params: RodParams, s: RodState, grid: RodGrid) -> dict:
    """Max relative residuals of the three field equations for the
    recovered ``(theta_ddot, lambda, mu)``.

    The translational accelerations come from the differentiated
    constraints, so the constraints hold exactly and the three equations
    carry the whole consistency burden; the rotation equation is the
    nontrivial one (the elimination algebra).  All derivatives are the
    solver's own discrete quantities; normalization is by the largest term
    magnitude in each equation over the grid."""
    rho, alpha, beta, K, R = (params.rho, params.alpha, params.beta,
                              params.K, params.R)
    q = _full_rates(params, s, grid)
    r1 = _rel_residual(rho * q["xdd"] + K * q["x4"] - q["lam"],
                       rho * q["xdd"], K * q["x4"], q["lam"])
    r2 = _rel_residual(rho * q["ydd"] + K * q["y4"] - q["mu"],
                       rho * q["ydd"], K * q["y4"], q["mu"])
    r3 = _rel_residual(
        alpha * q["thdd"] - beta * q["th2"] - R * (q["lam"] * q["y1"] - q["mu"] * q["x1"]),
        alpha * q["thdd"], beta * q["th2"], R * q["lam"] * q["y1"], R * q["mu"] * q["x1"])
    # differentiated constraints, with the same shared quantities
    r4 = _rel_residual(q["xdd"] + R * (q["thdd"] * q["y1"] + s.theta_dot * q["ydot1"]),
                       q["xdd"], R * q["thdd"] * q["y1"], R * s.theta_dot * q["ydot1"])
    r5 = _rel_residual(q["ydd"] - R * (q["thdd"] * q["x1"] + s.theta_dot * q["xdot1"]),
                       q["ydd"], R * q["thdd"] * q["x1"], R * s.theta_dot * q["xdot1"])
    return {"translation_x": r1, "translation_y": r2, "rotation": r3,
            "constraint_x": r4, "constraint_y": r5,
            "max": max(r1, r2, r3, r4, r5)}


def translation_identity_residual(params: RodParams, s: RodState,
                                  grid: RodGrid) -> float:
    """Max relative residual of the multiplier-free identity

        R y' (rho xdd + K x'''') - R x' (rho ydd + K y'''')
            = alpha thetadd - beta theta''

    which the eliminated solution satisfies exactly (independent of grid
    resolution); only roundoff remains."""
    alpha, beta, R = params.alpha, params.beta, params.R
    q = _full_rates(params, s, grid)
    lhs = R * (q["y1"] * q["lam"] - q["x1"] * q["mu"])
    rhs = alpha * q["thdd"] - beta * q["th2"]
    terms = (R * q["y1"] * q["lam"], R * q["x1"] * q["mu"],
             alpha * q["thdd"], beta * q["th2"])
    return _rel_residual(lhs - rhs, *terms)


def perturbed_ring_state(grid: RodGrid, stretch_amp: float = 0.004,
                         bend_amp: float = 0.004, bend_amp2: float = 0.0015,
                         twist_amp: float = 0.01, spin: float = 0.5,
                         spin_wobble: float = 0.02) -> RodState:
    """Perturbed rolling rod on the periodic material ring: the straight
    uniformly rolling configuration (the system's equilibrium family) plus
    smooth low-mode ripples in stretch, deflection, twist and spin.  The
    straight shape lives on the ring through the x wrap offset.

    Smooth low-mode data keeps the dynamics resolvable at desk scale;
    see :func:`circular_loop_state` for the energetic closed-loop case.
    """
    s = grid.nodes
    L = grid.length
    angle = 2.0 * math.pi * s / L
    x = s + stretch_amp * np.sin(angle)
    y = bend_amp * np.cos(angle) + bend_amp2 * np.sin(2.0 * angle)
    theta = twist_amp * np.sin(angle)
    theta_dot = spin + spin_wobble * np.cos(angle)
    return RodState(0.0, x, y, theta, theta_dot,
                    wrap=np.array([L, 0.0, 0.0]))


def circular_loop_state(grid: RodGrid, radius_wobble: float = 0.05,
                        theta_amp: float = 0.1, spin: float = 0.5,
                        spin_wobble: float = 0.3) -> RodState:
    """Closed circular loop with a radial wobble, twisted and spinning.

    Through the rolling coupling a closed loop trades bending energy for
    spin and contracts (figure-skater effect), so this configuration
    develops strong gradients quickly; use it for exploratory runs, not
    convergence studies."""
    s = grid.nodes
    L = grid.length
    r0 = L / (2.0 * math.pi)
    angle = 2.0 * math.pi * s / L
    r = r0 * (1.0 + radius_wobble * np.cos(2.0 * angle))
    x = r * np.cos(angle)
    y = r * np.sin(angle)
    theta = theta_amp * np.sin(angle)
    theta_dot = spin + spin_wobble * np.cos(angle)
    return RodState(0.0, x, y, theta, theta_dot)


def straight_twisted_state(grid: RodGrid, twist: float = 0.5) -> RodState:
    """Straight rod along x at rest with uniform twist rate; uses wrap
    offsets to live on the periodic grid."""
    s = grid.nodes
    zeros = np.zeros(grid.n_nodes)
    return RodState(0.0, s.copy(), zeros.copy(), twist * s, zeros.copy(),
                    wrap=np.array([grid.length, 0.0, twist * grid.length]))


def rod_constraint_spec(R: float) -> ConstraintSpec:
    """Pointwise jet-level form of the rolling constraints, for reaction
    bases and admissibility sampling.  Fields are ordered (x, y, theta),
    base coordinates (s, t)."""

    def phi(p):
        x1, xdot = p.jet1[0]
        y1, ydot = p.jet1[1]
        _, thdot = p.jet1[2]
        return np.array([xdot + R * thdot * y1, ydot - R * thdot * x1])

    def d_jet1(p):
        x1 = p.jet1[0, 0]
        y1 = p.jet1[1, 0]
        thdot = p.jet1[2, 1]
        out = np.zeros((2, 3, 2))
        out[0, 0, 1] = 1.0
        out[0, 1, 0] = R * thdot
        out[0, 2, 1] = R * y1
        out[1, 1, 1] = 1.0
        out[1, 0, 0] = -R * thdot
        out[1, 2, 1] = -R * x1
        return out

    return ConstraintSpec(
        count=2,
        value=phi,
        d_jet1=d_jet1,
        d_fields=lambda p: np.zeros((2, 3)),
        d_base=lambda p: np.zeros((2, 2)),
        n_fields=3,
        n_base=2,
    )


def rod_pointwise_system(params: RodParams) -> JetSystem:
    """Constraint-only view of the rod for symmetry searches; the rod is a
    distinguished-time theory, so the noncovariant reaction rule applies."""
    return JetSystem(
        n_fields=3,
        signature=ROD_SIG,
        constraints=rod_constraint_spec(params.R),
        reaction_flavor=NONCOVARIANT,
    )


def rod_translation_section(R: float) -> SymmetrySection:
    """The rolling-compatible combination of the planar translations and
    the rotation: ``-R y' d/dx + R x' d/dy + d/dtheta``."""
    gens = tuple(np.eye(3))

    def coeff(p):
        return np.array([-R * p.jet1[1, 0], R * p.jet1[0, 0], 1.0])

    return SymmetrySection(gens, coeff, None, generalized=True)
