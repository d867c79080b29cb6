"""Momentum maps in coordinates and momentum-equation residuals.

For mechanics the momentum of a section is the scalar

    J = xi^a dL/dv^a + xi^t (L - v^a dL/dv^a)

and along a computed trajectory the balance law reads

    dJ/dt = xi^a dL/dq^a + (D xi^a / Dt) dL/dv^a

(zero right side for time translation of an autonomous Lagrangian).  The
left side is differenced to fourth order so that residuals expose
modeling error, not differentiation error.

For the rod a momentum is a pair of nodal component fields (P, Q),
meaning the one-form ``P ds + Q dt``; its balance law is the nodal
residual ``dQ/ds - dP/dt - rhs`` with the volume element fixed as
``ds ^ dt``.  Two instances are implemented: the energy current of time
translation (rhs = 0, local energy conservation) and the momentum of the
rolling-compatible translation/rotation combination, whose rhs is the
work density of the rolling coupling.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from types import SimpleNamespace

import numpy as np

from .errors import InsufficientDataError, ParameterError, StructuralError
from .jets import (NONCOVARIANT, SymmetrySection, chetaev_covariant,
                   chetaev_noncovariant, contract_reaction, field_component,
                   prolong_many)
from .mechanics import MechState, MechSystem, Trajectory, solve_multipliers
from .rod import (FieldHistory, RodGrid, RodParams, RodState, energy_density,
                  reconstruct_velocities, spatial_derivs)


@dataclass(frozen=True)
class MomentumField:
    """Per-node momentum components at one instant: the one-form
    ``P ds + Q dt`` sampled on the grid."""

    t: float
    P: np.ndarray
    Q: np.ndarray


@dataclass(frozen=True)
class ResidualSeries:
    """Scalar residual per sample time with norm summaries (``l2`` is the
    root-mean-square over samples)."""

    times: np.ndarray
    values: np.ndarray
    max_abs: float
    l2: float

    @classmethod
    def build(cls, times, values) -> "ResidualSeries":
        times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float)
        if not np.all(np.isfinite(values)):
            raise ParameterError("residual series contains non-finite values")
        max_abs = float(np.abs(values).max()) if values.size else 0.0
        l2 = float(np.sqrt(np.mean(values ** 2))) if values.size else 0.0
        return cls(times, values, max_abs, l2)


# 4th-order first-derivative stencils: centered interior, one-sided ends.
_END0 = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0
_END1 = np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / 12.0


def _time_derivative(values: np.ndarray, dt: float) -> np.ndarray:
    """Differentiate along axis 0 (works for 1-d series and (m, N) stacks)."""
    v = np.asarray(values, dtype=float)
    if v.shape[0] < 5:
        raise InsufficientDataError(
            "need at least 5 samples for the fourth-order time stencil")
    out = np.empty_like(v)
    out[2:-2] = (v[:-4] - 8.0 * v[1:-3] + 8.0 * v[3:-1] - v[4:]) / (12.0 * dt)
    out[0] = np.tensordot(_END0, v[:5], axes=(0, 0)) / dt
    out[1] = np.tensordot(_END1, v[:5], axes=(0, 0)) / dt
    out[-2] = -np.tensordot(_END1, v[-5:][::-1], axes=(0, 0)) / dt
    out[-1] = -np.tensordot(_END0, v[-5:][::-1], axes=(0, 0)) / dt
    return out


def momentum_mech(section: SymmetrySection, sys: MechSystem, s: MechState) -> float:
    """Momentum of a section at one mechanical state."""
    if sys.lagrangian is None:
        raise StructuralError(
            "momentum evaluation needs the system's Lagrangian data")
    p = sys.jet_point(s)
    dLdv = np.asarray(sys.lagrangian.d_jet1(p), dtype=float)[:, 0]
    xi = field_component(section, p)
    J = float(xi @ dLdv)
    if section.horizontal_part is not None:
        xi_t = float(section.horizontal_part[0])
        if xi_t != 0.0:
            J += xi_t * (float(sys.lagrangian.value(p)) - float(s.v @ dLdv))
    return J


def _mech_basis(sys: MechSystem, p):
    if sys.reaction_flavor == NONCOVARIANT:
        return chetaev_noncovariant(sys.constraints, p, sys.signature)
    return chetaev_covariant(sys.constraints, p)


def momentum_equation_residuals_mech(sections, sys: MechSystem,
                                     traj: Trajectory,
                                     admissibility_tol: float = 1e-8) -> list:
    """Momentum-balance residual series for several sections in one pass
    over the trajectory (the per-state solve and reaction basis are
    shared).  See :func:`momentum_equation_residual_mech`."""
    sections = list(sections)
    if len(traj) < 5:
        raise InsufficientDataError(
            "trajectory too short for the fourth-order time stencil")
    if sys.lagrangian is None:
        raise StructuralError(
            "momentum evaluation needs the system's Lagrangian data")
    m = len(traj)
    n_sec = len(sections)
    J = np.empty((m, n_sec))
    rhs = np.empty((m, n_sec))
    worst = np.zeros(n_sec)
    # admissibility is a sampled pre-check; cap its cost on long runs
    adm_stride = max(1, m // 1024)
    for i, s in enumerate(traj.states):
        _, accel = solve_multipliers(sys, s)
        p2 = sys.jet_point(s, accel)
        check_adm = sys.constraints.count and i % adm_stride == 0
        basis = _mech_basis(sys, p2) if check_adm else None
        dLdq = np.asarray(sys.lagrangian.d_fields(p2), dtype=float)
        dLdv = np.asarray(sys.lagrangian.d_jet1(p2), dtype=float)[:, 0]
        L_val = None
        lifted = prolong_many(sections, p2)
        for j, section in enumerate(sections):
            xi = lifted[j].field_comp
            J[i, j] = xi @ dLdv
            if section.horizontal_part is not None:
                xi_t = float(section.horizontal_part[0])
                if xi_t != 0.0:
                    if L_val is None:
                        L_val = float(sys.lagrangian.value(p2))
                    J[i, j] += xi_t * (L_val - float(s.v @ dLdv))
            if basis is not None:
                contr = contract_reaction(lifted[j], basis, p2)
                worst[j] = max(worst[j], float(np.abs(contr).max()))
            xi_rate = lifted[j].jet1_comp[:, 0]
            rhs[i, j] = float(xi @ dLdq + xi_rate @ dLdv)
    for j, section in enumerate(sections):
        if worst[j] > admissibility_tol:
            warnings.warn(
                f"section {j} is not admissible along the trajectory "
                f"(max reaction contraction {worst[j]:.3e}); the balance law "
                f"need not hold", stacklevel=2)
    out = []
    for j in range(n_sec):
        dJdt = _time_derivative(J[:, j], traj.h)
        out.append(ResidualSeries.build(traj.times, dJdt - rhs[:, j]))
    return out


def momentum_equation_residual_mech(section: SymmetrySection, sys: MechSystem,
                                    traj: Trajectory,
                                    admissibility_tol: float = 1e-8) -> ResidualSeries:
    """Residual of the momentum balance along a trajectory.

    The momentum series is differenced in time and compared with the
    analytic right side assembled from the Lagrangian partials.  Warns
    (but still evaluates) when the section fails to annihilate the
    reaction forces along the trajectory.  The right side assumes an
    autonomous Lagrangian for sections with a horizontal part.
    """
    return momentum_equation_residuals_mech(
        [section], sys, traj, admissibility_tol=admissibility_tol)[0]


def _rod_jets(params: RodParams, s: RodState, grid: RodGrid) -> SimpleNamespace:
    x1 = spatial_derivs(s.x, 1, grid, s.wrap[0])
    y1 = spatial_derivs(s.y, 1, grid, s.wrap[1])
    x2 = spatial_derivs(s.x, 2, grid, s.wrap[0])
    y2 = spatial_derivs(s.y, 2, grid, s.wrap[1])
    x3 = spatial_derivs(s.x, 3, grid, s.wrap[0])
    y3 = spatial_derivs(s.y, 3, grid, s.wrap[1])
    th1 = spatial_derivs(s.theta, 1, grid, s.wrap[2])
    xdot, ydot = reconstruct_velocities(params, s, grid)
    xdot1 = spatial_derivs(xdot, 1, grid)
    ydot1 = spatial_derivs(ydot, 1, grid)
    return SimpleNamespace(x1=x1, y1=y1, x2=x2, y2=y2, x3=x3, y3=y3,
                           th1=th1, xdot=xdot, ydot=ydot,
                           xdot1=xdot1, ydot1=ydot1)


def rod_energy_current(params: RodParams, s: RodState, grid: RodGrid) -> MomentumField:
    """Momentum of time translation: P is the energy density, Q the energy
    flux through a cross-section."""
    g = _rod_jets(params, s, grid)
    K, beta = params.K, params.beta
    P = energy_density(params, s, grid)
    Q = (-K * (g.x3 * g.xdot + g.y3 * g.ydot)
         + beta * g.th1 * s.theta_dot
         + K * (g.x2 * g.xdot1 + g.y2 * g.ydot1))
    return MomentumField(s.t, P, Q)


def rod_translation_momentum(params: RodParams, s: RodState,
                             grid: RodGrid) -> MomentumField:
    """Momentum of the rolling-compatible translation/rotation direction."""
    g = _rod_jets(params, s, grid)
    rho, alpha, K, beta, R = (params.rho, params.alpha, params.K,
                              params.beta, params.R)
    P = -(rho * R * (g.x1 * g.ydot - g.y1 * g.xdot) + alpha * s.theta_dot)
    Q = -(K * R * (g.y1 * g.x3 - g.x1 * g.y3) + beta * g.th1)
    return MomentumField(s.t, P, Q)


def momentum_equation_residual_rod(params: RodParams, hist: FieldHistory,
                                   grid: RodGrid, which: str) -> ResidualSeries:
    """Nodal balance-law residual ``dQ/ds - dP/dt - rhs`` along a recorded
    history, reported as the max over nodes per sample time.

    ``which`` selects the momentum: ``"energy"`` (rhs = 0) or
    ``"translation"`` (rhs = work density of the rolling coupling).  Both
    residuals vanish with the discretization; the identity checked by
    :func:`nhlab.rod.translation_identity_residual` is the exact-algebra
    counterpart of the translation case.
    """
    if which not in ("energy", "translation"):
        raise ParameterError(f"unknown momentum selector {which!r}")
    m = len(hist)
    if m < 5:
        raise InsufficientDataError(
            "need at least 5 recorded snapshots for the time stencil")
    n = grid.n_nodes
    P = np.empty((m, n))
    Q = np.empty((m, n))
    rhs = np.zeros((m, n))
    for i, s in enumerate(hist.states):
        if which == "energy":
            mom = rod_energy_current(params, s, grid)
        else:
            mom = rod_translation_momentum(params, s, grid)
            g = _rod_jets(params, s, grid)
            rhs[i] = (params.rho * params.R * (g.xdot1 * g.ydot - g.ydot1 * g.xdot)
                      + params.K * params.R * (g.y3 * g.x2 - g.x3 * g.y2))
        P[i] = mom.P
        Q[i] = mom.Q
    dPdt = _time_derivative(P, hist.dt)
    dQds = np.empty_like(Q)
    for i in range(m):
        dQds[i] = spatial_derivs(Q[i], 1, grid)
    resid = dQds - dPdt - rhs
    values = np.abs(resid).max(axis=1)
    return ResidualSeries.build(hist.times, values)
