"""Nonholonomic point mechanics: multiplier elimination + RK4 + projection.

The equations of motion are ``M(q) qdd = F(t, q, v) + C(q, v)^T lambda``
where ``C = d(phi)/dv`` is the constraint velocity-gradient.  The
multipliers are eliminated by requiring ``d(phi)/dt = 0`` along the
solution, which yields the k-by-k solve

    (C M^-1 C^T) lambda = -(dphi/dq . v + dphi/dt + C M^-1 F).

Time stepping is classical RK4 on ``(q, v)`` followed by a minimal-norm
(in the ``M`` metric) velocity correction that returns the state to the
constraint set whenever drift exceeds ``drift_tolerance``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ParameterError, SingularConstraintError
from .jets import (COVARIANT, MECHANICS_SIG, BaseSignature, ConstraintSpec,
                   JetPoint, LagrangianSpec, SymmetrySection, eval_constraints)


@dataclass(frozen=True)
class MechState:
    """Time, configuration, velocity."""

    t: float
    q: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        q = np.atleast_1d(np.asarray(self.q, dtype=float))
        v = np.atleast_1d(np.asarray(self.v, dtype=float))
        if q.shape != v.shape:
            raise ParameterError(f"q has shape {q.shape} but v has shape {v.shape}")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "v", v)

    @classmethod
    def _raw(cls, t, q, v) -> "MechState":
        """Internal fast path for integrator stages (arrays known good)."""
        s = object.__new__(cls)
        object.__setattr__(s, "t", t)
        object.__setattr__(s, "q", q)
        object.__setattr__(s, "v", v)
        return s


@dataclass(frozen=True)
class MechSystem:
    """A constrained mechanical system.

    ``force`` returns everything in the equations of motion besides
    ``M(q) qdd`` and the reaction term (conservative forces, gyroscopic
    terms, ...).  ``lagrangian`` is optional and only consumed by the
    momentum diagnostics.
    """

    n_fields: int
    mass: Callable[[np.ndarray], np.ndarray]
    force: Callable[[float, np.ndarray, np.ndarray], np.ndarray]
    constraints: ConstraintSpec
    reaction_flavor: str = COVARIANT
    params: dict = field(default_factory=dict)
    lagrangian: Optional[LagrangianSpec] = None
    drift_tolerance: float = 1e-9
    #: inverse mass matrix for configuration-independent M (skips the solve)
    mass_inv: Optional[np.ndarray] = None

    @property
    def signature(self) -> BaseSignature:
        return MECHANICS_SIG

    def jet_point(self, s: MechState, accel: Optional[np.ndarray] = None) -> JetPoint:
        """View a state as a jet point (with second-order data when the
        accelerations are supplied)."""
        jet2 = None if accel is None else np.asarray(accel, dtype=float)[:, None, None]
        return JetPoint._raw(np.array([s.t]), s.q, s.v.reshape(-1, 1), jet2)

    def residual(self, s: MechState) -> np.ndarray:
        return eval_constraints(self.constraints, self.jet_point(s))


@dataclass
class Trajectory:
    """Uniformly spaced states with per-step multipliers and residuals."""

    h: float
    states: list = field(default_factory=list)
    multipliers: list = field(default_factory=list)
    residuals: list = field(default_factory=list)

    def append(self, s: MechState, lam: np.ndarray, res: np.ndarray) -> None:
        self.states.append(s)
        self.multipliers.append(lam)
        self.residuals.append(res)

    def __len__(self) -> int:
        return len(self.states)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    @property
    def positions(self) -> np.ndarray:
        return np.array([s.q for s in self.states])

    @property
    def velocities(self) -> np.ndarray:
        return np.array([s.v for s in self.states])

    @property
    def multiplier_array(self) -> np.ndarray:
        return np.array(self.multipliers)

    @property
    def residual_array(self) -> np.ndarray:
        return np.array(self.residuals)


def _constraint_terms(sys: MechSystem, s: MechState):
    p = sys.jet_point(s)
    C = sys.constraints.d_jet1(p)[:, :, 0]
    dq = sys.constraints.d_fields(p)
    dt = sys.constraints.d_base(p)[:, 0]
    return C, dq, dt


def _check_regular(A: np.ndarray, s: MechState) -> None:
    if A.shape == (1, 1):
        singular = A[0, 0] == 0.0
    else:
        sv = np.linalg.svd(A, compute_uv=False)
        singular = sv[0] == 0.0 or sv[-1] <= 1e-12 * sv[0]
    if singular:
        raise SingularConstraintError(
            f"constraint velocity-gradient is rank-deficient at t={s.t:.6g}, "
            f"q={np.array2string(s.q, precision=6)}, "
            f"v={np.array2string(s.v, precision=6)}")


def solve_multipliers(sys: MechSystem, s: MechState):
    """Multipliers and accelerations making d(phi)/dt vanish at ``s``.

    Returns ``(lam, accel)`` with ``accel = M^-1 (F + C^T lam)``.
    """
    F = np.asarray(sys.force(s.t, s.q, s.v), dtype=float)
    if sys.constraints.count == 0:
        if sys.mass_inv is not None:
            return np.zeros(0), sys.mass_inv @ F
        return np.zeros(0), np.linalg.solve(np.asarray(sys.mass(s.q), float), F)
    C, dq, dt = _constraint_terms(sys, s)
    stacked = np.concatenate([F[:, None], C.T], axis=1)
    if sys.mass_inv is not None:
        sol = sys.mass_inv @ stacked
    else:
        sol = np.linalg.solve(np.asarray(sys.mass(s.q), dtype=float), stacked)
    Minv_F = sol[:, 0]
    Minv_Ct = sol[:, 1:]
    A = C @ Minv_Ct
    _check_regular(A, s)
    rhs = -(dq @ s.v + dt + C @ Minv_F)
    if A.shape == (1, 1):
        lam = rhs / A[0, 0]
    else:
        lam = np.linalg.solve(A, rhs)
    return lam, Minv_F + Minv_Ct @ lam


def project(sys: MechSystem, s: MechState) -> MechState:
    """One Newton step of minimal-norm velocity correction onto the
    constraint set; a no-op when drift is already within tolerance."""
    if sys.constraints.count == 0:
        return s
    phi = sys.residual(s)
    if np.abs(phi).max() <= sys.drift_tolerance:
        return s
    C, _, _ = _constraint_terms(sys, s)
    if sys.mass_inv is not None:
        Minv_Ct = sys.mass_inv @ C.T
    else:
        Minv_Ct = np.linalg.solve(np.asarray(sys.mass(s.q), dtype=float), C.T)
    A = C @ Minv_Ct
    _check_regular(A, s)
    if A.shape == (1, 1):
        delta = -phi / A[0, 0]
    else:
        delta = np.linalg.solve(A, -phi)
    return MechState(s.t, s.q, s.v + Minv_Ct @ delta)


def step(sys: MechSystem, s: MechState, h: float,
         accel0: Optional[np.ndarray] = None) -> MechState:
    """One RK4 step of size ``h`` followed by velocity projection.
    ``accel0`` may pass in a precomputed acceleration at ``s``."""
    if h < 0:
        raise ParameterError("step size must be nonnegative")
    if h == 0:
        return s

    def accel(t, q, v):
        _, a = solve_multipliers(sys, MechState._raw(t, q, v))
        return a

    t, q, v = s.t, s.q, s.v
    a1 = accel(t, q, v) if accel0 is None else accel0
    q2 = q + 0.5 * h * v
    v2 = v + 0.5 * h * a1
    a2 = accel(t + 0.5 * h, q2, v2)
    q3 = q + 0.5 * h * v2
    v3 = v + 0.5 * h * a2
    a3 = accel(t + 0.5 * h, q3, v3)
    q4 = q + h * v3
    v4 = v + h * a3
    a4 = accel(t + h, q4, v4)
    q_new = q + (h / 6.0) * (v + 2.0 * v2 + 2.0 * v3 + v4)
    v_new = v + (h / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
    return project(sys, MechState._raw(t + h, q_new, v_new))


def simulate(sys: MechSystem, s0: MechState, T: float, h: float) -> Trajectory:
    """Integrate for ``ceil(T/h)`` steps, recording state, multipliers and
    constraint residuals at every step.

    A rank-deficient constraint aborts the run; the raised
    :class:`SingularConstraintError` carries the partial trajectory in its
    ``partial`` attribute.
    """
    if h <= 0:
        raise ParameterError("step size must be positive")
    if T < 0:
        raise ParameterError("horizon must be nonnegative")
    res0 = sys.residual(s0)
    if res0.size and np.abs(res0).max() > sys.drift_tolerance:
        raise ParameterError(
            f"initial state violates the constraints (max |phi| = "
            f"{np.abs(res0).max():.3e})")
    n_steps = int(math.ceil(T / h - 1e-12))
    traj = Trajectory(h=h)
    s = s0
    for i in range(n_steps + 1):
        try:
            lam, accel = solve_multipliers(sys, s)
            traj.append(s, lam, sys.residual(s))
            if i < n_steps:
                s = step(sys, s, h, accel0=accel)
        except SingularConstraintError as exc:
            exc.partial = traj
            raise
    return traj


def benenti_system(m: float, g: float = 0.0) -> MechSystem:
    """Two point masses on a plane with parallel-velocity constraint.

    Fields are ordered ``(x1, y1, x2, y2)``; the constraint is
    ``vx1 * vy2 - vx2 * vy1 = 0``.  The original system is force-free;
    ``g`` adds a uniform downward force on ``y1`` (an extension, default
    off) so that multiplier solves are exercised nontrivially.
    """
    if m <= 0:
        raise ParameterError("mass m must be positive")
    if g < 0:
        raise ParameterError("forcing parameter g must be nonnegative")
    mass_matrix = m * np.eye(4)
    force_vec = np.array([0.0, -m * g, 0.0, 0.0])

    def phi(p):
        v = p.jet1[:, 0]
        return np.array([v[0] * v[3] - v[2] * v[1]])

    def d_jet1(p):
        v = p.jet1[:, 0]
        return np.array([v[3], -v[2], -v[1], v[0]]).reshape(1, 4, 1)

    constraints = ConstraintSpec(
        count=1,
        value=phi,
        d_jet1=d_jet1,
        d_fields=lambda p: np.zeros((1, 4)),
        d_base=lambda p: np.zeros((1, 1)),
        n_fields=4,
        n_base=1,
    )

    def lag_value(p):
        v = p.jet1[:, 0]
        return 0.5 * m * float(v @ v) - m * g * p.fields[1]

    lagrangian = LagrangianSpec(
        value=lag_value,
        d_fields=lambda p: np.array([0.0, -m * g, 0.0, 0.0]),
        d_jet1=lambda p: m * p.jet1.copy(),
    )
    return MechSystem(
        n_fields=4,
        mass=lambda q: mass_matrix,
        force=lambda t, q, v: force_vec,
        constraints=constraints,
        reaction_flavor=COVARIANT,
        params={"m": m, "g": g},
        lagrangian=lagrangian,
        mass_inv=np.eye(4) / m,
    )


def benenti_velocity_sections() -> tuple:
    """The four velocity-weighted translation directions of the Benenti
    system: ``vx1 d/dx1``, ``vy1 d/dy1``, ``vx2 d/dx2``, ``vy2 d/dy2``.
    All four are generalized (their weights read the velocities)."""
    sections = []
    eye = np.eye(4)
    for a in range(4):
        def coeff(p, _a=a):
            return p.jet1[_a:_a + 1, 0]

        sections.append(
            SymmetrySection((eye[a],), coeff, None, generalized=True))
    return tuple(sections)


def benenti_weighted_section(weights) -> SymmetrySection:
    """The translation direction with field displacement
    ``(w0 vx1, w1 vy1, w2 vx2, w3 vy2)``; equivalent to the matching
    linear combination of :func:`benenti_velocity_sections` but evaluated
    in one shot."""
    w = np.asarray(weights, dtype=float)
    if w.shape != (4,):
        raise ParameterError("weights must have four entries")
    eye = np.eye(4)

    def coeff(p, _w=w):
        return _w * p.jet1[:, 0]

    return SymmetrySection(tuple(eye), coeff, None, generalized=True)
