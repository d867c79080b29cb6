"""First- and second-order jet data, reaction-force bases, and prolongation.

A model lives over a trivial bundle: ``n_base`` independent variables
(time alone for mechanics, arclength and time for the rod) and
``n_fields`` dependent variables.  A :class:`JetPoint` bundles the values
of the independent variables, the fields, and their first (optionally
second) derivatives, using the index convention

    jet1[a, mu]      derivative of field ``a`` along base direction ``mu``
    jet2[a, mu, nu]  second derivative, symmetric in (mu, nu).

Velocity-level constraints are described by a :class:`ConstraintSpec`
(values plus closed-form partials).  Reaction-force coefficient arrays are
generated from constraints by the Chetaev rule in two flavors:

* ``covariant``: one coefficient per (constraint, field, base direction),
  ``A[k, a, mu] = d(phi_k)/d(jet1[a, mu])``;
* ``noncovariant``: only the time column, ``A[k, a] = d(phi_k)/d(jet1[a, t])``,
  appropriate when time plays a distinguished role (elastodynamics).

Candidate symmetry directions are :class:`SymmetrySection` objects, i.e.
weighted combinations of group generators whose weights may depend on
first derivatives (the "generalized" case).  :func:`prolong` lifts a
section to derivative coordinates via total derivatives.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import MissingDataError, StructuralError

COVARIANT = "covariant"
NONCOVARIANT = "noncovariant"


@dataclass(frozen=True)
class BaseSignature:
    """Shape of the independent-variable space.

    ``time_index`` singles out the coordinate treated as time by the
    noncovariant reaction rule.  ``orientation`` fixes the ordering of the
    base coordinates in the volume element (``ds ^ dt`` for the rod); all
    downstream sign conventions inherit from it.
    """

    n_base: int
    time_index: int = 0
    orientation: tuple = ()

    def __post_init__(self):
        if not 1 <= self.n_base <= 2:
            raise StructuralError(f"n_base must be 1 or 2, got {self.n_base}")
        if not 0 <= self.time_index < self.n_base:
            raise StructuralError(
                f"time_index {self.time_index} out of range for n_base {self.n_base}")
        if not self.orientation:
            object.__setattr__(self, "orientation", tuple(range(self.n_base)))
        if sorted(self.orientation) != list(range(self.n_base)):
            raise StructuralError(
                f"orientation {self.orientation} is not a permutation of the base indices")


#: time is the only base coordinate
MECHANICS_SIG = BaseSignature(n_base=1, time_index=0)
#: base coordinates ordered (s, t); volume element ds ^ dt
ROD_SIG = BaseSignature(n_base=2, time_index=1)


@dataclass(frozen=True)
class JetPoint:
    """A single point of jet data (values plus derivative coordinates)."""

    base: np.ndarray
    fields: np.ndarray
    jet1: np.ndarray
    jet2: Optional[np.ndarray] = None

    def __post_init__(self):
        base = np.atleast_1d(np.asarray(self.base, dtype=float))
        fields = np.atleast_1d(np.asarray(self.fields, dtype=float))
        jet1 = np.asarray(self.jet1, dtype=float)
        if jet1.shape != (fields.size, base.size):
            raise StructuralError(
                f"jet1 has shape {jet1.shape}, expected ({fields.size}, {base.size})")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "fields", fields)
        object.__setattr__(self, "jet1", jet1)
        if self.jet2 is not None:
            jet2 = np.asarray(self.jet2, dtype=float)
            if jet2.shape != (fields.size, base.size, base.size):
                raise StructuralError(
                    f"jet2 has shape {jet2.shape}, expected "
                    f"({fields.size}, {base.size}, {base.size})")
            scale = max(1.0, float(np.abs(jet2).max()))
            if not np.allclose(jet2, jet2.swapaxes(1, 2), rtol=0.0, atol=1e-12 * scale):
                raise StructuralError("jet2 must be symmetric in its last two axes")
            object.__setattr__(self, "jet2", jet2)

    @property
    def n_base(self) -> int:
        return self.base.size

    @property
    def n_fields(self) -> int:
        return self.fields.size

    @classmethod
    def _raw(cls, base, fields, jet1, jet2=None) -> "JetPoint":
        """Internal fast path: skip validation for arrays already known to
        be well-formed float ndarrays of matching shape."""
        p = object.__new__(cls)
        object.__setattr__(p, "base", base)
        object.__setattr__(p, "fields", fields)
        object.__setattr__(p, "jet1", jet1)
        object.__setattr__(p, "jet2", jet2)
        return p


@dataclass(frozen=True)
class LagrangianSpec:
    """Lagrangian evaluator with closed-form partials.

    ``d_jet2`` is only needed for second-order theories (``order == 2``).
    Finite differences are used solely as a cross-check oracle in tests;
    solvers rely on these callbacks.
    """

    value: Callable[[JetPoint], float]
    d_fields: Callable[[JetPoint], np.ndarray]
    d_jet1: Callable[[JetPoint], np.ndarray]
    d_jet2: Optional[Callable[[JetPoint], np.ndarray]] = None
    order: int = 1


@dataclass(frozen=True)
class ConstraintSpec:
    """``count`` velocity-level constraint functions with their partials.

    ``n_fields``/``n_base``, when declared, let operations reject points of
    the wrong shape before the evaluators see them.  ``on_manifold_tol`` is
    the default tolerance for "the point satisfies the constraints";
    override per system when units demand it.
    """

    count: int
    value: Callable[[JetPoint], np.ndarray]
    d_jet1: Callable[[JetPoint], np.ndarray]
    d_fields: Callable[[JetPoint], np.ndarray]
    d_base: Callable[[JetPoint], np.ndarray]
    n_fields: Optional[int] = None
    n_base: Optional[int] = None
    on_manifold_tol: float = 1e-9

    def check_point(self, p: JetPoint) -> None:
        if self.n_fields is not None and p.n_fields != self.n_fields:
            raise StructuralError(
                f"point has {p.n_fields} fields but the constraints expect "
                f"{self.n_fields}")
        if self.n_base is not None and p.n_base != self.n_base:
            raise StructuralError(
                f"point has {p.n_base} base coordinates but the constraints "
                f"expect {self.n_base}")

    @classmethod
    def unconstrained(cls) -> "ConstraintSpec":
        """A spec with zero constraints (free dynamics)."""
        return cls(
            count=0,
            value=lambda p: np.zeros(0),
            d_jet1=lambda p: np.zeros((0, p.n_fields, p.n_base)),
            d_fields=lambda p: np.zeros((0, p.n_fields)),
            d_base=lambda p: np.zeros((0, p.n_base)),
        )

    def is_satisfied(self, p: JetPoint, tol: Optional[float] = None) -> bool:
        tol = self.on_manifold_tol if tol is None else tol
        vals = eval_constraints(self, p)
        return bool(vals.size == 0 or np.abs(vals).max() <= tol)


@dataclass(frozen=True)
class ReactionBasis:
    """Coefficient arrays of the reaction-force generators at one point.

    Only the array matching ``flavor`` is populated; the contact/semi-basic
    structure of the force forms is encoded in the contraction formula, not
    stored.
    """

    flavor: str
    covariant: Optional[np.ndarray] = None      # (k, n_fields, n_base)
    noncovariant: Optional[np.ndarray] = None   # (k, n_fields)

    def __post_init__(self):
        if self.flavor == COVARIANT:
            if self.covariant is None:
                raise StructuralError("covariant basis requested but array missing")
        elif self.flavor == NONCOVARIANT:
            if self.noncovariant is None:
                raise StructuralError("noncovariant basis requested but array missing")
        else:
            raise StructuralError(f"unknown reaction flavor {self.flavor!r}")

    @property
    def count(self) -> int:
        arr = self.covariant if self.flavor == COVARIANT else self.noncovariant
        return arr.shape[0]


@dataclass(frozen=True)
class SymmetrySection:
    """A candidate symmetry: weighted combination of group directions.

    ``generators[A]`` is the infinitesimal field displacement of group
    direction ``A``: either a constant vector or a callable evaluated at
    the underlying point (it may read ``base`` and ``fields``, never
    ``jet1``).  ``coefficients`` returns the weights; it may read ``jet1``
    only when ``generalized`` is True.  ``horizontal_part`` is a constant
    motion of the base coordinates (e.g. time translation); it cannot be
    combined with generalized weights, and when present the weights may
    depend only on base and fields.
    """

    generators: tuple
    coefficients: Callable[[JetPoint], np.ndarray]
    horizontal_part: Optional[np.ndarray] = None
    generalized: bool = False

    def __post_init__(self):
        gens = tuple(
            np.atleast_1d(np.asarray(g, dtype=float)) if not callable(g) else g
            for g in self.generators)
        object.__setattr__(self, "generators", gens)
        # constant generators collapse to one matrix multiply per evaluation
        if gens and all(isinstance(g, np.ndarray) for g in gens):
            object.__setattr__(self, "_gen_matrix", np.vstack(gens))
        else:
            object.__setattr__(self, "_gen_matrix", None)
        if self.horizontal_part is not None:
            hp = np.atleast_1d(np.asarray(self.horizontal_part, dtype=float))
            object.__setattr__(self, "horizontal_part", hp)
            if self.generalized:
                raise StructuralError(
                    "a section with derivative-dependent coefficients cannot "
                    "carry a horizontal part")

    @property
    def n_gen(self) -> int:
        return len(self.generators)


@dataclass(frozen=True)
class ProlongedVector:
    """A symmetry direction lifted to first-derivative coordinates."""

    base_comp: np.ndarray    # (n_base,)
    field_comp: np.ndarray   # (n_fields,)
    jet1_comp: np.ndarray    # (n_fields, n_base)
    evaluated_at: JetPoint


@dataclass(frozen=True)
class JetSystem:
    """Minimal bundle of constraint data for sampling and admissibility
    questions that do not need dynamics (mass, forces)."""

    n_fields: int
    signature: BaseSignature
    constraints: ConstraintSpec
    reaction_flavor: str = COVARIANT


def eval_constraints(spec: ConstraintSpec, p: JetPoint) -> np.ndarray:
    """Constraint values at ``p``; all below tolerance means ``p`` is on
    the constraint set."""
    spec.check_point(p)
    vals = np.atleast_1d(np.asarray(spec.value(p), dtype=float))
    if vals.shape != (spec.count,):
        raise StructuralError(
            f"constraint evaluator returned shape {vals.shape}, expected ({spec.count},)")
    return vals


def _jet_gradient(spec: ConstraintSpec, p: JetPoint) -> np.ndarray:
    if spec.d_jet1 is None:
        raise StructuralError("constraint spec has no jet-gradient evaluator")
    spec.check_point(p)
    grad = np.asarray(spec.d_jet1(p), dtype=float)
    expected = (spec.count, p.n_fields, p.n_base)
    if grad.shape != expected:
        raise StructuralError(
            f"constraint jet-gradient has shape {grad.shape}, expected {expected}")
    return grad


def _warn_if_off_manifold(spec: ConstraintSpec, p: JetPoint) -> None:
    # The basis is defined along the constraint set but extends smoothly,
    # so an off-set evaluation is suspicious rather than fatal.
    vals = eval_constraints(spec, p)
    if vals.size and np.abs(vals).max() > spec.on_manifold_tol:
        warnings.warn(
            f"reaction basis evaluated off the constraint set "
            f"(max |phi| = {np.abs(vals).max():.3e})",
            stacklevel=3)


def chetaev_covariant(spec: ConstraintSpec, p: JetPoint) -> ReactionBasis:
    """Reaction coefficients from the covariant Chetaev rule: the full
    gradient of each constraint with respect to every jet coordinate."""
    _warn_if_off_manifold(spec, p)
    return ReactionBasis(flavor=COVARIANT, covariant=_jet_gradient(spec, p))


def chetaev_noncovariant(spec: ConstraintSpec, p: JetPoint,
                         sig: BaseSignature) -> ReactionBasis:
    """Reaction coefficients from the noncovariant rule: only the
    time-derivative column of the constraint gradient."""
    _warn_if_off_manifold(spec, p)
    grad = _jet_gradient(spec, p)
    return ReactionBasis(flavor=NONCOVARIANT,
                         noncovariant=grad[:, :, sig.time_index].copy())


def field_component(section: SymmetrySection, p: JetPoint) -> np.ndarray:
    """The field displacement induced by a section at ``p``:
    sum of coefficient[A] * generator[A]."""
    if section.n_gen == 0:
        return np.zeros(p.n_fields)
    coeffs = section.coefficients(p)
    if type(coeffs) is not np.ndarray or coeffs.ndim != 1:
        coeffs = np.atleast_1d(np.asarray(coeffs, dtype=float))
    if coeffs.shape != (section.n_gen,):
        raise StructuralError(
            f"section coefficients have shape {coeffs.shape}, expected ({section.n_gen},)")
    gen_matrix = section._gen_matrix
    if gen_matrix is not None:
        if gen_matrix.shape[1] != p.n_fields:
            raise StructuralError(
                f"section generators have {gen_matrix.shape[1]} field components, "
                f"expected {p.n_fields}")
        return coeffs @ gen_matrix
    out = np.zeros(p.n_fields)
    for c, gen in zip(coeffs, section.generators):
        g = gen if isinstance(gen, np.ndarray) else np.atleast_1d(
            np.asarray(gen(p), dtype=float))
        if g.shape != (p.n_fields,):
            raise StructuralError(
                f"section generator returned shape {g.shape}, expected ({p.n_fields},)")
        out += c * g
    return out


def linear_combination(sections: Sequence[SymmetrySection],
                       weights: Sequence[float]) -> SymmetrySection:
    """Weighted combination of sections (same group action assumed)."""
    secs = tuple(sections)
    w = np.asarray(weights, dtype=float)
    if w.shape != (len(secs),):
        raise StructuralError(
            f"{len(secs)} sections but weight vector of shape {w.shape}")
    generalized = any(s.generalized for s in secs)
    horizontal = None
    for wi, s in zip(w, secs):
        if s.horizontal_part is not None:
            part = wi * s.horizontal_part
            horizontal = part if horizontal is None else horizontal + part
    generators = tuple(g for s in secs for g in s.generators)

    def coefficients(p, _secs=secs, _w=w):
        parts = []
        for wi, s in zip(_w, _secs):
            if s.n_gen:
                parts.append(wi * np.atleast_1d(np.asarray(s.coefficients(p), dtype=float)))
        if not parts:
            return np.zeros(0)
        return np.concatenate(parts)

    return SymmetrySection(generators, coefficients, horizontal, generalized)


def time_translation(sig: BaseSignature) -> SymmetrySection:
    """Unit translation along the time coordinate (no field motion)."""
    hp = np.zeros(sig.n_base)
    hp[sig.time_index] = 1.0
    return SymmetrySection((), lambda p: np.zeros(0), horizontal_part=hp)


# 4th-order central stencil for the directional derivatives in prolong;
# divide by 12 * step.
_D_STENCIL = ((-2, 1.0), (-1, -8.0), (1, 8.0), (2, -1.0))


def _shifted_point(p: JetPoint, eps: float, d_base: np.ndarray,
                   d_fields: np.ndarray, d_jet1: Optional[np.ndarray]) -> JetPoint:
    jet1 = p.jet1 if d_jet1 is None else p.jet1 + eps * d_jet1
    return JetPoint._raw(p.base + eps * d_base, p.fields + eps * d_fields, jet1)


def prolong_many(sections: Sequence[SymmetrySection], p: JetPoint) -> list:
    """Lift several sections at one point, sharing the stencil of shifted
    evaluation points.  See :func:`prolong`."""
    sections = list(sections)
    any_generalized = any(s.generalized for s in sections)
    if any_generalized and p.jet2 is None:
        raise MissingDataError(
            "prolonging a generalized section requires second-order jet data")
    n_f, n_b = p.n_fields, p.n_base
    field_comps = [field_component(s, p) for s in sections]
    jet1_comps = [np.zeros((n_f, n_b)) for _ in sections]
    point_scale = max(1.0, float(np.abs(p.base).max(initial=0.0)),
                      float(np.abs(p.fields).max(initial=0.0)))
    for mu in range(n_b):
        d_base = np.zeros(n_b)
        d_base[mu] = 1.0
        d_fields = p.jet1[:, mu]
        d_jet1 = p.jet2[:, :, mu] if any_generalized else None
        dir_scale = max(1.0, float(np.abs(d_fields).max(initial=0.0)))
        if d_jet1 is not None:
            dir_scale = max(dir_scale, float(np.abs(d_jet1).max(initial=0.0)))
        eps = 1e-3 * point_scale / dir_scale
        for offset, weight in _D_STENCIL:
            q = _shifted_point(p, offset * eps, d_base, d_fields, d_jet1)
            w = weight / (12.0 * eps)
            for k, s in enumerate(sections):
                jet1_comps[k][:, mu] += w * field_component(s, q)
    return [ProlongedVector(
        np.zeros(n_b) if s.horizontal_part is None else s.horizontal_part.copy(),
        fc, jc, p)
        for s, fc, jc in zip(sections, field_comps, jet1_comps)]


def prolong(section: SymmetrySection, p: JetPoint) -> ProlongedVector:
    """Lift a section to derivative coordinates.

    The derivative components are the total derivatives of the induced
    field displacement along each base direction, evaluated by high-order
    differencing of the section's callbacks along the jet of a solution
    through ``p``.  Generalized sections make the total derivative read
    second-order jet data, so ``p.jet2`` is required for them.  A constant
    horizontal part contributes no correction term (its base-derivative
    vanishes).
    """
    return prolong_many([section], p)[0]


def _apply_basis(basis: ReactionBasis, contact: np.ndarray, n_base: int) -> np.ndarray:
    if basis.flavor == NONCOVARIANT:
        return basis.noncovariant @ contact
    out = np.einsum("kam,a->km", basis.covariant, contact)
    return out[:, 0] if n_base == 1 else out


def contract_reaction(v: ProlongedVector, basis: ReactionBasis,
                      p: JetPoint) -> np.ndarray:
    """Pair a prolonged direction with each reaction generator at ``p``.

    The force forms are semi-basic, so only the contact factor
    ``field_comp[a] - jet1[a, mu] * base_comp[mu]`` enters; the derivative
    components of ``v`` are irrelevant.  A zero result means ``v``
    annihilates every reaction generator at ``p``.

    For the noncovariant flavor the result has shape ``(k,)``.  The
    covariant flavor carries one component per base direction, so the
    result is ``(k,)`` when ``n_base == 1`` and ``(k, n_base)`` otherwise;
    annihilation requires every component to vanish.
    """
    at = v.evaluated_at
    if at is not p and not (
            np.array_equal(at.base, p.base)
            and np.array_equal(at.fields, p.fields)
            and np.array_equal(at.jet1, p.jet1)):
        raise StructuralError(
            "prolonged vector and reaction basis were evaluated at different points")
    contact = v.field_comp - p.jet1 @ v.base_comp
    return _apply_basis(basis, contact, p.n_base)


def section_contraction(section: SymmetrySection, basis: ReactionBasis,
                        p: JetPoint) -> np.ndarray:
    """Same pairing as :func:`contract_reaction` but straight from a
    section; no second-order data is needed because only the contact
    factor matters."""
    contact = field_component(section, p)
    if section.horizontal_part is not None:
        contact = contact - p.jet1 @ section.horizontal_part
    return _apply_basis(basis, contact, p.n_base)


def constraint_rank(spec: ConstraintSpec, p: JetPoint,
                    pivot_tol: float = 1e-10) -> int:
    """Rank of the constraint jet-gradient by complete-pivot elimination;
    pivots below ``pivot_tol`` times the first pivot do not count."""
    M = _jet_gradient(spec, p).reshape(spec.count, -1).copy()
    pivots = []
    while M.size and min(M.shape) > 0:
        i, j = np.unravel_index(np.argmax(np.abs(M)), M.shape)
        pv = abs(M[i, j])
        if pv == 0.0 or (pivots and pv <= pivot_tol * pivots[0]):
            break
        pivots.append(pv)
        row = M[i] / M[i, j]
        M = M - np.outer(M[:, j], row)
        M = np.delete(np.delete(M, i, axis=0), j, axis=1)
    return len(pivots)
