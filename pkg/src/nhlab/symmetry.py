"""Search for admissible symmetry directions inside a linear ansatz.

Membership in the admissible family is universally quantified over the
constraint set, so it is tested here by a falsifiable surrogate: sample
the constraint set, assemble the matrix of reaction contractions of each
ansatz direction at each sample, and take the numerical nullspace.  A
returned basis vector should then be re-checked on fresh samples (the
soundness test in the suite does exactly that).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (InsufficientDataError, SamplingError, StructuralError)
from .jets import (COVARIANT, JetPoint, SymmetrySection, chetaev_covariant,
                   chetaev_noncovariant, eval_constraints, section_contraction)


@dataclass(frozen=True)
class SamplerConfig:
    """Uniform box sampling of jet coordinates with Newton projection onto
    the constraint set."""

    count: int = 200
    seed: int = 42
    low: float = -2.0
    high: float = 2.0
    tol: float = 1e-10
    max_newton: int = 50


@dataclass(frozen=True)
class SymmetryAnsatz:
    """Linear family of candidate directions."""

    sections: tuple

    def __post_init__(self):
        object.__setattr__(self, "sections", tuple(self.sections))
        if not self.sections:
            raise StructuralError("ansatz needs at least one section")

    @property
    def n_params(self) -> int:
        return len(self.sections)


@dataclass(frozen=True)
class AdmissibleBasis:
    """Orthonormal coefficient vectors spanning the admissible subspace.

    ``vectors`` has one row per admissible direction; ``complement`` spans
    the rejected directions (row space of the contraction matrix).
    ``degenerate`` flags the all-zero matrix (every direction trivially
    admissible)."""

    vectors: np.ndarray
    complement: np.ndarray
    residual_bound: float
    sample_count: int
    degenerate: bool = False

    @property
    def dimension(self) -> int:
        return self.vectors.shape[0]


def sample_constraint_manifold(sys, config: SamplerConfig = SamplerConfig()) -> list:
    """Draw jet points uniformly in the box and Newton-project the
    derivative coordinates onto the constraint set.

    Samples whose projection stalls are skipped; losing more than half of
    them is an error.  Fixed seed means a bitwise-reproducible sample set.
    """
    rng = np.random.default_rng(config.seed)
    spec = sys.constraints
    nf, nb = sys.n_fields, sys.signature.n_base
    span = config.high - config.low
    points = []
    for _ in range(config.count):
        base = config.low + span * rng.random(nb)
        fields = config.low + span * rng.random(nf)
        z = config.low + span * rng.random((nf, nb))
        if spec.count == 0:
            points.append(JetPoint(base, fields, z))
            continue
        ok = False
        for _ in range(config.max_newton):
            p = JetPoint(base, fields, z)
            phi = eval_constraints(spec, p)
            if np.abs(phi).max() <= config.tol:
                ok = True
                break
            J = np.asarray(spec.d_jet1(p), dtype=float).reshape(spec.count, -1)
            try:
                delta = J.T @ np.linalg.solve(J @ J.T, -phi)
            except np.linalg.LinAlgError:
                break
            z = z + delta.reshape(nf, nb)
        if ok:
            points.append(JetPoint(base, fields, z))
    if len(points) < config.count // 2:
        raise SamplingError(
            f"only {len(points)} of {config.count} samples projected onto the "
            f"constraint set")
    return points


def _reaction_basis(sys, p: JetPoint):
    if sys.reaction_flavor == COVARIANT:
        return chetaev_covariant(sys.constraints, p)
    return chetaev_noncovariant(sys.constraints, p, sys.signature)


def contraction_matrix(sys, ansatz: SymmetryAnsatz, samples) -> np.ndarray:
    """Rows: reaction contractions at each sample (constraints, and base
    directions for the covariant flavor); columns: ansatz directions."""
    rows = []
    for p in samples:
        basis = _reaction_basis(sys, p)
        cols = [section_contraction(sec, basis, p).ravel()
                for sec in ansatz.sections]
        rows.append(np.column_stack(cols))
    return np.vstack(rows)


def find_admissible(sys, ansatz: SymmetryAnsatz, samples,
                    svd_tol: float = 1e-8) -> AdmissibleBasis:
    """Orthonormal nullspace of the contraction matrix by singular-value
    thresholding (relative threshold ``svd_tol``)."""
    if any(s.generalized for s in ansatz.sections) and any(
            s.horizontal_part is not None for s in ansatz.sections):
        raise StructuralError(
            "mixing derivative-dependent directions with non-vertical ones "
            "is not supported")
    n_params = ansatz.n_params
    if len(samples) < 10 * n_params:
        raise InsufficientDataError(
            f"need at least {10 * n_params} samples for {n_params} parameters, "
            f"got {len(samples)}")
    M = contraction_matrix(sys, ansatz, samples)
    _, svals, Vt = np.linalg.svd(M)
    if svals.size == 0 or svals[0] == 0.0:
        return AdmissibleBasis(
            vectors=np.eye(n_params),
            complement=np.zeros((0, n_params)),
            residual_bound=0.0,
            sample_count=len(samples),
            degenerate=True,
        )
    rank = int(np.count_nonzero(svals > svd_tol * svals[0]))
    vectors = Vt[rank:].copy()
    complement = Vt[:rank].copy()
    residual_bound = float(np.abs(M @ vectors.T).max()) if vectors.size else 0.0
    return AdmissibleBasis(vectors, complement, residual_bound, len(samples))


def principal_angles(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Principal angles between the row spans of A and B."""
    Qa, _ = np.linalg.qr(np.atleast_2d(A).T)
    Qb, _ = np.linalg.qr(np.atleast_2d(B).T)
    sv = np.linalg.svd(Qa.T @ Qb, compute_uv=False)
    return np.arccos(np.clip(sv, -1.0, 1.0))
