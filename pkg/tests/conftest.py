"""Shared helpers: finite-difference oracles and random jet points.

The central-difference helpers are deliberately independent of the
library's own differentiation paths; they are the cross-check oracle for
every analytic partial supplied by model builders.
"""

import numpy as np
import pytest

from nhlab.jets import JetPoint


def bump(p: JetPoint, group: str, idx, delta: float) -> JetPoint:
    """Copy of ``p`` with one coordinate nudged by ``delta``."""
    base = p.base.copy()
    fields = p.fields.copy()
    jet1 = p.jet1.copy()
    if group == "base":
        base[idx] += delta
    elif group == "fields":
        fields[idx] += delta
    elif group == "jet1":
        jet1[idx] += delta
    else:
        raise ValueError(group)
    return JetPoint(base, fields, jet1, p.jet2)


def central_diff(f, p: JetPoint, group: str, idx, step: float = 1e-6):
    """Central difference of ``f`` (scalar- or array-valued) with respect
    to one coordinate of ``p``."""
    coords = {"base": p.base, "fields": p.fields, "jet1": p.jet1}[group]
    h = step * max(1.0, abs(float(coords[idx])))
    fp = np.asarray(f(bump(p, group, idx, h)), dtype=float)
    fm = np.asarray(f(bump(p, group, idx, -h)), dtype=float)
    return (fp - fm) / (2.0 * h)


def random_jet_point(rng, n_fields: int, n_base: int, box: float = 2.0,
                     with_jet2: bool = False) -> JetPoint:
    base = rng.uniform(-box, box, n_base)
    fields = rng.uniform(-box, box, n_fields)
    jet1 = rng.uniform(-box, box, (n_fields, n_base))
    jet2 = None
    if with_jet2:
        jet2 = rng.uniform(-box, box, (n_fields, n_base, n_base))
        jet2 = 0.5 * (jet2 + jet2.swapaxes(1, 2))
    return JetPoint(base, fields, jet1, jet2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
