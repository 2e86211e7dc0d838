"""Outer-approximation cuts for second-order cone rows."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .program import SocConstraint


@dataclass(frozen=True)
class Cut:
    """Linear inequality ``sum(coefs[k] * x[cols[k]]) <= rhs``."""

    cols: tuple[int, ...]
    coefs: tuple[float, ...]
    rhs: float

    def lhs(self, x: np.ndarray) -> float:
        return float(np.dot(self.coefs, x[list(self.cols)])) if self.cols else 0.0

    def violation(self, x: np.ndarray) -> float:
        return self.lhs(x) - self.rhs


def cone_violation(x: np.ndarray, cone: SocConstraint) -> float:
    """Scaled violation of ``||u|| <= t`` at ``x``; positive means outside."""
    t = cone.bound.value(x)
    u = np.array([m.value(x) for m in cone.members])
    return (float(np.linalg.norm(u)) - t) / max(1.0, abs(t))


def separate_cone(x: np.ndarray, cone: SocConstraint, tol: float = 1e-7) -> Cut | None:
    """Supporting hyperplane of the cone at ``x`` if ``x`` violates it by more than ``tol``.

    For ``u0 = u(x)`` the cut is ``(u0/||u0||) . u(x') <= t(x')``. When ``u0``
    is zero the only way to be outside is ``t(x) < 0``, and ``t(x') >= 0`` is
    returned instead.
    """
    t0 = cone.bound.value(x)
    u0 = np.array([m.value(x) for m in cone.members])
    norm = float(np.linalg.norm(u0))
    if norm - t0 <= tol * max(1.0, abs(t0)):
        return None
    terms: dict[int, float] = defaultdict(float)
    if norm == 0.0:
        const = -cone.bound.const
        for col, a in zip(cone.bound.cols, cone.bound.coefs):
            terms[col] -= a
        return _finish(terms, const)
    g = u0 / norm
    const = cone.bound.const
    for gk, mem in zip(g, cone.members):
        const -= gk * mem.const
        for col, a in zip(mem.cols, mem.coefs):
            terms[col] += gk * a
    for col, a in zip(cone.bound.cols, cone.bound.coefs):
        terms[col] -= a
    return _finish(terms, const)


def _finish(terms: dict[int, float], rhs: float) -> Cut:
    cols = tuple(sorted(c for c, v in terms.items() if v != 0.0))
    return Cut(cols, tuple(terms[c] for c in cols), float(rhs))
