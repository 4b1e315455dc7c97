"""Sample-size and tail-bound calculators for Hutchinson-type estimators.

Norm data for the multilevel bound can only be computed densely, so
:func:`build_level_matrices` doubles as the small-instance oracle that feeds
:func:`multilevel_tail_bound`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import OracleSizeError

__all__ = [
    "BoundQuery",
    "LevelMatrices",
    "hutchinson_sample_count",
    "multilevel_tail_bound",
    "multilevel_sample_plan",
    "build_level_matrices",
    "DENSE_CAP",
]

DENSE_CAP = 500


@dataclass
class BoundQuery:
    """Per-level norms of the zero-diagonal level matrices and their costs."""

    eps: float
    frob: tuple
    spec: tuple
    costs: tuple = None
    delta: float = None

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if len(self.frob) != len(self.spec):
            raise ValueError("need one Frobenius and one spectral norm per level")
        if not self.frob:
            raise ValueError("missing norms")
        for f, s in zip(self.frob, self.spec):
            if f < 0 or s < 0:
                raise ValueError("norms must be non-negative")
            if s > f * (1 + 1e-10) + 1e-300:
                raise ValueError("spectral norm exceeds Frobenius norm")
        if self.costs is not None and len(self.costs) != len(self.frob):
            raise ValueError("need one cost per level")

    @property
    def L(self):
        return len(self.frob)

    @classmethod
    def from_level_matrices(cls, lm, eps, costs=None, delta=None):
        return cls(eps, tuple(lm.frob), tuple(lm.spec), costs, delta)


def hutchinson_sample_count(eps, delta):
    """``ceil(6 eps^-2 ln(2 / delta))`` samples for relative error ``eps``.

    The guarantee holds for symmetric positive semi-definite matrices only;
    that is not checked here.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    return math.ceil(6.0 * math.log(2.0 / delta) / eps**2)


def multilevel_tail_bound(query, m):
    """Upper bound on ``P(|Gamma_m - trace| >= eps)`` for per-level counts ``m``."""
    if len(m) != query.L:
        raise ValueError("need one sample count per level")
    if any(mk < 1 for mk in m):
        raise ValueError("sample counts must be positive")
    frob_term = math.fsum(f * f / mk for f, mk in zip(query.frob, m))
    spec_term = max(s / mk for s, mk in zip(query.spec, m))
    denom = frob_term + query.eps * spec_term
    if denom == 0.0:
        return 0.0
    return 2.0 * math.exp(-(query.eps**2 / 8.0) / denom)


def multilevel_sample_plan(query, delta=None):
    """Per-level counts that make the multilevel tail bound at most ``delta``.

    Uses ``V_k = ||B_k||_F^2 + eps ||B_k||_2`` and
    ``mu = 8 eps^-2 ln(2/delta) sum sqrt(V_k C_k)`` with ``m_k = ceil(mu sqrt(V_k/C_k))``.
    Returns ``(m, mu, cost)`` where ``cost`` is ``8 eps^-2 ln(2/delta) (sum sqrt(V_k C_k))^2``.
    """
    delta = query.delta if delta is None else delta
    if delta is None or not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    costs = query.costs if query.costs is not None else (1,) * query.L
    if any(c <= 0 for c in costs):
        raise ValueError("costs must be positive")
    V = [f * f + query.eps * s for f, s in zip(query.frob, query.spec)]
    if all(v == 0 for v in V):
        raise ValueError("all level norms are zero; nothing to sample")
    scale = 8.0 * math.log(2.0 / delta) / query.eps**2
    S = math.fsum(math.sqrt(v * c) for v, c in zip(V, costs))
    mu = scale * S
    m = tuple(max(1, math.ceil(mu * math.sqrt(v / c))) for v, c in zip(V, costs))
    bound = multilevel_tail_bound(query, m)
    if bound > delta * (1 + 1e-12):
        raise ArithmeticError(f"internal check failed: bound {bound} > delta {delta}")
    return m, mu, scale * S * S


@dataclass
class LevelMatrices:
    """Dense level matrices ``A_k`` and zero-diagonal copies ``B_k``."""

    A: list
    B: list
    frob: list
    spec: list


def build_level_matrices(A, model, plan, cap=DENSE_CAP):
    """Dense ``A_k = sum_{j in (l_{k-1}, l_k]} c_j T_j(g(A))`` for each level.

    ``plan`` is a :class:`~mltrace.multilevel.LevelPlan` or a sequence of
    levels ending at the model degree.
    """
    A = np.asarray(A.to_dense() if hasattr(A, "to_dense") else A, dtype=np.float64)
    d = A.shape[0]
    if d > cap:
        raise OracleSizeError(f"dense level matrices capped at d <= {cap}, got {d}")
    levels = tuple(getattr(plan, "levels", plan))
    n = model.degree
    if not levels or levels[-1] != n or any(b <= a for a, b in zip(levels, levels[1:])):
        raise ValueError("levels must be strictly increasing and end at the degree")
    M = model.alpha * A + model.beta * np.eye(d)
    blocks = [np.zeros((d, d)) for _ in levels]
    T_prev, T = np.eye(d), M
    k = 0
    for j in range(n + 1):
        if j == 0:
            Tj = T_prev
        elif j == 1:
            Tj = T
        else:
            T_prev, T = T, 2.0 * M @ T - T_prev
            Tj = T
        while j > levels[k]:
            k += 1
        blocks[k] += model.coeffs[j] * Tj
    B = []
    for Ak in blocks:
        Bk = Ak.copy()
        np.fill_diagonal(Bk, 0.0)
        B.append(Bk)
    frob = [float(np.linalg.norm(Bk, "fro")) for Bk in B]
    spec = [float(np.max(np.abs(np.linalg.eigvalsh(Bk)))) if d else 0.0 for Bk in B]
    return LevelMatrices(blocks, B, frob, spec)
