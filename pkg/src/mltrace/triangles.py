"""Triangle counting with ``zAz`` and ``zA^2z`` as control variates.

For a simple graph ``trace(A) = 0`` and ``trace(A^2) = nnz(A)``, so for any
fixed ``(a1, a2)``::

    trace(A^3) = E[z^T (A^3 - a2 A^2 - a1 A) z] + a2 nnz(A) + a1 trace(A)
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import AdjacencyError
from .sampling import DEFAULT_CHUNK, map_chunks

__all__ = [
    "TriangleSampleMatrix",
    "ControlVariateFit",
    "validate_adjacency",
    "triangle_samples",
    "triangle_samples_from_probes",
    "fit_control_variates",
    "triangle_estimate",
]


@dataclass
class TriangleSampleMatrix:
    """Rows ``(z^T A z, z^T A^2 z, z^T A^3 z)``, one per probe."""

    y: np.ndarray
    matvecs: int
    nnz: int
    trace: float = 0.0

    @property
    def m(self):
        return self.y.shape[0]


@dataclass
class ControlVariateFit:
    a1: float
    a2: float
    trace_A: float
    trace_A2: float


def validate_adjacency(A):
    """Raise :class:`AdjacencyError` unless ``A`` is a simple-graph adjacency matrix."""
    if A.shape[0] != A.shape[1]:
        raise AdjacencyError("adjacency matrix must be square")
    M = A.to_scipy()
    if np.any((A.data != 0.0) & (A.data != 1.0)):
        raise AdjacencyError("adjacency values must be 0 or 1")
    if np.any(M.diagonal() != 0):
        raise AdjacencyError("adjacency matrix has self loops")
    if (M != M.T).nnz:
        raise AdjacencyError("adjacency matrix is not symmetric")


def triangle_samples_from_probes(A, Z, use_symmetry=True):
    """Sample rows for an explicit ``(b, d)`` probe block; returns ``(y, matvecs)``."""
    Z = np.ascontiguousarray(Z, dtype=np.float64)
    W1 = kernels.spmm(A, Z)
    W2 = kernels.spmm(A, W1)
    y = np.empty((Z.shape[0], 3))
    y[:, 0] = kernels.rowdot(Z, W1)
    if use_symmetry:
        y[:, 1] = kernels.rowdot(W1, W1)
        y[:, 2] = kernels.rowdot(W1, W2)
        return y, 2 * Z.shape[0]
    W3 = kernels.spmm(A, W2)
    y[:, 1] = kernels.rowdot(Z, W2)
    y[:, 2] = kernels.rowdot(Z, W3)
    return y, 3 * Z.shape[0]


def triangle_samples(A, m, stream, use_symmetry=True, start=0, workers=1, chunk=DEFAULT_CHUNK, counter=None):
    """Draw ``m`` probes and record ``z^T A^j z`` for ``j = 1, 2, 3``.

    The symmetric path costs 2 matvecs per probe, the plain path 3.
    ``counter`` (a :class:`~mltrace.matio.MatvecCounter`) is charged if given.
    """
    validate_adjacency(A)
    d = A.shape[0]

    def run(s, n):
        return triangle_samples_from_probes(A, stream.block(s, n, d), use_symmetry)

    parts = map_chunks(run, start, m, chunk, workers)
    y = np.concatenate([p[0] for p in parts]) if parts else np.empty((0, 3))
    used = sum(p[1] for p in parts)
    if counter is not None:
        counter.add(used)
    return TriangleSampleMatrix(y, used, A.nnz, float(A.diagonal().sum()))


def fit_control_variates(samples):
    """Least-squares slopes of ``y3`` on ``(y1, y2)`` with an intercept.

    Degenerate designs fall back to a univariate fit on ``y2`` (``a1 = 0``),
    and to ``(0, 0)`` when both regressors are constant.
    """
    y = samples.y
    if y.shape[0] < 3:
        raise ValueError("need at least 3 samples to fit control variates")
    y1, y2, y3 = y[:, 0], y[:, 1], y[:, 2]
    c1, c2, c3 = y1 - y1.mean(), y2 - y2.mean(), y3 - y3.mean()
    tol = 1e-12
    var1 = c1 @ c1
    var2 = c2 @ c2
    scale1 = tol * max(1.0, float(np.abs(y1).max())) ** 2 * len(y1)
    scale2 = tol * max(1.0, float(np.abs(y2).max())) ** 2 * len(y2)
    a1 = a2 = 0.0
    if var1 > scale1 and var2 > scale2:
        X = np.column_stack([c1, c2])
        coef, _, rank, _ = np.linalg.lstsq(X, c3, rcond=None)
        if rank == 2:
            a1, a2 = float(coef[0]), float(coef[1])
        else:
            a2 = float(c2 @ c3 / var2)
    elif var2 > scale2:
        a2 = float(c2 @ c3 / var2)
    return ControlVariateFit(a1, a2, samples.trace, float(samples.nnz))


def triangle_estimate(samples, fit=None):
    """Triangle count estimate and its standard error.

    ``fit=None`` is the plain Hutchinson estimate of ``trace(A^3) / 6``.
    """
    a1 = fit.a1 if fit is not None else 0.0
    a2 = fit.a2 if fit is not None else 0.0
    y = samples.y
    resid = y[:, 2] - a2 * y[:, 1] - a1 * y[:, 0]
    m = len(resid)
    est = (resid.mean() + a2 * samples.nnz + a1 * samples.trace) / 6.0
    se = float(np.std(resid, ddof=1) / np.sqrt(m) / 6.0) if m > 1 else float("nan")
    return float(est), se
