"""Dense and brute-force oracles for tests; not meant for large inputs."""
from __future__ import annotations

import itertools
import math

import numpy as np

from .errors import DomainError, OracleSizeError
from .triangles import validate_adjacency

__all__ = [
    "dense_trace_f",
    "dense_chebyshev",
    "all_sign_vectors",
    "exhaustive_hutchinson",
    "brute_force_level_selection",
    "exact_triangle_count",
    "inverse_spectrum_matrix",
]


def _dense(A):
    return np.asarray(A.to_dense() if hasattr(A, "to_dense") else A, dtype=np.float64)


def dense_trace_f(A, f, cap=2000):
    """``sum_i f(lambda_i)`` from a full symmetric eigendecomposition."""
    A = _dense(A)
    if A.shape[0] > cap:
        raise OracleSizeError(f"dense trace oracle capped at d <= {cap}")
    lam = np.linalg.eigvalsh(A)
    vals = f(lam)
    if not np.all(np.isfinite(vals)):
        raise DomainError("function undefined at some eigenvalue")
    return float(math.fsum(vals))


def dense_chebyshev(A, model, degree=None):
    """Dense ``p_n(A) = sum_j c_j T_j(g(A))`` by the matrix recurrence."""
    A = _dense(A)
    degree = model.degree if degree is None else degree
    d = A.shape[0]
    M = model.alpha * A + model.beta * np.eye(d)
    T_prev, T = np.eye(d), M
    P = model.coeffs[0] * T_prev
    if degree >= 1:
        P = P + model.coeffs[1] * T
    for j in range(2, degree + 1):
        T_prev, T = T, 2.0 * M @ T - T_prev
        P = P + model.coeffs[j] * T
    return P


def all_sign_vectors(d, cap=14):
    """All ``2^d`` Rademacher vectors as rows."""
    if d > cap:
        raise OracleSizeError(f"exhaustive enumeration capped at d <= {cap}")
    return np.array(list(itertools.product((1.0, -1.0), repeat=d)))


def exhaustive_hutchinson(P, aggregator=None, cap=14):
    """Exact mean and variance of a probe statistic over every sign vector.

    By default the statistic is ``z^T P z``.  ``aggregator(Z)`` may be given
    to map a ``(2^d, d)`` block of probes to one value per probe instead.
    """
    P = _dense(P)
    Z = all_sign_vectors(P.shape[0], cap)
    if aggregator is None:
        vals = np.einsum("ij,jk,ik->i", Z, P, Z)
    else:
        vals = np.asarray(aggregator(Z), dtype=np.float64)
    mean = math.fsum(vals) / len(vals)
    var = math.fsum((vals - mean) ** 2) / len(vals)
    return mean, var


def brute_force_level_selection(V, cost, n=None, cap=14):
    """Minimum of ``sum_k sqrt(V_k C_k)`` over every level set ending at ``n``.

    Returns ``(levels, objective)``; interior breakpoints range over all
    subsets of ``{0, ..., n-1}``.
    """
    n = V.degree if n is None else n
    if n > cap:
        raise OracleSizeError(f"brute-force level selection capped at n <= {cap}")
    best = None
    for r in range(n + 1):
        for inner in itertools.combinations(range(n), r):
            levels = inner + (n,)
            obj = 0.0
            lo = -1
            for hi in levels:
                v = V.get(lo, hi) if hi > 0 else 0.0
                obj += math.sqrt(v * cost(lo, hi))
                lo = hi
            if best is None or obj < best[1]:
                best = (levels, obj)
    return best


def exact_triangle_count(A):
    """Triangles via neighbour-set intersections over edges (each counted 3 times)."""
    validate_adjacency(A)
    M = A.to_scipy()
    indptr, indices = M.indptr, M.indices
    neigh = [set(indices[indptr[i] : indptr[i + 1]].tolist()) for i in range(A.shape[0])]
    total = 0
    for i in range(A.shape[0]):
        for j in indices[indptr[i] : indptr[i + 1]]:
            if j > i:
                total += len(neigh[i] & neigh[j])
    return total // 3


def inverse_spectrum_matrix(d, seed=0):
    """Dense SPSD test matrix with eigenvalues ``1/i`` and seeded random eigenvectors."""
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    lam = 1.0 / np.arange(1, d + 1)
    M = (Q * lam) @ Q.T
    return 0.5 * (M + M.T), lam
