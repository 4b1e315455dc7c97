"""Hot inner loops: CSR products, fused Chebyshev steps, probe bits.

Every public function here has two paths. The numba path runs compiled
loops that release the GIL; the fallback uses numpy and scipy.sparse.
Blocks of vectors are stored row-major as ``(b, d)`` arrays so that each
probe's data is contiguous.
"""
import numpy as np

from ._accel import HAVE_NUMBA, njit

__all__ = [
    "HAVE_NUMBA",
    "spmm",
    "affine_spmm",
    "cheb_next",
    "rowdot",
    "rademacher_block",
]

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_ONE = np.uint64(1)


# --------------------------------------------------------------------------
# compiled kernels
# --------------------------------------------------------------------------


@njit
def _csr_affine_nb(indptr, indices, data, alpha, beta, X, out):
    # work on (d, b) copies so each stored entry touches b contiguous values
    b = X.shape[0]
    nrows = indptr.shape[0] - 1
    Xt = np.ascontiguousarray(X.T)
    acc = np.empty(b)
    for i in range(nrows):
        acc[:] = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            v = data[k]
            j = indices[k]
            for p in range(b):
                acc[p] += v * Xt[j, p]
        for p in range(b):
            out[p, i] = alpha * acc[p]
    if beta != 0.0:
        for p in range(b):
            for i in range(nrows):
                out[p, i] += beta * X[p, i]
    return out


@njit
def _cheb_next_nb(indptr, indices, data, alpha, beta, W, Wprev, out):
    b = W.shape[0]
    nrows = indptr.shape[0] - 1
    Wt = np.ascontiguousarray(W.T)
    acc = np.empty(b)
    for i in range(nrows):
        acc[:] = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            v = data[k]
            j = indices[k]
            for p in range(b):
                acc[p] += v * Wt[j, p]
        for p in range(b):
            out[p, i] = 2.0 * (alpha * acc[p] + beta * Wt[i, p]) - Wprev[p, i]
    return out


@njit
def _rowdot_nb(X, Y):
    b, d = X.shape
    out = np.empty(b)
    for p in range(b):
        s = 0.0
        for i in range(d):
            s += X[p, i] * Y[p, i]
        out[p] = s
    return out


@njit
def _mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit
def _rademacher_nb(seed, start, count, d):
    out = np.empty((count, d))
    nwords = (d + 63) // 64
    s = np.uint64(seed)
    for p in range(count):
        idx = np.uint64(start + p)
        key = _mix64(s + _GOLDEN * (idx + _ONE))
        for w in range(nwords):
            h = _mix64(key + _GOLDEN * (np.uint64(w) + _ONE))
            lo = w * 64
            hi = min(lo + 64, d)
            for k in range(lo, hi):
                if (h >> np.uint64(k - lo)) & _ONE:
                    out[p, k] = -1.0
                else:
                    out[p, k] = 1.0
    return out


# --------------------------------------------------------------------------
# numpy fallbacks
# --------------------------------------------------------------------------


def _mix64_np(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def _rademacher_np(seed, start, count, d):
    nwords = (d + 63) // 64
    idx = np.arange(start, start + count, dtype=np.uint64)
    words = np.arange(nwords, dtype=np.uint64)
    key = _mix64_np(np.uint64(seed) + _GOLDEN * (idx + _ONE))
    h = _mix64_np(key[:, None] + _GOLDEN * (words + _ONE)[None, :])
    bits = (h[:, :, None] >> np.arange(64, dtype=np.uint64)) & _ONE
    bits = bits.reshape(count, nwords * 64)[:, :d]
    return 1.0 - 2.0 * bits.astype(np.float64)


# --------------------------------------------------------------------------
# dispatch
# --------------------------------------------------------------------------


def _as_block(X):
    return np.ascontiguousarray(X, dtype=np.float64)


def spmm(A, X):
    """Return ``(A @ X.T).T`` for a block ``X`` of shape ``(b, A.cols)``."""
    return affine_spmm(A, 1.0, 0.0, X)


def affine_spmm(A, alpha, beta, X):
    """Return ``alpha * A X + beta * X`` row-wise (``beta`` needs A square)."""
    X = _as_block(X)
    if HAVE_NUMBA:
        out = np.empty((X.shape[0], A.shape[0]))
        return _csr_affine_nb(A.indptr, A.indices, A.data, float(alpha), float(beta), X, out)
    out = alpha * (A.to_scipy() @ X.T).T
    if beta != 0.0:
        out += beta * X
    return np.ascontiguousarray(out)


def cheb_next(A, alpha, beta, W, Wprev):
    """One three-term step ``2 (alpha A + beta I) W - Wprev``."""
    W = _as_block(W)
    Wprev = _as_block(Wprev)
    if HAVE_NUMBA:
        out = np.empty_like(W)
        return _cheb_next_nb(A.indptr, A.indices, A.data, float(alpha), float(beta), W, Wprev, out)
    AW = (A.to_scipy() @ W.T).T
    return np.ascontiguousarray(2.0 * (alpha * AW + beta * W) - Wprev)


def rowdot(X, Y):
    """Row-wise inner products with a fixed left-to-right summation order."""
    X = _as_block(X)
    Y = _as_block(Y)
    if HAVE_NUMBA:
        return _rowdot_nb(X, Y)
    return np.einsum("ij,ij->i", X, Y)


def rademacher_block(seed, start, count, d):
    """Rademacher probes ``start .. start+count-1`` of stream ``seed``.

    Each probe is a pure function of ``(seed, index, d)``: bits come from a
    splitmix64 hash, so both code paths give identical vectors.
    """
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    if count == 0:
        return np.empty((0, d))
    if HAVE_NUMBA:
        return _rademacher_nb(seed, int(start), int(count), int(d))
    return _rademacher_np(seed, int(start), int(count), int(d))
