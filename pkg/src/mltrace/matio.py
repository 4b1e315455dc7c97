"""Sparse storage, Matrix Market I/O and matvec operators.

All operators share the convention that one *unit* of cost is one
application of the underlying explicit matrix to one vector.  Operators
built on top of each other share a single :class:`MatvecCounter`.
"""
from __future__ import annotations

import io
import threading
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import kernels
from .errors import DimensionError, MatrixMarketError

__all__ = [
    "SparseMatrix",
    "MatvecCounter",
    "SymmetricOperator",
    "ExplicitOperator",
    "GramPlusShift",
    "AffineOperator",
    "parse_matrix_market",
    "read_matrix_market",
    "write_matrix_market",
    "matvec",
    "spectral_interval",
]


@dataclass(eq=False)
class SparseMatrix:
    """CSR matrix with sorted, unique column indices per row."""

    shape: tuple
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    symmetric: bool = False
    _scipy: object = field(default=None, repr=False)

    @classmethod
    def from_coo(cls, rows, cols, vals, shape, symmetric=False):
        """Build from triplets; duplicate entries are summed."""
        m = sp.coo_matrix(
            (np.asarray(vals, dtype=np.float64), (np.asarray(rows), np.asarray(cols))),
            shape=shape,
        ).tocsr()
        m.sum_duplicates()
        m.sort_indices()
        return cls._from_scipy(m, symmetric)

    @classmethod
    def from_dense(cls, M, symmetric=None):
        M = np.asarray(M, dtype=np.float64)
        if symmetric is None:
            symmetric = M.shape[0] == M.shape[1] and np.array_equal(M, M.T)
        m = sp.csr_matrix(M)
        m.sort_indices()
        return cls._from_scipy(m, symmetric)

    @classmethod
    def from_scipy(cls, m, symmetric=None):
        m = sp.csr_matrix(m, dtype=np.float64, copy=True)
        m.sum_duplicates()
        m.sort_indices()
        if symmetric is None:
            symmetric = m.shape[0] == m.shape[1] and (m != m.T).nnz == 0
        return cls._from_scipy(m, symmetric)

    @classmethod
    def _from_scipy(cls, m, symmetric):
        out = cls(
            shape=(int(m.shape[0]), int(m.shape[1])),
            indptr=np.ascontiguousarray(m.indptr, dtype=np.int64),
            indices=np.ascontiguousarray(m.indices, dtype=np.int64),
            data=np.ascontiguousarray(m.data, dtype=np.float64),
            symmetric=bool(symmetric),
        )
        return out

    @property
    def nnz(self):
        return int(self.indptr[-1])

    def to_scipy(self):
        if self._scipy is None:
            self._scipy = sp.csr_matrix((self.data, self.indices, self.indptr), shape=self.shape)
        return self._scipy

    def to_dense(self):
        return self.to_scipy().toarray()

    def transpose(self):
        return SparseMatrix.from_scipy(self.to_scipy().T.tocsr(), symmetric=self.symmetric)

    def diagonal(self):
        return self.to_scipy().diagonal()

    def check(self):
        """Validate structural invariants; raises ``ValueError``."""
        nrows, ncols = self.shape
        if self.indptr.shape != (nrows + 1,) or self.indptr[0] != 0:
            raise ValueError("bad row pointer array")
        if np.any(np.diff(self.indptr) < 0):
            raise ValueError("row pointers decrease")
        if self.nnz and (self.indices.min() < 0 or self.indices.max() >= ncols):
            raise ValueError("column index out of range")
        for i in range(nrows):
            row = self.indices[self.indptr[i] : self.indptr[i + 1]]
            if np.any(np.diff(row) <= 0):
                raise ValueError(f"row {i}: column indices not strictly increasing")
        if self.symmetric:
            if nrows != ncols:
                raise ValueError("symmetric flag on a rectangular matrix")
            if (self.to_scipy() != self.to_scipy().T).nnz:
                raise ValueError("symmetric flag set but matrix differs from its transpose")


# --------------------------------------------------------------------------
# Matrix Market
# --------------------------------------------------------------------------


def parse_matrix_market(stream):
    """Parse a coordinate-format Matrix Market stream into a :class:`SparseMatrix`.

    Accepts ``real``, ``integer`` and ``pattern`` fields with ``general`` or
    ``symmetric`` storage.  Pattern entries become 1.0, symmetric storage is
    expanded, and duplicate entries are summed.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    lineno = 0
    header = None
    for raw in stream:
        lineno += 1
        header = raw.strip()
        if header:
            break
    if not header or not header.lower().startswith("%%matrixmarket"):
        raise MatrixMarketError("missing %%MatrixMarket header", lineno)
    parts = header.lower().split()
    if len(parts) != 5:
        raise MatrixMarketError(f"malformed header {header!r}", lineno)
    _, obj, fmt, fld, sym = parts
    if obj != "matrix" or fmt != "coordinate":
        raise MatrixMarketError(f"unsupported object/format {obj} {fmt}", lineno)
    if fld not in ("real", "integer", "pattern"):
        raise MatrixMarketError(f"unsupported field {fld!r} (need real or pattern)", lineno)
    if sym not in ("general", "symmetric"):
        raise MatrixMarketError(f"unsupported symmetry {sym!r}", lineno)
    pattern = fld == "pattern"

    size = None
    for raw in stream:
        lineno += 1
        s = raw.strip()
        if not s or s.startswith("%"):
            continue
        size = s.split()
        break
    if size is None or len(size) != 3:
        raise MatrixMarketError("missing or malformed size line", lineno)
    try:
        nrows, ncols, nnz = (int(x) for x in size)
    except ValueError:
        raise MatrixMarketError("non-integer size line", lineno) from None
    if nrows <= 0 or ncols <= 0 or nnz < 0:
        raise MatrixMarketError("nonpositive dimensions", lineno)
    if sym == "symmetric" and nrows != ncols:
        raise MatrixMarketError("symmetric storage needs a square matrix", lineno)

    rows = np.empty(nnz, dtype=np.int64)
    cols = np.empty(nnz, dtype=np.int64)
    vals = np.ones(nnz, dtype=np.float64)
    want = 2 if pattern else 3
    k = 0
    for raw in stream:
        lineno += 1
        s = raw.strip()
        if not s or s.startswith("%"):
            continue
        if k >= nnz:
            raise MatrixMarketError("more entries than declared", lineno)
        tok = s.split()
        if len(tok) != want:
            raise MatrixMarketError(f"expected {want} fields, got {len(tok)}", lineno)
        try:
            i, j = int(tok[0]), int(tok[1])
            if not pattern:
                vals[k] = float(tok[2])
        except ValueError:
            raise MatrixMarketError(f"cannot parse entry {s!r}", lineno) from None
        if not (1 <= i <= nrows and 1 <= j <= ncols):
            raise MatrixMarketError(f"index ({i}, {j}) outside {nrows}x{ncols}", lineno)
        rows[k] = i - 1
        cols[k] = j - 1
        k += 1
    if k != nnz:
        raise MatrixMarketError(f"declared {nnz} entries, found {k}", lineno)

    if sym == "symmetric":
        off = rows != cols
        rows, cols, vals = (
            np.concatenate([rows, cols[off]]),
            np.concatenate([cols, rows[off]]),
            np.concatenate([vals, vals[off]]),
        )
    A = SparseMatrix.from_coo(rows, cols, vals, (nrows, ncols))
    A.symmetric = nrows == ncols and (sym == "symmetric" or (A.to_scipy() != A.to_scipy().T).nnz == 0)
    return A


def read_matrix_market(path):
    with open(path, encoding="utf-8") as fh:
        return parse_matrix_market(fh)


def write_matrix_market(A, stream, symmetric=None):
    """Write ``A`` as ``real`` coordinate data (lower triangle if symmetric)."""
    if symmetric is None:
        symmetric = A.symmetric
    coo = A.to_scipy().tocoo()
    r, c, v = coo.row, coo.col, coo.data
    if symmetric:
        keep = r >= c
        r, c, v = r[keep], c[keep], v[keep]
    kind = "symmetric" if symmetric else "general"
    stream.write(f"%%MatrixMarket matrix coordinate real {kind}\n")
    stream.write(f"{A.shape[0]} {A.shape[1]} {len(v)}\n")
    for i, j, x in zip(r, c, v):
        stream.write(f"{i + 1} {j + 1} {float(x)!r}\n")


# --------------------------------------------------------------------------
# operators
# --------------------------------------------------------------------------


class MatvecCounter:
    """Thread-safe monotone counter of matvec units."""

    def __init__(self):
        self._lock = threading.Lock()
        self._count = 0

    def add(self, units):
        with self._lock:
            self._count += int(units)

    @property
    def count(self):
        return self._count


class SymmetricOperator:
    """Symmetric linear map of dimension ``dim`` with matvec accounting.

    ``apply`` takes a vector of length ``dim`` or a ``(b, dim)`` block of
    row vectors; a block costs ``b * unit_cost`` units.
    """

    unit_cost = 1

    def __init__(self, dim, counter=None):
        if dim <= 0:
            raise DimensionError("operator dimension must be positive")
        self.dim = int(dim)
        self.counter = counter if counter is not None else MatvecCounter()

    @property
    def matvecs(self):
        return self.counter.count

    def apply(self, V):
        V = np.asarray(V, dtype=np.float64)
        single = V.ndim == 1
        block = V[None, :] if single else V
        if block.ndim != 2 or block.shape[1] != self.dim:
            raise DimensionError(f"expected vectors of length {self.dim}, got shape {V.shape}")
        out = self._apply_block(block)
        self.counter.add(self.unit_cost * block.shape[0])
        return out[0] if single else out

    __call__ = apply

    def cheb_next(self, W, Wprev):
        """``2 M W - Wprev`` for blocks; subclasses may fuse this."""
        return 2.0 * self.apply(W) - Wprev

    def _apply_block(self, block):  # pragma: no cover - abstract
        raise NotImplementedError

    def to_dense(self):
        """Dense expansion (small ``dim`` only); not counted."""
        raise NotImplementedError


class ExplicitOperator(SymmetricOperator):
    """Wraps a symmetric :class:`SparseMatrix`."""

    def __init__(self, A, counter=None):
        if A.shape[0] != A.shape[1]:
            raise DimensionError("explicit operators need a square matrix")
        super().__init__(A.shape[0], counter)
        self.A = A

    def _apply_block(self, block):
        return kernels.spmm(self.A, block)

    def to_dense(self):
        return self.A.to_dense()

    def __repr__(self):
        return f"Explicit(d={self.dim}, nnz={self.A.nnz})"


class GramPlusShift(SymmetricOperator):
    """``A^T A + shift * I`` for a possibly rectangular ``A``; 2 units per apply."""

    unit_cost = 2

    def __init__(self, A, shift=0.0, counter=None):
        if shift < 0:
            raise ValueError("shift must be non-negative")
        super().__init__(A.shape[1], counter)
        self.A = A
        self.At = A.transpose()
        self.shift = float(shift)

    def _apply_block(self, block):
        AV = kernels.spmm(self.A, block)
        return kernels.affine_spmm(self.At, 1.0, 0.0, AV) + self.shift * block

    def to_dense(self):
        D = self.A.to_dense()
        return D.T @ D + self.shift * np.eye(self.dim)

    def __repr__(self):
        return f"GramPlusShift(shape={self.A.shape}, shift={self.shift})"


class AffineOperator(SymmetricOperator):
    """``alpha * inner + beta * I``; costs whatever ``inner`` costs."""

    def __init__(self, inner, alpha, beta):
        super().__init__(inner.dim, inner.counter)
        self.inner = inner
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.unit_cost = inner.unit_cost

    def apply(self, V):
        V = np.asarray(V, dtype=np.float64)
        if isinstance(self.inner, ExplicitOperator):
            return SymmetricOperator.apply(self, V)
        return self.alpha * self.inner.apply(V) + self.beta * V

    def _apply_block(self, block):
        return kernels.affine_spmm(self.inner.A, self.alpha, self.beta, block)

    def cheb_next(self, W, Wprev):
        if isinstance(self.inner, ExplicitOperator):
            if W.shape[-1] != self.dim:
                raise DimensionError(f"expected vectors of length {self.dim}")
            out = kernels.cheb_next(self.inner.A, self.alpha, self.beta, W, Wprev)
            self.counter.add(self.unit_cost * W.shape[0])
            return out
        return 2.0 * self.apply(W) - Wprev

    def to_dense(self):
        return self.alpha * self.inner.to_dense() + self.beta * np.eye(self.dim)

    def __repr__(self):
        return f"Affine({self.inner!r}, alpha={self.alpha}, beta={self.beta})"


def matvec(op, v):
    """Apply ``op`` to ``v`` (counted)."""
    return op.apply(v)


# --------------------------------------------------------------------------
# spectral intervals
# --------------------------------------------------------------------------


def _gershgorin(op):
    if isinstance(op, ExplicitOperator):
        M = op.A.to_scipy()
        diag = M.diagonal()
        radii = np.asarray(abs(M).sum(axis=1)).ravel() - np.abs(diag)
        return float(np.min(diag - radii)), float(np.max(diag + radii))
    if isinstance(op, GramPlusShift):
        M = abs(op.A.to_scipy())
        norm1 = float(M.sum(axis=0).max())
        norminf = float(M.sum(axis=1).max())
        return op.shift, norm1 * norminf + op.shift
    if isinstance(op, AffineOperator):
        a, b = _gershgorin(op.inner)
        lo, hi = sorted((op.alpha * a + op.beta, op.alpha * b + op.beta))
        return lo, hi
    raise TypeError(f"gershgorin bounds unavailable for {type(op).__name__}")


def _power_top(op, shift, sign, iterations, seed):
    x = kernels.rademacher_block(seed, 0, 1, op.dim)[0]
    x /= np.linalg.norm(x)
    theta = 0.0
    for _ in range(iterations):
        y = sign * op.apply(x) + shift * x
        theta = float(x @ y)
        nrm = np.linalg.norm(y)
        if nrm == 0.0:
            return -shift
        x = y / nrm
    return theta - shift


def spectral_interval(op, method="gershgorin", iterations=100, safety=0.01, seed=0):
    """Return ``(a, b)`` intended to contain the spectrum of ``op``.

    ``method="gershgorin"`` gives rigorous disc bounds (for Gram operators the
    product bound ``||A||_1 ||A||_inf`` is used instead).  ``method="power"``
    runs ``iterations`` shifted power steps toward each end of the spectrum
    and widens the result by ``safety`` times its width on both sides; it
    consumes ``3 * iterations`` applies of ``op``.
    """
    if op.dim <= 0:
        raise DimensionError("zero-dimension operator")
    if method == "gershgorin":
        return _gershgorin(op)
    if method != "power":
        raise ValueError(f"unknown interval method {method!r}")
    rho = abs(_power_top(op, 0.0, 1.0, iterations, seed))
    hi = _power_top(op, rho, 1.0, iterations, seed)
    lo = -_power_top(op, rho, -1.0, iterations, seed)
    width = max(hi - lo, np.finfo(float).eps * max(1.0, abs(hi)))
    lo, hi = lo - safety * width, hi + safety * width
    if isinstance(op, GramPlusShift):
        lo = max(lo, op.shift)
    return float(lo), float(hi)
