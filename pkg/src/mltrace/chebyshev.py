"""Chebyshev interpolants and per-term quadratic forms ``z^T T_j(M) z``."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.fft

from . import kernels
from .errors import DimensionError, DomainError, IntervalViolationError
from .matio import AffineOperator

__all__ = [
    "FunctionSpec",
    "ChebyshevModel",
    "TermSampleVector",
    "chebyshev_nodes",
    "chebyshev_coefficients",
    "interpolant_value",
    "map_operator",
    "chebyshev_moments",
    "term_block",
    "term_quadratic_forms",
]

# |z^T T_j(M) z| <= ||z||^2 whenever spec(M) lies in [-1, 1]
_ESCAPE_TOL = 1e-3


@dataclass(frozen=True)
class FunctionSpec:
    """Scalar function to interpolate.

    ``kind`` is one of ``log``, ``sqrt``, ``exp``, ``power`` (with exponent
    ``p``) or ``cube``.  ``shift`` is the regularization added to Gram
    operators; it is carried here so reports can show it, but does not
    change the function.
    """

    kind: str
    p: float | None = None
    shift: float = 0.0

    def __post_init__(self):
        if self.kind not in ("log", "sqrt", "exp", "power", "cube"):
            raise ValueError(f"unknown function kind {self.kind!r}")
        if self.kind == "power" and self.p is None:
            raise ValueError("power function needs an exponent")
        if self.shift < 0:
            raise ValueError("regularization must be non-negative")

    @classmethod
    def parse(cls, text, shift=0.0):
        """Parse ``log``, ``sqrt``, ``exp``, ``cube`` or ``power:<p>``."""
        text = text.strip().lower()
        if text.startswith("power:"):
            return cls("power", float(text.split(":", 1)[1]), shift)
        return cls(text, None, shift)

    @property
    def name(self):
        return f"power:{self.p:g}" if self.kind == "power" else self.kind

    def valid(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "log":
            return x > 0
        if self.kind == "sqrt":
            return x >= 0
        if self.kind == "power" and not float(self.p).is_integer():
            return x > 0 if self.p < 0 else x >= 0
        if self.kind == "power" and self.p < 0:
            return x != 0
        return np.isfinite(x)

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        with np.errstate(all="ignore"):
            if self.kind == "log":
                y = np.log(x)
            elif self.kind == "sqrt":
                y = np.sqrt(x)
            elif self.kind == "exp":
                y = np.exp(x)
            elif self.kind == "cube":
                y = x * x * x
            else:
                y = np.power(x, self.p)
        return np.where(self.valid(x), y, np.nan)


@dataclass
class ChebyshevModel:
    """Degree-``n`` interpolant ``sum_j c_j T_j(g(x))`` on ``[a, b]``."""

    fn: FunctionSpec | None
    degree: int
    a: float
    b: float
    coeffs: np.ndarray

    def to_unit(self, x):
        """Affine map ``g``: ``a -> -1``, ``b -> 1`` (both exactly)."""
        x = np.asarray(x, dtype=np.float64)
        return ((x - self.a) - (self.b - x)) / (self.b - self.a)

    def from_unit(self, t):
        t = np.asarray(t, dtype=np.float64)
        x = 0.5 * ((1.0 - t) * self.a + (1.0 + t) * self.b)
        return np.clip(x, self.a, self.b)

    @property
    def alpha(self):
        return 2.0 / (self.b - self.a)

    @property
    def beta(self):
        return -(self.a + self.b) / (self.b - self.a)

    def nodes(self):
        return self.from_unit(chebyshev_nodes(self.degree))

    def truncated(self, degree):
        return ChebyshevModel(self.fn, degree, self.a, self.b, self.coeffs[: degree + 1].copy())

    @classmethod
    def from_coefficients(cls, coeffs, interval=(-1.0, 1.0)):
        coeffs = np.asarray(coeffs, dtype=np.float64)
        a, b = map(float, interval)
        return cls(None, len(coeffs) - 1, a, b, coeffs)


@dataclass
class TermSampleVector:
    """``terms[j] = c_j z^T T_j(M) z`` for one probe."""

    terms: np.ndarray
    matvecs: int

    @property
    def total(self):
        return float(self.terms.sum())


def chebyshev_nodes(n):
    """Chebyshev-Lobatto points ``cos(j pi / n)``, ``j = 0..n`` (n=0 gives 0)."""
    if n == 0:
        return np.zeros(1)
    j = np.arange(n + 1)
    # sine form is exactly antisymmetric about the midpoint
    return np.sin(np.pi * (n - 2 * j) / (2 * n))


def _check_interval(interval):
    a, b = map(float, interval)
    if not (np.isfinite(a) and np.isfinite(b) and a < b):
        raise ValueError(f"invalid interval [{a}, {b}]")
    return a, b


def chebyshev_coefficients(f, n, interval=(-1.0, 1.0), method="direct"):
    """Interpolate ``f`` at ``n + 1`` mapped Chebyshev-Lobatto points.

    ``method`` selects a direct O(n^2) cosine sum or a type-I DCT; they agree
    to rounding.  Raises :class:`DomainError` naming the first node where
    ``f`` is not finite.
    """
    if n < 0:
        raise ValueError("degree must be non-negative")
    a, b = _check_interval(interval)
    model = ChebyshevModel(f, int(n), a, b, np.zeros(n + 1))
    x = model.nodes()
    fx = f(x) if callable(f) else None
    bad = ~np.isfinite(fx)
    if np.any(bad):
        j = int(np.argmax(bad))
        name = getattr(f, "name", "f")
        raise DomainError(f"{name} is not finite at node {j} (x = {x[j]!r}) of [{a}, {b}]")
    if n == 0:
        model.coeffs = fx.astype(np.float64)
        return model
    if method == "direct":
        j = np.arange(n + 1)
        # reduce j*k mod 2n before the cosine to keep arguments small
        C = np.cos(np.pi * (np.outer(j, j) % (2 * n)) / n)
        w = np.ones(n + 1)
        w[0] = w[-1] = 0.5
        c = (2.0 / n) * (C @ (w * fx))
    elif method == "dct":
        c = scipy.fft.dct(fx, type=1) / n
    else:
        raise ValueError(f"unknown coefficient method {method!r}")
    c[0] *= 0.5
    c[-1] *= 0.5
    model.coeffs = c
    return model


def interpolant_value(model, x):
    """Evaluate the interpolant at ``x`` in ``[a, b]`` (Clenshaw recurrence).

    Points outside the interval raise :class:`DomainError`; the interpolant
    is never extrapolated.
    """
    xa = np.asarray(x, dtype=np.float64)
    if np.any(~(xa >= model.a) | ~(xa <= model.b)):
        raise DomainError(f"x outside [{model.a}, {model.b}]")
    t = model.to_unit(xa)
    c = model.coeffs
    b1 = np.zeros_like(t)
    b2 = np.zeros_like(t)
    for cj in c[:0:-1]:
        b1, b2 = 2.0 * t * b1 - b2 + cj, b1
    y = t * b1 - b2 + c[0]
    return float(y) if np.ndim(y) == 0 else y


def map_operator(op, model):
    """The operator ``g(M)`` whose spectrum the model expects in [-1, 1]."""
    return AffineOperator(op, model.alpha, model.beta)


def chebyshev_moments(op, Z, degree, symmetry_trick=False):
    """Moments ``Z[i]^T T_j(op) Z[i]`` for ``j = 0..degree``.

    ``Z`` is a ``(b, d)`` block.  The plain path runs the three-term
    recurrence to ``degree`` (``degree`` matvecs per probe).  With
    ``symmetry_trick`` only ``ceil(degree / 2)`` steps are taken and the
    upper moments come from ``T_{2i} = 2 T_i^2 - T_0`` and
    ``T_{2i+1} = 2 T_i T_{i+1} - T_1``.
    """
    Z = np.ascontiguousarray(Z, dtype=np.float64)
    if Z.ndim != 2 or Z.shape[1] != op.dim:
        raise DimensionError(f"probe block shape {Z.shape} does not match dimension {op.dim}")
    b = Z.shape[0]
    mom = np.empty((b, degree + 1))
    mom[:, 0] = kernels.rowdot(Z, Z)
    if degree == 0:
        return mom
    steps = math.ceil(degree / 2) if symmetry_trick else degree
    w_prev, w = Z, op.apply(Z)
    mom[:, 1] = kernels.rowdot(Z, w)
    if symmetry_trick:
        _fill_products(mom, 1, w_prev, w, degree)
    for j in range(1, steps):
        w_prev, w = w, op.cheb_next(w, w_prev)
        mom[:, j + 1] = kernels.rowdot(Z, w)
        if symmetry_trick:
            _fill_products(mom, j + 1, w_prev, w, degree)
    _check_moments(mom)
    return mom


def _fill_products(mom, i, w_prev, w, degree):
    # w_prev = T_{i-1} z, w = T_i z
    hi = 2 * i
    if hi <= degree and hi > math.ceil(degree / 2):
        mom[:, hi] = 2.0 * kernels.rowdot(w, w) - mom[:, 0]
    odd = 2 * i - 1
    if odd <= degree and odd > math.ceil(degree / 2):
        mom[:, odd] = 2.0 * kernels.rowdot(w_prev, w) - mom[:, 1]


def _check_moments(mom):
    if not np.all(np.isfinite(mom)):
        raise IntervalViolationError("non-finite Chebyshev term: spectrum escaped the model interval")
    scale = mom[:, :1]
    if np.any(np.abs(mom) > (1.0 + _ESCAPE_TOL) * scale):
        raise IntervalViolationError("|z^T T_j z| exceeds ||z||^2: spectrum escaped the model interval")


def term_block(op, Z, model, degree=None, symmetry_trick=False):
    """Weighted terms ``c_j z^T T_j z`` for a probe block, on a mapped operator."""
    degree = model.degree if degree is None else degree
    return chebyshev_moments(op, Z, degree, symmetry_trick) * model.coeffs[: degree + 1]


def term_quadratic_forms(op, z, model, symmetry_trick=False):
    """Per-term samples for one probe ``z`` on an operator already mapped to [-1, 1]."""
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 1:
        raise DimensionError("z must be a vector")
    before = op.counter.count
    terms = term_block(op, z[None, :], model, symmetry_trick=symmetry_trick)[0]
    return TermSampleVector(terms, op.counter.count - before)
