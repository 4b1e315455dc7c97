"""Rademacher probe streams, the Hutchinson estimator and pilot samples."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .chebyshev import map_operator, term_block
from .kernels import rademacher_block
from .report import EstimateReport, LevelSummary

__all__ = [
    "ProbeStream",
    "PilotTable",
    "map_chunks",
    "single_level_estimate",
    "collect_pilot",
    "DEFAULT_CHUNK",
]

DEFAULT_CHUNK = 32


@dataclass(frozen=True)
class ProbeStream:
    """Counter-based Rademacher stream: probe ``i`` depends only on ``(seed, i, d)``."""

    seed: int

    def probe(self, index, d):
        return rademacher_block(self.seed, index, 1, d)[0]

    def block(self, start, count, d):
        return rademacher_block(self.seed, start, count, d)


@dataclass
class PilotTable:
    """``table[i, j] = c_j z_i^T T_j z_i`` for the pilot probes."""

    table: np.ndarray
    probe_indices: np.ndarray
    matvecs: int

    @property
    def size(self):
        return self.table.shape[0]

    @property
    def degree(self):
        return self.table.shape[1] - 1


def map_chunks(func, start, count, chunk=DEFAULT_CHUNK, workers=1):
    """Apply ``func(first, n)`` to fixed-size index chunks and concatenate in order.

    Chunk boundaries depend only on ``start`` and ``chunk``, so the result is
    bit-identical for any ``workers``.
    """
    bounds = [(s, min(chunk, start + count - s)) for s in range(start, start + count, chunk)]
    if not bounds:
        return []
    if workers <= 1 or len(bounds) == 1:
        return [func(s, n) for s, n in bounds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda sn: func(*sn), bounds))


def _terms(mapped, model, stream, start, count, degree, symmetry_trick, workers, chunk):
    d = mapped.dim

    def run(s, n):
        return term_block(mapped, stream.block(s, n, d), model, degree, symmetry_trick)

    parts = map_chunks(run, start, count, chunk, workers)
    if not parts:
        return np.empty((0, degree + 1))
    return np.concatenate(parts, axis=0)


def single_level_estimate(op, model, m, stream, symmetry_trick=False, start=0, workers=1, chunk=DEFAULT_CHUNK):
    """Hutchinson estimate of ``trace(p_n(A))`` from ``m`` probes.

    ``op`` is the raw operator; it is mapped into the model interval here.
    The standard error uses the unbiased sample variance.
    """
    if m < 1:
        raise ValueError("need at least one sample")
    mapped = map_operator(op, model)
    before = op.counter.count
    terms = _terms(mapped, model, stream, start, m, model.degree, symmetry_trick, workers, chunk)
    samples = terms.sum(axis=1)
    mean = float(np.mean(samples))
    var = float(np.var(samples, ddof=1)) if m > 1 else float("nan")
    used = op.counter.count - before
    level = LevelSummary(-1, model.degree, m, m, mean, var, used // m if m else 0)
    return EstimateReport(
        estimate=mean,
        stderr=float(np.sqrt(var / m)) if m > 1 else float("nan"),
        matvecs=used,
        levels=[level],
        seed=stream.seed,
        info={"mode": "single", "samples": m, "first_probe": start},
    )


def collect_pilot(op, model, m_pilot, stream, symmetry_trick=False, workers=1, chunk=DEFAULT_CHUNK):
    """Full-degree per-term table for probes ``0 .. m_pilot - 1`` of ``stream``."""
    if m_pilot < 2:
        raise ValueError("pilot needs at least two samples to estimate variances")
    mapped = map_operator(op, model)
    before = op.counter.count
    table = _terms(mapped, model, stream, 0, m_pilot, model.degree, symmetry_trick, workers, chunk)
    return PilotTable(table, np.arange(m_pilot), op.counter.count - before)
