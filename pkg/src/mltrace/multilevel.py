"""Level selection, sample allocation and the multilevel trace estimator.

Levels are a strictly increasing sequence ``l_1 < ... < l_L = n``; level
``k`` samples the partial sum of terms ``(l_{k-1}, l_k]`` with ``l_0 = -1``.
The ``j = 0`` term ``c_0 z^T z = c_0 d`` is deterministic for Rademacher
probes, so it never contributes variance and the level selector treats the
prefix ending at 0 as free.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .chebyshev import chebyshev_coefficients, map_operator
from .matio import spectral_interval
from .report import EstimateReport, LevelSummary
from .sampling import DEFAULT_CHUNK, ProbeStream, _terms, collect_pilot, single_level_estimate

__all__ = [
    "VarianceTable",
    "CostModel",
    "LevelPlan",
    "AllocationPlan",
    "build_variance_table",
    "select_levels",
    "allocate_samples",
    "multilevel_estimate",
    "estimate_trace",
]


@dataclass
class VarianceTable:
    """``values[lp + 1, l]`` is the variance of the partial sum over ``(lp, l]``."""

    values: np.ndarray
    pilot_size: int

    @property
    def degree(self):
        return self.values.shape[1] - 1

    def get(self, lp, l):
        if not -1 <= lp < l <= self.degree:
            raise IndexError(f"no variance for segment ({lp}, {l}]")
        return float(self.values[lp + 1, l])

    @classmethod
    def from_function(cls, func, n, pilot_size=0):
        """Table from ``func(lp, l)``; row ``-1`` is copied from row 0."""
        V = np.full((n + 2, n + 1), np.nan)
        for l in range(1, n + 1):
            for lp in range(0, l):
                V[lp + 1, l] = func(lp, l)
        V[0, 1:] = V[1, 1:]
        V[0, 0] = 0.0
        return cls(V, pilot_size)


@dataclass(frozen=True)
class CostModel:
    """Matvec cost of one sample of the segment ``(lp, l]``.

    ``plain`` charges ``l`` operator applies, ``half`` charges
    ``ceil(l / 2)``; both are multiplied by the operator's unit cost.
    """

    variant: str = "plain"
    unit_cost: int = 1

    def __post_init__(self):
        if self.variant not in ("plain", "half"):
            raise ValueError(f"unknown cost variant {self.variant!r}")

    @classmethod
    def for_operator(cls, op, symmetry_trick=False):
        return cls("half" if symmetry_trick else "plain", op.unit_cost)

    def applies(self, l):
        return math.ceil(l / 2) if self.variant == "half" else int(l)

    def __call__(self, lp, l):
        return self.unit_cost * self.applies(l)


@dataclass
class LevelPlan:
    levels: tuple
    objective: float

    @property
    def L(self):
        return len(self.levels)

    def segments(self):
        lo = -1
        for hi in self.levels:
            yield lo, hi
            lo = hi


@dataclass
class AllocationPlan:
    samples: tuple
    real_samples: tuple
    mu: float
    mode: str
    target: float
    level_variances: tuple
    level_costs: tuple
    predicted_cost: float
    predicted_variance: float
    m_pilot: int | None = None
    pilot_clamped: bool = False


def build_variance_table(pilot):
    """Sample variances (divisor ``m - 1``) of every partial sum over the pilot rows."""
    t = np.asarray(pilot.table if hasattr(pilot, "table") else pilot, dtype=np.float64)
    m, width = t.shape
    if m < 2:
        raise ValueError("pilot needs at least two rows")
    n = width - 1
    S = np.zeros((m, n + 2))
    np.cumsum(t, axis=1, out=S[:, 1:])
    V = np.full((n + 2, n + 1), np.nan)
    for lp in range(0, n):
        D = S[:, lp + 2 :] - S[:, lp + 1 : lp + 2]
        V[lp + 1, lp + 1 :] = np.var(D, axis=0, ddof=1)
    # the j = 0 term is deterministic, so (-1, l] and (0, l] share a variance
    V[0, 1:] = V[1, 1:]
    V[0, 0] = np.var(t[:, 0], ddof=1)
    return VarianceTable(V, m)


# --------------------------------------------------------------------------
# level selection
# --------------------------------------------------------------------------


def _repaired_value(rest, V_top, C_top, m_pilot, variance, budget):
    """Objective of a candidate once its top level is forced to ``m_pilot`` samples.

    The value is expressed on the same scale as ``sum sqrt(V_k C_k)``:
    ``sqrt(eps^2 * cost)`` for a variance target, ``sqrt(C * variance)`` for
    a budget.  Returns ``None`` when the unconstrained allocation already
    honours the constraint.
    """
    s_top = math.sqrt(V_top * C_top)
    total = rest + s_top
    if C_top == 0:
        return None
    if variance is not None:
        mu = total / variance
    else:
        mu = budget / total if total > 0 else math.inf
    if mu * math.sqrt(V_top / C_top) >= m_pilot:
        return None
    if variance is not None:
        left = variance - V_top / m_pilot
        if rest == 0.0:
            cost = m_pilot * C_top
        elif left <= 0:
            return math.inf
        else:
            cost = m_pilot * C_top + rest * rest / left
        return math.sqrt(variance * cost)
    left = budget - m_pilot * C_top
    if rest == 0.0:
        var = V_top / m_pilot
    elif left <= 0:
        return math.inf
    else:
        var = V_top / m_pilot + rest * rest / left
    return math.sqrt(budget * var)


def select_levels(V, cost, n=None, m_pilot=None, variance=None, budget=None):
    """Optimal levels by dynamic programming over ``C_l = min C_lp + sqrt(V C)``.

    With ``m_pilot`` and a target (``variance`` or ``budget``), candidates
    for the final step whose top level would receive fewer than ``m_pilot``
    samples are compared at their repaired objective.  Exact ties go to
    fewer levels, then to the smaller ``lp``.
    """
    n = V.degree if n is None else n
    if n == 0:
        return LevelPlan((0,), 0.0)
    constrained = m_pilot is not None and (variance is not None or budget is not None)
    if variance is not None and variance <= 0 or budget is not None and budget <= 0:
        raise ValueError("target variance and budget must be positive")
    best = [0.0] * (n + 1)
    count = [0] * (n + 1)
    back = [-1] * (n + 1)
    for l in range(1, n + 1):
        c = cost(0, l)
        key = None
        for lp in range(l):
            v = V.get(lp, l)
            val = best[lp] + math.sqrt(v * c)
            if constrained and l == n:
                rep = _repaired_value(best[lp], v, c, m_pilot, variance, budget)
                if rep is not None:
                    val = rep
            cand = (val, count[lp] + 1, lp)
            if key is None or cand < key:
                key = cand
        best[l], count[l], back[l] = key
    levels = []
    l = n
    while l > 0:
        levels.append(l)
        l = back[l]
    return LevelPlan(tuple(reversed(levels)), best[n])


# --------------------------------------------------------------------------
# allocation
# --------------------------------------------------------------------------


def _ceil(x):
    return max(1, math.ceil(x - 1e-9 * max(1.0, x)))


def _real_alloc(Vs, Cs, mu):
    out = []
    for v, c in zip(Vs, Cs):
        out.append(1.0 if c == 0 else mu * math.sqrt(v / c))
    return out


def allocate_samples(plan, V, cost, variance=None, budget=None, m_pilot=None):
    """Optimal per-level sample counts for a variance target or a matvec budget.

    ``mu = sum sqrt(V_k C_k) / eps^2`` (target) or ``C / sum sqrt(V_k C_k)``
    (budget) and ``m_k = max(1, ceil(mu sqrt(V_k / C_k)))``.  If the top
    level falls below ``m_pilot`` it is raised to ``m_pilot`` and the other
    levels are re-optimized against what remains of the target.
    """
    if (variance is None) == (budget is None):
        raise ValueError("give exactly one of variance or budget")
    if variance is not None and variance <= 0:
        raise ValueError("target variance must be positive")
    if budget is not None and budget <= 0:
        raise ValueError("budget must be positive")
    Vs, Cs = [], []
    for lp, l in plan.segments():
        Vs.append(V.get(lp, l) if l > 0 else 0.0)
        Cs.append(cost(lp, l))
    S = math.fsum(math.sqrt(v * c) for v, c in zip(Vs, Cs))
    if variance is not None:
        mu = S / variance
    else:
        mu = budget / S if S > 0 else 0.0
    real = _real_alloc(Vs, Cs, mu)
    clamped = False
    if m_pilot is not None and Cs[-1] > 0 and real[-1] < m_pilot:
        clamped = True
        rest = S - math.sqrt(Vs[-1] * Cs[-1])
        if variance is not None:
            left = variance - Vs[-1] / m_pilot
            mu_rest = rest / left if left > 0 else 0.0
        else:
            left = budget - m_pilot * Cs[-1]
            mu_rest = left / rest if rest > 0 and left > 0 else 0.0
        real = _real_alloc(Vs[:-1], Cs[:-1], mu_rest) + [float(m_pilot)]
    m = tuple(_ceil(x) for x in real)
    return AllocationPlan(
        samples=m,
        real_samples=tuple(real),
        mu=mu,
        mode="variance" if variance is not None else "budget",
        target=variance if variance is not None else budget,
        level_variances=tuple(Vs),
        level_costs=tuple(Cs),
        predicted_cost=float(sum(mk * c for mk, c in zip(m, Cs))),
        predicted_variance=math.fsum(v / mk for v, mk in zip(Vs, m)),
        m_pilot=m_pilot,
        pilot_clamped=clamped,
    )


# --------------------------------------------------------------------------
# estimator
# --------------------------------------------------------------------------


def multilevel_estimate(
    op,
    model,
    plan,
    alloc,
    stream,
    reuse_pilot=False,
    pilot=None,
    symmetry_trick=False,
    start=None,
    workers=1,
    chunk=DEFAULT_CHUNK,
):
    """Sum of per-level means of independent partial-sum samples.

    Levels draw disjoint, consecutive blocks of probe indices starting at
    ``start`` (default: just past the pilot).  With ``reuse_pilot`` the
    pilot rows become the first samples of the top level.
    """
    n = model.degree
    if plan.levels[-1] != n or len(alloc.samples) != plan.L:
        raise ValueError("plan and allocation do not match the model")
    if reuse_pilot:
        if pilot is None:
            raise ValueError("reuse_pilot needs the pilot table")
        if pilot.degree != n or alloc.samples[-1] < pilot.size:
            raise ValueError("pilot cannot be reused: degree mismatch or top level smaller than pilot")
    if start is None:
        start = pilot.size if pilot is not None else 0
    mapped = map_operator(op, model)
    before = op.counter.count
    next_probe = start
    levels = []
    estimate = 0.0
    var_sum = 0.0
    for k, ((lo, hi), m_k) in enumerate(zip(plan.segments(), alloc.samples)):
        top = k == plan.L - 1
        reused = np.empty(0)
        if top and reuse_pilot:
            reused = pilot.table[:, lo + 1 : hi + 1].sum(axis=1)
        fresh = m_k - reused.size
        terms = _terms(mapped, model, stream, next_probe, fresh, hi, symmetry_trick, workers, chunk)
        next_probe += fresh
        vals = np.concatenate([reused, terms[:, lo + 1 : hi + 1].sum(axis=1)])
        mean = float(np.mean(vals))
        if vals.size > 1:
            var = float(np.var(vals, ddof=1))
        else:
            var = float(alloc.level_variances[k])
        estimate += mean
        var_sum += var / vals.size
        levels.append(LevelSummary(lo, hi, int(vals.size), int(fresh), mean, var, int(alloc.level_costs[k])))
    return EstimateReport(
        estimate=estimate,
        stderr=math.sqrt(var_sum),
        matvecs=op.counter.count - before,
        levels=levels,
        plan=plan,
        allocation=alloc,
        seed=stream.seed,
        info={"mode": "multilevel", "first_probe": start, "reuse_pilot": bool(reuse_pilot)},
    )


def estimate_trace(
    op,
    fn,
    degree,
    *,
    mode="multilevel",
    levels=None,
    interval=None,
    interval_method="gershgorin",
    budget=None,
    variance=None,
    samples=None,
    m_pilot=10,
    seed=0,
    symmetry_trick=False,
    reuse_pilot=True,
    workers=1,
    chunk=DEFAULT_CHUNK,
):
    """End-to-end estimate of ``trace(f(op))``.

    ``mode`` is ``single``, ``multilevel`` (levels chosen from a pilot) or
    ``fixed`` (``levels`` given; the pilot only sizes the allocation).  The
    report's ``matvecs`` is the operator counter delta over the whole run,
    including spectral-interval estimation and the pilot.
    """
    before = op.counter.count
    if interval is None:
        interval = spectral_interval(op, interval_method)
        interval_source = interval_method
    else:
        interval_source = "given"
    model = chebyshev_coefficients(fn, degree, interval)
    stream = ProbeStream(seed)
    cost = CostModel.for_operator(op, symmetry_trick)
    info = {
        "function": fn.name if hasattr(fn, "name") else str(fn),
        "degree": degree,
        "interval": [float(interval[0]), float(interval[1])],
        "interval_method": interval_source,
        "symmetry_trick": symmetry_trick,
        "m_pilot": m_pilot,
        "workers": workers,
    }

    if mode == "single":
        per_sample = max(cost(0, degree), 1)
        if samples is None:
            if budget is None:
                raise ValueError("single mode needs samples or a budget")
            samples = max(1, int(budget // per_sample))
        rep = single_level_estimate(op, model, samples, stream, symmetry_trick, 0, workers, chunk)
        rep.info.update(info)
        rep.matvecs = op.counter.count - before
        return rep

    if mode not in ("multilevel", "fixed"):
        raise ValueError(f"unknown mode {mode!r}")
    if budget is None and variance is None:
        if samples is None:
            raise ValueError("multilevel mode needs a budget, a target variance or a sample count")
        budget = samples * cost(0, degree)
    pilot = collect_pilot(op, model, m_pilot, stream, symmetry_trick, workers, chunk)
    V = build_variance_table(pilot)
    if mode == "fixed":
        lv = sorted(set(int(x) for x in levels))
        if not lv or lv[-1] != degree or lv[0] < 0:
            raise ValueError(f"fixed levels must be increasing and end at the degree {degree}")
        objective = 0.0
        plan = LevelPlan(tuple(lv), 0.0)
        for lp, l in plan.segments():
            objective += math.sqrt((V.get(lp, l) if l > 0 else 0.0) * cost(lp, l))
        plan.objective = objective
    else:
        plan = select_levels(V, cost, degree, m_pilot=m_pilot, variance=variance, budget=budget)
    alloc = allocate_samples(plan, V, cost, variance=variance, budget=budget, m_pilot=m_pilot)
    can_reuse = reuse_pilot and alloc.samples[-1] >= m_pilot
    rep = multilevel_estimate(
        op, model, plan, alloc, stream, can_reuse, pilot, symmetry_trick, None, workers, chunk
    )
    info.update(rep.info)
    info["mode"] = mode
    info["pilot_matvecs"] = pilot.matvecs
    rep.info = info
    rep.matvecs = op.counter.count - before
    return rep
