import math

import numpy as np
import pytest

from mltrace.bounds import (
    BoundQuery,
    build_level_matrices,
    hutchinson_sample_count,
    multilevel_sample_plan,
    multilevel_tail_bound,
)
from mltrace.chebyshev import FunctionSpec, chebyshev_coefficients
from mltrace.errors import OracleSizeError
from mltrace.reference import dense_chebyshev

from .conftest import random_spsd, random_symmetric


def test_hutchinson_count_examples():
    assert hutchinson_sample_count(1.0, 2 / math.e) == 6
    assert 600 * math.log(40) == pytest.approx(2213.33, abs=0.01)
    assert hutchinson_sample_count(0.1, 0.05) == 2214


@pytest.mark.parametrize("eps, delta", [(0.3, 0.1), (0.05, 0.01), (0.7, 0.5)])
def test_hutchinson_count_scaling(eps, delta):
    m1 = hutchinson_sample_count(eps, delta)
    m2 = hutchinson_sample_count(eps / 2, delta)
    assert abs(m2 - 4 * m1) <= 4


@pytest.mark.parametrize("eps, delta", [(0, 0.1), (-1, 0.1), (0.1, 0), (0.1, 1)])
def test_hutchinson_count_rejects(eps, delta):
    with pytest.raises(ValueError):
        hutchinson_sample_count(eps, delta)


def test_swap_matrix_bound():
    q = BoundQuery(2.0, (math.sqrt(2),), (1.0,))
    assert multilevel_tail_bound(q, (1,)) == pytest.approx(2 * math.exp(-1 / 8), rel=1e-15)


def test_bound_vanishes_with_eps():
    vals = [multilevel_tail_bound(BoundQuery(e, (3.0, 1.0), (2.0, 0.5)), (4, 2)) for e in (1, 10, 100, 1000)]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 1e-20


def test_monotone_in_counts_and_norms():
    base = BoundQuery(1.5, (2.0, 1.0), (1.0, 0.8))
    b0 = multilevel_tail_bound(base, (3, 3))
    assert multilevel_tail_bound(base, (6, 3)) <= b0
    assert multilevel_tail_bound(base, (3, 9)) <= b0
    assert multilevel_tail_bound(BoundQuery(1.5, (2.5, 1.0), (1.0, 0.8)), (3, 3)) >= b0
    assert multilevel_tail_bound(BoundQuery(1.5, (2.0, 1.0), (1.9, 0.8)), (3, 3)) >= b0


def test_single_level_reduction():
    # L = 1, m samples: same as the single-sample bound applied to B / m
    eps, f, s, m = 0.7, 2.3, 1.1, 5
    direct = 2 * math.exp(-(eps**2) / (8 * (f / m) ** 2 * m + 8 * eps * s / m))
    assert multilevel_tail_bound(BoundQuery(eps, (f,), (s,)), (m,)) == pytest.approx(direct, rel=1e-14)


def test_block_diagonal_norms():
    rng = np.random.default_rng(3)
    Bs = []
    for d in (4, 4):
        B = random_symmetric(d, rng)
        np.fill_diagonal(B, 0)
        Bs.append(B)
    m = (2, 3)
    blocks = [Bs[0] / m[0]] * m[0] + [Bs[1] / m[1]] * m[1]
    big = np.zeros((4 * sum(m), 4 * sum(m)))
    for i, blk in enumerate(blocks):
        big[4 * i : 4 * i + 4, 4 * i : 4 * i + 4] = blk
    q = BoundQuery(1.0, tuple(np.linalg.norm(B) for B in Bs), tuple(np.abs(np.linalg.eigvalsh(B)).max() for B in Bs))
    big_q = BoundQuery(1.0, (np.linalg.norm(big),), (np.abs(np.linalg.eigvalsh(big)).max(),))
    assert multilevel_tail_bound(q, m) == pytest.approx(multilevel_tail_bound(big_q, (1,)), rel=1e-12)


def test_sample_plan_single_level():
    q = BoundQuery(0.5, (3.0,), (2.0,), costs=(7,))
    m, mu, cost = multilevel_sample_plan(q, 0.05)
    assert m == (math.ceil(8 / 0.25 * math.log(40) * (9 + 0.5 * 2)),)


def test_sample_plan_random_queries():
    rng = np.random.default_rng(0)
    for _ in range(50):
        L = int(rng.integers(1, 5))
        spec = rng.random(L) * 3
        frob = spec * (1 + rng.random(L) * 4)
        costs = tuple(int(c) for c in rng.integers(1, 100, L))
        q = BoundQuery(float(rng.uniform(0.1, 5)), tuple(frob), tuple(spec), costs)
        delta = float(rng.uniform(0.001, 0.5))
        m, mu, cost = multilevel_sample_plan(q, delta)
        assert multilevel_tail_bound(q, m) <= delta
        spent = sum(mk * c for mk, c in zip(m, costs))
        assert cost <= spent <= cost + sum(costs)


def test_sample_plan_rejects_zero_norms():
    with pytest.raises(ValueError):
        multilevel_sample_plan(BoundQuery(1.0, (0.0, 0.0), (0.0, 0.0)), 0.1)


def test_query_validation():
    with pytest.raises(ValueError):
        BoundQuery(1.0, (1.0,), (2.0,))
    with pytest.raises(ValueError):
        BoundQuery(0.0, (1.0,), (1.0,))
    with pytest.raises(ValueError):
        BoundQuery(1.0, (), ())


def test_level_matrices(rng):
    M = random_spsd(20, rng)
    lam = np.linalg.eigvalsh(M)
    model = chebyshev_coefficients(FunctionSpec("sqrt"), 30, (0.0, lam[-1] * 1.01))
    lm = build_level_matrices(M, model, (4, 11, 30))
    P = dense_chebyshev(M, model)
    np.testing.assert_allclose(sum(lm.A), P, atol=1e-10)
    for B in lm.B:
        assert np.all(np.diag(B) == 0)
    one = build_level_matrices(M, model, (30,))
    exact = np.sqrt(np.clip(lam, 0, None)).sum()
    assert abs(np.trace(one.A[0]) - exact) < 0.05 * exact
    with pytest.raises(OracleSizeError):
        build_level_matrices(np.eye(8), model, (30,), cap=4)
