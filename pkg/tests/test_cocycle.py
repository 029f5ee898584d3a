import math
from functools import reduce

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import SPECS
from fiberbunch import examples
from fiberbunch.cocycle import (
    CocycleInstance,
    LocallyConstantGenerator,
    constant_generator,
    make_coboundary,
    symbol_generator,
)
from fiberbunch.errors import DimensionMismatch, InadmissiblePoint
from fiberbunch.linops import InvertibleOperator

seeds = st.integers(0, 2 ** 32 - 1)


def naive_iterate(c, x, n):
    """Product of generator values read symbol by symbol (oracle)."""
    r = c.r
    if n >= 0:
        mats = [c.generator.table[tuple(x[j + i] for i in range(-r, r + 1))].entries for j in range(n)]
        return reduce(lambda acc, m: m @ acc, mats, np.eye(c.dim))
    mats = [c.generator.table[tuple(x[j + i] for i in range(-r, r + 1))].entries for j in range(n, 0)]
    return np.linalg.inv(reduce(lambda acc, m: m @ acc, mats, np.eye(c.dim)))


@pytest.fixture(scope="module")
def cocycles():
    g = SPECS["golden"]
    return [examples.e2(), examples.e3(), examples.near_identity(g, 1, 0.1, 3),
            examples.near_identity(SPECS["three"], 2, 0.1, 4)]


def test_e2_inverse_pair(e2, full2):
    x = full2.point((1,), (2,), (1,), 0)
    a = e2.iterate(x, 2)
    assert np.allclose(e2.iterate(x.shift(1), 1).entries @ e2.evaluate(x).entries, a.entries)
    d1 = e2.evaluate(full2.periodic((1,)))
    d2 = e2.evaluate(full2.periodic((2,)))
    assert np.allclose(d2.entries @ d1.entries, np.eye(2), atol=1e-15)


def test_q_distortion_example(e2, full2):
    assert e2.q_distortion(full2.periodic((1,)), 5) == pytest.approx(math.e, rel=1e-13)
    assert e2.bunching_gap(full2.periodic((1,)), 1) == pytest.approx(0.2 - math.log(2), abs=1e-15)


def test_zero_iterate(e2, full2):
    assert e2.iterate(full2.periodic((1,)), 0).allclose(InvertibleOperator.identity(2))


def test_iteration_cap(e2, full2):
    with pytest.raises(ValueError):
        e2.iterate(full2.periodic((1,)), 10_001)


def test_incomplete_table(full2):
    with pytest.raises(InadmissiblePoint):
        CocycleInstance(full2, LocallyConstantGenerator(0, {(1,): InvertibleOperator.identity(2)}))


def test_mixed_dimensions():
    with pytest.raises(DimensionMismatch):
        LocallyConstantGenerator(0, {(1,): InvertibleOperator.identity(2), (2,): InvertibleOperator.identity(3)})


def test_beta_range():
    with pytest.raises(ValueError):
        LocallyConstantGenerator(0, {(1,): InvertibleOperator.identity(2)}, beta=1.5)


@given(seeds, st.integers(0, 3), st.integers(-12, 12))
def test_iterate_matches_naive_product(cocycles, seed, which, n):
    c = cocycles[which]
    x = c.shift.random_point(np.random.default_rng(seed))
    a = c.iterate(x, n)
    assert np.allclose(a.entries, naive_iterate(c, x, n), rtol=1e-10, atol=1e-12)
    assert np.allclose(a.entries @ a.inverse_entries, np.eye(c.dim), atol=1e-10)


@given(seeds, st.integers(0, 3), st.integers(-20, 20), st.integers(-20, 20))
def test_cocycle_equation(cocycles, seed, which, n, k):
    c = cocycles[which]
    x = c.shift.random_point(np.random.default_rng(seed))
    lhs = c.iterate(x, n + k).entries
    rhs = (c.iterate(x.shift(k), n) @ c.iterate(x, k)).entries
    assert np.abs(lhs - rhs).max() <= 1e-12 * np.abs(lhs).max()


@given(seeds, st.integers(0, 3), st.integers(1, 10), st.integers(1, 10))
def test_gap_subadditive(cocycles, seed, which, n, m):
    c = cocycles[which]
    x = c.shift.random_point(np.random.default_rng(seed))
    assert c.bunching_gap(x, n + m) <= c.bunching_gap(x, n) + c.bunching_gap(x.shift(n), m) + 1e-12


@given(seeds, st.integers(-8, 8))
def test_coboundary_definition(seed, n):
    spec = SPECS["full2"]
    b = examples.e2(spec)
    t = examples.e3_transfer(spec)
    a = make_coboundary(b, t)
    x = spec.random_point(np.random.default_rng(seed))
    cx = t.table[(x[0],)]
    cfx = t.table[(x[n],)]
    expected = cfx.entries @ b.iterate(x, n).entries @ cx.inverse_entries
    assert np.allclose(a.iterate(x, n).entries, expected, atol=1e-12)


def test_word_products_agree_with_iterate(cocycles, rng):
    c = cocycles[3]
    x = c.shift.random_point(rng)
    row = x.window_array(-c.r, 6 + c.r)
    p, pinv = c.word_products(row[None])
    assert np.allclose(p[0], c.iterate(x, 7).entries)
    assert np.allclose(pinv[0], c.iterate(x, 7).inverse_entries)


def test_holder_constant_symbol_generator(full2):
    g = symbol_generator(full2, {1: np.diag([2.0, 1.0]), 2: np.eye(2)})
    # d = |2 - 1| + |1/2 - 1|, divided by nu^0
    assert g.holder_constant(0.5) == pytest.approx(1.5)
    assert constant_generator(full2, np.eye(2)).holder_constant(0.5) == 0.0
