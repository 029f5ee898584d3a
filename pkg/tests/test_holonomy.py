import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import SPECS
from fiberbunch import examples, holonomy
from fiberbunch.bunching import BunchingCertificate, find_uniform_N
from fiberbunch.errors import HolonomyDiverged, NoCertificate, NotOnLeaf
from fiberbunch.holonomy import (
    finite_product,
    stable_holonomy,
    unstable_holonomy,
    verify_holonomies,
)
from fiberbunch.shift_space import perturb_future, perturb_past, splice

seeds = st.integers(0, 2 ** 32 - 1)
kinds = st.sampled_from(["stable", "unstable"])


def _setup():
    cases = []
    for name, r, scale in [("full2", 0, 0.1), ("full2", 1, 0.05), ("golden", 1, 0.05),
                           ("full2", 2, 0.05), ("three", 2, 0.04)]:
        c = examples.near_identity(SPECS[name], r, scale, seed=r + 7)
        cases.append((c, find_uniform_N(c)))
    cases.append((examples.e3(), find_uniform_N(examples.e3())))
    return cases


CASES = _setup()
case_idx = st.integers(0, len(CASES) - 1)


def local_pair(c, kind, seed, n):
    rng = np.random.default_rng(seed)
    for _ in range(50):
        x = c.shift.random_point(rng)
        y = perturb_past(x, n, rng) if kind == "stable" else perturb_future(x, n, rng)
        if y is not None:
            return x, y, rng
    pytest.skip("no perturbation available")


def hol(c, cert, x, y, kind):
    return holonomy.holonomy(c, x, y, cert, kind)


def close(a, b, tol=1e-10):
    return np.abs(a.entries - b.entries).max() < tol


def test_same_point_is_identity(e2):
    cert = find_uniform_N(e2)
    x = e2.shift.random_point(np.random.default_rng(0))
    for f in (stable_holonomy, unstable_holonomy):
        h = f(e2, x, x, cert)
        assert np.array_equal(h.operator.entries, np.eye(2)) and h.error_bound == 0


def test_radius_zero_local_is_identity():
    c, cert = CASES[0]
    x, y, _ = local_pair(c, "stable", 3, 2)
    assert np.array_equal(stable_holonomy(c, x, y, cert).operator.entries, np.eye(2))
    x, y, _ = local_pair(c, "unstable", 3, 2)
    assert np.array_equal(unstable_holonomy(c, x, y, cert).operator.entries, np.eye(2))


def test_radius_one_single_factor():
    c, cert = CASES[1]
    x, y, _ = local_pair(c, "stable", 5, 1)
    h = stable_holonomy(c, x, y, cert)
    expected = c.evaluate(y).inv @ c.evaluate(x)
    assert close(h.operator, expected, 1e-14)
    assert h.iterations_used == 1 and h.error_bound == 0.0


def test_requires_certificate(e2):
    x = e2.shift.periodic((1,)).point
    with pytest.raises(NoCertificate):
        stable_holonomy(e2, x, x, None)
    with pytest.raises(NoCertificate):
        unstable_holonomy(e2, x, x, BunchingCertificate(1.2, 1.0, 1, -0.1))


def test_not_on_leaf(e2):
    cert = find_uniform_N(e2)
    x, y = e2.shift.periodic((1,)), e2.shift.periodic((2,))
    with pytest.raises(NotOnLeaf):
        stable_holonomy(e2, x, y, cert)
    with pytest.raises(NotOnLeaf):
        unstable_holonomy(e2, x, y, cert)


def test_iteration_cap(monkeypatch):
    c, cert = CASES[3]
    x, y, _ = local_pair(c, "stable", 11, 1)
    monkeypatch.setattr(holonomy, "MAX_ITERATIONS", 1)
    with pytest.raises(HolonomyDiverged):
        stable_holonomy(c, x, y, cert)


@given(case_idx, kinds, seeds, st.integers(1, 12))
def test_exactness_local(i, kind, seed, n):
    c, cert = CASES[i]
    x, y, _ = local_pair(c, kind, seed, n)
    h = hol(c, cert, x, y, kind)
    if kind == "stable":
        oracle = c.iterate(y, c.r).inv @ c.iterate(x, c.r)
    else:
        oracle = c.iterate(y, -c.r).inv @ c.iterate(x, -c.r)
    assert close(h.operator, oracle)
    assert h.error_bound == 0.0


@given(case_idx, seeds, seeds, st.integers(0, 6))
def test_non_local_stable_matches_closed_form(i, s1, s2, cut):
    c, cert = CASES[i]
    rng = np.random.default_rng(s1)
    x = c.shift.random_point(rng)
    z = c.shift.random_point(np.random.default_rng(s2))
    if not c.shift.allows(z[cut - 1], x[cut]):
        return
    y = splice(z, x, cut)
    assert close(stable_holonomy(c, x, y, cert).operator, finite_product(c, x, y, "stable"))
    w = splice(x, z, -cut) if c.shift.allows(x[-cut - 1], z[-cut]) else None
    if w is not None:
        assert close(unstable_holonomy(c, x, w, cert).operator, finite_product(c, x, w, "unstable"))


@given(case_idx, kinds, seeds, st.integers(1, 8), st.integers(1, 8))
def test_h2(i, kind, seed, n, m):
    c, cert = CASES[i]
    x, y, rng = local_pair(c, kind, seed, n)
    z = perturb_past(x, m, rng) if kind == "stable" else perturb_future(x, m, rng)
    if z is None:
        return
    hxy, hyz, hxz = hol(c, cert, x, y, kind), hol(c, cert, y, z, kind), hol(c, cert, x, z, kind)
    assert close(hyz.operator @ hxy.operator, hxz.operator)
    assert close(hxy.operator.inv, hol(c, cert, y, x, kind).operator)


@given(case_idx, kinds, seeds, st.integers(1, 8), st.integers(1, 10))
def test_h3(i, kind, seed, n, k):
    c, cert = CASES[i]
    x, y, _ = local_pair(c, kind, seed, n)
    h = hol(c, cert, x, y, kind).operator
    s = k if kind == "stable" else -k
    pushed = hol(c, cert, x.shift(s), y.shift(s), kind).operator
    assert close(h, c.iterate(y, s).inv @ pushed @ c.iterate(x, s))


@pytest.mark.parametrize("i", range(len(CASES)))
def test_report_h4_uniform(i):
    c, cert = CASES[i]
    rep = verify_holonomies(c, cert, np.random.default_rng(i), pairs=80)
    assert rep.passed
    assert rep.h4_far <= rep.h4_near
    assert rep.h4_constant == max(rep.h4_near, rep.h4_far)
