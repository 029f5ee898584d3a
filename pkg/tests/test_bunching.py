import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import SPECS
from fiberbunch import examples
from fiberbunch.bunching import (
    BunchingCertificate,
    PremiseViolation,
    Undetermined,
    direct_check,
    find_uniform_N,
    max_gap,
    periodic_premise_check,
    transfer_bound,
)
from fiberbunch.cocycle import CocycleInstance, symbol_generator


def brute_max_gap(c, n):
    """Every admissible word, products formed one factor at a time."""
    best = -math.inf
    for w in c.shift.words(n + 2 * c.r):
        p = np.eye(c.dim)
        for j in range(n):
            p = c.generator.table[tuple(int(s) for s in w[j: j + 2 * c.r + 1])].entries @ p
        q = np.linalg.norm(p, 2) * np.linalg.norm(np.linalg.inv(p), 2)
        best = max(best, math.log(q) + n * c.beta * math.log(c.shift.nu))
    return best


def test_e2_certificate(e2):
    cert = find_uniform_N(e2)
    margin = math.log(2) - 0.2
    assert cert.N == 1
    assert cert.margin == pytest.approx(margin, abs=1e-12)
    assert cert.theta == pytest.approx(math.exp(-margin), rel=1e-12)
    assert cert.L == pytest.approx(1 / cert.theta, rel=1e-12)


def test_identity_certificate():
    cert = find_uniform_N(examples.identity())
    assert cert.theta == pytest.approx(0.5) and cert.L == pytest.approx(2.0)


def test_strong_diagonal_undetermined_and_violation():
    sd = examples.strong_diagonal()
    with pytest.raises(Undetermined) as info:
        find_uniform_N(sd, 20)
    assert info.value.witness_word == "1" * 20
    with pytest.raises(PremiseViolation) as v:
        periodic_premise_check(sd)
    assert v.value.orbit.word == (1,)
    assert v.value.rate == pytest.approx(math.log(2), abs=1e-12)


def test_direct_check_e2(e2):
    rep = direct_check(e2, find_uniform_N(e2), 14)
    assert rep.passed and rep.words_checked == 2 ** 15 - 2


def test_direct_check_catches_bad_certificate(e2):
    bad = BunchingCertificate(theta=0.5, L=1.0, N=1, margin=0.0)
    rep = direct_check(e2, bad, 5)
    assert not rep.passed and rep.violation is not None


@pytest.mark.parametrize("which,n", [("e2", 3), ("e3", 2), ("r1", 3), ("three", 2)])
def test_max_gap_matches_brute_force(which, n):
    c = {"e2": examples.e2(), "e3": examples.e3(),
         "r1": examples.near_identity(SPECS["golden"], 1, 0.3, 5),
         "three": examples.near_identity(SPECS["three"], 1, 0.4, 6)}[which]
    upper = {0: 0.0}
    for m in range(1, n + 1):
        upper[m], _ = max_gap(c, m, upper)
        assert upper[m] == pytest.approx(brute_max_gap(c, m), abs=1e-12)


@settings(max_examples=25)
@given(st.integers(0, 2 ** 31), st.floats(0.05, 0.6))
def test_certificate_bounds_every_word(seed, scale):
    c = examples.near_identity(SPECS["full2"], 1, scale, seed)
    try:
        cert = find_uniform_N(c, 8)
    except Undetermined:
        return
    assert cert.theta < 1
    assert direct_check(c, cert, 8).passed


def test_e3_certifies_and_passes(e3):
    cert = find_uniform_N(e3)
    assert cert.N == 1
    assert direct_check(e3, cert, 6).passed


def test_premise_e2(e2):
    rep = periodic_premise_check(e2, 10)
    assert rep.status == "evidence" and rep.evidence_only
    assert rep.theta_tilde == pytest.approx(math.exp(0.2 - math.log(2)), rel=1e-5)
    assert rep.L_tilde == 1.0


def test_premise_inconclusive_for_shear(full2):
    # spectral radii are 1, so no violation, yet Q(1^k) grows like k^2
    c = CocycleInstance(full2, symbol_generator(full2, {1: [[1.0, 1.0], [0.0, 1.0]], 2: np.eye(2)}, beta=0.05))
    rep = periodic_premise_check(c, 6)
    assert rep.status == "inconclusive"
    assert rep.theta_tilde >= 1


def test_transfer_bound(e2):
    cert = find_uniform_N(e2)
    b = transfer_bound(cert, 1.5)
    assert b(3) == pytest.approx(2.25 * cert.L * cert.theta ** 3)
    with pytest.raises(ValueError):
        transfer_bound(cert, 0.5)
