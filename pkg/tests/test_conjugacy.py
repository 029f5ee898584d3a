import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import SPECS
from fiberbunch import examples
from fiberbunch.cocycle import CocycleInstance, make_coboundary, symbol_generator
from fiberbunch.conjugacy import (
    FailureWitness,
    PeriodicScan,
    evaluate_extended,
    scan_periodic_data,
    solve_periodic_conjugacy,
    step_relation_points,
    synth_homoclinic,
    verify_cohomology,
    verify_step_relation,
)
from fiberbunch.errors import BudgetExceeded, DefectExceeded, NoCertificate, NotConjugate
from fiberbunch.linops import InvertibleOperator
from fiberbunch.shift_space import in_stable_set, in_unstable_set, perturb_past

IO = InvertibleOperator


def transfer_at(t, x):
    r = t.window_radius
    return t.table[x.window(-r, r)]


@pytest.fixture(scope="module")
def e3_pair():
    spec = SPECS["full2"]
    return examples.e3(spec), examples.e2(spec), examples.e3_transfer(spec)


@pytest.fixture(scope="module")
def synthesized(e3_pair):
    a, b, t = e3_pair
    p0 = a.shift.periodic((1,))
    return synth_homoclinic(a, b, p0, transfer_at(t, p0.point), 8)


class TestSolve:
    def test_identity(self):
        assert np.array_equal(solve_periodic_conjugacy(IO.identity(2), IO.identity(2)).entries, np.eye(2))

    def test_swap(self):
        c = solve_periodic_conjugacy(IO.diag(2, 3), IO.diag(3, 2))
        assert np.allclose(c.entries, [[0, 1], [1, 0]])
        assert np.abs(np.diag([3, 2]) - c.entries @ np.diag([2, 3]) @ c.inverse_entries).max() < 1e-10

    def test_distinct_spectra(self):
        with pytest.raises(NotConjugate):
            solve_periodic_conjugacy(IO.diag(2, 3), IO.diag(2, 4))

    @settings(max_examples=40)
    @given(st.integers(0, 2 ** 32 - 1))
    def test_random_similarity(self, seed):
        rng = np.random.default_rng(seed)
        a = rng.normal(size=(3, 3)) + 3 * np.eye(3)
        s = rng.normal(size=(3, 3)) + 2 * np.eye(3)
        if np.linalg.cond(a) > 1e6 or np.linalg.cond(s) > 1e4:
            return
        b = s @ a @ np.linalg.inv(s)
        c = solve_periodic_conjugacy(IO.from_matrix(a), IO.from_matrix(b))
        assert np.abs(b - c.entries @ a @ c.inverse_entries).max() <= 1e-8 * np.abs(b).max()

    def test_jordan_versus_diagonal(self):
        with pytest.raises(NotConjugate):
            solve_periodic_conjugacy(IO.from_matrix([[1, 1], [0, 1]]), IO.identity(2))


class TestScan:
    def test_self_scan(self, e3_pair):
        _, b, _ = e3_pair
        scan = scan_periodic_data(b, b, 5)
        assert isinstance(scan, PeriodicScan)
        assert all(d.equal for d in scan.data) and scan.M == 1.0

    def test_coboundary_scan(self, e3_pair):
        a, b, t = e3_pair
        scan = scan_periodic_data(a, b, 6)
        assert isinstance(scan, PeriodicScan)
        assert len(scan.data) == sum(2 ** k for k in range(1, 7))
        for d in scan.data:
            assert d.residual <= 1e-8
            ak = a.iterate(d.orbit, d.k).entries
            bk = b.iterate(d.orbit, d.k).entries
            # C_p and the generating C(p) differ by an element commuting with B^k_p
            z = np.linalg.inv(transfer_at(t, d.orbit.point).entries) @ d.C_p.entries
            assert np.abs(z @ bk - bk @ z).max() < 1e-8 * np.abs(bk).max()
            assert np.abs(ak - d.C_p.entries @ bk @ d.C_p.inverse_entries).max() < 1e-8 * np.abs(ak).max()
        assert np.isfinite(scan.holder_at_p0)

    def test_negative_control(self, e3_pair):
        _, b, _ = e3_pair
        w = scan_periodic_data(b, examples.strong_diagonal(), 4)
        assert isinstance(w, FailureWitness)
        assert w.k == 1 and w.orbit.word == (1,)


class TestSynthesis:
    def test_identity_pair(self, e3_pair):
        _, b, _ = e3_pair
        sc = synth_homoclinic(b, b, b.shift.periodic((1,)), IO.identity(2), 6)
        for v in sc.values.values():
            assert np.allclose(v.entries, np.eye(2), atol=1e-14)
        assert sc.holder_constant == pytest.approx(0, abs=1e-13)

    def test_recovers_transfer(self, synthesized, e3_pair):
        _, _, t = e3_pair
        assert len(synthesized.values) == 129
        for x, v in synthesized.values.items():
            assert np.abs(v.entries - transfer_at(t, x).entries).max() < 1e-8
        assert synthesized.defect < 1e-8
        assert synthesized.values[synthesized.p0.point] is not None

    def test_value_at_p0(self, synthesized):
        assert np.allclose(synthesized.value(synthesized.p0).entries, synthesized.C_p0.entries)

    def test_scan_choice_recovers_transfer_up_to_centralizer(self, e3_pair):
        a, b, t = e3_pair
        p0 = a.shift.periodic((1,))
        c_scan = scan_periodic_data(a, b, 3).datum(p0).C_p
        sc = synth_homoclinic(a, b, p0, c_scan, 5)
        z = np.linalg.inv(transfer_at(t, p0.point).entries) @ c_scan.entries
        for x, v in sc.values.items():
            assert np.abs(v.entries - transfer_at(t, x).entries @ z).max() < 1e-8

    def test_cohomologous_to_identity(self):
        """B = Id and A = C(f.) C(.)^-1 with C(p0) = Id: the synthesis returns C, not Id."""
        spec = SPECS["full2"]
        t = examples.e3_transfer(spec)
        shifted = {w: t.table[(1,)].inv @ op for w, op in t.table.items()}
        from fiberbunch.cocycle import LocallyConstantGenerator
        c = LocallyConstantGenerator(0, shifted)
        b = examples.identity(spec)
        a = make_coboundary(b, c)
        p0 = spec.periodic((1,))
        sc = synth_homoclinic(a, b, p0, IO.identity(2), 6)
        for x, v in sc.values.items():
            assert np.abs(v.entries - transfer_at(c, x).entries).max() < 1e-8
        p = spec.periodic((2,))
        assert not np.allclose(transfer_at(c, p.point).entries, np.eye(2))
        # periodic point (2)^inf is not homoclinic to p0; reach it through the extension
        v, bound = evaluate_extended(sc, p, 0.5 ** 20)
        assert np.abs(v.entries - transfer_at(c, p.point).entries).max() <= bound + 1e-12

    def test_uniqueness_across_budgets(self, e3_pair, synthesized):
        a, b, _ = e3_pair
        small = synth_homoclinic(a, b, synthesized.p0, synthesized.C_p0, 5)
        for x, v in small.values.items():
            assert np.abs(v.entries - synthesized.values[x].entries).max() < 1e-10

    def test_workers(self, e3_pair, synthesized):
        a, b, _ = e3_pair
        par = synth_homoclinic(a, b, synthesized.p0, synthesized.C_p0, 8, workers=4)
        assert list(par.values) == list(synthesized.values)
        for x in par.values:
            assert np.array_equal(par.values[x].entries, synthesized.values[x].entries)

    def test_defect_detected(self, e3_pair):
        """Equal data at p0 but a different cocycle elsewhere: the two sides disagree."""
        _, b, _ = e3_pair
        spec = b.shift
        e = np.exp(0.1)
        other = CocycleInstance(spec, symbol_generator(spec, {1: np.diag([e, 1 / e]), 2: [[1 / e, 0.2], [0, e]]}))
        with pytest.raises(DefectExceeded) as info:
            synth_homoclinic(b, other, spec.periodic((1,)), IO.identity(2), 4)
        assert info.value.defect > 1e-8 and info.value.point is not None

    def test_wrong_c_p0_rejected(self, e3_pair):
        a, b, _ = e3_pair
        with pytest.raises(NotConjugate):
            synth_homoclinic(a, b, a.shift.periodic((1,)), IO.identity(2), 2)

    def test_no_certificate(self, e3_pair):
        _, b, _ = e3_pair
        sd = examples.strong_diagonal()
        with pytest.raises(NoCertificate):
            synth_homoclinic(sd, sd, sd.shift.periodic((1,)), IO.identity(2), 2)

    def test_holder_propagation(self, synthesized, rng):
        """||C(y) C(x)^-1 - Id|| <= c1 dist^beta: fit on half the points, check on the rest."""
        pts = list(synthesized.values)
        rng.shuffle(pts)
        fit, held = pts[: len(pts) // 2], pts[len(pts) // 2:]

        def ratios(points):
            out = []
            for x in points:
                y = perturb_past(x, int(rng.integers(1, 6)), rng)
                if y is None or not in_stable_set(y, synthesized.p0):
                    continue
                if not in_unstable_set(y, synthesized.p0):
                    continue
                d = 0.5 ** min(abs(i) for i in range(-20, 21) if x[i] != y[i])
                g = synthesized.value(y) @ synthesized.value(x).inv
                out.append(np.linalg.norm(g.entries - np.eye(2), 2) / d)
            return out

        c1 = max(ratios(fit), default=0.0)
        assert all(r <= c1 * (1 + 1e-9) + 1e-12 for r in ratios(held))


class TestExtension:
    def test_stored_point(self, synthesized):
        x = next(iter(list(synthesized.values)[5:]))
        v, bound = evaluate_extended(synthesized, x, 1e-3)
        assert v is synthesized.values[x] and bound == 0.0

    def test_periodic_point(self, synthesized, e3_pair):
        _, _, t = e3_pair
        x = SPECS["full2"].periodic((1, 2))
        v, bound = evaluate_extended(synthesized, x, 0.5 ** 30)
        assert bound == pytest.approx(synthesized.holder_constant * 0.5 ** 30)
        assert np.abs(v.entries - transfer_at(t, x.point).entries).max() <= bound + 1e-12

    def test_budget(self, synthesized):
        with pytest.raises(BudgetExceeded):
            evaluate_extended(synthesized, SPECS["full2"].periodic((1, 2)), 0.5 ** 200)


class TestVerification:
    def test_identity_residual_zero(self, e3_pair):
        i2 = examples.identity(e3_pair[1].shift)
        sc = synth_homoclinic(i2, i2, i2.shift.periodic((1,)), IO.identity(2), 5)
        assert verify_cohomology(i2, i2, sc, 20, 5).max_residual == 0.0

    def test_self_pair_residual_rounding_only(self, e3_pair):
        _, b, _ = e3_pair
        sc = synth_homoclinic(b, b, b.shift.periodic((1,)), IO.identity(2), 5)
        rep = verify_cohomology(b, b, sc, 20, 5)
        assert rep.passed and rep.max_residual < 1e-14

    def test_e3_cohomology(self, e3_pair, synthesized):
        a, b, _ = e3_pair
        rep = verify_cohomology(a, b, synthesized, 40, 10)
        assert rep.passed and rep.max_residual < 1e-8

    def test_negative_control(self, e3_pair):
        _, b, _ = e3_pair
        sc = synth_homoclinic(b, b, b.shift.periodic((1,)), IO.identity(2), 4)
        rep = verify_cohomology(b, examples.strong_diagonal(), sc, 10, 2)
        assert not rep.passed and rep.max_residual > 0.1

    def test_step_relation_period_two(self, e3_pair):
        a, b, t = e3_pair
        p0 = a.shift.periodic((1, 2))
        sc = synth_homoclinic(a, b, p0, transfer_at(t, p0.point), 6)
        pts = step_relation_points(sc, 10, np.random.default_rng(0))
        for x in pts:
            assert in_stable_set(x, p0) and in_unstable_set(x, p0.shift(1))
        rep = verify_step_relation(a, b, sc, 50)
        assert rep.passed and rep.max_residual < 1e-8

    def test_step_relation_fixed_point_matches_cohomology(self, e3_pair, synthesized):
        a, b, _ = e3_pair
        pts = step_relation_points(synthesized, 5, np.random.default_rng(1))
        step = verify_step_relation(a, b, synthesized, pts)
        coh = verify_cohomology(a, b, synthesized, pts, 0)
        assert step.max_residual < 1e-12 and coh.max_residual < 1e-12

    def test_identity_step_relation(self, e3_pair):
        _, b, _ = e3_pair
        i2 = examples.identity(b.shift)
        sc = synth_homoclinic(i2, i2, i2.shift.periodic((1, 2)), IO.identity(2), 4)
        assert verify_step_relation(i2, i2, sc, 10).max_residual == 0.0
