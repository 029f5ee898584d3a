"""Conjugacies between cocycles built from periodic data and holonomies.

Orientation: a transfer map ``C`` relates the cocycles by
``A^n_x = C(f^n x) B^n_x C(x)^-1``, so at a point of period ``k`` the
periodic data satisfy ``A^k_p = C(p) B^k_p C(p)^-1``.

Given ``C(p0)``, the conjugacy on a homoclinic point ``x`` of ``p0`` is

    C(x) = H^{A,s}_{p0,x} C(p0) H^{B,s}_{x,p0}

and the same expression with unstable holonomies must give the same value.
Replacing ``B`` by ``C(p0) B C(p0)^-1`` (so the data at ``p0`` are equal)
leads to exactly this formula after undoing the substitution.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bunching import BunchingCertificate, Undetermined, find_uniform_N, orbit_products
from .cocycle import CocycleInstance
from .errors import (
    BudgetExceeded,
    DefectExceeded,
    DimensionMismatch,
    NoCertificate,
    NotConjugate,
    NotOnLeaf,
)
from .holonomy import stable_holonomy, unstable_holonomy
from .linops import InvertibleOperator, metric_d
from .shift_space import (
    PeriodicOrbitPoint,
    SymbolicPoint,
    _as_point,
    _rotate,
    distance,
    enumerate_homoclinic,
    enumerate_periodic,
    in_stable_set,
    in_unstable_set,
)

NULL_RTOL = 1e-9
MAX_CANDIDATE_COND = 1e8
SOLVE_RTOL = 1e-10
EQUAL_RTOL = 1e-12
DATUM_RTOL = 1e-8


def _residual(ak: np.ndarray, bk: np.ndarray, c: InvertibleOperator) -> float:
    """``||Bk - C Ak C^-1||`` relative to ``||Bk||``."""
    diff = bk - c.entries @ ak @ c.inverse_entries
    return float(np.linalg.norm(diff, 2) / max(np.linalg.norm(bk, 2), 1e-300))


def solve_periodic_conjugacy(Ak: InvertibleOperator, Bk: InvertibleOperator,
                             seed: int = 0, attempts: int = 64) -> InvertibleOperator:
    """An invertible ``C`` with ``Bk = C Ak C^-1``.

    The intertwiners ``Bk X = X Ak`` form the null space of
    ``Bk (x) I - I (x) Ak^T`` acting on row-major ``vec(X)``.  Candidates are
    tried in a fixed order: the identity, the sum of the basis, then seeded
    random combinations.
    """
    if Ak.dim != Bk.dim:
        raise DimensionMismatch(f"dimensions {Ak.dim} and {Bk.dim} differ")
    d = Ak.dim
    a, b = Ak.entries, Bk.entries
    eye = InvertibleOperator.identity(d)
    if _residual(a, b, eye) <= SOLVE_RTOL:
        return eye
    system = np.kron(b, np.eye(d)) - np.kron(np.eye(d), a.T)
    _, s, vt = np.linalg.svd(system)
    cutoff = NULL_RTOL * max(s[0], 1.0)
    basis = vt[s <= cutoff].reshape(-1, d, d)
    if len(basis) == 0:
        raise NotConjugate("the intertwining space is trivial")
    rng = np.random.default_rng(seed)
    candidates = [basis.sum(axis=0)]
    candidates += [np.tensordot(rng.standard_normal(len(basis)), basis, axes=1) for _ in range(attempts)]
    for cand in candidates:
        sv = np.linalg.svd(cand, compute_uv=False)
        if sv[-1] == 0 or sv[0] / sv[-1] > MAX_CANDIDATE_COND:
            continue
        op = InvertibleOperator(cand, np.linalg.solve(cand, np.eye(d)))
        if _residual(a, b, op) <= SOLVE_RTOL:
            return op
    raise NotConjugate("no invertible intertwiner found")


@dataclass(frozen=True)
class PeriodicConjugacyDatum:
    """``A^k_p = C_p B^k_p C_p^-1`` at one periodic point."""

    orbit: PeriodicOrbitPoint
    k: int
    C_p: InvertibleOperator
    bound_check: float
    equal: bool
    residual: float


@dataclass(frozen=True)
class FailureWitness:
    orbit: PeriodicOrbitPoint
    k: int
    reason: str

    def to_dict(self) -> dict:
        return {"orbit": str(self.orbit), "period": self.k, "reason": self.reason}


@dataclass
class PeriodicScan:
    data: list[PeriodicConjugacyDatum]
    M: float
    p0: PeriodicOrbitPoint
    holder_at_p0: float

    def datum(self, orbit: PeriodicOrbitPoint) -> PeriodicConjugacyDatum:
        for d in self.data:
            if d.orbit == orbit:
                return d
        raise KeyError(str(orbit))

    def to_dict(self) -> dict:
        return {"orbits": len(self.data), "M": self.M, "p0": str(self.p0),
                "holder_at_p0": self.holder_at_p0,
                "max_residual": max((d.residual for d in self.data), default=0.0)}


def _check_pair(A: CocycleInstance, B: CocycleInstance) -> None:
    if A.shift != B.shift:
        raise ValueError("cocycles live over different shifts")
    if A.dim != B.dim:
        raise DimensionMismatch(f"cocycle dimensions {A.dim} and {B.dim} differ")


def scan_periodic_data(A: CocycleInstance, B: CocycleInstance, K: int,
                       p0: PeriodicOrbitPoint | None = None) -> PeriodicScan | FailureWitness:
    """Compare ``A^k_p`` and ``B^k_p`` on every periodic point of period ``<= K``.

    Besides ``M = max(||C_p||, ||C_p^-1||)`` the scan reports the ratio
    ``max_p d(C_p, C_p0) / dist(p, p0)^beta``.  It is only a diagnostic:
    each ``C_p`` is one choice among many, and finitely many orbits say
    nothing about the full Hölder hypothesis.
    """
    _check_pair(A, B)
    data = []
    for k in range(1, K + 1):
        orbits = enumerate_periodic(A.shift, k)
        pa, pa_inv = orbit_products(A, orbits)
        pb, pb_inv = orbit_products(B, orbits)
        for o, a, ai, b, bi in zip(orbits, pa, pa_inv, pb, pb_inv):
            if np.linalg.norm(a - b, 2) <= EQUAL_RTOL * np.linalg.norm(a, 2):
                c, equal = InvertibleOperator.identity(A.dim), True
            else:
                try:
                    c = solve_periodic_conjugacy(InvertibleOperator(b, bi), InvertibleOperator(a, ai))
                except NotConjugate as exc:
                    return FailureWitness(o, k, str(exc))
                equal = False
            resid = _residual(b, a, c)
            bound = max(A.norm(c.entries), A.norm(c.inverse_entries))
            data.append(PeriodicConjugacyDatum(o, k, c, bound, equal, resid))
    if p0 is None:
        p0 = data[0].orbit
    ref = next(d.C_p for d in data if d.orbit == p0) if any(d.orbit == p0 for d in data) else None
    holder = 0.0
    if ref is not None:
        for d in data:
            dist = distance(d.orbit, p0)
            if dist > 0:
                holder = max(holder, metric_d(d.C_p, ref, A.norm) / dist ** A.beta)
    else:
        holder = math.nan
    return PeriodicScan(data, max(d.bound_check for d in data), p0, holder)


# -- synthesis -----------------------------------------------------------------


def _certify(c: CocycleInstance, cert: BunchingCertificate | None, name: str) -> BunchingCertificate:
    if cert is not None:
        return cert
    try:
        return find_uniform_N(c)
    except Undetermined as exc:
        raise NoCertificate(f"cocycle {name} is not certified fiber bunched: {exc}") from exc


@dataclass(eq=False)
class SynthesizedConjugacy:
    A: CocycleInstance
    B: CocycleInstance
    p0: PeriodicOrbitPoint
    C_p0: InvertibleOperator
    cert_A: BunchingCertificate
    cert_B: BunchingCertificate
    budget: int
    values: dict[SymbolicPoint, InvertibleOperator] = field(default_factory=dict)
    defects: dict[SymbolicPoint, float] = field(default_factory=dict)
    holder_constant: float = 0.0
    defect: float = 0.0
    extension_budget: int = 128
    tol: float = 1e-8

    def stable_value(self, x) -> InvertibleOperator:
        """``H^{A,s}_{p0,x} C(p0) H^{B,s}_{x,p0}`` for ``x`` in the stable set of ``p0``."""
        x = _as_point(x)
        p = self.p0.point
        ha = stable_holonomy(self.A, p, x, self.cert_A).operator
        hb = stable_holonomy(self.B, x, p, self.cert_B).operator
        return ha @ self.C_p0 @ hb

    def unstable_value(self, x) -> InvertibleOperator:
        x = _as_point(x)
        p = self.p0.point
        ha = unstable_holonomy(self.A, p, x, self.cert_A).operator
        hb = unstable_holonomy(self.B, x, p, self.cert_B).operator
        return ha @ self.C_p0 @ hb

    def value(self, x) -> InvertibleOperator:
        """The conjugacy at a homoclinic point of ``p0`` (stored or computed)."""
        x = _as_point(x)
        if x in self.values:
            return self.values[x]
        if x == self.p0.point:
            return self.C_p0
        if not (in_stable_set(x, self.p0) and in_unstable_set(x, self.p0)):
            raise NotOnLeaf(f"{x} is not homoclinic to {self.p0}")
        return self.stable_value(x)

    def to_dict(self) -> dict:
        return {"p0": str(self.p0), "C_p0": self.C_p0.entries.tolist(),
                "entries": [[str(x), op.entries.tolist()] for x, op in self.values.items()],
                "holder_constant": self.holder_constant, "defect": self.defect}


def _pairwise_holder(points: list[SymbolicPoint], ops: list[InvertibleOperator], budget: int,
                     beta: float, nu: float, norm) -> float:
    """``max d(C(x), C(y)) / dist(x, y)^beta`` over stored pairs.

    Stored points agree with each other outside ``[0, budget - 1]``, so the
    separation is the first index in that window where they differ.
    """
    if len(points) < 2:
        return 0.0
    words = np.array([x.window_array(0, max(budget, 1) - 1) for x in points])
    mats = np.array([op.entries for op in ops])
    invs = np.array([op.inverse_entries for op in ops])
    best = 0.0
    for i in range(len(points) - 1):
        diff = words[i + 1:] != words[i]
        n = np.argmax(diff, axis=1)
        dist = nu ** n.astype(float)
        d = norm.batch(mats[i + 1:] - mats[i]) + norm.batch(invs[i + 1:] - invs[i])
        best = max(best, float(np.max(d / dist ** beta)))
    return best


def synth_homoclinic(A: CocycleInstance, B: CocycleInstance, p0: PeriodicOrbitPoint,
                     C_p0: InvertibleOperator, budget: int, tol: float = 1e-8,
                     cert_A: BunchingCertificate | None = None,
                     cert_B: BunchingCertificate | None = None,
                     workers: int = 1, extension_budget: int = 128) -> SynthesizedConjugacy:
    """Build the conjugacy on every homoclinic point of ``p0`` within ``budget``.

    ``C_p0`` must satisfy ``A^k_{p0} = C_p0 B^k_{p0} C_p0^-1``.  For each
    point the stable and unstable constructions are compared and
    ``DefectExceeded`` is raised when they differ by more than ``tol``.
    """
    _check_pair(A, B)
    cert_A = _certify(A, cert_A, "A")
    cert_B = _certify(B, cert_B, "B")
    ak, _ = orbit_products(A, [p0])
    bk, _ = orbit_products(B, [p0])
    resid = _residual(bk[0], ak[0], C_p0)
    if resid > DATUM_RTOL:
        raise NotConjugate(f"C_p0 does not conjugate the data at {p0} (residual {resid:.3g})")
    sc = SynthesizedConjugacy(A, B, p0, C_p0, cert_A, cert_B, budget,
                              extension_budget=extension_budget, tol=tol)
    points = enumerate_homoclinic(p0, budget)

    def one(x):
        s, u = sc.stable_value(x), sc.unstable_value(x)
        return s, A.norm(s.entries - u.entries)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            rows = list(pool.map(one, points))
    else:
        rows = [one(x) for x in points]
    for x, (s, gap) in zip(points, rows):
        if gap > tol:
            raise DefectExceeded(f"stable and unstable values differ by {gap:.3g} at {x}", x, gap)
        sc.values[x] = s
        sc.defects[x] = gap
    sc.defect = max(sc.defects.values())
    sc.holder_constant = _pairwise_holder(points, [sc.values[x] for x in points], budget,
                                          A.beta, A.shift.nu, A.norm)
    return sc


def splice_to_p0(sc: SynthesizedConjugacy, x, m: int) -> SymbolicPoint:
    """Homoclinic point equal to ``x`` on ``[-m, m]`` and to ``p0`` far away."""
    x = _as_point(x)
    spec = sc.A.shift
    w = sc.p0.word
    gap = spec.mixing_power - 1
    lo, hi = -m - gap, m + gap
    head = spec.connector(w[(lo - 1) % len(w)], x[-m], gap)
    tail = spec.connector(x[m], w[(hi + 1) % len(w)], gap)
    core = tuple(head) + x.window(-m, m) + tuple(tail)
    return spec.point(_rotate(w, lo), core, _rotate(w, hi + 1), lo)


def evaluate_extended(sc: SynthesizedConjugacy, x, delta: float) -> tuple[InvertibleOperator, float]:
    """Value at an arbitrary point through a homoclinic point within ``delta``.

    Returns the value and the bound ``holder_constant * delta^beta``; the
    bound is zero when ``x`` itself is homoclinic to ``p0``.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    x = _as_point(x)
    if x in sc.values or x == sc.p0.point:
        return sc.value(x), 0.0
    if in_stable_set(x, sc.p0) and in_unstable_set(x, sc.p0):
        return sc.value(x), 0.0
    nu = sc.A.shift.nu
    m = max(0, math.ceil(math.log(delta) / math.log(nu)) - 1)
    length = 2 * m + 1 + 2 * (sc.A.shift.mixing_power - 1)
    if length > sc.extension_budget:
        raise BudgetExceeded(f"splice core of length {length} exceeds the extension budget "
                             f"{sc.extension_budget}")
    near = splice_to_p0(sc, x, m)
    return sc.value(near), sc.holder_constant * delta ** sc.A.beta


@dataclass
class VerificationReport:
    name: str
    max_residual: float
    tolerance: float
    samples: int
    witness: str | None = None

    @property
    def passed(self) -> bool:
        return self.max_residual < self.tolerance

    def to_dict(self) -> dict:
        return {"name": self.name, "status": "pass" if self.passed else "fail",
                "max_residual": self.max_residual, "tolerance": self.tolerance,
                "samples": self.samples, "witness": self.witness}


def _relative(a: InvertibleOperator, b: InvertibleOperator, norm) -> float:
    return norm(a.entries - b.entries) / norm(a.entries)


def _pick(sc: SynthesizedConjugacy, samples, rng) -> list[SymbolicPoint]:
    if not isinstance(samples, int):
        return [_as_point(s) for s in samples]
    pool = list(sc.values)
    if samples >= len(pool):
        return pool
    idx = np.sort(rng.choice(len(pool), size=samples, replace=False))
    return [pool[i] for i in idx]


def verify_cohomology(A: CocycleInstance, B: CocycleInstance, sc: SynthesizedConjugacy,
                      samples=100, n_max: int = 10, tol: float = 1e-8, seed: int = 0) -> VerificationReport:
    """``max ||A^n_x - C(f^n x) B^n_x C(x)^-1|| / ||A^n_x||`` over samples and ``|n| <= n_max``."""
    rng = np.random.default_rng(seed)
    points = _pick(sc, samples, rng)
    worst, witness = 0.0, None
    for x in points:
        cx = sc.value(x)
        for n in range(-n_max, n_max + 1):
            rhs = sc.value(x.shift(n)) @ B.iterate(x, n) @ cx.inv
            r = _relative(A.iterate(x, n), rhs, A.norm)
            if r > worst:
                worst, witness = r, f"{x} n={n}"
    return VerificationReport("cohomology", worst, tol, len(points), witness)


def step_relation_points(sc: SynthesizedConjugacy, count: int, rng: np.random.Generator,
                         core_length: int = 6) -> list[SymbolicPoint]:
    """Random points in ``W^s(p0)`` and ``W^u(f^(k-1) p0)``."""
    spec = sc.A.shift
    w, k = sc.p0.word, sc.p0.period
    gap = spec.mixing_power - 1
    past = _rotate(w, k - 1)  # word of f^(k-1) p0
    out = []
    while len(out) < count:
        core = [past[-1]]
        for _ in range(core_length):
            succ = [t for t in spec.symbols if spec.allows(core[-1], t)]
            core.append(succ[int(rng.integers(len(succ)))])
        core = core[1:]
        head = spec.connector(past[-1], core[0], gap, rng)
        body = tuple(head) + tuple(core)
        tail = spec.connector(body[-1], w[(len(body) + gap) % k], gap, rng)
        body = body + tuple(tail)
        out.append(spec.point(past, body, _rotate(w, len(body)), 0))
    return out


def verify_step_relation(A: CocycleInstance, B: CocycleInstance, sc: SynthesizedConjugacy,
                         samples=50, delta: float | None = None, tol: float = 1e-8,
                         seed: int = 0) -> VerificationReport:
    """``max ||A_x - C(fx) B_x C(x)^-1|| / ||A_x||`` on ``W^s(p0) & W^u(f^(k-1) p0)``."""
    rng = np.random.default_rng(seed)
    if delta is None:
        delta = A.shift.nu ** 30
    points = step_relation_points(sc, samples, rng) if isinstance(samples, int) else \
        [_as_point(s) for s in samples]
    worst, witness = 0.0, None
    for x in points:
        cx, _ = evaluate_extended(sc, x, delta)
        cfx, _ = evaluate_extended(sc, x.shift(1), delta)
        r = _relative(A.evaluate(x), cfx @ B.evaluate(x) @ cx.inv, A.norm)
        if r > worst:
            worst, witness = r, str(x)
    return VerificationReport("step_relation", worst, tol, len(points), witness)
