"""Fiber bunching certificates.

For a locally constant generator of radius ``r`` the bunching gap
``a_n(x) = log Q(x, n) + n beta log nu`` depends only on the word
``x[-r .. n - 1 + r]``, so suprema over the shift are finite maxima over
admissible words.  ``find_uniform_N`` computes those maxima exactly with a
branch and bound that uses subadditivity, ``a_n <= a_m + a_{n-m} o f^m``,
to discard prefixes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .cocycle import CocycleInstance
from .errors import FiberBunchError
from .shift_space import PeriodicOrbitPoint, _fmt, enumerate_periodic

VERIFY_RTOL = 1e-12


@dataclass(frozen=True)
class BunchingCertificate:
    """``Q(x, n) * nu^(n beta) < L * theta^n`` for all ``x`` and ``n >= 1``."""

    theta: float
    L: float
    N: int
    margin: float
    mode: str = "direct"
    witness_word: str | None = None

    def bound(self, n: int) -> float:
        return self.L * self.theta ** n

    def to_dict(self) -> dict:
        return {"mode": self.mode, "theta": self.theta, "L": self.L, "N": self.N,
                "margin": self.margin, "witness_word": self.witness_word}


class Undetermined(FiberBunchError):
    """No ``N <= N_max`` has ``max_x a_N(x) < 0``."""

    def __init__(self, N_max: int, max_gap: float, witness_word: str):
        super().__init__(f"no N <= {N_max} certifies bunching; max a_{N_max} = {max_gap:.6g} "
                         f"attained on word {witness_word}")
        self.N_max = N_max
        self.max_gap = max_gap
        self.witness_word = witness_word


class PremiseViolation(FiberBunchError):
    """A periodic orbit whose distortion can never be dominated."""

    def __init__(self, orbit: PeriodicOrbitPoint, rate: float):
        super().__init__(f"orbit {orbit} of period {orbit.period} has asymptotic bunching rate "
                         f"{rate:.6g} >= 0")
        self.orbit = orbit
        self.rate = rate


def _gaps(c: CocycleInstance, p: np.ndarray, pinv: np.ndarray, n: int) -> np.ndarray:
    q = c.norm.batch(p) * c.norm.batch(pinv)
    return np.log(q) + n * c.beta * math.log(c.shift.nu)


def _extend(c: CocycleInstance, words, p, pinv, apply: bool):
    """Append every admissible symbol to every word, keeping lexicographic order."""
    k = c.shift.alphabet_size
    adj = c.shift.matrix
    if words.shape[1] == 0:
        parent = np.zeros(k, dtype=np.int64)
        sym = np.arange(1, k + 1)
    else:
        ok = adj[words[:, -1] - 1] == 1
        parent, col = np.nonzero(ok)
        sym = col + 1
    children = np.column_stack([words[parent], sym])
    cp, cpinv = p[parent], pinv[parent]
    if apply:
        width = 2 * c.r + 1
        mats, invs = c.factor_arrays(children[:, -width:])
        cp = mats[:, 0] @ cp
        cpinv = cpinv @ invs[:, 0]
    return children, cp, cpinv


def _roots(c: CocycleInstance):
    words = c.shift.words(2 * c.r)
    eye = np.broadcast_to(np.eye(c.dim), (len(words), c.dim, c.dim)).copy()
    return words, eye, eye.copy()


def _lower_bound(c: CocycleInstance, n: int, seeds: list[tuple[int, ...]]) -> float:
    """Cheap lower bound for ``max a_n`` from periodic words and extended seeds."""
    cands = []
    for k in range(1, min(n, 4) + 1):
        for orbit in enumerate_periodic(c.shift, k):
            w = orbit.word
            cands.append(tuple(w[i % k] for i in range(-c.r, n + c.r)))
    for s in seeds:
        for t in c.shift.symbols:
            if c.shift.allows(s[-1], t):
                cands.append(s + (t,))
    cands = [w for w in cands if len(w) == n + 2 * c.r]
    if not cands:
        return -math.inf
    arr = np.array(cands, dtype=np.int64)
    p, pinv = c.word_products(arr)
    return float(np.max(_gaps(c, p, pinv, n)))


def max_gap(c: CocycleInstance, n: int, upper: dict[int, float], seeds=()) -> tuple[float, tuple[int, ...]]:
    """Exact ``max_x a_n(x)`` and a maximizing word.

    ``upper[j]`` must bound ``max a_j`` from above for ``1 <= j < n``.
    """
    best = _lower_bound(c, n, list(seeds))
    words, p, pinv = _roots(c)
    for m in range(1, n + 1):
        words, p, pinv = _extend(c, words, p, pinv, apply=True)
        gaps = _gaps(c, p, pinv, m)
        if m == n:
            i = int(np.argmax(gaps))
            return float(gaps[i]), tuple(int(s) for s in words[i])
        # slack keeps exact ties that rounding would otherwise cut
        keep = gaps + upper[n - m] >= best - 1e-9
        words, p, pinv = words[keep], p[keep], pinv[keep]
    raise AssertionError("unreachable")


def find_uniform_N(c: CocycleInstance, N_max: int = 20) -> BunchingCertificate:
    """Smallest ``N <= N_max`` with ``max_x a_N(x) < 0`` and the resulting certificate.

    ``theta = exp(max a_N / N)`` and
    ``L = max_{0 <= j < N} max_x Q(x, j) nu^(j beta) / theta^N``.
    """
    upper: dict[int, float] = {0: 0.0}
    seeds: list[tuple[int, ...]] = []
    for n in range(1, N_max + 1):
        value, word = max_gap(c, n, upper, seeds)
        upper[n] = value
        seeds = [word]
        if value < 0:
            theta = math.exp(value / n)
            L = max(math.exp(upper[j]) for j in range(n)) / theta ** n
            return BunchingCertificate(theta, L, n, -value, "direct", _fmt(word))
    raise Undetermined(N_max, upper[N_max], _fmt(word))


@dataclass
class DirectCheckReport:
    passed: bool
    horizon: int
    words_checked: int
    worst_ratio: float
    violation: tuple[str, int] | None = None

    def to_dict(self) -> dict:
        return {"passed": self.passed, "horizon": self.horizon, "words_checked": self.words_checked,
                "worst_ratio": self.worst_ratio,
                "violation": None if self.violation is None
                else {"word": self.violation[0], "n": self.violation[1]}}


def direct_check(c: CocycleInstance, cert: BunchingCertificate, horizon: int) -> DirectCheckReport:
    """Exhaustively test ``Q(x, n) nu^(n beta) <= L theta^n`` for ``n <= horizon``.

    Ratios are compared against ``1 + 1e-12`` so that rounding in the last
    bit is not reported as a violation.
    """
    words, p, pinv = _roots(c)
    checked = 0
    worst = 0.0
    for n in range(1, horizon + 1):
        words, p, pinv = _extend(c, words, p, pinv, apply=True)
        gaps = _gaps(c, p, pinv, n)
        ratio = np.exp(gaps - math.log(cert.L) - n * math.log(cert.theta))
        checked += len(words)
        worst = max(worst, float(ratio.max()))
        bad = np.nonzero(ratio > 1 + VERIFY_RTOL)[0]
        if len(bad):
            return DirectCheckReport(False, horizon, checked, worst, (_fmt(words[bad[0]]), n))
    return DirectCheckReport(True, horizon, checked, worst)


@dataclass
class PremiseReport:
    """Evidence for the periodic bunching premise from orbits of period ``<= K``.

    Finitely many periods cannot prove the premise; ``evidence_only`` is
    always true.
    """

    theta_tilde: float
    L_tilde: float
    K: int
    orbits_checked: int
    max_rate: float
    worst_orbit: str
    status: str = "evidence"
    evidence_only: bool = field(default=True)

    def to_dict(self) -> dict:
        return {"status": self.status, "theta_tilde": self.theta_tilde, "L_tilde": self.L_tilde,
                "K": self.K, "orbits_checked": self.orbits_checked, "max_rate": self.max_rate,
                "worst_orbit": self.worst_orbit, "evidence_only": self.evidence_only}


def orbit_products(c: CocycleInstance, orbits: list[PeriodicOrbitPoint]):
    """``A^k_p`` (and inverses) for orbits sharing one period ``k``."""
    k = orbits[0].period
    arr = np.array([[o.word[i % k] for i in range(-c.r, k + c.r)] for o in orbits], dtype=np.int64)
    return c.word_products(arr)


def _spectral_radius(mats: np.ndarray) -> np.ndarray:
    return np.abs(np.linalg.eigvals(mats)).max(axis=-1)


def periodic_premise_check(c: CocycleInstance, K: int = 10, slack: float = 1e-6) -> PremiseReport:
    """Fit ``(theta~, L~)`` with ``Q(p, k) nu^(k beta) < L~ theta~^k`` on all orbits ``k <= K``.

    Raises ``PremiseViolation`` when some orbit has
    ``rho(A^k_p) rho((A^k_p)^-1) nu^(k beta) >= 1``: then
    ``Q(p, jk) nu^(jk beta) >= 1`` for every ``j`` and no ``theta~ < 1`` works.
    """
    log_nu = math.log(c.shift.nu)
    rates, gaps, names = [], [], []
    for k in range(1, K + 1):
        orbits = enumerate_periodic(c.shift, k)
        p, pinv = orbit_products(c, orbits)
        spectral = np.log(_spectral_radius(p)) + np.log(_spectral_radius(pinv)) + k * c.beta * log_nu
        bad = np.nonzero(spectral >= -VERIFY_RTOL)[0]
        if len(bad):
            raise PremiseViolation(orbits[bad[0]], float(spectral[bad[0]]))
        g = _gaps(c, p, pinv, k)
        rates.extend((g / k).tolist())
        gaps.extend(zip([k] * len(g), g.tolist()))
        names.extend(str(o) for o in orbits)
    i = int(np.argmax(rates))
    max_rate = rates[i]
    theta = math.exp(max_rate + slack)
    status = "evidence" if theta < 1 else "inconclusive"
    envelope = max(g - k * math.log(theta) for k, g in gaps)
    L = 1.0 if envelope < 0 else math.exp(envelope) * (1 + 1e-9)
    return PremiseReport(theta, L, K, len(rates), max_rate, names[i], status)


@dataclass(frozen=True)
class TransferBound:
    """``k -> M^2 L theta^k`` bounding ``Q_B(p, k) nu^(k beta)`` for conjugate periodic data."""

    M: float
    L: float
    theta: float

    def __call__(self, k: int) -> float:
        return self.M ** 2 * self.L * self.theta ** k


def transfer_bound(cert: BunchingCertificate, M: float) -> Callable[[int], float]:
    if M < 1:
        raise ValueError("M bounds ||C(p)|| and ||C(p)^-1|| and so is at least 1")
    return TransferBound(M, cert.L, cert.theta)
