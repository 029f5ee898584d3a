"""Lyapunov exponents of cocycles with respect to Markov measures."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bunching import orbit_products
from .cocycle import CocycleInstance
from .errors import InvalidShift
from .shift_space import PeriodicOrbitPoint, ShiftSpec, enumerate_periodic

STATIONARITY_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class MarkovMeasure:
    transition: np.ndarray
    stationary: np.ndarray
    entropy: float

    @classmethod
    def from_transition(cls, spec: ShiftSpec, transition) -> "MarkovMeasure":
        p = np.array(transition, dtype=float)
        if p.shape != (spec.alphabet_size,) * 2:
            raise InvalidShift(f"transition matrix has shape {p.shape}")
        if np.any((p > 0) != (spec.matrix == 1)):
            raise InvalidShift("transition support must equal the adjacency support")
        if np.max(np.abs(p.sum(axis=1) - 1)) > 1e-12:
            raise InvalidShift("transition rows must sum to 1")
        w, vl = np.linalg.eig(p.T)
        pi = np.real(vl[:, np.argmin(np.abs(w - 1))])
        pi = _polish(pi / pi.sum(), p)
        logs = np.where(p > 0, np.log(np.where(p > 0, p, 1.0)), 0.0)
        entropy = float(-(pi[:, None] * p * logs).sum())
        return cls(p, pi, entropy)

    @classmethod
    def bernoulli(cls, spec: ShiftSpec, probs) -> "MarkovMeasure":
        return cls.from_transition(spec, np.tile(np.asarray(probs, dtype=float), (spec.alphabet_size, 1)))

    def stationarity_residual(self) -> float:
        return float(np.max(np.abs(self.stationary @ self.transition - self.stationary)))

    def sample(self, rng: np.random.Generator, length: int) -> np.ndarray:
        """A stationary path of ``length`` symbols (1-based)."""
        k = len(self.stationary)
        cum = np.cumsum(self.transition, axis=1)
        u = rng.random(length)
        out = np.empty(length, dtype=np.int64)
        s = int(np.searchsorted(np.cumsum(self.stationary), u[0], side="right"))
        out[0] = min(s, k - 1)
        for i in range(1, length):
            s = int(np.searchsorted(cum[out[i - 1]], u[i], side="right"))
            out[i] = min(s, k - 1)
        return out + 1


def _polish(pi: np.ndarray, p: np.ndarray) -> np.ndarray:
    for _ in range(50):
        if np.max(np.abs(pi @ p - pi)) <= STATIONARITY_TOL / 10:
            break
        pi = pi @ p
        pi = pi / pi.sum()
    return pi


def parry_measure(spec: ShiftSpec) -> MarkovMeasure:
    """Measure of maximal entropy: ``P_ij = M_ij v_j / (lambda v_i)``."""
    m = spec.matrix.astype(float)
    w, vr = np.linalg.eig(m)
    i = int(np.argmax(np.real(w)))
    lam = float(np.real(w[i]))
    v = np.abs(np.real(vr[:, i]))
    p = m * v[None, :] / (lam * v[:, None])
    p = p / p.sum(axis=1, keepdims=True)
    measure = MarkovMeasure.from_transition(spec, p)
    return MarkovMeasure(measure.transition, measure.stationary, math.log(lam))


def _log_norm_products(c: CocycleInstance, symbols: np.ndarray) -> tuple[float, float]:
    """``log ||A^n||`` and ``log ||(A^n)^-1||`` along one symbol string, renormalizing."""
    mats, invs = c.factor_arrays(symbols)
    d = c.dim
    p, pinv = np.eye(d), np.eye(d)
    logp, loginv = [], []
    for a, ainv in zip(mats, invs):
        p = a @ p
        pinv = pinv @ ainv
        s, t = np.abs(p).max(), np.abs(pinv).max()
        p, pinv = p / s, pinv / t
        logp.append(math.log(s))
        loginv.append(math.log(t))
    logp.append(math.log(c.norm(p)))
    loginv.append(math.log(c.norm(pinv)))
    return math.fsum(logp), math.fsum(loginv)


def _jackknife_se(values: np.ndarray) -> float:
    t = len(values)
    if t < 2:
        return math.inf
    loo = (values.sum() - values) / (t - 1)
    return float(math.sqrt((t - 1) / t * np.sum((loo - loo.mean()) ** 2)))


@dataclass
class ExponentEstimate:
    lambda_plus: float
    lambda_minus: float
    n: int
    trials: int
    stderr_plus: float
    stderr_minus: float
    seed: int
    plus_samples: np.ndarray = field(repr=False)
    minus_samples: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {"lambda_plus": self.lambda_plus, "lambda_minus": self.lambda_minus, "n": self.n,
                "trials": self.trials, "stderr_plus": self.stderr_plus,
                "stderr_minus": self.stderr_minus, "seed": self.seed}


def estimate_exponents(c: CocycleInstance, mu: MarkovMeasure, n: int, trials: int, seed: int,
                       workers: int = 1) -> ExponentEstimate:
    """Average ``(1/n) log ||A^n_x||`` and ``-(1/n) log ||(A^n_x)^-1||`` over random ``x``.

    Each trial draws its own generator from ``SeedSequence(seed).spawn``,
    so results do not depend on ``workers``.
    """
    if n < 1 or trials < 1:
        raise ValueError("n and trials must be positive")
    children = np.random.SeedSequence(seed).spawn(trials)

    def one(ss):
        rng = np.random.default_rng(ss)
        lp, li = _log_norm_products(c, mu.sample(rng, n + 2 * c.r))
        return lp / n, -li / n

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            rows = list(pool.map(one, children))
    else:
        rows = [one(ss) for ss in children]
    plus = np.array([r[0] for r in rows])
    minus = np.array([r[1] for r in rows])
    return ExponentEstimate(float(plus.mean()), float(minus.mean()), n, trials,
                            _jackknife_se(plus), _jackknife_se(minus), seed, plus, minus)


@dataclass
class ChiEstimate:
    """``lambda_+ - lambda_- + beta log nu`` with its jackknife standard error."""

    value: float
    stderr: float
    estimate: ExponentEstimate = field(repr=False)

    def __float__(self) -> float:
        return self.value


def chi_exponent(c: CocycleInstance, mu: MarkovMeasure, n: int = 2000, trials: int = 50,
                 seed: int = 0, workers: int = 1) -> ChiEstimate:
    return chi_from_estimate(c, estimate_exponents(c, mu, n, trials, seed, workers))


def chi_from_estimate(c: CocycleInstance, est: ExponentEstimate) -> ChiEstimate:
    per_trial = est.plus_samples - est.minus_samples + c.beta * math.log(c.shift.nu)
    return ChiEstimate(float(per_trial.mean()), _jackknife_se(per_trial), est)


@dataclass(frozen=True)
class Approximant:
    orbit: PeriodicOrbitPoint
    k: int
    plus_value: float
    minus_value: float


def periodic_approximants(c: CocycleInstance, K: int) -> list[Approximant]:
    """``((1/k) log ||A^k_p||, -(1/k) log ||(A^k_p)^-1||)`` for every orbit of period ``<= K``."""
    rows = []
    for k in range(1, K + 1):
        orbits = enumerate_periodic(c.shift, k)
        p, pinv = orbit_products(c, orbits)
        plus = np.log(c.norm.batch(p)) / k
        minus = -np.log(c.norm.batch(pinv)) / k
        rows.extend(Approximant(o, k, float(a), float(b)) for o, a, b in zip(orbits, plus, minus))
    return rows


def best_approximant(rows: list[Approximant], lambda_plus: float, lambda_minus: float
                     ) -> tuple[Approximant, float]:
    """Orbit minimizing ``max(|plus - lambda_+|, |minus - lambda_-|)``."""
    errs = [max(abs(r.plus_value - lambda_plus), abs(r.minus_value - lambda_minus)) for r in rows]
    i = int(np.argmin(errs))
    return rows[i], errs[i]


def simultaneous_approximant(cocycles: list[CocycleInstance], targets: list[tuple[float, float]],
                             K: int) -> tuple[PeriodicOrbitPoint, float]:
    """One orbit approximating every cocycle's exponents at once (shared orbit list)."""
    tables = [periodic_approximants(c, K) for c in cocycles]
    worst = []
    for rows in zip(*tables):
        worst.append(max(max(abs(r.plus_value - lp), abs(r.minus_value - lm))
                         for r, (lp, lm) in zip(rows, targets)))
    i = int(np.argmin(worst))
    return tables[0][i].orbit, worst[i]
