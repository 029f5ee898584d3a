"""Locally constant linear cocycles over a subshift of finite type."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionMismatch, InadmissiblePoint
from .linops import EUCLIDEAN, InvertibleOperator, Norm, metric_d
from .shift_space import ShiftSpec, SymbolicPoint, Word, _as_point

MAX_ITERATE = 10_000


@dataclass(frozen=True, eq=False)
class LocallyConstantGenerator:
    """``A(x) = table[x[-r], ..., x[r]]``."""

    window_radius: int
    table: Mapping[Word, InvertibleOperator]
    beta: float = 1.0

    def __post_init__(self):
        if self.window_radius < 0:
            raise ValueError("window_radius must be nonnegative")
        if not 0.0 < self.beta <= 1.0:
            raise ValueError(f"beta must lie in (0, 1], got {self.beta}")
        width = 2 * self.window_radius + 1
        dims = {op.dim for op in self.table.values()}
        if len(dims) > 1:
            raise DimensionMismatch(f"generator values have mixed dimensions {sorted(dims)}")
        for w in self.table:
            if len(w) != width:
                raise ValueError(f"word {w} has length {len(w)}, expected {width}")

    @property
    def dim(self) -> int:
        return next(iter(self.table.values())).dim

    def holder_constant(self, nu: float) -> float:
        """``max d(table[u], table[w]) / nu ** (r * beta)``."""
        ops = list(self.table.values())
        worst = max((metric_d(a, b) for i, a in enumerate(ops) for b in ops[i + 1:]), default=0.0)
        return worst / nu ** (self.window_radius * self.beta)

    def to_dict(self) -> dict:
        from .shift_space import _fmt
        return {"window_radius": self.window_radius, "beta": self.beta,
                "entries": {_fmt(w): op.entries.tolist() for w, op in sorted(self.table.items())}}


def symbol_generator(spec: ShiftSpec, values: Mapping[int, object], beta: float = 1.0
                     ) -> LocallyConstantGenerator:
    """Generator depending on ``x[0]`` only."""
    table = {(s,): _op(values[s]) for s in spec.symbols}
    return LocallyConstantGenerator(0, table, beta)


def constant_generator(spec: ShiftSpec, value, beta: float = 1.0) -> LocallyConstantGenerator:
    op = _op(value)
    return LocallyConstantGenerator(0, {(s,): op for s in spec.symbols}, beta)


def identity_generator(spec: ShiftSpec, dim: int = 2, beta: float = 1.0) -> LocallyConstantGenerator:
    return constant_generator(spec, InvertibleOperator.identity(dim), beta)


def _op(value) -> InvertibleOperator:
    return value if isinstance(value, InvertibleOperator) else InvertibleOperator.from_matrix(value)


@dataclass(frozen=True, eq=False)
class CocycleInstance:
    """The cocycle generated by a locally constant ``A`` over the shift."""

    shift: ShiftSpec
    generator: LocallyConstantGenerator
    norm: Norm = field(default=EUCLIDEAN, repr=False)

    def __post_init__(self):
        width = 2 * self.generator.window_radius + 1
        for w in self.shift.words(width):
            if tuple(int(s) for s in w) not in self.generator.table:
                raise InadmissiblePoint(f"generator has no value on admissible word {tuple(w)}")
        for w in self.generator.table:
            if not self.shift.is_admissible(w):
                raise InadmissiblePoint(f"generator word {w} is not admissible")

    @property
    def r(self) -> int:
        return self.generator.window_radius

    @property
    def beta(self) -> float:
        return self.generator.beta

    @property
    def dim(self) -> int:
        return self.generator.dim

    @cached_property
    def holder_constant(self) -> float:
        return self.generator.holder_constant(self.shift.nu)

    @cached_property
    def _arrays(self) -> tuple[np.ndarray, np.ndarray]:
        k, width, d = self.shift.alphabet_size, 2 * self.r + 1, self.dim
        mats = np.full((k ** width, d, d), np.nan)
        invs = np.full((k ** width, d, d), np.nan)
        for w, op in self.generator.table.items():
            code = self._code(w)
            mats[code], invs[code] = op.entries, op.inverse_entries
        return mats, invs

    def _code(self, word) -> int:
        k = self.shift.alphabet_size
        c = 0
        for s in word:
            c = c * k + (int(s) - 1)
        return c

    def window_codes(self, symbols: np.ndarray) -> np.ndarray:
        """Table index of every length ``2r + 1`` window along the last axis."""
        k, width = self.shift.alphabet_size, 2 * self.r + 1
        weights = k ** np.arange(width - 1, -1, -1, dtype=np.int64)
        return (sliding_window_view(np.asarray(symbols) - 1, width, axis=-1) * weights).sum(axis=-1)

    def factor_arrays(self, symbols: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Generator values (and inverses) along a symbol string."""
        codes = self.window_codes(symbols)
        mats, invs = self._arrays
        return mats[codes], invs[codes]

    def evaluate(self, x: SymbolicPoint) -> InvertibleOperator:
        x = _as_point(x)
        return self.generator.table[x.window(-self.r, self.r)]

    def iterate(self, x: SymbolicPoint, n: int) -> InvertibleOperator:
        """``A^n_x``; negative ``n`` gives ``(A^{-n}_{f^n x})^{-1}``."""
        x = _as_point(x)
        if abs(n) > MAX_ITERATE:
            raise ValueError(f"|n| = {abs(n)} exceeds the iteration cap {MAX_ITERATE}")
        if n == 0:
            return InvertibleOperator.identity(self.dim)
        m = abs(n)
        lo = 0 if n > 0 else -m
        mats, invs = self.factor_arrays(x.window_array(lo - self.r, lo + m - 1 + self.r))
        p, pinv = mats[0], invs[0]
        for a, ainv in zip(mats[1:], invs[1:]):
            p = a @ p
            pinv = pinv @ ainv
        if n > 0:
            return InvertibleOperator(p, pinv)
        return InvertibleOperator(pinv, p)

    def q_distortion(self, x: SymbolicPoint, n: int) -> float:
        """``||A^n_x|| * ||(A^n_x)^-1||``."""
        a = self.iterate(x, n)
        return self.norm(a.entries) * self.norm(a.inverse_entries)

    def bunching_gap(self, x: SymbolicPoint, n: int) -> float:
        """``a_n(x) = log Q(x, n) + n * beta * log nu``."""
        return math.log(self.q_distortion(x, n)) + n * self.beta * math.log(self.shift.nu)

    def word_products(self, words: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Products ``A^n`` over each row of ``words`` (rows of length ``n + 2r``)."""
        words = np.atleast_2d(words)
        d = self.dim
        n = words.shape[1] - 2 * self.r
        p = np.broadcast_to(np.eye(d), (len(words), d, d)).copy()
        pinv = p.copy()
        if n <= 0:
            return p, pinv
        mats, invs = self.factor_arrays(words)
        for j in range(n):
            p = mats[:, j] @ p
            pinv = pinv @ invs[:, j]
        return p, pinv


def make_coboundary(b: CocycleInstance, conj: LocallyConstantGenerator) -> CocycleInstance:
    """Cocycle with generator ``A(x) = C(f x) B(x) C(x)^-1``."""
    spec = b.shift
    if conj.dim != b.dim:
        raise DimensionMismatch(f"transfer map dimension {conj.dim} differs from cocycle dimension {b.dim}")
    rb, rc = b.r, conj.window_radius
    big = max(rb, rc) + 1
    table = {}
    for w in spec.words(2 * big + 1):
        w = tuple(int(s) for s in w)
        bx = b.generator.table[w[big - rb: big + rb + 1]]
        cx = conj.table[w[big - rc: big + rc + 1]]
        cfx = conj.table[w[big + 1 - rc: big + rc + 2]]
        table[w] = cfx @ bx @ cx.inv
    return CocycleInstance(spec, LocallyConstantGenerator(big, table, b.beta), b.norm)


def generator_from_function(spec: ShiftSpec, radius: int, fn, beta: float = 1.0) -> LocallyConstantGenerator:
    """Tabulate ``fn(word)`` over every admissible window of ``2 * radius + 1`` symbols."""
    table = {}
    for w in spec.words(2 * radius + 1):
        w = tuple(int(s) for s in w)
        table[w] = _op(fn(w))
    return LocallyConstantGenerator(radius, table, beta)


def all_words(spec: ShiftSpec, length: int):
    """Admissible words as tuples (thin wrapper over ``ShiftSpec.words``)."""
    return [tuple(int(s) for s in w) for w in spec.words(length)]


__all__ = [
    "LocallyConstantGenerator", "CocycleInstance", "make_coboundary", "symbol_generator",
    "constant_generator", "identity_generator", "generator_from_function", "all_words",
]
