"""Mixing subshifts of finite type and their eventually periodic points.

Symbols are the integers ``1..k``.  A point of the shift is represented
exactly by a left periodic word, a finite core and a right periodic word::

    ... L L L | core[0] ... core[-1] | R R R ...
               ^start                ^end

with ``x[i] = left[(i - start) % len(left)]`` for ``i < start``,
``x[i] = core[i - start]`` on ``[start, end]`` and
``x[i] = right[(i - end - 1) % len(right)]`` for ``i > end``.  Every point
built here is kept in a canonical form, so ``==`` and ``hash`` agree with
equality of the underlying bi-infinite sequences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterator, Sequence

import numpy as np

from .errors import (
    BracketUndefined,
    ClosingInadmissible,
    InadmissiblePoint,
    InvalidShift,
)

Word = tuple[int, ...]


def _primitive_root(word: Word) -> Word:
    n = len(word)
    for p in range(1, n + 1):
        if n % p == 0 and word[:p] * (n // p) == word:
            return word[:p]
    return word


def _rotate(word: Word, k: int) -> Word:
    """Return ``w`` with ``w[j] = word[(j + k) % len(word)]``."""
    k %= len(word)
    return word[k:] + word[:k]


def _canonical(left: Word, core: Word, right: Word, start: int):
    left = _primitive_root(left)
    right = _primitive_root(right)
    core = list(core)
    # push the right tail as far left as it goes
    while core and core[-1] == right[-1]:
        core.pop()
        right = _rotate(right, -1)
    # then let the left tail eat what remains from the front
    while core and core[0] == left[0]:
        core.pop(0)
        left = _rotate(left, 1)
        start += 1
    if not core:
        if left == right:
            # purely periodic: anchor the phase at index 0
            right = _rotate(right, -start)
            return right, (), right, 0
        while left[-1] == right[-1]:
            left = _rotate(left, -1)
            right = _rotate(right, -1)
            start -= 1
    return left, tuple(core), right, start


@dataclass(frozen=True)
class ShiftSpec:
    """A mixing subshift of finite type with the metric ``nu ** n(x, y)``."""

    adjacency: tuple[tuple[int, ...], ...]
    nu: float = 0.5
    mixing_power: int = field(init=False, compare=False)

    def __post_init__(self):
        adj = tuple(tuple(int(v) for v in row) for row in self.adjacency)
        object.__setattr__(self, "adjacency", adj)
        k = len(adj)
        if k == 0:
            raise InvalidShift("adjacency is empty")
        for i, row in enumerate(adj):
            if len(row) != k:
                raise InvalidShift(f"adjacency row {i + 1} has length {len(row)}, expected {k}")
            if any(v not in (0, 1) for v in row):
                raise InvalidShift(f"adjacency row {i + 1} has entries outside {{0, 1}}")
        for i, row in enumerate(adj):
            if not any(row):
                raise InvalidShift(f"adjacency row {i + 1} empty")
        for j in range(k):
            if not any(adj[i][j] for i in range(k)):
                raise InvalidShift(f"adjacency column {j + 1} empty")
        if not (0.0 < float(self.nu) < 1.0):
            raise InvalidShift(f"nu must lie in (0, 1), got {self.nu}")
        object.__setattr__(self, "nu", float(self.nu))

        m = np.array(adj, dtype=bool)
        power = m.copy()
        # Wielandt: a primitive k x k matrix has M^((k-1)^2 + 1) > 0
        for n in range(1, (k - 1) ** 2 + 2):
            if power.all():
                object.__setattr__(self, "mixing_power", n)
                break
            power = (power.astype(np.int64) @ m.astype(np.int64)) > 0
        else:
            raise InvalidShift("adjacency is not primitive: the shift is not mixing")

    @classmethod
    def full(cls, k: int, nu: float = 0.5) -> "ShiftSpec":
        return cls(tuple((1,) * k for _ in range(k)), nu)

    @classmethod
    def golden_mean(cls, nu: float = 0.5) -> "ShiftSpec":
        return cls(((1, 1), (1, 0)), nu)

    @property
    def alphabet_size(self) -> int:
        return len(self.adjacency)

    @property
    def symbols(self) -> range:
        return range(1, self.alphabet_size + 1)

    @cached_property
    def matrix(self) -> np.ndarray:
        return np.array(self.adjacency, dtype=np.int64)

    def allows(self, a: int, b: int) -> bool:
        return self.adjacency[a - 1][b - 1] == 1

    def is_admissible(self, word: Sequence[int], cyclic: bool = False) -> bool:
        k = self.alphabet_size
        if any(not (1 <= s <= k) for s in word):
            return False
        if any(not self.allows(a, b) for a, b in zip(word, word[1:])):
            return False
        return not (cyclic and word and not self.allows(word[-1], word[0]))

    # -- constructors -----------------------------------------------------

    def point(self, left: Sequence[int], core: Sequence[int] = (), right: Sequence[int] | None = None,
              start: int = 0) -> "SymbolicPoint":
        """Build (and validate) the point ``...left | core @ start | right...``."""
        left = tuple(int(s) for s in left)
        right = left if right is None else tuple(int(s) for s in right)
        core = tuple(int(s) for s in core)
        if not left or not right:
            raise InadmissiblePoint("periodic tails must be nonempty words")
        full = left + left + core + right + right
        if not self.is_admissible(full):
            raise InadmissiblePoint(
                f"inadmissible point left={_fmt(left)} core={_fmt(core)} right={_fmt(right)}")
        return SymbolicPoint._raw(self, *_canonical(left, core, right, int(start)))

    def periodic(self, word: Sequence[int]) -> "PeriodicOrbitPoint":
        return PeriodicOrbitPoint(self, tuple(int(s) for s in word))

    def words(self, length: int) -> np.ndarray:
        """All admissible words of ``length`` symbols, lexicographic, one per row."""
        k = self.alphabet_size
        if length == 0:
            return np.zeros((1, 0), dtype=np.int64)
        words = np.arange(1, k + 1, dtype=np.int64)[:, None]
        m = self.matrix
        for _ in range(length - 1):
            last = words[:, -1] - 1
            nxt = [words[m[last, s - 1] == 1] for s in range(1, k + 1)]
            parts = []
            for s, block in enumerate(nxt, start=1):
                if len(block):
                    parts.append((block, s))
            rows = np.concatenate([np.column_stack([b, np.full(len(b), s)]) for b, s in parts])
            order = np.lexsort(rows.T[::-1])
            words = rows[order]
        return words

    def _reach(self, length: int) -> np.ndarray:
        """Boolean matrix of pairs joined by a path with ``length`` transitions."""
        cache = self.__dict__.setdefault("_reach_cache", {0: np.eye(self.alphabet_size, dtype=bool)})
        if length not in cache:
            prev = self._reach(length - 1)
            cache[length] = (prev.astype(np.int64) @ self.matrix) > 0
        return cache[length]

    def connector(self, a: int, b: int, length: int, rng: np.random.Generator | None = None) -> Word:
        """Word ``w`` of ``length`` symbols with ``a, *w, b`` admissible.

        Deterministic (lexicographically least) unless ``rng`` is given.
        Any ``length >= mixing_power - 1`` works for every pair.
        """
        if not self._reach(length + 1)[a - 1, b - 1]:
            raise InadmissiblePoint(f"no admissible path {a} -> {b} with {length} intermediate symbols")
        out = []
        cur = a
        for remaining in range(length, 0, -1):
            ok = [s for s in self.symbols if self.allows(cur, s) and self._reach(remaining)[s - 1, b - 1]]
            cur = ok[0] if rng is None else ok[int(rng.integers(len(ok)))]
            out.append(cur)
        return tuple(out)

    def random_cycle(self, rng: np.random.Generator, length: int) -> Word:
        """A random admissible cyclic word with at least ``length`` symbols."""
        s = int(rng.integers(1, self.alphabet_size + 1))
        word = [s]
        for _ in range(max(length - self.mixing_power, 0)):
            succ = [t for t in self.symbols if self.allows(word[-1], t)]
            word.append(succ[int(rng.integers(len(succ)))])
        word.extend(self.connector(word[-1], s, self.mixing_power - 1, rng))
        return tuple(word)

    def random_point(self, rng: np.random.Generator, core_length: int = 8, tail_length: int = 3,
                     start: int | None = None) -> "SymbolicPoint":
        """Random eventually periodic point with a core of roughly ``core_length``."""
        left = self.random_cycle(rng, int(rng.integers(1, tail_length + 1)))
        right = self.random_cycle(rng, int(rng.integers(1, tail_length + 1)))
        core = []
        prev = left[-1]
        for _ in range(core_length):
            succ = [t for t in self.symbols if self.allows(prev, t)]
            prev = succ[int(rng.integers(len(succ)))]
            core.append(prev)
        core.extend(self.connector(prev, right[0], self.mixing_power - 1, rng))
        if start is None:
            start = -int(rng.integers(0, len(core) + 1))
        return self.point(left, core, right, start)


def _fmt(word: Sequence[int]) -> str:
    return "".join(str(s) for s in word) if all(s < 10 for s in word) else ",".join(map(str, word))


@dataclass(frozen=True)
class SymbolicPoint:
    """An eventually periodic point of a subshift, in canonical form."""

    spec: ShiftSpec = field(repr=False)
    left: Word
    core: Word
    right: Word
    start: int

    @classmethod
    def _raw(cls, spec, left, core, right, start) -> "SymbolicPoint":
        return cls(spec, left, core, right, start)

    @property
    def end(self) -> int:
        return self.start + len(self.core) - 1

    @property
    def is_periodic(self) -> bool:
        return not self.core and self.left == self.right

    def __getitem__(self, i: int) -> int:
        if i < self.start:
            return self.left[(i - self.start) % len(self.left)]
        if i > self.end:
            return self.right[(i - self.end - 1) % len(self.right)]
        return self.core[i - self.start]

    def window(self, lo: int, hi: int) -> Word:
        """Symbols ``x[lo], ..., x[hi]`` (inclusive)."""
        return tuple(self[i] for i in range(lo, hi + 1))

    def window_array(self, lo: int, hi: int) -> np.ndarray:
        idx = np.arange(lo, hi + 1)
        out = np.empty(len(idx), dtype=np.int64)
        lmask = idx < self.start
        rmask = idx > self.end
        cmask = ~(lmask | rmask)
        out[lmask] = np.asarray(self.left)[(idx[lmask] - self.start) % len(self.left)]
        out[rmask] = np.asarray(self.right)[(idx[rmask] - self.end - 1) % len(self.right)]
        if cmask.any():
            out[cmask] = np.asarray(self.core)[idx[cmask] - self.start]
        return out

    def shift(self, n: int = 1) -> "SymbolicPoint":
        """``f^n x``, where ``(f x)[i] = x[i + 1]``."""
        if n == 0:
            return self
        return SymbolicPoint._raw(self.spec, *_canonical(self.left, self.core, self.right, self.start - n))

    def to_dict(self) -> dict:
        return {"left": _fmt(self.left), "core": _fmt(self.core), "right": _fmt(self.right),
                "start": self.start}

    def __str__(self) -> str:
        if self.is_periodic:
            return f"({_fmt(self.right)})^inf"
        core = f"{_fmt(self.core)}@{self.start}" if self.core else f"|@{self.start}"
        return f"({_fmt(self.left)})^inf {core} ({_fmt(self.right)})^inf"


@dataclass(frozen=True)
class PeriodicOrbitPoint:
    """The point ``p`` with ``p[i] = word[i % k]``, viewed as a fixed point of ``f^k``."""

    spec: ShiftSpec = field(repr=False)
    word: Word

    def __post_init__(self):
        if not self.word or not self.spec.is_admissible(self.word, cyclic=True):
            raise InadmissiblePoint(f"{_fmt(self.word)} is not an admissible cyclic word")

    @property
    def period(self) -> int:
        return len(self.word)

    @cached_property
    def point(self) -> SymbolicPoint:
        return SymbolicPoint._raw(self.spec, *_canonical(self.word, (), self.word, 0))

    def shift(self, n: int = 1) -> "PeriodicOrbitPoint":
        return PeriodicOrbitPoint(self.spec, _rotate(self.word, n))

    def __str__(self) -> str:
        return f"({_fmt(self.word)})^inf"


def _lcm(a: int, b: int) -> int:
    return a * b // math.gcd(a, b)


def _as_point(x) -> SymbolicPoint:
    return x.point if isinstance(x, PeriodicOrbitPoint) else x


# -- operations --------------------------------------------------------------


def shift(x: SymbolicPoint, n: int = 1) -> SymbolicPoint:
    return _as_point(x).shift(n)


def separation(x: SymbolicPoint, y: SymbolicPoint) -> float:
    """``n(x, y) = min{|i| : x[i] != y[i]}``; ``inf`` when the points coincide."""
    x, y = _as_point(x), _as_point(y)
    if x == y:
        return math.inf
    w = (max(abs(x.start), abs(x.end), abs(y.start), abs(y.end)) + 1
         + _lcm(len(x.left), len(y.left)) + _lcm(len(x.right), len(y.right)))
    diff = np.nonzero(x.window_array(-w, w) != y.window_array(-w, w))[0]
    return int(np.min(np.abs(diff - w)))


def distance(x: SymbolicPoint, y: SymbolicPoint) -> float:
    """``d_nu(x, y) = nu ** n(x, y)``, zero for equal points."""
    n = separation(x, y)
    return 0.0 if n == math.inf else _as_point(x).spec.nu ** n


def _agreement_start(x: SymbolicPoint, y: SymbolicPoint) -> int | None:
    """Smallest ``m`` with ``x[i] == y[i]`` for all ``i >= m`` (None: tails differ)."""
    top = max(x.end, y.end) + 1
    span = _lcm(len(x.right), len(y.right))
    if x.window_array(top, top + span - 1).tolist() != y.window_array(top, top + span - 1).tolist():
        return None
    lo = min(x.start, y.start) - 1
    a, b = x.window_array(lo, top - 1), y.window_array(lo, top - 1)
    diff = np.nonzero(a != b)[0]
    if len(diff) == 0:
        # agreement reaches into both left tails; fall back to a wider scan
        width = _lcm(len(x.left), len(y.left))
        a = x.window_array(lo - width, lo - 1)
        b = y.window_array(lo - width, lo - 1)
        diff = np.nonzero(a != b)[0]
        return int(lo - width + diff[-1] + 1)
    return int(lo + diff[-1] + 1)


def _agreement_end(x: SymbolicPoint, y: SymbolicPoint) -> int | None:
    """Largest ``m`` with ``x[i] == y[i]`` for all ``i <= m`` (None: tails differ)."""
    m = _agreement_start(_reflect(x), _reflect(y))
    return None if m is None else -m


def _reflect(x: SymbolicPoint) -> SymbolicPoint:
    # index reversal i -> -i; used only for comparisons, admissibility is irrelevant
    return SymbolicPoint._raw(x.spec, *_canonical(x.right[::-1], x.core[::-1], x.left[::-1], -x.end))


def in_local_stable(y: SymbolicPoint, x: SymbolicPoint) -> bool:
    """True iff ``y[i] == x[i]`` for every ``i >= 0``."""
    y, x = _as_point(y), _as_point(x)
    if x == y:
        return True
    m = _agreement_start(x, y)
    return m is not None and m <= 0


def in_local_unstable(y: SymbolicPoint, x: SymbolicPoint) -> bool:
    """True iff ``y[i] == x[i]`` for every ``i <= 0``."""
    y, x = _as_point(y), _as_point(x)
    if x == y:
        return True
    m = _agreement_end(x, y)
    return m is not None and m >= 0


def in_stable_set(y: SymbolicPoint, x: SymbolicPoint) -> bool:
    """``y`` lies in the global stable set of ``x`` (the futures eventually agree)."""
    y, x = _as_point(y), _as_point(x)
    return x == y or _agreement_start(x, y) is not None


def in_unstable_set(y: SymbolicPoint, x: SymbolicPoint) -> bool:
    y, x = _as_point(y), _as_point(x)
    return x == y or _agreement_end(x, y) is not None


def stable_depth(x: SymbolicPoint, y: SymbolicPoint) -> int | None:
    """Smallest ``n >= 0`` with ``f^n y`` in the local stable set of ``f^n x``."""
    x, y = _as_point(x), _as_point(y)
    if x == y:
        return 0
    m = _agreement_start(x, y)
    return None if m is None else max(0, m)


def unstable_depth(x: SymbolicPoint, y: SymbolicPoint) -> int | None:
    """Smallest ``n >= 0`` with ``f^-n y`` in the local unstable set of ``f^-n x``."""
    x, y = _as_point(x), _as_point(y)
    if x == y:
        return 0
    m = _agreement_end(x, y)
    return None if m is None else max(0, -m)


def splice(left_src: SymbolicPoint, right_src: SymbolicPoint, cut: int) -> SymbolicPoint:
    """Point equal to ``left_src`` on ``i < cut`` and to ``right_src`` on ``i >= cut``."""
    left_src, right_src = _as_point(left_src), _as_point(right_src)
    spec = right_src.spec
    if not spec.allows(left_src[cut - 1], right_src[cut]):
        raise InadmissiblePoint(f"splice at {cut}: {left_src[cut - 1]} -> {right_src[cut]} is forbidden")
    lo = min(left_src.start, cut)
    hi = max(right_src.end, cut - 1)
    core = left_src.window(lo, cut - 1) + right_src.window(cut, hi)
    left = _rotate(left_src.left, lo - left_src.start)
    right = _rotate(right_src.right, hi - right_src.end)
    return SymbolicPoint._raw(spec, *_canonical(left, core, right, lo))


def bracket(x: SymbolicPoint, z: SymbolicPoint) -> SymbolicPoint:
    """The point with the future of ``x`` and the past of ``z``."""
    x, z = _as_point(x), _as_point(z)
    if x[0] != z[0]:
        raise BracketUndefined(f"x[0] = {x[0]} differs from z[0] = {z[0]}")
    return splice(z, x, 0)


def enumerate_periodic(spec: ShiftSpec, k: int) -> list[PeriodicOrbitPoint]:
    """Every point with ``f^k p = p``, as cyclic words of length ``k``."""
    if k < 1:
        raise ValueError("period must be positive")
    words = spec.words(k)
    m = spec.matrix
    keep = m[words[:, -1] - 1, words[:, 0] - 1] == 1
    return [PeriodicOrbitPoint(spec, tuple(int(s) for s in w)) for w in words[keep]]


def _homoclinic_cores(spec: ShiftSpec, p0: PeriodicOrbitPoint, budget: int) -> Iterator[Word]:
    w, k = p0.word, p0.period

    def p(i):
        return w[i % k]

    def extend(prefix):
        n = len(prefix)
        if n and prefix[-1] != p(n - 1) and spec.allows(prefix[-1], p(n)):
            yield tuple(prefix)
        if n == budget:
            return
        prev = prefix[-1] if prefix else p(-1)
        for s in spec.symbols:
            if not spec.allows(prev, s) or (n == 0 and s == p(0)):
                continue
            prefix.append(s)
            yield from extend(prefix)
            prefix.pop()

    yield from extend([])


def enumerate_homoclinic(p0: PeriodicOrbitPoint, budget: int) -> list[SymbolicPoint]:
    """Homoclinic points of ``p0`` whose core starts at index 0 and has length ``<= budget``.

    Each point equals ``p0`` outside ``[0, budget - 1]`` and differs from it
    at index 0 and at the last core index.  The list starts with ``p0`` and is
    ordered lexicographically by the core word placed at index 0.
    """
    spec = p0.spec
    cores = sorted(_homoclinic_cores(spec, p0, budget))
    out = [p0.point]
    for core in cores:
        n = len(core)
        right = _rotate(p0.word, n)
        out.append(SymbolicPoint._raw(spec, *_canonical(p0.word, core, right, 0)))
    return out


def close_segment(x: SymbolicPoint, i_start: int, length: int
                  ) -> tuple[PeriodicOrbitPoint, Callable[[int], float]]:
    """Periodize ``x[i_start .. i_start + length - 1]``.

    Returns the periodic point ``q`` and ``bound(i)``, which dominates
    ``distance(f^i x, f^i q)`` for ``i`` inside the segment.
    """
    x = _as_point(x)
    if length < 1:
        raise ValueError("segment length must be positive")
    seg = x.window(i_start, i_start + length - 1)
    if not x.spec.allows(seg[-1], seg[0]):
        raise ClosingInadmissible(f"wrap transition {seg[-1]} -> {seg[0]} is forbidden")
    q = PeriodicOrbitPoint(x.spec, _rotate(seg, -i_start))
    nu = x.spec.nu
    end = i_start + length - 1

    def bound(i: int) -> float:
        if not i_start <= i <= end:
            return 1.0
        return nu ** min(i - i_start, end - i)

    return q, bound


def random_past_point(spec: ShiftSpec, rng: np.random.Generator, symbol: int, at: int,
                      extra: int = 4) -> SymbolicPoint:
    """Random point ``z`` with ``z[at] == symbol`` and a random past before ``at``."""
    left = spec.random_cycle(rng, int(rng.integers(1, 4)))
    walk = [left[-1]]
    for _ in range(extra):
        succ = [t for t in spec.symbols if spec.allows(walk[-1], t)]
        walk.append(succ[int(rng.integers(len(succ)))])
    core = list(walk[1:]) + list(spec.connector(walk[-1], symbol, spec.mixing_power - 1, rng)) + [symbol]
    right = spec.random_cycle(rng, 2)
    tail = spec.connector(symbol, right[0], spec.mixing_power - 1, rng)
    return spec.point(left, core + list(tail), right, at - len(core) + 1)


def random_future_point(spec: ShiftSpec, rng: np.random.Generator, symbol: int, at: int,
                        extra: int = 4) -> SymbolicPoint:
    """Random point ``z`` with ``z[at] == symbol`` and a random future after ``at``."""
    right = spec.random_cycle(rng, int(rng.integers(1, 4)))
    walk = [symbol]
    for _ in range(extra):
        succ = [t for t in spec.symbols if spec.allows(walk[-1], t)]
        walk.append(succ[int(rng.integers(len(succ)))])
    core = walk + list(spec.connector(walk[-1], right[0], spec.mixing_power - 1, rng))
    left = spec.random_cycle(rng, 2)
    head = spec.connector(left[-1], symbol, spec.mixing_power - 1, rng)
    return spec.point(left, list(head) + core, right, at - len(head))


def perturb_past(x: SymbolicPoint, n: int, rng: np.random.Generator) -> SymbolicPoint | None:
    """Random ``y`` equal to ``x`` on ``i > -n`` with ``y[-n] != x[-n]`` (None if impossible)."""
    x = _as_point(x)
    spec = x.spec
    choices = [s for s in spec.symbols if s != x[-n] and spec.allows(s, x[-n + 1])]
    if not choices:
        return None
    z = random_past_point(spec, rng, choices[int(rng.integers(len(choices)))], -n)
    return splice(z, x, -n + 1)


def perturb_future(x: SymbolicPoint, n: int, rng: np.random.Generator) -> SymbolicPoint | None:
    """Random ``y`` equal to ``x`` on ``i < n`` with ``y[n] != x[n]`` (None if impossible)."""
    x = _as_point(x)
    spec = x.spec
    choices = [s for s in spec.symbols if s != x[n] and spec.allows(x[n - 1], s)]
    if not choices:
        return None
    z = random_future_point(spec, rng, choices[int(rng.integers(len(choices)))], n)
    return splice(x, z, n)
