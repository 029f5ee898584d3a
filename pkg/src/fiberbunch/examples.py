"""Small reference cocycles used by the tests, the scenarios and the README."""

from __future__ import annotations

import math

import numpy as np

from .cocycle import (
    CocycleInstance,
    LocallyConstantGenerator,
    constant_generator,
    generator_from_function,
    identity_generator,
    make_coboundary,
    symbol_generator,
)
from .shift_space import ShiftSpec

E = math.exp(0.1)


def full_two_shift(nu: float = 0.5) -> ShiftSpec:
    return ShiftSpec.full(2, nu)


def e2(spec: ShiftSpec | None = None, beta: float = 1.0) -> CocycleInstance:
    """Diagonal cocycle ``diag(e^0.1, e^-0.1)`` on symbol 1 and its inverse on 2."""
    spec = spec or full_two_shift()
    return CocycleInstance(spec, symbol_generator(spec, {1: np.diag([E, 1 / E]), 2: np.diag([1 / E, E])}, beta))


def e3_transfer(spec: ShiftSpec | None = None) -> LocallyConstantGenerator:
    """Transfer map depending on ``x[0]``: an upper and a lower shear."""
    spec = spec or full_two_shift()
    return symbol_generator(spec, {1: [[1.0, 0.3], [0.0, 1.0]], 2: [[1.0, 0.0], [0.3, 1.0]]})


def e3(spec: ShiftSpec | None = None) -> CocycleInstance:
    """``A(x) = C(fx) E2(x) C(x)^-1`` with the shear transfer map."""
    spec = spec or full_two_shift()
    return make_coboundary(e2(spec), e3_transfer(spec))


def strong_diagonal(spec: ShiftSpec | None = None) -> CocycleInstance:
    """Constant ``diag(2, 1/2)``: distortion 4 per step beats ``nu = 1/2``."""
    spec = spec or full_two_shift()
    return CocycleInstance(spec, constant_generator(spec, np.diag([2.0, 0.5])))


def identity(spec: ShiftSpec | None = None, dim: int = 2) -> CocycleInstance:
    spec = spec or full_two_shift()
    return CocycleInstance(spec, identity_generator(spec, dim))


def near_identity(spec: ShiftSpec, radius: int, scale: float = 0.05, seed: int = 0,
                  dim: int = 2) -> CocycleInstance:
    """Seeded random perturbations of the identity on every window of ``2 radius + 1`` symbols."""
    words = [tuple(int(s) for s in w) for w in spec.words(2 * radius + 1)]
    rng = np.random.default_rng(seed)
    noise = {w: rng.uniform(-scale, scale, size=(dim, dim)) for w in words}
    return CocycleInstance(spec, generator_from_function(spec, radius, lambda w: np.eye(dim) + noise[w]))
