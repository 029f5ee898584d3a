"""Stable and unstable holonomies of fiber bunched cocycles.

``H^s_{x,y} = lim (A^n_y)^-1 A^n_x`` for ``y`` in the stable set of ``x`` and
``H^u_{x,y} = lim A^n_{f^-n y} (A^n_{f^-n x})^-1`` for the unstable set.
Non-local pairs are moved into the local leaf first and transported back
with ``H_{x,y} = (A^n_y)^-1 H_{f^n x, f^n y} A^n_x`` (and its backward twin).

Two independent routes are provided: a telescoping series that stops once
increments vanish, and the finite product that a locally constant
generator makes exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bunching import BunchingCertificate
from .cocycle import CocycleInstance
from .errors import HolonomyDiverged, NoCertificate, NotOnLeaf
from .linops import InvertibleOperator
from .shift_space import (
    SymbolicPoint,
    _agreement_end,
    _agreement_start,
    _as_point,
    distance,
    perturb_future,
    perturb_past,
    separation,
    stable_depth,
    unstable_depth,
)

MAX_ITERATIONS = 1000
_CHUNK = 64


@dataclass(frozen=True)
class HolonomyMap:
    from_point: SymbolicPoint
    to_point: SymbolicPoint
    kind: str
    operator: InvertibleOperator
    iterations_used: int
    error_bound: float


def _require(cert) -> None:
    if not isinstance(cert, BunchingCertificate) or not cert.theta < 1:
        raise NoCertificate("holonomies need a fiber bunching certificate with theta < 1")


def _factors(c: CocycleInstance, x: SymbolicPoint, lo: int, count: int):
    """``A(f^j x)`` and inverses for ``j = lo .. lo + count - 1``."""
    return c.factor_arrays(x.window_array(lo - c.r, lo + count - 1 + c.r))


def _series(c, x, y, tol, forward: bool):
    """Sum the telescoping increments of a local pair.

    Stops after ``2r + 1`` consecutive increments below ``tol``: once the
    windows of the two orbits agree, every later increment vanishes.
    """
    d = c.dim
    patience = 2 * c.r + 1
    h = np.eye(d)
    gy_inv, gx = np.eye(d), np.eye(d)  # forward: (A^j_y)^-1, A^j_x
    gy, gx_inv = np.eye(d), np.eye(d)  # backward: A^{j-1}_{f^-(j-1) y}, its x inverse
    quiet = 0
    tail = []
    used = 0
    j = 0
    while j < MAX_ITERATIONS:
        if forward:
            ax, axi = _factors(c, x, j, _CHUNK)
            ay, ayi = _factors(c, y, j, _CHUNK)
        else:
            # factors A(f^-n .) for n = j + 1 .. j + CHUNK, nearest first
            ax, axi = (a[::-1] for a in _factors(c, x, -j - _CHUNK, _CHUNK))
            ay, ayi = (a[::-1] for a in _factors(c, y, -j - _CHUNK, _CHUNK))
        for t in range(_CHUNK):
            if forward:
                delta = gy_inv @ ayi[t] @ (ax[t] - ay[t]) @ gx
                gx = ax[t] @ gx
                gy_inv = gy_inv @ ayi[t]
            else:
                delta = gy @ (ay[t] - ax[t]) @ axi[t] @ gx_inv
                gy = gy @ ay[t]
                gx_inv = axi[t] @ gx_inv
            h = h + delta
            size = float(np.abs(delta).max())
            j += 1
            if size > 0:
                used = j
            if size <= tol * max(1.0, float(np.abs(h).max())):
                quiet += 1
                tail.append(size)
                if quiet >= patience:
                    bound = 0.0 if not any(tail[-patience:]) else math.fsum(tail[-patience:])
                    return h, used, bound
            else:
                quiet = 0
            if j >= MAX_ITERATIONS:
                break
    raise HolonomyDiverged(f"no convergence within {MAX_ITERATIONS} iterations")


def _operator(h: np.ndarray) -> InvertibleOperator:
    return InvertibleOperator(h, np.linalg.solve(h, np.eye(len(h))))


def stable_holonomy(c: CocycleInstance, x, y, cert: BunchingCertificate | None,
                    tol: float = 1e-12) -> HolonomyMap:
    """``H^s_{x,y}`` for ``y`` in the stable set of ``x``."""
    _require(cert)
    x, y = _as_point(x), _as_point(y)
    m = stable_depth(x, y)
    if m is None:
        raise NotOnLeaf(f"{y} is not in the stable set of {x}")
    xm, ym = x.shift(m), y.shift(m)
    if xm == ym:
        local, used, bound = np.eye(c.dim), 0, 0.0
    else:
        local, used, bound = _series(c, xm, ym, tol, forward=True)
    op = _operator(local)
    if m:
        op = c.iterate(y, m).inv @ op @ c.iterate(x, m)
    return HolonomyMap(x, y, "stable", op, used, bound)


def unstable_holonomy(c: CocycleInstance, x, y, cert: BunchingCertificate | None,
                      tol: float = 1e-12) -> HolonomyMap:
    """``H^u_{x,y}`` for ``y`` in the unstable set of ``x``."""
    _require(cert)
    x, y = _as_point(x), _as_point(y)
    m = unstable_depth(x, y)
    if m is None:
        raise NotOnLeaf(f"{y} is not in the unstable set of {x}")
    xm, ym = x.shift(-m), y.shift(-m)
    if xm == ym:
        local, used, bound = np.eye(c.dim), 0, 0.0
    else:
        local, used, bound = _series(c, xm, ym, tol, forward=False)
    op = _operator(local)
    if m:
        op = c.iterate(y, -m).inv @ op @ c.iterate(x, -m)
    return HolonomyMap(x, y, "unstable", op, used, bound)


def holonomy(c: CocycleInstance, x, y, cert, kind: str, tol: float = 1e-12) -> HolonomyMap:
    if kind == "stable":
        return stable_holonomy(c, x, y, cert, tol)
    if kind == "unstable":
        return unstable_holonomy(c, x, y, cert, tol)
    raise ValueError(f"unknown holonomy kind {kind!r}")


def finite_product(c: CocycleInstance, x, y, kind: str) -> InvertibleOperator:
    """Closed form for locally constant generators.

    Stable: ``(A^n_y)^-1 A^n_x`` with ``n`` the first time the radius ``r``
    windows of the two forward orbits coincide.  Unstable: the mirror image
    ``A^n_{f^-n y} (A^n_{f^-n x})^-1``.
    """
    x, y = _as_point(x), _as_point(y)
    if x == y:
        return InvertibleOperator.identity(c.dim)
    if kind == "stable":
        m = _agreement_start(x, y)
        if m is None:
            raise NotOnLeaf(f"{y} is not in the stable set of {x}")
        n = max(0, m + c.r)
        return c.iterate(y, n).inv @ c.iterate(x, n)
    m = _agreement_end(x, y)
    if m is None:
        raise NotOnLeaf(f"{y} is not in the unstable set of {x}")
    n = max(0, c.r - m)
    return c.iterate(y, -n).inv @ c.iterate(x, -n)


# -- verification ---------------------------------------------------------------


def _gap(a: InvertibleOperator, b: InvertibleOperator) -> float:
    return float(np.abs(a.entries - b.entries).max())


def _local_pair(c, rng, kind: str, n: int):
    """Random ``x`` and ``y`` on its local leaf with ``n(x, y) = n``."""
    while True:
        x = c.shift.random_point(rng)
        y = perturb_past(x, n, rng) if kind == "stable" else perturb_future(x, n, rng)
        if y is not None:
            return x, y


def _on_leaf(c, rng, x, kind: str):
    for _ in range(100):
        n = int(rng.integers(1, 8))
        y = perturb_past(x, n, rng) if kind == "stable" else perturb_future(x, n, rng)
        if y is not None:
            return y
    raise RuntimeError("could not sample a point on the leaf")


@dataclass
class HolonomyReport:
    pairs: int
    exactness: float
    h2_composition: float
    h2_inverse: float
    h3: float
    h3_unstable: float
    h4_constant: float
    h4_near: float
    h4_far: float
    tolerance: float = 1e-10

    @property
    def passed(self) -> bool:
        resid = (self.exactness, self.h2_composition, self.h2_inverse, self.h3, self.h3_unstable)
        return max(resid) < self.tolerance and self.h4_far <= self.h4_near

    def checks(self) -> list[dict]:
        rows = [("exactness", self.exactness), ("h2_composition", self.h2_composition),
                ("h2_inverse", self.h2_inverse), ("h3_stable", self.h3), ("h3_unstable", self.h3_unstable)]
        out = [{"name": n, "status": "pass" if v < self.tolerance else "fail", "max_residual": v}
               for n, v in rows]
        out.append({"name": "h4_uniformity", "status": "pass" if self.h4_far <= self.h4_near else "fail",
                    "max_residual": max(0.0, self.h4_far - self.h4_near),
                    "constant": self.h4_constant, "ratio_near": self.h4_near, "ratio_far": self.h4_far})
        return out


def verify_holonomies(c: CocycleInstance, cert: BunchingCertificate, rng: np.random.Generator,
                      pairs: int = 200, n_push: int = 10) -> HolonomyReport:
    """Residuals of exactness, H2, H3, H3' and the fitted H4 constant on random samples."""
    exact = comp = inv = h3 = h3u = 0.0
    near, far = 0.0, 0.0
    for i in range(pairs):
        kind = "stable" if i % 2 == 0 else "unstable"
        n = int(rng.integers(1, 6)) if i % 4 < 2 else int(rng.integers(10, 16))
        x, y = _local_pair(c, rng, kind, n)
        h = holonomy(c, x, y, cert, kind).operator
        exact = max(exact, _gap(h, finite_product(c, x, y, kind)))
        z = _on_leaf(c, rng, x, kind)
        hyz = holonomy(c, y, z, cert, kind).operator
        hxz = holonomy(c, x, z, cert, kind).operator
        comp = max(comp, _gap(hyz @ h, hxz))
        inv = max(inv, _gap(h.inv, holonomy(c, y, x, cert, kind).operator))
        k = int(rng.integers(1, n_push + 1))
        if kind == "stable":
            pushed = holonomy(c, x.shift(k), y.shift(k), cert, kind).operator
            h3 = max(h3, _gap(h, c.iterate(y, k).inv @ pushed @ c.iterate(x, k)))
        else:
            pushed = holonomy(c, x.shift(-k), y.shift(-k), cert, kind).operator
            h3u = max(h3u, _gap(h, c.iterate(y, -k).inv @ pushed @ c.iterate(x, -k)))
        ratio = c.norm(h.entries - np.eye(c.dim)) / distance(x, y) ** c.beta
        if separation(x, y) >= 10:
            far = max(far, ratio)
        else:
            near = max(near, ratio)
    return HolonomyReport(pairs, exact, comp, inv, h3, h3u, max(near, far), near, far)
