"""Invertible operators on a finite-dimensional space.

``InvertibleOperator`` stores a matrix together with its inverse so that
every product of cocycle values carries its inverse along without being
re-inverted.  Norms are a strategy object; the default is the Euclidean
operator norm (largest singular value).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, IllConditioned

RESIDUAL_TOL = 1e-10
MAX_CONDITION = 1e12


class Norm:
    """Induced operator norm for some vector norm on R^d."""

    name = "abstract"

    def batch(self, mats: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, mat: np.ndarray) -> float:
        return float(self.batch(np.asarray(mat)[None])[0])


class EuclideanNorm(Norm):
    name = "euclidean"

    def batch(self, mats):
        return np.linalg.svd(mats, compute_uv=False)[..., 0]


class MaxNorm(Norm):
    """Norm induced by the sup norm: maximal absolute row sum."""

    name = "max"

    def batch(self, mats):
        return np.abs(mats).sum(axis=-1).max(axis=-1)


class OneNorm(Norm):
    name = "one"

    def batch(self, mats):
        return np.abs(mats).sum(axis=-2).max(axis=-1)


EUCLIDEAN = EuclideanNorm()
NORMS = {n.name: n for n in (EUCLIDEAN, MaxNorm(), OneNorm())}


@dataclass(frozen=True, eq=False)
class InvertibleOperator:
    entries: np.ndarray
    inverse_entries: np.ndarray

    def __post_init__(self):
        for a in (self.entries, self.inverse_entries):
            a.setflags(write=False)

    @classmethod
    def from_matrix(cls, mat, check_condition: bool = True) -> "InvertibleOperator":
        """Invert ``mat`` (LU with partial pivoting) and verify the residual."""
        a = np.array(mat, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
            raise DimensionMismatch(f"expected a nonempty square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise IllConditioned("matrix has non-finite entries")
        s = np.linalg.svd(a, compute_uv=False)
        if s[-1] == 0.0 or (check_condition and s[0] / s[-1] > MAX_CONDITION):
            raise IllConditioned(f"condition number {s[0] / s[-1] if s[-1] else np.inf:.3g} exceeds {MAX_CONDITION:g}")
        inv = np.linalg.solve(a, np.eye(len(a)))
        resid = EUCLIDEAN(a @ inv - np.eye(len(a)))
        if resid > RESIDUAL_TOL * EUCLIDEAN(a) * EUCLIDEAN(inv):
            raise IllConditioned(f"inverse residual {resid:.3g} too large")
        return cls(a, inv)

    @classmethod
    def identity(cls, dim: int) -> "InvertibleOperator":
        return cls(np.eye(dim), np.eye(dim))

    @classmethod
    def diag(cls, *values) -> "InvertibleOperator":
        return cls.from_matrix(np.diag(values))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def inv(self) -> "InvertibleOperator":
        return InvertibleOperator(self.inverse_entries, self.entries)

    def __matmul__(self, other: "InvertibleOperator") -> "InvertibleOperator":
        if not isinstance(other, InvertibleOperator):
            return NotImplemented
        _same_dim(self, other)
        return InvertibleOperator(self.entries @ other.entries, other.inverse_entries @ self.inverse_entries)

    def norm(self, norm: Norm = EUCLIDEAN) -> float:
        return norm(self.entries)

    def allclose(self, other: "InvertibleOperator", atol: float = 1e-12) -> bool:
        return bool(np.allclose(self.entries, other.entries, rtol=0.0, atol=atol))

    def __repr__(self) -> str:
        return f"InvertibleOperator({np.array2string(self.entries, precision=6, separator=', ')})"


def _same_dim(a: InvertibleOperator, b: InvertibleOperator) -> None:
    if a.dim != b.dim:
        raise DimensionMismatch(f"dimensions {a.dim} and {b.dim} differ")


def op_norm(a: InvertibleOperator, norm: Norm = EUCLIDEAN) -> float:
    return a.norm(norm)


def metric_d(a: InvertibleOperator, b: InvertibleOperator, norm: Norm = EUCLIDEAN) -> float:
    """``||A - B|| + ||A^-1 - B^-1||``."""
    _same_dim(a, b)
    return norm(a.entries - b.entries) + norm(a.inverse_entries - b.inverse_entries)


def distortion(a: InvertibleOperator, norm: Norm = EUCLIDEAN) -> float:
    """``||A|| * ||A^-1||``."""
    return norm(a.entries) * norm(a.inverse_entries)


def compose(*ops: InvertibleOperator) -> InvertibleOperator:
    """``ops[0] @ ops[1] @ ...`` (rightmost acts first)."""
    out = ops[0]
    for op in ops[1:]:
        out = out @ op
    return out
