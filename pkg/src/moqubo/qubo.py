"""Core types for multi-objective QUBO instances and their evaluation.

A multi-objective unconstrained binary quadratic program is a stack of m
cost matrices over the same n binary variables.  Objective k of a bit
vector x is the full double sum

    c_k(x) = sum_i sum_j Q_ijk * x_i * x_j

over all ordered index pairs (i, j).  Matrices are used exactly as stored:
they are never symmetrised or folded to a triangle, so energies match the
full-matrix definition bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SIMPLEX_ATOL = 1e-9


@dataclass(frozen=True, eq=False)
class QuboMatrix:
    """Dense n x n real coefficient matrix of a single QUBO objective."""

    coeffs: np.ndarray

    def __post_init__(self) -> None:
        coeffs = np.array(self.coeffs, dtype=np.float64)
        if coeffs.ndim != 2 or coeffs.shape[0] != coeffs.shape[1]:
            raise ValueError(f"coeffs must be a square matrix, got shape {coeffs.shape}")
        if coeffs.shape[0] < 1:
            raise ValueError("matrix dimension must be positive")
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("coeffs must be finite (no NaN/Inf)")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def n(self) -> int:
        return self.coeffs.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, QuboMatrix):
            return NotImplemented
        return np.array_equal(self.coeffs, other.coeffs)

    def __repr__(self) -> str:
        return f"QuboMatrix(n={self.n})"


@dataclass(frozen=True, eq=False)
class MubqpInstance:
    """m stacked n x n QUBO objectives plus generation metadata.

    ``rho`` is the target pairwise correlation between objective
    coefficients and ``density`` the fraction of index pairs carrying a
    nonzero coefficient vector; both are descriptive metadata and are not
    re-validated against the matrices here.
    """

    m: int
    n: int
    rho: float
    density: float
    objectives: tuple[QuboMatrix, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "objectives", tuple(self.objectives))
        if self.m < 2:
            raise ValueError(f"m must be >= 2, got {self.m}")
        if self.n < 1:
            raise ValueError(f"n must be positive, got {self.n}")
        if not -1.0 <= self.rho <= 1.0:
            raise ValueError(f"rho must be in [-1, 1], got {self.rho}")
        if not 0.0 < self.density <= 1.0:
            raise ValueError(f"density must be in (0, 1], got {self.density}")
        if len(self.objectives) != self.m:
            raise ValueError(
                f"expected {self.m} objectives, got {len(self.objectives)}"
            )
        for k, q in enumerate(self.objectives):
            if not isinstance(q, QuboMatrix):
                raise TypeError(f"objective {k} is not a QuboMatrix")
            if q.n != self.n:
                raise ValueError(
                    f"objective {k} has n={q.n}, expected n={self.n}"
                )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MubqpInstance):
            return NotImplemented
        return (
            self.m == other.m
            and self.n == other.n
            and self.rho == other.rho
            and self.density == other.density
            and all(a == b for a, b in zip(self.objectives, other.objectives))
        )

    def __repr__(self) -> str:
        return (
            f"MubqpInstance(m={self.m}, n={self.n}, rho={self.rho}, "
            f"density={self.density})"
        )


@dataclass(frozen=True, slots=True)
class WeightVector:
    """Point on the (m-1)-simplex: components in [0, 1] summing to 1."""

    lambdas: tuple[float, ...]

    def __post_init__(self) -> None:
        lams = tuple(float(v) for v in self.lambdas)
        if len(lams) < 1:
            raise ValueError("weight vector must have at least one component")
        for v in lams:
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"weight component {v} outside [0, 1]")
        total = sum(lams)
        if abs(total - 1.0) > SIMPLEX_ATOL:
            raise ValueError(f"weight components sum to {total}, expected 1")
        object.__setattr__(self, "lambdas", lams)

    @classmethod
    def _trusted(cls, lambdas: tuple[float, ...]) -> "WeightVector":
        # Fast path for lattice enumeration where validity holds by
        # construction; skips per-component re-validation.
        self = object.__new__(cls)
        object.__setattr__(self, "lambdas", lambdas)
        return self

    @property
    def m(self) -> int:
        return len(self.lambdas)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.lambdas, dtype=np.float64)


@dataclass(frozen=True, eq=False)
class Solution:
    """A bit vector with its per-objective costs and scalarised energy."""

    bits: np.ndarray
    costs: tuple[float, ...]
    energy: float

    def __post_init__(self) -> None:
        bits = np.array(self.bits, dtype=np.uint8)
        if bits.ndim != 1 or bits.size < 1:
            raise ValueError("bits must be a non-empty 1-D vector")
        if not np.all((bits == 0) | (bits == 1)):
            raise ValueError("bits must be binary")
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)
        object.__setattr__(self, "costs", tuple(float(c) for c in self.costs))
        object.__setattr__(self, "energy", float(self.energy))

    @property
    def n(self) -> int:
        return self.bits.size

    @property
    def key(self) -> bytes:
        """Hashable identity of the bit vector (exact, for deduplication)."""
        return self.bits.tobytes()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Solution):
            return NotImplemented
        return (
            self.key == other.key
            and self.costs == other.costs
            and self.energy == other.energy
        )

    def __hash__(self) -> int:
        return hash((self.key, self.costs, self.energy))

    def __repr__(self) -> str:
        return f"Solution(n={self.n}, costs={self.costs}, energy={self.energy})"


def _as_bit_array(x, n: int) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1 or arr.size != n:
        raise ValueError(f"bit vector has length {arr.size}, expected {n}")
    if not np.all((arr == 0.0) | (arr == 1.0)):
        raise ValueError("bit vector must be binary")
    return arr


def evaluate_objective(Q: QuboMatrix, x) -> float:
    """Full double sum sum_i sum_j Q_ij * x_i * x_j over ordered pairs."""
    arr = _as_bit_array(x, Q.n)
    return float(arr @ Q.coeffs @ arr)


def evaluate_objective_batch(Q: QuboMatrix, X: np.ndarray) -> np.ndarray:
    """Vectorised evaluation of a (k, n) batch of bit vectors."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != Q.n:
        raise ValueError(f"batch has shape {X.shape}, expected (k, {Q.n})")
    return ((X @ Q.coeffs) * X).sum(axis=1)


def evaluate_energy(Q: QuboMatrix, x) -> float:
    """Energy of ``x`` under an aggregated matrix (same sum as an objective)."""
    return evaluate_objective(Q, x)


def aggregate(instance: MubqpInstance, w: WeightVector) -> QuboMatrix:
    """Componentwise weighted sum of the instance's m objective matrices.

    Aggregating then evaluating equals the weighted sum of per-objective
    evaluations (linearity of the double sum in Q).
    """
    if w.m != instance.m:
        raise ValueError(
            f"weight vector has {w.m} components, instance has m={instance.m}"
        )
    out = np.zeros((instance.n, instance.n), dtype=np.float64)
    for lam, q in zip(w.lambdas, instance.objectives):
        out += lam * q.coeffs
    return QuboMatrix(out)


# Single-bit-flip linearisation.  With the cache
#
#     cache[j] = sum_k (Q_jk + Q_kj) * x_k          (diagonal term enters as
#                                                    2*Q_jj*x_j, i.e. once per
#                                                    matrix orientation)
#
# flipping bit i changes the energy by
#
#     delta = s * cache[i] + Q_ii,   s = 1 - 2*x_i,
#
# because the cross terms are linear in x_i and x_i^2 = x_i.  After an
# accepted flip the cache is restored in O(n) by
#
#     cache[j] += s * (Q_ji + Q_ij)   for all j.


def init_field_cache(Q: QuboMatrix, x) -> np.ndarray:
    """Build the local-field cache for ``x`` used by delta_energy."""
    arr = _as_bit_array(x, Q.n)
    return (Q.coeffs + Q.coeffs.T) @ arr


def delta_energy(Q: QuboMatrix, x, i: int, field_cache: np.ndarray) -> float:
    """Energy change from flipping bit ``i``, in O(1) given the cache."""
    n = Q.n
    if not 0 <= i < n:
        raise IndexError(f"bit index {i} out of range [0, {n})")
    s = 1.0 - 2.0 * float(x[i])
    return s * float(field_cache[i]) + float(Q.coeffs[i, i])


def apply_flip(Q: QuboMatrix, x: np.ndarray, i: int, field_cache: np.ndarray) -> float:
    """Flip bit ``i`` in place, restore the cache invariant, return the delta.

    ``x`` and ``field_cache`` are caller-owned mutable state (single writer).
    """
    delta = delta_energy(Q, x, i, field_cache)
    s = 1.0 - 2.0 * float(x[i])
    field_cache += s * (Q.coeffs[:, i] + Q.coeffs[i, :])
    x[i] = 1 - x[i]
    return delta
