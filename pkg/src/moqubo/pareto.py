"""Dominance filtering, Pareto archives, hypervolume and attainment surfaces.

All comparisons are minimising: point a dominates b when a <= b in every
objective and a < b in at least one.  Hypervolume is the exact Lebesgue
measure of the space between a non-dominated set and a reference point that
every compared point must weakly dominate.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .qubo import Solution, WeightVector

logger = logging.getLogger(__name__)

_ND_CHUNK = 256


@dataclass(frozen=True)
class ReferencePoint:
    """Objective-space point dominated by every compared cost vector."""

    bounds: tuple[float, ...]

    def __post_init__(self) -> None:
        bounds = tuple(float(b) for b in self.bounds)
        if len(bounds) < 1:
            raise ValueError("reference point needs at least one component")
        if not all(np.isfinite(bounds)):
            raise ValueError("reference point components must be finite")
        object.__setattr__(self, "bounds", bounds)

    @property
    def m(self) -> int:
        return len(self.bounds)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.bounds, dtype=np.float64)


def dominates(a, b) -> bool:
    """True iff a[k] <= b[k] for all k and a[k] < b[k] for some k."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 1 or a.shape != b.shape:
        raise ValueError(f"vectors must have equal length, got {a.shape} vs {b.shape}")
    return bool(np.all(a <= b) and np.any(a < b))


def _dominated_mask(costs: np.ndarray) -> np.ndarray:
    """Boolean mask of rows strictly dominated by some other row.

    Assumes duplicate rows were removed (a duplicate never dominates its twin).
    """
    k = costs.shape[0]
    dominated = np.zeros(k, dtype=bool)
    for start in range(0, k, _ND_CHUNK):
        block = costs[start : start + _ND_CHUNK]  # candidates (b, m)
        le = (costs[:, None, :] <= block[None, :, :]).all(axis=2)  # (k, b)
        lt = (costs[:, None, :] < block[None, :, :]).any(axis=2)
        dominated[start : start + block.shape[0]] = (le & lt).any(axis=0)
    return dominated


def filter_nondominated(solutions: list[Solution]) -> list[Solution]:
    """Maximal subset under dominance, deduplicated, sorted by cost vector.

    Exact-equality deduplication happens first by bit vector, then by cost
    vector (keeping the lexicographically smallest bit vector), before the
    dominance filter.
    """
    if not solutions:
        return []
    by_bits: dict[bytes, Solution] = {}
    for sol in solutions:
        by_bits.setdefault(sol.key, sol)
    by_costs: dict[tuple[float, ...], Solution] = {}
    for sol in by_bits.values():
        kept = by_costs.get(sol.costs)
        if kept is None or sol.key < kept.key:
            by_costs[sol.costs] = sol
    unique = list(by_costs.values())
    costs = np.array([s.costs for s in unique], dtype=np.float64)
    keep = ~_dominated_mask(costs)
    front = [s for s, k in zip(unique, keep) if k]
    front.sort(key=lambda s: (s.costs, s.key))
    return front


@dataclass(frozen=True)
class ArchiveEntry:
    """An archived solution plus the index of the weight that produced it."""

    solution: Solution
    weight_id: int


class ParetoArchive:
    """Accumulates solver output across scalarisations.

    Keeps every added solution until :meth:`finalize`, tracks pre-filter
    componentwise cost bounds (needed to derive reference points), and
    remembers which explored weight produced each entry.  Mutation is
    single-writer; archives from parallel runs combine with :meth:`merge`.
    """

    def __init__(self, m: int) -> None:
        if m < 1:
            raise ValueError(f"m must be positive, got {m}")
        self.m = m
        self.weights: list[WeightVector] = []
        self._entries: list[ArchiveEntry] = []
        self._cost_min = np.full(m, np.inf)
        self._cost_max = np.full(m, -np.inf)

    def register_weight(self, w: WeightVector) -> int:
        if w.m != self.m:
            raise ValueError(f"weight has {w.m} components, archive expects {self.m}")
        self.weights.append(w)
        return len(self.weights) - 1

    def add(self, solution: Solution, weight_id: int) -> None:
        if len(solution.costs) != self.m:
            raise ValueError(
                f"solution has {len(solution.costs)} costs, archive expects {self.m}"
            )
        if not 0 <= weight_id < len(self.weights):
            raise IndexError(f"unknown weight id {weight_id}")
        self._entries.append(ArchiveEntry(solution, weight_id))
        c = np.asarray(solution.costs)
        np.minimum(self._cost_min, c, out=self._cost_min)
        np.maximum(self._cost_max, c, out=self._cost_max)

    def add_all(self, solutions, weight_id: int) -> None:
        for sol in solutions:
            self.add(sol, weight_id)

    @property
    def n_added(self) -> int:
        return len(self._entries)

    @property
    def cost_min(self) -> np.ndarray:
        """Componentwise minimum over every solution ever added (pre-filter)."""
        return self._cost_min.copy()

    @property
    def cost_max(self) -> np.ndarray:
        """Componentwise maximum over every solution ever added (pre-filter)."""
        return self._cost_max.copy()

    def merge(self, other: "ParetoArchive") -> "ParetoArchive":
        """Associative union; the other archive's weight ids are re-based."""
        if other.m != self.m:
            raise ValueError("cannot merge archives with different m")
        merged = ParetoArchive(self.m)
        merged.weights = list(self.weights) + list(other.weights)
        offset = len(self.weights)
        merged._entries = list(self._entries) + [
            ArchiveEntry(e.solution, e.weight_id + offset) for e in other._entries
        ]
        merged._cost_min = np.minimum(self._cost_min, other._cost_min)
        merged._cost_max = np.maximum(self._cost_max, other._cost_max)
        return merged

    def finalize(self) -> list[ArchiveEntry]:
        """Non-dominated, deduplicated entries sorted by cost vector.

        Provenance of a kept solution is the earliest weight id that
        produced it.
        """
        if not self._entries:
            return []
        provenance: dict[bytes, int] = {}
        for entry in self._entries:
            provenance.setdefault(entry.solution.key, entry.weight_id)
        front = filter_nondominated([e.solution for e in self._entries])
        return [ArchiveEntry(sol, provenance[sol.key]) for sol in front]

    def front_costs(self) -> np.ndarray:
        """(k, m) cost matrix of the finalized front."""
        entries = self.finalize()
        if not entries:
            return np.empty((0, self.m))
        return np.array([e.solution.costs for e in entries], dtype=np.float64)


def _prune_weakly_dominated(points: np.ndarray) -> np.ndarray:
    """Drop points weakly dominated by another (duplicates collapse to one).

    Input must be unique rows sorted ascending by the first coordinate.
    """
    k = points.shape[0]
    if k <= 1:
        return points
    keep = np.ones(k, dtype=bool)
    for start in range(0, k, _ND_CHUNK):
        block = points[start : start + _ND_CHUNK]
        le = (points[:, None, :] <= block[None, :, :]).all(axis=2)
        # A row weakly dominates a distinct row; equality with itself is
        # excluded because rows are unique.
        np.fill_diagonal(le[start : start + block.shape[0], :], False)
        keep[start : start + block.shape[0]] &= ~le.any(axis=0)
    return points[keep]


def _hv_2d(points: np.ndarray, ref: np.ndarray) -> float:
    # points: unique, non-dominated, sorted ascending by first objective,
    # hence strictly descending in the second.
    xs = points[:, 0]
    ys = points[:, 1]
    x_next = np.append(xs[1:], ref[0])
    return float(np.sum((x_next - xs) * (ref[1] - ys)))


def _hv_box(p: np.ndarray, ref: np.ndarray) -> float:
    return float(np.prod(ref - p))


def _hv_recursive(points: np.ndarray, ref: np.ndarray) -> float:
    """Exclusive-volume recursion (WFG-style) for 3 and 4 objectives."""
    k = points.shape[0]
    if k == 1:
        return _hv_box(points[0], ref)
    if k == 2:
        joint = np.maximum(points[0], points[1])
        return _hv_box(points[0], ref) + _hv_box(points[1], ref) - _hv_box(joint, ref)
    total = 0.0
    for i in range(k):
        p = points[i]
        rest = points[i + 1 :]
        exclusive = _hv_box(p, ref)
        if rest.shape[0]:
            limited = np.maximum(rest, p)
            limited = np.unique(limited, axis=0)
            limited = _prune_weakly_dominated(limited)
            exclusive -= _hv_recursive(limited, ref)
        total += exclusive
    return total


def hypervolume(points, ref: ReferencePoint) -> float:
    """Exact hypervolume of ``points`` against ``ref`` (2 to 4 objectives).

    Points that do not weakly dominate the reference point are clipped out
    with a warning.  Larger is better; an empty (or fully clipped) set has
    hypervolume 0.
    """
    r = ref.as_array()
    m = r.size
    if not 2 <= m <= 4:
        raise ValueError(f"unsupported objective count: m={m} (need 2 <= m <= 4)")
    pts = np.asarray(points, dtype=np.float64)
    if pts.size == 0:
        return 0.0
    if pts.ndim != 2 or pts.shape[1] != m:
        raise ValueError(f"points must be (k, {m}), got shape {pts.shape}")
    inside = (pts <= r).all(axis=1)
    if not inside.all():
        logger.warning(
            "hypervolume: clipping %d point(s) outside the reference box",
            int((~inside).sum()),
        )
        pts = pts[inside]
    if pts.shape[0] == 0:
        return 0.0
    pts = np.unique(pts, axis=0)  # sorts lexicographically ascending
    pts = _prune_weakly_dominated(pts)
    if m == 2:
        return _hv_2d(pts, r)
    return _hv_recursive(pts, r)


def attainment_surface(run_fronts, level: int) -> np.ndarray:
    """Level-k empirical attainment boundary of bi-objective run fronts.

    Returns the minimal points, on the grid of coordinates occurring in the
    inputs, that are weakly dominated by at least ``level`` of the fronts.
    Level 1 is the best surface, level r (= number of runs) the worst.
    """
    fronts = [np.asarray(f, dtype=np.float64) for f in run_fronts]
    r = len(fronts)
    if r < 1:
        raise ValueError("need at least one run front")
    for f in fronts:
        if f.ndim != 2 or f.shape[1] != 2 or f.shape[0] < 1:
            raise ValueError("each front must be a non-empty (k, 2) array")
    if not 1 <= level <= r:
        raise ValueError(f"level must be in [1, {r}], got {level}")

    xs = np.unique(np.concatenate([f[:, 0] for f in fronts]))
    min_y = np.full((r, xs.size), np.inf)
    for fi, f in enumerate(fronts):
        order = np.argsort(f[:, 0], kind="stable")
        fx = f[order, 0]
        prefix_min_y = np.minimum.accumulate(f[order, 1])
        pos = np.searchsorted(fx, xs, side="right") - 1
        valid = pos >= 0
        min_y[fi, valid] = prefix_min_y[pos[valid]]

    kth = np.sort(min_y, axis=0)[level - 1]
    surface: list[tuple[float, float]] = []
    best = np.inf
    for x, y in zip(xs, kth):
        if np.isfinite(y) and y < best:
            surface.append((float(x), float(y)))
            best = y
    return np.array(surface, dtype=np.float64)


def write_points_csv(path, points) -> None:
    """One point per row with header ``c1,...,cm``; floats via repr (exact)."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2:
        raise ValueError(f"points must be 2-D, got shape {pts.shape}")
    m = pts.shape[1]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(f"c{k + 1}" for k in range(m)) + "\n")
        for row in pts:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
