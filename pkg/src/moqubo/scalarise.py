"""Weight generation strategies and the outer scalarisation loop.

Three ways of choosing the weights that collapse m objectives into one
QUBO per solver call:

* ``uniform``    -- all weights up front from a simplex lattice of degree H;
* ``dichotomic`` -- bi-objective only; each new weight is perpendicular to
  the widest gap between adjacent best solutions sorted by the first cost;
* ``averages``   -- any m; each new weight is the midpoint of the pair of
  explored weights whose best solutions are farthest apart in objective
  space (Manhattan or Euclidean distance).

Every run issues exactly ``n_weights`` solver calls and returns a
:class:`~moqubo.pareto.ParetoArchive` holding all returned solutions with
per-weight provenance.
"""

from __future__ import annotations

import enum
import itertools
import logging
from dataclasses import dataclass, replace
from math import comb
from typing import Callable, Sequence

import numpy as np

from . import anneal
from .anneal import SolveResult, SolverParams
from .pareto import ParetoArchive
from .qubo import (
    MubqpInstance,
    QuboMatrix,
    Solution,
    WeightVector,
    aggregate,
    evaluate_objective_batch,
)
from .seeding import mix_seed

logger = logging.getLogger(__name__)

WEIGHT_DUP_ATOL = 1e-9

SolverFn = Callable[[QuboMatrix, SolverParams], SolveResult]


class Method(str, enum.Enum):
    UNIFORM = "uniform"
    DICHOTOMIC = "dichotomic"
    AVERAGES = "averages"


class DistanceMetric(str, enum.Enum):
    MANHATTAN = "manhattan"
    EUCLIDEAN = "euclidean"


class ScalariseError(RuntimeError):
    """Raised when an adaptive step cannot derive a usable weight."""


@dataclass(frozen=True)
class WeightRecord:
    """One scalarisation call: the weight used and the best solution found."""

    weight: WeightVector
    best: Solution


@dataclass(frozen=True)
class ScalariseConfig:
    method: Method
    n_weights: int
    solver: SolverParams
    distance: DistanceMetric = DistanceMetric.EUCLIDEAN

    def __post_init__(self) -> None:
        object.__setattr__(self, "method", Method(self.method))
        object.__setattr__(self, "distance", DistanceMetric(self.distance))
        minimum = 2
        if self.n_weights < minimum:
            raise ValueError(f"n_weights must be >= {minimum}, got {self.n_weights}")


def _compositions_desc(total: int, parts: int) -> np.ndarray:
    """All non-negative integer compositions of ``total`` into ``parts``,
    in lexicographically descending order (stars-and-bars, vectorised)."""
    slots = total + parts - 1
    bars = np.fromiter(
        itertools.chain.from_iterable(itertools.combinations(range(slots), parts - 1)),
        dtype=np.int64,
        count=comb(slots, parts - 1) * (parts - 1),
    ).reshape(-1, parts - 1)
    ext = np.empty((bars.shape[0], parts + 1), dtype=np.int64)
    ext[:, 0] = -1
    ext[:, 1:-1] = bars
    ext[:, -1] = slots
    comps = np.diff(ext, axis=1) - 1
    return comps[::-1]


def simplex_lattice(H: int, m: int) -> list[WeightVector]:
    """All m-component weights with entries in {0/H, ..., H/H} summing to 1.

    Returned in lexicographically descending component order; the list has
    exactly comb(H + m - 1, m - 1) elements.
    """
    if m < 2:
        raise ValueError(f"m must be >= 2, got {m}")
    if H < 1:
        raise ValueError(f"H must be >= 1 for m >= 2 (got H={H})")
    comps = _compositions_desc(H, m)
    # Component values take only H+1 distinct floats; building tuples from
    # cached small ints plus a lookup table keeps large lattices cheap.
    values = [h / H for h in range(H + 1)]
    columns = [[values[h] for h in col] for col in comps.T.tolist()]
    return list(map(WeightVector._trusted, zip(*columns)))


def lattice_degree_for(m: int, n_weights: int) -> int:
    """The H whose simplex lattice has exactly ``n_weights`` vectors."""
    achievable = []
    H = 1
    while True:
        count = comb(H + m - 1, m - 1)
        if count == n_weights:
            return H
        achievable.append(count)
        if count > n_weights:
            raise ValueError(
                f"no simplex lattice of size {n_weights} exists for m={m}; "
                f"achievable sizes start {achievable}"
            )
        H += 1


def distance(u, v, metric: DistanceMetric) -> float:
    """L1 (manhattan) or L2 (euclidean) distance between equal-length vectors."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape or u.ndim != 1:
        raise ValueError(f"vectors must have equal length, got {u.shape} vs {v.shape}")
    metric = DistanceMetric(metric)
    if metric is DistanceMetric.MANHATTAN:
        return float(np.abs(u - v).sum())
    return float(np.linalg.norm(u - v))


def dichotomic_next_weight(records: Sequence[WeightRecord]) -> WeightVector:
    """Weight perpendicular to the widest gap between adjacent stored bests.

    Stored best solutions are sorted by their first cost; among adjacent
    pairs the one with the largest Euclidean distance in objective space
    wins.  For the pair (y, z) with c1(y) > c1(z) the unnormalised weight is
    (c2(y) - c2(z), c1(z) - c1(y)), normalised by its sum, which equalises
    the two weighted energies.  Pairs whose normalised weight leaves [0, 1]
    (a dominated stored point) are skipped in favour of the next-largest
    gap; clamp-and-renormalise is the last resort.
    """
    if len(records) < 2:
        raise ValueError("need at least 2 records")
    for rec in records:
        if len(rec.best.costs) != 2:
            raise ValueError("dichotomic search applies to exactly 2 objectives")
    pts = sorted(rec.best.costs for rec in records)
    gaps = [
        (idx, distance(pts[idx], pts[idx + 1], DistanceMetric.EUCLIDEAN))
        for idx in range(len(pts) - 1)
    ]
    gaps.sort(key=lambda g: (-g[1], g[0]))
    clamp_candidate: tuple[float, float] | None = None
    for idx, _ in gaps:
        z, y = pts[idx], pts[idx + 1]  # ascending sort => c1(y) >= c1(z)
        temp1 = y[1] - z[1]
        temp2 = z[0] - y[0]
        total = temp1 + temp2
        if total == 0.0:
            continue  # identical cost vectors (or exactly cancelling temps)
        lam1, lam2 = temp1 / total, temp2 / total
        if 0.0 <= lam1 <= 1.0 and 0.0 <= lam2 <= 1.0:
            return WeightVector((lam1, lam2))
        if clamp_candidate is None:
            clamp_candidate = (lam1, lam2)
    if clamp_candidate is not None:
        clamped = [min(max(v, 0.0), 1.0) for v in clamp_candidate]
        total = sum(clamped)
        if total > 0.0:
            logger.warning(
                "dichotomic weight %s outside the simplex; clamped and renormalised",
                clamp_candidate,
            )
            return WeightVector(tuple(v / total for v in clamped))
    raise ScalariseError("no progress possible: stored cost vectors are degenerate")


def averages_next_weight(
    records: Sequence[WeightRecord],
    metric: DistanceMetric,
    rng: np.random.Generator | None = None,
) -> WeightVector:
    """Midpoint of the two explored weights whose bests are farthest apart.

    Candidate pairs are ranked by the ``metric`` distance between their best
    cost vectors, largest gap first; ties break towards the earlier pair in
    the lexicographic order of the weight vectors.  A midpoint duplicating
    an already-explored weight (within 1e-9 per component) falls through to
    the next-largest gap; if every candidate midpoint is a duplicate, a
    uniformly random simplex weight is returned (logged).

    Pairing is unrestricted: midpoints of weights from different faces of
    the simplex are what eventually produce weights with no zero component,
    which is where this method earns its keep over a uniform lattice for
    three or more objectives.
    """
    if len(records) < 2:
        raise ValueError("need at least 2 records")
    metric = DistanceMetric(metric)
    order = sorted(range(len(records)), key=lambda i: records[i].weight.lambdas)
    gaps = []
    for a in range(len(order)):
        for b in range(a + 1, len(order)):
            d = distance(
                records[order[a]].best.costs, records[order[b]].best.costs, metric
            )
            gaps.append((d, a, b))
    gaps.sort(key=lambda g: (-g[0], g[1], g[2]))
    explored = [rec.weight.lambdas for rec in records]
    for _, a, b in gaps:
        u = records[order[a]].weight.lambdas
        v = records[order[b]].weight.lambdas
        mid = tuple((x + y) / 2.0 for x, y in zip(u, v))
        duplicate = any(
            all(abs(x - y) <= WEIGHT_DUP_ATOL for x, y in zip(mid, w)) for w in explored
        )
        if not duplicate:
            return WeightVector(mid)
    logger.warning("all candidate midpoints already explored; using a random weight")
    if rng is None:
        rng = np.random.default_rng()
    m = records[0].weight.m
    return WeightVector(tuple(rng.dirichlet(np.ones(m))))


def _random_simplex_weight(rng: np.random.Generator, m: int) -> WeightVector:
    return WeightVector(tuple(rng.dirichlet(np.ones(m))))


def _solve_scalarised(
    instance: MubqpInstance,
    w: WeightVector,
    params: SolverParams,
    seed: int,
    solver: SolverFn,
) -> list[Solution]:
    """One solver call on the aggregated QUBO; solutions carry full cost
    vectors and are sorted ascending by (energy, bits)."""
    q = aggregate(instance, w)
    result = solver(q, replace(params, seed=seed))
    if not result.solutions:
        raise ScalariseError("solver returned no solutions")
    bits = np.stack([sol.bits for sol in result.solutions])
    costs = np.column_stack(
        [evaluate_objective_batch(obj, bits) for obj in instance.objectives]
    )
    energies = costs @ w.as_array()
    order = sorted(range(len(bits)), key=lambda j: (energies[j], bits[j].tobytes()))
    return [
        Solution(bits=bits[j], costs=tuple(costs[j]), energy=float(energies[j]))
        for j in order
    ]


def _fallback_rng(run_seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=mix_seed(run_seed, "fallback")))


def run_uniform(
    instance: MubqpInstance,
    config: ScalariseConfig,
    solver: SolverFn = anneal.solve,
    weight_order: Sequence[int] | None = None,
) -> ParetoArchive:
    """Scalarise with all lattice weights; H is derived from ``n_weights``.

    The per-call solver seed is tied to the weight's lattice coordinates
    rather than the call sequence, so the archive is invariant under
    permutation of the exploration order (``weight_order``).
    """
    if config.method is not Method.UNIFORM:
        raise ValueError(f"config.method is {config.method}, expected uniform")
    H = lattice_degree_for(instance.m, config.n_weights)
    comps = _compositions_desc(H, instance.m)
    lattice = simplex_lattice(H, instance.m)
    order = range(len(lattice)) if weight_order is None else list(weight_order)
    if sorted(order) != list(range(len(lattice))):
        raise ValueError("weight_order must be a permutation of the lattice indices")
    run_seed = config.solver.seed
    archive = ParetoArchive(instance.m)
    for idx in order:
        w = lattice[idx]
        wid = archive.register_weight(w)
        seed = mix_seed(run_seed, "uniform", H, *(int(h) for h in comps[idx]))
        archive.add_all(_solve_scalarised(instance, w, config.solver, seed, solver), wid)
    return archive


def run_dichotomic(
    instance: MubqpInstance,
    config: ScalariseConfig,
    solver: SolverFn = anneal.solve,
) -> ParetoArchive:
    """Adaptive bi-objective scalarisation via dichotomic search.

    The first two calls use the unit weights (1,0) and (0,1); each further
    call derives its weight from the stored best solutions.  A failed
    adaptive step falls back to a random simplex weight (logged) so a run
    never aborts.
    """
    if config.method is not Method.DICHOTOMIC:
        raise ValueError(f"config.method is {config.method}, expected dichotomic")
    if instance.m != 2:
        raise ValueError(f"dichotomic search requires m=2, got m={instance.m}")
    run_seed = config.solver.seed
    rng = _fallback_rng(run_seed)
    initial = simplex_lattice(1, 2)
    archive = ParetoArchive(2)
    records: list[WeightRecord] = []
    for call in range(config.n_weights):
        if call < 2:
            w = initial[call]
        else:
            try:
                w = dichotomic_next_weight(records)
            except ScalariseError as exc:
                logger.warning("dichotomic step failed (%s); using a random weight", exc)
                w = _random_simplex_weight(rng, 2)
        wid = archive.register_weight(w)
        seed = mix_seed(run_seed, "call", call)
        solutions = _solve_scalarised(instance, w, config.solver, seed, solver)
        archive.add_all(solutions, wid)
        records.append(WeightRecord(weight=w, best=solutions[0]))
    return archive


def run_averages(
    instance: MubqpInstance,
    config: ScalariseConfig,
    solver: SolverFn = anneal.solve,
) -> ParetoArchive:
    """Adaptive scalarisation via midpoints of the farthest-apart weights.

    The first m calls use the m unit weights; each further call averages the
    pair of explored weights whose best solutions are farthest apart under
    ``config.distance`` (see averages_next_weight).
    """
    if config.method is not Method.AVERAGES:
        raise ValueError(f"config.method is {config.method}, expected averages")
    if config.n_weights < instance.m:
        raise ValueError(
            f"n_weights must be >= m={instance.m}, got {config.n_weights}"
        )
    run_seed = config.solver.seed
    rng = _fallback_rng(run_seed)
    initial = simplex_lattice(1, instance.m)
    archive = ParetoArchive(instance.m)
    records: list[WeightRecord] = []
    for call in range(config.n_weights):
        if call < instance.m:
            w = initial[call]
        else:
            w = averages_next_weight(records, config.distance, rng=rng)
        wid = archive.register_weight(w)
        seed = mix_seed(run_seed, "call", call)
        solutions = _solve_scalarised(instance, w, config.solver, seed, solver)
        archive.add_all(solutions, wid)
        records.append(WeightRecord(weight=w, best=solutions[0]))
    return archive


def run_method(
    instance: MubqpInstance,
    config: ScalariseConfig,
    solver: SolverFn = anneal.solve,
) -> ParetoArchive:
    """Dispatch to the configured scalarisation strategy."""
    if config.method is Method.UNIFORM:
        return run_uniform(instance, config, solver=solver)
    if config.method is Method.DICHOTOMIC:
        return run_dichotomic(instance, config, solver=solver)
    return run_averages(instance, config, solver=solver)
