"""Replicated simulated annealing for QUBO minimisation.

Software emulation of a digital-annealer-style solver: many independent
Metropolis chains ("replicas") run over single-bit-flip moves with an
exponentially decaying temperature and a dynamic offset that inflates
acceptance after rejected moves.  The merged, deduplicated set of the best
states found is returned, sorted by ascending energy.

Determinism: (Q, params) fully determine the output.  Each replica owns a
counter-based generator keyed by ``seed XOR replica_index``, so results are
identical whether replicas execute serially or concurrently, and the random
stream consumed by a chain is a prefix-stable function of its iteration
count (one (index, uniform) pair per iteration, drawn in row-major blocks).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .qubo import QuboMatrix, Solution, evaluate_objective_batch

_U64 = (1 << 64) - 1

# Iterations per random-draw block.  Each iteration consumes exactly one
# (index, uniform) pair per replica in row-major order, so the chain is
# independent of the block size.
_BLOCK = 4096


@dataclass(frozen=True)
class SolverParams:
    """Annealer parameters; defaults follow the hardware-style preset."""

    t0: float = 1.0e4
    beta: float = 0.2
    interval: int = 1
    offset_rate: float = 1.0e3
    iterations: int = 1_000_000
    replicas: int = 128
    top_k: int = 128
    seed: int = 0

    def __post_init__(self) -> None:
        if self.t0 <= 0:
            raise ValueError(f"t0 must be positive, got {self.t0}")
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"beta must be in (0, 1), got {self.beta}")
        if self.interval < 1:
            raise ValueError(f"interval must be >= 1, got {self.interval}")
        if self.offset_rate < 0:
            raise ValueError(f"offset_rate must be >= 0, got {self.offset_rate}")
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        if self.replicas < 1:
            raise ValueError(f"replicas must be >= 1, got {self.replicas}")
        # Each replica retains at most two states (best-so-far and final).
        if not 1 <= self.top_k <= 2 * self.replicas:
            raise ValueError(
                f"top_k must be in [1, 2*replicas={2 * self.replicas}], got {self.top_k}"
            )


@dataclass
class SolveResult:
    """Ranked solutions plus an optional per-replica diagnostic trace."""

    solutions: list[Solution]
    best_trace: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))

    @property
    def best(self) -> Solution:
        return self.solutions[0]


def temperature_at(params: SolverParams, step: int) -> float:
    """Temperature at iteration ``step``: t0 * (1-beta)^floor(step/interval)."""
    if step < 0:
        raise ValueError(f"step must be non-negative, got {step}")
    return params.t0 * (1.0 - params.beta) ** (step // params.interval)


def metropolis_accept(delta: float, temperature: float, offset: float, u: float) -> bool:
    """Accept iff (delta - offset) <= 0 or u < exp(-(delta - offset)/T)."""
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    if offset < 0:
        raise ValueError(f"offset must be >= 0, got {offset}")
    shifted = delta - offset
    if shifted <= 0:
        return True
    return u < math.exp(-shifted / temperature)


@numba.njit(cache=True, error_model="numpy")
def _anneal_block(
    states,        # (R, n) uint8, in/out
    caches,        # (R, n) f8, in/out: local fields, see qubo.init_field_cache
    energies,      # (R,)   f8, in/out: running energies
    best_energies, # (R,)   f8, in/out
    best_states,   # (R, n) uint8, in/out
    offsets,       # (R,)   f8, in/out: dynamic offsets
    idx,           # (R, L) int64: proposed flip per iteration
    us,            # (R, L) f8: acceptance uniforms
    temps,         # (L,)   f8: temperature schedule for this block
    diag,          # (n,)   f8
    qsym,          # (n, n) f8: Q + Q^T
    offset_rate,   # f8
):
    # Mirrors metropolis_accept with the dynamic offset rule: reset to 0 on
    # acceptance, grow by offset_rate on rejection.  A temperature that has
    # decayed to 0.0 degenerates to greedy descent via IEEE division
    # (-shifted/0 -> -inf, exp -> 0).
    n_replicas, span = idx.shape
    n = qsym.shape[0]
    for t in range(span):
        temp = temps[t]
        for r in range(n_replicas):
            i = idx[r, t]
            s = 1.0 - 2.0 * states[r, i]
            delta = s * caches[r, i] + diag[i]
            shifted = delta - offsets[r]
            if shifted <= 0.0 or us[r, t] < math.exp(-shifted / temp):
                offsets[r] = 0.0
                states[r, i] = 1 - states[r, i]
                for j in range(n):
                    caches[r, j] += s * qsym[i, j]
                energies[r] += delta
                if energies[r] < best_energies[r]:
                    best_energies[r] = energies[r]
                    for j in range(n):
                        best_states[r, j] = states[r, j]
            else:
                offsets[r] += offset_rate


def _replica_generators(seed: int, replicas: int) -> list[np.random.Generator]:
    key = seed & _U64
    return [np.random.Generator(np.random.Philox(key=key ^ r)) for r in range(replicas)]


def solve(Q: QuboMatrix, params: SolverParams) -> SolveResult:
    """Run ``params.replicas`` annealing chains on ``Q`` and merge the results.

    Each chain starts from its own random state, proposes one uniformly
    random bit flip per iteration (evaluated incrementally via the local
    field cache), and applies the metropolis rule with the dynamic offset.
    Per-replica best states and final states are merged, deduplicated by
    bit vector, re-evaluated exactly, sorted by (energy, bits) and truncated
    to ``top_k``.
    """
    n = Q.n
    R = params.replicas
    qsym = np.ascontiguousarray(Q.coeffs + Q.coeffs.T)
    diag = np.ascontiguousarray(np.diag(Q.coeffs))
    gens = _replica_generators(params.seed, R)

    states = np.empty((R, n), dtype=np.uint8)
    for r, gen in enumerate(gens):
        states[r] = gen.random(n) < 0.5
    caches = states.astype(np.float64) @ qsym  # qsym is symmetric
    energies = evaluate_objective_batch(Q, states)
    best_energies = energies.copy()
    best_states = states.copy()
    offsets = np.zeros(R)
    trace = [best_energies.copy()]

    one_minus_beta = 1.0 - params.beta
    raw = np.empty((R, _BLOCK, 2))
    lo = 0
    while lo < params.iterations:
        hi = min(params.iterations, lo + _BLOCK)
        span = hi - lo
        for r, gen in enumerate(gens):
            raw[r, :span] = gen.random((span, 2))
        idx = np.minimum((raw[:, :span, 0] * n).astype(np.int64), n - 1)
        us = np.ascontiguousarray(raw[:, :span, 1])
        decays = np.arange(lo, hi) // params.interval
        temps = params.t0 * np.power(one_minus_beta, decays, dtype=np.float64)
        _anneal_block(
            states, caches, energies, best_energies, best_states, offsets,
            idx, us, temps, diag, qsym, params.offset_rate,
        )
        trace.append(best_energies.copy())
        lo = hi

    # Merge per-replica bests and final states; re-evaluate exactly so the
    # reported energies carry no incremental-update drift.
    candidates = np.concatenate([best_states, states], axis=0)
    exact = evaluate_objective_batch(Q, candidates)
    order = sorted(
        range(len(candidates)), key=lambda j: (exact[j], candidates[j].tobytes())
    )
    solutions: list[Solution] = []
    seen: set[bytes] = set()
    for j in order:
        bits_key = candidates[j].tobytes()
        if bits_key in seen:
            continue
        seen.add(bits_key)
        e = float(exact[j])
        solutions.append(Solution(bits=candidates[j], costs=(e,), energy=e))
        if len(solutions) >= params.top_k:
            break
    return SolveResult(solutions=solutions, best_trace=np.array(trace))
