"""Read, write and generate mUBQP instance files.

File format (mocobench-style):

* comment lines start with ``c``;
* one problem line ``p MUBQP <rho> <m> <n> <density>``;
* exactly n*n data lines, each holding m whitespace-separated coefficients,
  row-major over the index pairs (i, j).

Generated instances share one sparsity pattern across all m objectives (a
zero position is zero in every matrix) and draw nonzero coefficient vectors
from a Gaussian copula over uniform integer marginals in [-R, R], tuned so
the empirical pairwise Pearson correlation matches the requested rho.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import ndtr

from .qubo import MubqpInstance, QuboMatrix

PROBLEM_TAG = "MUBQP"

DEFAULT_COEFF_RANGE = 100


class InstanceFormatError(ValueError):
    """Malformed instance file; the message carries the offending line."""


@dataclass(frozen=True)
class InstanceHeader:
    rho: float
    m: int
    n: int
    density: float
    name: str = ""

    def __post_init__(self) -> None:
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if not 0.0 < self.density <= 1.0:
            raise ValueError(f"density must be in (0, 1], got {self.density}")
        if not -1.0 <= self.rho <= 1.0:
            raise ValueError(f"rho must be in [-1, 1], got {self.rho}")


def corpus_filename(rho: float, m: int, n: int, density: float, index: int = 0) -> str:
    """Conventional instance name ``<rho>_<m>_<n>_<density>_<index>``."""
    return f"{float(rho)}_{m}_{n}_{float(density)}_{index}"


def _parse_problem_line(tokens: list[str], lineno: int) -> InstanceHeader:
    if len(tokens) != 6 or tokens[1].upper() != PROBLEM_TAG:
        raise InstanceFormatError(
            f"line {lineno}: problem line must be 'p {PROBLEM_TAG} <rho> <m> <n> <density>'"
        )
    try:
        rho = float(tokens[2])
        m = int(tokens[3])
        n = int(tokens[4])
        density = float(tokens[5])
    except ValueError as exc:
        raise InstanceFormatError(f"line {lineno}: non-numeric problem token ({exc})") from None
    try:
        return InstanceHeader(rho=rho, m=m, n=n, density=density)
    except ValueError as exc:
        raise InstanceFormatError(f"line {lineno}: {exc}") from None


def parse_instance(stream) -> MubqpInstance:
    """Parse an instance from a text stream (file object or line iterable)."""
    header: InstanceHeader | None = None
    rows: list[list[str]] = []
    linenos: list[int] = []
    for lineno, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("p"):
            if header is not None:
                raise InstanceFormatError(f"line {lineno}: duplicate problem line")
            header = _parse_problem_line(line.split(), lineno)
            continue
        if header is None:
            raise InstanceFormatError(f"line {lineno}: data before the problem line")
        rows.append(line.split())
        linenos.append(lineno)
    if header is None:
        raise InstanceFormatError("missing problem line 'p MUBQP ...'")
    expected = header.n * header.n
    if len(rows) != expected:
        raise InstanceFormatError(f"expected {expected} data lines, found {len(rows)}")
    for row, lineno in zip(rows, linenos):
        if len(row) != header.m:
            raise InstanceFormatError(
                f"line {lineno}: expected {header.m} coefficients, found {len(row)}"
            )
    try:
        values = np.array(rows, dtype=np.float64)
    except ValueError:
        for row, lineno in zip(rows, linenos):
            for token in row:
                try:
                    float(token)
                except ValueError:
                    raise InstanceFormatError(
                        f"line {lineno}: non-numeric coefficient {token!r}"
                    ) from None
        raise
    coeffs = values.reshape(header.n, header.n, header.m).transpose(2, 0, 1)
    objectives = tuple(QuboMatrix(coeffs[k]) for k in range(header.m))
    return MubqpInstance(
        m=header.m,
        n=header.n,
        rho=header.rho,
        density=header.density,
        objectives=objectives,
    )


def _format_value(v: float) -> str:
    # Integers stay compact; anything else uses repr, which round-trips
    # float64 exactly.
    return str(int(v)) if v.is_integer() else repr(v)


def write_instance(instance: MubqpInstance, stream) -> None:
    """Inverse of parse_instance: parse(write(x)) == x bit-exactly."""
    stream.write(
        f"c mUBQP instance: m={instance.m} n={instance.n} "
        f"rho={instance.rho} density={instance.density}\n"
    )
    stream.write(
        f"p {PROBLEM_TAG} {instance.rho!r} {instance.m} {instance.n} "
        f"{instance.density!r}\n"
    )
    stacked = np.stack([q.coeffs for q in instance.objectives], axis=-1)
    flat = stacked.reshape(instance.n * instance.n, instance.m)
    chunk: list[str] = []
    for row in flat:
        chunk.append(" ".join(_format_value(float(v)) for v in row))
        if len(chunk) >= 10_000:
            stream.write("\n".join(chunk) + "\n")
            chunk.clear()
    if chunk:
        stream.write("\n".join(chunk) + "\n")


def load_instance(path) -> MubqpInstance:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_instance(fh)


def save_instance(instance: MubqpInstance, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        write_instance(instance, fh)


def instance_name(path) -> str:
    return Path(path).name.removesuffix(".dat").removesuffix(".txt")


def generate_instance(
    n: int,
    m: int,
    rho: float,
    density: float,
    coeff_range: int = DEFAULT_COEFF_RANGE,
    seed: int = 0,
) -> MubqpInstance:
    """Synthesise an instance with target correlation rho and density d.

    Every index pair is nonzero with probability ``density`` (one shared
    pattern across objectives); nonzero coefficient vectors are correlated
    uniform integers in [-coeff_range, coeff_range].  The Gaussian copula
    uses the rank correlation 2*sin(pi*rho/6) so the Pearson correlation of
    the uniform marginals lands on rho; all-zero draws are redrawn so the
    realised sparsity pattern is exactly the sampled one.  Deterministic
    for a given seed.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if m < 2:
        raise ValueError(f"m must be >= 2, got {m}")
    if not 0.0 < density <= 1.0:
        raise ValueError(f"density must be in (0, 1], got {density}")
    if not -1.0 <= rho <= 1.0:
        raise ValueError(f"rho must be in [-1, 1], got {rho}")
    if coeff_range < 1:
        raise ValueError(f"coeff_range must be >= 1, got {coeff_range}")
    psd_bound = -1.0 / (m - 1)
    if rho < psd_bound - 1e-12:
        raise ValueError(
            f"rho={rho} is infeasible for m={m}: the equicorrelation matrix is "
            f"positive semidefinite only for rho >= -1/(m-1) = {psd_bound:.6g}"
        )

    rng = np.random.default_rng(seed)
    mask = rng.random((n, n)) < density
    k = int(mask.sum())

    rho_z = min(max(2.0 * math.sin(math.pi * rho / 6.0), psd_bound), 1.0)
    sigma = np.full((m, m), rho_z)
    np.fill_diagonal(sigma, 1.0)
    eigvals, eigvecs = np.linalg.eigh(sigma)
    transform = eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))

    levels = 2 * coeff_range + 1

    def draw(count: int) -> np.ndarray:
        z = rng.standard_normal((count, m)) @ transform.T
        u = ndtr(z)
        c = np.floor(u * levels).astype(np.int64) - coeff_range
        return np.clip(c, -coeff_range, coeff_range)

    values = draw(k)
    while True:
        zero_rows = np.nonzero((values == 0).all(axis=1))[0]
        if zero_rows.size == 0:
            break
        values[zero_rows] = draw(zero_rows.size)

    coeffs = np.zeros((m, n, n), dtype=np.float64)
    coeffs[:, mask] = values.T
    objectives = tuple(QuboMatrix(coeffs[j]) for j in range(m))
    return MubqpInstance(m=m, n=n, rho=rho, density=density, objectives=objectives)


@dataclass(frozen=True)
class InstanceFingerprint:
    """Summary statistics of an instance, for sanity checks and tooling."""

    n: int
    m: int
    rho: float
    density: float
    empirical_density: float
    correlations: tuple[tuple[tuple[int, int], float], ...]
    coeff_min: float
    coeff_max: float

    def summary(self) -> str:
        lines = [
            f"n={self.n} m={self.m} rho={self.rho} density={self.density}",
            f"empirical density: {self.empirical_density:.4f}",
            f"coefficient range: [{self.coeff_min:g}, {self.coeff_max:g}]",
        ]
        for (a, b), r in self.correlations:
            lines.append(f"corr(c{a + 1}, c{b + 1}) = {r:+.4f}")
        return "\n".join(lines)


def corpus_fingerprint(instance: MubqpInstance) -> InstanceFingerprint:
    """Empirical density, pairwise correlations and coefficient bounds.

    Correlations are Pearson coefficients over the nonzero positions only
    (positions where at least one objective carries a nonzero coefficient).
    """
    stacked = np.stack([q.coeffs for q in instance.objectives])
    mask = (stacked != 0).any(axis=0)
    values = stacked[:, mask]
    correlations: list[tuple[tuple[int, int], float]] = []
    if values.shape[1] >= 2:
        corr = np.corrcoef(values)
        for a in range(instance.m):
            for b in range(a + 1, instance.m):
                correlations.append(((a, b), float(corr[a, b])))
    coeff_min = float(values.min()) if values.size else 0.0
    coeff_max = float(values.max()) if values.size else 0.0
    return InstanceFingerprint(
        n=instance.n,
        m=instance.m,
        rho=instance.rho,
        density=instance.density,
        empirical_density=float(mask.mean()),
        correlations=tuple(correlations),
        coeff_min=coeff_min,
        coeff_max=coeff_max,
    )
