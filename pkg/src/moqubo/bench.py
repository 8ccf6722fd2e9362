"""Experiment harness: repeated scalarisation runs, scoring and summaries.

An experiment is a grid of (method, run) cells over one instance.  Every
cell gets a decorrelated seed derived from the base seed, all cells on an
instance are scored against one shared reference point, and results land in
an append-only JSON-lines file plus one CSV per front, so a crashed
experiment resumes by skipping completed cells.
"""

from __future__ import annotations

import json
import logging
import math
import time
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy import stats

from .instances import instance_name, load_instance
from .pareto import ParetoArchive, ReferencePoint, attainment_surface, hypervolume, write_points_csv
from .qubo import MubqpInstance, WeightVector
from .scalarise import (
    DistanceMetric,
    Method,
    ScalariseConfig,
    lattice_degree_for,
    run_method,
)
from .seeding import mix_seed

logger = logging.getLogger(__name__)

SIGNIFICANCE_ALPHA = 0.05

REFERENCE_MARGIN = 1.0

METHOD_LABELS = ("uniform", "dichotomic", "avg-manhattan", "avg-euclidean")


class BenchConfigError(ValueError):
    """Invalid experiment configuration (exit code 1 at the CLI)."""


def method_label(config: ScalariseConfig) -> str:
    if config.method is Method.UNIFORM:
        return "uniform"
    if config.method is Method.DICHOTOMIC:
        return "dichotomic"
    return f"avg-{config.distance.value}"


def scalarise_config_for(label: str, n_weights: int, solver) -> ScalariseConfig:
    """Build the ScalariseConfig matching a CLI method label."""
    if label == "uniform":
        return ScalariseConfig(Method.UNIFORM, n_weights, solver)
    if label == "dichotomic":
        return ScalariseConfig(Method.DICHOTOMIC, n_weights, solver)
    if label == "avg-manhattan":
        return ScalariseConfig(
            Method.AVERAGES, n_weights, solver, distance=DistanceMetric.MANHATTAN
        )
    if label == "avg-euclidean":
        return ScalariseConfig(
            Method.AVERAGES, n_weights, solver, distance=DistanceMetric.EUCLIDEAN
        )
    raise BenchConfigError(
        f"unknown method {label!r}; choose from {', '.join(METHOD_LABELS)}"
    )


@dataclass(frozen=True)
class ExperimentConfig:
    instance_path: Path
    methods: tuple[ScalariseConfig, ...]
    runs: int
    base_seed: int
    output_dir: Path
    reference: ReferencePoint | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "instance_path", Path(self.instance_path))
        object.__setattr__(self, "output_dir", Path(self.output_dir))
        object.__setattr__(self, "methods", tuple(self.methods))
        if self.runs < 1:
            raise BenchConfigError(f"runs must be >= 1, got {self.runs}")
        if not self.methods:
            raise BenchConfigError("methods must be non-empty")
        labels = [method_label(c) for c in self.methods]
        if len(set(labels)) != len(labels):
            raise BenchConfigError(f"duplicate method labels: {labels}")


@dataclass(frozen=True)
class RunReport:
    """One (method, run) cell: what was explored and how it scored."""

    instance: str
    method: str
    run_index: int
    seed: int
    weights: tuple[WeightVector, ...]
    front_costs: tuple[tuple[float, ...], ...]
    front_bits: tuple[str, ...]
    cost_max: tuple[float, ...]
    hv: float
    nd_count: int
    wall_ms: int

    def __post_init__(self) -> None:
        if self.nd_count != len(self.front_costs):
            raise ValueError("nd_count must equal the front size")
        if self.hv < 0:
            raise ValueError("hv must be non-negative")

    def to_json_dict(self) -> dict:
        return {
            "type": "run",
            "instance": self.instance,
            "method": self.method,
            "run": self.run_index,
            "seed": self.seed,
            "weights": [list(w.lambdas) for w in self.weights],
            "front_costs": [list(c) for c in self.front_costs],
            "front_bits": list(self.front_bits),
            "cost_max": list(self.cost_max),
            "hv": self.hv,
            "nd_count": self.nd_count,
            "wall_ms": self.wall_ms,
        }

    @classmethod
    def from_json_dict(cls, record: dict) -> "RunReport":
        return cls(
            instance=record["instance"],
            method=record["method"],
            run_index=record["run"],
            seed=record["seed"],
            weights=tuple(WeightVector(tuple(w)) for w in record["weights"]),
            front_costs=tuple(tuple(c) for c in record["front_costs"]),
            front_bits=tuple(record["front_bits"]),
            cost_max=tuple(record["cost_max"]),
            hv=record["hv"],
            nd_count=record["nd_count"],
            wall_ms=record["wall_ms"],
        )


@dataclass(frozen=True)
class CellFailure:
    method: str
    run_index: int
    message: str


@dataclass
class ExperimentResult:
    reports: list[RunReport]
    failures: list[CellFailure]
    reference: ReferencePoint


def derive_reference_point(uniform_runs: list[RunReport]) -> ReferencePoint:
    """Componentwise maximum cost over the supplied runs' pre-filter unions,
    plus a +1 safety margin so boundary solutions keep nonzero volume."""
    if not uniform_runs:
        raise ValueError("need at least one run report to derive a reference point")
    bounds = np.max([r.cost_max for r in uniform_runs], axis=0) + REFERENCE_MARGIN
    return ReferencePoint(tuple(float(b) for b in bounds))


def _validate_methods(instance: MubqpInstance, config: ExperimentConfig) -> None:
    if not 2 <= instance.m <= 4:
        raise BenchConfigError(
            f"instance has m={instance.m}; hypervolume scoring supports 2 <= m <= 4"
        )
    for cfg in config.methods:
        label = method_label(cfg)
        if cfg.method is Method.DICHOTOMIC and instance.m != 2:
            raise BenchConfigError(f"{label} requires m=2, instance has m={instance.m}")
        if cfg.method is Method.AVERAGES and cfg.n_weights < instance.m:
            raise BenchConfigError(
                f"{label} needs n_weights >= m={instance.m}, got {cfg.n_weights}"
            )
        if cfg.method is Method.UNIFORM:
            try:
                lattice_degree_for(instance.m, cfg.n_weights)
            except ValueError as exc:
                raise BenchConfigError(str(exc)) from None


def _load_report_lines(path: Path) -> tuple[dict | None, list[RunReport]]:
    meta = None
    reports: list[RunReport] = []
    if not path.exists():
        return None, []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            kind = record.get("type")
            if kind == "meta":
                if meta is not None:
                    raise BenchConfigError(f"{path}: duplicate meta record (line {lineno})")
                meta = record
            elif kind == "run":
                reports.append(RunReport.from_json_dict(record))
            elif kind == "error":
                continue  # failed cells are retried on resume
            else:
                raise BenchConfigError(f"{path}: unknown record type {kind!r} (line {lineno})")
    if reports and meta is None:
        raise BenchConfigError(f"{path}: run records without a meta record")
    return meta, reports


def _append_line(path: Path, record: dict) -> None:
    with open(path, "a", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(record, sort_keys=True) + "\n")


@dataclass
class _PendingCell:
    method: str
    run_index: int
    seed: int
    archive: ParetoArchive
    wall_ms: int


def _execute_cell(
    instance: MubqpInstance,
    cfg: ScalariseConfig,
    label: str,
    run_index: int,
    base_seed: int,
) -> _PendingCell:
    seed = mix_seed(base_seed, label, run_index)
    cell_cfg = replace(cfg, solver=replace(cfg.solver, seed=seed))
    started = time.perf_counter()
    archive = run_method(instance, cell_cfg)
    wall_ms = int(round((time.perf_counter() - started) * 1000))
    return _PendingCell(label, run_index, seed, archive, wall_ms)


def _score_cell(
    cell: _PendingCell, name: str, reference: ReferencePoint
) -> RunReport:
    entries = cell.archive.finalize()
    front_costs = tuple(e.solution.costs for e in entries)
    front_bits = tuple("".join(str(int(b)) for b in e.solution.bits) for e in entries)
    hv = hypervolume(np.array(front_costs), reference) if front_costs else 0.0
    return RunReport(
        instance=name,
        method=cell.method,
        run_index=cell.run_index,
        seed=cell.seed,
        weights=tuple(cell.archive.weights),
        front_costs=front_costs,
        front_bits=front_bits,
        cost_max=tuple(float(c) for c in cell.archive.cost_max),
        hv=float(hv),
        nd_count=len(front_costs),
        wall_ms=cell.wall_ms,
    )


def _front_csv_path(output_dir: Path, method: str, run_index: int) -> Path:
    return output_dir / "fronts" / f"{method}_run{run_index:03d}.csv"


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Execute every (method, run) cell, score against a shared reference.

    The reference point is taken from the config if given, from the resumed
    meta record otherwise, and failing that is derived from the uniform
    method's runs (from all runs when no uniform method is configured).
    Per-cell errors are recorded and the experiment continues.
    """
    instance = load_instance(config.instance_path)
    name = instance_name(config.instance_path)
    _validate_methods(instance, config)

    output_dir = config.output_dir
    (output_dir / "fronts").mkdir(parents=True, exist_ok=True)
    reports_path = output_dir / "reports.jsonl"
    meta, resumed = _load_report_lines(reports_path)

    if meta is not None:
        if meta.get("instance") != name:
            raise BenchConfigError(
                f"{reports_path} holds runs for instance {meta.get('instance')!r}, "
                f"not {name!r}"
            )
        if meta.get("base_seed") != config.base_seed:
            raise BenchConfigError(
                f"{reports_path} was produced with base_seed={meta.get('base_seed')}, "
                f"got {config.base_seed}"
            )
    reference = config.reference
    if reference is None and meta is not None:
        reference = ReferencePoint(tuple(meta["reference"]))
    elif reference is not None and meta is not None:
        stored = tuple(meta["reference"])
        if stored != reference.bounds:
            raise BenchConfigError(
                f"{reports_path} was scored against reference {stored}, "
                f"got {reference.bounds}"
            )

    completed = {(r.method, r.run_index) for r in resumed}
    labels = [method_label(c) for c in config.methods]
    by_label = dict(zip(labels, config.methods))

    # When the reference must be derived, uniform cells run first (or all
    # cells, when no uniform method is configured).
    if reference is None:
        blocking = ["uniform"] if "uniform" in labels else list(labels)
    else:
        blocking = []
    ordered = [lab for lab in labels if lab in blocking] + [
        lab for lab in labels if lab not in blocking
    ]

    def write_meta(ref: ReferencePoint) -> None:
        _append_line(
            reports_path,
            {
                "type": "meta",
                "instance": name,
                "m": instance.m,
                "base_seed": config.base_seed,
                "reference": list(ref.bounds),
            },
        )

    reports: list[RunReport] = list(resumed)
    failures: list[CellFailure] = []
    pending: list[_PendingCell] = []
    meta_written = meta is not None
    if reference is not None and not meta_written:
        write_meta(reference)
        meta_written = True

    def flush(cell: _PendingCell) -> None:
        report = _score_cell(cell, name, reference)
        write_points_csv(
            _front_csv_path(output_dir, cell.method, cell.run_index),
            np.array(report.front_costs, dtype=np.float64).reshape(-1, instance.m),
        )
        _append_line(reports_path, report.to_json_dict())
        reports.append(report)
        logger.info(
            "%s run %d: hv=%.6g nd=%d (%d ms)",
            cell.method,
            cell.run_index,
            report.hv,
            report.nd_count,
            cell.wall_ms,
        )

    for label in ordered:
        cfg = by_label[label]
        for run_index in range(config.runs):
            if (label, run_index) in completed:
                continue
            try:
                cell = _execute_cell(instance, cfg, label, run_index, config.base_seed)
            except Exception as exc:  # noqa: BLE001 - cell errors must not abort
                logger.error("%s run %d failed: %s", label, run_index, exc)
                failures.append(CellFailure(label, run_index, str(exc)))
                _append_line(
                    reports_path,
                    {"type": "error", "method": label, "run": run_index, "message": str(exc)},
                )
                continue
            if reference is None:
                pending.append(cell)
            else:
                flush(cell)
        if reference is None and blocking and label == blocking[-1]:
            basis = [_score_interim(c) for c in pending]
            if not basis:
                raise BenchConfigError(
                    "cannot derive a reference point: no successful runs to derive it from"
                )
            reference = derive_reference_point(basis)
            write_meta(reference)
            meta_written = True
            for cell in pending:
                flush(cell)
            pending.clear()

    if reference is None:
        raise BenchConfigError(
            "cannot derive a reference point: no successful runs to derive it from"
        )
    return ExperimentResult(reports=reports, failures=failures, reference=reference)


def _score_interim(cell: _PendingCell) -> RunReport:
    # Reference-free stand-in used only to pool cost bounds before the
    # shared reference point exists.
    return RunReport(
        instance="",
        method=cell.method,
        run_index=cell.run_index,
        seed=cell.seed,
        weights=tuple(cell.archive.weights),
        front_costs=(),
        front_bits=(),
        cost_max=tuple(float(c) for c in cell.archive.cost_max),
        hv=0.0,
        nd_count=0,
        wall_ms=cell.wall_ms,
    )


@dataclass(frozen=True)
class SummaryRow:
    method: str
    runs: int
    mean_hv: float
    std_hv: float
    mean_nd: float
    std_nd: float
    p_value: float | None
    verdict: str  # "best" | "not-worse" | "worse" | "n/a"


@dataclass(frozen=True)
class Summary:
    instance: str
    rows: tuple[SummaryRow, ...]

    def to_text(self) -> str:
        header = f"{'method':<16}{'runs':>5}{'mean HV':>14}{'std HV':>12}{'mean #ND':>10}{'std #ND':>9}{'p':>9}  verdict"
        lines = [f"instance: {self.instance}", header, "-" * len(header)]
        for row in self.rows:
            p = f"{row.p_value:.3g}" if row.p_value is not None else "-"
            lines.append(
                f"{row.method:<16}{row.runs:>5}{row.mean_hv:>14.6g}{row.std_hv:>12.4g}"
                f"{row.mean_nd:>10.2f}{row.std_nd:>9.2f}{p:>9}  {row.verdict}"
            )
        return "\n".join(lines)

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("method,runs,mean_hv,std_hv,mean_nd,std_nd,p_value,verdict\n")
            for row in self.rows:
                p = repr(row.p_value) if row.p_value is not None else ""
                fh.write(
                    f"{row.method},{row.runs},{row.mean_hv!r},{row.std_hv!r},"
                    f"{row.mean_nd!r},{row.std_nd!r},{p},{row.verdict}\n"
                )


def _welch_p(a: np.ndarray, b: np.ndarray) -> float:
    """Two-sided Welch p-value with an exact-equality shortcut for the
    zero-variance case (where the t statistic is undefined)."""
    if np.ptp(a) == 0.0 and np.ptp(b) == 0.0:
        return 1.0 if a[0] == b[0] else 0.0
    with warnings.catch_warnings():
        # Near-identical samples trip scipy's catastrophic-cancellation
        # warning; the resulting p is still the right verdict here.
        warnings.simplefilter("ignore", RuntimeWarning)
        return float(stats.ttest_ind(a, b, equal_var=False).pvalue)


def summarize(reports: list[RunReport]) -> Summary:
    """Per-method mean/std of HV and #ND with best-mean significance marks.

    Each method is compared against the best-mean method with a two-sided
    Welch t-test at alpha=0.05; "not-worse" marks methods that are not
    significantly different from the best.  Marks are suppressed ("n/a")
    when either sample has fewer than 2 runs.
    """
    if not reports:
        raise ValueError("no reports to summarize")
    instances = {r.instance for r in reports}
    if len(instances) != 1:
        raise ValueError(f"reports mix instances: {sorted(instances)}")
    methods: list[str] = []
    for r in reports:
        if r.method not in methods:
            methods.append(r.method)
    hv = {m: np.array([r.hv for r in reports if r.method == m]) for m in methods}
    nd = {m: np.array([r.nd_count for r in reports if r.method == m], dtype=float) for m in methods}
    means = {m: float(hv[m].mean()) for m in methods}
    best_mean = max(means.values())
    best_method = next(m for m in methods if means[m] == best_mean)

    rows = []
    for m in methods:
        sample = hv[m]
        runs = sample.size
        std_hv = float(sample.std(ddof=1)) if runs >= 2 else math.nan
        std_nd = float(nd[m].std(ddof=1)) if runs >= 2 else math.nan
        if means[m] == best_mean:
            verdict, p_value = "best", None
        elif runs < 2 or hv[best_method].size < 2:
            verdict, p_value = "n/a", None
        else:
            p = _welch_p(sample, hv[best_method])
            verdict = "not-worse" if p >= SIGNIFICANCE_ALPHA else "worse"
            p_value = p
        rows.append(
            SummaryRow(
                method=m,
                runs=runs,
                mean_hv=means[m],
                std_hv=std_hv,
                mean_nd=float(nd[m].mean()),
                std_nd=std_nd,
                p_value=p_value,
                verdict=verdict,
            )
        )
    return Summary(instance=instances.pop(), rows=tuple(rows))


EAF_LEVEL_NAMES = ("best", "median", "worst")


def export_eaf(reports: list[RunReport], output_dir) -> dict[str, Path]:
    """Write best/median/worst attainment surfaces of one method's runs.

    Levels 1, ceil(r/2) and r over the r run fronts; one CSV per level,
    named ``eaf_<method>_<best|median|worst>.csv``.
    """
    if not reports:
        raise ValueError("empty report list")
    methods = {r.method for r in reports}
    if len(methods) != 1:
        raise ValueError(f"reports must come from one method, got {sorted(methods)}")
    widths = {len(c) for r in reports for c in r.front_costs}
    if widths - {2}:
        raise ValueError("attainment surfaces require exactly 2 objectives")
    method = methods.pop()
    fronts = [np.array(r.front_costs, dtype=np.float64).reshape(-1, 2) for r in reports]
    r = len(fronts)
    levels = {"best": 1, "median": math.ceil(r / 2), "worst": r}
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}
    for label in EAF_LEVEL_NAMES:
        surface = attainment_surface(fronts, levels[label])
        path = output_dir / f"eaf_{method}_{label}.csv"
        write_points_csv(path, surface)
        paths[label] = path
    return paths
