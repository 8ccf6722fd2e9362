"""Multi-objective QUBO toolkit.

Converts multi-objective unconstrained binary quadratic programs into
single-objective QUBOs via weighted-sum scalarisation, solves them with a
replicated simulated annealer, and compares uniform against adaptive weight
generation using hypervolume, attainment surfaces and non-dominated counts.
"""

from .anneal import SolverParams, SolveResult, metropolis_accept, solve, temperature_at
from .bench import (
    BenchConfigError,
    ExperimentConfig,
    ExperimentResult,
    RunReport,
    Summary,
    derive_reference_point,
    export_eaf,
    run_experiment,
    summarize,
)
from .instances import (
    InstanceFingerprint,
    InstanceFormatError,
    InstanceHeader,
    corpus_filename,
    corpus_fingerprint,
    generate_instance,
    load_instance,
    parse_instance,
    save_instance,
    write_instance,
)
from .pareto import (
    ArchiveEntry,
    ParetoArchive,
    ReferencePoint,
    attainment_surface,
    dominates,
    filter_nondominated,
    hypervolume,
    write_points_csv,
)
from .qubo import (
    MubqpInstance,
    QuboMatrix,
    Solution,
    WeightVector,
    aggregate,
    apply_flip,
    delta_energy,
    evaluate_energy,
    evaluate_objective,
    evaluate_objective_batch,
    init_field_cache,
)
from .scalarise import (
    DistanceMetric,
    Method,
    ScalariseConfig,
    ScalariseError,
    WeightRecord,
    averages_next_weight,
    dichotomic_next_weight,
    distance,
    run_averages,
    run_dichotomic,
    run_method,
    run_uniform,
    simplex_lattice,
)

__version__ = "0.1.0"
