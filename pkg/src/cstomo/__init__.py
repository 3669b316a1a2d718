"""Compressed-sensing quantum state tomography.

Low-rank density-matrix recovery from a small random subset of Pauli
expectation values: synthetic states, noisy measurement simulation,
singular-value-thresholding reconstruction, near-purity certification,
and a reproducible benchmark harness.
"""

from .pauli import (
    PauliLabel,
    SparsePauliAction,
    apply_pauli,
    dense_matrix,
    expectation,
    index_from_label,
    label_from_index,
    sparse_action,
)
from .sampling import (
    MeasurementRecord,
    NoiseModel,
    SamplingScheme,
    draw_hybrid,
    draw_uniform,
    measure,
    sampling_op_apply,
)
from .states import (
    best_rank_r,
    depolarize,
    fidelity,
    geometric_profile,
    purity,
    random_rank_r_state,
    state_from_profile,
    trace_distance,
)
from .solver import SolverConfig, SolverResult, nuclear_norm, residuals, soft_threshold, svt_solve
from .certify import PurityCertificate, certificate, delta1_bound, purity_estimate
from .harness import (
    ExperimentConfig,
    ResultRow,
    parse_config,
    rank_scan,
    run_experimental_emulation,
    run_sweep,
    write_rows_csv,
)
from .formats import read_dmat, read_mrec, write_dmat, write_mrec

__version__ = "0.1.0"
