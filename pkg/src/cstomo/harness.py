"""Seeded experiment runner: sweeps, the ion-trap emulation, rank scans,
config parsing, and CSV emission.

Reproducibility contract: every row is a pure function of (config, m
value, trial index).  Child random streams are derived as
SeedSequence([master_seed, m_value, trial, stage]) with fixed stage tags,
so regenerating any single row never requires replaying the others.
"""

from __future__ import annotations

import csv
import dataclasses
import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Iterator

import numpy as np

from . import certify as certify_mod
from . import solver as solver_mod
from . import states
from .sampling import (
    KIND_HYBRID,
    KIND_WITH,
    KIND_WITHOUT,
    MeasurementRecord,
    NoiseModel,
    SCHEME_KINDS,
    draw_hybrid,
    draw_uniform,
    measure,
)
from .solver import SolverConfig, SolverResult, svt_solve

log = logging.getLogger("cstomo")

STAGE_STATE = 1
STAGE_SCHEME = 2
STAGE_MEASURE = 3


def child_rng(master_seed: int, m: int, trial: int, stage: int) -> np.random.Generator:
    """Independent stream for one (m, trial, stage) cell of a sweep."""
    return np.random.default_rng(
        np.random.SeedSequence([int(master_seed), int(m), int(trial), int(stage)])
    )


@dataclass(frozen=True)
class ExperimentConfig:
    """One sweep description.  m_values are measurement counts for the
    uniform schemes and mask counts s (so m = s * d) for the hybrid
    scheme.  delta_auto=True sets the solver band per record to
    3 * max per-observable stderr; the value used lands in every row."""

    n: int
    r: int = 1
    gamma: float = 0.0
    noise: NoiseModel = field(default_factory=NoiseModel.exact)
    scheme: str = KIND_WITHOUT
    m_values: tuple[int, ...] = ()
    trials: int = 5
    seed: int = 0
    solver: SolverConfig = field(default_factory=SolverConfig)
    delta_auto: bool = True
    certify_delta2: float | None = None
    certify_mu: float | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be positive, got {self.n}")
        if not 1 <= self.r <= 2**self.n:
            raise ValueError(f"rank must satisfy 1 <= r <= d, got {self.r}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if self.scheme not in SCHEME_KINDS:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if self.seed < 0:
            raise ValueError(f"seed must be nonnegative, got {self.seed}")
        if not self.m_values:
            raise ValueError("m_values must not be empty")
        if (self.certify_delta2 is None) != (self.certify_mu is None):
            raise ValueError("certify needs both delta2 and mu (or neither)")
        if self.certify_delta2 is not None and self.scheme == KIND_HYBRID:
            raise ValueError("purity certification requires a uniform scheme")

    @property
    def d(self) -> int:
        return 1 << self.n

    @property
    def wants_certificate(self) -> bool:
        return self.certify_delta2 is not None


RESULT_FIELDS = (
    "n",
    "r",
    "gamma",
    "noise",
    "scheme",
    "seed",
    "trial",
    "m",
    "m_scaled",
    "fidelity",
    "trace_distance",
    "converged",
    "iterations",
    "max_residual",
    "delta_band",
    "wall_time_seconds",
    "status",
    "purity_estimate",
    "purity_lower",
    "delta1_bound",
    "confidence",
    "cert_valid",
)


@dataclass
class ResultRow:
    n: int
    r: int
    gamma: float
    noise: str
    scheme: str
    seed: int
    trial: int
    m: int
    m_scaled: float | None = None
    fidelity: float | None = None
    trace_distance: float | None = None
    converged: bool | None = None
    iterations: int | None = None
    max_residual: float | None = None
    delta_band: float | None = None
    wall_time_seconds: float | None = None
    status: str = "ok"
    purity_estimate: float | None = None
    purity_lower: float | None = None
    delta1_bound: float | None = None
    confidence: float | None = None
    cert_valid: bool | None = None


def m_scaled(m: int, d: int, r: int) -> float:
    """Theorem-regime x-axis: m / (d r log2(d)^2)."""
    return m / (d * r * math.log2(d) ** 2)


def resolve_delta(cfg: ExperimentConfig, record: MeasurementRecord) -> float:
    if not cfg.delta_auto:
        return cfg.solver.delta_band
    return 3.0 * float(np.max(record.stderr)) if record.m else 0.0


def psd_projection_audit(res: SolverResult, rho_t: np.ndarray) -> None:
    """Check that clipping negatives + renormalizing moved the iterate away
    from the truth by no more than the clipped mass (plus half the raw
    iterate's trace deficit, which the renormalization absorbs); log,
    never raise."""
    td_raw = states.trace_distance(res.sigma_raw, rho_t)
    td_state = states.trace_distance(res.sigma_state, rho_t)
    slack = (
        res.clipped_negative_mass
        + 0.5 * abs(float(np.trace(res.sigma_raw).real) - 1.0)
        + 1e-10
    )
    if td_state > td_raw + slack:
        log.warning(
            "PSD projection audit violated: %.3e > %.3e + %.3e",
            td_state,
            td_raw,
            slack,
        )
    else:
        log.debug(
            "PSD projection audit: td_raw=%.3e td_state=%.3e clipped=%.3e",
            td_raw,
            td_state,
            res.clipped_negative_mass,
        )


def _draw_scheme(cfg: ExperimentConfig, m_value: int, rng):
    if cfg.scheme == KIND_HYBRID:
        return draw_hybrid(cfg.n, m_value, rng)
    return draw_uniform(cfg.n, m_value, cfg.scheme == KIND_WITH, rng)


def run_one(cfg: ExperimentConfig, m_value: int, trial: int) -> ResultRow:
    """Generate, measure, solve, and score a single sweep cell."""
    # m starts as the sweep coordinate so failed rows stay identifiable;
    # successful rows overwrite it with the realized measurement count
    row = ResultRow(
        n=cfg.n,
        r=cfg.r,
        gamma=cfg.gamma,
        noise=cfg.noise.tag(),
        scheme=cfg.scheme,
        seed=cfg.seed,
        trial=trial,
        m=m_value,
    )
    try:
        t0 = time.perf_counter()
        rho_r = states.random_rank_r_state(
            cfg.d, cfg.r, child_rng(cfg.seed, m_value, trial, STAGE_STATE)
        )
        # metrics compare against the depolarized state: that is what the
        # simulated measurements actually probe
        rho_t = states.depolarize(rho_r, cfg.gamma)
        scheme = _draw_scheme(
            cfg, m_value, child_rng(cfg.seed, m_value, trial, STAGE_SCHEME)
        )
        record = measure(
            rho_t, scheme, cfg.noise, child_rng(cfg.seed, m_value, trial, STAGE_MEASURE)
        )
        delta = resolve_delta(cfg, record)
        res = svt_solve(record, replace(cfg.solver, delta_band=delta))
        psd_projection_audit(res, rho_t)
        row.m = scheme.m
        row.m_scaled = m_scaled(scheme.m, cfg.d, cfg.r)
        row.fidelity = states.fidelity(res.sigma_state, rho_t)
        row.trace_distance = states.trace_distance(res.sigma_state, rho_t)
        row.converged = res.converged
        row.iterations = res.iterations
        row.max_residual = res.max_residual
        row.delta_band = delta
        row.wall_time_seconds = time.perf_counter() - t0
        if cfg.wants_certificate:
            cert = certify_mod.certificate(
                record,
                cfg.certify_delta2,
                cfg.certify_mu,
                top_eigenvalue=float(np.linalg.eigvalsh(res.sigma_state)[-1]),
            )
            row.purity_estimate = cert.estimate
            row.purity_lower = cert.purity_lower
            row.delta1_bound = cert.delta1_bound
            row.confidence = cert.confidence
            row.cert_valid = cert.valid
    except Exception as exc:  # a failed row must not kill the sweep
        log.warning("row (m=%s, trial=%s) failed: %s", m_value, trial, exc)
        row.status = f"error: {exc}"
    return row


def run_sweep(cfg: ExperimentConfig) -> Iterator[ResultRow]:
    """Yield one ResultRow per (m value, trial), in canonical order."""
    for m_value in sorted(cfg.m_values):
        for trial in range(cfg.trials):
            yield run_one(cfg, m_value, trial)


def run_experimental_emulation(
    profile: np.ndarray,
    fraction: float,
    stderr_target: float,
    r_approx: int,
    seed: int,
    solver_cfg: SolverConfig | None = None,
) -> ResultRow:
    """Emulate tomography of an approximately-low-rank experimental state.

    Measures floor(fraction * d^2) distinct uniform labels with Born-rule
    sampling calibrated so the per-observable standard deviation is at
    most stderr_target, reconstructs, then scores the best rank-r_approx
    truncation of the result against the profiled state.
    """
    profile = states.validate_profile(profile)
    d = profile.size
    n = d.bit_length() - 1
    if 2**n != d:
        raise ValueError(f"profile length {d} is not a power of two")
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must lie in (0, 1), got {fraction}")
    if stderr_target <= 0:
        raise ValueError(f"stderr_target must be positive, got {stderr_target}")
    m = int(fraction * d * d)
    shots = math.ceil(1.0 / stderr_target**2)
    noise = NoiseModel.born(shots)
    row = ResultRow(
        n=n,
        r=r_approx,
        gamma=0.0,
        noise=noise.tag(),
        scheme=KIND_WITHOUT,
        seed=seed,
        trial=0,
        m=m,
    )
    try:
        t0 = time.perf_counter()
        rho = states.state_from_profile(profile, child_rng(seed, m, 0, STAGE_STATE))
        scheme = draw_uniform(n, m, False, child_rng(seed, m, 0, STAGE_SCHEME))
        record = measure(rho, scheme, noise, child_rng(seed, m, 0, STAGE_MEASURE))
        cfg = solver_cfg or SolverConfig(max_iter=1000, stop_tol=1e-4)
        # band at the per-observable error-bar scale: the wider 3x default
        # underfits shot-noise data badly enough to cost several points of
        # truncated fidelity
        delta = float(np.max(record.stderr))
        res = svt_solve(record, replace(cfg, delta_band=delta))
        psd_projection_audit(res, rho)
        approx = states.best_rank_r(res.sigma_state, r_approx)
        row.m_scaled = m_scaled(m, d, r_approx)
        row.fidelity = states.fidelity(approx, rho)
        row.trace_distance = states.trace_distance(approx, rho)
        row.converged = res.converged
        row.iterations = res.iterations
        row.max_residual = res.max_residual
        row.delta_band = delta
        row.wall_time_seconds = time.perf_counter() - t0
    except Exception as exc:
        log.warning("emulation (seed=%s) failed: %s", seed, exc)
        row.status = f"error: {exc}"
    return row


@dataclass
class RankScanOutcome:
    m: int
    converged: bool
    iterations: int
    max_residual: float


@dataclass
class RankScanResult:
    threshold_m: int | None
    result: SolverResult | None
    trace: list[RankScanOutcome]


def rank_scan(
    record_source: Callable[[int], MeasurementRecord],
    m_schedule: Iterable[int],
    cfg: SolverConfig = SolverConfig(),
) -> RankScanResult:
    """Solve at each m of an increasing schedule; report the first m whose
    solve converges.  Convergence is expected to be monotone in m; any
    later failure after an earlier success is logged as a warning."""
    schedule = list(m_schedule)
    if not schedule:
        raise ValueError("m schedule must not be empty")
    if any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("m schedule must be strictly increasing")
    trace: list[RankScanOutcome] = []
    first: SolverResult | None = None
    threshold: int | None = None
    for m in schedule:
        record = record_source(m)
        res = svt_solve(record, cfg)
        trace.append(
            RankScanOutcome(
                m=m,
                converged=res.converged,
                iterations=res.iterations,
                max_residual=res.max_residual,
            )
        )
        if res.converged and threshold is None:
            threshold = m
            first = res
        elif not res.converged and threshold is not None:
            log.warning(
                "rank scan monotonicity violated: converged at m=%d but not m=%d",
                threshold,
                m,
            )
    return RankScanResult(threshold_m=threshold, result=first, trace=trace)


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if not math.isfinite(value):
            raise ValueError(f"refusing to serialize non-finite value {value}")
        return repr(value)
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def write_rows_csv(rows: Iterable[ResultRow], path, timing: bool = False) -> None:
    """RFC-4180 CSV with the ResultRow schema.

    Wall times are volatile, so the timing column is left empty unless
    explicitly requested; everything else is a deterministic function of
    the config, which keeps default output byte-identical across runs.
    """

    def emit(fh):
        writer = csv.writer(fh)
        writer.writerow(RESULT_FIELDS)
        for row in rows:
            rec = dataclasses.asdict(row)
            if not timing:
                rec["wall_time_seconds"] = None
            writer.writerow([_format_cell(rec[k]) for k in RESULT_FIELDS])

    if hasattr(path, "write"):
        emit(path)
    else:
        with open(path, "w", newline="") as fh:
            emit(fh)


def read_rows_csv(path) -> list[dict]:
    """Parse a sweep CSV back into a list of typed dicts (for plotting)."""

    def convert(key, text):
        if text == "":
            return None
        if key in ("n", "r", "seed", "trial", "m", "iterations"):
            return int(text)
        if key in ("converged", "cert_valid"):
            return text == "true"
        if key in ("noise", "scheme", "status"):
            return text
        return float(text)

    def parse(fh):
        reader = csv.DictReader(fh)
        return [
            {k: convert(k, v) for k, v in line.items()} for line in reader
        ]

    if hasattr(path, "read"):
        return parse(path)
    with open(path, newline="") as fh:
        return parse(fh)


# --- config file parsing -------------------------------------------------

_SOLVER_KEYS = {
    "solver.tau": ("tau", float),
    "solver.delta_band": ("delta_band", float),
    "solver.step": ("step", float),
    "solver.max_iter": ("max_iter", int),
    "solver.rank_guess": ("rank_guess", int),
    "solver.stop_tol": ("stop_tol", float),
    "solver.path": ("path", str),
}


def parse_config(text: str) -> ExperimentConfig:
    """Parse the flat key/value experiment format (# starts a comment).

    Keys are the ExperimentConfig field names; solver.* and certify.*
    address the nested settings.  solver.delta_band accepts "auto".
    """
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key = value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key in entries:
            raise ValueError(f"config line {lineno}: duplicate key {key!r}")
        entries[key] = value

    def pop(key, conv, default=None, required=False):
        if key not in entries:
            if required:
                raise ValueError(f"config is missing required key {key!r}")
            return default
        try:
            return conv(entries.pop(key))
        except ValueError as exc:
            raise ValueError(f"config key {key!r}: {exc}") from exc

    n = pop("n", int, required=True)
    r = pop("r", int, default=1)
    gamma = pop("gamma", float, default=0.0)
    noise = pop("noise", NoiseModel.parse, default=NoiseModel.exact())
    scheme = pop("scheme", str, default=KIND_WITHOUT)
    m_values = pop(
        "m_values",
        lambda s: tuple(int(tok) for tok in s.replace(",", " ").split()),
        required=True,
    )
    trials = pop("trials", int, default=5)
    seed = pop("seed", int, default=0)

    solver_kwargs = {}
    delta_auto = True
    band = entries.pop("solver.delta_band", "auto")
    if band != "auto":
        solver_kwargs["delta_band"] = float(band)
        delta_auto = False
    step = entries.pop("solver.step", "auto")
    if step != "auto":
        solver_kwargs["step"] = float(step)
    for key, (attr, conv) in _SOLVER_KEYS.items():
        if key in ("solver.delta_band", "solver.step"):
            continue
        if key in entries:
            solver_kwargs[attr] = conv(entries.pop(key))
    certify_delta2 = pop("certify.delta2", float)
    certify_mu = pop("certify.mu", float)

    if entries:
        raise ValueError(f"unknown config keys: {sorted(entries)}")
    return ExperimentConfig(
        n=n,
        r=r,
        gamma=gamma,
        noise=noise,
        scheme=scheme,
        m_values=m_values,
        trials=trials,
        seed=seed,
        solver=SolverConfig(**solver_kwargs),
        delta_auto=delta_auto,
        certify_delta2=certify_delta2,
        certify_mu=certify_mu,
    )


def read_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(fh.read())
