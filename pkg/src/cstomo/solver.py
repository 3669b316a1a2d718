"""Density-matrix reconstruction by singular value thresholding.

Solves the trace-norm-regularized proxy program

    min_sigma  tau ||sigma||_tr + ||sigma||_F^2 / 2
    s.t.       |tr(sigma w(A_i)) - b_i| <= delta,   tr sigma = 1

by Uzawa dual ascent: alternate an eigenvalue soft-threshold of the dual
combination M(y) = sum_i y_i w(A_i) with a gradient step on the banded
constraint residuals.  With delta = 0 and tau large this is the standard
proxy for trace-norm minimization under the measured constraints.

The constraint set is the measured labels plus an always-appended identity
constraint with target 1, so the unit-trace condition never depends on
whether the identity was drawn.  Exact duplicate labels (possible in
with-replacement schemes) are merged with averaged targets before
iterating: the dual operator A A* then equals d times the identity, which
is what makes the default step 1.5/d safe.

Failure to converge within the iteration cap is a meaningful outcome (it
is the empirical signal that too few observables were measured) and is
reported, never raised.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg

from .sampling import KIND_HYBRID, MeasurementRecord, PauliGroups

# Residuals beyond this magnitude abort the iteration as divergent.
_BLOWUP = 1e8


@dataclass(frozen=True)
class SolverConfig:
    """Tuning for svt_solve.

    step=None means the default 1.5/d, derived from ||A A*|| = d for
    orthogonal Pauli constraints (the safe range is (0, 2/d)).  path
    "auto" resolves to the sparse route for hybrid schemes and the dense
    route otherwise.
    """

    tau: float = 5.0
    delta_band: float = 0.0
    step: float | None = None
    max_iter: int = 5000
    rank_guess: int = 10
    stop_tol: float = 1e-7
    path: str = "auto"

    def validate(self, d: int) -> float:
        """Check invariants against a concrete dimension; return the step."""
        if self.tau <= 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.delta_band < 0:
            raise ValueError(f"delta_band must be >= 0, got {self.delta_band}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.rank_guess < 1:
            raise ValueError(f"rank_guess must be >= 1, got {self.rank_guess}")
        if self.stop_tol <= 0:
            raise ValueError(f"stop_tol must be positive, got {self.stop_tol}")
        if self.path not in ("auto", "dense", "sparse"):
            raise ValueError(f"unknown path {self.path!r}")
        step = 1.5 / d if self.step is None else self.step
        if not 0 < step < 2.0 / d:
            raise ValueError(f"step must lie in (0, 2/d) = (0, {2.0 / d}), got {step}")
        return step


@dataclass
class SolverResult:
    sigma_raw: np.ndarray
    sigma_state: np.ndarray
    iterations: int
    max_residual: float
    converged: bool
    residual_history: np.ndarray
    spectrum: np.ndarray
    status: str  # converged | max_iter | diverged
    clipped_negative_mass: float
    wall_time_seconds: float


def soft_threshold(M: np.ndarray, tau: float) -> np.ndarray:
    """prox of tau * nuclear norm at Hermitian M: shrink eigenvalues toward 0.

    Solves min_S tau ||S||_tr + ||S - M||_F^2 / 2 over Hermitian S; for
    Hermitian input the singular values are |eigenvalues| and shrinking in
    the eigenbasis preserves Hermiticity.
    """
    lam, V = np.linalg.eigh(M)
    s = np.sign(lam) * np.maximum(np.abs(lam) - tau, 0.0)
    out = (V * s) @ V.conj().T
    return 0.5 * (out + out.conj().T)


def nuclear_norm(M: np.ndarray) -> float:
    """Sum of absolute eigenvalues of a Hermitian matrix."""
    M = np.asarray(M)
    scale = max(1.0, float(np.abs(M).max()) if M.size else 1.0)
    if np.max(np.abs(M - M.conj().T)) > 1e-10 * scale:
        raise ValueError("nuclear_norm expects a Hermitian matrix")
    return float(np.sum(np.abs(np.linalg.eigvalsh(M))))


def residuals(sigma: np.ndarray, record: MeasurementRecord) -> np.ndarray:
    """Constraint audit: tr(sigma w(A_i)) - b_i per label, then tr(sigma) - 1.

    Length m + 1; the identity residual sits at the end.
    """
    scheme = record.scheme
    d = scheme.d
    sigma = np.asarray(sigma)
    if sigma.shape != (d, d):
        raise ValueError(f"matrix shape {sigma.shape} != ({d}, {d})")
    t = np.real(PauliGroups(scheme).traces(sigma))
    return np.append(t - record.values, np.trace(sigma).real - 1.0)


def _merged_constraints(record: MeasurementRecord):
    """Measured labels + appended identity, exact duplicates averaged.

    The identity target is pinned to 1 regardless of any recorded identity
    estimate: tr sigma = 1 is a hard constraint of the program, not data.
    """
    idx = np.append(record.scheme.indices, 0)
    b = np.append(record.values, 1.0)
    uniq, inverse = np.unique(idx, return_inverse=True)
    counts = np.bincount(inverse)
    b_merged = np.bincount(inverse, weights=b) / counts
    if uniq[0] == 0:
        b_merged[0] = 1.0
    return uniq, b_merged


def _shrink(r: np.ndarray, delta: float) -> np.ndarray:
    if delta == 0.0:
        return r
    return np.sign(r) * np.maximum(np.abs(r) - delta, 0.0)


class _DenseEig:
    def __init__(self, groups: PauliGroups):
        self.groups = groups

    def threshold(self, cols: np.ndarray, tau: float):
        M = self.groups.to_dense(cols)
        lam, V = np.linalg.eigh(M)
        s = np.sign(lam) * np.maximum(np.abs(lam) - tau, 0.0)
        nz = np.flatnonzero(s)
        return V[:, nz], s[nz]


class _SparseEig:
    """Partial eigendecomposition of the sparsely materialized M(y).

    Tracks the post-threshold rank of the previous iterate and requests a
    few more eigenpairs than that, growing until the smallest returned
    magnitude falls below tau (proof that no shrink-surviving eigenvalue
    was missed).  The previous dominant eigenvector warm-starts ARPACK.
    Falls back to a dense solve for small dimensions or if ARPACK stalls.
    """

    def __init__(self, groups: PauliGroups, rank_guess: int, v0: np.ndarray):
        self.groups = groups
        self.k = rank_guess
        self.v0 = v0
        self.dense_floor = 32  # ARPACK overhead beats eigh below this

    def _dense(self, cols, tau):
        return _DenseEig(self.groups).threshold(cols, tau)

    def threshold(self, cols: np.ndarray, tau: float):
        d = self.groups.d
        if d <= self.dense_floor:
            return self._dense(cols, tau)
        M = self.groups.to_sparse(cols)
        k = min(max(self.k, 2), d - 2)
        while True:
            try:
                lam, V = scipy.sparse.linalg.eigsh(
                    M, k=k, which="LM", v0=self.v0, tol=1e-12
                )
            except scipy.sparse.linalg.ArpackNoConvergence:
                return self._dense(cols, tau)
            if np.min(np.abs(lam)) < tau or k >= d - 2:
                break
            k = min(2 * k, d - 2)
        if np.min(np.abs(lam)) >= tau:
            return self._dense(cols, tau)
        self.v0 = V[:, np.argmax(np.abs(lam))]
        s = np.sign(lam) * np.maximum(np.abs(lam) - tau, 0.0)
        nz = np.flatnonzero(s)
        self.k = max(len(nz) + 4, 2)
        return V[:, nz], s[nz]


def _finalize(V, s, d):
    if len(s) == 0:
        return np.zeros((d, d), dtype=complex)
    raw = (V * s) @ V.conj().T
    return 0.5 * (raw + raw.conj().T)


def svt_solve(record: MeasurementRecord, cfg: SolverConfig = SolverConfig()) -> SolverResult:
    """Reconstruct a density matrix from a measurement record.

    Returns both sigma_raw (the final iterate, possibly slightly non-PSD)
    and sigma_state (negative eigenvalues clipped, trace renormalized).
    converged=False after max_iter is a regular result, not an error.
    """
    t_start = time.perf_counter()
    scheme = record.scheme
    d = scheme.d
    step = cfg.validate(d)
    path = cfg.path
    if path == "auto":
        path = "sparse" if scheme.kind == KIND_HYBRID else "dense"

    idx, b = _merged_constraints(record)
    groups = PauliGroups(scheme.n, idx)
    rng = np.random.default_rng(0x5712)
    v0 = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    eig = (
        _SparseEig(groups, cfg.rank_guess, v0)
        if path == "sparse"
        else _DenseEig(groups)
    )

    delta = cfg.delta_band
    history: list[float] = []
    y = np.zeros(idx.size)
    V = np.zeros((d, 0))
    s = np.zeros(0)
    iterations = 0
    status = "max_iter"
    max_residual = float(np.max(np.abs(b)))

    # Fast-forward the flat start: while sigma(y) = 0 the residual is b and
    # every update adds step * shrink(b, delta), so y after j such steps is
    # known in closed form.  Jump to the last j where the top eigenvalue of
    # M(y_j) still sits below tau; this is exact, not an approximation.
    b_shrunk = _shrink(b, delta)
    if max_residual <= delta + cfg.stop_tol:
        status = "converged"
    elif np.any(b_shrunk):
        cols1 = groups.accumulate(b_shrunk)
        if d <= 64 or path == "dense":
            top1 = float(np.max(np.abs(np.linalg.eigvalsh(groups.to_dense(cols1)))))
        else:
            top1 = float(
                np.abs(
                    scipy.sparse.linalg.eigsh(
                        groups.to_sparse(cols1),
                        k=1,
                        which="LM",
                        v0=v0,
                        return_eigenvectors=False,
                    )
                )[0]
            )
        skip = int(cfg.tau / (step * top1)) if top1 > 0 else 0
        skip = min(skip, cfg.max_iter)
        if skip:
            y = skip * step * b_shrunk
            iterations = skip
            history.extend([max_residual] * skip)

    while status == "max_iter" and iterations < cfg.max_iter:
        cols = groups.accumulate(y)
        V, s = eig.threshold(cols, cfg.tau)
        t = np.real(groups.traces_from_factors(V, s)) if len(s) else np.zeros(idx.size)
        r = b - t
        iterations += 1
        max_residual = float(np.max(np.abs(r)))
        history.append(max_residual)
        if not np.isfinite(max_residual) or max_residual > _BLOWUP:
            status = "diverged"
            break
        if max_residual <= delta + cfg.stop_tol:
            status = "converged"
            break
        y += step * _shrink(r, delta)

    sigma_raw = _finalize(V, s, d)
    spectrum = np.concatenate([s, np.zeros(d - len(s))])
    spectrum = np.sort(spectrum)[::-1]
    pos = s[s > 0]
    clipped = float(np.sum(np.abs(s[s < 0])))
    if pos.sum() > 0:
        Vp = V[:, s > 0]
        sigma_state = (Vp * (pos / pos.sum())) @ Vp.conj().T
        sigma_state = 0.5 * (sigma_state + sigma_state.conj().T)
    else:
        # nothing positive survived thresholding; fall back to the
        # maximally mixed state so sigma_state is always a valid state
        sigma_state = np.eye(d, dtype=complex) / d
    return SolverResult(
        sigma_raw=sigma_raw,
        sigma_state=sigma_state,
        iterations=iterations,
        max_residual=max_residual,
        converged=(status == "converged"),
        residual_history=np.asarray(history),
        spectrum=spectrum,
        status=status,
        clipped_negative_mass=clipped,
        wall_time_seconds=time.perf_counter() - t_start,
    )
