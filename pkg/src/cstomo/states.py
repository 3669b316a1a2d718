"""Synthetic density matrices and the metric suite.

States are plain complex numpy arrays; the invariants (Hermitian, unit
trace, PSD) are enforced by the generators and checked on demand with
check_density_matrix.  Solver output deliberately relaxes PSD, so the
check exposes a configurable eigenvalue floor.
"""

from __future__ import annotations

import numpy as np

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-10


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def check_density_matrix(rho: np.ndarray, psd_tol: float = PSD_TOL) -> None:
    """Raise ValueError unless rho is Hermitian, unit trace, and PSD up to tolerance."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"not a square matrix: shape {rho.shape}")
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > HERMITIAN_TOL:
        raise ValueError(f"not Hermitian: max |M - M^dag| = {herm:.3e}")
    tr = np.trace(rho)
    if abs(tr - 1.0) > TRACE_TOL:
        raise ValueError(f"trace {tr} != 1")
    lo = np.linalg.eigvalsh(rho)[0]
    if lo < -psd_tol:
        raise ValueError(f"not PSD: minimum eigenvalue {lo:.3e}")


def random_rank_r_state(d: int, r: int, seed) -> np.ndarray:
    """Rank-r state from the partial-trace-of-Haar-pure-state induced measure.

    Sampled as G G^dag / tr(G G^dag) with G a d x r standard complex Ginibre
    matrix, which is the same distribution without the d*r-dimensional
    purification.
    """
    if not 1 <= r <= d:
        raise ValueError(f"rank must satisfy 1 <= r <= d, got r={r}, d={d}")
    rng = _rng(seed)
    G = rng.standard_normal((d, r)) + 1j * rng.standard_normal((d, r))
    rho = G @ G.conj().T
    rho /= np.trace(rho).real
    return 0.5 * (rho + rho.conj().T)


def haar_unitary(d: int, seed) -> np.ndarray:
    """Haar-distributed unitary via QR of a Ginibre matrix with the R-diagonal
    phase fix (plain QR is not Haar without it)."""
    rng = _rng(seed)
    Z = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    Q, R = np.linalg.qr(Z)
    diag = np.diagonal(R)
    return Q * (diag / np.abs(diag))


def validate_profile(profile: np.ndarray) -> np.ndarray:
    profile = np.asarray(profile, dtype=float)
    if profile.ndim != 1 or profile.size == 0:
        raise ValueError("spectrum profile must be a nonempty 1-d array")
    if np.any(profile < 0):
        raise ValueError("spectrum profile entries must be nonnegative")
    if abs(profile.sum() - 1.0) > 1e-9:
        raise ValueError(f"spectrum profile must sum to 1, got {profile.sum()}")
    if np.any(np.diff(profile) > 1e-12):
        raise ValueError("spectrum profile must be non-increasing")
    return profile


def state_from_profile(profile: np.ndarray, seed) -> np.ndarray:
    """State with a prescribed spectrum and Haar-random eigenbasis."""
    profile = validate_profile(profile)
    U = haar_unitary(profile.size, seed)
    rho = (U * profile) @ U.conj().T
    return 0.5 * (rho + rho.conj().T)


def geometric_profile(d: int, top: int, top_mass: float, ratio: float) -> np.ndarray:
    """Spectrum with geometrically decaying weights on the first `top`
    eigenvalues carrying `top_mass` total, the remainder spread uniformly.

    Used to emulate approximately-low-rank experimental states.
    """
    if not 1 <= top <= d:
        raise ValueError(f"need 1 <= top <= d, got top={top}, d={d}")
    if not 0 < top_mass <= 1:
        raise ValueError(f"top_mass must be in (0, 1], got {top_mass}")
    if not 0 < ratio < 1:
        raise ValueError(f"ratio must be in (0, 1), got {ratio}")
    head = ratio ** np.arange(top)
    head *= top_mass / head.sum()
    tail = np.full(d - top, (1.0 - top_mass) / (d - top)) if top < d else np.array([])
    profile = np.concatenate([head, tail])
    # geometric head can dip below the uniform tail for extreme ratios
    return validate_profile(np.sort(profile)[::-1])


def depolarize(rho: np.ndarray, gamma: float) -> np.ndarray:
    """(1 - gamma) rho + gamma I/d."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"depolarizing strength must be in [0, 1], got {gamma}")
    d = rho.shape[0]
    return (1.0 - gamma) * rho + (gamma / d) * np.eye(d)


def purity(rho: np.ndarray) -> float:
    """tr(rho^2), the squared Frobenius norm for Hermitian input."""
    return float(np.sum(np.abs(rho) ** 2))


def fidelity(rho: np.ndarray, sigma: np.ndarray, psd_tol: float = PSD_TOL) -> float:
    """Uhlmann fidelity (tr sqrt(sqrt(rho) sigma sqrt(rho)))^2 in [0, 1].

    Computed by diagonalizing rho, forming sqrt(rho) in its eigenbasis, then
    diagonalizing sqrt(rho) sigma sqrt(rho).  Eigenvalues more negative than
    -psd_tol on either input are rejected; small negatives are clipped.
    """
    rho = np.asarray(rho)
    sigma = np.asarray(sigma)
    if rho.shape != sigma.shape:
        raise ValueError(f"shape mismatch: {rho.shape} vs {sigma.shape}")
    lam, V = np.linalg.eigh(rho)
    for name, vals in (("rho", lam), ("sigma", np.linalg.eigvalsh(sigma))):
        if vals[0] < -psd_tol:
            raise ValueError(
                f"fidelity input {name} is not PSD: eigenvalue {vals[0]:.3e}"
            )
    sqrt_rho = (V * np.sqrt(np.clip(lam, 0.0, None))) @ V.conj().T
    mid = sqrt_rho @ sigma @ sqrt_rho
    mu = np.linalg.eigvalsh(0.5 * (mid + mid.conj().T))
    if mu.size and mu[0] < -psd_tol:
        raise ValueError(f"sqrt(rho) sigma sqrt(rho) has eigenvalue {mu[0]:.3e}")
    # exact zeros of the product surface as ~1e-17 noise; without a floor
    # the square root amplifies them to ~1e-8 asymmetries
    floor = max(float(mu[-1]), 0.0) * 1e-13
    mu = np.where(mu > floor, mu, 0.0)
    f = float(np.sum(np.sqrt(mu)) ** 2)
    return min(max(f, 0.0), 1.0)


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    """(1/2) sum |eig(rho - sigma)|."""
    rho = np.asarray(rho)
    sigma = np.asarray(sigma)
    if rho.shape != sigma.shape:
        raise ValueError(f"shape mismatch: {rho.shape} vs {sigma.shape}")
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(rho - sigma))))


def best_rank_r(rho: np.ndarray, r: int) -> np.ndarray:
    """Truncate to the r largest eigenvalues and renormalize the trace.

    Ties between equal eigenvalues are broken by the order the
    decomposition returns, which is unstable under degeneracy.
    """
    d = rho.shape[0]
    if not 1 <= r <= d:
        raise ValueError(f"rank must satisfy 1 <= r <= d, got r={r}, d={d}")
    lam, V = np.linalg.eigh(rho)
    keep = lam[-r:]
    if keep.sum() <= 0:
        raise ValueError("top-r eigenvalue mass is not positive")
    Vk = V[:, -r:]
    out = (Vk * keep) @ Vk.conj().T / keep.sum()
    return 0.5 * (out + out.conj().T)
