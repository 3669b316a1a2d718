"""Assumption-free near-purity certification from sampled Pauli data.

The estimator S = (d/m) sum_i value_i^2 is unbiased for the squared
2-norm of the measured matrix under uniform label sampling, and a
Chernoff bound turns it into a confidence statement.  Combined with the
spectral bound  ||rho - psi psi*||_2 <= sqrt(2) (1 - ||rho||_2^2)  this
certifies closeness to the nearest pure state with no prior assumptions
about the state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .sampling import KIND_HYBRID, MeasurementRecord


@dataclass(frozen=True)
class PurityCertificate:
    estimate: float  # S after the noise-variance bias correction
    estimate_raw: float  # S as summed from the record
    bias_correction: float
    m: int
    t: float  # deviation radius
    mu: float
    confidence: float  # 1 - 2 exp(-t^2 m / (4 d))
    delta2: float
    purity_lower: float
    delta1_bound: float | None  # None when not certifiable
    top_eigenvalue: float | None
    valid: bool
    reason: str


def _require_uniform(record: MeasurementRecord) -> None:
    if record.scheme.kind == KIND_HYBRID:
        raise ValueError(
            "purity estimation requires uniformly sampled labels; the "
            "hybrid scheme's structured draw breaks the unbiasedness "
            "argument"
        )


def purity_estimate(record: MeasurementRecord) -> float:
    """S = (d/m) sum_i value_i^2, unbiased for ||omega||_2^2 under uniform
    sampling of the labels (identity included).  Noisy values bias S
    upward by their variance; certificate() corrects for that."""
    _require_uniform(record)
    d = record.scheme.d
    return float(d / record.m * np.sum(record.values**2))


def delta1_bound(purity_lower: float) -> float:
    """2-norm distance bound to the nearest pure state: sqrt(2)(1 - purity).

    Valid when the top eigenvalue is at least 1/2; the caller is
    responsible for that precondition (certificate() tracks it).
    """
    if not 0.0 <= purity_lower <= 1.0:
        raise ValueError(f"purity must lie in [0, 1], got {purity_lower}")
    return math.sqrt(2.0) * (1.0 - purity_lower)


def certificate(
    record: MeasurementRecord,
    delta2: float,
    mu: float,
    top_eigenvalue: float | None = None,
) -> PurityCertificate:
    """Chernoff-backed purity certificate from a uniform measurement record.

    delta2 is the experimentalist's measurement-precision estimate; mu > 1
    sets the failure probability exp(-mu) through t = sqrt(4 mu d / m).
    The estimator's upward noise bias d * mean(stderr^2) is subtracted
    before the delta2 terms are applied (recorded in bias_correction).

    top_eigenvalue, when supplied, should be the largest eigenvalue of the
    reconstructed state; the certificate is only marked valid when both
    purity_lower >= 1/2 and the top eigenvalue clears 1/2 by the certified
    distance margin.
    """
    _require_uniform(record)
    if delta2 < 0:
        raise ValueError(f"delta2 must be >= 0, got {delta2}")
    if mu <= 1:
        raise ValueError(f"mu must exceed 1, got {mu}")
    d = record.scheme.d
    m = record.m
    raw = purity_estimate(record)
    bias = float(d / m * np.sum(record.stderr**2))
    s_est = raw - bias
    t = math.sqrt(4.0 * mu * d / m)
    confidence = 1.0 - 2.0 * math.exp(-(t**2) * m / (4.0 * d))
    purity_lower = s_est - t - 2.0 * delta2 - delta2**2
    purity_lower = min(purity_lower, 1.0)

    reason = ""
    bound: float | None = None
    valid = False
    if t >= 1.0:
        reason = f"m={m} too small for mu={mu}: deviation radius t={t:.3f} >= 1"
    elif purity_lower < 1.0 / d:
        reason = f"purity lower bound {purity_lower:.4f} below 1/d, not certifiable"
    else:
        bound = delta1_bound(purity_lower)
        if purity_lower < 0.5:
            reason = f"purity lower bound {purity_lower:.4f} < 1/2"
        elif top_eigenvalue is None:
            reason = "no reconstructed top eigenvalue supplied"
        elif top_eigenvalue < 0.5 + bound:
            reason = (
                f"reconstructed top eigenvalue {top_eigenvalue:.4f} does not "
                f"clear 1/2 by the certified margin {bound:.4f}"
            )
        else:
            valid = True
    return PurityCertificate(
        estimate=s_est,
        estimate_raw=raw,
        bias_correction=bias,
        m=m,
        t=t,
        mu=mu,
        confidence=confidence,
        delta2=delta2,
        purity_lower=purity_lower,
        delta1_bound=bound,
        top_eigenvalue=top_eigenvalue,
        valid=valid,
        reason=reason,
    )
