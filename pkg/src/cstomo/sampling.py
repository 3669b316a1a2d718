"""Measurement schemes, noisy expectation-value simulation, and the
sampling operator R.

All batch operations group the measured labels by their X mask u.  Within
one group the d observables w(u, .) differ only by phases, so the whole
group's traces (and, dually, the u-block of any coefficient accumulation
sum_i y_i w(A_i)) reduce to a single Walsh-Hadamard transform.  That is
the structure the hybrid scheme is designed around, and it makes the
uniform schemes fast too.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse

from .pauli import PauliLabel, expectation, fwht, iuv_phases, label_from_index

KIND_WITH = "uniform-with-replacement"
KIND_WITHOUT = "uniform-without-replacement"
KIND_HYBRID = "hybrid"
SCHEME_KINDS = (KIND_WITH, KIND_WITHOUT, KIND_HYBRID)

# Above this population size, without-replacement draws switch from a full
# permutation to rejection sampling.
_PERMUTATION_LIMIT = 1 << 24


@dataclass(frozen=True)
class SamplingScheme:
    """An ordered list of measured Pauli labels, stored as flat indices."""

    kind: str
    n: int
    indices: np.ndarray
    mask_set: np.ndarray | None = None  # hybrid only: sorted X masks

    def __post_init__(self):
        if self.kind not in SCHEME_KINDS:
            raise ValueError(f"unknown scheme kind {self.kind!r}")
        idx = np.asarray(self.indices, dtype=np.int64)
        if idx.ndim != 1 or idx.size == 0:
            raise ValueError("scheme must contain at least one label")
        if idx.min() < 0 or idx.max() >= 4**self.n:
            raise ValueError(f"label index out of range for n={self.n}")
        object.__setattr__(self, "indices", idx)
        if self.kind != KIND_WITH and np.unique(idx).size != idx.size:
            raise ValueError(f"{self.kind} scheme contains duplicate labels")

    @property
    def m(self) -> int:
        return int(self.indices.size)

    @property
    def d(self) -> int:
        return 1 << self.n

    @property
    def u(self) -> np.ndarray:
        return self.indices >> self.n

    @property
    def v(self) -> np.ndarray:
        return self.indices & (self.d - 1)

    def labels(self):
        for a in self.indices:
            yield label_from_index(int(a), self.n)


def draw_uniform(n: int, m: int, replacement: bool, seed) -> SamplingScheme:
    """m labels uniform over all 4^n observables (identity included)."""
    rng = np.random.default_rng(seed)
    total = 4**n
    if m < 1:
        raise ValueError(f"need at least one draw, got m={m}")
    if replacement:
        idx = rng.integers(0, total, size=m, dtype=np.int64)
        kind = KIND_WITH
    else:
        if m > total:
            raise ValueError(
                f"cannot draw {m} labels without replacement from {total}"
            )
        if total <= _PERMUTATION_LIMIT:
            idx = rng.permutation(total)[:m].astype(np.int64)
        else:
            seen: set[int] = set()
            out = []
            while len(out) < m:
                for a in rng.integers(0, total, size=2 * (m - len(out))):
                    if int(a) not in seen:
                        seen.add(int(a))
                        out.append(int(a))
                        if len(out) == m:
                            break
            idx = np.array(out, dtype=np.int64)
        kind = KIND_WITHOUT
    return SamplingScheme(kind=kind, n=n, indices=idx)


def draw_hybrid(n: int, s: int, seed) -> SamplingScheme:
    """Masked scheme: all w(u, v) for u in a random s-subset of masks.

    The zero mask (the strings made of Z and identity only) is always
    included, so the trace constraint is among the measured data.  Labels
    are ordered canonically: masks ascending, v ascending within a mask.
    """
    d = 1 << n
    if not 1 <= s <= d:
        raise ValueError(f"mask count must satisfy 1 <= s <= 2^n, got s={s}")
    rng = np.random.default_rng(seed)
    rest = rng.permutation(np.arange(1, d))[: s - 1]
    masks = np.sort(np.concatenate([[0], rest])).astype(np.int64)
    idx = (masks[:, None] * d + np.arange(d)[None, :]).reshape(-1)
    return SamplingScheme(kind=KIND_HYBRID, n=n, indices=idx, mask_set=masks)


@dataclass(frozen=True)
class NoiseModel:
    """Per-observable noise applied to exact expectation values."""

    kind: str  # exact | gaussian | born
    sigma: float = 0.0
    shots: int = 0

    @staticmethod
    def exact() -> "NoiseModel":
        return NoiseModel(kind="exact")

    @staticmethod
    def gaussian(sigma: float) -> "NoiseModel":
        if sigma < 0:
            raise ValueError(f"gaussian noise needs sigma >= 0, got {sigma}")
        return NoiseModel(kind="gaussian", sigma=float(sigma))

    @staticmethod
    def born(shots: int) -> "NoiseModel":
        if shots < 1:
            raise ValueError(f"born sampling needs shots >= 1, got {shots}")
        return NoiseModel(kind="born", shots=int(shots))

    def tag(self) -> str:
        if self.kind == "exact":
            return "exact"
        if self.kind == "gaussian":
            return f"gaussian({self.sigma!r})"
        return f"born({self.shots})"

    @classmethod
    def parse(cls, tag: str) -> "NoiseModel":
        tag = tag.strip()
        if tag == "exact":
            return cls.exact()
        for name, conv, make in (
            ("gaussian", float, cls.gaussian),
            ("born", int, cls.born),
        ):
            if tag.startswith(name + "(") and tag.endswith(")"):
                return make(conv(tag[len(name) + 1 : -1]))
        raise ValueError(f"cannot parse noise tag {tag!r}")


@dataclass(frozen=True)
class MeasurementRecord:
    """Sampled labels with estimated expectation values and error bars."""

    scheme: SamplingScheme
    values: np.ndarray
    stderr: np.ndarray
    noise: NoiseModel

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        stderr = np.asarray(self.stderr, dtype=float)
        if values.shape != (self.scheme.m,) or stderr.shape != (self.scheme.m,):
            raise ValueError(
                f"values/stderr must have length m={self.scheme.m}, "
                f"got {values.shape} / {stderr.shape}"
            )
        if not (np.all(np.isfinite(values)) and np.all(np.isfinite(stderr))):
            raise ValueError("non-finite entries in measurement record")
        band = 1.0 + 5.0 * self.noise.sigma if self.noise.kind == "gaussian" else 1.0
        if np.max(np.abs(values)) > band + 1e-12:
            raise ValueError(f"expectation value outside the sanity band {band}")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "stderr", stderr)

    @property
    def m(self) -> int:
        return self.scheme.m


class PauliGroups:
    """Labels of a scheme grouped by X mask, with batched transforms.

    For each unique mask u the group holds the measured phase masks v and
    their positions in the flat record.  traces() maps a matrix to the
    per-label values tr(M w(A_i)); accumulate() maps per-label (real)
    coefficients to the column data of sum_i y_i w(A_i).
    """

    def __init__(self, source, indices: np.ndarray | None = None):
        if isinstance(source, SamplingScheme):
            self.n = source.n
            indices = source.indices
        else:
            self.n = int(source)
            indices = np.asarray(indices, dtype=np.int64)
        self.d = 1 << self.n
        u = indices >> self.n
        v = indices & (self.d - 1)
        order = np.argsort(u, kind="stable")
        uu = u[order]
        starts = np.flatnonzero(np.r_[True, np.diff(uu) != 0])
        bounds = np.r_[starts, uu.size]
        self.unique_u = uu[starts]
        self.v_groups = [v[order[a:b]] for a, b in zip(bounds, bounds[1:])]
        self.pos_groups = [order[a:b] for a, b in zip(bounds, bounds[1:])]
        self._iuv = np.stack(
            [iuv_phases(int(u0), self.n) for u0 in self.unique_u], axis=1
        )

    @property
    def group_count(self) -> int:
        return int(self.unique_u.size)

    def traces(self, M: np.ndarray) -> np.ndarray:
        """tr(M w(A_i)) for every label, one Walsh-Hadamard pass per mask."""
        d = self.d
        if M.shape != (d, d):
            raise ValueError(f"matrix shape {M.shape} != ({d}, {d})")
        j = np.arange(d)
        C = np.empty((d, self.group_count), dtype=complex)
        for gi, u0 in enumerate(self.unique_u):
            C[:, gi] = M[j, j ^ int(u0)]
        T = self._iuv * fwht(C)
        out = np.empty(sum(len(p) for p in self.pos_groups), dtype=complex)
        for gi, (vs, pos) in enumerate(zip(self.v_groups, self.pos_groups)):
            out[pos] = T[vs, gi]
        return out

    def traces_from_factors(self, V: np.ndarray, lam: np.ndarray) -> np.ndarray:
        """Same as traces(V diag(lam) V^dag) without forming the product."""
        d = self.d
        j = np.arange(d)
        VL = V * lam
        Vc = V.conj()
        C = np.empty((d, self.group_count), dtype=complex)
        for gi, u0 in enumerate(self.unique_u):
            C[:, gi] = np.einsum("jk,jk->j", VL, Vc[j ^ int(u0)])
        T = self._iuv * fwht(C)
        out = np.empty(sum(len(p) for p in self.pos_groups), dtype=complex)
        for gi, (vs, pos) in enumerate(zip(self.v_groups, self.pos_groups)):
            out[pos] = T[vs, gi]
        return out

    def accumulate(self, y: np.ndarray) -> np.ndarray:
        """Column data of sum_i y_i w(A_i) for real coefficients y.

        Returns cols of shape (d, groups): cols[j, gi] is the matrix entry
        at [j ^ u_gi, j].  Duplicate labels contribute once per occurrence.
        """
        d = self.d
        Y = np.zeros((d, self.group_count), dtype=float)
        for gi, (vs, pos) in enumerate(zip(self.v_groups, self.pos_groups)):
            np.add.at(Y[:, gi], vs, y[pos])
        return fwht(self._iuv * Y)

    def to_dense(self, cols: np.ndarray) -> np.ndarray:
        M = np.zeros((self.d, self.d), dtype=complex)
        j = np.arange(self.d)
        for gi, u0 in enumerate(self.unique_u):
            M[j ^ int(u0), j] += cols[:, gi]
        return M

    def to_sparse(self, cols: np.ndarray) -> scipy.sparse.csr_matrix:
        j = np.arange(self.d)
        rows = np.concatenate([j ^ int(u0) for u0 in self.unique_u])
        colidx = np.tile(j, self.group_count)
        data = cols.T.reshape(-1)
        M = scipy.sparse.coo_matrix(
            (data, (rows, colidx)), shape=(self.d, self.d)
        )
        return M.tocsr()

    def matvec(self, cols: np.ndarray):
        """Matrix-vector closure for sum-of-Paulis column data, O(groups * d)."""
        perms = [np.arange(self.d) ^ int(u0) for u0 in self.unique_u]

        def mv(x):
            out = np.zeros(self.d, dtype=complex)
            for gi, perm in enumerate(perms):
                out[perm] += cols[:, gi] * x
            return out

        return mv


def measure(rho: np.ndarray, scheme: SamplingScheme, noise: NoiseModel, seed) -> MeasurementRecord:
    """Simulate expectation-value estimation for every label of the scheme.

    exact:    values are tr(rho w(A_i)) to machine precision.
    gaussian: exact plus iid real N(0, sigma^2) per non-identity label,
              truncated at 5 sigma to keep records inside the documented
              sanity band; stderr = sigma.
    born:     per non-identity label with e = tr(rho w), draw
              k ~ Binomial(shots, (1+e)/2) and report 2k/shots - 1 with the
              plug-in binomial error bar sqrt((1 - value^2)/shots).

    The identity label is always reported as exactly 1 with stderr 0; noise
    on real expectation values respects Hermiticity by construction.
    """
    d = scheme.d
    if rho.shape != (d, d):
        raise ValueError(f"state shape {rho.shape} != ({d}, {d})")
    # per-label evaluation, not the batched transform: the contract is that
    # exact values match pauli.expectation bit for bit
    exact = np.fromiter(
        (expectation(rho, lab) for lab in scheme.labels()), dtype=float, count=scheme.m
    )
    exact = np.clip(exact, -1.0, 1.0)
    is_ident = scheme.indices == 0
    exact[is_ident] = 1.0

    rng = np.random.default_rng(seed)
    if noise.kind == "exact":
        values = exact
        stderr = np.zeros(scheme.m)
    elif noise.kind == "gaussian":
        eta = rng.normal(0.0, noise.sigma, size=scheme.m) if noise.sigma else np.zeros(scheme.m)
        eta = np.clip(eta, -5.0 * noise.sigma, 5.0 * noise.sigma)
        eta[is_ident] = 0.0
        values = exact + eta
        stderr = np.full(scheme.m, noise.sigma)
        stderr[is_ident] = 0.0
    elif noise.kind == "born":
        p = (1.0 + exact) / 2.0
        k = rng.binomial(noise.shots, p)
        values = 2.0 * k / noise.shots - 1.0
        values[is_ident] = 1.0
        stderr = np.sqrt(np.clip(1.0 - values**2, 0.0, None) / noise.shots)
        stderr[is_ident] = 0.0
    else:
        raise ValueError(f"unknown noise kind {noise.kind!r}")
    return MeasurementRecord(scheme=scheme, values=values, stderr=stderr, noise=noise)


def sampling_op_apply(source, M: np.ndarray):
    """Apply the sampling operator R: M -> (d/m) sum_i w(A_i) tr(M w(A_i)).

    `source` is a SamplingScheme or a MeasurementRecord (its scheme is
    used).  Hybrid schemes return a scipy CSR matrix with at most |S| d
    nonzeros; uniform schemes return a dense array.  Duplicate labels
    contribute once per occurrence.
    """
    scheme = source.scheme if isinstance(source, MeasurementRecord) else source
    d = scheme.d
    M = np.asarray(M)
    if M.shape != (d, d):
        raise ValueError(f"matrix shape {M.shape} != ({d}, {d})")
    groups = PauliGroups(scheme)
    t = np.real(groups.traces(M))
    cols = groups.accumulate((d / scheme.m) * t)
    if scheme.kind == KIND_HYBRID:
        return groups.to_sparse(cols)
    return groups.to_dense(cols)
