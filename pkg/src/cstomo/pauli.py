"""n-qubit Pauli observables in the symplectic bit-mask encoding.

A Pauli observable on n qubits is encoded by two n-bit integers (u, v):

    w(u, v) = prod_k  i^(u_k v_k) (X_k)^(u_k) (Z_k)^(v_k)

where bit k of u / v acts on qubit k and qubit 0 is the least significant
bit of the computational basis label.  The phase i^(u_k v_k) makes every
w(u, v) Hermitian (u_k = v_k = 1 gives Y).  The flat index a = u * 2^n + v
enumerates all 4^n observables; (0, 0) is the identity.

Every w(u, v) has exactly one nonzero entry per column:

    w(u, v)[j ^ u, j] = i^popcount(u & v) * (-1)^popcount(v & j)

which is what makes O(d) application and trace evaluation possible without
ever materializing the matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Dense materialization guard: 2^14 x 2^14 complex128 is ~4 GB.
MAX_DENSE_QUBITS = 14

_SINGLE_QUBIT = {
    (0, 0): np.eye(2, dtype=complex),
    (1, 0): np.array([[0, 1], [1, 0]], dtype=complex),
    (0, 1): np.array([[1, 0], [0, -1]], dtype=complex),
    (1, 1): np.array([[0, -1j], [1j, 0]], dtype=complex),
}

_I_POWERS = np.array([1, 1j, -1, -1j], dtype=complex)


def popcount(x):
    """Number of set bits, elementwise for array input."""
    return np.bitwise_count(np.asarray(x, dtype=np.uint64)).astype(np.int64)


@dataclass(frozen=True)
class PauliLabel:
    """One n-qubit Pauli observable, encoded by its X mask u and Z mask v."""

    n: int
    u: int
    v: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"qubit count must be positive, got {self.n}")
        lim = 1 << self.n
        if not (0 <= self.u < lim and 0 <= self.v < lim):
            raise ValueError(
                f"masks out of range for n={self.n}: u={self.u}, v={self.v}"
            )

    @property
    def dim(self) -> int:
        return 1 << self.n

    @property
    def index(self) -> int:
        """Flat index a = u * 2^n + v, a bijection onto [0, 4^n)."""
        return (self.u << self.n) | self.v

    @property
    def is_identity(self) -> bool:
        return self.u == 0 and self.v == 0

    def __str__(self):
        letters = {(0, 0): "I", (1, 0): "X", (0, 1): "Z", (1, 1): "Y"}
        # qubit 0 printed rightmost, matching basis-label bit order
        return "".join(
            letters[(self.u >> k) & 1, (self.v >> k) & 1]
            for k in reversed(range(self.n))
        )


def label_from_index(a: int, n: int) -> PauliLabel:
    """Inverse of PauliLabel.index."""
    if not 0 <= a < 4**n:
        raise ValueError(f"Pauli index {a} out of range [0, {4 ** n}) for n={n}")
    return PauliLabel(n=n, u=a >> n, v=a & ((1 << n) - 1))


def index_from_label(p: PauliLabel) -> int:
    return p.index


@dataclass(frozen=True)
class SparsePauliAction:
    """Column-permutation form of w(u, v): w[perm[j], j] = phase[j].

    perm is the involution j -> j ^ u; phase[j] is a fourth root of unity.
    """

    n: int
    perm: np.ndarray
    phase: np.ndarray


def phase_vector(n: int, u: int, v: int) -> np.ndarray:
    """phase[j] = i^popcount(u & v) * (-1)^popcount(v & j) for j in [0, 2^n)."""
    d = 1 << n
    j = np.arange(d, dtype=np.uint64)
    signs = 1.0 - 2.0 * (popcount(j & np.uint64(v)) & 1)
    return _I_POWERS[popcount(u & v).item() % 4] * signs


def sparse_action(p: PauliLabel) -> SparsePauliAction:
    d = p.dim
    perm = np.arange(d, dtype=np.int64) ^ p.u
    return SparsePauliAction(n=p.n, perm=perm, phase=phase_vector(p.n, p.u, p.v))


def dense_matrix(p: PauliLabel) -> np.ndarray:
    """Materialize w(u, v) as a dense d x d complex matrix (small n only)."""
    if p.n > MAX_DENSE_QUBITS:
        raise ValueError(
            f"refusing to materialize a 2^{p.n} dimensional matrix "
            f"(guard: n <= {MAX_DENSE_QUBITS})"
        )
    # leftmost Kronecker factor owns the most significant bit = highest qubit
    out = np.ones((1, 1), dtype=complex)
    for k in reversed(range(p.n)):
        out = np.kron(out, _SINGLE_QUBIT[(p.u >> k) & 1, (p.v >> k) & 1])
    return out


def apply_pauli(p: PauliLabel, x: np.ndarray) -> np.ndarray:
    """Return w(p) @ x using the one-nonzero-per-column structure, O(d)."""
    x = np.asarray(x)
    if x.ndim != 1 or x.shape[0] != p.dim:
        raise ValueError(f"expected a length-{p.dim} vector, got shape {x.shape}")
    act = sparse_action(p)
    out = np.empty(p.dim, dtype=complex)
    out[act.perm] = act.phase * x
    return out


def expectation(rho: np.ndarray, p: PauliLabel) -> float:
    """tr(rho w(p)) via d column lookups; rho must be Hermitian d x d."""
    rho = np.asarray(rho)
    d = p.dim
    if rho.shape != (d, d):
        raise ValueError(f"state shape {rho.shape} != ({d}, {d})")
    act = sparse_action(p)
    # tr(rho w) = sum_j rho[j, j^u] * phase(j)
    val = np.dot(rho[np.arange(d), act.perm], act.phase)
    return float(val.real)


def fwht(x: np.ndarray) -> np.ndarray:
    """Unnormalized Walsh-Hadamard transform along axis 0 (Sylvester order).

    fwht(x)[v] = sum_j (-1)^popcount(v & j) x[j]; length must be a power of 2.
    """
    x = np.asarray(x)
    d = x.shape[0]
    if d & (d - 1):
        raise ValueError(f"length {d} is not a power of two")
    shape = x.shape
    x = x.reshape(d, -1).copy()
    h = 1
    while h < d:
        x = x.reshape(d // (2 * h), 2, h, -1)
        top = x[:, 0] + x[:, 1]
        bot = x[:, 0] - x[:, 1]
        x = np.stack((top, bot), axis=1)
        h *= 2
    return x.reshape(shape)


def iuv_phases(u: int, n: int) -> np.ndarray:
    """i^popcount(u & v) over all v in [0, 2^n), for a fixed X mask u."""
    v = np.arange(1 << n, dtype=np.uint64)
    return _I_POWERS[popcount(v & np.uint64(u)) % 4]


def traces_for_u(M: np.ndarray, u: int, n: int) -> np.ndarray:
    """tr(M w(u, v)) for every v at once, via one Walsh-Hadamard transform.

    tr(M w(u, v)) = i^|u&v| * sum_j (-1)^|v&j| M[j, j^u], so the whole
    v-column of traces is iuv * fwht(c) with c[j] = M[j, j^u].
    """
    d = 1 << n
    j = np.arange(d)
    c = M[j, j ^ u]
    return iuv_phases(u, n) * fwht(c)


def column_values_for_u(y_full: np.ndarray, u: int, n: int) -> np.ndarray:
    """Column data of sum_v y[v] w(u, v): entry [j^u, j] for every j.

    Inverse of traces_for_u up to scaling: the u-block of a Pauli-basis
    expansion is one Walsh-Hadamard transform of the phase-twisted
    coefficient vector.
    """
    return fwht(iuv_phases(u, n) * y_full)
