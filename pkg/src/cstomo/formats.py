"""File formats: MREC measurement records and DMAT density matrices.

MREC is a line-oriented text format, the ingestion path for externally
produced measurement data:

    MREC 1 n=<n> m=<m> scheme=<kind> noise=<tag>
    <u-hex> <v-hex> <value> <stderr>
    ...                                   (m data lines)

Values use shortest-round-trip decimal representation, so write/read is
lossless for float64.

DMAT is binary: a 16-byte magic (b"DMAT0001" padded with zero bytes),
a little-endian uint32 dimension d, then d*d complex entries as
little-endian float64 (re, im) pairs in row-major order.
"""

from __future__ import annotations

import numpy as np

from .sampling import (
    KIND_HYBRID,
    MeasurementRecord,
    NoiseModel,
    SCHEME_KINDS,
    SamplingScheme,
)

DMAT_MAGIC = b"DMAT0001" + b"\x00" * 8


class FormatError(ValueError):
    """Malformed MREC or DMAT content."""


def write_mrec(record: MeasurementRecord, path) -> None:
    scheme = record.scheme
    lines = [
        f"MREC 1 n={scheme.n} m={scheme.m} scheme={scheme.kind} "
        f"noise={record.noise.tag()}"
    ]
    for a, val, err in zip(scheme.indices, record.values, record.stderr):
        u = int(a) >> scheme.n
        v = int(a) & (scheme.d - 1)
        lines.append(f"{u:x} {v:x} {float(val)!r} {float(err)!r}")
    data = "\n".join(lines) + "\n"
    if hasattr(path, "write"):
        path.write(data)
    else:
        with open(path, "w") as fh:
            fh.write(data)


def read_mrec(path) -> MeasurementRecord:
    if hasattr(path, "read"):
        text = path.read()
    else:
        with open(path) as fh:
            text = fh.read()
    lines = text.splitlines()
    if not lines:
        raise FormatError("empty MREC file")
    head = lines[0].split()
    if len(head) != 6 or head[0] != "MREC" or head[1] != "1":
        raise FormatError(f"bad MREC header: {lines[0]!r}")
    fields = {}
    for part in head[2:]:
        if "=" not in part:
            raise FormatError(f"bad MREC header field: {part!r}")
        key, _, value = part.partition("=")
        fields[key] = value
    try:
        n = int(fields["n"])
        m = int(fields["m"])
        kind = fields["scheme"]
        noise = NoiseModel.parse(fields["noise"])
    except (KeyError, ValueError) as exc:
        raise FormatError(f"bad MREC header: {exc}") from exc
    if kind not in SCHEME_KINDS:
        raise FormatError(f"unknown scheme kind {kind!r}")
    body = [ln for ln in lines[1:] if ln.strip()]
    if len(body) != m:
        raise FormatError(f"header promises m={m} rows, found {len(body)}")
    indices = np.empty(m, dtype=np.int64)
    values = np.empty(m)
    stderr = np.empty(m)
    for i, ln in enumerate(body):
        parts = ln.split()
        if len(parts) != 4:
            raise FormatError(f"bad MREC data line {i + 2}: {ln!r}")
        try:
            u = int(parts[0], 16)
            v = int(parts[1], 16)
            values[i] = float(parts[2])
            stderr[i] = float(parts[3])
        except ValueError as exc:
            raise FormatError(f"bad MREC data line {i + 2}: {exc}") from exc
        if not (0 <= u < 2**n and 0 <= v < 2**n):
            raise FormatError(f"mask out of range on line {i + 2}")
        indices[i] = (u << n) | v
    mask_set = None
    if kind == KIND_HYBRID:
        mask_set = np.unique(indices >> n)
        expected = (mask_set[:, None] * 2**n + np.arange(2**n)[None, :]).reshape(-1)
        if not np.array_equal(np.sort(indices), np.sort(expected)):
            raise FormatError(
                "hybrid record does not cover every phase mask of its X masks"
            )
    try:
        scheme = SamplingScheme(kind=kind, n=n, indices=indices, mask_set=mask_set)
        return MeasurementRecord(
            scheme=scheme, values=values, stderr=stderr, noise=noise
        )
    except ValueError as exc:
        raise FormatError(str(exc)) from exc


def write_dmat(rho: np.ndarray, path) -> None:
    rho = np.ascontiguousarray(rho, dtype=np.complex128)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"not a square matrix: shape {rho.shape}")
    d = rho.shape[0]
    payload = np.empty((d, d, 2), dtype="<f8")
    payload[..., 0] = rho.real
    payload[..., 1] = rho.imag
    blob = DMAT_MAGIC + np.array(d, dtype="<u4").tobytes() + payload.tobytes()
    if hasattr(path, "write"):
        path.write(blob)
    else:
        with open(path, "wb") as fh:
            fh.write(blob)


def read_dmat(path) -> np.ndarray:
    if hasattr(path, "read"):
        blob = path.read()
    else:
        with open(path, "rb") as fh:
            blob = fh.read()
    if len(blob) < 20 or blob[:16] != DMAT_MAGIC:
        raise FormatError("not a DMAT file (bad magic)")
    d = int(np.frombuffer(blob, dtype="<u4", count=1, offset=16)[0])
    expected = 20 + 16 * d * d
    if len(blob) != expected:
        raise FormatError(
            f"DMAT payload size mismatch: d={d} needs {expected} bytes, "
            f"got {len(blob)}"
        )
    flat = np.frombuffer(blob, dtype="<f8", count=2 * d * d, offset=20)
    pairs = flat.reshape(d, d, 2)
    return (pairs[..., 0] + 1j * pairs[..., 1]).astype(np.complex128)
