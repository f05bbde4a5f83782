"""Bounded-memory streaming access to vector datasets.

Datasets are either in-memory float32 arrays or fvecs/bvecs files on disk
(little-endian, each record prefixed by a 4-byte signed dimension header).
uint8 (bvecs) values are widened to float32 at read time so every downstream
kernel is monomorphic. Streaming delivers the data in sequential chunks whose
peak memory is independent of the dataset size.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, FormatError, StreamError

DEFAULT_CHUNK_FLOOR = 65536


def default_chunk_size(k):
    """Chunks hold on the order of k points, with a floor to amortize I/O."""
    return max(int(k), DEFAULT_CHUNK_FLOOR)


@dataclass
class Chunk:
    start_index: int
    vectors: np.ndarray  # row-major float32, shape (n, dim)


class VectorSet:
    """A dense d-dimensional point set, in memory or backed by a file."""

    def __init__(self, *, dim, count, element_kind, path=None, fmt=None, array=None):
        self.dim = dim
        self.count = count
        self.element_kind = element_kind
        self._path = path
        self._fmt = fmt
        self._array = array

    @classmethod
    def from_array(cls, arr):
        arr = np.ascontiguousarray(arr, dtype=np.float32)
        if arr.ndim != 2:
            raise ContractViolation("expected a 2-D (count, dim) array")
        return cls(dim=arr.shape[1], count=arr.shape[0], element_kind="float32", array=arr)

    @property
    def source(self):
        return self._path if self._path is not None else "<memory>"

    def _record_nbytes(self):
        if self._fmt == "fvecs":
            return 4 + 4 * self.dim
        return 4 + self.dim  # bvecs

    def _read_file_records(self, start, nrecs):
        rec = self._record_nbytes()
        with open(self._path, "rb") as f:
            f.seek(start * rec)
            buf = f.read(nrecs * rec)
        if len(buf) != nrecs * rec:
            raise FormatError(
                f"truncated record in {self._path}", offset=start * rec + len(buf)
            )
        if self._fmt == "fvecs":
            raw = np.frombuffer(buf, dtype=np.float32).reshape(nrecs, self.dim + 1)
            headers = raw[:, 0].view(np.int32)
            bad = np.nonzero(headers != self.dim)[0]
            if bad.size:
                raise FormatError(
                    f"dimension header {headers[bad[0]]} != {self.dim}",
                    offset=(start + int(bad[0])) * rec,
                )
            return raw[:, 1:].copy()
        raw = np.frombuffer(buf, dtype=np.uint8).reshape(nrecs, rec)
        headers = raw[:, :4].copy().view(np.int32).ravel()
        bad = np.nonzero(headers != self.dim)[0]
        if bad.size:
            raise FormatError(
                f"dimension header {headers[bad[0]]} != {self.dim}",
                offset=(start + int(bad[0])) * rec,
            )
        return raw[:, 4:].astype(np.float32)

    def chunks(self, chunk_size):
        """Yield Chunks in index order; concatenated they reproduce the set."""
        if chunk_size < 1:
            raise ContractViolation("chunk_size must be >= 1")
        for start in range(0, self.count, chunk_size):
            n = min(chunk_size, self.count - start)
            if self._array is not None:
                vecs = self._array[start : start + n]
            else:
                if self.dim is None:
                    raise FormatError(f"{self._path}: empty file has no vectors")
                vecs = self._read_file_records(start, n)
            yield Chunk(start_index=start, vectors=vecs)

    def read_all(self):
        if self._array is not None:
            return self._array
        if self.count == 0:
            if self.dim is None:
                raise FormatError(f"{self._path}: empty file has no vectors")
            return np.empty((0, self.dim), np.float32)
        return self._read_file_records(0, self.count)


def _open_vecs(path, fmt, value_nbytes):
    if not os.path.exists(path):
        raise FormatError(f"no such file: {path}")
    size = os.path.getsize(path)
    if size == 0:
        return VectorSet(dim=None, count=0, element_kind="float32" if fmt == "fvecs" else "uint8",
                         path=path, fmt=fmt)
    if size < 4:
        raise FormatError(f"{path}: short header", offset=0)
    with open(path, "rb") as f:
        dim = int(np.frombuffer(f.read(4), dtype="<i4")[0])
    if dim <= 0:
        raise FormatError(f"{path}: non-positive dimension header {dim}", offset=0)
    rec = 4 + value_nbytes * dim
    if size % rec != 0:
        # walk record headers to pinpoint the first malformed one
        with open(path, "rb") as f:
            pos = 0
            while pos + 4 <= size:
                f.seek(pos)
                h = int(np.frombuffer(f.read(4), dtype="<i4")[0])
                if h != dim:
                    raise FormatError(f"{path}: dimension header {h} != {dim}", offset=pos)
                pos += 4 + value_nbytes * h
        raise FormatError(f"{path}: trailing bytes", offset=size - size % rec)
    vs = VectorSet(dim=dim, count=size // rec,
                   element_kind="float32" if fmt == "fvecs" else "uint8",
                   path=path, fmt=fmt)
    # validate every record header up front, in bounded memory
    scan = max(1, (1 << 20) // rec)
    for start in range(0, vs.count, scan):
        vs._read_file_records(start, min(scan, vs.count - start))
    return vs


def open_fvecs(path):
    return _open_vecs(path, "fvecs", 4)


def open_bvecs(path):
    return _open_vecs(path, "bvecs", 1)


def write_fvecs(path, data):
    data = np.ascontiguousarray(data, dtype=np.float32)
    n, dim = data.shape
    out = np.empty((n, dim + 1), np.float32)
    out[:, 0] = np.array([dim], np.int32).view(np.float32)[0]
    out[:, 1:] = data
    out.tofile(path)


def write_bvecs(path, data):
    data = np.asarray(data)
    if data.dtype != np.uint8:
        if data.min() < 0 or data.max() > 255:
            raise ContractViolation("values out of uint8 range")
        data = data.astype(np.uint8)
    n, dim = data.shape
    out = np.empty((n, dim + 4), np.uint8)
    out[:, :4] = np.array([dim], np.int32).view(np.uint8)
    out[:, 4:] = data
    out.tofile(path)


def stream_chunks(vs, chunk_size, sink):
    """Invoke sink once per chunk, in index order.

    I/O failures are wrapped in a StreamError carrying the index of the last
    chunk that was fully delivered to the sink.
    """
    delivered = -1
    try:
        for i, chunk in enumerate(vs.chunks(chunk_size)):
            sink(chunk)
            delivered = i
    except ContractViolation:
        raise
    except OSError as e:
        raise StreamError(str(e), last_chunk_index=delivered) from e


def gen_gaussian_mixture(n, d, n_clusters, spread, seed):
    """n points around n_clusters uniform centers in [0,1]^d, isotropic noise.

    Deterministic for a fixed seed.
    """
    if n < 1 or d < 1 or n_clusters < 1:
        raise ContractViolation("n, d, n_clusters must all be >= 1")
    rng = np.random.default_rng(seed)
    centers = rng.random((n_clusters, d))
    labels = rng.integers(0, n_clusters, size=n)
    pts = centers[labels]
    if spread > 0:
        pts = pts + rng.normal(0.0, spread, size=(n, d))
    return VectorSet.from_array(pts.astype(np.float32))
