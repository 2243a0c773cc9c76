"""Binary and CSV file formats.

All binary numbers are little-endian; reals are IEEE-754 float64.

Dataset   ``CKMD``: version u32, N u64, n u32, N*n reals row-major,
          label flag u8, then (if flag) N u32 labels.
Sketch    ``CKMS``: version u32, m u32, n u32, N u64, frequency spec
          (tag u8, sigma2 f64, seed u64), W (m*n reals row-major),
          lower then upper bounds (2n reals), m complex values as (re, im).
Centroids ``CKMC``: version u32, K u32, n u32, K*n centroid reals row-major,
          K weights.
Freqs     ``CKMF``: version u32, m u32, n u32, frequency spec, W.
"""

from __future__ import annotations

import csv
import io as _io
import struct

import numpy as np

from .core import (
    Bounds,
    CentroidModel,
    CKMError,
    Dataset,
    Distribution,
    FrequencyMatrix,
    FrequencySpec,
    Sketch,
    validate_dataset,
)

VERSION = 1
_F8 = np.dtype("<f8")


class FormatError(CKMError):
    pass


class _Reader:
    def __init__(self, buf: bytes, what: str):
        self.buf = buf
        self.pos = 0
        self.what = what

    def take(self, size: int) -> bytes:
        if self.pos + size > len(self.buf):
            raise FormatError(f"truncated {self.what} file")
        out = self.buf[self.pos:self.pos + size]
        self.pos += size
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def reals(self, count: int) -> np.ndarray:
        return np.frombuffer(self.take(8 * count), dtype=_F8).astype(np.float64)

    def done(self):
        if self.pos != len(self.buf):
            raise FormatError(f"trailing bytes in {self.what} file")


def _header(r: _Reader, magic: bytes):
    if r.take(4) != magic:
        raise FormatError(f"not a {r.what} file (bad magic)")
    (version,) = r.unpack("<I")
    if version != VERSION:
        raise FormatError(f"unsupported {r.what} format version {version}")


def _read_bytes(src) -> bytes:
    if isinstance(src, (bytes, bytearray)):
        return bytes(src)
    with open(src, "rb") as fh:
        return fh.read()


def _write_bytes(dst, payload: bytes) -> None:
    if hasattr(dst, "write"):
        dst.write(payload)
    else:
        with open(dst, "wb") as fh:
            fh.write(payload)


# -- dataset ----------------------------------------------------------------

def dataset_to_bytes(data: Dataset) -> bytes:
    out = _io.BytesIO()
    out.write(b"CKMD")
    out.write(struct.pack("<IQI", VERSION, data.N, data.n))
    out.write(np.ascontiguousarray(data.points, dtype=_F8).tobytes())
    if data.labels is None:
        out.write(struct.pack("<B", 0))
    else:
        if np.any(data.labels < 0) or np.any(data.labels >= 2**32):
            raise FormatError("labels must fit in u32")
        out.write(struct.pack("<B", 1))
        out.write(np.asarray(data.labels, dtype="<u4").tobytes())
    return out.getvalue()


def dataset_from_bytes(buf: bytes) -> Dataset:
    r = _Reader(buf, "dataset")
    _header(r, b"CKMD")
    N, n = r.unpack("<QI")
    points = r.reals(N * n).reshape(N, n)
    (flag,) = r.unpack("<B")
    labels = None
    if flag == 1:
        labels = np.frombuffer(r.take(4 * N), dtype="<u4").astype(np.int64)
    elif flag != 0:
        raise FormatError(f"bad label flag {flag}")
    r.done()
    return validate_dataset(points, labels)


def read_csv_dataset(path, labels_last: bool = False) -> Dataset:
    try:
        arr = np.loadtxt(path, delimiter=",", ndmin=2, comments="#")
    except ValueError as exc:
        raise FormatError(f"cannot parse CSV {path}: {exc}") from None
    if labels_last:
        if arr.shape[1] < 2:
            raise FormatError("CSV with a label column needs at least two columns")
        return validate_dataset(arr[:, :-1], arr[:, -1])
    return validate_dataset(arr)


def write_csv_dataset(data: Dataset, path) -> None:
    cols = data.points if data.labels is None else np.column_stack([data.points, data.labels])
    fmt = ["%.17g"] * data.n + ([] if data.labels is None else ["%d"])
    np.savetxt(path, cols, delimiter=",", fmt=fmt)


def save_dataset(data: Dataset, path) -> None:
    if str(path).endswith(".csv"):
        write_csv_dataset(data, path)
    else:
        _write_bytes(path, dataset_to_bytes(data))


def load_dataset(path, labels_last: bool = False) -> Dataset:
    if str(path).endswith(".csv"):
        return read_csv_dataset(path, labels_last)
    return dataset_from_bytes(_read_bytes(path))


# -- frequencies and sketches ---------------------------------------------

def _spec_bytes(spec: FrequencySpec) -> bytes:
    return struct.pack("<BdQ", int(spec.distribution), spec.sigma2, spec.seed)


def _read_spec(r: _Reader) -> FrequencySpec:
    tag, sigma2, seed = r.unpack("<BdQ")
    try:
        dist = Distribution(tag)
    except ValueError:
        raise FormatError(f"unknown distribution tag {tag}") from None
    return FrequencySpec(dist, sigma2, seed)


def freqs_to_bytes(freq: FrequencyMatrix) -> bytes:
    return (b"CKMF" + struct.pack("<III", VERSION, freq.m, freq.n) + _spec_bytes(freq.spec)
            + np.ascontiguousarray(freq.W, dtype=_F8).tobytes())


def freqs_from_bytes(buf: bytes) -> FrequencyMatrix:
    r = _Reader(buf, "frequency")
    _header(r, b"CKMF")
    m, n = r.unpack("<II")
    spec = _read_spec(r)
    W = r.reals(m * n).reshape(m, n)
    r.done()
    return FrequencyMatrix(W, spec)


def sketch_to_bytes(sk: Sketch) -> bytes:
    out = _io.BytesIO()
    out.write(b"CKMS")
    out.write(struct.pack("<IIIQ", VERSION, sk.m, sk.n, sk.count))
    out.write(_spec_bytes(sk.freq.spec))
    out.write(np.ascontiguousarray(sk.freq.W, dtype=_F8).tobytes())
    out.write(np.concatenate([sk.bounds.lower, sk.bounds.upper]).astype(_F8).tobytes())
    inter = np.empty(2 * sk.m, dtype=_F8)
    inter[0::2] = sk.values.real
    inter[1::2] = sk.values.imag
    out.write(inter.tobytes())
    return out.getvalue()


def sketch_from_bytes(buf: bytes) -> Sketch:
    r = _Reader(buf, "sketch")
    _header(r, b"CKMS")
    m, n, N = r.unpack("<IIQ")
    spec = _read_spec(r)
    W = r.reals(m * n).reshape(m, n)
    lu = r.reals(2 * n)
    inter = r.reals(2 * m)
    r.done()
    values = inter[0::2] + 1j * inter[1::2]
    return Sketch(values, Bounds(lu[:n].copy(), lu[n:].copy()), int(N), FrequencyMatrix(W, spec))


def save_sketch(sk: Sketch, path) -> None:
    _write_bytes(path, sketch_to_bytes(sk))


def load_sketch(path) -> Sketch:
    return sketch_from_bytes(_read_bytes(path))


def save_freqs(freq: FrequencyMatrix, path) -> None:
    _write_bytes(path, freqs_to_bytes(freq))


def load_freqs(path) -> FrequencyMatrix:
    return freqs_from_bytes(_read_bytes(path))


# -- centroid models -------------------------------------------------------

def model_to_bytes(model: CentroidModel) -> bytes:
    return (b"CKMC" + struct.pack("<III", VERSION, model.K, model.n)
            + np.ascontiguousarray(model.centroids, dtype=_F8).tobytes()
            + np.asarray(model.weights, dtype=_F8).tobytes())


def model_from_bytes(buf: bytes) -> CentroidModel:
    r = _Reader(buf, "centroid")
    _header(r, b"CKMC")
    K, n = r.unpack("<II")
    C = r.reals(K * n).reshape(K, n)
    w = r.reals(K)
    r.done()
    return CentroidModel(C, w)


def write_model_csv(model: CentroidModel, path) -> None:
    """One row per centroid: weight first, then the coordinates."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["weight"] + [f"x{j}" for j in range(model.n)])
        for a, c in zip(model.weights, model.centroids):
            w.writerow([repr(float(a))] + [repr(float(v)) for v in c])


def read_model_csv(path) -> CentroidModel:
    arr = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return CentroidModel(arr[:, 1:].copy(), arr[:, 0].copy())


def save_model(model: CentroidModel, path) -> None:
    if str(path).endswith(".csv"):
        write_model_csv(model, path)
    else:
        _write_bytes(path, model_to_bytes(model))


def load_model(path) -> CentroidModel:
    if str(path).endswith(".csv"):
        return read_model_csv(path)
    return model_from_bytes(_read_bytes(path))
