"""LIBSVM-format reading/writing and per-sample smoothness constants."""

from __future__ import annotations

import bz2
import gzip
import io
import os
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
import scipy.sparse as sp

__all__ = [
    "ParseError",
    "DegenerateRowError",
    "Dataset",
    "SmoothnessProfile",
    "parse_libsvm",
    "load_libsvm",
    "serialize_libsvm",
    "component_lipschitz",
    "normalize_rows",
]

_GZIP_MAGIC = b"\x1f\x8b"
_BZ2_MAGIC = b"BZh"


class ParseError(ValueError):
    """Malformed LIBSVM input. ``line`` is 1-based, or None for whole-file errors."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        self.reason = message
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DegenerateRowError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable binary-classification dataset.

    ``X`` is an ``n x d`` CSR matrix with 0-based, strictly increasing column
    indices inside each row; ``y`` holds labels in {-1, +1}.
    """

    X: sp.csr_matrix
    y: np.ndarray

    def __post_init__(self):
        X = sp.csr_matrix(self.X, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64).copy()
        if X.shape[0] < 1 or X.shape[1] < 1:
            raise ValueError(f"dataset needs n >= 1 and d >= 1, got shape {X.shape}")
        if y.shape != (X.shape[0],):
            raise ValueError("label vector length does not match row count")
        if not np.all(np.abs(y) == 1.0):
            raise ValueError("labels must be -1 or +1")
        if not X.has_sorted_indices:
            X.sort_indices()
        for arr in (X.data, X.indices, X.indptr, y):
            arr.flags.writeable = False
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def row(self, i: int):
        """Return (0-based column indices, values) of row ``i``."""
        lo, hi = self.X.indptr[i], self.X.indptr[i + 1]
        return self.X.indices[lo:hi], self.X.data[lo:hi]

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.X.shape == other.X.shape
            and np.array_equal(self.X.indptr, other.X.indptr)
            and np.array_equal(self.X.indices, other.X.indices)
            and np.array_equal(self.X.data, other.X.data)
            and np.array_equal(self.y, other.y)
        )

    __hash__ = None


@dataclass(frozen=True)
class SmoothnessProfile:
    per_component: np.ndarray

    @property
    def mean(self) -> float:
        return float(np.mean(self.per_component))

    @property
    def max(self) -> float:
        return float(np.max(self.per_component))

    @property
    def n(self) -> int:
        return self.per_component.shape[0]


def _parse_label(token: str, lineno: int, positive_label: Optional[float]) -> float:
    try:
        value = float(token)
    except ValueError:
        raise ParseError(f"non-numeric label {token!r}", lineno) from None
    if positive_label is not None:
        return 1.0 if value == positive_label else -1.0
    if value == 1.0:
        return 1.0
    if value in (0.0, -1.0):
        return -1.0
    raise ParseError(f"label {token!r} is not one of 0, -1, +1", lineno)


def parse_libsvm(
    text: Union[bytes, str],
    n_features: Optional[int] = None,
    positive_label: Optional[float] = None,
) -> Dataset:
    """Parse LIBSVM text ``<label> <idx>:<val> ...`` into a :class:`Dataset`.

    Labels 0/-1 map to -1 and 1/+1 to +1. Passing ``positive_label`` switches
    to one-vs-rest binarization (e.g. covtype's 1/2 labels). The feature
    dimension is the largest index seen unless ``n_features`` is given.
    Trailing ``# comments`` are ignored.
    """
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"input is not valid UTF-8 text ({exc})") from None

    labels = []
    indptr = [0]
    indices = []
    values = []
    max_index = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        labels.append(_parse_label(tokens[0], lineno, positive_label))
        prev = 0
        for tok in tokens[1:]:
            idx_str, sep, val_str = tok.partition(":")
            if not sep:
                raise ParseError(f"token {tok!r} is not of the form idx:val", lineno)
            try:
                idx = int(idx_str)
                val = float(val_str)
            except ValueError:
                raise ParseError(f"non-numeric token {tok!r}", lineno) from None
            if idx < 1:
                raise ParseError(f"feature index {idx} is below 1", lineno)
            if idx == prev:
                raise ParseError(f"duplicate feature index {idx}", lineno)
            if idx < prev:
                raise ParseError(f"non-increasing index {idx} after {prev}", lineno)
            if not np.isfinite(val):
                raise ParseError(f"non-finite value in {tok!r}", lineno)
            prev = idx
            indices.append(idx - 1)
            values.append(val)
        max_index = max(max_index, prev)
        indptr.append(len(indices))

    if not labels:
        raise ParseError("empty input")
    if n_features is None:
        d = max(max_index, 1)
    else:
        if n_features < max_index:
            raise ParseError(
                f"feature index {max_index} exceeds declared dimension {n_features}"
            )
        d = n_features
    X = sp.csr_matrix(
        (np.asarray(values, dtype=np.float64),
         np.asarray(indices, dtype=np.int64),
         np.asarray(indptr, dtype=np.int64)),
        shape=(len(labels), d),
    )
    return Dataset(X, np.asarray(labels))


def _read_bytes(source) -> bytes:
    if isinstance(source, (bytes, bytearray)):
        raw = bytes(source)
    elif isinstance(source, io.IOBase) or hasattr(source, "read"):
        raw = source.read()
    else:
        with open(os.fspath(source), "rb") as fh:
            raw = fh.read()
    if raw[:2] == _GZIP_MAGIC:
        raw = gzip.decompress(raw)
    elif raw[:3] == _BZ2_MAGIC:
        raw = bz2.decompress(raw)
    return raw


def load_libsvm(source, n_features=None, positive_label=None) -> Dataset:
    """Read a LIBSVM file (path, bytes or binary stream); gzip/bz2 are detected
    from their magic bytes."""
    return parse_libsvm(_read_bytes(source), n_features=n_features,
                        positive_label=positive_label)


def serialize_libsvm(ds: Dataset) -> bytes:
    """Inverse of :func:`parse_libsvm` (1-based indices, round-trip exact floats)."""
    out = []
    for i in range(ds.n):
        cols, vals = ds.row(i)
        parts = ["+1" if ds.y[i] > 0 else "-1"]
        parts.extend(f"{c + 1}:{v!r}" for c, v in zip(cols.tolist(), vals.tolist()))
        out.append(" ".join(parts))
    return ("\n".join(out) + "\n").encode("ascii")


def component_lipschitz(ds: Dataset, lambda2: float) -> SmoothnessProfile:
    """Smoothness constants L_i = ||a_i||^2 / 4 + lambda2 of logistic-plus-ridge."""
    if lambda2 < 0:
        raise ValueError("lambda2 must be nonnegative")
    sq_norms = np.asarray(ds.X.multiply(ds.X).sum(axis=1)).ravel()
    L = sq_norms / 4.0 + lambda2
    if np.any(L <= 0):
        bad = int(np.flatnonzero(L <= 0)[0])
        raise DegenerateRowError(
            f"row {bad} is zero and lambda2 = 0, so its smoothness constant vanishes"
        )
    return SmoothnessProfile(L)


def normalize_rows(ds: Dataset) -> Dataset:
    """Scale every nonzero row to unit Euclidean norm."""
    X = ds.X.copy()
    norms = np.sqrt(np.asarray(X.multiply(X).sum(axis=1)).ravel())
    scale = np.divide(1.0, norms, out=np.ones_like(norms), where=norms > 0)
    X = sp.diags(scale) @ X
    return Dataset(sp.csr_matrix(X), ds.y)
