"""Vector dataset ingestion, splitting and result-table output.

Readers accept the TEXMEX ``.fvecs`` / ``.bvecs`` / ``.ivecs`` layouts and
plain numeric CSV.  Everything is widened to float64 on load.
"""

from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

REPORT_HEADER = ("method", "drr", "k", "alpha", "b", "recall", "fit_seconds", "transform_seconds")


class DatasetFormatError(ValueError):
    """Raised when a file does not decode into a valid dataset."""


class Dataset:
    """Immutable N x n float64 matrix of finite vectors.

    ``min_rows`` is 2 for anything that will be fitted on; held-out query
    sets may be built with ``min_rows=1``.
    """

    __slots__ = ("_vectors",)

    def __init__(self, vectors, *, min_rows: int = 2):
        arr = np.array(vectors, dtype=np.float64, copy=True)
        if arr.ndim != 2:
            raise DatasetFormatError(f"expected a 2-D matrix, got shape {arr.shape}")
        if arr.shape[0] < min_rows:
            raise DatasetFormatError(f"dataset needs at least {min_rows} rows, got {arr.shape[0]}")
        if arr.shape[1] < 1:
            raise DatasetFormatError("dataset needs at least one column")
        if not np.all(np.isfinite(arr)):
            bad = np.argwhere(~np.isfinite(arr))[0]
            raise DatasetFormatError(f"non-finite value at row {bad[0]}, column {bad[1]}")
        arr.flags.writeable = False
        self._vectors = arr

    @property
    def vectors(self) -> np.ndarray:
        return self._vectors

    @property
    def N(self) -> int:
        return self._vectors.shape[0]

    @property
    def n(self) -> int:
        return self._vectors.shape[1]

    def __len__(self) -> int:
        return self.N

    def __repr__(self) -> str:
        return f"Dataset(N={self.N}, n={self.n})"


@dataclass(frozen=True)
class SplitSpec:
    query_count: int
    seed: int = 0


def as_matrix(data) -> np.ndarray:
    """Return the float64 matrix behind a Dataset or array-like."""
    if isinstance(data, Dataset):
        return data.vectors
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    return arr


# ---------------------------------------------------------------------------
# TEXMEX binary formats
# ---------------------------------------------------------------------------

def _read_vecs(path, item_dtype: np.dtype) -> np.ndarray:
    path = Path(path)
    raw = path.read_bytes()
    item = np.dtype(item_dtype).itemsize
    rows = []
    offset = 0
    dim = None
    while offset < len(raw):
        if offset + 4 > len(raw):
            raise DatasetFormatError(f"{path}: truncated dimension header at byte offset {offset}")
        d = int(np.frombuffer(raw, dtype="<i4", count=1, offset=offset)[0])
        if d <= 0:
            raise DatasetFormatError(f"{path}: non-positive dimension {d} at byte offset {offset}")
        if dim is None:
            dim = d
        elif d != dim:
            raise DatasetFormatError(
                f"{path}: inconsistent dimension at byte offset {offset}: expected {dim}, found {d}"
            )
        start = offset + 4
        end = start + d * item
        if end > len(raw):
            raise DatasetFormatError(
                f"{path}: truncated record at byte offset {offset} "
                f"(needs {d * item} payload bytes, {len(raw) - start} available)"
            )
        rows.append(np.frombuffer(raw, dtype=item_dtype, count=d, offset=start))
        offset = end
    if not rows:
        return np.empty((0, 0))
    return np.vstack(rows)


def read_fvecs(path) -> Dataset:
    return Dataset(_read_vecs(path, np.dtype("<f4")).astype(np.float64))


def read_bvecs(path) -> Dataset:
    return Dataset(_read_vecs(path, np.dtype("u1")).astype(np.float64))


def read_ivecs(path) -> np.ndarray:
    """Integer vectors (e.g. ground-truth neighbor ids); not a Dataset."""
    return _read_vecs(path, np.dtype("<i4")).astype(np.int64)


def _write_vecs(path, matrix: np.ndarray, item_dtype: np.dtype) -> None:
    matrix = np.asarray(matrix)
    if matrix.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    header = np.full((matrix.shape[0], 1), matrix.shape[1], dtype="<i4")
    payload = np.ascontiguousarray(matrix.astype(item_dtype))
    blob = np.hstack([header.view(np.uint8), payload.view(np.uint8).reshape(matrix.shape[0], -1)])
    Path(path).write_bytes(blob.tobytes())


def write_fvecs(path, data) -> None:
    _write_vecs(path, as_matrix(data), np.dtype("<f4"))


def write_bvecs(path, data) -> None:
    m = as_matrix(data)
    if np.any((m < 0) | (m > 255) | (m != np.round(m))):
        raise ValueError("bvecs payload must be integers in [0, 255]")
    _write_vecs(path, m, np.dtype("u1"))


def write_ivecs(path, ids) -> None:
    _write_vecs(path, np.asarray(ids), np.dtype("<i4"))


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def read_csv(path, has_header: bool = False, delimiter: str = ",") -> Dataset:
    """Parse a numeric CSV.  ``delimiter=None`` or ``"whitespace"`` splits on runs of blanks."""
    path = Path(path)
    whitespace = delimiter is None or delimiter == "whitespace"
    rows: list[list[float]] = []
    width = None
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            if has_header and lineno == 1:
                continue
            line = line.strip()
            if not line:
                continue
            fields = line.split() if whitespace else [f.strip() for f in line.split(delimiter)]
            if width is None:
                width = len(fields)
            elif len(fields) != width:
                raise DatasetFormatError(
                    f"{path}: ragged row {lineno}: expected {width} fields, found {len(fields)}"
                )
            try:
                rows.append([float(f) for f in fields])
            except ValueError:
                col = next(i for i, f in enumerate(fields, start=1) if not _is_float(f))
                raise DatasetFormatError(
                    f"{path}: non-numeric field {fields[col - 1]!r} at row {lineno}, column {col}"
                ) from None
    if not rows:
        return Dataset(np.empty((0, 0)))
    return Dataset(np.array(rows))


def _is_float(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def write_csv(path, data) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for row in as_matrix(data):
            writer.writerow([repr(float(v)) for v in row])


FORMATS = ("fvecs", "bvecs", "csv")


def guess_format(path) -> str:
    suffix = Path(path).suffix.lower().lstrip(".")
    if suffix in ("fvecs", "bvecs"):
        return suffix
    return "csv"


def load(path, fmt: str | None = None, has_header: bool = False, delimiter: str = ",") -> Dataset:
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such dataset file: {path}")
    fmt = fmt or guess_format(path)
    if fmt == "fvecs":
        return read_fvecs(path)
    if fmt == "bvecs":
        return read_bvecs(path)
    if fmt == "csv":
        return read_csv(path, has_header=has_header, delimiter=delimiter)
    raise ValueError(f"unknown format {fmt!r}; expected one of {FORMATS}")


# ---------------------------------------------------------------------------
# Transformations
# ---------------------------------------------------------------------------

def l2_normalize(ds: Dataset) -> Dataset:
    """Scale every nonzero row to unit length.  Zero rows pass through."""
    x = ds.vectors
    norms = np.linalg.norm(x, axis=1)
    zero = norms == 0
    if zero.any():
        logger.warning("l2_normalize: %d zero row(s) left unchanged", int(zero.sum()))
    scale = np.where(zero, 1.0, norms)
    return Dataset(x / scale[:, None], min_rows=1)


def count_zero_rows(ds: Dataset) -> int:
    return int(np.count_nonzero(~ds.vectors.any(axis=1)))


def split(ds: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Random disjoint train/query partition, reproducible from ``spec.seed``."""
    if not 1 <= spec.query_count < ds.N - 1:
        raise ValueError(
            f"query_count must be in [1, {ds.N - 2}] for a dataset of {ds.N} rows, got {spec.query_count}"
        )
    perm = np.random.default_rng(spec.seed).permutation(ds.N)
    q_idx = np.sort(perm[: spec.query_count])
    t_idx = np.sort(perm[spec.query_count:])
    return Dataset(ds.vectors[t_idx]), Dataset(ds.vectors[q_idx], min_rows=1)


def split_indices(N: int, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray]:
    perm = np.random.default_rng(spec.seed).permutation(N)
    return np.sort(perm[spec.query_count:]), np.sort(perm[: spec.query_count])


def subsample_columns(ds: Dataset, count: int, seed: int) -> Dataset:
    """Keep ``count`` randomly chosen columns (sorted) of the dataset."""
    if not 1 <= count <= ds.n:
        raise ValueError(f"column count must be in [1, {ds.n}], got {count}")
    cols = np.sort(np.random.default_rng(seed).choice(ds.n, size=count, replace=False))
    return Dataset(ds.vectors[:, cols], min_rows=1)


# ---------------------------------------------------------------------------
# Result tables
# ---------------------------------------------------------------------------

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_table(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
