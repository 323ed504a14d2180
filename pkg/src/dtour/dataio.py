"""Dataset ingestion and tour-file serialization.

Datasets are stored column-major: p float32 columns (math elsewhere
accumulates in float64), plus optional label columns (categorical codes
with a dictionary, or continuous) that are not part of the embedded
space. Three formats live here:

* CSV (RFC-4180-style, configurable delimiter)
* DTC1 — an owned binary columnar format, streamable column-at-a-time
* tour JSON — keyframe bases with labels and loadings
"""

import csv
import io
import json
import struct
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._validation import BASIS_ATOL, basis_drift
from .errors import (
    BadMagic,
    ConstantColumnWarning,
    DroppedRowsWarning,
    EmptyDataset,
    MissingColumn,
    OrthonormalityViolation,
    ParseError,
    SchemaError,
    TruncatedFile,
    VersionUnsupported,
)
from .geometry import nearest_orthonormal
from .path import Keyframe, KeyframeSequence

__all__ = [
    "Dataset",
    "LabelColumn",
    "StandardizeRecord",
    "TourFile",
    "load_csv",
    "load_columnar",
    "save_columnar",
    "standardize",
    "save_tour",
    "load_tour",
]

_MAGIC = b"DTC1"
_VERSION = 1

# Stored bases may drift this far from orthonormality and still be
# repaired silently on load; anything worse is rejected.
_DRIFT_REPAIR_LIMIT = 1e-6


@dataclass
class LabelColumn:
    """A non-embedded column: categorical codes + dictionary, or floats."""

    name: str
    kind: str  # "categorical" | "continuous"
    codes: Optional[np.ndarray] = None  # uint16, categorical only
    categories: Optional[list] = None
    values: Optional[np.ndarray] = None  # float32, continuous only

    def __len__(self):
        return len(self.codes) if self.kind == "categorical" else len(self.values)


@dataclass
class Dataset:
    """Column-major numeric data plus label columns.

    ``columns`` holds p float32 arrays of equal length; ``dim_names``
    are unique. Immutable by convention after construction.
    """

    columns: list
    dim_names: list
    labels: list = field(default_factory=list)
    dropped_rows: int = 0

    def __post_init__(self):
        if len(self.columns) != len(self.dim_names):
            raise ValueError("one name per column required")
        if len(set(self.dim_names)) != len(self.dim_names):
            raise ValueError("dim_names must be unique")
        n = len(self.columns[0]) if self.columns else 0
        cols = []
        for c in self.columns:
            arr = np.asarray(c, dtype=np.float32)
            if arr.ndim != 1 or len(arr) != n:
                raise ValueError("all columns must be 1-D and the same length")
            cols.append(arr)
        self.columns = cols
        for lab in self.labels:
            if len(lab) != n:
                raise ValueError(f"label column {lab.name!r} length mismatch")

    @property
    def n_rows(self):
        return len(self.columns[0]) if self.columns else 0

    @property
    def n_dims(self):
        return len(self.columns)

    def matrix(self, dtype=np.float64):
        """Row-major copy of the embedded columns."""
        return np.column_stack([c.astype(dtype) for c in self.columns])

    def label(self, name):
        for lab in self.labels:
            if lab.name == name:
                return lab
        raise MissingColumn(f"no label column named {name!r}")


def _parse_numeric_column(cells, col_name, line_offset):
    """Vectorized float parse with precise error reporting on failure."""
    cleaned = ["nan" if c.strip() == "" else c for c in cells]
    try:
        return np.array(cleaned, dtype=np.float64)
    except ValueError:
        for i, c in enumerate(cleaned):
            try:
                float(c)
            except ValueError:
                raise ParseError(
                    f"line {i + 1 + line_offset}: cannot parse {c!r} in column {col_name!r}",
                    line=i + 1 + line_offset,
                    column=col_name,
                ) from None
        raise


def load_csv(path, *, delimiter=",", header=True, embed_columns=None, label_columns=None):
    """Read a delimited text file into a Dataset.

    ``embed_columns`` defaults to every column not named in
    ``label_columns``. Rows with non-finite values in any embedded (or
    continuous label) column are dropped, counted, and warned about.
    Label columns are auto-typed: fully numeric means continuous,
    anything else categorical. Row order of the file is preserved.
    """
    label_columns = list(label_columns or [])
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f, delimiter=delimiter)
        try:
            rows = list(reader)
        except csv.Error as exc:
            raise ParseError(f"malformed CSV: {exc}", line=reader.line_num) from exc

    if not rows:
        raise EmptyDataset(f"{path} has no rows")

    if header:
        names = [c.strip() for c in rows[0]]
        body = rows[1:]
        line_offset = 1
    else:
        names = [f"col{i}" for i in range(len(rows[0]))]
        body = rows
        line_offset = 0

    width = len(names)
    for i, row in enumerate(body):
        if len(row) != width:
            raise ParseError(
                f"line {i + 1 + line_offset}: expected {width} fields, got {len(row)}",
                line=i + 1 + line_offset,
            )
    if not body:
        raise EmptyDataset(f"{path} has a header but no data rows")

    index = {name: i for i, name in enumerate(names)}
    for name in label_columns:
        if name not in index:
            raise MissingColumn(f"label column {name!r} not in {path}")
    if embed_columns is None:
        embed_columns = [n for n in names if n not in set(label_columns)]
    else:
        for name in embed_columns:
            if name not in index:
                raise MissingColumn(f"embed column {name!r} not in {path}")
    if not embed_columns:
        raise EmptyDataset("no embedded columns selected")

    embed_data = [
        _parse_numeric_column([r[index[name]] for r in body], name, line_offset)
        for name in embed_columns
    ]

    labels = []
    label_numeric = {}
    for name in label_columns:
        cells = [r[index[name]] for r in body]
        try:
            label_numeric[name] = _parse_numeric_column(cells, name, line_offset)
            kind = "continuous"
        except ParseError:
            kind = "categorical"
        labels.append((name, kind, cells))

    keep = np.ones(len(body), dtype=bool)
    for arr in embed_data:
        keep &= np.isfinite(arr)
    for name, kind, _ in labels:
        if kind == "continuous":
            keep &= np.isfinite(label_numeric[name])
    dropped = int(len(body) - keep.sum())
    if dropped:
        warnings.warn(
            f"dropped {dropped} row(s) with non-finite values",
            DroppedRowsWarning,
            stacklevel=2,
        )
    if not keep.any():
        raise EmptyDataset("all rows dropped as non-finite")

    columns = [arr[keep].astype(np.float32) for arr in embed_data]
    label_objs = []
    for name, kind, cells in labels:
        if kind == "continuous":
            label_objs.append(
                LabelColumn(name, "continuous", values=label_numeric[name][keep].astype(np.float32))
            )
        else:
            kept = [c for c, k in zip(cells, keep) if k]
            cats = sorted(set(kept))
            if len(cats) > 65535:
                raise ParseError(f"label column {name!r} has too many categories")
            lookup = {c: i for i, c in enumerate(cats)}
            codes = np.array([lookup[c] for c in kept], dtype=np.uint16)
            label_objs.append(LabelColumn(name, "categorical", codes=codes, categories=cats))

    return Dataset(columns, list(embed_columns), label_objs, dropped_rows=dropped)


def save_columnar(ds: Dataset, path):
    """Write a Dataset as DTC1: header, p float32 blocks, label block.

    Dimension names are not part of the format; loaders synthesize
    placeholder names (tour files carry the real ones).
    """
    if ds.n_rows == 0:
        raise EmptyDataset("refusing to write a dataset with zero rows")
    n, p = ds.n_rows, ds.n_dims

    label_buf = io.BytesIO()
    for lab in ds.labels:
        enc = lab.name.encode("utf-8")
        label_buf.write(struct.pack("<I", len(enc)))
        label_buf.write(enc)
        if lab.kind == "categorical":
            label_buf.write(struct.pack("<B", 0))
            label_buf.write(struct.pack("<I", len(lab.categories)))
            for cat in lab.categories:
                cenc = str(cat).encode("utf-8")
                label_buf.write(struct.pack("<I", len(cenc)))
                label_buf.write(cenc)
            label_buf.write(np.ascontiguousarray(lab.codes, dtype="<u2").tobytes())
        else:
            label_buf.write(struct.pack("<B", 1))
            label_buf.write(np.ascontiguousarray(lab.values, dtype="<f4").tobytes())
    label_bytes = label_buf.getvalue()

    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<IIII", _VERSION, n, p, len(label_bytes)))
        for col in ds.columns:
            f.write(np.ascontiguousarray(col, dtype="<f4").tobytes())
        f.write(label_bytes)


class _Cursor:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.data):
            raise TruncatedFile(f"needed {n} bytes at offset {self.pos}, file ends early")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self):
        return struct.unpack("<I", self.take(4))[0]

    def u8(self):
        return struct.unpack("<B", self.take(1))[0]


def load_columnar(path) -> Dataset:
    """Read a DTC1 file back into a Dataset, bit-exact."""
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < 4 or data[:4] != _MAGIC:
        if len(data) >= 4:
            raise BadMagic(f"{path} does not start with {_MAGIC!r}")
        raise TruncatedFile(f"{path} is shorter than the magic header")
    cur = _Cursor(data)
    cur.take(4)
    version, n, p, label_len = struct.unpack("<IIII", cur.take(16))
    if version != _VERSION:
        raise VersionUnsupported(f"format version {version}, this build reads {_VERSION}")
    if n == 0:
        raise EmptyDataset(f"{path} declares zero rows")
    expected = 20 + p * n * 4 + label_len
    if len(data) < expected:
        raise TruncatedFile(f"{path}: expected {expected} bytes, found {len(data)}")
    if len(data) > expected:
        raise ParseError(f"{path}: {len(data) - expected} trailing byte(s) after payload")

    columns = []
    for _ in range(p):
        block = cur.take(n * 4)
        columns.append(np.frombuffer(block, dtype="<f4").copy())

    labels = []
    end = cur.pos + label_len
    while cur.pos < end:
        name = cur.take(cur.u32()).decode("utf-8")
        kind = cur.u8()
        if kind == 0:
            n_cat = cur.u32()
            cats = [cur.take(cur.u32()).decode("utf-8") for _ in range(n_cat)]
            codes = np.frombuffer(cur.take(n * 2), dtype="<u2").copy()
            labels.append(LabelColumn(name, "categorical", codes=codes, categories=cats))
        elif kind == 1:
            values = np.frombuffer(cur.take(n * 4), dtype="<f4").copy()
            labels.append(LabelColumn(name, "continuous", values=values))
        else:
            raise ParseError(f"{path}: unknown label kind {kind}")
    if cur.pos != end:
        raise ParseError(f"{path}: label block overran its declared length")
    dim_names = [f"col{i}" for i in range(p)]
    return Dataset(columns, dim_names, labels)


@dataclass(frozen=True)
class StandardizeRecord:
    """Per-column affine transform applied to the embedded columns.

    standardized = (raw - offset) * scale. Kept so axis-handle readouts
    can report raw units, and so a tour built on standardized data can
    be reproduced when serving.
    """

    mode: str
    offset: np.ndarray
    scale: np.ndarray

    def apply(self, matrix):
        return (matrix - self.offset) * self.scale


def standardize(ds: Dataset, mode="zscore"):
    """Rescale embedded columns; returns (new dataset, transform record).

    zscore: mean 0, population sd 1 per column. unit_range: min 0, max 1.
    Columns with no spread are zeroed with a warning. Label columns pass
    through untouched.
    """
    if mode not in ("none", "zscore", "unit_range"):
        raise ValueError(f"unknown standardize mode {mode!r}")
    p = ds.n_dims
    offset = np.zeros(p)
    scale = np.ones(p)
    if mode == "none":
        return ds, StandardizeRecord("none", offset, scale)

    new_cols = []
    for j, col in enumerate(ds.columns):
        c = col.astype(np.float64)
        if mode == "zscore":
            offset[j] = c.mean()
            sd = c.std()
            if sd < 1e-12:
                warnings.warn(
                    f"column {ds.dim_names[j]!r} is constant; zeroed",
                    ConstantColumnWarning,
                    stacklevel=2,
                )
                scale[j] = 0.0
            else:
                scale[j] = 1.0 / sd
        else:
            lo, hi = c.min(), c.max()
            offset[j] = lo
            if hi - lo < 1e-12:
                warnings.warn(
                    f"column {ds.dim_names[j]!r} has no range; zeroed",
                    ConstantColumnWarning,
                    stacklevel=2,
                )
                scale[j] = 0.0
            else:
                scale[j] = 1.0 / (hi - lo)
        new_cols.append(((c - offset[j]) * scale[j]).astype(np.float32))

    out = Dataset(new_cols, list(ds.dim_names), list(ds.labels), dropped_rows=ds.dropped_rows)
    return out, StandardizeRecord(mode, offset, scale)


@dataclass
class TourFile:
    """Serializable tour: keyframes plus the context needed to serve them."""

    dims: int
    dim_names: list
    strategy: str
    cyclic: bool
    keyframes: list
    standardize: str = "none"
    version: int = 1

    def sequence(self) -> KeyframeSequence:
        return KeyframeSequence(list(self.keyframes), cyclic=self.cyclic)

    @classmethod
    def from_sequence(cls, seq: KeyframeSequence, dim_names, strategy, standardize="none"):
        if len(dim_names) != seq.dims:
            raise ValueError(f"{len(dim_names)} names for {seq.dims} dims")
        return cls(
            dims=seq.dims,
            dim_names=list(dim_names),
            strategy=strategy,
            cyclic=seq.cyclic,
            keyframes=list(seq.keyframes),
            standardize=standardize,
        )


def save_tour(tf: TourFile, path):
    """Write a tour as JSON; basis entries keep full double precision."""
    doc = {
        "version": tf.version,
        "dims": tf.dims,
        "dim_names": list(tf.dim_names),
        "strategy": tf.strategy,
        "cyclic": tf.cyclic,
        "standardize": tf.standardize,
        "keyframes": [
            {
                "basis": [float(x) for x in k.basis.ravel(order="C")],
                "label": k.label,
                "loadings": [[i, w] for i, w in k.loadings] if k.loadings else None,
            }
            for k in tf.keyframes
        ],
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=1)
        f.write("\n")


def _require(doc, key, types, where):
    if key not in doc:
        raise SchemaError(f"{where}: missing {key!r}")
    if not isinstance(doc[key], types):
        raise SchemaError(f"{where}: {key!r} has wrong type")
    return doc[key]


def load_tour(path) -> TourFile:
    """Read and validate a tour JSON file.

    Every stored basis is re-checked for orthonormality: drift at or
    under 1e-10 is accepted as-is (round-trips are then exact), drift up
    to 1e-6 is silently repaired by projection to the nearest
    orthonormal matrix, and anything larger raises
    OrthonormalityViolation with the keyframe index.
    """
    with open(path, encoding="utf-8") as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise SchemaError(f"{path}: top level must be an object")

    version = _require(doc, "version", int, path)
    if version != 1:
        raise VersionUnsupported(f"{path}: tour version {version}")
    dims = _require(doc, "dims", int, path)
    if dims < 2:
        raise SchemaError(f"{path}: dims must be >= 2")
    dim_names = _require(doc, "dim_names", list, path)
    if len(dim_names) != dims or not all(isinstance(x, str) for x in dim_names):
        raise SchemaError(f"{path}: dim_names must be {dims} strings")
    strategy = _require(doc, "strategy", str, path)
    cyclic = _require(doc, "cyclic", bool, path)
    std_mode = doc.get("standardize", "none")
    if std_mode not in ("none", "zscore", "unit_range"):
        raise SchemaError(f"{path}: bad standardize mode {std_mode!r}")
    raw_frames = _require(doc, "keyframes", list, path)
    if len(raw_frames) < 2:
        raise SchemaError(f"{path}: a tour needs at least 2 keyframes")

    keyframes = []
    for idx, item in enumerate(raw_frames):
        where = f"{path} keyframe {idx}"
        if not isinstance(item, dict):
            raise SchemaError(f"{where}: must be an object")
        flat = _require(item, "basis", list, where)
        if len(flat) != 2 * dims:
            raise SchemaError(f"{where}: basis needs {2 * dims} numbers, got {len(flat)}")
        try:
            basis = np.array(flat, dtype=np.float64).reshape(dims, 2)
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"{where}: basis entries must be numbers") from exc
        if not np.isfinite(basis).all():
            raise SchemaError(f"{where}: basis contains non-finite values")
        drift = basis_drift(basis)
        if drift > _DRIFT_REPAIR_LIMIT:
            raise OrthonormalityViolation(
                f"{where}: basis drift {drift:.3e} exceeds repair limit",
                keyframe=idx,
                drift=drift,
            )
        if drift > BASIS_ATOL:
            basis = nearest_orthonormal(basis)
        label = item.get("label", "")
        if not isinstance(label, str):
            raise SchemaError(f"{where}: label must be a string")
        loadings = item.get("loadings")
        if loadings is not None:
            if not isinstance(loadings, list):
                raise SchemaError(f"{where}: loadings must be a list")
            try:
                loadings = tuple((int(i), float(w)) for i, w in loadings)
            except (TypeError, ValueError) as exc:
                raise SchemaError(f"{where}: loadings must be [index, weight] pairs") from exc
        try:
            keyframes.append(Keyframe(basis, label=label, loadings=loadings))
        except ValueError as exc:
            raise SchemaError(f"{where}: {exc}") from exc

    return TourFile(
        dims=dims,
        dim_names=list(dim_names),
        strategy=strategy,
        cyclic=cyclic,
        keyframes=keyframes,
        standardize=std_mode,
        version=version,
    )
