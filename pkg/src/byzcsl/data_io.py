"""Reading LIBSVM / numeric CSV data, standardisation, and result writers."""
from dataclasses import dataclass, field
import csv
import io
import json
import math

import numpy as np


class DataFormatError(ValueError):
    """Malformed input; the message names the offending line (and column)."""


@dataclass
class TabularDataset:
    X: np.ndarray
    y: np.ndarray
    column_means: np.ndarray | None = None
    column_stds: np.ndarray | None = None
    columns: list = field(default_factory=list)

    @property
    def N(self):
        return self.X.shape[0]

    @property
    def d(self):
        return self.X.shape[1]


def _lines(source):
    if isinstance(source, str):
        return io.StringIO(source)
    return source


def parse_libsvm(source, d_hint=None, binary=True):
    """Parse ``label idx:val ...`` lines (1-based, strictly increasing indices).

    ``source`` is a text stream or a string. With ``binary`` set, labels 0 and -1
    map to -1 and any positive label maps to +1.
    """
    labels, rows, cols, vals = [], [], [], []
    width = 0
    for lineno, raw in enumerate(_lines(source), start=1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            continue
        if "#" in line:
            raise DataFormatError(f"line {lineno}: comments are not supported")
        tokens = line.split()
        try:
            label = float(tokens[0])
        except ValueError:
            raise DataFormatError(f"line {lineno}, column 1: bad label {tokens[0]!r}") from None
        if binary:
            label = 1.0 if label > 0 else -1.0
        row = len(labels)
        labels.append(label)
        prev = 0
        for col, tok in enumerate(tokens[1:], start=2):
            idx_s, sep, val_s = tok.partition(":")
            try:
                if not sep:
                    raise ValueError
                idx = int(idx_s)
                val = float(val_s)
            except ValueError:
                raise DataFormatError(f"line {lineno}, column {col}: malformed token {tok!r}") from None
            if idx < 1:
                raise DataFormatError(f"line {lineno}, column {col}: index {idx} < 1")
            if idx <= prev:
                raise DataFormatError(f"line {lineno}, column {col}: indices must increase ({prev} then {idx})")
            prev = idx
            rows.append(row)
            cols.append(idx - 1)
            vals.append(val)
        width = max(width, prev)
    d = max(width, d_hint or 0)
    X = np.zeros((len(labels), d))
    if vals:
        X[np.asarray(rows), np.asarray(cols)] = np.asarray(vals)
    return TabularDataset(X, np.asarray(labels, dtype=np.float64))


def _fmt(v):
    return repr(float(v))


def write_libsvm(dataset, stream):
    """Write nonzero entries only, with 1-based indices."""
    for xi, yi in zip(dataset.X, dataset.y):
        parts = [_fmt(yi) if yi not in (1.0, -1.0) else ("+1" if yi > 0 else "-1")]
        for j in np.flatnonzero(xi):
            parts.append(f"{j + 1}:{_fmt(xi[j])}")
        stream.write(" ".join(parts) + "\n")


def parse_numeric_csv(source, target_column, has_header=True, log1p_target=False):
    """Read a comma-separated numeric table and split off ``target_column``.

    Without a header, ``target_column`` is a 0-based column index.
    """
    reader = csv.reader(_lines(source))
    header = None
    rows = []
    width = None
    for lineno, rec in enumerate(reader, start=1):
        if not rec or all(not c.strip() for c in rec):
            continue
        if has_header and header is None:
            header = [c.strip() for c in rec]
            width = len(header)
            continue
        if width is None:
            width = len(rec)
        if len(rec) != width:
            raise DataFormatError(f"line {lineno}: ragged row with {len(rec)} fields, expected {width}")
        vals = []
        for col, cell in enumerate(rec, start=1):
            try:
                vals.append(float(cell))
            except ValueError:
                raise DataFormatError(f"line {lineno}, column {col}: non-numeric cell {cell!r}") from None
        rows.append(vals)
    if width is None:
        raise DataFormatError("empty CSV input")
    names = header or [str(i) for i in range(width)]
    if has_header:
        if target_column not in names:
            raise DataFormatError(f"target column {target_column!r} not in header")
        t = names.index(target_column)
    else:
        t = int(target_column)
        if not 0 <= t < width:
            raise DataFormatError(f"target column {t} out of range")
    A = np.asarray(rows, dtype=np.float64).reshape(-1, width)
    y = A[:, t].copy()
    if log1p_target:
        y = np.log1p(y)
    X = np.delete(A, t, axis=1)
    return TabularDataset(X, y, columns=[c for i, c in enumerate(names) if i != t])


@dataclass
class StandardizeTransform:
    keep: np.ndarray  # indices of retained columns
    means: np.ndarray
    stds: np.ndarray
    dropped: list

    def apply(self, ds):
        X = (ds.X[:, self.keep] - self.means) / self.stds
        cols = [ds.columns[i] for i in self.keep] if ds.columns else []
        return TabularDataset(X, ds.y.copy(), self.means, self.stds, cols)

    def to_dict(self):
        return {
            "keep": self.keep.tolist(),
            "means": self.means.tolist(),
            "stds": self.stds.tolist(),
            "dropped": list(self.dropped),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["keep"], dtype=np.intp), np.asarray(d["means"]),
                   np.asarray(d["stds"]), list(d["dropped"]))


def standardize_fit_apply(train, others=()):
    """Fit column means and population stds on ``train``; apply everywhere.

    Zero-variance columns are dropped from every split.
    """
    if train.N == 0:
        raise ValueError("cannot standardise an empty training set")
    means = train.X.mean(axis=0)
    stds = train.X.std(axis=0)
    keep = np.flatnonzero(stds > 0)
    if keep.size == 0:
        raise ValueError("every column has zero variance")
    dropped = [int(j) for j in np.flatnonzero(stds == 0)]
    tf = StandardizeTransform(keep, means[keep], stds[keep], dropped)
    return tf.apply(train), [tf.apply(o) for o in others], tf


CSV_COLUMNS = (
    "rep", "round", "estimator", "attack", "alpha",
    "l2_error", "l1_error", "fp", "fn", "f1", "accuracy", "mse",
    "time_ms", "floats_sent", "blowup",
)


def format_cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        return repr(v)
    return str(v)


def write_results_csv(rows, path, columns=CSV_COLUMNS):
    """Write dict rows in a fixed column order, UTF-8, ``\\n`` line endings."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(format_cell(row.get(c)) for c in columns) + "\n")


def read_results_csv(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def write_summary_json(summary, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")
