"""Numeric CSV tables."""

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ParseError


@dataclass(eq=False)
class Table:
    columns: list
    data: np.ndarray
    label_columns: list
    labels: np.ndarray | None

    @property
    def n_rows(self):
        return self.data.shape[0]

    @property
    def feature_columns(self):
        return [c for c in self.columns if c not in self.label_columns]

    @property
    def features(self):
        keep = [i for i, c in enumerate(self.columns) if c not in self.label_columns]
        return self.data[:, keep]

    def column(self, name):
        return self.data[:, self.columns.index(name)]

    def int_labels(self):
        if self.labels is None or self.labels.shape[1] != 1:
            raise ParseError("expected exactly one label column")
        lab = self.labels[:, 0]
        if np.any(lab != np.round(lab)) or np.any(lab < 0):
            raise ParseError("label column must hold non-negative integers")
        return lab.astype(np.int64)


def _split_names(label_column):
    if label_column is None:
        return []
    if isinstance(label_column, str):
        return [c.strip() for c in label_column.split(",") if c.strip()]
    return list(label_column)


def load_table(path, delimiter=",", header=True, label_column=None):
    """Parse a numeric delimited file; row order is preserved.

    ``label_column`` is a name (or comma-separated names, or a list) of
    columns split off into ``Table.labels``. Without a header, columns are
    named ``c0, c1, ...``.
    """
    wanted = _split_names(label_column)
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        rows = []
        columns = None
        for lineno, row in enumerate(reader, start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if columns is None and header:
                columns = [c.strip() for c in row]
                if len(set(columns)) != len(columns):
                    raise ParseError("duplicate column names in header", line=lineno)
                continue
            if columns is None:
                columns = [f"c{i}" for i in range(len(row))]
            if len(row) != len(columns):
                raise ParseError(f"expected {len(columns)} fields, found {len(row)}", line=lineno)
            try:
                values = [float(cell) for cell in row]
            except ValueError:
                bad = next(c for c in row if not _is_float(c))
                raise ParseError(f"non-numeric cell {bad.strip()!r}", line=lineno) from None
            if not all(np.isfinite(values)):
                raise ParseError("non-finite value", line=lineno)
            rows.append(values)
    if columns is None:
        raise ParseError("empty table")
    data = np.array(rows, dtype=np.float64).reshape(len(rows), len(columns))
    for name in wanted:
        if name not in columns:
            raise ParseError(f"label column {name!r} not found; columns are {columns}")
    labels = data[:, [columns.index(n) for n in wanted]] if wanted else None
    return Table(columns=columns, data=data, label_columns=wanted, labels=labels)


def _is_float(cell):
    try:
        float(cell)
    except ValueError:
        return False
    return True


def format_value(v):
    if np.isfinite(v) and v == np.floor(v) and abs(v) < 1e15:
        return str(int(v))
    return f"{v:.17g}"


def save_table(path, columns, data, delimiter=","):
    """Write a header and rows with 17 significant digits (lossless for float64)."""
    data = np.atleast_2d(np.asarray(data, dtype=np.float64))
    if data.shape[1] != len(columns):
        raise ValueError(f"{len(columns)} column names for {data.shape[1]} columns")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(columns)
        for row in data:
            w.writerow([format_value(v) for v in row])
