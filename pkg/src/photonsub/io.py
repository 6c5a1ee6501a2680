"""File formats: CSV matrices, key/value reports, gnuplot data+script pairs.

Everything here is byte-deterministic. Floats are serialized with repr() so a
write/read cycle returns the exact same doubles; reports carry no wall-clock
fields for the same reason (a report regenerated from the same inputs must
compare equal).

Matrix CSV layout: header "n\\m,0,1,...", one row per n index. Trace CSV
layout: one pulse record per line, plain comma-separated samples, no header.
"""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .config import DomainError

__all__ = [
    "format_report",
    "parse_report",
    "read_columns_csv",
    "read_matrix_csv",
    "read_traces_csv",
    "write_columns_csv",
    "write_gnuplot_heatmap",
    "write_gnuplot_series",
    "write_matrix_csv",
    "write_report",
]

_HEADER_CORNER = "n\\m"


def write_matrix_csv(path, matrix) -> None:
    """Write a 2-D matrix with an index header row and index column."""
    m = np.asarray(matrix)
    if m.ndim != 2 or m.size == 0:
        raise DomainError("matrix must be 2-D and non-empty")
    is_int = np.issubdtype(m.dtype, np.integer)
    lines = [_HEADER_CORNER + "," + ",".join(str(j) for j in range(m.shape[1]))]
    for i, row in enumerate(m):
        cells = (str(int(v)) if is_int else repr(float(v)) for v in row)
        lines.append(str(i) + "," + ",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


def read_matrix_csv(path, dtype=float) -> np.ndarray:
    """Read a matrix written by write_matrix_csv; exact inverse for floats.

    Malformed content raises DomainError naming the offending line and column.
    """
    text = Path(path).read_text()
    lines = [ln for ln in text.split("\n") if ln.strip()]
    if not lines:
        raise DomainError(f"{path}: empty matrix file")
    head = lines[0].split(",")
    if head[0] != _HEADER_CORNER:
        raise DomainError(f"{path}: line 1: expected header starting with "
                          f"'{_HEADER_CORNER}', got '{head[0]}'")
    n_cols = len(head) - 1
    if n_cols == 0:
        raise DomainError(f"{path}: line 1: header names no columns")
    rows = []
    for ln_no, ln in enumerate(lines[1:], start=2):
        parts = ln.split(",")
        if len(parts) != n_cols + 1:
            raise DomainError(f"{path}: line {ln_no}: expected {n_cols + 1} "
                              f"fields, got {len(parts)}")
        if parts[0] != str(ln_no - 2):
            raise DomainError(f"{path}: line {ln_no}: column 1: expected row "
                              f"index {ln_no - 2}, got '{parts[0]}'")
        row = []
        for col, cell in enumerate(parts[1:], start=2):
            try:
                v = dtype(cell)
            except ValueError:
                raise DomainError(f"{path}: line {ln_no}: column {col}: "
                                  f"cannot parse '{cell}'") from None
            if isinstance(v, float) and not math.isfinite(v):
                raise DomainError(f"{path}: line {ln_no}: column {col}: "
                                  f"non-finite value '{cell}'")
            row.append(v)
        rows.append(row)
    if not rows:
        raise DomainError(f"{path}: no data rows")
    return np.array(rows, dtype=dtype)


def write_columns_csv(path, labels, columns) -> None:
    """Write labeled columns with a leading index column; floats via repr."""
    cols = [np.asarray(c) for c in columns]
    if len(cols) != len(labels) or not cols:
        raise DomainError("need one label per column")
    if any(c.ndim != 1 or c.size != cols[0].size for c in cols):
        raise DomainError("columns must be 1-D and equal length")
    lines = ["index," + ",".join(labels)]
    for i in range(cols[0].size):
        cells = (str(int(c[i])) if np.issubdtype(c.dtype, np.integer)
                 else repr(float(c[i])) for c in cols)
        lines.append(str(i) + "," + ",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


def read_columns_csv(path):
    """Read a write_columns_csv file.

    Returns:
        (labels, columns) with float columns.
    """
    text = Path(path).read_text()
    lines = [ln for ln in text.split("\n") if ln.strip()]
    if len(lines) < 2:
        raise DomainError(f"{path}: no column data")
    head = lines[0].split(",")
    if head[0] != "index" or len(head) < 2:
        raise DomainError(f"{path}: line 1: expected 'index,<labels>' header")
    labels = head[1:]
    data = []
    for ln_no, ln in enumerate(lines[1:], start=2):
        parts = ln.split(",")
        if len(parts) != len(head):
            raise DomainError(f"{path}: line {ln_no}: expected {len(head)} "
                              f"fields, got {len(parts)}")
        try:
            data.append([float(p) for p in parts[1:]])
        except ValueError:
            raise DomainError(f"{path}: line {ln_no}: unparseable value") from None
    arr = np.array(data)
    return labels, [arr[:, k] for k in range(arr.shape[1])]


def read_traces_csv(path) -> np.ndarray:
    """Read pulse records, one comma-separated record per line.

    All records must have the same length; a mismatch names the record index.
    """
    text = Path(path).read_text()
    lines = [ln for ln in text.split("\n") if ln.strip()]
    if not lines:
        raise DomainError(f"{path}: no trace records")
    records = []
    width = None
    for rec_no, ln in enumerate(lines):
        parts = ln.split(",")
        if width is None:
            width = len(parts)
        elif len(parts) != width:
            raise DomainError(f"{path}: record {rec_no}: length {len(parts)} "
                              f"does not match first record length {width}")
        try:
            records.append([float(p) for p in parts])
        except ValueError:
            raise DomainError(f"{path}: record {rec_no}: unparseable sample") from None
    out = np.array(records)
    if not np.all(np.isfinite(out)):
        raise DomainError(f"{path}: non-finite sample value")
    return out


def _fmt_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (tuple, list)):
        return ", ".join(_fmt_value(x) for x in v)
    return str(v)


def format_report(sections) -> str:
    """Render [section] blocks of key = value lines; deterministic bytes.

    sections: mapping of section name -> mapping of key -> value. Insertion
    order is preserved. Values: bool, int, float, str, or flat sequences.
    """
    out = []
    for name, body in sections.items():
        out.append(f"[{name}]")
        for key, value in body.items():
            out.append(f"{key} = {_fmt_value(value)}")
        out.append("")
    return "\n".join(out)


def write_report(path, sections) -> None:
    Path(path).write_text(format_report(sections))


def parse_report(text) -> dict:
    """Inverse of format_report, with scalar values recovered by type sniffing
    (bool, int, float, then string; sequences come back as strings)."""
    sections: dict = {}
    current = None
    for ln_no, ln in enumerate(text.split("\n"), start=1):
        ln = ln.strip()
        if not ln:
            continue
        if ln.startswith("[") and ln.endswith("]"):
            current = ln[1:-1]
            sections[current] = {}
            continue
        if " = " not in ln or current is None:
            raise DomainError(f"report line {ln_no}: expected 'key = value' "
                              f"inside a [section], got '{ln}'")
        key, raw = ln.split(" = ", 1)
        if raw == "true":
            v = True
        elif raw == "false":
            v = False
        else:
            try:
                v = int(raw)
            except ValueError:
                try:
                    v = float(raw)
                except ValueError:
                    v = raw
        sections[current][key] = v
    return sections


def write_gnuplot_heatmap(out_dir, stem, matrix, title, xlabel="m", ylabel="n") -> None:
    """Emit stem.dat (x y value triples) and stem.gp for a matrix heat map."""
    m = np.asarray(matrix, dtype=float)
    out_dir = Path(out_dir)
    rows = []
    for i in range(m.shape[0]):
        for j in range(m.shape[1]):
            rows.append(f"{j} {i} {repr(m[i, j])}")
        rows.append("")
    (out_dir / f"{stem}.dat").write_text("\n".join(rows) + "\n")
    gp = (f"set title '{title}'\n"
          f"set xlabel '{xlabel}'\nset ylabel '{ylabel}'\n"
          f"set view map\n"
          f"splot '{stem}.dat' using 1:2:3 with image notitle\n")
    (out_dir / f"{stem}.gp").write_text(gp)


def write_gnuplot_series(out_dir, stem, columns, labels, title, xlabel="n") -> None:
    """Emit stem.dat (index + one column per series) and a lines stem.gp."""
    cols = [np.asarray(c, dtype=float) for c in columns]
    if not cols or any(c.shape != cols[0].shape for c in cols):
        raise DomainError("series columns must be non-empty and equal length")
    out_dir = Path(out_dir)
    lines = ["# index " + " ".join(labels)]
    for i in range(cols[0].size):
        lines.append(f"{i} " + " ".join(repr(float(c[i])) for c in cols))
    (out_dir / f"{stem}.dat").write_text("\n".join(lines) + "\n")
    plots = ", ".join(f"'{stem}.dat' using 1:{k + 2} with linespoints "
                      f"title '{lab}'" for k, lab in enumerate(labels))
    gp = (f"set title '{title}'\nset xlabel '{xlabel}'\n"
          f"plot {plots}\n")
    (out_dir / f"{stem}.gp").write_text(gp)
