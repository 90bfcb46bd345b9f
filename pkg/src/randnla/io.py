"""Dense matrix I/O: Matrix Market (array and coordinate) and CSV.

The Matrix Market reader is hand-written so that every parse error can name
the offending line.  Values are written with 17 significant digits, enough
for an exact float64 round trip.
"""

import csv
import os

import numpy as np

from .linalg import as_matrix

__all__ = ["MatrixParseError", "load_matrix", "save_matrix", "FORMATS"]

FORMATS = ("matrix-market", "csv")


class MatrixParseError(ValueError):
    def __init__(self, path, line, msg):
        super().__init__(f"{path}:{line}: {msg}")
        self.path = path
        self.line = line


def _guess_format(path):
    ext = os.path.splitext(str(path))[1].lower()
    if ext in (".mtx", ".mm"):
        return "matrix-market"
    if ext in (".csv", ".txt"):
        return "csv"
    raise ValueError(f"cannot infer the format of {path}; pass format explicitly")


def _float(tok, path, line):
    try:
        v = float(tok)
    except ValueError:
        raise MatrixParseError(path, line, f"not a number: {tok!r}") from None
    if not np.isfinite(v):
        raise MatrixParseError(path, line, f"non-finite value {tok!r}")
    return v


def _int(tok, path, line, what):
    try:
        v = int(tok)
    except ValueError:
        raise MatrixParseError(path, line, f"{what} is not an integer: {tok!r}") from None
    return v


def _read_mm(path):
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise MatrixParseError(path, 1, "empty file")
    head = lines[0].split()
    if len(head) != 5 or head[0].lower() != "%%matrixmarket" or head[1].lower() != "matrix":
        raise MatrixParseError(path, 1, "missing '%%MatrixMarket matrix' banner")
    layout, field, symmetry = (h.lower() for h in head[2:])
    if layout not in ("array", "coordinate"):
        raise MatrixParseError(path, 1, f"unsupported layout {layout!r}")
    if field not in ("real", "integer", "double"):
        raise MatrixParseError(path, 1, f"unsupported field {field!r}")
    if symmetry not in ("general", "symmetric"):
        raise MatrixParseError(path, 1, f"unsupported symmetry {symmetry!r}")

    body = [(i + 1, ln.split()) for i, ln in enumerate(lines[1:], start=1)
            if ln.strip() and not ln.lstrip().startswith("%")]
    if not body:
        raise MatrixParseError(path, len(lines), "missing size line")
    size_line, size = body[0]
    want = 2 if layout == "array" else 3
    if len(size) != want:
        raise MatrixParseError(path, size_line, f"size line needs {want} integers")
    dims = [_int(t, path, size_line, "size") for t in size]
    m, n = dims[0], dims[1]
    if m < 0 or n < 0:
        raise MatrixParseError(path, size_line, "negative dimension")
    if symmetry == "symmetric" and m != n:
        raise MatrixParseError(path, size_line, "symmetric matrix must be square")
    entries = body[1:]
    M = np.zeros((m, n))

    if layout == "array":
        if symmetry == "general":
            slots = [(i, j) for j in range(n) for i in range(m)]
        else:
            slots = [(i, j) for j in range(n) for i in range(j, m)]
        if len(entries) != len(slots):
            last = entries[-1][0] if entries else size_line
            raise MatrixParseError(path, last,
                                   f"expected {len(slots)} values, found {len(entries)}")
        for (ln, toks), (i, j) in zip(entries, slots):
            if len(toks) != 1:
                raise MatrixParseError(path, ln, "array entries hold one value per line")
            M[i, j] = _float(toks[0], path, ln)
            if symmetry == "symmetric":
                M[j, i] = M[i, j]
        return M

    nnz = dims[2]
    if len(entries) != nnz:
        last = entries[-1][0] if entries else size_line
        raise MatrixParseError(path, last, f"header declares {nnz} entries, found {len(entries)}")
    for ln, toks in entries:
        if len(toks) != 3:
            raise MatrixParseError(path, ln, "coordinate entries need 'row col value'")
        i = _int(toks[0], path, ln, "row index") - 1
        j = _int(toks[1], path, ln, "column index") - 1
        if not (0 <= i < m and 0 <= j < n):
            raise MatrixParseError(path, ln, f"index ({i + 1}, {j + 1}) outside {m}x{n}")
        v = _float(toks[2], path, ln)
        M[i, j] += v
        if symmetry == "symmetric" and i != j:
            M[j, i] += v
    return M


def _read_csv(path):
    rows = []
    width = None
    with open(path, newline="", encoding="utf-8") as fh:
        for ln, rec in enumerate(csv.reader(fh), start=1):
            if not rec or all(not f.strip() for f in rec):
                continue
            vals = [_float(f.strip(), path, ln) for f in rec]
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise MatrixParseError(path, ln, f"expected {width} fields, found {len(vals)}")
            rows.append(vals)
    if not rows:
        raise MatrixParseError(path, 1, "no data rows")
    return np.array(rows, dtype=np.float64)


def load_matrix(path, format=None):
    """Read a dense ``float64`` matrix; ``format`` is inferred from the extension if omitted."""
    fmt = format or _guess_format(path)
    if fmt == "matrix-market":
        return _read_mm(path)
    if fmt == "csv":
        return _read_csv(path)
    raise ValueError(f"unknown format {fmt!r}; expected one of {FORMATS}")


def _fmt(v):
    return format(float(v), ".17g")


def save_matrix(M, path, format=None, layout="array"):
    """Write ``M``.  Matrix Market output is ``array`` or ``coordinate`` (nonzeros only)."""
    M = np.asarray(M, dtype=np.float64)
    if M.ndim == 1:
        M = M[:, None]
    M = as_matrix(M, "M")
    fmt = format or _guess_format(path)
    if fmt == "csv":
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            for row in M:
                w.writerow([_fmt(v) for v in row])
        return
    if fmt != "matrix-market":
        raise ValueError(f"unknown format {fmt!r}; expected one of {FORMATS}")
    m, n = M.shape
    with open(path, "w", encoding="ascii") as fh:
        if layout == "array":
            fh.write("%%MatrixMarket matrix array real general\n")
            fh.write(f"{m} {n}\n")
            for v in M.T.reshape(-1):
                fh.write(_fmt(v) + "\n")
        elif layout == "coordinate":
            rows, cols = np.nonzero(M)
            fh.write("%%MatrixMarket matrix coordinate real general\n")
            fh.write(f"{m} {n} {rows.size}\n")
            for i, j in zip(rows, cols):
                fh.write(f"{i + 1} {j + 1} {_fmt(M[i, j])}\n")
        else:
            raise ValueError(f"unknown Matrix Market layout {layout!r}")
