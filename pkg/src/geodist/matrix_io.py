"""Plain-text matrix format and atomic file writes.

The format is a header line ``n d`` followed by ``n`` lines of ``d``
space-separated floats written with 17 significant digits, so values
survive a write/read round trip bit for bit.
"""

import os
import tempfile

import numpy as np

from .core import as_matrix


class MatrixFormatError(ValueError):
    pass


def format_matrix(M):
    A = as_matrix(M)
    lines = [f"{A.shape[0]} {A.shape[1]}"]
    for row in A:
        lines.append(" ".join(f"{x:.17g}" for x in row))
    return "\n".join(lines) + "\n"


def parse_matrix(text):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise MatrixFormatError("empty matrix file")
    header = lines[0].split()
    if len(header) != 2:
        raise MatrixFormatError(f"bad header {lines[0]!r}, expected 'n d'")
    try:
        n, d = int(header[0]), int(header[1])
    except ValueError as exc:
        raise MatrixFormatError(f"bad header {lines[0]!r}") from exc
    if n < 1 or d < 1:
        raise MatrixFormatError(f"non-positive shape {n}x{d}")
    if len(lines) - 1 != n:
        raise MatrixFormatError(f"expected {n} rows, found {len(lines) - 1}")
    out = np.empty((n, d))
    for i, line in enumerate(lines[1:]):
        fields = line.split()
        if len(fields) != d:
            raise MatrixFormatError(f"row {i} has {len(fields)} entries, expected {d}")
        try:
            out[i] = [float(f) for f in fields]
        except ValueError as exc:
            raise MatrixFormatError(f"row {i}: {exc}") from exc
    if not np.all(np.isfinite(out)):
        raise MatrixFormatError("matrix has non-finite entries")
    return out


def read_matrix(path):
    with open(path, encoding="utf-8") as fh:
        return parse_matrix(fh.read())


def atomic_write_text(path, text):
    """Write ``text`` to ``path`` via a temporary file and rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_matrix(path, M):
    atomic_write_text(path, format_matrix(M))
