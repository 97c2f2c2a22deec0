"""CSV output: one ``#`` comment line, a header line, rows at 17 significant digits."""

from pathlib import Path

import numpy as np


def write_csv(path, header, data, comment=None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = np.asarray(data, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    if data.shape[1] != len(header):
        raise ValueError(f"{len(header)} columns in header, {data.shape[1]} in data")
    with open(path, "w", newline="\n") as fh:
        if comment is not None:
            fh.write(f"# {comment}\n")
        fh.write(",".join(header) + "\n")
        if data.size:
            np.savetxt(fh, data, fmt="%.17g", delimiter=",")
    return path


def read_csv(path):
    """Inverse of :func:`write_csv`: ``(comment, header, data)``."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    comment = None
    if lines and lines[0].startswith("#"):
        comment = lines[0][1:].strip()
        lines = lines[1:]
    header = lines[0].split(",")
    rows = [list(map(float, ln.split(","))) for ln in lines[1:] if ln]
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return comment, header, data
