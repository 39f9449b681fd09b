"""Text dataset files shared by `gen` (writer) and `learn` (reader).

Format:
    d=<int> n=<int>
    x_1 ... x_d <+1|-1>      (n lines, coordinates at 17 significant digits)

Functions:
    write_dataset(S, path)
        Writes S; float coordinates round-trip exactly.
    read_dataset(path) -> LabeledDataset
        Raises DatasetFormatError on a bad header, a malformed row, a label
        outside {+1, -1}, or a row count that disagrees with the header
        (truncated files). FileNotFoundError propagates unchanged.
"""
from __future__ import annotations

import logging
import os
import re

import numpy as np

from ..schemas.halfspace import LabeledDataset

logger = logging.getLogger(__name__)

_HEADER = re.compile(r"^\s*d=(\d+)\s+n=(\d+)\s*$")


class DatasetFormatError(RuntimeError):
    pass


def write_dataset(S: LabeledDataset, path: str) -> None:
    rows = np.column_stack([S.x, S.y.astype(np.float64)])
    fmt = ["%.17g"] * S.d + ["%+d"]
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"d={S.d} n={S.n}\n")
        if S.n:
            np.savetxt(fh, rows, fmt=fmt, delimiter=" ")
    logger.info("wrote %d points (d=%d) to %s", S.n, S.d, path)


def _parse_header(line: str, path: str) -> tuple[int, int]:
    match = _HEADER.match(line)
    if not match:
        raise DatasetFormatError(f"{path}: expected header 'd=<int> n=<int>', got {line.strip()!r}")
    d, n = int(match.group(1)), int(match.group(2))
    if d < 1:
        raise DatasetFormatError(f"{path}: dimension must be positive, got d={d}")
    return d, n


def read_dataset(path: str) -> LabeledDataset:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        d, n = _parse_header(header, path)
        try:
            rows = np.loadtxt(fh, dtype=np.float64, ndmin=2)
        except ValueError as e:
            raise DatasetFormatError(f"{path}: malformed row ({e})") from e

    if rows.size == 0:
        rows = rows.reshape(0, d + 1)
    if rows.shape[0] != n:
        raise DatasetFormatError(f"{path}: header announces n={n} but {rows.shape[0]} rows were read")
    if rows.shape[1] != d + 1:
        raise DatasetFormatError(f"{path}: rows have {rows.shape[1]} columns, expected {d + 1}")
    labels = rows[:, d]
    if not np.all((labels == 1.0) | (labels == -1.0)):
        raise DatasetFormatError(f"{path}: labels must be +1 or -1")
    logger.info("read %d points (d=%d) from %s", n, d, path)
    return LabeledDataset(x=rows[:, :d], y=labels.astype(np.int8))


__all__ = ["DatasetFormatError", "read_dataset", "write_dataset"]
