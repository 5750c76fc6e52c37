"""CSV writers for trajectories, snapshots and density tabulations."""

import csv
import os
from typing import Iterable, Sequence


def write_rows(path: str, fieldnames: Sequence[str], rows: Iterable[Sequence]) -> str:
    """
    Write tuples as a CSV file with a header row.

    Args:
        path: Output file; parent directories are created
        fieldnames: Column names, one per tuple entry
        rows: Row tuples

    Returns:
        The path written
    """
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(fieldnames))
        writer.writeheader()
        for row in rows:
            writer.writerow(dict(zip(fieldnames, row)))
    return path


def read_rows(path: str):
    """Read a CSV written by write_rows as a list of dicts of strings."""
    with open(path, newline="") as handle:
        return list(csv.DictReader(handle))
