"""Small column-table container for sweep outputs and CSV emission."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def format_float(v: float) -> str:
    """Shortest round-trip decimal form, '.' separator, no locale."""
    return repr(float(v))


@dataclass
class SweepTable:
    header: tuple
    rows: np.ndarray  # shape (n_rows, len(header))
    extras: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return self.rows[:, self.header.index(name)]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(",".join(self.header) + "\n")
            for row in self.rows:
                fh.write(",".join(format_float(v) for v in row) + "\n")
