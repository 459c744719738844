"""Embedded reference tables for the reproduction figures.

The CSV fixtures under ``data/`` carry the plotted coordinates of the
source figures; ``cmd_reproduce`` regenerates them from the solvers and
diffs against these tables.
"""

from __future__ import annotations

from importlib import resources

import numpy as np

_FILES = {
    "fig2-left": "fig2_left.csv",
    "fig2-right": "fig2_right.csv",
    "fig3": "fig3.csv",
    "asym-thresholds": "asym_thresholds.csv",
}

FIGURES = tuple(_FILES)


def load(figure: str) -> tuple[tuple[str, ...], np.ndarray]:
    """(header, rows) of the embedded table for one figure."""
    name = _FILES[figure]
    with resources.files("commonpool.data").joinpath(name).open("r") as fh:
        header = tuple(fh.readline().strip().split(","))
        rows = np.array([[float(v) for v in line.split(",")] for line in fh])
    return header, rows
