"""Densities sampled on uniform one-dimensional grids."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ParseError, ValidationError


def trapezoid_weights(n: int, dx: float) -> np.ndarray:
    w = np.full(n, dx)
    w[0] = w[-1] = dx / 2.0
    return w


@dataclass
class GridDensity:
    """Density values on uniformly spaced nodes.

    ``t`` and ``outflow`` are filled in by time integrators: the snapshot time
    and the probability mass that has left the grid through its boundaries so
    far.  ``mass + outflow`` stays equal to the initial mass.
    """

    grid: np.ndarray
    values: np.ndarray
    t: float = 0.0
    outflow: float = 0.0

    def __post_init__(self) -> None:
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.grid.ndim != 1 or self.grid.size < 2:
            raise ValidationError("grid needs at least two nodes")
        if self.values.shape != self.grid.shape:
            raise ValidationError("values must have one entry per grid node")
        steps = np.diff(self.grid)
        if np.any(steps <= 0) or not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
            raise ValidationError("grid must be uniformly spaced and increasing")
        if np.any(self.values < 0):
            raise ValidationError("density values must be non-negative")

    @classmethod
    def from_function(cls, f: Callable[[np.ndarray], np.ndarray], lo: float, hi: float, n: int) -> "GridDensity":
        x = np.linspace(lo, hi, n)
        return cls(x, np.asarray(f(x), dtype=float))

    @property
    def dx(self) -> float:
        return float((self.grid[-1] - self.grid[0]) / (self.grid.size - 1))

    @property
    def weights(self) -> np.ndarray:
        return trapezoid_weights(self.grid.size, self.dx)

    @property
    def mass(self) -> float:
        return float(np.dot(self.weights, self.values))

    def normalized(self) -> "GridDensity":
        m = self.mass
        if m <= 0:
            raise ValidationError("cannot normalise a density with zero mass")
        return GridDensity(self.grid, self.values / m, self.t, self.outflow)

    def to_csv(self, with_time: bool = False) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "x", "p"] if with_time else ["x", "p"])
        for x, p in zip(self.grid, self.values):
            row = [repr(float(x)), repr(float(p))]
            w.writerow([repr(float(self.t))] + row if with_time else row)
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "GridDensity":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or [c.strip() for c in rows[0]] != ["x", "p"]:
            raise ParseError("expected header 'x,p'", line=1)
        xs, ps = [], []
        for i, row in enumerate(rows[1:], start=2):
            if not row:
                continue
            try:
                xs.append(float(row[0]))
                ps.append(float(row[1]))
            except (IndexError, ValueError):
                raise ParseError(f"malformed row {row!r}", line=i) from None
        return cls(np.array(xs), np.array(ps))
