"""Uniform radial grids, fields on them and quadrature against r dr."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

R_CLAMP = 0.02
MIN_POINTS = 64
MIN_WIDTH_MULTIPLIER = 6.0
DEFAULT_WIDTH_MULTIPLIER = 15.0
DEFAULT_POINTS_PER_WIDTH = 40


@dataclass(frozen=True)
class RadialGrid:
    r_min: float
    r_max: float
    n_points: int

    def __post_init__(self):
        if not self.r_min > 0.0:
            raise ValueError(f"r_min must be > 0, got {self.r_min}")
        if not self.r_max > self.r_min:
            raise ValueError("r_max must exceed r_min")
        if self.n_points < MIN_POINTS:
            raise ValueError(f"need at least {MIN_POINTS} nodes, got {self.n_points}")

    @property
    def spacing(self) -> float:
        return (self.r_max - self.r_min) / (self.n_points - 1)

    @cached_property
    def r(self) -> np.ndarray:
        r = np.linspace(self.r_min, self.r_max, self.n_points)
        r.flags.writeable = False
        return r

    def refine(self) -> RadialGrid:
        """Same interval with the spacing halved (old nodes are kept)."""
        return RadialGrid(self.r_min, self.r_max, 2 * self.n_points - 1)

    def to_json(self) -> str:
        return json.dumps({"r_min": self.r_min, "r_max": self.r_max, "n_points": self.n_points})

    @classmethod
    def from_json(cls, text: str) -> RadialGrid:
        d = json.loads(text)
        return cls(float(d["r_min"]), float(d["r_max"]), int(d["n_points"]))


@dataclass(frozen=True)
class RadialField:
    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.shape != (self.grid.n_points,):
            raise ValueError(
                f"field has {values.shape} samples, grid has {self.grid.n_points} nodes"
            )
        object.__setattr__(self, "values", values)

    @property
    def mass(self) -> float:
        return 2.0 * math.pi * integrate_rdr(np.abs(self.values) ** 2, self.grid)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["r", "re", "im"])
        vals = self.values.astype(complex)
        for r, v in zip(self.grid.r, vals):
            writer.writerow([f"{r:.17g}", f"{v.real:.17g}", f"{v.imag:.17g}"])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> RadialField:
        rows = list(csv.DictReader(io.StringIO(text)))
        r = np.array([float(row["r"]) for row in rows])
        v = np.array([complex(float(row["re"]), float(row["im"])) for row in rows])
        grid = RadialGrid(float(r[0]), float(r[-1]), len(r))
        if not np.allclose(grid.r, r, rtol=1e-13, atol=0.0):
            raise ValueError("CSV radii are not a uniform grid")
        if not np.any(v.imag):
            v = v.real.copy()
        return cls(grid, v)


def build_grid(
    m,
    width_multiplier: float = DEFAULT_WIDTH_MULTIPLIER,
    points_per_width: int = DEFAULT_POINTS_PER_WIDTH,
) -> RadialGrid:
    """Grid on [max(0.02, R_n - W h_n), R_n + W h_n] with ceil(W * ppw) nodes.

    `m` is anything exposing ``R_n`` and ``h_n`` (a :class:`ModeProblem`).
    """
    return build_window_grid([m.R_n], [m.h_n], width_multiplier, points_per_width)


def build_window_grid(R_values, h_values, width_multiplier=DEFAULT_WIDTH_MULTIPLIER,
                      points_per_width=DEFAULT_POINTS_PER_WIDTH) -> RadialGrid:
    """Shared grid covering the wells of several modes.

    The spacing is that of the narrowest well, 2 h_min / ppw.
    """
    if width_multiplier < MIN_WIDTH_MULTIPLIER:
        raise ValueError(
            f"width_multiplier {width_multiplier} < {MIN_WIDTH_MULTIPLIER} truncates the well"
        )
    if points_per_width < 1:
        raise ValueError("points_per_width must be positive")
    R = np.asarray(R_values, dtype=float)
    h = np.asarray(h_values, dtype=float)
    lo = max(R_CLAMP, float(np.min(R - width_multiplier * h)))
    hi = float(np.max(R + width_multiplier * h))
    if len(R) == 1:
        n = math.ceil(width_multiplier * points_per_width)
    else:
        step = 2.0 * float(np.min(h)) / points_per_width
        n = math.ceil((hi - lo) / step) + 1
    return RadialGrid(lo, hi, max(n, MIN_POINTS))


def integrate_rdr(f, g: RadialGrid) -> float:
    """Trapezoidal approximation of the integral of f(r) r dr (no 2 pi factor)."""
    f = np.asarray(f)
    if f.shape[-1] != g.n_points:
        raise ValueError(f"{f.shape[-1]} samples for a grid of {g.n_points} nodes")
    return np.trapezoid(f * g.r, dx=g.spacing, axis=-1)


def normalize(f: RadialField) -> RadialField:
    mass = f.mass
    if not mass > 0.0:
        raise ValueError("cannot normalize a zero field")
    return RadialField(f.grid, f.values / math.sqrt(mass))
