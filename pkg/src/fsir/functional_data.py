"""Grid-sampled curves, trapezoidal inner products and CSV ingestion."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Literal, Sequence

import numpy as np

__all__ = [
    "GridMismatchError",
    "CsvParseError",
    "TimeGrid",
    "Curve",
    "CurveSet",
    "inner_product",
    "l2_distance",
    "normalize_area",
    "load_csv",
    "write_csv",
]


class GridMismatchError(ValueError):
    """Raised when two curves (or a curve set and a basis) live on different grids."""


class CsvParseError(ValueError):
    """Raised for malformed CSV input; the message names the offending row/column."""


def _readonly(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Strictly increasing sampling times shared by a collection of curves."""

    points: np.ndarray

    def __post_init__(self):
        pts = _readonly(self.points)
        if pts.ndim != 1 or pts.size < 2:
            raise ValueError("a TimeGrid needs at least 2 points")
        if not np.all(np.isfinite(pts)):
            raise ValueError("grid points must be finite")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("grid points must be strictly increasing")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "_weights", _readonly(_trapezoid_weights(pts)))

    @classmethod
    def equispaced(cls, m: int, start: float = 0.0, stop: float = 1.0) -> "TimeGrid":
        return cls(np.linspace(start, stop, m))

    @property
    def weights(self) -> np.ndarray:
        """Trapezoid quadrature weights, so that ``weights @ f`` approximates the integral of f."""
        return self._weights

    @property
    def length(self) -> float:
        return float(self.points[-1] - self.points[0])

    def __len__(self) -> int:
        return self.points.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, TimeGrid):
            return NotImplemented
        return self is other or (
            self.points.shape == other.points.shape and np.array_equal(self.points, other.points)
        )

    def __hash__(self) -> int:
        return hash(self.points.tobytes())


def _trapezoid_weights(t: np.ndarray) -> np.ndarray:
    dt = np.diff(t)
    w = np.zeros_like(t)
    w[:-1] += dt / 2
    w[1:] += dt / 2
    return w


@dataclass(frozen=True, eq=False)
class Curve:
    """A single function observed on a TimeGrid. Immutable."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        vals = _readonly(self.values)
        if vals.shape != (len(self.grid),):
            raise ValueError(
                f"curve has {vals.size} values but the grid has {len(self.grid)} points"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("curve values must be finite")
        object.__setattr__(self, "values", vals)

    def _check(self, other: "Curve"):
        if self.grid != other.grid:
            raise GridMismatchError("curves are sampled on different grids")

    def __add__(self, other: "Curve") -> "Curve":
        self._check(other)
        return Curve(self.grid, self.values + other.values)

    def __sub__(self, other: "Curve") -> "Curve":
        self._check(other)
        return Curve(self.grid, self.values - other.values)

    def __mul__(self, c: float) -> "Curve":
        return Curve(self.grid, self.values * float(c))

    __rmul__ = __mul__

    def __neg__(self) -> "Curve":
        return Curve(self.grid, -self.values)


@dataclass(frozen=True, eq=False)
class CurveSet:
    """n curves on a shared grid, optionally paired with scalar responses.

    Curves are stored row-wise in ``values`` (shape ``(n, m)``).
    """

    grid: TimeGrid
    values: np.ndarray
    responses: np.ndarray | None = None

    def __post_init__(self):
        vals = _readonly(self.values)
        if vals.ndim != 2 or vals.shape[0] < 1:
            raise ValueError("a CurveSet needs at least one curve")
        if vals.shape[1] != len(self.grid):
            raise ValueError(
                f"curves have {vals.shape[1]} values but the grid has {len(self.grid)} points"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("curve values must be finite")
        object.__setattr__(self, "values", vals)
        if self.responses is not None:
            y = _readonly(self.responses)
            if y.shape != (vals.shape[0],):
                raise ValueError(f"expected {vals.shape[0]} responses, got {y.size}")
            if not np.all(np.isfinite(y)):
                raise ValueError("responses must be finite")
            object.__setattr__(self, "responses", y)

    @classmethod
    def from_curves(cls, curves: Sequence[Curve], responses=None) -> "CurveSet":
        if not curves:
            raise ValueError("a CurveSet needs at least one curve")
        grid = curves[0].grid
        for c in curves[1:]:
            if c.grid != grid:
                raise GridMismatchError("all curves in a CurveSet must share one grid")
        return cls(grid, np.stack([c.values for c in curves]), responses)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def __len__(self) -> int:
        return self.n

    def curve(self, i: int) -> Curve:
        return Curve(self.grid, self.values[i])

    def __iter__(self):
        return (self.curve(i) for i in range(self.n))

    def subset(self, idx) -> "CurveSet":
        idx = np.asarray(idx)
        y = None if self.responses is None else self.responses[idx]
        return CurveSet(self.grid, self.values[idx], y)

    def with_responses(self, responses) -> "CurveSet":
        return CurveSet(self.grid, self.values, responses)

    def require_responses(self) -> np.ndarray:
        if self.responses is None:
            raise ValueError("this operation needs responses but the CurveSet has none")
        return self.responses


def inner_product(a: Curve, b: Curve) -> float:
    """Trapezoid approximation of the integral of a(t) b(t)."""
    a._check(b)
    return float(a.grid.weights @ (a.values * b.values))


def l2_distance(a: Curve, b: Curve) -> float:
    d = a - b
    return float(np.sqrt(max(inner_product(d, d), 0.0)))


def normalize_area(c: Curve | CurveSet):
    """Subtract the average level so the curve integrates to zero.

    Accepts a single Curve or a whole CurveSet (responses are kept).
    """
    grid = c.grid
    if isinstance(c, CurveSet):
        area = c.values @ grid.weights
        return CurveSet(grid, c.values - (area / grid.length)[:, None], c.responses)
    area = float(grid.weights @ c.values)
    return Curve(grid, c.values - area / grid.length)


def _parse_float(cell: str, row: int, col: int, path) -> float:
    try:
        v = float(cell)
    except ValueError:
        raise CsvParseError(f"{path}: non-numeric cell {cell!r} at row {row}, column {col}") from None
    if not np.isfinite(v):
        raise CsvParseError(f"{path}: non-finite cell {cell!r} at row {row}, column {col}")
    return v


def _read_rows(path) -> list[list[str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise CsvParseError(f"{path}: file is empty")
    return [[c.strip() for c in r] for r in rows]


def _is_grid_label(cell: str) -> bool:
    return cell == "" or cell.lower() in ("grid", "t", "time")


def load_csv(
    path,
    layout: Literal["combined", "split"] = "combined",
    responses_path=None,
    grid_row: bool | None = None,
    exclude_rows: Iterable[int] = (),
) -> CurveSet:
    """Read curves (and responses) from CSV.

    ``combined``: each data row is ``response, x_1, ..., x_m``.
    ``split``: ``path`` holds only curve values; ``responses_path`` (optional)
    holds one response per line.

    An optional first row holds the grid points. With ``grid_row=None`` it is
    detected when its first cell is empty or a label such as ``grid``, or (in
    the combined layout) when it is one field shorter than the data rows.
    Without a grid row the grid is equispaced on [0, 1].

    ``exclude_rows`` drops data rows by zero-based index (after the grid row).
    """
    if layout not in ("combined", "split"):
        raise ValueError(f"unknown layout {layout!r}; expected 'combined' or 'split'")
    rows = _read_rows(path)

    grid_pts = None
    first = rows[0]
    if grid_row is None:
        grid_row = _is_grid_label(first[0]) or (
            layout == "combined" and len(rows) > 1 and len(first) == len(rows[1]) - 1
        )
    if grid_row:
        cells = first[1:] if _is_grid_label(first[0]) else first
        grid_pts = [_parse_float(c, 1, j + 1, path) for j, c in enumerate(cells)]
        rows = rows[1:]
        if not rows:
            raise CsvParseError(f"{path}: no data rows after the grid row")
    offset = 2 if grid_row else 1

    width = len(rows[0])
    data = []
    for i, r in enumerate(rows):
        if len(r) != width:
            raise CsvParseError(
                f"{path}: ragged row {i + offset}: expected {width} columns, got {len(r)}"
            )
        data.append([_parse_float(c, i + offset, j + 1, path) for j, c in enumerate(r)])
    arr = np.array(data, dtype=float)

    if layout == "combined":
        if arr.shape[1] < 3:
            raise CsvParseError(f"{path}: combined layout needs a response and at least 2 curve values")
        y, x = arr[:, 0], arr[:, 1:]
    else:
        x = arr
        y = None
        if responses_path is not None:
            yrows = _read_rows(responses_path)
            y = np.array(
                [_parse_float(r[0], i + 1, 1, responses_path) for i, r in enumerate(yrows)]
            )
            if y.size != x.shape[0]:
                raise CsvParseError(
                    f"{responses_path}: {y.size} responses for {x.shape[0]} curves"
                )

    m = x.shape[1]
    if grid_pts is None:
        grid = TimeGrid.equispaced(m)
    else:
        if len(grid_pts) != m:
            raise CsvParseError(f"{path}: grid row has {len(grid_pts)} points, curves have {m}")
        try:
            grid = TimeGrid(np.array(grid_pts))
        except ValueError as exc:
            raise CsvParseError(f"{path}: invalid grid row: {exc}") from None

    excl = sorted(set(int(e) for e in exclude_rows))
    if excl:
        if excl[0] < 0 or excl[-1] >= x.shape[0]:
            raise ValueError(f"exclude_rows out of range for {x.shape[0]} rows")
        keep = np.setdiff1d(np.arange(x.shape[0]), excl)
        x = x[keep]
        y = None if y is None else y[keep]
    return CurveSet(grid, x, y)


def write_csv(path, data: CurveSet, include_grid: bool = True) -> None:
    """Write a CurveSet in the combined layout; absent responses are written as 0."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        if include_grid:
            w.writerow(["grid", *map(repr, data.grid.points.tolist())])
        y = data.responses if data.responses is not None else np.zeros(data.n)
        for yi, row in zip(y, data.values):
            w.writerow([repr(float(yi)), *map(repr, row.tolist())])
