"""Square-grid geometry of the simulated service area.

The area is an L x L square partitioned into equal square small cells,
indexed row-major from the corner at the origin. All ground positions are
2D points in meters; drones add a constant altitude on top of these.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple


class GeometryError(ValueError):
    """Raised for out-of-area points or invalid cell indices."""


class Point2D(NamedTuple):
    x: float
    y: float


class Rect(NamedTuple):
    """Closed axis-aligned rectangle [xmin, xmax] x [ymin, ymax]."""

    xmin: float
    ymin: float
    xmax: float
    ymax: float

    @property
    def center(self) -> Point2D:
        return Point2D(0.5 * (self.xmin + self.xmax), 0.5 * (self.ymin + self.ymax))

    def contains(self, x: float, y: float, margin: float = 0.0) -> bool:
        """True if (x, y) is inside, at least `margin` away from every edge."""
        return (
            self.xmin + margin <= x <= self.xmax - margin
            and self.ymin + margin <= y <= self.ymax - margin
        )


@dataclass(frozen=True)
class CellGrid:
    """L x L area split into cells_per_side^2 square cells of edge `cell_edge`.

    `inner_cell_ids` marks the cells whose users contribute to collected
    statistics (interference at the rim of the area is weaker, so rim cells
    would bias network-wide averages).
    """

    cells_per_side: int
    cell_edge: float
    inner_cell_ids: frozenset[int]

    def __post_init__(self) -> None:
        if self.cells_per_side < 1:
            raise GeometryError("cells_per_side must be >= 1")
        if not (self.cell_edge > 0 and math.isfinite(self.cell_edge)):
            raise GeometryError("cell_edge must be positive and finite")
        if not self.inner_cell_ids:
            raise GeometryError("inner_cell_ids must be non-empty")
        bad = [c for c in self.inner_cell_ids if not 0 <= c < self.n_cells]
        if bad:
            raise GeometryError(f"inner cell ids out of range: {sorted(bad)}")

    @property
    def n_cells(self) -> int:
        return self.cells_per_side * self.cells_per_side

    @property
    def side_length(self) -> float:
        return self.cells_per_side * self.cell_edge

    def area_rect(self) -> Rect:
        return Rect(0.0, 0.0, self.side_length, self.side_length)

    @staticmethod
    def make(
        cells_per_side: int, cell_edge: float, inner: str | Iterable[int] = "center"
    ) -> "CellGrid":
        """Build a grid with a named or explicit inner-cell selection.

        inner="center": the single central cell (odd grids only).
        inner="interior": every cell not on the border ring.
        inner=<iterable of ints>: explicit cell ids.
        """
        n = cells_per_side
        if inner == "center":
            if n % 2 == 0:
                raise GeometryError("'center' inner selection needs an odd grid")
            mid = n // 2
            ids: frozenset[int] = frozenset({mid * n + mid})
        elif inner == "interior":
            if n < 3:
                raise GeometryError("'interior' inner selection needs >= 3 cells per side")
            ids = frozenset(
                r * n + c for r in range(1, n - 1) for c in range(1, n - 1)
            )
        elif isinstance(inner, str):
            raise GeometryError(f"unknown inner-cell selection {inner!r}")
        else:
            ids = frozenset(int(c) for c in inner)
        return CellGrid(cells_per_side=n, cell_edge=cell_edge, inner_cell_ids=ids)


def ground_distance(a: Point2D, b: Point2D) -> float:
    """Euclidean distance between two ground points (meters)."""
    return math.hypot(a[0] - b[0], a[1] - b[1])


def euclidean_3d_distance(r: float, h: float) -> float:
    """3D distance for a ground separation r and an altitude difference h."""
    if r < 0 or h < 0:
        raise GeometryError("distances must be non-negative")
    return math.hypot(r, h)


def cell_of(p: Point2D, grid: CellGrid) -> int:
    """Row-major index of the cell containing p.

    Points on a shared edge belong to the higher-index cell; the outer
    boundary of the area belongs to the outermost cells.
    """
    x, y = p[0], p[1]
    side = grid.side_length
    if not (0.0 <= x <= side and 0.0 <= y <= side):
        raise GeometryError(f"point ({x}, {y}) outside the {side} x {side} area")
    last = grid.cells_per_side - 1
    col = min(int(x // grid.cell_edge), last)
    row = min(int(y // grid.cell_edge), last)
    return row * grid.cells_per_side + col


def cell_center(cell: int, grid: CellGrid) -> Point2D:
    """Geometric center of a cell's square."""
    _check_cell(cell, grid)
    row, col = divmod(cell, grid.cells_per_side)
    w = grid.cell_edge
    return Point2D((col + 0.5) * w, (row + 0.5) * w)


def cell_rect(cell: int, grid: CellGrid) -> Rect:
    """Closed square covered by a cell."""
    _check_cell(cell, grid)
    row, col = divmod(cell, grid.cells_per_side)
    w = grid.cell_edge
    return Rect(col * w, row * w, (col + 1) * w, (row + 1) * w)


def _check_cell(cell: int, grid: CellGrid) -> None:
    if not 0 <= cell < grid.n_cells:
        raise GeometryError(f"cell index {cell} out of range [0, {grid.n_cells})")
