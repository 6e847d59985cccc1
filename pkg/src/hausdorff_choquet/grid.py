"""Regular cubic grids, sampled non-negative fields and cell sets.

Fields are cell-centred samples stored sparsely: only the support (cells with
a positive value) is kept, together with its sorted linear indices.  This
keeps very fine grids (the Cantor iterates need 4096^2 cells) cheap, while
``ScalarField.dense`` still gives an ndarray view for moderate grids.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import CapacityError, ValidationError

# Linear indices must fit comfortably in int64.
MAX_GRID_CELLS = 2**40
# Largest grid we are willing to materialise as a dense array.
MAX_DENSE_CELLS = 2**26


@dataclass(frozen=True)
class Grid:
    """Axis-aligned cubic grid of ``cells**n`` cells of width ``h``."""

    n: int
    lo: tuple[float, ...]
    cells: int
    h: float

    @property
    def hi(self) -> tuple[float, ...]:
        return tuple(a + self.cells * self.h for a in self.lo)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.cells,) * self.n

    @property
    def size(self) -> int:
        return self.cells**self.n

    @property
    def cell_volume(self) -> float:
        return self.h**self.n

    def bbox(self) -> list[tuple[float, float]]:
        return [(a, b) for a, b in zip(self.lo, self.hi)]

    def ravel(self, coords: np.ndarray) -> np.ndarray:
        coords = np.asarray(coords, dtype=np.int64).reshape(-1, self.n)
        return np.ravel_multi_index(tuple(coords.T), self.shape).astype(np.int64)

    def unravel(self, index: np.ndarray) -> np.ndarray:
        index = np.asarray(index, dtype=np.int64)
        if index.size == 0:
            return np.zeros((0, self.n), dtype=np.int64)
        return np.stack(np.unravel_index(index, self.shape), axis=1).astype(np.int64)

    def centers(self, coords: np.ndarray) -> np.ndarray:
        """World coordinates of the centres of the given integer cells."""
        return np.asarray(self.lo) + (np.asarray(coords, dtype=float) + 0.5) * self.h

    def center_mesh(self) -> list[np.ndarray]:
        """Dense ``ij``-indexed meshgrid of cell centres (one array per axis)."""
        _check_dense(self)
        axes = [a + (np.arange(self.cells) + 0.5) * self.h for a in self.lo]
        return np.meshgrid(*axes, indexing="ij")

    def boundary_layer(self, coords: np.ndarray) -> np.ndarray:
        coords = np.asarray(coords).reshape(-1, self.n)
        return np.any((coords == 0) | (coords == self.cells - 1), axis=1)

    def to_json(self) -> dict:
        return {"n": self.n, "bbox": [list(p) for p in self.bbox()], "cells": self.cells}


def make_grid(n: int, bbox, cells: int) -> Grid:
    """Build a cubic grid.

    ``bbox`` is either one ``(lo, hi)`` pair used on every axis or a sequence
    of ``n`` pairs with equal extents.
    """
    if n not in (1, 2, 3):
        raise ValidationError(f"dimension must be 1, 2 or 3, got {n}")
    if int(cells) != cells or cells < 2:
        raise ValidationError(f"cells per axis must be an integer >= 2, got {cells}")
    cells = int(cells)
    pairs = _bbox_pairs(n, bbox)
    extents = [hi - lo for lo, hi in pairs]
    if min(extents) <= 0:
        raise ValidationError(f"degenerate bounding box {pairs}")
    if max(extents) - min(extents) > 1e-12 * max(extents):
        raise ValidationError(f"bounding box must be cubic (equal extents), got extents {extents}")
    if cells**n > MAX_GRID_CELLS:
        raise CapacityError(f"{cells}^{n} cells exceeds the grid capacity of {MAX_GRID_CELLS}")
    return Grid(n=n, lo=tuple(float(p[0]) for p in pairs), cells=cells, h=extents[0] / cells)


def _bbox_pairs(n, bbox) -> list[tuple[float, float]]:
    arr = np.asarray(bbox, dtype=float)
    if arr.shape == (2,):
        return [(float(arr[0]), float(arr[1]))] * n
    if arr.shape == (n, 2):
        return [(float(a), float(b)) for a, b in arr]
    raise ValidationError(f"bbox must be a (lo, hi) pair or {n} such pairs, got shape {arr.shape}")


def _check_dense(grid: Grid) -> None:
    if grid.size > MAX_DENSE_CELLS:
        raise CapacityError(
            f"dense view of {grid.cells}^{grid.n} cells exceeds budget of {MAX_DENSE_CELLS} cells"
        )


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


class DiscreteSet:
    """Finite union of closed grid cells, stored as sorted unique linear indices."""

    __slots__ = ("grid", "index", "__dict__")

    def __init__(self, grid: Grid, index: Iterable[int] | np.ndarray):
        index = np.unique(np.asarray(index, dtype=np.int64).ravel())
        if index.size and (index[0] < 0 or index[-1] >= grid.size):
            raise ValidationError("cell index outside the grid")
        self.grid = grid
        self.index = _frozen(index)

    @classmethod
    def from_coords(cls, grid: Grid, coords) -> "DiscreteSet":
        coords = np.asarray(coords, dtype=np.int64).reshape(-1, grid.n)
        if coords.size and (coords.min() < 0 or coords.max() >= grid.cells):
            raise ValidationError("cell coordinate outside the grid")
        return cls(grid, grid.ravel(coords))

    @classmethod
    def from_mask(cls, grid: Grid, mask: np.ndarray) -> "DiscreteSet":
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != grid.shape:
            raise ValidationError(f"mask shape {mask.shape} does not match grid {grid.shape}")
        return cls(grid, np.flatnonzero(mask))

    @classmethod
    def empty(cls, grid: Grid) -> "DiscreteSet":
        return cls(grid, np.zeros(0, dtype=np.int64))

    def __len__(self) -> int:
        return int(self.index.size)

    def __repr__(self) -> str:
        return f"DiscreteSet(n={self.grid.n}, cells={len(self)}, h={self.grid.h:g})"

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, DiscreteSet)
            and self.grid == other.grid
            and np.array_equal(self.index, other.index)
        )

    __hash__ = None

    @property
    def is_empty(self) -> bool:
        return self.index.size == 0

    @cached_property
    def coords(self) -> np.ndarray:
        return _frozen(self.grid.unravel(self.index))

    def centers(self) -> np.ndarray:
        return self.grid.centers(self.coords)

    def measure(self) -> float:
        """Lebesgue measure of the union of cells."""
        return len(self) * self.grid.cell_volume

    def key(self) -> bytes:
        return self.index.tobytes()

    def mask(self) -> np.ndarray:
        _check_dense(self.grid)
        m = np.zeros(self.grid.size, dtype=bool)
        m[self.index] = True
        return m.reshape(self.grid.shape)

    def _same_grid(self, other: "DiscreteSet") -> None:
        if self.grid != other.grid:
            raise ValidationError("sets live on different grids")

    def union(self, other: "DiscreteSet") -> "DiscreteSet":
        self._same_grid(other)
        return DiscreteSet(self.grid, np.union1d(self.index, other.index))

    def intersection(self, other: "DiscreteSet") -> "DiscreteSet":
        self._same_grid(other)
        return DiscreteSet(self.grid, np.intersect1d(self.index, other.index, assume_unique=True))

    def difference(self, other: "DiscreteSet") -> "DiscreteSet":
        self._same_grid(other)
        return DiscreteSet(self.grid, np.setdiff1d(self.index, other.index, assume_unique=True))

    def issubset(self, other: "DiscreteSet") -> bool:
        self._same_grid(other)
        return bool(np.isin(self.index, other.index, assume_unique=True).all())


class ScalarField:
    """Non-negative, compactly supported, cell-centred samples of a function.

    ``gradient`` (optional) holds ``|grad u|`` on the support cells and
    ``gradient_kind`` records whether it is analytic or finite-difference.
    """

    def __init__(
        self,
        grid: Grid,
        index: np.ndarray,
        values: np.ndarray,
        gradient: np.ndarray | None = None,
        gradient_kind: str | None = None,
    ):
        index = np.asarray(index, dtype=np.int64).ravel()
        values = np.asarray(values, dtype=float).ravel()
        if index.shape != values.shape:
            raise ValidationError("index and values must have the same length")
        if gradient is not None:
            gradient = np.asarray(gradient, dtype=float).ravel()
            if gradient.shape != values.shape:
                raise ValidationError("gradient must be given on the support cells")
            if np.any(gradient < 0) or not np.all(np.isfinite(gradient)):
                raise ValidationError("gradient magnitudes must be finite and non-negative")
            if gradient_kind not in ("analytic", "finite-difference"):
                raise ValidationError(f"unknown gradient provenance {gradient_kind!r}")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ValidationError("field values must be finite and non-negative")
        order = np.argsort(index, kind="stable")
        index, values = index[order], values[order]
        if gradient is not None:
            gradient = gradient[order]
        if index.size and (np.any(np.diff(index) == 0) or index[0] < 0 or index[-1] >= grid.size):
            raise ValidationError("support indices must be unique and inside the grid")
        keep = values > 0
        index, values = index[keep], values[keep]
        if gradient is not None:
            gradient = gradient[keep]
        if index.size and grid.boundary_layer(grid.unravel(index)).any():
            raise ValidationError(
                "field is not compactly supported: non-zero values on the grid boundary layer"
            )
        self.grid = grid
        self.index = _frozen(index)
        self.values = _frozen(values)
        self.gradient = None if gradient is None else _frozen(gradient)
        self.gradient_kind = None if gradient is None else gradient_kind

    @classmethod
    def from_dense(cls, grid: Grid, values, gradient=None, gradient_kind="analytic") -> "ScalarField":
        values = np.asarray(values, dtype=float)
        if values.shape != grid.shape:
            raise ValidationError(f"values shape {values.shape} does not match grid {grid.shape}")
        if np.any(values < 0):
            raise ValidationError("field values must be non-negative")
        idx = np.flatnonzero(values.ravel() > 0)
        grad = None
        if gradient is not None:
            grad = np.asarray(gradient, dtype=float).ravel()[idx]
        return cls(grid, idx, values.ravel()[idx], grad, gradient_kind if grad is not None else None)

    @classmethod
    def zeros(cls, grid: Grid) -> "ScalarField":
        e = np.zeros(0)
        return cls(grid, e.astype(np.int64), e, e.copy(), "analytic")

    @classmethod
    def indicator(cls, E: DiscreteSet, height: float = 1.0) -> "ScalarField":
        """``height`` times the indicator of ``E``; its gradient vanishes a.e."""
        v = np.full(len(E), float(height))
        return cls(E.grid, E.index, v, np.zeros(len(E)), "analytic")

    def __repr__(self) -> str:
        return (
            f"ScalarField(n={self.grid.n}, support={self.index.size}, max={self.max():.4g}, "
            f"gradient={self.gradient_kind})"
        )

    def max(self) -> float:
        return float(self.values.max()) if self.values.size else 0.0

    def support(self) -> DiscreteSet:
        return DiscreteSet(self.grid, self.index)

    def dense(self) -> np.ndarray:
        _check_dense(self.grid)
        out = np.zeros(self.grid.size)
        out[self.index] = self.values
        return out.reshape(self.grid.shape)

    def dense_gradient(self) -> np.ndarray:
        _check_dense(self.grid)
        out = np.zeros(self.grid.size)
        out[self.index] = self.gradient_magnitude()
        return out.reshape(self.grid.shape)

    def gradient_magnitude(self) -> np.ndarray:
        """``|grad u|`` on the support: the attached gradient or a finite-difference one."""
        if self.gradient is not None:
            return self.gradient
        return fd_gradient(self).values_on(self.index)

    def values_on(self, index: np.ndarray) -> np.ndarray:
        pos = np.searchsorted(self.index, index)
        pos = np.minimum(pos, max(self.index.size - 1, 0))
        hit = self.index.size > 0
        out = np.zeros(len(index))
        if hit:
            found = self.index[pos] == index
            out[found] = self.values[pos[found]]
        return out

    def gradient_field(self) -> "ScalarField":
        """The field ``|grad u|`` as a ScalarField (values only)."""
        return ScalarField(self.grid, self.index, self.gradient_magnitude())

    def power(self, alpha: float) -> "ScalarField":
        """Samples raised to ``alpha``; exact on samples, gradient dropped."""
        if alpha <= 0:
            raise ValidationError(f"power must be positive, got {alpha}")
        return ScalarField(self.grid, self.index, self.values**alpha)

    def scaled(self, lam: float) -> "ScalarField":
        if lam < 0:
            raise ValidationError("scale factor must be non-negative")
        grad = None if self.gradient is None else self.gradient * lam
        return ScalarField(self.grid, self.index, self.values * lam, grad, self.gradient_kind)

    def with_gradient(self, gradient: np.ndarray, kind: str) -> "ScalarField":
        return ScalarField(self.grid, self.index, self.values, gradient, kind)

    def add(self, other: "ScalarField") -> "ScalarField":
        """Pointwise sum; the gradient is dropped (magnitudes do not add)."""
        if self.grid != other.grid:
            raise ValidationError("fields live on different grids")
        idx = np.union1d(self.index, other.index)
        return ScalarField(self.grid, idx, self.values_on(idx) + other.values_on(idx))

    def dominated_by(self, other: "ScalarField") -> bool:
        """True when ``self <= other`` at every sample."""
        if self.grid != other.grid:
            raise ValidationError("fields live on different grids")
        return bool(np.all(self.values <= other.values_on(self.index)))


def superlevel(f: ScalarField, t: float) -> DiscreteSet:
    """Cells whose sample strictly exceeds ``t``."""
    if t < 0:
        raise ValidationError(f"threshold must be non-negative, got {t}")
    return DiscreteSet(f.grid, f.index[f.values > t])


def closed_superlevel(f: ScalarField, t: float) -> DiscreteSet:
    """Cells whose sample is at least ``t`` (``t > 0``; the set for t = 0 is unbounded)."""
    if t <= 0:
        raise ValidationError("closed superlevel sets need t > 0")
    return DiscreteSet(f.grid, f.index[f.values >= t])


def lebesgue_integral(f: ScalarField) -> float:
    """Midpoint-rule integral: sum of samples times the cell volume."""
    return float(np.sum(f.values)) * f.grid.cell_volume


def layer_cake_integral(f: ScalarField) -> float:
    """The same integral computed as the sum over thresholds of |{f > t}| dt."""
    if f.values.size == 0:
        return 0.0
    levels = np.concatenate([[0.0], np.unique(f.values)])
    counts = f.values.size - np.searchsorted(np.sort(f.values), levels[:-1], side="right")
    return float(np.sum(np.diff(levels) * counts)) * f.grid.cell_volume


def fd_gradient(f: ScalarField) -> ScalarField:
    """Finite-difference ``|grad u|`` on the support of ``f``.

    Central differences where both axis neighbours are in the support,
    one-sided towards the support where only one is.
    """
    g = f.grid
    if f.index.size == 0:
        return ScalarField(g, f.index, f.values, f.values.copy(), "finite-difference")
    coords = g.unravel(f.index)
    sq = np.zeros(f.index.size)
    for axis in range(g.n):
        step = np.zeros(g.n, dtype=np.int64)
        step[axis] = 1
        plus, minus = g.ravel(coords + step), g.ravel(coords - step)
        vp, vm = f.values_on(plus), f.values_on(minus)
        inp, inm = vp > 0, vm > 0
        d = (vp - vm) / (2 * g.h)
        only_p = inp & ~inm
        only_m = inm & ~inp
        d[only_p] = (vp[only_p] - f.values[only_p]) / g.h
        d[only_m] = (f.values[only_m] - vm[only_m]) / g.h
        sq += d * d
    return ScalarField(g, f.index, f.values, np.sqrt(sq), "finite-difference")


def unit_ball_volume(n: int) -> float:
    from math import gamma, pi

    return pi ** (n / 2) / gamma(n / 2 + 1)


def ball_set(grid: Grid, center: Sequence[float], radius: float) -> DiscreteSet:
    """Cells whose centre lies in the open ball ``B(center, radius)``."""
    c = np.asarray(center, dtype=float)
    lo = np.floor((c - radius - np.asarray(grid.lo)) / grid.h).astype(int) - 1
    hi = np.ceil((c + radius - np.asarray(grid.lo)) / grid.h).astype(int) + 1
    lo, hi = np.clip(lo, 0, grid.cells - 1), np.clip(hi, 0, grid.cells - 1)
    axes = [np.arange(a, b + 1) for a, b in zip(lo, hi)]
    coords = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=1)
    d = np.linalg.norm(grid.centers(coords) - c, axis=1)
    return DiscreteSet.from_coords(grid, coords[d < radius])


def block_set(grid: Grid, start: Sequence[int], size: Sequence[int] | int) -> DiscreteSet:
    """Axis-aligned block of cells with lower corner ``start``."""
    size = [size] * grid.n if np.isscalar(size) else list(size)
    axes = [np.arange(s, s + k) for s, k in zip(start, size)]
    coords = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=1)
    return DiscreteSet.from_coords(grid, coords)
