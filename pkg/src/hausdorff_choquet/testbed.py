"""Test-function families, the truncation map and the staircase partition."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .grid import DiscreteSet, Grid, ScalarField, fd_gradient, make_grid


def _box_coords(grid: Grid, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Integer coords of all cells whose centre can lie in the world box [lo, hi]."""
    a = np.floor((lo - np.asarray(grid.lo)) / grid.h).astype(int) - 1
    b = np.ceil((hi - np.asarray(grid.lo)) / grid.h).astype(int) + 1
    a, b = np.clip(a, 0, grid.cells - 1), np.clip(b, 0, grid.cells - 1)
    axes = [np.arange(s, e + 1) for s, e in zip(a, b)]
    return np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=1)


# ---------------------------------------------------------------------------
# radial families


@dataclass(frozen=True)
class TentSpec:
    """Tent of height 1/r on B(0,r), zero outside B(0,2r), linear in between.

    The default grid is [-2, 2]^2 with ``resolution`` cells per r, so every
    r in a dyadic sweep sees the same picture in grid units.
    """

    r: float
    resolution: int = 8
    half_width: float = 2.0

    def __post_init__(self):
        if not (0 < self.r < 1):
            raise ValidationError(f"tent radius must lie in (0, 1), got {self.r}")
        if self.resolution < 8:
            raise ValidationError(f"grid must resolve r with h <= r/8, got {self.resolution} cells per r")
        if 2 * self.r >= self.half_width:
            raise ValidationError("tent support B(0, 2r) must fit inside the grid box")

    def grid(self) -> Grid:
        cells = int(round(2 * self.half_width * self.resolution / self.r))
        return make_grid(2, (-self.half_width, self.half_width), cells)


def tent_gradient_integral(r: float) -> float:
    """Closed form of the gradient integral: annulus area 3 pi r^2 times 1/r^2."""
    return 3 * math.pi


def tent2d(spec: TentSpec) -> ScalarField:
    g = spec.grid()
    r = spec.r
    coords = _box_coords(g, np.full(2, -2 * r), np.full(2, 2 * r))
    x = g.centers(coords)
    rho = np.linalg.norm(x, axis=1)
    vals = np.where(rho <= r, 1 / r, np.clip((2 * r - rho) / (r * r), 0.0, None))
    grad = np.where((rho > r) & (rho < 2 * r), 1 / (r * r), 0.0)
    return ScalarField(g, g.ravel(coords), vals, grad, "analytic")


def radial_bump(n: int, R: float = 1.0, cells: int = 128, half_width: float | None = None) -> ScalarField:
    """Cone ``max(0, 1 - |x|/R)`` with exact gradient 1/R on its support."""
    if R <= 0:
        raise ValidationError("bump radius must be positive")
    hw = 1.25 * R if half_width is None else half_width
    if hw <= R:
        raise ValidationError("bump support must fit strictly inside the grid box")
    g = make_grid(n, (-hw, hw), cells)
    if g.h > R / 4:
        raise ValidationError(f"grid does not resolve the bump: h = {g.h} > R/4")
    return bump_sum(g, [np.zeros(n)], [R], [1.0])


def bump_sum(grid: Grid, centers, radii, heights) -> ScalarField:
    """Sum of cones ``a_i max(0, 1 - |x - c_i|/R_i)`` with exact gradient magnitude."""
    centers = [np.asarray(c, dtype=float) for c in centers]
    n = grid.n
    parts_idx, parts_val, parts_grad = [], [], []
    for c, R, a in zip(centers, radii, heights):
        coords = _box_coords(grid, c - R, c + R)
        x = grid.centers(coords) - c
        rho = np.linalg.norm(x, axis=1)
        inside = rho < R
        coords, x, rho = coords[inside], x[inside], rho[inside]
        parts_idx.append(grid.ravel(coords))
        parts_val.append(a * (1 - rho / R))
        unit = np.where(rho[:, None] > 0, x / np.where(rho > 0, rho, 1)[:, None], 0.0)
        if np.any(rho == 0):
            # the cone tip: any unit vector is a valid a.e. representative
            unit[rho == 0, 0] = 1.0
        parts_grad.append(-a / R * unit)
    if not parts_idx:
        return ScalarField.zeros(grid)
    idx = np.concatenate(parts_idx)
    uniq, inv = np.unique(idx, return_inverse=True)
    v = np.zeros(uniq.size)
    np.add.at(v, inv, np.concatenate(parts_val))
    gv = np.zeros((uniq.size, n))
    np.add.at(gv, inv, np.concatenate(parts_grad))
    return ScalarField(grid, uniq, v, np.linalg.norm(gv, axis=1), "analytic")


def random_bump_sum(grid: Grid, rng: np.random.Generator, k: int | None = None) -> ScalarField:
    """A few random cones placed well inside the grid box."""
    k = int(rng.integers(1, 5)) if k is None else k
    lo, hi = np.asarray(grid.lo), np.asarray(grid.hi)
    ext = hi - lo
    centers, radii, heights = [], [], []
    for _ in range(k):
        # margins in world units, so one seed gives one function at every resolution
        R = float(rng.uniform(0.12, 0.3)) * ext[0]
        margin = R + 0.05 * ext
        c = lo + margin + rng.uniform(0, 1, grid.n) * (ext - 2 * margin)
        centers.append(c)
        radii.append(R)
        heights.append(float(rng.uniform(0.5, 2.0)))
    return bump_sum(grid, centers, radii, heights)


# ---------------------------------------------------------------------------
# truncation


def truncate(f: ScalarField, a: float, b: float) -> ScalarField:
    """``0`` below a, ``f - a`` between, ``b - a`` above b.

    The gradient is that of ``f`` on ``{a < f < b}`` and zero elsewhere.
    """
    if not (0 <= a < b):
        raise ValidationError(f"need 0 <= a < b, got a={a}, b={b}")
    src = f if f.gradient is not None else fd_gradient(f)
    v = src.values
    psi = np.clip(v, a, b) - a
    mid = (v > a) & (v < b)
    grad = np.where(mid, src.gradient, 0.0)
    return ScalarField(f.grid, src.index, psi, grad, src.gradient_kind)


# ---------------------------------------------------------------------------
# Cantor construction


def default_side(k: int) -> float:
    return 4.0 ** (-k) / k


@dataclass(frozen=True)
class CantorSpec:
    """Four-corner Cantor iterate in the unit square.

    Level j places four squares of side ``l_j`` in the corners of every
    level-(j-1) square; ``sides`` overrides the default gauge
    ``l_j = 4^-j / j``.  The grid has ``cells_per_side`` cells across a
    level-k square and the collar is ``collar_fraction * l_k`` wide.
    """

    k: int
    sides: tuple[float, ...] | None = None
    collar_fraction: float = 0.5
    cells_per_side: int = 4

    def __post_init__(self):
        if self.k < 1:
            raise ValidationError("Cantor level must be >= 1")
        if self.cells_per_side < 2:
            raise ValidationError("grid must resolve the level-k squares (>= 2 cells per side)")
        ls = self.side_lengths()
        prev = 1.0
        for j, l in enumerate(ls, 1):
            if not (0 < l < prev / 2):
                raise ValidationError(f"side l_{j} = {l} must lie in (0, l_{j-1}/2)")
            prev = l
        gap = (ls[-2] if self.k > 1 else 1.0) - 2 * ls[-1]
        if not (0 < self.collar < gap / 2):
            raise ValidationError(f"collar {self.collar} overlaps: must be below half the gap {gap}")

    def side_lengths(self) -> tuple[float, ...]:
        if self.sides is not None:
            if len(self.sides) < self.k:
                raise ValidationError("need one side length per level")
            return tuple(float(s) for s in self.sides[: self.k])
        return tuple(default_side(j) for j in range(1, self.k + 1))

    @property
    def side(self) -> float:
        return self.side_lengths()[-1]

    @property
    def collar(self) -> float:
        return self.collar_fraction * self.side

    @property
    def h(self) -> float:
        return self.side / self.cells_per_side

    def grid(self) -> Grid:
        margin = self.collar + 2 * self.h
        cells = int(math.ceil((1 + 2 * margin) / self.h))
        return make_grid(2, (-margin, -margin + cells * self.h), cells)

    def gradient_integral(self) -> float:
        """Closed form for the continuum collar function: 4^k (4 l + 4 w)."""
        return 4.0**self.k * (4 * self.side + 4 * self.collar)


def cantor_corners(spec: CantorSpec) -> np.ndarray:
    """Lower-left corners of the 4^k level-k squares, in deterministic order."""
    corners = np.zeros((1, 2))
    prev = 1.0
    for l in spec.side_lengths():
        shift = prev - l
        offs = np.array([[0, 0], [0, shift], [shift, 0], [shift, shift]])
        corners = (corners[:, None, :] + offs[None, :, :]).reshape(-1, 2)
        prev = l
    return corners


def _square_cells(grid: Grid, corners: np.ndarray, side: float, extra: int):
    """Cells around each square: base coords of the square plus a margin."""
    h = grid.h
    # first cell whose centre is >= the square's lower edge
    c0 = np.ceil((corners - np.asarray(grid.lo)) / h - 0.5 - 1e-9).astype(np.int64)
    k = int(round(side / h))
    rng = np.arange(-extra, k + extra)
    dx, dy = np.meshgrid(rng, rng, indexing="ij")
    offs = np.stack([dx.ravel(), dy.ravel()], axis=1)
    return c0, offs


def cantor_set(spec: CantorSpec) -> DiscreteSet:
    g = spec.grid()
    corners = cantor_corners(spec)
    coords = _cells_in_squares(g, corners, spec.side)
    return DiscreteSet.from_coords(g, coords)


def _cells_in_squares(g: Grid, corners: np.ndarray, side: float) -> np.ndarray:
    c0, offs = _square_cells(g, corners, side, 1)
    cand = (c0[:, None, :] + offs[None, :, :]).reshape(-1, 2)
    x = g.centers(cand)
    lo = np.repeat(corners, offs.shape[0], axis=0)
    inside = np.all((x >= lo - 1e-12 * g.h) & (x < lo + side - 1e-12 * g.h), axis=1)
    return cand[inside]


def cantor_capacitary(spec: CantorSpec) -> ScalarField:
    """``max(0, 1 - d_inf(x, E_k) / w)``: 1 on the squares, linear collars of width w.

    With the sup-norm distance the gradient magnitude is exactly ``1/w`` on
    the open collar.
    """
    g = spec.grid()
    corners = cantor_corners(spec)
    side, w = spec.side, spec.collar
    extra = int(math.ceil(w / g.h)) + 1
    c0, offs = _square_cells(g, corners, side, extra)
    cand = (c0[:, None, :] + offs[None, :, :]).reshape(-1, 2)
    x = g.centers(cand)
    lo = np.repeat(corners, offs.shape[0], axis=0)
    gap = np.maximum(np.maximum(lo - x, x - (lo + side)), 0.0)
    d = gap.max(axis=1)
    vals = np.clip(1 - d / w, 0.0, None)
    grad = np.where((d > 0) & (d < w), 1 / w, 0.0)
    keep = vals > 0
    idx = g.ravel(cand[keep])
    # collars are disjoint, so each cell is produced by at most one square
    uniq, first = np.unique(idx, return_index=True)
    if uniq.size != idx.size:
        v = np.zeros(uniq.size)
        gr = np.zeros(uniq.size)
        inv = np.unique(idx, return_inverse=True)[1]
        np.maximum.at(v, inv, vals[keep])
        np.maximum.at(gr, inv, grad[keep])
        return ScalarField(g, uniq, v, gr, "analytic")
    return ScalarField(g, idx[first], vals[keep][first], grad[keep][first], "analytic")


# ---------------------------------------------------------------------------
# staircase partition


@dataclass
class StaircasePartition:
    points: tuple[float, ...]
    eps: float
    s: float

    def to_json(self) -> dict:
        return {"points": list(self.points), "eps": self.eps, "s": self.s}


def _check_samples(t: np.ndarray, F: np.ndarray, s: float) -> None:
    if t.ndim != 1 or t.shape != F.shape or t.size == 0:
        raise ValidationError("need matching one-dimensional, non-empty sample arrays")
    if np.any(np.diff(t) <= 0):
        raise ValidationError("sample abscissae must increase strictly")
    if t[0] < 0 or t[-1] >= s:
        raise ValidationError(f"samples must lie in [0, s) with s = {s}")
    if np.any(np.diff(F) < 0):
        raise ValidationError("samples are not non-decreasing")


def staircase(t, F, eps: float, s: float) -> StaircasePartition:
    """Greedy partition with ``|F(t_i) - F(t)| <= eps`` on every ``(t_{i-1}, t_i]``.

    From each point, jump to the largest sample whose value exceeds the first
    sample after the point by at most ``eps``.  Every step advances by at
    least one sample, so the sweep ends at the last sample.
    """
    t = np.asarray(t, dtype=float)
    F = np.asarray(F, dtype=float)
    if eps <= 0:
        raise ValidationError("eps must be positive")
    _check_samples(t, F, s)
    points = [0.0]
    i = int(np.searchsorted(t, 0.0, side="right"))  # first sample after t_0
    while i < t.size:
        j = int(np.searchsorted(F, F[i] + eps, side="right")) - 1
        points.append(float(t[j]))
        i = j + 1
    return StaircasePartition(tuple(points), float(eps), float(s))


def staircase_violations(part: StaircasePartition, t, F) -> list[tuple[int, float]]:
    """Exhaustive scan: (interval, sample) pairs breaking the eps property."""
    t = np.asarray(t, dtype=float)
    F = np.asarray(F, dtype=float)
    bad = []
    pts = part.points
    for i in range(1, len(pts)):
        j = int(np.searchsorted(t, pts[i]))
        if j >= t.size or t[j] != pts[i]:
            bad.append((i, pts[i]))
            continue
        for q in range(t.size):
            if pts[i - 1] < t[q] <= pts[i] and abs(F[j] - F[q]) > part.eps:
                bad.append((i, float(t[q])))
    if t.size and t[t > 0].size and pts[-1] < t[-1]:
        bad.append((len(pts), float(t[-1])))
    return bad


def random_monotone_samples(rng: np.random.Generator, size: int = 200, s: float = 1.0):
    """Left-continuous non-decreasing step function sampled at random points."""
    t = np.sort(rng.uniform(0, s, size))
    t = np.unique(t[t < s])
    jumps = np.where(rng.uniform(size=t.size) < 0.1, rng.uniform(0, 0.05, t.size), rng.uniform(0, 0.002, t.size))
    F = np.cumsum(jumps)
    return t, F
