"""Certified brackets for the delta-dimensional Hausdorff content of cell sets.

Upper bounds come from explicit ball covers (lazy greedy weighted set cover,
refined by an exact branch-and-bound on small sets).  Lower bounds come from
a Frostman packing measure found by linear programming, and for delta = n
from the volume bound ``sum r_i^n >= |E| / |B(0,1)|``.

All geometry is done in grid units (cell width 1) and rescaled by ``h**delta``
at the end, so dilating a set together with its grid scales every bracket
endpoint by exactly ``lambda**delta``.
"""

from __future__ import annotations

import hashlib
import heapq
import logging
import math
from collections import OrderedDict
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy import ndimage, optimize, signal, sparse
from scipy.spatial import cKDTree

from .errors import BracketInversionError, ValidationError
from .grid import DiscreteSet, Grid, unit_ball_volume

log = logging.getLogger(__name__)

MIN_DELTA = 0.1
_REL = 1e-12


@dataclass(frozen=True)
class Ball:
    center: tuple[float, ...]
    radius: float

    def to_json(self) -> dict:
        return {"center": list(self.center), "radius": self.radius}


@dataclass
class Cover:
    balls: list[Ball]
    cost: float
    delta: float

    def recomputed_cost(self) -> float:
        return math.fsum(b.radius**self.delta for b in self.balls)

    def to_json(self) -> dict:
        return {
            "delta": self.delta,
            "cost": self.cost,
            "centers": [list(b.center) for b in self.balls],
            "radii": [b.radius for b in self.balls],
        }


@dataclass
class ContentBracket:
    delta: float
    lower: float
    upper: float
    witness: Cover
    lower_method: str  # "frostman-LP" | "volume-bound" | "exact" | "empty"
    exact: bool = False
    slack: float = 1.0
    meta: dict = field(default_factory=dict)

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def contains(self, value: float, rtol: float = 0.0) -> bool:
        return self.lower * (1 - rtol) <= value <= self.upper * (1 + rtol)

    def to_json(self, witness: bool = True) -> dict:
        out = {
            "delta": self.delta,
            "lower": self.lower,
            "upper": self.upper,
            "lower_method": self.lower_method,
            "exact": self.exact,
            "slack": self.slack,
            "meta": self.meta,
        }
        if witness:
            out["witness"] = self.witness.to_json()
        return out


@dataclass(frozen=True)
class ContentOptions:
    """Knobs for content_bracket; defaults are the calibrated ones."""

    steps_per_octave: int = 4
    exact_cap: int = 256
    exact_budget: int = 20000
    exact: str = "auto"  # "auto" | "never" | "always"
    lp: str = "auto"  # "auto" skips the LP when delta == n; "always" | "never"
    lp_max_cells: int = 1500
    lp_stride: int | None = None
    lp_anchor: float | None = None  # world length pinning the LP radii
    upper: str = "greedy"  # "greedy" | "enclosing"
    coarsen_limit: int = 2**21
    slack: float | None = None  # Frostman factor S override; must be >= the derived one
    split_components: int = 8  # cover components separately when there are 2..this many

    def __post_init__(self):
        if self.exact not in ("auto", "never", "always"):
            raise ValidationError(f"exact must be auto, never or always, got {self.exact!r}")
        if self.lp not in ("auto", "never", "always"):
            raise ValidationError(f"lp must be auto, never or always, got {self.lp!r}")
        if self.upper not in ("greedy", "enclosing"):
            raise ValidationError(f"upper must be greedy or enclosing, got {self.upper!r}")
        if self.steps_per_octave < 1 or self.lp_max_cells < 1 or self.exact_budget < 0:
            raise ValidationError("steps_per_octave and lp_max_cells must be >= 1, exact_budget >= 0")

    def to_json(self) -> dict:
        return asdict(self)


def _check_delta(delta: float, n: int) -> float:
    delta = float(delta)
    if not (0 < delta <= n + 1e-12):
        raise ValidationError(f"delta must lie in (0, {n}], got {delta}")
    if delta < MIN_DELTA:
        raise ValidationError(
            f"delta = {delta} is below {MIN_DELTA}; brackets degenerate as delta -> 0+"
        )
    return min(delta, float(n))


# ---------------------------------------------------------------------------
# candidate family


def _radius_ladder(n: int, r_max: float, steps: int) -> np.ndarray:
    r0 = math.sqrt(n) / 2
    if r_max <= r0:
        return np.array([r0])
    k = math.ceil(steps * math.log2(r_max / r0) - 1e-9)
    return r0 * 2.0 ** (np.arange(k + 1) / steps)


def _lattice_stride(rho: float) -> float:
    return max(0.5, 2.0 ** math.floor(math.log2(rho / 2))) if rho >= 1 else 0.5


def _axis_far(d: np.ndarray, t: int) -> np.ndarray:
    # farthest distance along one axis from a centre at v (t=0) or v+1/2 (t=1)
    # to the cell [v+d, v+d+1]
    if t == 0:
        return np.maximum(np.abs(d), np.abs(d + 1)).astype(float)
    return np.abs(d) + 0.5


def _stencil(n: int, rho: float, tau: tuple[int, ...]):
    m = int(math.ceil(rho)) + 1
    rng = np.arange(-m, m + 1)
    mesh = np.meshgrid(*([rng] * n), indexing="ij")
    far2 = sum(_axis_far(mesh[i], tau[i]) ** 2 for i in range(n))
    inside = far2 <= rho * rho * (1 + _REL)
    offsets = np.stack([g[inside] for g in mesh], axis=1)
    return m, inside, offsets, np.sqrt(far2[inside])


def _enclosing(coords: np.ndarray):
    """Ball about the bbox midpoint covering every cell; centre in grid units."""
    c = (coords.min(axis=0) + coords.max(axis=0) + 1) / 2.0
    far = np.sqrt(np.sum((np.abs(coords + 0.5 - c) + 0.5) ** 2, axis=1))
    return c, float(far.max())


class _Family:
    """Implicit candidate balls over a padded local frame of a cell set."""

    def __init__(self, coords: np.ndarray, extent_cells: int, steps: int):
        n = coords.shape[1]
        self.n = n
        self.origin = coords.min(axis=0)
        local = coords - self.origin
        self.L = local.max(axis=0) + 1
        self.enc_center, self.enc_radius = _enclosing(coords)
        radii = _radius_ladder(n, self.enc_radius, steps)
        # centres reach m cells past the set and stencils another m beyond them
        self.pad = 2 * (int(math.ceil(radii[-1])) + 1)
        self.shape = tuple(int(x) for x in self.L + 2 * self.pad)
        self.strides = np.array([int(np.prod(self.shape[i + 1 :])) for i in range(n)], dtype=np.int64)
        self.flat_cells = (local + self.pad) @ self.strides
        mask = np.zeros(tuple(int(x) for x in self.L), dtype=np.float32)
        mask[tuple(local.T)] = 1.0

        self.stencils: list[tuple[float, tuple[int, ...], np.ndarray, np.ndarray]] = []
        bases, costs_r, sid = [], [], []
        centers = []
        for rho in radii:
            sigma = _lattice_stride(rho)
            types = [tuple(t) for t in np.ndindex(*([2] * n))] if sigma < 1 else [(0,) * n]
            for tau in types:
                m, inside, offsets, far = _stencil(n, rho, tau)
                if offsets.shape[0] == 0:
                    continue
                kern = inside[(slice(None, None, -1),) * n].astype(np.float32)
                full = signal.fftconvolve(mask, kern, mode="full")
                counts = np.rint(full).astype(np.int64)
                pos = np.argwhere(counts > 0)
                v = pos - m  # local lattice coordinate of the centre's base vertex
                vg = v + self.origin
                keep = np.ones(len(v), dtype=bool)
                if sigma >= 1:
                    keep &= np.all(vg % int(sigma) == 0, axis=1)
                cg = vg + np.asarray(tau) / 2.0
                keep &= np.all((cg >= 0) & (cg <= extent_cells), axis=1)
                v, cg = v[keep], cg[keep]
                if len(v) == 0:
                    continue
                k = len(self.stencils)
                self.stencils.append((float(rho), tau, offsets @ self.strides, far))
                bases.append((v + self.pad) @ self.strides)
                costs_r.append(np.full(len(v), rho))
                sid.append(np.full(len(v), k))
                centers.append(cg)
        self.base = np.concatenate(bases)
        self.radius = np.concatenate(costs_r)
        self.sid = np.concatenate(sid)
        self.center = np.concatenate(centers)

    def __len__(self):
        return int(self.base.size) + 1  # + enclosing ball

    @property
    def enclosing_id(self) -> int:
        return int(self.base.size)

    def cells_of(self, j: int, flag: np.ndarray) -> np.ndarray:
        """Flat padded positions covered by candidate j that are set in ``flag``."""
        if j == self.enclosing_id:
            pts = self.flat_cells
        else:
            pts = self.base[j] + self.stencils[self.sid[j]][2]
        return pts[flag[pts]]

    def shrunk_radius(self, j: int, is_cell: np.ndarray) -> float:
        if j == self.enclosing_id:
            return self.enc_radius
        _, _, offs, far = self.stencils[self.sid[j]]
        hit = is_cell[self.base[j] + offs]
        return float(far[hit].max()) if hit.any() else 0.0

    def nominal_radius(self, j: int) -> float:
        return self.enc_radius if j == self.enclosing_id else float(self.radius[j])

    def center_of(self, j: int) -> np.ndarray:
        return self.enc_center if j == self.enclosing_id else self.center[j]

    def membership(self):
        """Explicit CSR membership (rows: candidates, columns: set positions)."""
        pos = np.full(int(np.prod(self.shape)), -1, dtype=np.int64)
        pos[self.flat_cells] = np.arange(self.flat_cells.size)
        indptr, cols, radii = [0], [], []
        for j in range(len(self) - 1):
            _, _, offs, far = self.stencils[self.sid[j]]
            p = pos[self.base[j] + offs]
            hit = p >= 0
            cols.append(p[hit])
            radii.append(far[hit].max())
            indptr.append(indptr[-1] + int(hit.sum()))
        cols.append(np.arange(self.flat_cells.size))
        radii.append(self.enc_radius)
        indptr.append(indptr[-1] + self.flat_cells.size)
        return np.asarray(indptr), np.concatenate(cols), np.asarray(radii)


def _coarsen(coords: np.ndarray, extent: int, limit: int):
    """Merge cells into blocks of 2^k until the bounding box has <= limit cells."""
    f = 1
    c = coords
    while np.prod(c.max(axis=0) - c.min(axis=0) + 1) > limit:
        f *= 2
        c = np.unique(coords // f, axis=0)
    return c, f, int(math.ceil(extent / f))


def _to_ball(grid: Grid, center_units, radius_units: float, scale: float) -> Ball:
    c = np.asarray(grid.lo) + np.asarray(center_units, dtype=float) * scale
    return Ball(tuple(float(x) for x in c), float(radius_units * scale))


# ---------------------------------------------------------------------------
# public operations


def candidate_balls(E: DiscreteSet, delta: float, steps_per_octave: int = 4) -> list[Ball]:
    """Explicit candidate family (shrunk to the cells each ball covers)."""
    _check_delta(delta, E.grid.n)
    if E.is_empty:
        raise ValidationError("candidate family of the empty set is undefined; its content is 0")
    fam = _Family(E.coords, E.grid.cells, steps_per_octave)
    _, _, radii = fam.membership()
    return [_to_ball(E.grid, fam.center_of(j), radii[j], E.grid.h) for j in range(len(fam))]


def _empty_cover(delta: float) -> Cover:
    return Cover([], 0.0, delta)


def enclosing_cover(E: DiscreteSet, delta: float) -> Cover:
    """One ball about the bounding-box midpoint containing every cell of E."""
    delta = _check_delta(delta, E.grid.n)
    if E.is_empty:
        return _empty_cover(delta)
    c, r = _enclosing(E.coords)
    b = _to_ball(E.grid, c, r, E.grid.h)
    return Cover([b], (r**delta) * E.grid.h**delta, delta)


def greedy_upper(
    E: DiscreteSet,
    delta: float,
    steps_per_octave: int = 4,
    coarsen_limit: int = 2**21,
    parts: list[DiscreteSet] | None = None,
) -> Cover:
    """Lazy greedy weighted set cover over the candidate family.

    Picks the ball minimising ``r^delta / newly covered cells`` (ties go to
    the lowest candidate index), then drops redundant balls and shrinks each
    survivor to the cells it contains.  With ``parts`` the returned cost is
    ``min(direct, sum of part covers)``, which makes the upper bound
    subadditive over the supplied decomposition.
    """
    delta = _check_delta(delta, E.grid.n)
    if E.is_empty:
        return _empty_cover(delta)
    cover = _greedy(E, delta, steps_per_octave, coarsen_limit)
    if parts:
        covers = [greedy_upper(P, delta, steps_per_octave, coarsen_limit) for P in parts]
        union = parts[0]
        for P in parts[1:]:
            union = union.union(P)
        if not E.issubset(union):
            raise ValidationError("parts do not cover the queried set")
        total = math.fsum(c.cost for c in covers)
        if total < cover.cost:
            cover = Cover([b for c in covers for b in c.balls], total, delta)
    return cover


def _greedy(E: DiscreteSet, delta: float, steps: int, coarsen_limit: int) -> Cover:
    coords, f, extent = _coarsen(E.coords, E.grid.cells, coarsen_limit)
    fam = _Family(coords, extent, steps)
    size = int(np.prod(fam.shape))
    is_cell = np.zeros(size, dtype=bool)
    is_cell[fam.flat_cells] = True
    uncovered = is_cell.copy()

    cost = fam.radius**delta
    enc_cost = fam.enc_radius**delta
    ncells = fam.flat_cells.size
    # initial gains: every cell is uncovered, so the counts are the stencil hits
    counts = _initial_counts(fam, is_cell)
    heap = [(float(c / k), int(j)) for j, (c, k) in enumerate(zip(cost, counts)) if k > 0]
    heap.append((enc_cost / ncells, fam.enclosing_id))
    heapq.heapify(heap)

    chosen: list[int] = []
    remaining = ncells
    while remaining > 0:
        ratio, j = heapq.heappop(heap)
        newly = fam.cells_of(j, uncovered)
        k = newly.size
        if k == 0:
            continue
        c = enc_cost if j == fam.enclosing_id else cost[j]
        key = (float(c / k), j)
        if heap and key > heap[0]:
            heapq.heappush(heap, key)
            continue
        uncovered[newly] = False
        remaining -= k
        chosen.append(j)

    chosen = _prune(fam, chosen, is_cell, delta)
    balls, total = [], []
    for j in chosen:
        r = fam.shrunk_radius(j, is_cell)
        balls.append(_to_ball(E.grid, fam.center_of(j), r, f * E.grid.h))
        total.append(r**delta)
    return Cover(balls, math.fsum(total) * (f * E.grid.h) ** delta, delta)


def _initial_counts(fam: _Family, is_cell: np.ndarray) -> np.ndarray:
    out = np.empty(fam.base.size, dtype=np.int64)
    for k, (_, _, offs, _) in enumerate(fam.stencils):
        rows = np.flatnonzero(fam.sid == k)
        if rows.size == 0:
            continue
        # chunk to bound memory: rows x stencil gathers
        chunk = max(1, 2_000_000 // max(offs.size, 1))
        for s in range(0, rows.size, chunk):
            r = rows[s : s + chunk]
            out[r] = is_cell[fam.base[r, None] + offs[None, :]].sum(axis=1)
    return out


def _prune(fam: _Family, chosen: list[int], is_cell: np.ndarray, delta: float) -> list[int]:
    """Drop balls whose cells are all covered by other chosen balls."""
    if len(chosen) <= 1:
        return chosen
    mult = np.zeros(is_cell.size, dtype=np.int32)
    cells = {j: fam.cells_of(j, is_cell) for j in chosen}
    for j in chosen:
        mult[cells[j]] += 1
    order = sorted(chosen, key=lambda j: (-fam.nominal_radius(j), -j))
    keep = set(chosen)
    for j in order:
        if mult[cells[j]].min() >= 2:
            mult[cells[j]] -= 1
            keep.discard(j)
    return [j for j in chosen if j in keep]


def components(E: DiscreteSet, max_parts: int | None = None) -> list[DiscreteSet]:
    """Connected components of E (cells touching at a face, edge or corner).

    Returns ``[E]`` when the bounding box is too large to label densely or
    when there are more than ``max_parts`` components.
    """
    if E.is_empty:
        return []
    c = E.coords
    lo = c.min(axis=0)
    shape = tuple(c.max(axis=0) - lo + 1)
    if int(np.prod(shape)) > 2**22:
        return [E]
    mask = np.zeros(shape, dtype=bool)
    mask[tuple((c - lo).T)] = True
    labels, count = ndimage.label(mask, structure=ndimage.generate_binary_structure(E.grid.n, E.grid.n))
    if count <= 1 or (max_parts is not None and count > max_parts):
        return [E]
    lab = labels[tuple((c - lo).T)]
    return [DiscreteSet(E.grid, E.index[lab == k]) for k in range(1, count + 1)]


def verify_cover(E: DiscreteSet, cover: Cover, rtol: float = 1e-9) -> bool:
    """Every cell of E lies (as a closed cube) inside at least one ball."""
    if E.is_empty:
        return True
    if not cover.balls:
        return False
    g = E.grid
    pts = E.coords.astype(float)
    covered = np.zeros(len(E), dtype=bool)
    for b in cover.balls:
        c = (np.asarray(b.center) - np.asarray(g.lo)) / g.h
        far = np.sqrt(np.sum((np.abs(pts + 0.5 - c) + 0.5) ** 2, axis=1))
        covered |= far <= (b.radius / g.h) * (1 + rtol) + 1e-12
    return bool(covered.all())


# ---------------------------------------------------------------------------
# exact branch and bound


@dataclass
class ExactResult:
    cover: Cover
    optimal: bool
    nodes: int
    candidates: int


def exact_small(
    E: DiscreteSet,
    delta: float,
    budget: int = 20000,
    steps_per_octave: int = 4,
    cap: int = 256,
    incumbent: Cover | None = None,
) -> ExactResult:
    """Minimum-cost cover within the candidate family.

    The family is first reduced (identical sets merged, dominated balls
    dropped), then the 0/1 set-cover program is solved by HiGHS branch and
    bound with ``budget`` as node limit.  ``optimal`` is set only when the
    solver proves optimality; otherwise the cheaper of the solver's best
    point and ``incumbent`` (greedy by default) is returned.
    """
    delta = _check_delta(delta, E.grid.n)
    if E.is_empty:
        return ExactResult(_empty_cover(delta), True, 0, 0)
    if len(E) > cap:
        raise ValidationError(f"exact search is limited to {cap} cells, set has {len(E)}")
    if incumbent is None:
        incumbent = greedy_upper(E, delta, steps_per_octave)
    fam = _Family(E.coords, E.grid.cells, steps_per_octave)
    indptr, cols, radii = fam.membership()
    M, N = len(radii), len(E)
    A = np.zeros((M, N), dtype=bool)
    for j in range(M):
        A[j, cols[indptr[j] : indptr[j + 1]]] = True
    costs = radii**delta
    rows = _reduce_family(A, costs)
    cover_matrix = sparse.csr_matrix(A[rows].T.astype(float))
    res = optimize.milp(
        costs[rows],
        constraints=optimize.LinearConstraint(cover_matrix, lb=1),
        integrality=np.ones(rows.size),
        bounds=optimize.Bounds(0, 1),
        options={"node_limit": int(budget), "presolve": True},
    )
    nodes = int(getattr(res, "mip_node_count", 0) or 0)
    scale = E.grid.h**delta
    if res.x is None:
        return ExactResult(incumbent, False, nodes, int(rows.size))
    pick = rows[np.flatnonzero(res.x > 0.5)]
    cost = math.fsum(costs[pick]) * scale
    optimal = res.status == 0
    if not optimal and cost >= incumbent.cost:
        return ExactResult(incumbent, False, nodes, int(rows.size))
    balls = [_to_ball(E.grid, fam.center_of(int(j)), radii[j], E.grid.h) for j in pick]
    return ExactResult(Cover(balls, cost, delta), optimal, nodes, int(rows.size))


def _reduce_family(A: np.ndarray, costs: np.ndarray) -> np.ndarray:
    """Indices of candidates surviving de-duplication and dominance removal."""
    # identical sets: keep the cheapest (lowest index on ties)
    packed = np.packbits(A, axis=1)
    order = np.lexsort((np.arange(len(costs)), costs))
    seen, rows = set(), []
    for j in order:
        k = packed[j].tobytes()
        if k not in seen:
            seen.add(k)
            rows.append(j)
    rows = np.array(sorted(rows))
    B = A[rows].astype(np.float32)
    sizes = B.sum(axis=1)
    c = costs[rows]
    keep = np.ones(len(rows), dtype=bool)
    chunk = 512
    for s in range(0, len(rows), chunk):
        inter = B[s : s + chunk] @ B.T  # |S_i & S_j|
        sub = inter >= sizes[s : s + chunk, None] - 0.5  # S_i subset of S_j
        bigger = sizes[None, :] > sizes[s : s + chunk, None]
        cheaper = c[None, :] <= c[s : s + chunk, None]
        keep[s : s + chunk] &= ~np.any(sub & bigger & cheaper, axis=1)
    return rows[keep]


# ---------------------------------------------------------------------------
# lower bounds


@dataclass
class FrostmanResult:
    lower: float
    slack: float  # divide the packing mass by this to get a content lower bound
    mass: float  # packing mass in grid units
    stride: int
    cells_used: int
    constraints: int
    status: str


def frostman_geometry(n: int) -> tuple[float, float, float]:
    """(gamma, S, R0) for the ball constraint family.

    Family balls of radius ``R_j = R0 * 2^j`` are centred on a lattice of
    spacing ``2 gamma R_j / sqrt(n)``; every ball of radius r sits inside a
    family ball of radius at most ``S r`` with ``S = 2 / (1 - gamma)``.
    """
    gamma = max(1 - 1 / math.sqrt(n), 0.25)
    S = 2 / (1 - gamma)
    r_star = unit_ball_volume(n) ** (-1 / n)
    return gamma, S, S * r_star


def slack_factor(n: int, delta: float) -> float:
    return frostman_geometry(n)[1] ** delta


def _thin(coords: np.ndarray, max_cells: int, stride: int | None):
    if stride is None:
        stride = 1
        while np.count_nonzero(np.all(coords % stride == 0, axis=1)) > max_cells:
            stride *= 2
    sub = coords[np.all(coords % stride == 0, axis=1)]
    if len(sub) == 0:  # never thin a set away completely
        sub, stride = coords[:1], stride
    return sub, stride


def frostman_lower(
    E: DiscreteSet,
    delta: float,
    lp_max_cells: int = 1500,
    stride: int | None = None,
    anchor: float | None = None,
) -> FrostmanResult:
    """Lower bound from a feasible packing measure.

    Maximise the total weight of cells (a subset of E thinned to a
    sublattice of ``stride``) subject to ``w(cells meeting B) <= R^delta``
    for every family ball B.  Spread uniformly over its cells, such a weight
    satisfies ``mu(B(x, r)) <= (S r)^delta`` for every ball, so any cover
    costs at least ``mass / S^delta``.  The solver output is rescaled onto
    the feasible side before it is used.  At ``delta == n`` the result is
    at least the volume bound ``|E| / v_n``.

    By default the family radii are ``R0 * 2^j`` in grid units on a lattice
    through the grid origin.  A world length ``anchor`` instead pins them to
    ``anchor * 2^j`` (starting at or below R0) on a lattice through the world
    origin, so sets drawn on different grids see the same large balls.
    """
    n = E.grid.n
    delta = _check_delta(delta, n)
    gamma, S, R0 = frostman_geometry(n)
    slack = S**delta
    if E.is_empty:
        return FrostmanResult(0.0, slack, 0.0, 1, 0, 0, "empty")
    pts, stride = _thin(E.coords, lp_max_cells, stride)
    centers = pts + 0.5
    N = len(pts)
    tree = cKDTree(centers)
    _, enc_r = _enclosing(pts)
    half_diag = math.sqrt(n) / 2

    rows_cols: dict[bytes, tuple[np.ndarray, float]] = {}
    ub = np.full(N, np.inf)
    R = R0
    lo_units = np.asarray(E.grid.lo) / E.grid.h
    if anchor is not None:
        if anchor <= 0:
            raise ValidationError("anchor length must be positive")
        a_units = anchor / E.grid.h
        R = a_units * 2.0 ** math.floor(math.log2(R0 / a_units))
    while True:
        a = 2 * gamma * R / math.sqrt(n)
        shift = np.mod(-lo_units, a) if anchor is not None else np.zeros(n)
        snapped = np.unique(np.floor((centers - shift) / a).astype(np.int64), axis=0)
        m = int(math.ceil((R + half_diag) / a))
        rng = np.arange(-m, m + 2)
        offs = np.stack([g.ravel() for g in np.meshgrid(*([rng] * n), indexing="ij")], axis=1)
        lat = np.unique((snapped[:, None, :] + offs[None, :, :]).reshape(-1, n), axis=0)
        ctr = lat * a + shift
        # drop lattice points farther than R + half_diag from every cell centre
        dmin, _ = tree.query(ctr, k=1, distance_upper_bound=R + half_diag + 1e-9)
        ctr = ctr[np.isfinite(dmin)]
        hits = tree.query_ball_point(ctr, R + half_diag + 1e-9)
        cap = R**delta
        for c, h in zip(ctr, hits):
            if not h:
                continue
            h = np.asarray(h)
            gap = np.maximum(np.abs(centers[h] - c) - 0.5, 0.0)
            h = np.sort(h[np.sum(gap * gap, axis=1) <= R * R * (1 + _REL)])
            if h.size == 0:
                continue
            if h.size == 1:
                ub[h[0]] = min(ub[h[0]], cap)
                continue
            k = h.tobytes()
            prev = rows_cols.get(k)
            if prev is None or cap < prev[1]:
                rows_cols[k] = (h, cap)
        if (1 - gamma) * R >= enc_r:
            break
        R *= 2

    rows = list(rows_cols.values())
    if rows:
        indptr = np.cumsum([0] + [r[0].size for r in rows])
        A = sparse.csr_matrix(
            (np.ones(indptr[-1]), np.concatenate([r[0] for r in rows]), indptr), shape=(len(rows), N)
        )
        b = np.array([r[1] for r in rows])
    else:
        A, b = sparse.csr_matrix((0, N)), np.zeros(0)
    bounds = [(0.0, u if np.isfinite(u) else None) for u in ub]
    res = optimize.linprog(
        -np.ones(N), A_ub=A if rows else None, b_ub=b if rows else None, bounds=bounds, method="highs"
    )
    if res.x is None:
        log.warning("Frostman LP failed (%s); falling back", res.message)
        fallback = volume_lower(E) if delta == n else 0.0
        return FrostmanResult(fallback, slack, 0.0, stride, N, len(rows), "lp-failed")
    w = np.clip(res.x, 0.0, np.where(np.isfinite(ub), ub, np.inf))
    if rows:
        load = A @ w
        worst = float(np.max(load / b))
        if worst > 1:
            w = w / worst
    w *= 1 - 1e-12
    mass = math.fsum(w)
    lower = mass / slack * E.grid.h**delta
    status = "optimal" if res.status == 0 else res.message
    if delta == n:
        vol = volume_lower(E)
        if vol > lower:
            lower, status = vol, status + "; volume bound larger"
    return FrostmanResult(lower, slack, mass, stride, N, len(rows), status)


def volume_lower(E: DiscreteSet) -> float:
    """``|E| / |B(0,1)|``: a lower bound for the n-dimensional content."""
    return E.measure() / unit_ball_volume(E.grid.n)


# ---------------------------------------------------------------------------
# bracket


_CACHE: "OrderedDict[tuple, ContentBracket]" = OrderedDict()
_CACHE_SIZE = 4096


def clear_cache() -> None:
    _CACHE.clear()


def _cache_key(E: DiscreteSet, delta: float, opts: ContentOptions, sides: str) -> tuple:
    digest = hashlib.blake2b(E.index.tobytes(), digest_size=16).digest()
    return (E.grid, len(E), digest, float(delta), opts, sides)


def content_bracket(
    E: DiscreteSet,
    delta: float,
    options: ContentOptions | None = None,
    parts: list[DiscreteSet] | None = None,
    sides: str = "both",
) -> ContentBracket:
    """Certified ``[lower, upper]`` for the delta-dimensional content of E.

    ``sides`` = "lower" replaces the greedy cover by the single enclosing
    ball (still a valid upper bound) and "upper" skips the packing LP
    (lower falls back to the volume bound or 0).
    """
    opts = options or ContentOptions()
    n = E.grid.n
    delta = _check_delta(delta, n)
    slack = slack_factor(n, delta)
    if opts.slack is not None:
        S = frostman_geometry(n)[1]
        if opts.slack < S:
            raise ValidationError(f"slack override {opts.slack} is below the certified factor {S:.6g}")
        slack = opts.slack**delta
    if E.is_empty:
        return ContentBracket(delta, 0.0, 0.0, _empty_cover(delta), "empty", True, slack)
    if sides not in ("both", "lower", "upper"):
        raise ValidationError(f"sides must be both, lower or upper, got {sides!r}")
    key = None
    if parts is None:
        key = _cache_key(E, delta, opts, sides)
        hit = _CACHE.get(key)
        if hit is not None:
            _CACHE.move_to_end(key)
            return hit

    meta: dict = {"cells": len(E)}
    # upper
    if sides == "lower" or opts.upper == "enclosing":
        cover = enclosing_cover(E, delta)
        meta["upper_method"] = "enclosing"
    else:
        if parts is None and opts.split_components >= 2:
            split = components(E, opts.split_components)
            auto_parts = split if len(split) > 1 else None
        else:
            auto_parts = parts
        cover = greedy_upper(E, delta, opts.steps_per_octave, opts.coarsen_limit, auto_parts)
        meta["upper_method"] = "greedy"
    exact_flag = False
    run_exact = sides != "lower" and (
        opts.exact == "always" or (opts.exact == "auto" and len(E) <= opts.exact_cap)
    )
    if run_exact:
        ex = exact_small(E, delta, opts.exact_budget, opts.steps_per_octave, max(opts.exact_cap, len(E)), cover)
        meta["exact_nodes"] = ex.nodes
        meta["exact_optimal"] = ex.optimal
        if ex.cover.cost <= cover.cost:
            cover = ex.cover
            meta["upper_method"] = "exact" if ex.optimal else meta["upper_method"]
        exact_flag = ex.optimal

    # lower
    lower, method = 0.0, "none"
    if delta == n:
        lower, method = volume_lower(E), "volume-bound"
    use_lp = sides != "upper" and (opts.lp == "always" or (opts.lp == "auto" and delta < n))
    if use_lp:
        fr = frostman_lower(E, delta, opts.lp_max_cells, opts.lp_stride, opts.lp_anchor)
        meta["lp"] = {
            "mass": fr.mass,
            "stride": fr.stride,
            "cells_used": fr.cells_used,
            "constraints": fr.constraints,
            "status": fr.status,
        }
        lp_lower = fr.mass / slack * E.grid.h**delta
        if lp_lower > lower:
            lower, method = lp_lower, "frostman-LP"
    upper = cover.cost
    if lower > upper * (1 + 1e-9):
        raise BracketInversionError(
            f"content bracket inverted: lower {lower} > upper {upper} (delta={delta})",
            lower_certificate=meta.get("lp", method),
            upper_certificate=cover,
        )
    out = ContentBracket(delta, lower, upper, cover, method, exact_flag, slack, meta)
    if key is not None:
        _CACHE[key] = out
        if len(_CACHE) > _CACHE_SIZE:
            _CACHE.popitem(last=False)
    return out
