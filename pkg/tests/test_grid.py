import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hausdorff_choquet.errors import CapacityError, ValidationError
from hausdorff_choquet.grid import (
    DiscreteSet,
    ScalarField,
    block_set,
    closed_superlevel,
    fd_gradient,
    layer_cake_integral,
    lebesgue_integral,
    make_grid,
    superlevel,
)
from hausdorff_choquet.testbed import TentSpec, radial_bump, tent2d


@pytest.mark.parametrize(
    "n, bbox, cells, h",
    [(2, (-2, 2), 128, 0.03125), (1, (0, 1), 2, 0.5), (3, (-1, 1), 64, 0.03125)],
)
def test_make_grid_cell_width(n, bbox, cells, h):
    g = make_grid(n, bbox, cells)
    assert g.h == pytest.approx(h, rel=1e-15)
    assert g.shape == (cells,) * n


@pytest.mark.parametrize(
    "n, bbox, cells, err",
    [
        (4, (0, 1), 8, ValidationError),
        (2, (0, 1), 1, ValidationError),
        (2, [(0, 1), (0, 2)], 8, ValidationError),
        (2, (1, 1), 8, ValidationError),
        (3, (0, 1), 2**14, CapacityError),
    ],
)
def test_make_grid_rejects(n, bbox, cells, err):
    with pytest.raises(err):
        make_grid(n, bbox, cells)


def test_non_cubic_bbox_message():
    with pytest.raises(ValidationError, match="cubic"):
        make_grid(2, [(0, 1), (0, 2)], 8)


def test_boundary_layer_rejected():
    g = make_grid(2, (0, 1), 8)
    v = np.zeros((8, 8))
    v[0, 3] = 1.0
    with pytest.raises(ValidationError, match="compactly supported"):
        ScalarField.from_dense(g, v)


def test_negative_values_rejected():
    g = make_grid(2, (0, 1), 8)
    v = np.zeros((8, 8))
    v[3, 3] = -1.0
    with pytest.raises(ValidationError):
        ScalarField.from_dense(g, v)


def test_superlevel_at_max_is_empty():
    f = radial_bump(2, 1.0, 32)
    assert superlevel(f, f.max()).is_empty


def test_superlevel_of_scaled_block_indicator():
    g = make_grid(2, (0, 1), 16)
    B = block_set(g, (3, 4), (5, 2))
    f = ScalarField.indicator(B, 2.0)
    assert superlevel(f, 1.0) == B


def test_closed_superlevel_includes_level():
    g = make_grid(1, (0, 1), 8)
    f = ScalarField(g, [2, 3, 4], [1.0, 2.0, 1.0])
    assert len(closed_superlevel(f, 2.0)) == 1
    assert superlevel(f, 2.0).is_empty
    with pytest.raises(ValidationError):
        closed_superlevel(f, 0.0)


def test_tent_superlevel_is_a_disc():
    # u_r > t inside |x| < (2 - t r) r; the cell scan reproduces the disc
    r, t = 0.25, 0.5 / 0.25
    u = tent2d(TentSpec(r, 8))
    E = superlevel(u, t)
    rho = np.linalg.norm(u.grid.centers(E.coords), axis=1)
    assert rho.max() < (2 - t * r) * r
    g = u.grid
    coords = np.stack(np.meshgrid(np.arange(g.cells), np.arange(g.cells), indexing="ij"), -1).reshape(-1, 2)
    all_rho = np.linalg.norm(g.centers(coords), axis=1)
    assert len(E) == np.count_nonzero(all_rho < (2 - t * r) * r - 1e-12)


def test_lebesgue_zero_and_counting():
    g = make_grid(2, (0, 1), 10)
    assert lebesgue_integral(ScalarField.zeros(g)) == 0.0
    B = block_set(g, (2, 2), 3)
    assert lebesgue_integral(ScalarField.indicator(B)) == pytest.approx(9 * g.h**2)


def test_bump_integral_closed_form():
    f = radial_bump(2, 1.0, 256)
    assert lebesgue_integral(f) == pytest.approx(math.pi / 3, rel=0.02)


def test_fd_gradient_zero_field():
    g = make_grid(2, (0, 1), 8)
    z = fd_gradient(ScalarField.zeros(g))
    assert z.gradient.size == 0 and z.gradient_kind == "finite-difference"


def test_fd_gradient_linear_interior():
    g = make_grid(2, (0, 1), 20)
    X, _ = g.center_mesh()
    v = np.zeros(g.shape)
    v[2:18, 2:18] = X[2:18, 2:18]
    f = fd_gradient(ScalarField.from_dense(g, v))
    coords = g.unravel(f.index)
    interior = np.all((coords >= 3) & (coords <= 16), axis=1)
    assert np.allclose(f.gradient[interior], 1.0)


def test_fd_gradient_tent_annulus():
    # the analytic gradient on the annulus is 1/r^2; the difference quotient matches it
    r = 0.25
    u = tent2d(TentSpec(r, 16))
    fd = fd_gradient(ScalarField(u.grid, u.index, u.values))
    rho = np.linalg.norm(u.grid.centers(u.grid.unravel(u.index)), axis=1)
    h = u.grid.h
    ring = (rho > r + 2 * h) & (rho < 2 * r - 2 * h)
    assert np.allclose(fd.gradient[ring], 1 / r**2, rtol=0.05)


@pytest.mark.parametrize("cells", [32, 64])
def test_fd_gradient_tracks_analytic_bump(cells):
    f = radial_bump(2, 1.0, cells)
    fd = fd_gradient(ScalarField(f.grid, f.index, f.values))
    rho = np.linalg.norm(f.grid.centers(f.grid.unravel(f.index)), axis=1)
    h = f.grid.h
    inner = (rho > 2 * h) & (rho < 1 - 2 * h)
    assert np.max(np.abs(fd.gradient[inner] - f.gradient[inner])) <= 2 * h


# ---------------------------------------------------------------------------
# properties


@st.composite
def small_fields(draw, cells=12):
    g = make_grid(2, (0, 1), cells)
    inner = draw(
        st.lists(st.floats(0, 5, allow_nan=False), min_size=(cells - 2) ** 2, max_size=(cells - 2) ** 2)
    )
    v = np.zeros(g.shape)
    v[1:-1, 1:-1] = np.asarray(inner).reshape(cells - 2, cells - 2)
    return ScalarField.from_dense(g, v)


@given(small_fields(), st.floats(0, 5), st.floats(0, 5))
def test_superlevel_nesting(f, t1, t2):
    lo, hi = min(t1, t2), max(t1, t2)
    assert superlevel(f, hi).issubset(superlevel(f, lo))


@given(small_fields())
def test_layer_cake_identity(f):
    assert layer_cake_integral(f) == pytest.approx(lebesgue_integral(f), rel=1e-9, abs=1e-12)


@given(small_fields(), small_fields(), st.floats(0, 3))
def test_lebesgue_linear_and_monotone(f, g, lam):
    s = f.add(g)
    assert lebesgue_integral(s) == pytest.approx(lebesgue_integral(f) + lebesgue_integral(g), abs=1e-9)
    assert lebesgue_integral(f.scaled(lam)) == pytest.approx(lam * lebesgue_integral(f), abs=1e-9)
    assert lebesgue_integral(f) <= lebesgue_integral(s) + 1e-12


@given(st.lists(st.tuples(st.integers(0, 9), st.integers(0, 9)), max_size=30),
       st.lists(st.tuples(st.integers(0, 9), st.integers(0, 9)), max_size=30))
def test_set_algebra(a, b):
    g = make_grid(2, (0, 1), 10)
    A = DiscreteSet.from_coords(g, np.array(a, dtype=int).reshape(-1, 2))
    B = DiscreteSet.from_coords(g, np.array(b, dtype=int).reshape(-1, 2))
    U = A.union(B)
    assert A.issubset(U) and B.issubset(U)
    assert len(U) == len(A) + len(B) - len(A.intersection(B))
    assert A.difference(B).intersection(B).is_empty
