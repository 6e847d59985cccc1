import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hausdorff_choquet.choquet import choquet_integral
from hausdorff_choquet.content import ContentOptions, content_bracket
from hausdorff_choquet.errors import ValidationError
from hausdorff_choquet.grid import ball_set, lebesgue_integral, make_grid, superlevel
from hausdorff_choquet.testbed import (
    CantorSpec,
    TentSpec,
    bump_sum,
    cantor_capacitary,
    cantor_corners,
    cantor_set,
    default_side,
    radial_bump,
    random_bump_sum,
    random_monotone_samples,
    staircase,
    staircase_violations,
    tent2d,
    tent_gradient_integral,
    truncate,
)


def _grad_integral(f):
    return lebesgue_integral(f.gradient_field())


# ---------------------------------------------------------------------------
# tent


def test_tent_gradient_integral_closed_form():
    # annulus area 3 pi r^2 times |grad| = 1/r^2
    u = tent2d(TentSpec(0.25, 16))
    assert tent_gradient_integral(0.25) == pytest.approx(3 * math.pi)
    assert _grad_integral(u) == pytest.approx(3 * math.pi, rel=0.03)


@pytest.mark.parametrize("r", [0.25, 0.125, 0.0625])
def test_tent_gradient_integral_is_r_independent(r):
    ref = _grad_integral(tent2d(TentSpec(0.25, 8)))
    assert _grad_integral(tent2d(TentSpec(r, 8))) == pytest.approx(ref, rel=0.05)


def test_tent_support_is_disc_of_radius_2r():
    r = 0.25
    u = tent2d(TentSpec(r, 8))
    assert superlevel(u, 0.0) == ball_set(u.grid, (0, 0), 2 * r)
    assert u.max() == pytest.approx(1 / r)


def test_tent_requires_resolution():
    with pytest.raises(ValidationError, match="resolve"):
        TentSpec(0.25, 4)
    with pytest.raises(ValidationError):
        TentSpec(1.5)


# ---------------------------------------------------------------------------
# radial bump


def test_bump_superlevel_radius():
    f = radial_bump(2, 1.0, 128)
    E = superlevel(f, 0.5)
    rho = np.linalg.norm(f.grid.centers(E.coords), axis=1)
    assert 0.5 - f.grid.h < rho.max() < 0.5


def test_bump_gradient_integral():
    assert _grad_integral(radial_bump(2, 1.0, 256)) == pytest.approx(math.pi, rel=0.02)


def test_bump_one_dimensional_max():
    f = radial_bump(1, 1.0, 64)
    # nearest cell center sits h/2 from the apex
    assert f.max() == pytest.approx(1.0 - f.grid.h / 2, abs=1e-12)


def test_bump_sum_gradient_adds_vectors():
    g = make_grid(2, (-2, 2), 64)
    one = bump_sum(g, [(0.0, 0.0)], [1.0], [1.0])
    two = bump_sum(g, [(0.0, 0.0), (0.0, 0.0)], [1.0, 1.0], [1.0, 1.0])
    assert np.allclose(two.values, 2 * one.values)
    assert np.allclose(two.gradient, 2 * one.gradient)


def test_random_bump_sum_same_function_across_resolutions():
    a = random_bump_sum(make_grid(2, (-1.25, 1.25), 64), np.random.default_rng(4))
    b = random_bump_sum(make_grid(2, (-1.25, 1.25), 128), np.random.default_rng(4))
    assert lebesgue_integral(a) == pytest.approx(lebesgue_integral(b), rel=0.02)


# ---------------------------------------------------------------------------
# truncation


def test_truncate_identity():
    f = radial_bump(2, 1.0, 32)
    psi = truncate(f, 0.0, f.max() + 1)
    assert np.allclose(psi.values, f.values) and np.allclose(psi.gradient, f.gradient)


def test_truncate_bump_annulus():
    f = radial_bump(2, 1.0, 64)
    psi = truncate(f, 0.25, 0.75)
    assert psi.max() == pytest.approx(0.5)
    rho = np.linalg.norm(f.grid.centers(f.grid.unravel(psi.index)), axis=1)
    on = psi.gradient > 0
    assert np.all((rho[on] > 0.25) & (rho[on] < 0.75))


def test_truncate_tent_outer_half():
    # a = 1/(2r), b = 1/r: the gradient lives on r < |x| < 1.5 r, area 1.25 pi r^2
    r = 0.25
    u = tent2d(TentSpec(r, 16))
    psi = truncate(u, 1 / (2 * r), 1 / r)
    assert _grad_integral(psi) == pytest.approx(1.25 * math.pi, rel=0.03)


def test_truncate_rejects():
    with pytest.raises(ValidationError):
        truncate(radial_bump(2, 1.0, 32), 0.5, 0.5)


@given(st.floats(0, 0.9), st.floats(0.05, 1.5))
def test_truncate_bounds(a, width):
    f = radial_bump(2, 1.0, 24)
    b = a + width
    psi = truncate(f, a, b)
    assert psi.max() == pytest.approx(max(0.0, min(b, f.max()) - a), abs=1e-12)
    assert np.all(psi.values_on(f.index) <= f.values + 1e-15)


# ---------------------------------------------------------------------------
# Cantor


def test_cantor_level_one():
    spec = CantorSpec(1)
    assert spec.side == pytest.approx(0.25)
    assert len(cantor_corners(spec)) == 4
    assert len(cantor_set(spec)) == 4 * spec.cells_per_side**2


def test_cantor_level_three():
    spec = CantorSpec(3)
    assert spec.side == pytest.approx(4.0**-3 / 3)
    assert len(cantor_corners(spec)) == 64
    assert 4**3 * default_side(3) == pytest.approx(1 / 3)


def test_cantor_phi_is_one_exactly_on_squares():
    spec = CantorSpec(1)
    phi = cantor_capacitary(spec)
    ones = phi.index[phi.values >= 1.0]
    assert np.array_equal(np.sort(ones), cantor_set(spec).index)


def test_cantor_gradient_closed_form_and_decay():
    g = {k: _grad_integral(cantor_capacitary(CantorSpec(k, cells_per_side=2))) for k in (1, 2, 3, 4)}
    for k in g:
        assert g[k] == pytest.approx(CantorSpec(k).gradient_integral(), rel=1e-9)
    assert g[2] / g[4] >= 1.5


def test_cantor_collar_overlap_rejected():
    with pytest.raises(ValidationError, match="collar"):
        CantorSpec(2, collar_fraction=5.0)
    with pytest.raises(ValidationError):
        CantorSpec(2, sides=(0.25, 0.2))


@pytest.mark.slow
def test_cantor_content_positive_at_level_three():
    spec = CantorSpec(3, cells_per_side=2)
    opts = ContentOptions(exact="never", lp_max_cells=4500, lp_anchor=spec.side)
    assert content_bracket(cantor_set(spec), 0.8, opts, sides="lower").lower > 0.2


def test_cantor_phi_integral_dominates_set_content():
    spec = CantorSpec(1, cells_per_side=2)
    opts = ContentOptions(exact="never", lp_max_cells=4500, lp_anchor=spec.side)
    cb = choquet_integral(cantor_capacitary(spec), 0.8, options=opts, sides="lower")
    assert cb.lower >= content_bracket(cantor_set(spec), 0.8, opts, sides="lower").lower * (1 - 1e-12)


# ---------------------------------------------------------------------------
# staircase


def test_staircase_constant():
    t = np.linspace(0, 0.9, 10)
    part = staircase(t, np.ones(10), 0.1, 1.0)
    assert part.points == (0.0, 0.9)
    assert not staircase_violations(part, t, np.ones(10))


def test_staircase_isolates_jump():
    eps = 0.01
    t = np.linspace(0.05, 0.95, 19)
    F = np.where(t <= 0.5, 0.0, 3 * eps)
    part = staircase(t, F, eps, 1.0)
    assert any(abs(x - 0.5) < 1e-12 for x in part.points)
    assert not staircase_violations(part, t, F)


def test_staircase_rejects_bad_input():
    with pytest.raises(ValidationError):
        staircase([0.1, 0.2], [1.0, 0.5], 0.1, 1.0)
    with pytest.raises(ValidationError):
        staircase([0.1, 0.2], [0.0, 0.5], 0.0, 1.0)


@given(st.integers(0, 2**32 - 1), st.sampled_from([0.001, 0.01, 0.1]))
def test_staircase_property(seed, eps):
    t, F = random_monotone_samples(np.random.default_rng(seed), 150)
    part = staircase(t, F, eps, 1.0)
    assert not staircase_violations(part, t, F)
    assert all(b > a for a, b in zip(part.points, part.points[1:]))
    assert part.points[-1] < 1.0
