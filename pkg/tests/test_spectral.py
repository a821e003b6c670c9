import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from platesim.spectral import (
    B_multiplier,
    BoxDomain,
    GridField,
    K_multiplier,
    SpectralField,
    apply_B,
    apply_K,
    apply_power_of_A,
    build_basis,
    gradient,
    inner_product,
    to_grid,
    to_spectral,
)


def test_eigenvalue_closed_forms():
    assert build_basis(BoxDomain((1.0,)), 4).eigenvalues[0] == pytest.approx(np.pi**2, rel=1e-15)
    sq = build_basis(BoxDomain((1.0, 1.0)), (3, 3))
    assert sq.eigenvalues[sq.mode_index((1, 1))] == pytest.approx(2 * np.pi**2, rel=1e-15)
    two = build_basis(BoxDomain((2.0,)), 5)
    assert two.eigenvalues[2] == pytest.approx((3 * np.pi / 2) ** 2, rel=1e-15)


def test_lexicographic_layout():
    b = build_basis(BoxDomain((1.0, 2.0)), (3, 2))
    assert b.mode_index((1, 1)) == 0
    assert b.mode_index((1, 2)) == 1
    assert b.mode_index((2, 1)) == 2
    assert b.eigenvalues[b.mode_index((2, 1))] == pytest.approx((2 * np.pi) ** 2 + (np.pi / 2) ** 2)


@pytest.mark.parametrize(
    "lengths,modes",
    [((1.0,), 0), ((1.0,), -2), ((0.0,), 3), ((-1.0, 1.0), (2, 2)), ((1.0, 1.0, 1.0), (2, 2, 2))],
)
def test_invalid_basis_rejected(lengths, modes):
    with pytest.raises(ValueError):
        build_basis(BoxDomain(lengths), modes)


def test_to_grid_examples(unit_interval):
    b = unit_interval
    assert np.all(to_grid(SpectralField.zeros(b)).values == 0)
    # dealias 1 on 16 modes has 16 nodes; x = 1/2 is not a node, so refine to an odd count
    b1 = build_basis(BoxDomain((1.0,)), 1)
    g = to_grid(SpectralField.mode(b1, (1,)))
    assert b1.grid_nodes()[0][0] == pytest.approx(0.5)
    assert g.values[0] == pytest.approx(np.sqrt(2.0), rel=1e-15)


@pytest.mark.parametrize("dealias", [1, 2, 3])
@pytest.mark.parametrize("dims", [(1,), (2,)])
def test_roundtrip(dealias, dims, rng):
    b = build_basis(BoxDomain((1.0,) if dims == (1,) else (1.0, 1.5)), 12 if dims == (1,) else (7, 5))
    f = SpectralField(b, rng.standard_normal(b.size))
    back = to_spectral(to_grid(f, dealias))
    assert np.linalg.norm(back.coeffs - f.coeffs) <= 1e-12 * np.linalg.norm(f.coeffs)


def test_analysis_of_pure_mode(unit_interval):
    b = unit_interval
    vals = b.synthesize(3.0 * b.unit((2,)))
    c = to_spectral(GridField(b, vals)).coeffs
    expected = np.zeros(b.size)
    expected[1] = 3.0
    assert np.allclose(c, expected, atol=1e-14)


def test_truncating_analysis_matches_quadrature_projection(rng):
    fine = build_basis(BoxDomain((1.0,)), 16)
    coarse = build_basis(BoxDomain((1.0,)), 8)
    c = rng.standard_normal(16)
    # coarse analysis grid for dealias 2 has 17 nodes; 16-mode data is not resolved there, so use dealias 3
    grid = coarse.grid_nodes(3)[0]
    vals = fine.evaluate(c, grid)
    projected = coarse.analyze(vals, 3)
    # independent oracle: composite Simpson projection on a very fine mesh
    x = np.linspace(0.0, 1.0, 20001)
    fx = fine.evaluate(c, x)
    from scipy.integrate import simpson

    oracle = np.array([simpson(fx * np.sqrt(2) * np.sin(k * np.pi * x), x=x) for k in range(1, 9)])
    np.testing.assert_allclose(projected, oracle, atol=1e-10)
    np.testing.assert_allclose(projected, c[:8], atol=1e-12)


def test_incompatible_grid_rejected(unit_interval):
    with pytest.raises(ValueError):
        unit_interval.analyze(np.zeros(7))
    with pytest.raises(ValueError):
        GridField(unit_interval, np.zeros(5))


def test_non_finite_rejected(unit_interval):
    c = np.zeros(unit_interval.size)
    c[3] = np.nan
    with pytest.raises(ValueError):
        SpectralField(unit_interval, c)
    with pytest.raises(ValueError):
        SpectralField(unit_interval, np.zeros(3))


def test_powers_of_A(unit_interval, rng):
    b = unit_interval
    f = SpectralField(b, rng.standard_normal(b.size))
    assert np.array_equal(apply_power_of_A(f, 0).coeffs, f.coeffs)
    phi = SpectralField.mode(b, (1,))
    np.testing.assert_allclose(apply_power_of_A(phi, 1).coeffs, np.pi**2 * phi.coeffs, rtol=1e-15)
    for p in (0.5, 1.0, 1.5, -0.5, -1.0, 2.0):
        back = apply_power_of_A(apply_power_of_A(f, p), -p)
        assert np.linalg.norm(back.coeffs - f.coeffs) <= 1e-12 * np.linalg.norm(f.coeffs)


def test_K_and_B_single_mode(unit_interval):
    phi = SpectralField.mode(unit_interval, (1,))
    assert apply_K(phi, 1.0).coeffs[0] == pytest.approx(1 / (1 + np.pi**2), rel=1e-15)
    assert apply_K(phi, 1.0).coeffs[0] == pytest.approx(0.09199, abs=1e-5)
    assert apply_B(phi, 1.0).coeffs[0] == pytest.approx(np.pi**2 / (1 + np.pi**2), rel=1e-15)
    assert apply_B(phi, 1.0).coeffs[0] == pytest.approx(0.90801, abs=1e-5)
    zero = SpectralField.zeros(unit_interval)
    assert not np.any(apply_K(zero, 2.0).coeffs) and not np.any(apply_B(zero, 2.0).coeffs)


def test_resolvent_identity(unit_square, rng):
    g = 0.7
    f = SpectralField(unit_square, rng.standard_normal(unit_square.size))
    ainv = apply_power_of_A(f, -1)
    # K (A^{-1} + gamma) = A^{-1},  B (A^{-1} + gamma) = I,  K = A^{-1} B
    np.testing.assert_allclose(apply_K(ainv + g * f, g).coeffs, ainv.coeffs, rtol=1e-13)
    np.testing.assert_allclose(apply_B(ainv + g * f, g).coeffs, f.coeffs, rtol=1e-13)
    np.testing.assert_allclose(apply_K(f, g).coeffs, apply_power_of_A(apply_B(f, g), -1).coeffs, rtol=1e-13)


def test_gamma_must_be_positive(unit_interval):
    f = SpectralField.mode(unit_interval, (1,))
    for g in (0.0, -1.0):
        with pytest.raises(ValueError):
            apply_K(f, g)
        with pytest.raises(ValueError):
            apply_B(f, g)


@settings(max_examples=60, deadline=None)
@given(lam=st.floats(1e-3, 1e8), gamma=st.floats(1e-4, 1e4))
def test_multiplier_ranges(lam, gamma):
    k = K_multiplier(lam, gamma)
    b = B_multiplier(lam, gamma)
    assert 0 < k < 1
    assert 0 < b < 1 / gamma


def test_gradient_examples(unit_interval, rng):
    b = unit_interval
    assert all(not np.any(g.values) for g in gradient(SpectralField.zeros(b)))
    phi = b.unit((1,))
    assert b.evaluate(phi, [0.0], deriv_axis=0)[0] == pytest.approx(np.sqrt(2) * np.pi, rel=1e-15)
    # grid derivative agrees with the direct cosine sum
    f = SpectralField(b, rng.standard_normal(b.size))
    (gx,) = gradient(f, 2)
    direct = b.evaluate(f.coeffs, b.grid_nodes(2)[0], deriv_axis=0)
    np.testing.assert_allclose(gx.values, direct, atol=1e-11 * np.abs(direct).max())


def _trapezoid_grid(basis, n):
    """Closed nodes and trapezoid weights, exact for trigonometric products of degree < 2n."""
    axes, weights = [], []
    for length in basis.domain.lengths:
        x = np.linspace(0.0, length, n + 1)
        w = np.full(n + 1, length / n)
        w[[0, -1]] *= 0.5
        axes.append(x)
        weights.append(w)
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    wts = np.prod(np.meshgrid(*weights, indexing="ij"), axis=0).ravel()
    return pts, wts


@pytest.mark.parametrize("dims", [1, 2])
def test_gradient_parseval(dims, rng):
    b = build_basis(BoxDomain((1.0,) if dims == 1 else (1.0, 0.8)), 10 if dims == 1 else (6, 7))
    f = SpectralField(b, rng.standard_normal(b.size))
    pts, wts = _trapezoid_grid(b, 64)
    lhs = sum(np.sum(wts * b.evaluate(f.coeffs, pts, deriv_axis=ax) ** 2) for ax in range(dims))
    rhs = np.sum(b.eigenvalues * f.coeffs**2)
    assert lhs == pytest.approx(rhs, rel=1e-10)
    # the collocated gradient carries the same values at its interior nodes
    mesh = np.meshgrid(*b.grid_nodes(2), indexing="ij")
    inner = np.stack([m.ravel() for m in mesh], axis=1)
    for ax, g in enumerate(gradient(f, 2)):
        np.testing.assert_allclose(g.values.ravel(), b.evaluate(f.coeffs, inner, deriv_axis=ax), atol=1e-11)


def test_inner_product(unit_square, rng):
    b = unit_square
    p1, p2 = SpectralField.mode(b, (1, 1)), SpectralField.mode(b, (2, 1))
    assert inner_product(p1, p2) == 0.0
    assert inner_product(p1, p1) == pytest.approx(1.0)
    f = SpectralField(b, rng.standard_normal(b.size))
    g = SpectralField(b, rng.standard_normal(b.size))
    quad = np.sum(to_grid(f, 2).values * to_grid(g, 2).values) * b.grid_weight(2)
    assert inner_product(f, g) == pytest.approx(quad, rel=1e-10)
    other = build_basis(BoxDomain((1.0, 1.0)), (8, 5))
    with pytest.raises(ValueError):
        inner_product(f, SpectralField.zeros(other))


def test_operators_commute(unit_square, rng):
    f = SpectralField(unit_square, rng.standard_normal(unit_square.size))
    a = apply_K(apply_B(apply_power_of_A(f, 1.5), 0.3), 0.3)
    b = apply_power_of_A(apply_K(apply_B(f, 0.3), 0.3), 1.5)
    c = apply_B(apply_power_of_A(apply_K(f, 0.3), 1.5), 0.3)
    np.testing.assert_allclose(a.coeffs, b.coeffs, rtol=1e-14)
    np.testing.assert_allclose(a.coeffs, c.coeffs, rtol=1e-14)


def test_positive_powers_preserve_nonzero(unit_interval):
    f = SpectralField.mode(unit_interval, (16,), 1e-300)
    assert np.any(apply_power_of_A(f, 2.0).coeffs)


def test_boundary_values_vanish(unit_square, rng):
    f = rng.standard_normal(unit_square.size)
    edge = np.array([[0.0, 0.3], [1.0, 0.7], [0.2, 0.0], [0.9, 1.0]])
    assert np.abs(unit_square.evaluate(f, edge)).max() < 1e-13


def test_synthesis_is_deterministic(unit_square, rng):
    c = rng.standard_normal(unit_square.size)
    a = unit_square.synthesize(c, 2)
    b = unit_square.synthesize(c.copy(), 2)
    assert a.tobytes() == b.tobytes()
