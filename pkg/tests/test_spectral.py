import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mhdlab.spectral import (
    PhysicalGrid,
    SpectralField,
    directional_derivative,
    divergence_residual,
    from_modes,
    grad_linf_bound,
    hermitian_residual,
    inner_product,
    lambda_pow,
    leray_project,
    make_lattice,
    physical_gradient,
    random_field,
    sobolev_norm,
    symmetrize,
    transform_to_physical,
    transform_to_spectral,
)

LAT16 = make_lattice(2, 16)
LAT32 = make_lattice(2, 32)


def cos_field(lat, amp=2.0):
    x = lat.grid_points()
    samples = np.zeros((lat.n,) + lat.grid_shape)
    samples[0] = amp * np.cos(x[0])
    return transform_to_spectral(PhysicalGrid(lat, samples))


seeds = st.integers(min_value=0, max_value=2**31 - 1)


class TestLattice:
    def test_sizes_2d_64(self):
        lat = make_lattice(2, 64)
        assert lat.k_max == 31
        assert lat.dealias_cutoff == 21
        k = lat.wavevectors
        kept = np.all(np.abs(k) <= 21, axis=0) & lat.retained
        assert np.array_equal(lat.dealias_mask, kept)

    def test_3d_16(self):
        assert make_lattice(3, 16).k_max == 7

    @pytest.mark.parametrize("N", [15, 14, 17, 0])
    def test_bad_grid(self, N):
        with pytest.raises(ValueError):
            make_lattice(2, N)

    def test_bad_dimension(self):
        with pytest.raises(ValueError):
            make_lattice(4, 16)

    def test_retained_components_bounded(self):
        lat = make_lattice(3, 16)
        assert np.all(np.abs(lat.wavevectors[:, lat.retained]) <= lat.k_max)


class TestTransforms:
    def test_cosine_coefficients(self):
        f = cos_field(LAT16)
        c = f.coeffs[0]
        assert f.coeff((1, 0))[0] == pytest.approx(1.0, abs=1e-14)
        assert f.coeff((-1, 0))[0] == pytest.approx(1.0, abs=1e-14)
        mask = np.ones(c.shape, bool)
        for k in ((1, 0), (-1, 0)):
            idx, _ = LAT16.index_of(k)
            mask[idx] = False
        assert np.max(np.abs(c[mask])) < 1e-15
        assert np.max(np.abs(f.coeffs[1])) < 1e-15

    def test_zero_grid(self):
        g = PhysicalGrid(LAT16, np.zeros((2,) + LAT16.grid_shape))
        assert not np.any(transform_to_spectral(g).coeffs)

    @settings(max_examples=25, deadline=None)
    @given(seeds)
    def test_round_trip(self, seed):
        f = random_field(LAT32, seed, 2.0, 1.0)
        g = transform_to_spectral(transform_to_physical(f))
        assert np.max(np.abs(g.coeffs - f.coeffs)) <= 1e-12 * np.max(np.abs(f.coeffs))
        assert hermitian_residual(g) <= 1e-14

    @settings(max_examples=25, deadline=None)
    @given(seeds)
    def test_parseval(self, seed):
        f = random_field(LAT32, seed, 1.5, 1.0)
        x = transform_to_physical(f).samples
        quad = np.mean(np.sum(x**2, axis=0))
        assert sobolev_norm(f, 0) ** 2 == pytest.approx(quad, rel=1e-10)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            PhysicalGrid(LAT16, np.zeros((2, 8, 8)))


class TestLeray:
    def test_gradient_mode_annihilated(self):
        f = from_modes(LAT16, {(2, 3): np.array([2, 3])})
        assert np.max(np.abs(leray_project(f).coeffs)) < 1e-15

    def test_solenoidal_mode_unchanged(self):
        f = from_modes(LAT16, {(2, 3): np.array([3, -2])})
        assert np.array_equal(leray_project(f).coeffs, f.coeffs)

    @settings(max_examples=25, deadline=None)
    @given(seeds)
    def test_projection_properties(self, seed):
        rng = np.random.default_rng(seed)
        g = transform_to_spectral(PhysicalGrid(LAT32, rng.standard_normal((2,) + LAT32.grid_shape)))
        h = transform_to_spectral(PhysicalGrid(LAT32, rng.standard_normal((2,) + LAT32.grid_shape)))
        p = leray_project(g)
        assert divergence_residual(p) <= 1e-12
        pp = leray_project(p)
        assert np.max(np.abs(pp.coeffs - p.coeffs)) <= 1e-14 * np.max(np.abs(p.coeffs))
        assert not np.any(p.mean())
        lhs = inner_product(p, h)
        rhs = inner_product(g, leray_project(h))
        assert abs(lhs - rhs) <= 1e-12 * abs(lhs)
        assert hermitian_residual(p) <= 1e-14


class TestMultipliers:
    def test_lambda_zero_identity(self):
        f = random_field(LAT16, 3, 2.0, 1.0)
        assert np.array_equal(lambda_pow(f, 0).coeffs, f.coeffs)

    def test_lambda_halves_mode(self):
        f = from_modes(LAT16, {(1, 1): np.array([1.0, -1.0])})
        g = lambda_pow(f, -2)
        assert g.coeff((1, 1)) == pytest.approx(0.5 * f.coeff((1, 1)), abs=1e-15)

    def test_lambda_negative_needs_mean_zero(self):
        f = SpectralField.zeros(LAT16)
        f.coeffs[0, 0, 0] = 1.0
        with pytest.raises(ValueError):
            lambda_pow(f, -1)

    @settings(max_examples=25, deadline=None)
    @given(seeds, st.floats(-3, 3), st.floats(-3, 3))
    def test_lambda_composition(self, seed, s1, s2):
        f = random_field(LAT32, seed, 2.0, 1.0)
        g = lambda_pow(lambda_pow(f, s1), s2)
        h = lambda_pow(f, s1 + s2)
        assert np.max(np.abs(g.coeffs - h.coeffs)) <= 1e-12 * max(np.max(np.abs(h.coeffs)), 1e-300)
        inv = lambda_pow(lambda_pow(f, s1), -s1)
        assert np.max(np.abs(inv.coeffs - f.coeffs)) <= 1e-12 * np.max(np.abs(f.coeffs))

    def test_directional_zero_vector(self):
        f = random_field(LAT16, 1, 2.0, 1.0)
        assert not np.any(directional_derivative(f, (0.0, 0.0)).coeffs)

    def test_directional_orthogonal_mode(self):
        f = from_modes(LAT16, {(0, 5): np.array([1.0, 0.0])})
        assert not np.any(directional_derivative(f, (1.0, 0.0)).coeffs)

    def test_directional_symbol(self):
        b = (0.3, -1.7)
        k = (2, 3)
        v = np.array([3.0, -2.0]) * np.exp(0.4j)
        f = from_modes(LAT16, {k: v})
        g = directional_derivative(f, b)
        bk = b[0] * k[0] + b[1] * k[1]
        np.testing.assert_allclose(g.coeff(k), 1j * bk * v, rtol=1e-15)
        # magnitude scaled by |b.k|, phase rotated by a quarter turn
        assert abs(g.coeff(k)[0]) == pytest.approx(abs(bk) * abs(v[0]), rel=1e-15)
        assert np.angle(g.coeff(k)[0] / v[0]) == pytest.approx(np.sign(bk) * np.pi / 2, abs=1e-15)


class TestNorms:
    def test_cosine_h2(self):
        f = cos_field(LAT16)
        assert sobolev_norm(f, 2) ** 2 == pytest.approx(8.0, rel=1e-14)

    def test_zero_field(self):
        z = SpectralField.zeros(LAT16)
        for s in (-1.0, 0.0, 2.5):
            assert sobolev_norm(z, s) == 0.0
            assert sobolev_norm(z, s, homogeneous=True) == 0.0

    def test_l2_agreement(self):
        f = random_field(LAT16, 5, 2.0, 1.0)
        assert sobolev_norm(f, 0) == pytest.approx(sobolev_norm(f, 0, homogeneous=True), rel=1e-15)

    @settings(max_examples=25, deadline=None)
    @given(seeds, st.floats(-2, 4), st.floats(0, 3))
    def test_monotone_in_s(self, seed, s1, ds):
        f = random_field(LAT16, seed, 1.0, 1.0)
        assert sobolev_norm(f, s1) <= sobolev_norm(f, s1 + ds) * (1 + 1e-14)

    def test_homogeneous_weight(self):
        f = from_modes(LAT16, {(3, 4): np.array([4.0, -3.0])})
        # |k| = 5, two stored halves, |v|^2 = 25
        assert sobolev_norm(f, 1, homogeneous=True) ** 2 == pytest.approx(2 * 25 * 25, rel=1e-14)


class TestGradBound:
    def test_cosine_attained(self):
        f = cos_field(LAT16)
        assert grad_linf_bound(f) == pytest.approx(2.0, rel=1e-14)
        grad = physical_gradient(f)
        assert np.max(np.abs(grad)) == pytest.approx(2.0, rel=1e-12)

    def test_zero(self):
        assert grad_linf_bound(SpectralField.zeros(LAT16)) == 0.0

    @settings(max_examples=25, deadline=None)
    @given(seeds)
    def test_bounds_physical_gradient(self, seed):
        f = random_field(LAT32, seed, 1.0, 1.0)
        grad = physical_gradient(f)
        pointwise = np.sqrt(np.sum(grad**2, axis=(0, 1)))
        # Frobenius norm of the Jacobian, which dominates every component
        assert np.max(pointwise) <= grad_linf_bound(f) * (1 + 1e-12)


class TestRandomField:
    def test_zero_amplitude(self):
        assert not np.any(random_field(LAT16, 1, 2.0, 0.0).coeffs)

    def test_negative_amplitude(self):
        with pytest.raises(ValueError):
            random_field(LAT16, 1, 2.0, -1e-3)

    def test_deterministic(self):
        a = random_field(LAT32, 7, 3.0, 1e-3, 2)
        b = random_field(LAT32, 7, 3.0, 1e-3, 2)
        assert a.coeffs.tobytes() == b.coeffs.tobytes()

    def test_normalised_solenoidal(self):
        lat = make_lattice(2, 64)
        f = random_field(lat, 1, 6.0, 1e-3, 6)
        assert sobolev_norm(f, 6) == pytest.approx(1e-3, abs=1e-12)
        assert divergence_residual(f) <= 1e-12
        assert f.is_mean_zero()
        assert hermitian_residual(f) <= 1e-14
        assert not np.any(f.coeffs[:, ~lat.dealias_mask])

    def test_spectrum_shape(self):
        f = random_field(LAT32, 2, 2.5, 1.0)
        mag = np.sqrt(np.sum(np.abs(f.coeffs) ** 2, axis=0))
        keep = LAT32.dealias_mask & LAT32.nonzero
        ratio = mag[keep] * LAT32.kabs[keep] ** 2.5
        np.testing.assert_allclose(ratio, ratio[0], rtol=1e-12)


def test_symmetrize_idempotent():
    rng = np.random.default_rng(0)
    f = SpectralField(LAT16, rng.standard_normal((2,) + LAT16.spectral_shape)
                      + 1j * rng.standard_normal((2,) + LAT16.spectral_shape))
    g = symmetrize(f)
    assert hermitian_residual(g) == 0.0
    assert np.array_equal(symmetrize(g).coeffs, g.coeffs)
