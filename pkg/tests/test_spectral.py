import numpy as np
import pytest

from strainflow import initial_data, spectral, sym3
from strainflow.exceptions import ConstraintViolationError, InvalidInputError
from strainflow.spectral import Grid

TWO_PI_CUBED = (2.0 * np.pi) ** 3


def shear_hat(grid, amplitude=1.0):
    return initial_data.shear(grid, amplitude)


class TestGridAndFFT:
    def test_grid_validation(self):
        with pytest.raises(InvalidInputError):
            Grid(7)
        with pytest.raises(InvalidInputError):
            Grid(6)

    def test_wavenumber_layout(self, grid8):
        kx = grid8.kx.ravel()
        assert list(kx) == [0, 1, 2, 3, 4, -3, -2, -1]
        kdx = grid8.kdx.ravel()
        assert kdx[4] == 0.0 and kdx[3] == 3.0  # Nyquist slot zeroed

    def test_single_mode_placement(self, grid16):
        u_hat = shear_hat(grid16)
        n = grid16.n
        # sin(y) e1 lives at xi = (0, +-1, 0) with coefficients -+ i n^3/2
        assert u_hat[0, 0, 1, 0] == pytest.approx(-0.5j * n ** 3, abs=1e-9)
        assert u_hat[0, 0, n - 1, 0] == pytest.approx(0.5j * n ** 3, abs=1e-9)
        masked = u_hat.copy()
        masked[0, 0, 1, 0] = masked[0, 0, n - 1, 0] = 0.0
        assert np.max(np.abs(masked)) < 1e-9

    def test_roundtrip_white_noise(self, grid16):
        rng = np.random.default_rng(0)
        field = rng.standard_normal((3,) + (grid16.n,) * 3)
        back = grid16.ifft(grid16.fft(field))
        assert np.max(np.abs(back - field)) / np.max(np.abs(field)) < 1e-13

    def test_zero_field(self, grid8):
        assert np.all(grid8.fft(np.zeros((grid8.n,) * 3)) == 0.0)

    def test_size_mismatch_rejected(self, grid8):
        with pytest.raises(InvalidInputError):
            grid8.fft(np.zeros((4, 4, 4)))
        with pytest.raises(InvalidInputError):
            grid8.ifft(np.zeros((3, 16, 16, 16), dtype=complex))

    def test_hermitian_helpers(self, grid16):
        rng = np.random.default_rng(1)
        field = rng.standard_normal((3,) + (grid16.n,) * 3)
        coeffs = grid16.fft(field)
        assert spectral.hermitian_residual(coeffs) < 1e-13
        sym = spectral.hermitian_symmetrize(coeffs)
        assert np.max(np.abs(sym - coeffs)) < 1e-13 * np.max(np.abs(coeffs))
        # ifft via the half-spectrum agrees with the full inverse
        assert np.max(np.abs(spectral.ifft_hermitian(grid16, coeffs) - field)) < 1e-13

    def test_expand_half_roundtrip(self, grid16):
        rng = np.random.default_rng(2)
        field = rng.standard_normal((grid16.n,) * 3)
        half = spectral.rfft_half(grid16, field)
        full = spectral.expand_half(grid16, half)
        assert np.max(np.abs(full - grid16.fft(field))) < 1e-9


class TestSymGradient:
    def test_shear_strain(self, grid16):
        s_phys = spectral.strain_to_physical(
            grid16, spectral.sym_gradient(grid16, shear_hat(grid16)))
        _, y, _ = grid16.coords()
        full = np.broadcast_to(0.5 * np.cos(y), (grid16.n,) * 3)
        assert np.max(np.abs(s_phys[2] - full)) < 1e-13
        for idx in (0, 1, 3, 4):
            assert np.max(np.abs(s_phys[idx])) < 1e-13

    def test_taylor_green_strain(self, grid16):
        u_hat = initial_data.taylor_green(grid16)
        s_phys = spectral.strain_to_physical(grid16, spectral.sym_gradient(grid16, u_hat))
        x, y, z = grid16.coords()
        shape = (grid16.n,) * 3
        expected = {
            0: np.cos(x) * np.cos(y) * np.cos(z),
            1: -np.cos(x) * np.cos(y) * np.cos(z),
            2: np.zeros(shape),
            3: -0.5 * np.sin(x) * np.cos(y) * np.sin(z),
            4: 0.5 * np.cos(x) * np.sin(y) * np.sin(z),
        }
        for idx, ref in expected.items():
            assert np.max(np.abs(s_phys[idx] - np.broadcast_to(ref, shape))) < 1e-13

    def test_constant_field_zero_strain(self, grid8):
        u_hat = np.zeros((3,) + (grid8.n,) * 3, dtype=complex)
        u_hat[0, 0, 0, 0] = grid8.n ** 3  # constant velocity (1, 0, 0)
        s_hat = spectral.sym_gradient(grid8, u_hat)
        assert np.max(np.abs(s_hat)) == 0.0

    def test_rejects_divergent_field(self, grid8):
        v_hat = grid8.fft(np.random.default_rng(3).standard_normal((3,) + (grid8.n,) * 3))
        with pytest.raises(InvalidInputError):
            spectral.sym_gradient(grid8, v_hat)


class TestStrainConstraint:
    def test_gradients_satisfy_it(self, grid16):
        u_hat = initial_data.random_div_free(grid16, seed=4)
        s_hat = spectral.sym_gradient(grid16, u_hat)
        assert spectral.consistency_residual(grid16, s_hat) < 1e-13

    def test_single_offdiagonal_mode_satisfies_it(self, grid8):
        # S supported at xi = (0,1,0), only the (1,2) entry: then
        # (xi x xi) S + S (xi x xi) reproduces S itself and the residual
        # vanishes identically.
        s_hat = np.zeros((5,) + (grid8.n,) * 3, dtype=complex)
        s_hat[2, 0, 1, 0] = 1.0
        s_hat[2, 0, grid8.n - 1, 0] = 1.0
        assert spectral.consistency_residual(grid8, s_hat) < 1e-15

    def test_hessian_type_mode_fails_it(self, grid8):
        # trace-corrected xi (x) xi at xi = (0,1,0): diag(-1/3, 2/3, -1/3)
        s_hat = np.zeros((5,) + (grid8.n,) * 3, dtype=complex)
        s_hat[0, 0, 1, 0] = -1.0 / 3.0
        s_hat[1, 0, 1, 0] = 2.0 / 3.0
        assert spectral.consistency_residual(grid8, s_hat) > 0.1

    def test_velocity_reconstruction_shear(self, grid16):
        u_hat = shear_hat(grid16)
        back = spectral.velocity_from_strain(
            grid16, spectral.sym_gradient(grid16, u_hat))
        assert np.max(np.abs(back - u_hat)) < 1e-13 * np.max(np.abs(u_hat))

    def test_velocity_reconstruction_random(self, grid16):
        u_hat = initial_data.random_div_free(grid16, seed=5)
        back = spectral.velocity_from_strain(
            grid16, spectral.sym_gradient(grid16, u_hat))
        err_sq = spectral.sobolev_norm_sq(grid16, back - u_hat)
        assert np.sqrt(err_sq / spectral.sobolev_norm_sq(grid16, u_hat)) < 1e-12

    def test_zero_strain_zero_velocity(self, grid8):
        s_hat = np.zeros((5,) + (grid8.n,) * 3, dtype=complex)
        assert np.all(spectral.velocity_from_strain(grid8, s_hat) == 0.0)

    def test_reconstruction_rejects_non_strain(self, grid8):
        s_hat = np.zeros((5,) + (grid8.n,) * 3, dtype=complex)
        s_hat[0, 0, 1, 0] = -1.0 / 3.0
        s_hat[1, 0, 1, 0] = 2.0 / 3.0
        with pytest.raises(ConstraintViolationError):
            spectral.velocity_from_strain(grid8, s_hat)


class TestHelmholtz:
    def test_divergence_free_passthrough(self, grid16):
        u_hat = initial_data.random_div_free(grid16, seed=6)
        df, grad = spectral.helmholtz_project(grid16, u_hat)
        assert np.max(np.abs(grad)) < 1e-12 * np.max(np.abs(u_hat))
        assert np.max(np.abs(df - u_hat)) < 1e-12 * np.max(np.abs(u_hat))

    def test_pure_gradient(self, grid16):
        x, _, _ = grid16.coords()
        f_hat = grid16.fft(np.broadcast_to(np.sin(x), (grid16.n,) * 3).copy())
        v_hat = np.stack([1j * grid16.kdx * f_hat, 1j * grid16.kdy * f_hat,
                          1j * grid16.kdz * f_hat])
        df, grad = spectral.helmholtz_project(grid16, v_hat)
        assert np.max(np.abs(df)) < 1e-13 * np.max(np.abs(v_hat))

    def test_pythagoras(self, grid16):
        rng = np.random.default_rng(7)
        v_hat = grid16.fft(rng.standard_normal((3,) + (grid16.n,) * 3))
        df, grad = spectral.helmholtz_project(grid16, v_hat)
        total = spectral.sobolev_norm_sq(grid16, v_hat)
        split = spectral.sobolev_norm_sq(grid16, df) + spectral.sobolev_norm_sq(grid16, grad)
        assert abs(total - split) < 1e-12 * total
        assert np.max(np.abs(df + grad - v_hat)) == pytest.approx(0.0, abs=1e-16 * np.max(np.abs(v_hat)))


class TestVorticity:
    def test_shear_curl(self, grid16):
        w = grid16.ifft(spectral.vorticity(grid16, shear_hat(grid16)))
        _, y, _ = grid16.coords()
        assert np.max(np.abs(w[2] + np.broadcast_to(np.cos(y), (grid16.n,) * 3))) < 1e-13
        assert np.max(np.abs(w[0])) < 1e-13 and np.max(np.abs(w[1])) < 1e-13

    def test_taylor_green_curl(self, grid16):
        w = grid16.ifft(spectral.vorticity(grid16, initial_data.taylor_green(grid16)))
        x, y, z = grid16.coords()
        shape = (grid16.n,) * 3
        expected = (-np.cos(x) * np.sin(y) * np.sin(z),
                    -np.sin(x) * np.cos(y) * np.sin(z),
                    2.0 * np.sin(x) * np.sin(y) * np.cos(z))
        for got, ref in zip(w, expected):
            assert np.max(np.abs(got - np.broadcast_to(ref, shape))) < 1e-13

    def test_antisym_matrix_annihilates_vorticity(self, grid8):
        u_hat = initial_data.random_div_free(grid8, seed=8)
        w = grid8.ifft(spectral.vorticity(grid8, u_hat))
        a = spectral.antisym_matrix(w)
        product = np.einsum("ij...,j...->i...", a, w)
        assert np.max(np.abs(product)) < 1e-13 * max(np.max(np.abs(w)) ** 2, 1e-300)


class TestSobolevNorms:
    def test_single_mode(self, grid16):
        _, y, _ = grid16.coords()
        f_hat = grid16.fft(np.broadcast_to(np.sin(y), (grid16.n,) * 3).copy())
        assert spectral.sobolev_norm_sq(grid16, f_hat, 0.0) == pytest.approx(
            TWO_PI_CUBED / 2.0, rel=1e-13)
        assert spectral.sobolev_norm_sq(grid16, f_hat, 1.0) == pytest.approx(
            TWO_PI_CUBED / 2.0, rel=1e-13)

    def test_zero_field(self, grid8):
        z = np.zeros((grid8.n,) * 3, dtype=complex)
        assert spectral.sobolev_norm_sq(grid8, z, 1.0) == 0.0

    def test_gradient_cross_check(self, grid16):
        # |f|_{H1}^2 equals the L2 norm squared of the spectral gradient
        rng = np.random.default_rng(9)
        f = rng.standard_normal((grid16.n,) * 3)
        f_hat = grid16.fft(f - f.mean())
        grad_hat = np.stack([1j * grid16.kdx * f_hat, 1j * grid16.kdy * f_hat,
                             1j * grid16.kdz * f_hat])
        h1 = spectral.sobolev_norm_sq(grid16, f_hat * grid16.dealias_mask, 1.0)
        l2 = spectral.sobolev_norm_sq(grid16, grad_hat * grid16.dealias_mask, 0.0)
        assert h1 == pytest.approx(l2, rel=1e-12)

    def test_alpha_validation(self, grid8):
        f_hat = np.ones((grid8.n,) * 3, dtype=complex)
        with pytest.raises(InvalidInputError):
            spectral.sobolev_norm_sq(grid8, f_hat, 2.0)
        with pytest.raises(InvalidInputError):
            spectral.sobolev_norm_sq(grid8, f_hat, -1.0)  # nonzero mean


class TestIsometryAudit:
    def test_shear_values(self, grid16):
        report = spectral.isometry_audit(grid16, shear_hat(grid16), 0.0)
        for value in report.values():
            assert value == pytest.approx(TWO_PI_CUBED / 4.0, rel=1e-13)

    def test_random_fields(self, grid16):
        for seed in range(5):
            u_hat = initial_data.random_div_free(grid16, seed=20 + seed)
            for alpha in (0.0, 1.0):
                report = spectral.isometry_audit(grid16, u_hat, alpha)
                assert report.max_rel_deviation < 1e-12

    def test_zero_field(self, grid8):
        report = spectral.isometry_audit(
            grid8, np.zeros((3,) + (grid8.n,) * 3, dtype=complex), 0.0)
        assert report.values() == (0.0, 0.0, 0.0, 0.0)
        assert report.max_rel_deviation == 0.0

    def test_alpha_restricted(self, grid8):
        u_hat = initial_data.random_div_free(grid8, seed=30)
        with pytest.raises(InvalidInputError):
            spectral.isometry_audit(grid8, u_hat, 0.5)


class TestDirectionalStrain:
    def test_shear_null_direction(self, grid16):
        sv = spectral.directional_strain(grid16, shear_hat(grid16),
                                         np.array([0.0, 0.0, 1.0]))
        assert np.max(np.abs(sv)) < 1e-13

    def test_shear_streamwise_direction(self, grid16):
        sv = spectral.directional_strain(grid16, shear_hat(grid16),
                                         np.array([1.0, 0.0, 0.0]))
        _, y, _ = grid16.coords()
        expected = np.broadcast_to(0.5 * np.cos(y), (grid16.n,) * 3)
        assert np.max(np.abs(sv[1] - expected)) < 1e-13
        assert np.max(np.abs(sv[0])) < 1e-13 and np.max(np.abs(sv[2])) < 1e-13

    def test_matches_derivative_form(self, grid16):
        u_hat = initial_data.random_div_free(grid16, seed=31)
        rng = np.random.default_rng(32)
        for _ in range(4):
            v = rng.standard_normal(3)
            v /= np.linalg.norm(v)
            via_matrix = spectral.directional_strain(grid16, u_hat, v)
            via_derivs = spectral.directional_strain_via_derivatives(grid16, u_hat, v)
            scale = np.max(np.abs(via_matrix))
            assert np.max(np.abs(via_matrix - via_derivs)) < 1e-12 * scale

    def test_dominates_middle_eigenvalue(self, grid16):
        u_hat = initial_data.random_div_free(grid16, seed=33)
        s = spectral.strain_field(grid16, spectral.sym_gradient(grid16, u_hat))
        eig = sym3.eigenvalues(s)
        rng = np.random.default_rng(34)
        for _ in range(5):
            v = rng.standard_normal(3)
            v /= np.linalg.norm(v)
            sv = spectral.directional_strain(grid16, u_hat, v)
            mag = np.sqrt(sv[0] ** 2 + sv[1] ** 2 + sv[2] ** 2)
            assert np.all(mag >= np.abs(eig.lambda2) - 1e-12 * s.norm())

    def test_non_unit_rejected(self, grid8):
        u_hat = initial_data.random_div_free(grid8, seed=35)
        with pytest.raises(InvalidInputError):
            spectral.directional_strain(grid8, u_hat, np.array([1.0, 1.0, 0.0]))


class TestOrthogonalityRelations:
    def test_strain_orthogonal_to_scaled_identity(self, grid16):
        # tr(S) g integrates to zero structurally: the 33 entry is the
        # negated sum of the stored diagonals
        u_hat = initial_data.random_div_free(grid16, seed=36)
        s = spectral.strain_field(grid16, spectral.sym_gradient(grid16, u_hat))
        rng = np.random.default_rng(37)
        g = rng.standard_normal((grid16.n,) * 3)
        trace = s.m11 + s.m22 + s.m33
        assert grid16.integrate(trace * g) == 0.0

    def test_strain_orthogonal_to_hessians(self, grid16):
        u_hat = initial_data.random_div_free(grid16, seed=38)
        s_hat = spectral.sym_gradient(grid16, u_hat)
        s_phys = spectral.strain_to_physical(grid16, s_hat)
        rng = np.random.default_rng(39)
        f = rng.standard_normal((grid16.n,) * 3)
        f_hat = grid16.fft(f) * grid16.dealias_mask
        k = (grid16.kdx, grid16.kdy, grid16.kdz)
        hess = [[grid16.ifft(-k[i] * k[j] * f_hat) for j in range(3)] for i in range(3)]
        s33 = -s_phys[0] - s_phys[1]
        inner = grid16.integrate(
            s_phys[0] * hess[0][0] + s_phys[1] * hess[1][1] + s33 * hess[2][2]
            + 2.0 * (s_phys[2] * hess[0][1] + s_phys[3] * hess[0][2]
                     + s_phys[4] * hess[1][2]))
        scale = np.sqrt(spectral.strain_norm_sq(grid16, s_hat)
                        * spectral.sobolev_norm_sq(grid16, f_hat, 1.0)) + 1e-300
        assert abs(inner) / scale < 1e-12
