"""Fourier representation of periodic fields on [0, 2pi)^3.

Conventions (fixed once, used everywhere):

* Physical arrays are real, shaped (..., n, n, n), indexed [ix, iy, iz]
  with x_i = 2*pi*i/n.
* Spectral arrays are complex, shaped (..., n, n, n), produced by an
  unscaled forward FFT (numpy's fftn); the inverse divides by n^3.  The
  trigonometric interpolant is  f(x) = sum_xi (fhat(xi)/n^3) exp(i xi.x).
* Wavenumber layout per axis of length n: index k holds the integer
  wavenumber xi = k for k <= n/2 and xi = k - n for k > n/2, i.e.
  [0, 1, ..., n/2 - 1, n/2, -n/2 + 1, ..., -1].  The Nyquist slot
  (index n/2, labelled +n/2) is zeroed in the wavenumbers used by every
  differentiation operator (odd derivatives are ambiguous there); the
  heat factor uses the true |xi|^2.
* Integrals are discrete sums with quadrature weight (2*pi/n)^3, so the
  spectral Plancherel factor is (2*pi)^3 / n^6.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

try:  # scipy's pocketfft is noticeably faster and can use worker threads
    from scipy import fft as _fft_module
    _FFT_WORKERS = os.cpu_count() or 1

    def _fftn(arr):
        return _fft_module.fftn(arr, axes=(-3, -2, -1), workers=_FFT_WORKERS)

    def _ifftn(arr):
        return _fft_module.ifftn(arr, axes=(-3, -2, -1), workers=_FFT_WORKERS)

    def _rfftn(arr):
        return _fft_module.rfftn(arr, axes=(-3, -2, -1), workers=_FFT_WORKERS)

    def _irfftn(arr, n):
        return _fft_module.irfftn(arr, s=(n, n, n), axes=(-3, -2, -1),
                                  workers=_FFT_WORKERS)
except ImportError:  # pragma: no cover - exercised only without scipy
    def _fftn(arr):
        return np.fft.fftn(arr, axes=(-3, -2, -1))

    def _ifftn(arr):
        return np.fft.ifftn(arr, axes=(-3, -2, -1))

    def _rfftn(arr):
        return np.fft.rfftn(arr, axes=(-3, -2, -1))

    def _irfftn(arr, n):
        return np.fft.irfftn(arr, s=(n, n, n), axes=(-3, -2, -1))

from . import sym3
from .exceptions import ConstraintViolationError, InvalidInputError

DIVERGENCE_TOL = 1e-12
CONSISTENCY_TOL = 1e-10


class Grid:
    """Uniform n^3 grid over the 2pi-periodic box with its FFT metadata."""

    def __init__(self, n: int):
        if n % 2 != 0 or n < 8:
            raise InvalidInputError(f"grid size must be an even integer >= 8, got {n}")
        self.n = n
        k1 = np.arange(n)
        k1 = np.where(k1 <= n // 2, k1, k1 - n).astype(float)
        k1_diff = k1.copy()
        k1_diff[n // 2] = 0.0  # Nyquist zeroed for differentiation
        self.kx = k1.reshape(n, 1, 1)
        self.ky = k1.reshape(1, n, 1)
        self.kz = k1.reshape(1, 1, n)
        self.kdx = k1_diff.reshape(n, 1, 1)
        self.kdy = k1_diff.reshape(1, n, 1)
        self.kdz = k1_diff.reshape(1, 1, n)
        self.ksq = self.kx ** 2 + self.ky ** 2 + self.kz ** 2
        self.ksq_diff = self.kdx ** 2 + self.kdy ** 2 + self.kdz ** 2
        self.inv_ksq_diff = np.divide(1.0, self.ksq_diff,
                                      out=np.zeros_like(self.ksq_diff),
                                      where=self.ksq_diff > 0)
        self.dealias_kmax = (n - 1) // 3
        keep = np.abs(k1) <= self.dealias_kmax
        self.dealias_mask = (keep.reshape(n, 1, 1)
                             & keep.reshape(1, n, 1)
                             & keep.reshape(1, 1, n))
        self.volume = (2.0 * np.pi) ** 3
        self.quad_weight = self.volume / n ** 3
        self.spectral_weight = self.volume / float(n) ** 6
        # half-spectrum metadata (kz restricted to [0, n/2]) used by the
        # Hermitian fast paths
        half = n // 2
        self._rev = (n - np.arange(n)) % n  # index of -xi per axis
        self.kdz_half = self.kdz[..., :half + 1]
        self.ksq_diff_half = self.kdx ** 2 + self.kdy ** 2 + self.kdz_half ** 2
        self.inv_ksq_diff_half = np.divide(1.0, self.ksq_diff_half,
                                           out=np.zeros_like(self.ksq_diff_half),
                                           where=self.ksq_diff_half > 0)
        self.dealias_mask_half = self.dealias_mask[..., :half + 1]

    def k_diff(self, axis: int):
        return (self.kdx, self.kdy, self.kdz)[axis]

    def coords(self):
        """Sparse physical coordinate arrays (X, Y, Z) for broadcasting."""
        xs = 2.0 * np.pi * np.arange(self.n) / self.n
        return np.meshgrid(xs, xs, xs, indexing="ij", sparse=True)

    def fft(self, field):
        """Forward FFT over the last three axes (unscaled)."""
        field = np.asarray(field)
        self._check_grid_shape(field)
        return _fftn(field)

    def ifft(self, coeffs):
        """Inverse FFT over the last three axes; returns the real field."""
        coeffs = np.asarray(coeffs)
        self._check_grid_shape(coeffs)
        return _ifftn(coeffs).real

    def integrate(self, field):
        """Quadrature of a physical field over the box."""
        return float(np.sum(field)) * self.quad_weight

    def _check_grid_shape(self, arr):
        if arr.shape[-3:] != (self.n, self.n, self.n):
            raise InvalidInputError(
                f"field shape {arr.shape} does not end in ({self.n},)*3")


def ifft_hermitian(grid: Grid, coeffs):
    """Inverse FFT of Hermitian-symmetric coefficients.

    Uses only the kz in [0, n/2] half of the cube (real-output
    transform), which halves the work; valid exactly when the input
    satisfies the Hermitian invariant, as every real field does.
    """
    coeffs = np.asarray(coeffs)
    grid._check_grid_shape(coeffs)
    return _irfftn(coeffs[..., :grid.n // 2 + 1], grid.n)


def rfft_half(grid: Grid, field):
    """Forward real FFT, kz restricted to [0, n/2]."""
    return _rfftn(np.asarray(field))


def symmetrize_kz0_plane(grid: Grid, half):
    """Make the kz = 0 plane of a half-spectrum exactly self-conjugate.

    rfftn leaves that plane Hermitian only to rounding; one cheap 2-d
    mirror makes the expanded cube exactly symmetric.
    """
    rev = grid._rev
    plane = half[..., :, :, 0]
    mirror = np.conj(plane[..., rev, :][..., :, rev])
    half[..., :, :, 0] = 0.5 * (plane + mirror)
    return half


def expand_half(grid: Grid, half):
    """Expand a kz in [0, n/2] half-spectrum to the full Hermitian cube."""
    n = grid.n
    hn = n // 2
    rev = grid._rev
    out = np.empty(half.shape[:-1] + (n,), dtype=complex)
    out[..., :hn + 1] = half
    tail = half[..., :, :, hn - 1:0:-1]          # kz = n/2-1 ... 1
    out[..., hn + 1:] = np.conj(tail[..., rev, :, :][..., :, rev, :])
    return out


def hermitian_symmetrize(coeffs):
    """Project spectral coefficients onto the Hermitian-symmetric set.

    Guards against floating-point drift breaking realness after nonlinear
    physical-space products.
    """
    axes = (-3, -2, -1)
    mirror = np.roll(np.flip(coeffs, axis=axes), shift=(1, 1, 1), axis=axes)
    return 0.5 * (coeffs + np.conj(mirror))


def hermitian_residual(coeffs):
    """Max deviation from Hermitian symmetry, relative to the peak mode."""
    axes = (-3, -2, -1)
    mirror = np.roll(np.flip(coeffs, axis=axes), shift=(1, 1, 1), axis=axes)
    peak = np.max(np.abs(coeffs))
    if peak == 0.0:
        return 0.0
    return float(np.max(np.abs(coeffs - np.conj(mirror))) / peak)


def zero_nyquist(grid: Grid, coeffs):
    """Zero the Nyquist planes (index n/2 on each axis) in place; returns coeffs."""
    half = grid.n // 2
    coeffs[..., half, :, :] = 0.0
    coeffs[..., :, half, :] = 0.0
    coeffs[..., :, :, half] = 0.0
    return coeffs


def divergence_residual(grid: Grid, u_hat) -> float:
    """max_xi |xi . uhat| normalized by max_xi |xi| |uhat|."""
    div = grid.kdx * u_hat[0] + grid.kdy * u_hat[1] + grid.kdz * u_hat[2]
    speed = np.sqrt(np.abs(u_hat[0]) ** 2 + np.abs(u_hat[1]) ** 2 + np.abs(u_hat[2]) ** 2)
    denom = np.max(np.sqrt(grid.ksq_diff) * speed)
    if denom == 0.0:
        return 0.0
    return float(np.max(np.abs(div)) / denom)


def project_divergence_free(grid: Grid, v_hat):
    """Leray projection: divergence-free part of a spectral vector field."""
    df, _ = helmholtz_project(grid, v_hat)
    return df


def helmholtz_project(grid: Grid, v_hat):
    """Mode-wise Helmholtz split v = u + grad(f).

    Returns (divergence-free part, gradient part); the two are orthogonal
    per mode and sum to the input exactly.  Modes with no resolvable
    gradient content (the mean and pure-Nyquist modes) go wholly to the
    divergence-free part.
    """
    v_hat = np.asarray(v_hat)
    dot = (grid.kdx * v_hat[0] + grid.kdy * v_hat[1] + grid.kdz * v_hat[2]) * grid.inv_ksq_diff
    grad = np.stack([grid.kdx * dot, grid.kdy * dot, grid.kdz * dot])
    return v_hat - grad, grad


def sym_gradient(grid: Grid, u_hat, check: bool = True):
    """Spectral strain tensor of a divergence-free velocity field.

    Returns the five independent components, shaped (5, n, n, n), in the
    order (11, 22, 12, 13, 23); the 33 component is -(11 + 22) and is
    never stored, so the output is trace-free structurally.
    """
    if check:
        resid = divergence_residual(grid, u_hat)
        if resid > DIVERGENCE_TOL:
            raise InvalidInputError(
                f"velocity is not divergence-free (residual {resid:.3e})")
    kx, ky, kz = grid.kdx, grid.kdy, grid.kdz
    u1, u2, u3 = u_hat[0], u_hat[1], u_hat[2]
    return np.stack([
        1j * kx * u1,
        1j * ky * u2,
        0.5j * (kx * u2 + ky * u1),
        0.5j * (kx * u3 + kz * u1),
        0.5j * (ky * u3 + kz * u2),
    ])


def tensor_full(s_hat):
    """Expand five stored components into the full (3, 3, ...) tensor."""
    s11, s22, s12, s13, s23 = s_hat
    s33 = -s11 - s22
    row0 = np.stack([s11, s12, s13])
    row1 = np.stack([s12, s22, s23])
    row2 = np.stack([s13, s23, s33])
    return np.stack([row0, row1, row2])


def consistency_residual(grid: Grid, s_hat) -> float:
    """How far a trace-free symmetric tensor field is from being a strain.

    Evaluates |xi|^2 S - (xi x xi) S - S (xi x xi) mode by mode; the max
    Frobenius norm is normalized by the max of |xi|^2 |S|.  Zero exactly
    on symmetric gradients of divergence-free fields.
    """
    s3 = tensor_full(np.asarray(s_hat))
    k = (grid.kdx, grid.kdy, grid.kdz)
    # t = S xi (= xi^T S by symmetry)
    t = [k[0] * s3[0, j] + k[1] * s3[1, j] + k[2] * s3[2, j] for j in range(3)]
    num_sq = np.zeros_like(grid.ksq_diff)
    s_frob_sq = np.zeros_like(grid.ksq_diff)
    for j in range(3):
        for m in range(3):
            resid = grid.ksq_diff * s3[j, m] - k[j] * t[m] - t[j] * k[m]
            num_sq += np.abs(resid) ** 2
            s_frob_sq += np.abs(s3[j, m]) ** 2
    denom = np.max(grid.ksq_diff * np.sqrt(s_frob_sq))
    if denom == 0.0:
        return 0.0
    return float(np.max(np.sqrt(num_sq)) / denom)


def velocity_from_strain(grid: Grid, s_hat, tol: float = CONSISTENCY_TOL):
    """Reconstruct the unique mean-zero velocity whose strain is s_hat.

    Spectrally, uhat_k = -2i sum_j xi_j Shat_jk / |xi|^2.  The input must
    satisfy the strain constraint (consistency_residual below tol).
    """
    resid = consistency_residual(grid, s_hat)
    if resid > tol:
        raise ConstraintViolationError(
            f"tensor is not in the strain constraint space (residual {resid:.3e})")
    s3 = tensor_full(np.asarray(s_hat))
    k = (grid.kdx, grid.kdy, grid.kdz)
    u_hat = np.stack([
        -2j * (k[0] * s3[0, m] + k[1] * s3[1, m] + k[2] * s3[2, m]) * grid.inv_ksq_diff
        for m in range(3)
    ])
    u_hat[:, 0, 0, 0] = 0.0
    return u_hat


def vorticity(grid: Grid, u_hat):
    """Spectral curl of a velocity field."""
    kx, ky, kz = grid.kdx, grid.kdy, grid.kdz
    u1, u2, u3 = u_hat[0], u_hat[1], u_hat[2]
    return np.stack([
        1j * (ky * u3 - kz * u2),
        1j * (kz * u1 - kx * u3),
        1j * (kx * u2 - ky * u1),
    ])


def antisym_matrix(omega):
    """Antisymmetric gradient part built from the vorticity vector.

    Accepts a single 3-vector or a (3, ...) field; returns (3, 3) + shape.
    Satisfies A @ omega = 0 identically.
    """
    omega = np.asarray(omega, dtype=float)
    w1, w2, w3 = omega[0], omega[1], omega[2]
    zero = np.zeros_like(w1)
    return 0.5 * np.stack([
        np.stack([zero, w3, -w2]),
        np.stack([-w3, zero, w1]),
        np.stack([w2, -w1, zero]),
    ])


def _spectral_weight_pow(grid: Grid, alpha: float):
    if not (-1.5 < alpha <= 1.5):
        raise InvalidInputError(f"Sobolev exponent must lie in (-3/2, 3/2], got {alpha}")
    if alpha == 0.0:
        return np.ones_like(grid.ksq)
    weight = np.zeros_like(grid.ksq)
    nonzero = grid.ksq > 0
    weight[nonzero] = grid.ksq[nonzero] ** alpha
    return weight


def sobolev_norm_sq(grid: Grid, coeffs, alpha: float = 0.0) -> float:
    """Squared homogeneous Sobolev norm of a spectral field.

    Leading axes are treated as independent components (scalar, vector,
    or full tensor).  For alpha < 0 the field must be mean-zero.
    """
    coeffs = np.asarray(coeffs)
    weight = _spectral_weight_pow(grid, alpha)
    if alpha < 0:
        peak = np.max(np.abs(coeffs))
        mean = np.max(np.abs(coeffs[..., 0, 0, 0]))
        if peak > 0 and mean > 1e-12 * peak:
            raise InvalidInputError(
                "negative-order norms require a mean-zero field")
    comp_sq = np.abs(coeffs) ** 2
    if comp_sq.ndim > 3:
        comp_sq = comp_sq.sum(axis=tuple(range(comp_sq.ndim - 3)))
    return float(np.sum(weight * comp_sq)) * grid.spectral_weight


def strain_norm_sq(grid: Grid, s_hat, alpha: float = 0.0) -> float:
    """Squared Sobolev norm of a 5-component strain field (full Frobenius
    weight: the stored off-diagonals count twice, the 33 entry is
    reconstructed)."""
    s11, s22, s12, s13, s23 = np.asarray(s_hat)
    frob_sq = (np.abs(s11) ** 2 + np.abs(s22) ** 2 + np.abs(s11 + s22) ** 2
               + 2.0 * (np.abs(s12) ** 2 + np.abs(s13) ** 2 + np.abs(s23) ** 2))
    weight = _spectral_weight_pow(grid, alpha)
    return float(np.sum(weight * frob_sq)) * grid.spectral_weight


@dataclass(frozen=True)
class IsometryReport:
    """The four gradient-energy functionals that coincide for
    divergence-free fields: |S|^2, |A|^2, |omega|^2/2, |grad u|^2/2
    in the same Sobolev order."""

    strain_sq: float
    antisym_sq: float
    half_vorticity_sq: float
    half_gradient_sq: float

    def values(self):
        return (self.strain_sq, self.antisym_sq,
                self.half_vorticity_sq, self.half_gradient_sq)

    @property
    def max_rel_deviation(self) -> float:
        vals = self.values()
        top = max(abs(v) for v in vals)
        if top == 0.0:
            return 0.0
        return (max(vals) - min(vals)) / top


def isometry_audit(grid: Grid, u_hat, alpha: float) -> IsometryReport:
    """Audit the strain/antisymmetric/vorticity/gradient norm identities.

    The four quantities are computed along genuinely different paths
    (stored 5-component strain, explicit 9-entry antisymmetric part,
    curl, full gradient) and agree to rounding for any mean-zero
    divergence-free field.  Supported orders: alpha in {0, 1}.
    """
    if alpha not in (0, 1, 0.0, 1.0):
        raise InvalidInputError(f"audit supports alpha in {{0, 1}}, got {alpha}")
    u_hat = np.asarray(u_hat)
    resid = divergence_residual(grid, u_hat)
    if resid > DIVERGENCE_TOL:
        raise InvalidInputError(f"velocity is not divergence-free (residual {resid:.3e})")
    peak = np.max(np.abs(u_hat))
    if peak > 0 and np.max(np.abs(u_hat[:, 0, 0, 0])) > 1e-12 * peak:
        raise InvalidInputError("velocity must be mean-zero for the audit")

    s_sq = strain_norm_sq(grid, sym_gradient(grid, u_hat, check=False), alpha)

    k = (grid.kdx, grid.kdy, grid.kdz)
    antisym = np.stack([
        np.stack([0.5j * (k[j] * u_hat[m] - k[m] * u_hat[j]) for m in range(3)])
        for j in range(3)
    ])
    a_sq = sobolev_norm_sq(grid, antisym, alpha)

    w_sq = sobolev_norm_sq(grid, vorticity(grid, u_hat), alpha)

    grad = np.stack([np.stack([1j * k[j] * u_hat[m] for m in range(3)])
                     for j in range(3)])
    g_sq = sobolev_norm_sq(grid, grad, alpha)

    return IsometryReport(s_sq, a_sq, 0.5 * w_sq, 0.5 * g_sq)


def strain_to_physical(grid: Grid, s_hat):
    """Physical-space strain components, shaped (5, n, n, n)."""
    return grid.ifft(np.asarray(s_hat))


def strain_field(grid: Grid, s_hat) -> sym3.TraceFreeSym3:
    """Pointwise matrix view of a spectral strain field."""
    return sym3.TraceFreeSym3.from_components(strain_to_physical(grid, s_hat))


def directional_strain(grid: Grid, u_hat, v, tol: float = 1e-12):
    """Physical field S(x) v(x) for a unit direction (vector or field).

    v is either a constant unit 3-vector or a (3, n, n, n) pointwise-unit
    field.  Returns a (3, n, n, n) physical array; pointwise
    |S(x) v(x)| >= |lambda2(x)|.
    """
    s = strain_field(grid, sym_gradient(grid, u_hat))
    return sym3.apply_to_vector(s, v, tol=tol)


def directional_strain_via_derivatives(grid: Grid, u_hat, v):
    """S v for a constant unit vector, computed as (d_v u + grad(u.v))/2.

    Independent route used to cross-check directional_strain on
    piecewise-constant direction fields (applied region by region).
    """
    v = np.asarray(v, dtype=float)
    if v.shape != (3,):
        raise InvalidInputError("derivative form needs a single constant 3-vector")
    if abs(np.sqrt(np.sum(v ** 2)) - 1.0) > 1e-12:
        raise InvalidInputError("direction is not unit length")
    k = (grid.kdx, grid.kdy, grid.kdz)
    dv_mult = 1j * (v[0] * k[0] + v[1] * k[1] + v[2] * k[2])
    dv_u = dv_mult * np.asarray(u_hat)
    u_dot_v = v[0] * u_hat[0] + v[1] * u_hat[1] + v[2] * u_hat[2]
    grad_uv = np.stack([1j * k[j] * u_dot_v for j in range(3)])
    return grid.ifft(0.5 * (dv_u + grad_uv))
