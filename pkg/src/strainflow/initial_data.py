"""Initial velocity fields: all divergence-free, mean-zero, Nyquist-free."""

from __future__ import annotations

import numpy as np

from . import snapshots
from .exceptions import ConfigError, InvalidInputError
from .spectral import (Grid, hermitian_symmetrize, project_divergence_free,
                       sobolev_norm_sq, zero_nyquist)


def taylor_green(grid: Grid, amplitude: float = 1.0):
    """u = (sin x cos y cos z, -cos x sin y cos z, 0), the canonical
    smooth nontrivial test flow."""
    x, y, z = grid.coords()
    shape = (grid.n,) * 3
    u = np.stack([
        np.broadcast_to(np.sin(x) * np.cos(y) * np.cos(z), shape),
        np.broadcast_to(-np.cos(x) * np.sin(y) * np.cos(z), shape),
        np.zeros(shape),
    ])
    u_hat = amplitude * grid.fft(u)
    u_hat[:, 0, 0, 0] = 0.0
    return u_hat


def shear(grid: Grid, amplitude: float = 1.0):
    """u = (sin y, 0, 0): single-mode exactly solvable flow (the
    nonlinearity vanishes, so it decays as exp(-nu t))."""
    _, y, _ = grid.coords()
    shape = (grid.n,) * 3
    u = np.stack([
        np.broadcast_to(np.sin(y), shape),
        np.zeros(shape),
        np.zeros(shape),
    ])
    u_hat = amplitude * grid.fft(u)
    u_hat[:, 0, 0, 0] = 0.0
    return u_hat


def random_div_free(grid: Grid, seed: int, max_wavenumber: int | None = None,
                    amplitude: float = 1.0):
    """Random band-limited divergence-free field with L2 norm = amplitude.

    Complex Gaussian coefficients are drawn for every mode with
    |xi_i| <= max_wavenumber, Hermitian-symmetrized, and Leray-projected.
    The default band (n-1)//3 keeps triple products alias-free under the
    grid quadrature, so cubic integral identities hold to rounding.
    Identical (seed, n) inputs give bit-identical fields.
    """
    if max_wavenumber is None:
        max_wavenumber = grid.dealias_kmax
    if max_wavenumber < 1 or max_wavenumber > grid.n // 2:
        raise InvalidInputError(
            f"max_wavenumber must be in [1, n/2], got {max_wavenumber}")
    rng = np.random.default_rng(seed)
    shape = (3, grid.n, grid.n, grid.n)
    coeffs = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    band = (np.abs(grid.kx) <= max_wavenumber) \
        & (np.abs(grid.ky) <= max_wavenumber) \
        & (np.abs(grid.kz) <= max_wavenumber)
    coeffs *= band
    coeffs = hermitian_symmetrize(coeffs)
    coeffs[:, 0, 0, 0] = 0.0
    zero_nyquist(grid, coeffs)
    u_hat = project_divergence_free(grid, coeffs)
    norm = np.sqrt(sobolev_norm_sq(grid, u_hat, 0.0))
    if norm == 0.0:
        raise InvalidInputError("random field collapsed to zero")
    return u_hat * (amplitude / norm)


def from_file(grid: Grid, path):
    """Velocity from a snapshot file; grid sizes must match."""
    snap = snapshots.load_snapshot(path)
    if snap.kind != "velocity":
        raise ConfigError(f"initial data snapshot must hold velocity, got {snap.kind}")
    if snap.n != grid.n:
        raise ConfigError(f"snapshot grid {snap.n} != configured grid {grid.n}")
    u_hat = grid.fft(snap.data)
    zero_nyquist(grid, u_hat)
    u_hat[:, 0, 0, 0] = 0.0
    return u_hat


def generate_initial(grid: Grid, name: str, *, seed: int = 1,
                     max_wavenumber: int | None = None, amplitude: float = 1.0,
                     initial_file=None):
    """Dispatch on the initial_data name used in run configurations."""
    if name == "taylor_green":
        return taylor_green(grid, amplitude)
    if name == "shear":
        return shear(grid, amplitude)
    if name == "random_div_free":
        return random_div_free(grid, seed, max_wavenumber, amplitude)
    if name == "from_file":
        if not initial_file:
            raise ConfigError("initial_data=from_file requires initial_file=<path>")
        return from_file(grid, initial_file)
    raise ConfigError(f"unknown initial_data {name!r}")
