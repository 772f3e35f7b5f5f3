"""Nonlinear terms of the averaged model.

The momentum equation is stepped in the form du/dt = -nu A^s u + f(u, u) with

    f(u1, u2) = -P_alpha[ u1.grad(u2) + U_alpha(u1, u2) ],

where U_alpha is the averaged-fluctuation stress and P_alpha the regularized
Stokes projector, which on the torus coincides with the Leray projection
because (1 - alpha^2 Laplacian) is a scalar multiplier. All quadratic products
are formed pointwise in physical space with 2/3-dealiased inputs and outputs,
so the discrete nonlinearity annihilates the H^1_alpha energy pairing to
rounding for band-limited fields.

Index conventions: (grad u)_{ij} = d_j u_i, matrix products contract adjacent
indices, and the tensor divergence is row-wise, (div T)_i = d_j T_{ij}.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InconsistentPairError
from .spectral import (
    GridSpec,
    Params,
    SpectralField,
    _check_same_grid,
    coeffs_to_phys,
    frac_stokes_apply,
    inner,
    leray_project,
    phys_to_coeffs,
)


@dataclass(frozen=True)
class RhsEval:
    """Value of f(u1, u2), optionally with the two pieces kept for diagnostics."""

    f: SpectralField
    advection: SpectralField | None = None
    stress: SpectralField | None = None


def gradient(field: SpectralField) -> np.ndarray:
    """Spectral gradient tensor, shape (dim, dim) + grid: [i, j] = d_j u_i."""
    grid = field.grid
    return 1j * grid.k[np.newaxis, :] * field.coeffs[:, np.newaxis]


def _dealiased(coeffs: np.ndarray, grid: GridSpec) -> np.ndarray:
    return coeffs * grid.dealias_mask


def _product_coeffs(phys: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Transform a pointwise product back to (dealiased) coefficients."""
    return _dealiased(phys_to_coeffs(phys, grid.dim), grid)


def _vel_grad_phys(u: SpectralField) -> tuple[np.ndarray, np.ndarray]:
    """Physical samples of the dealiased field and its gradient, one transform."""
    grid = u.grid
    dim = grid.dim
    dc = _dealiased(u.coeffs, grid)
    gc = 1j * grid.k[np.newaxis, :] * dc[:, np.newaxis]
    stacked = np.concatenate([dc, gc.reshape((dim * dim,) + grid.shape)])
    phys = coeffs_to_phys(stacked, dim)
    return phys[:dim], phys[dim:].reshape((dim, dim) + grid.shape)


def _advect_coeffs(vel: np.ndarray, grad: np.ndarray, grid: GridSpec) -> np.ndarray:
    prod = np.einsum("j...,ij...->i...", vel, grad)
    return _product_coeffs(prod, grid)


def _stress_tensor_phys(g1: np.ndarray, g2: np.ndarray) -> np.ndarray:
    return (
        np.einsum("ik...,jk...->ij...", g1, g2)
        + np.einsum("ik...,kj...->ij...", g1, g2)
        - np.einsum("ki...,kj...->ij...", g1, g2)
    )


def _stress_coeffs(tens_hat: np.ndarray, grid: GridSpec, alpha: float) -> np.ndarray:
    div = np.einsum("j...,ij...->i...", 1j * grid.k, tens_hat)
    return _dealiased(div, grid) * (alpha**2 / (1.0 + alpha**2 * grid.k2))


def advect(u1: SpectralField, u2: SpectralField) -> SpectralField:
    """Pseudo-spectral advection (u1 . grad) u2."""
    _check_same_grid(u1, u2)
    grid = u1.grid
    vel = coeffs_to_phys(_dealiased(u1.coeffs, grid), grid.dim)
    grad = coeffs_to_phys(_dealiased(gradient(u2), grid), grid.dim)
    return SpectralField.from_coeffs(grid, _advect_coeffs(vel, grad, grid))


def u_alpha(u1: SpectralField, u2: SpectralField, alpha: float) -> SpectralField:
    """Averaged stress alpha^2 (1-alpha^2 Lap)^{-1} div[G1 G2^T + G1 G2 - G1^T G2]."""
    _check_same_grid(u1, u2)
    grid = u1.grid
    g1 = coeffs_to_phys(_dealiased(gradient(u1), grid), grid.dim)
    g2 = coeffs_to_phys(_dealiased(gradient(u2), grid), grid.dim)
    tens_hat = phys_to_coeffs(_stress_tensor_phys(g1, g2), grid.dim)
    return SpectralField.from_coeffs(grid, _stress_coeffs(tens_hat, grid, alpha))


def stokes_project_alpha(w: SpectralField, alpha: float) -> SpectralField:
    """Regularized Stokes projector; reduces to Leray projection on the torus."""
    del alpha  # scalar multiplier (1 - alpha^2 Lap) commutes with the projection
    return leray_project(w)


def rhs_f(
    u1: SpectralField,
    u2: SpectralField,
    params: Params,
    keep_parts: bool = False,
) -> RhsEval:
    """f(u1, u2) = -P_alpha[u1.grad(u2) + U_alpha(u1, u2)]; solenoidal, zero-mean.

    The transforms of both quadratic terms are batched, and the shared
    gradient is reused when u1 and u2 are the same object (the common case
    while stepping), so one evaluation costs two stacked FFT sweeps.
    """
    _check_same_grid(u1, u2)
    grid = u1.grid
    dim = grid.dim
    vel1, g1 = _vel_grad_phys(u1)
    if u2 is u1:
        g2 = g1
    else:
        g2 = coeffs_to_phys(_dealiased(gradient(u2), grid), dim)

    adv_phys = np.einsum("j...,ij...->i...", vel1, g2)
    tens_phys = _stress_tensor_phys(g1, g2)
    stacked = phys_to_coeffs(
        np.concatenate([adv_phys, tens_phys.reshape((dim * dim,) + grid.shape)]),
        dim,
    )
    adv_hat = _dealiased(stacked[:dim], grid)
    stress_hat = _stress_coeffs(stacked[dim:].reshape((dim, dim) + grid.shape), grid, params.alpha)

    # Projecting twice is a no-op analytically but keeps the divergence
    # residual eps-relative to f itself even when the projection cancels
    # almost all of the nonlinearity (shear-like flows).
    out = -(leray_project(leray_project(SpectralField.from_coeffs(grid, adv_hat + stress_hat))))
    # The mean is annihilated analytically (divergence structure);
    # pin it to exactly zero so it cannot drift over long runs.
    coeffs = np.array(out.coeffs)
    coeffs[(slice(None),) + (0,) * dim] = 0.0
    f = SpectralField.from_coeffs(grid, coeffs)
    if __debug__ and np.all(np.isfinite(coeffs)):
        # stripped under python -O; f must be divergence-free and mean-free
        # unless the projection annihilated the nonlinearity entirely, in
        # which case f is rounding dust and has no certifiable direction.
        # Non-finite values are left to the integrator's divergence detector.
        pre = float(np.sqrt(np.sum(np.abs(adv_hat + stress_hat) ** 2)))
        post = float(np.sqrt(np.sum(np.abs(coeffs) ** 2)))
        assert f.zero_mean and (f.solenoidal or post <= 1e-12 * max(pre, 1e-300))
    if keep_parts:
        return RhsEval(
            f=f,
            advection=SpectralField.from_coeffs(grid, adv_hat),
            stress=SpectralField.from_coeffs(grid, stress_hat),
        )
    return RhsEval(f=f)


def h1_alpha_pairing(u: SpectralField, f: SpectralField, alpha: float) -> float:
    """Energy pairing <(1 + alpha^2 A) u, f>; vanishes when f = f(u, u)."""
    w = u.copy_with(u.coeffs * (1.0 + alpha**2 * u.grid.k2))
    return inner(w, f)


def v_from_u(u: SpectralField, alpha: float) -> SpectralField:
    """Filtered momentum v = (1 + alpha^2 A) u."""
    return u.copy_with(u.coeffs * (1.0 + alpha**2 * u.grid.k2))


def u_from_v(v: SpectralField, alpha: float) -> SpectralField:
    """Inverse of v_from_u."""
    return v.copy_with(v.coeffs / (1.0 + alpha**2 * v.grid.k2))


PAIR_TOL = 1e-8


def v_nonlinearity(u: SpectralField, v: SpectralField) -> SpectralField:
    """Nonlinear part of the v-form: -P[u.grad(v) + (grad u)^T v]."""
    _check_same_grid(u, v)
    grid = u.grid
    uphys, gu = _vel_grad_phys(u)
    vphys, gv = _vel_grad_phys(v)
    transport = np.einsum("j...,ij...->i...", uphys, gv)
    stretch = np.einsum("ji...,j...->i...", gu, vphys)
    hat = _product_coeffs(transport + stretch, grid)
    out = -1.0 * leray_project(leray_project(SpectralField.from_coeffs(grid, hat)))
    coeffs = np.array(out.coeffs)
    coeffs[(slice(None),) + (0,) * grid.dim] = 0.0
    return SpectralField.from_coeffs(grid, coeffs)


def rhs_v(u: SpectralField, v: SpectralField, params: Params) -> SpectralField:
    """Right-hand side of the v-form: -nu A^s v - P[u.grad(v) + (grad u)^T v]."""
    _check_same_grid(u, v)
    expected = v_from_u(u, params.alpha)
    scale = float(np.max(np.abs(v.coeffs))) or 1.0
    if float(np.max(np.abs(expected.coeffs - v.coeffs))) > PAIR_TOL * scale:
        raise InconsistentPairError("v does not match (1 + alpha^2 A) u")
    return v_nonlinearity(u, v) - params.nu * frac_stokes_apply(v, params.s)
