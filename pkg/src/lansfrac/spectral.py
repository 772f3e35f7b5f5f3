"""Torus grids, transforms, and diagonal Fourier-multiplier operators.

Fields live on the periodic box [0, 2pi)^dim and are stored as coefficients of
the synthesis u(x) = sum_k uhat(k) exp(i k.x) with integer wavevectors k, so
every operator here (Leray projection, fractional Stokes powers, Helmholtz
inverse, dissipative semigroup) is a diagonal multiplier on the coefficient
array. Norms and inner products carry the (2pi)^dim measure factor and
therefore report physical L^2([0, 2pi]^dim) values; Parseval is exact for
band-limited fields.

Everything is a pure function of its inputs; fields are immutable (the
coefficient buffers are write-protected). Transforms go through scipy's
pocketfft with ``workers=-1``: the batched 1-D transforms are independent, so
results are bitwise identical for any worker count.
"""

from __future__ import annotations

from dataclasses import dataclass, field as _field
from enum import Enum
from functools import cached_property

import numpy as np
import scipy.fft as _fft

from .errors import GridError, MeanModeError, RegimeViolationError

TWO_PI = 2.0 * np.pi

# Tolerances used when measuring field flags, relative to the coefficient scale.
HERMITIAN_TOL = 1e-12
SOLENOIDAL_TOL = 1e-12
MEAN_TOL = 1e-12


class Regime(Enum):
    """Which hypothesis set the parameters are certified for."""

    GLOBAL_RANGE = "global"        # s in [dim/4, 1): global well-posedness
    LOCAL_RANGE = "local"          # s in [1/2, 1): local well-posedness only
    UNRESTRICTED = "unrestricted"  # any s in (0, 1): operator tests only


def infer_regime(dim: int, s: float) -> Regime:
    """Strongest regime admissible for the pair (dim, s); endpoints included."""
    if dim / 4.0 <= s < 1.0:
        return Regime.GLOBAL_RANGE
    if 0.5 <= s < 1.0:
        return Regime.LOCAL_RANGE
    return Regime.UNRESTRICTED


@dataclass(frozen=True)
class GridSpec:
    """Discretization of the 2pi-periodic torus.

    Parameters
    ----------
    dim : int
        Spatial dimension, 2 or 3.
    N : int
        Modes per axis; must be even and at least 8. Wavevector components for
        each axis run over the integers [-N/2, N/2).
    """

    dim: int
    N: int
    k: np.ndarray = _field(init=False, repr=False, compare=False)
    k2: np.ndarray = _field(init=False, repr=False, compare=False)
    dealias_mask: np.ndarray = _field(init=False, repr=False, compare=False)
    x: np.ndarray = _field(init=False, repr=False, compare=False)

    period = TWO_PI

    def __post_init__(self) -> None:
        if self.dim not in (2, 3):
            raise GridError(f"dim must be 2 or 3, got {self.dim}")
        if self.N % 2 != 0:
            raise GridError(f"N must be even, got {self.N}")
        if self.N < 8:
            raise GridError(f"N must be at least 8, got {self.N}")

        k1 = np.fft.fftfreq(self.N) * self.N  # 0, 1, ..., N/2-1, -N/2, ..., -1
        axes = np.meshgrid(*([k1] * self.dim), indexing="ij")
        k = np.stack(axes).astype(np.float64)
        k2 = np.sum(k * k, axis=0)
        # 2/3 rule: zero every mode with any |k_i| >= N/3.
        mask = np.all(np.abs(k) < self.N / 3.0, axis=0)

        x1 = np.arange(self.N) * (TWO_PI / self.N)
        x = np.stack(np.meshgrid(*([x1] * self.dim), indexing="ij"))

        for name, arr in (("k", k), ("k2", k2), ("dealias_mask", mask), ("x", x)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.dim

    @property
    def dx(self) -> float:
        return TWO_PI / self.N

    @property
    def band_limit(self) -> int:
        """Largest |k_i| that survives dealiasing."""
        return int(np.ceil(self.N / 3.0)) - 1

    @property
    def measure(self) -> float:
        """Weight turning coefficient sums into L^2([0,2pi]^dim) integrals."""
        return TWO_PI**self.dim


def make_grid(dim: int, N: int) -> GridSpec:
    """Build a validated torus grid with its wavevector tables."""
    return GridSpec(dim, N)


@dataclass(frozen=True)
class Params:
    """Physical and model constants.

    alpha is the averaging scale (alpha = 0 degenerates to plain fractional
    Navier-Stokes advection and is allowed for operator tests), nu > 0 the
    viscosity, s in (0, 1) the fractional order of the dissipation A^s.
    """

    alpha: float
    nu: float
    s: float
    regime: Regime = Regime.UNRESTRICTED

    def __post_init__(self) -> None:
        if self.alpha < 0:
            raise ValueError(f"alpha must be nonnegative, got {self.alpha}")
        if self.nu <= 0:
            raise ValueError(f"nu must be positive, got {self.nu}")
        if not 0.0 < self.s < 1.0:
            raise ValueError(f"s must lie in (0, 1), got {self.s}")


def check_regime(params: Params, dim: int) -> None:
    """Verify the declared regime is admissible for (dim, s)."""
    s = params.s
    if params.regime is Regime.GLOBAL_RANGE and not dim / 4.0 <= s < 1.0:
        raise RegimeViolationError(
            f"GlobalRange requires s in [{dim/4.0}, 1) for dim={dim}, got s={s}"
        )
    if params.regime is Regime.LOCAL_RANGE and not 0.5 <= s < 1.0:
        raise RegimeViolationError(f"LocalRange requires s in [1/2, 1), got s={s}")


@dataclass(frozen=True)
class NormSpec:
    """Order r >= 0 of a D(A^r) norm request."""

    r: float

    def __post_init__(self) -> None:
        if self.r < 0:
            raise ValueError(f"NormSpec order must be nonnegative, got {self.r}")


def _spatial_axes(dim: int) -> tuple[int, ...]:
    return tuple(range(-dim, 0))


def phys_to_coeffs(phys: np.ndarray, dim: int) -> np.ndarray:
    """Fourier coefficients of a physical-space array (spatial axes last)."""
    n_total = phys.shape[-1] ** dim
    return _fft.fftn(phys, axes=_spatial_axes(dim), workers=-1) / n_total


def coeffs_to_phys(coeffs: np.ndarray, dim: int) -> np.ndarray:
    """Physical-space samples of coefficient arrays; imaginary part dropped."""
    n_total = coeffs.shape[-1] ** dim
    return _fft.ifftn(coeffs * n_total, axes=_spatial_axes(dim), workers=-1).real


def reflect_conj(coeffs: np.ndarray, dim: int) -> np.ndarray:
    """conj(a(-k)): equals a(k) exactly iff the physical field is real."""
    out = coeffs
    for ax in _spatial_axes(dim):
        out = np.roll(np.flip(out, axis=ax), 1, axis=ax)
    return np.conj(out)


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Divergence-free vector field stored as Fourier coefficients.

    coeffs has shape (dim,) + (N,)*dim. The boolean flags (hermitian,
    solenoidal, zero_mean) are measured from the coefficients, not declared;
    measurement is deferred to first access and cached, so reading a flag is
    always a checked invariant.
    """

    grid: GridSpec
    coeffs: np.ndarray

    @classmethod
    def from_coeffs(cls, grid: GridSpec, coeffs: np.ndarray) -> "SpectralField":
        coeffs = np.ascontiguousarray(coeffs, dtype=np.complex128)
        if coeffs.shape != (grid.dim,) + grid.shape:
            raise GridError(
                f"coefficient shape {coeffs.shape} does not match grid "
                f"{(grid.dim,) + grid.shape}"
            )
        coeffs.setflags(write=False)
        return cls(grid, coeffs)

    @cached_property
    def _flags(self) -> tuple[bool, bool, bool]:
        return measure_flags(self.grid, self.coeffs)

    @property
    def hermitian(self) -> bool:
        return self._flags[0]

    @property
    def solenoidal(self) -> bool:
        return self._flags[1]

    @property
    def zero_mean(self) -> bool:
        return self._flags[2]

    def copy_with(self, coeffs: np.ndarray) -> "SpectralField":
        return SpectralField.from_coeffs(self.grid, coeffs)

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _check_same_grid(self, other)
        return self.copy_with(self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _check_same_grid(self, other)
        return self.copy_with(self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> "SpectralField":
        return self.copy_with(self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return self.copy_with(-self.coeffs)


def measure_flags(grid: GridSpec, coeffs: np.ndarray) -> tuple[bool, bool, bool]:
    """Measure (hermitian, solenoidal, zero_mean) for a coefficient array."""
    scale = float(np.max(np.abs(coeffs))) if coeffs.size else 0.0
    if scale == 0.0:
        return True, True, True
    if not np.all(np.isfinite(coeffs)):
        return False, False, False
    herm = float(np.max(np.abs(reflect_conj(coeffs, grid.dim) - coeffs)))
    kdot = np.einsum("i...,i...->...", grid.k, coeffs)
    glob = float(np.sqrt(np.sum(np.abs(coeffs) ** 2)))
    sol = float(np.max(np.abs(kdot)))
    mean = float(np.max(np.abs(coeffs[(slice(None),) + (0,) * grid.dim])))
    return (
        herm <= HERMITIAN_TOL * scale,
        sol <= SOLENOIDAL_TOL * glob,
        mean <= MEAN_TOL * scale,
    )


def _check_same_grid(a: SpectralField, b: SpectralField) -> None:
    if a.grid != b.grid:
        raise GridError("fields live on different grids")


def zero_field(grid: GridSpec) -> SpectralField:
    return SpectralField.from_coeffs(
        grid, np.zeros((grid.dim,) + grid.shape, dtype=np.complex128)
    )


def to_physical(field: SpectralField) -> np.ndarray:
    """Real-space samples, shape (dim,) + (N,)*dim. Requires a real field."""
    if not field.hermitian:
        raise ValueError("to_physical requires a hermitian (real-valued) field")
    return coeffs_to_phys(field.coeffs, field.grid.dim)


def to_spectral(phys: np.ndarray, grid: GridSpec) -> SpectralField:
    """Transform real-space samples (shape (dim,) + (N,)*dim) to coefficients."""
    phys = np.asarray(phys)
    if phys.shape != (grid.dim,) + grid.shape:
        raise GridError(
            f"array shape {phys.shape} does not match grid {(grid.dim,) + grid.shape}"
        )
    return SpectralField.from_coeffs(grid, phys_to_coeffs(phys, grid.dim))


def l2_norm(field: SpectralField) -> float:
    """Physical L^2([0,2pi]^dim) norm."""
    return float(np.sqrt(field.grid.measure * np.sum(np.abs(field.coeffs) ** 2)))


def inner(f: SpectralField, g: SpectralField) -> float:
    """L^2 inner product of two real fields."""
    _check_same_grid(f, g)
    return float(f.grid.measure * np.sum(np.conj(f.coeffs) * g.coeffs).real)


def leray_project(field: SpectralField) -> SpectralField:
    """Remove the k-parallel (gradient) part of every mode; mode 0 untouched."""
    grid = field.grid
    kdot = np.einsum("i...,i...->...", grid.k, field.coeffs)
    k2safe = np.where(grid.k2 > 0, grid.k2, 1.0)
    out = field.coeffs - grid.k * (kdot / k2safe)
    zero = (slice(None),) + (0,) * grid.dim
    out[zero] = field.coeffs[zero]
    return field.copy_with(out)


def stokes_multiplier(k2: np.ndarray, r: float) -> np.ndarray:
    """|k|^{2r} evaluated as exp(r log|k|^2), with the k = 0 mode sent to 0."""
    with np.errstate(divide="ignore"):
        return np.where(k2 > 0, np.exp(r * np.log(np.where(k2 > 0, k2, 1.0))), 0.0)


def frac_stokes_apply(field: SpectralField, r: float) -> SpectralField:
    """Fractional Stokes power A^r: Leray projection times the |k|^{2r} multiplier."""
    if r < 0 and not field.zero_mean:
        raise MeanModeError("A^r with r < 0 requires a zero-mean field")
    base = field if field.solenoidal else leray_project(field)
    return field.copy_with(base.coeffs * stokes_multiplier(field.grid.k2, r))


def helmholtz_inverse(field: SpectralField, alpha: float) -> SpectralField:
    """(1 - alpha^2 Laplacian)^{-1}: divide each mode by 1 + alpha^2 |k|^2."""
    return field.copy_with(field.coeffs / (1.0 + alpha**2 * field.grid.k2))


def semigroup_factor(grid: GridSpec, t: float, params: Params) -> np.ndarray:
    """Per-mode multiplier exp(-nu t |k|^{2s}) of the dissipative semigroup."""
    return np.exp(-params.nu * t * stokes_multiplier(grid.k2, params.s))


def semigroup_apply(field: SpectralField, t: float, params: Params) -> SpectralField:
    """Apply exp(-t nu A^s); t = 0 is the identity."""
    if t < 0:
        raise ValueError(f"semigroup time must be nonnegative, got {t}")
    return field.copy_with(field.coeffs * semigroup_factor(field.grid, t, params))


def norm_DAr(field: SpectralField, r: float | NormSpec) -> float:
    """D(A^r) norm: (||A^r f||^2 + ||f||^2 1_{r>0})^{1/2}; r = 0 is plain L^2."""
    if isinstance(r, NormSpec):
        r = r.r
    if r == 0.0:
        return l2_norm(field)
    grid = field.grid
    w = np.abs(field.coeffs) ** 2
    a_part = grid.measure * np.sum(stokes_multiplier(grid.k2, 2.0 * r) * w)
    if r < 0:
        return float(np.sqrt(a_part))
    return float(np.sqrt(a_part + grid.measure * np.sum(w)))


def dealias(field: SpectralField) -> SpectralField:
    """Zero every mode with any |k_i| >= N/3 (2/3 rule); idempotent."""
    return field.copy_with(field.coeffs * field.grid.dealias_mask)
