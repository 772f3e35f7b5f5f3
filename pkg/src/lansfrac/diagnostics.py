"""Measured quantities: energies, balance residuals, bound monitors, rate fits.

Everything here is a pure reader of fields or trajectories. Report-style
functions never raise on "bad physics"; they return numbers and let the caller
(or the acceptance harness) compare against thresholds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from .errors import RegimeViolationError
from .operators import h1_alpha_pairing, rhs_f
from .spectral import (
    Params,
    Regime,
    SpectralField,
    frac_stokes_apply,
    l2_norm,
    norm_DAr,
)

_TINY = 1e-300


@dataclass(frozen=True)
class DiagRecord:
    """Per-instant energy/dissipation numbers.

    E0: ||u||_{L^2}^2. E1: E0 + alpha^2 ||A^{1/2} u||^2 (the conserved-modulo-
    dissipation energy). D: ||A^{s/2} u||^2 + alpha^2 ||A^{(1+s)/2} u||^2 (its
    dissipation rate / (2 nu)). nDA: ||u||_{D(A)}. n1ps2: ||A^{1+s/2} u||.
    cancel: normalized residual of the nonlinear energy pairing.
    """

    t: float
    E0: float
    E1: float
    D: float
    nDA: float
    n1ps2: float
    cancel: float


def record(
    u: SpectralField,
    params: Params,
    t: float,
    f: SpectralField | None = None,
) -> DiagRecord:
    """Diagnostics for one state; pass f = f(u, u) if already evaluated."""
    a2 = params.alpha**2
    e0 = l2_norm(u) ** 2
    e1 = e0 + a2 * l2_norm(frac_stokes_apply(u, 0.5)) ** 2
    diss = (
        l2_norm(frac_stokes_apply(u, params.s / 2.0)) ** 2
        + a2 * l2_norm(frac_stokes_apply(u, (1.0 + params.s) / 2.0)) ** 2
    )
    nda = norm_DAr(u, 1.0)
    n1ps2 = l2_norm(frac_stokes_apply(u, 1.0 + params.s / 2.0))
    if f is None:
        f = rhs_f(u, u, params).f
    cancel = abs(h1_alpha_pairing(u, f, params.alpha)) / (nda**3 + _TINY)
    return DiagRecord(t=t, E0=e0, E1=e1, D=diss, nDA=nda, n1ps2=n1ps2, cancel=cancel)


def _cumtrapz(y: np.ndarray, x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(y)
    out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(x))
    return out


def energy_balance_residual(traj, params: Params) -> np.ndarray:
    """|E1(t) + 2 nu int_0^t D - E1(0)| / E1(0) along the recorded diagnostics."""
    recs = traj.diag
    if len(recs) < 2:
        raise ValueError("energy balance needs at least two diagnostic records")
    t = np.array([r.t for r in recs])
    e1 = np.array([r.E1 for r in recs])
    d = np.array([r.D for r in recs])
    return np.abs(e1 + 2.0 * params.nu * _cumtrapz(d, t) - e1[0]) / e1[0]


@dataclass(frozen=True)
class AprioriReport:
    """Measured constants of the global-solution bound."""

    sup_ratio: float            # sup_t ||u||_{D(A)} / ||u_0||_{D(A)}
    dissipation_integral: float  # int ||A^{1+s/2} u||^2 dt
    initial_nDA: float


def apriori_monitor(traj, params: Params) -> AprioriReport:
    """Check material of the global bound; requires the global regime."""
    if params.regime is not Regime.GLOBAL_RANGE:
        raise RegimeViolationError("a priori bound monitor requires GlobalRange")
    t = np.array([r.t for r in traj.diag])
    nda = np.array([r.nDA for r in traj.diag])
    n1 = np.array([r.n1ps2 for r in traj.diag])
    integral = float(trapezoid(n1**2, t)) if len(t) > 1 else 0.0
    return AprioriReport(
        sup_ratio=float(np.max(nda) / (nda[0] + _TINY)),
        dissipation_integral=integral,
        initial_nDA=float(nda[0]),
    )


@dataclass(frozen=True)
class RateFit:
    """Log-log envelope fit of ||u(t)||_{D(A^{1+r})} near t = 0+."""

    window: tuple[float, float]
    slope: float
    r: float
    expected: float  # -r/s
    residual: float  # RMS of the fit


def smoothing_rate(
    traj,
    r: float,
    s: float,
    window: tuple[float, float] | None = None,
    n_samples: int = 32,
) -> RateFit:
    """Least-squares slope of log ||u(t)||_{D(A^{1+r})} vs log t over the window.

    Snapshot times are subsampled log-uniformly inside the window so the fit
    is not biased toward late times by a linear recording cadence.
    """
    times = np.asarray(traj.times, dtype=float)
    if window is None:
        spacing = float(np.median(np.diff(times))) if len(times) > 1 else 0.0
        window = (2.0 * spacing, 0.1)
    lo, hi = window
    sel = [i for i, t in enumerate(times) if lo <= t <= hi and t > 0]
    if len(sel) < 2:
        raise ValueError(f"smoothing-rate window {window} contains <2 samples")
    in_window = np.array(sel)
    targets = np.geomspace(max(lo, times[in_window[0]]), times[in_window[-1]], n_samples)
    picked = sorted({int(in_window[np.argmin(np.abs(times[in_window] - tt))]) for tt in targets})
    logt = np.log([times[i] for i in picked])
    logn = np.log([norm_DAr(traj.snapshots[i], 1.0 + r) + _TINY for i in picked])
    slope, intercept = np.polyfit(logt, logn, 1)
    resid = float(np.sqrt(np.mean((logn - (slope * logt + intercept)) ** 2)))
    return RateFit(window=(lo, hi), slope=float(slope), r=r, expected=-r / s, residual=resid)


def holder_quotients(traj, beta: float, s: float, tol: float = 1.0):
    """Weighted-Hoelder quotient report in the critical case (dim, s) = (2, 1/2).

    Delegates to the mild-solution membership check with the amplitude scale
    R = ||u(0)||_{D(A)}, so the reported minimal feasible R/||u0|| is the
    measured class constant.
    """
    from . import mild  # local import: mild builds on the integrator

    grid = traj.snapshots[0].grid
    if grid.dim != 2 or abs(s - 0.5) > 1e-12:
        raise RegimeViolationError("holder quotients require (dim, s) = (2, 1/2)")
    r0 = norm_DAr(traj.snapshots[0], 1.0)
    holder = mild.HolderClass(R=max(r0, _TINY), beta=beta, T=float(traj.times[-1]), tol=tol)
    return mild.holder_membership(traj, holder, s)


def spectrum(u: SpectralField) -> np.ndarray:
    """Shell-averaged energy E(kappa) = 1/2 sum_{kappa <= |k| < kappa+1} |uhat|^2.

    Sums (with the L^2 measure weight) to E0/2.
    """
    grid = u.grid
    shells = np.floor(np.sqrt(grid.k2)).astype(int)
    weights = 0.5 * grid.measure * np.sum(np.abs(u.coeffs) ** 2, axis=0)
    return np.bincount(shells.ravel(), weights=weights.ravel())
