"""Pseudo-spectral solver and verification suite for the viscous Camassa-Holm
(fractional LANS-alpha) equations on the 2pi-periodic torus in 2D/3D."""

__version__ = "0.1.0"

from .spectral import (
    GridSpec,
    NormSpec,
    Params,
    Regime,
    SpectralField,
    dealias,
    frac_stokes_apply,
    helmholtz_inverse,
    infer_regime,
    inner,
    l2_norm,
    leray_project,
    make_grid,
    norm_DAr,
    semigroup_apply,
    to_physical,
    to_spectral,
)
from .operators import (
    RhsEval,
    advect,
    gradient,
    rhs_f,
    rhs_v,
    stokes_project_alpha,
    u_alpha,
    u_from_v,
    v_from_u,
)
from .integrator import (
    InitialData,
    SchemeKind,
    SimConfig,
    StepScheme,
    Trajectory,
    galerkin_truncate,
    make_initial,
    phi_functions,
    run,
    run_pair_uniqueness,
    step,
    suggest_dt,
)
from .mild import (
    HolderClass,
    PicardState,
    duhamel_integral,
    holder_membership,
    picard_solve,
    semigroup_class_check,
)
from .diagnostics import (
    DiagRecord,
    RateFit,
    apriori_monitor,
    energy_balance_residual,
    holder_quotients,
    record,
    smoothing_rate,
    spectrum,
)

__all__ = [name for name in dir() if not name.startswith("_")]
