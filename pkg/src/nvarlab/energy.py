"""Energy functional, quotient, L2 gradient, and critical-point identities.

The functional is J(u) = [u]^2 / 2 - int F(u), where [u]^2 is the fractional
Dirichlet energy plus mu times the Hardy weight integral.  All integrals use
the shared h^N quadrature weight of the grid module.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigError, NumericsError
from .grid import (
    Field,
    ProblemParams,
    apply_Ds_operator,
    apply_Ds_squared,
    ds_squared_samples,
    hardy_weight,
    hardy_weight_integral,
    lp_norm_pow,
    mass,
)
from .nonlinearity import Nonlinearity


@dataclass(frozen=True)
class EnergyBreakdown:
    """All additive pieces of J plus the mass, one evaluation pass."""

    ds_part: float
    hardy_part: float
    seminorm_sq: float
    potential: float
    J: float
    mass: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class IdentityReport:
    """Pohozaev/Nehari consistency diagnostics at a candidate critical point.

    ``lambda_estimate`` solves the Nehari identity for the multiplier.  The
    Pohozaev residual plugs that multiplier into the Pohozaev identity; the
    Nehari residual does the reverse (multiplier solved from Pohozaev,
    plugged into Nehari).  Both are normalized by the seminorm.
    """

    pohozaev_residual: float
    nehari_residual: float
    M_value: float
    lambda_estimate: float

    def to_dict(self) -> dict:
        return asdict(self)


def delta_p(params: ProblemParams, p: float) -> float:
    """Interpolation exponent (N/s)(1/2 - 1/p)."""
    return (params.N / params.s) * (0.5 - 1.0 / p)


def potential_integral(u: Field, nl: Nonlinearity) -> float:
    """int F(u) with the h^N quadrature weight."""
    vals = nl.F(u.samples)
    if not np.all(np.isfinite(vals)):
        raise NumericsError("potential integrand is non-finite")
    return float(u.params.cell_volume * np.sum(vals))


def nonlinear_pairing(u: Field, nl: Nonlinearity) -> float:
    """int f(u) u with the h^N quadrature weight."""
    return float(u.params.cell_volume * np.sum(nl.f(u.samples) * u.samples))


def evaluate(u: Field, nl: Nonlinearity) -> EnergyBreakdown:
    """Full energy breakdown of one field."""
    p = u.params
    ds = apply_Ds_squared(u)
    hardy = p.mu * hardy_weight_integral(u) if (p.K >= 2 and p.mu != 0.0) else 0.0
    seminorm = ds + hardy
    if seminorm < 0:
        warnings.warn(
            "negative Hardy-augmented seminorm: grid under-resolves the axis"
        )
    pot = potential_integral(u, nl)
    return EnergyBreakdown(
        ds_part=ds,
        hardy_part=hardy,
        seminorm_sq=seminorm,
        potential=pot,
        J=seminorm / 2.0 - pot,
        mass=mass(u),
    )


def dilated_energy(u: Field, nl: Nonlinearity, t: float,
                   breakdown: EnergyBreakdown | None = None) -> float:
    """J(t * u) via the exact scaling J = t^(2s) [u]^2/2 - t^(-N) int F(t^(N/2) u).

    Evaluates the dilated energy without resampling; this is the oracle the
    resampling probe is checked against, and the anchor for threshold scans.
    """
    p = u.params
    if breakdown is None:
        breakdown = evaluate(u, nl)
    amp = t ** (p.N / 2.0)
    pot = float(p.cell_volume * np.sum(nl.F(amp * u.samples)))
    return t ** (2 * p.s) * breakdown.seminorm_sq / 2.0 - t ** (-p.N) * pot


def quotient_R(u: Field, p_exp: float) -> float:
    """Scale-invariant interpolation quotient of one field.

    R(u) = [u]^(p delta) |u|_2^(p (1-delta)) / |u|_p^p, positive for u != 0.
    """
    params = u.params
    if not 2.0 < p_exp < params.two_star:
        raise ConfigError(f"p must lie in (2, {params.two_star}), got {p_exp}")
    m = mass(u)
    if m == 0.0:
        raise ConfigError("quotient undefined at zero")
    d = delta_p(params, p_exp)
    ds = apply_Ds_squared(u)
    hardy = params.mu * hardy_weight_integral(u) if (params.K >= 2 and params.mu != 0.0) else 0.0
    semi = ds + hardy
    lp = lp_norm_pow(u, p_exp)
    return semi ** (p_exp * d / 2.0) * m ** (p_exp * (1.0 - d) / 2.0) / lp


def gradient_samples(samples: np.ndarray, params: ProblemParams,
                     nl: Nonlinearity) -> np.ndarray:
    """L2 gradient of J on a raw sample array (optimizer hot path)."""
    out = apply_Ds_operator(samples, params)
    if params.K >= 2 and params.mu != 0.0:
        out = out + params.mu * hardy_weight(params) * samples
    return out - nl.f(samples)


def gradient(u: Field, nl: Nonlinearity) -> Field:
    """L2 gradient of J: (-Delta)^s u + mu |y|^(-2s) u - f(u).

    The quadrature inner product of the gradient with any direction v equals
    the directional derivative of J along v.
    """
    return Field(u.params, gradient_samples(u.samples, u.params, nl))


def inner(u: Field, v: Field) -> float:
    """Quadrature inner product <u, v> = h^N sum u v."""
    return float(u.params.cell_volume * np.sum(u.samples * v.samples))


def identities(u: Field, nl: Nonlinearity,
               breakdown: EnergyBreakdown | None = None) -> IdentityReport:
    """Critical-point identity report; diagnostic for arbitrary fields."""
    p = u.params
    if breakdown is None:
        breakdown = evaluate(u, nl)
    m = breakdown.mass
    if m == 0.0:
        raise ConfigError("identities undefined at the zero field")
    semi = breakdown.seminorm_sq
    fu = nonlinear_pairing(u, nl)
    pot = breakdown.potential
    N, s = p.N, p.s

    lam_neh = (fu - semi) / m
    # Pohozaev identity with the Nehari multiplier
    poh = (N - 2 * s) * semi - N * (2 * pot - lam_neh * m)
    # Nehari identity with the multiplier solved from Pohozaev
    lam_poh = (2 * N * pot - (N - 2 * s) * semi) / (N * m)
    neh = semi + lam_poh * m - fu
    M = s * semi + (N / 2.0) * (2 * pot - fu)
    denom = abs(semi) if semi != 0.0 else 1.0
    return IdentityReport(
        pohozaev_residual=abs(poh) / denom,
        nehari_residual=abs(neh) / denom,
        M_value=M,
        lambda_estimate=lam_neh,
    )
