"""Mass thresholds: m(rho) scans, the sign-change bisection, and the
energy-level upper bound for the threshold from feasible test bumps.

m(rho) is estimated by multistart ball-mode minimization; since the zero
field always belongs to the ball, estimates are clamped to be nonpositive.
Unboundedness from below is detected by a dilation probe run on a
moderate-resolution iterate before the solver collapses to grid scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigError, NumericsError, ResolutionError
from .grid import Field, ProblemParams, dilate, mass
from .energy import evaluate
from .nonlinearity import Nonlinearity
from .optimizer import (
    PROBE_UNBOUNDED,
    MinimizeResult,
    SolverConfig,
    deterministic_bump,
    dilation_probe,
    ds_plus_hardy,
    find_positive_level,
    gaussian_start,
    minimize,
    multistart,
    _prepare_start,
)

STATUS_ZERO = "zero"
STATUS_NEGATIVE = "negative"
STATUS_UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class ThresholdResult:
    """Bisection bracket with every m(rho) sample and closed-form context."""

    rho_star_bracket: tuple
    m_samples: list
    closed_form_bounds: dict

    def to_dict(self) -> dict:
        return {
            "rho_star_bracket": list(self.rho_star_bracket),
            "m_samples": [
                {"rho": r, "m": m, "status": s} for (r, m, s) in self.m_samples
            ],
            "closed_form_bounds": self.closed_form_bounds,
        }


def tol_zero(params: ProblemParams, rho: float) -> float:
    """Zero/negative classification scale, mass-independent by dilation."""
    return 1e-6 * rho ** (1.0 - 2.0 * params.s / params.N)


def estimate_m(params: ProblemParams, nl: Nonlinearity, rho: float,
               cfg: SolverConfig) -> tuple:
    """Best energy over the mass ball and its status classification.

    Returns (m_estimate, status) with status in {zero, negative, unbounded}.
    A short pre-run feeds the dilation probe while the iterate still
    resolves; collapse to grid scale cannot be probed meaningfully.
    """
    cfg = replace(cfg, rho=rho, constraint="ball")
    tz = tol_zero(params, rho)

    # stage 1: short solves to catch unbounded directions early
    pre_cfg = replace(cfg, max_iters=min(300, cfg.max_iters), grad_tol=1e-4)
    starts = [deterministic_bump(params, nl)]
    for k in range(cfg.restarts - 1):
        rng = np.random.default_rng([cfg.seed, k])
        starts.append(gaussian_start(params, rng))
    prepared = [u for u in (_prepare_start(s, params, cfg) for s in starts)
                if u is not None]
    for u0 in prepared:
        res = minimize(params, nl, pre_cfg, u0=u0)
        if res.unbounded_flag:
            return min(res.breakdown.J, 0.0), STATUS_UNBOUNDED
        if res.breakdown.mass > 1e-12 and res.breakdown.J < -tz:
            if dilation_probe(res.field, nl) == PROBE_UNBOUNDED:
                return min(res.breakdown.J, 0.0), STATUS_UNBOUNDED

    # stage 2: full minimization
    best = multistart(params, nl, cfg)
    m_est = min(best.breakdown.J, 0.0)  # the zero field attains 0
    if best.unbounded_flag:
        return m_est, STATUS_UNBOUNDED
    if m_est < -tz:
        if (best.breakdown.mass > 1e-12
                and dilation_probe(best.field, nl) == PROBE_UNBOUNDED):
            return m_est, STATUS_UNBOUNDED
        return m_est, STATUS_NEGATIVE
    return m_est, STATUS_ZERO


def bisect_rho_star(params: ProblemParams, nl: Nonlinearity, bracket0: tuple,
                    iters: int, cfg: SolverConfig,
                    gn_constant: float | None = None) -> ThresholdResult:
    """Log-midpoint bisection of the zero/negative transition of m(rho).

    The endpoint statuses are verified first; every sample is recorded.
    The final bracket width shrinks by 2^-iters in log scale.
    """
    lo, hi = bracket0
    if not 0 < lo < hi:
        raise ConfigError(f"invalid bracket {bracket0}")
    samples = []

    m_lo, st_lo = estimate_m(params, nl, lo, cfg)
    samples.append((lo, m_lo, st_lo))
    m_hi, st_hi = estimate_m(params, nl, hi, cfg)
    samples.append((hi, m_hi, st_hi))
    if st_lo != STATUS_ZERO or st_hi == STATUS_ZERO:
        raise ConfigError(
            f"bracket statuses must be (zero, negative/unbounded), "
            f"got ({st_lo}, {st_hi})"
        )

    for _ in range(iters):
        mid = math.exp(0.5 * (math.log(lo) + math.log(hi)))
        m_mid, st_mid = estimate_m(params, nl, mid, cfg)
        samples.append((mid, m_mid, st_mid))
        if st_mid == STATUS_ZERO:
            lo = mid
        else:
            hi = mid

    bounds = {}
    if gn_constant is not None and nl.family != "custom":
        from .gn import closed_form_rho

        g = nl.growth_limits()
        bounds["eta0_bound"] = closed_form_rho(
            gn_constant, g.eta_lower_0, params.N, params.s)
        bounds["etaInf_bound"] = closed_form_rho(
            gn_constant, g.eta_bar_inf, params.N, params.s)
    samples.sort(key=lambda t: t[0])
    return ThresholdResult(
        rho_star_bracket=(lo, hi),
        m_samples=samples,
        closed_form_bounds=bounds,
    )


def _feasible_amplitude(u: Field, nl: Nonlinearity, sigma: float) -> float | None:
    """Smallest amplitude c in a bracket with int F(c u) = sigma, if any."""
    vol = u.params.cell_volume

    def pot(c):
        return vol * float(np.sum(nl.F(c * u.samples))) - sigma

    cs = np.geomspace(1e-3, 1e3, 61)
    vals = [pot(c) for c in cs]
    for i in range(len(cs) - 1):
        if vals[i] < 0 <= vals[i + 1] or vals[i] >= 0 > vals[i + 1]:
            lo, hi = sorted((cs[i], cs[i + 1]))
            try:
                return float(brentq(pot, lo, hi, xtol=1e-12, rtol=1e-12))
            except ValueError:
                continue
    return None


def _weighted_cost(u: Field, params: ProblemParams) -> float:
    """[u]^(N/s) |u|_2^2, the scale-free part of the threshold bound."""
    semi = ds_plus_hardy(u.samples, params)
    return semi ** (params.N / (2.0 * params.s)) * mass(u)


def estimate_rho_F(params: ProblemParams, nl: Nonlinearity, sigma_grid,
                   cfg: SolverConfig, extra_seeds: list | None = None) -> float:
    """Upper bound for the threshold via feasible bumps with int F >= sigma.

    For every sigma the inner minimum of [u]^(N/s) |u|_2^2 subject to a
    potential level is searched over a two-parameter family (amplitude and
    dilation) around plateau-bump and optional seed profiles; the result is
    min over sigma of (1/(2 sigma))^(N/(2s)) times that inner value.  An
    upper bound only: the inner infimum is not certified.
    """
    sigma_grid = sorted(float(s) for s in sigma_grid)
    if not sigma_grid or sigma_grid[0] <= 0:
        raise ConfigError("sigma_grid must contain positive values")
    t_star = find_positive_level(nl)  # raises if F never positive

    profiles = [deterministic_bump(params, nl, t_star=t_star)]
    if extra_seeds:
        profiles.extend(extra_seeds)
    rng = np.random.default_rng(cfg.seed)
    profiles.append(gaussian_start(params, rng))

    dilations = [0.5, 1.0 / math.sqrt(2.0), 1.0, math.sqrt(2.0), 2.0]
    best = math.inf
    for sigma in sigma_grid:
        inner = math.inf
        for prof in profiles:
            for t in dilations:
                try:
                    cand = dilate(prof, t)
                except ResolutionError:
                    continue
                c = _feasible_amplitude(cand, nl, sigma)
                if c is None:
                    continue
                scaled = Field(params, c * cand.samples)
                inner = min(inner, _weighted_cost(scaled, params))
        if math.isfinite(inner):
            val = (0.5 / sigma) ** (params.N / (2.0 * params.s)) * inner
            best = min(best, val)
    if not math.isfinite(best):
        raise NumericsError("F never positive on sampled range")
    return best


def subadditivity_check(params: ProblemParams, nl: Nonlinearity, rho_pairs,
                        cfg: SolverConfig, tol: float = 1e-6) -> list:
    """Margins of m(r1 + r2) <= m(r1) + m(r2) + tol over sampled pairs."""
    report = []
    cache = {}

    def m_of(rho):
        if rho not in cache:
            cache[rho] = estimate_m(params, nl, rho, cfg)
        return cache[rho]

    for r1, r2 in rho_pairs:
        m1, s1 = m_of(r1)
        m2, s2 = m_of(r2)
        m12, s12 = m_of(r1 + r2)
        margin = (m1 + m2 + tol) - m12
        report.append({
            "rho1": r1, "rho2": r2,
            "m1": m1, "m2": m2, "m12": m12,
            "status12": s12,
            "margin": margin,
            "holds": bool(margin >= 0.0 or s12 == STATUS_UNBOUNDED),
        })
    return report


def suggest_gamma_star(params: ProblemParams, nl: Nonlinearity, rho: float,
                       C_two_sharp: float) -> float:
    """A seminorm barrier level for the local-minimization mode.

    For families with F(t) <= eta_bar_0 |t|^(2#) globally, the coercivity
    bound below the barrier holds for every level, and the scale is set by
    the interpolation constant; otherwise the level absorbs the higher-order
    remainder sampled on a bounded range.  The paper-side constant is not
    constructive; the returned value is reported, not claimed optimal.
    """
    g = nl.growth_limits()
    eta0 = g.eta_bar_0
    if not math.isfinite(eta0) or eta0 <= 0:
        raise ConfigError("gamma_star suggestion needs finite positive eta_bar_0")
    margin = 0.5 - C_two_sharp * eta0 * rho ** (2 * params.s / params.N)
    if margin <= 0:
        raise ConfigError("rho too large: no coercive window below the barrier")
    ts = np.geomspace(1e-3, 1e3, 513)
    rem = nl.F(ts) - eta0 * ts**g.two_sharp
    if np.all(rem <= 1e-12 * (1 + np.abs(nl.F(ts)))):
        # remainder-free family: any level works; pick the natural scale
        return float(rho ** (1.0 - 2 * params.s / params.N))
    if params.N <= 2 * params.s:
        raise ConfigError(
            "gamma_star suggestion implemented only for remainder-free "
            "families when N <= 2s"
        )
    # Sobolev-remainder route: F <= eta0 |t|^(2#) + C_eps |t|^(2*)
    two_star = params.two_star
    c_eps = float(np.max(rem / ts**two_star))
    if c_eps <= 0:
        return float(rho ** (1.0 - 2 * params.s / params.N))
    gamma = (margin / (2.0 * c_eps)) ** (1.0 / (two_star - 2.0)) / 4.0
    return float(gamma)
