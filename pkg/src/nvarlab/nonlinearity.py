"""Nonlinearity families (f, F) with analytically known growth limits.

Each family is odd in f with exact antiderivative F, F(0) = 0.  Growth is
measured against the mass-critical power 2# = 2 + 4s/N, so every family is
bound to a dimension pair (N, s) at construction.  Only polynomial-growth
families ship; exponential (Moser-Trudinger) nonlinearities are out of scope.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

PURE_POWER = "pure_power"
MASS_CRITICAL = "mass_critical_power"
MIN_FAMILY = "min_family"
DIFFERENCE_FAMILY = "difference_family"
CUSTOM = "custom"

FAMILIES = (PURE_POWER, MASS_CRITICAL, MIN_FAMILY, DIFFERENCE_FAMILY, CUSTOM)

# ah_dichotomy outcomes
F_BELOW = "F_below"  # f(t) t - 2# F(t) > 0 everywhere sampled
F_ABOVE = "F_above"  # f(t) t - 2# F(t) < 0 everywhere sampled
MIXED = "mixed"


@dataclass(frozen=True)
class GrowthData:
    """The four eta limits of F against |t|^(2#), plus the two exponents.

    ``eta_bar_0`` / ``eta_bar_inf`` are limsups of F_+(t)/|t|^(2#) at 0 and
    infinity; ``eta_lower_0`` uses F_+ at 0 and ``eta_lower_inf`` uses F
    itself at infinity.  Extended reals (math.inf allowed).
    """

    eta_bar_0: float
    eta_bar_inf: float
    eta_lower_0: float
    eta_lower_inf: float
    two_sharp: float
    two_star: float


def moser_trudinger_alpha(N: int) -> float:
    """Sharp exponential-growth constant N (2 pi)^N / omega_{N-1}.

    omega_{N-1} is the (N-1)-dimensional measure of the unit sphere.
    Documented constant for the N = 2s regime; no operation consumes it.
    """
    omega = 2.0 * math.pi ** (N / 2) / math.gamma(N / 2)
    return N * (2.0 * math.pi) ** N / omega


def _two_sharp(N: int, s: float) -> float:
    return 2.0 + 4.0 * s / N


def _two_star(N: int, s: float) -> float:
    return math.inf if N <= 2 * s else 2.0 * N / (N - 2.0 * s)


@dataclass(frozen=True)
class Nonlinearity:
    """A tagged (f, F) family bound to dimensions (N, s).

    Use the classmethod constructors; ``p`` is the family exponent where
    applicable and ``table`` holds (t, f(t)) rows for the custom family.
    """

    family: str
    N: int
    s: float
    p: float | None = None
    table: np.ndarray | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown nonlinearity family {self.family!r}")
        two_star = _two_star(self.N, self.s)
        if self.family == MASS_CRITICAL:
            sharp = _two_sharp(self.N, self.s)
            if self.p is None:
                object.__setattr__(self, "p", sharp)
            elif self.p != sharp:
                raise ConfigError(
                    f"mass_critical_power has fixed exponent {sharp}, got {self.p}"
                )
        if self.family == PURE_POWER:
            if self.p is None or not 2.0 < self.p < two_star:
                raise ConfigError(
                    f"pure_power exponent must lie in (2, {two_star}), got {self.p}"
                )
        elif self.family in (MIN_FAMILY, DIFFERENCE_FAMILY):
            lo = _two_sharp(self.N, self.s)
            if self.p is None or not lo < self.p < two_star:
                raise ConfigError(
                    f"{self.family} exponent must lie in ({lo}, {two_star}), "
                    f"got {self.p}"
                )
        elif self.family == CUSTOM:
            if self.table is None or self.table.ndim != 2 or self.table.shape[1] != 2:
                raise ConfigError("custom family needs a two-column (t, f) table")
        self._check_growth()

    # constructors -------------------------------------------------------

    @classmethod
    def pure_power(cls, p: float, N: int, s: float) -> "Nonlinearity":
        return cls(PURE_POWER, N, s, p=p)

    @classmethod
    def mass_critical(cls, N: int, s: float) -> "Nonlinearity":
        return cls(MASS_CRITICAL, N, s, p=_two_sharp(N, s))

    @classmethod
    def min_family(cls, p: float, N: int, s: float) -> "Nonlinearity":
        return cls(MIN_FAMILY, N, s, p=p)

    @classmethod
    def difference_family(cls, p: float, N: int, s: float) -> "Nonlinearity":
        return cls(DIFFERENCE_FAMILY, N, s, p=p)

    @classmethod
    def custom(cls, table: np.ndarray, N: int, s: float) -> "Nonlinearity":
        table = np.asarray(table, dtype=np.float64)
        order = np.argsort(table[:, 0])
        return cls(CUSTOM, N, s, table=table[order])

    @classmethod
    def from_csv(cls, path, N: int, s: float) -> "Nonlinearity":
        return cls.custom(np.loadtxt(path, delimiter=",", ndmin=2), N, s)

    # exponents ----------------------------------------------------------

    @property
    def two_sharp(self) -> float:
        return _two_sharp(self.N, self.s)

    @property
    def two_star(self) -> float:
        return _two_star(self.N, self.s)

    # evaluation ---------------------------------------------------------

    def f(self, t):
        """Pointwise nonlinearity; odd and continuous."""
        t = np.asarray(t, dtype=np.float64)
        a = np.abs(t)
        if self.family == PURE_POWER or self.family == MASS_CRITICAL:
            return a ** (self.p - 2) * t
        if self.family == MIN_FAMILY:
            return np.minimum(a ** (self.p - 2), a ** (4 * self.s / self.N)) * t
        if self.family == DIFFERENCE_FAMILY:
            return (a ** (4 * self.s / self.N) - a ** (self.p - 2)) * t
        # custom table: clamp out-of-range arguments with a warning
        ts, fs = self.table[:, 0], self.table[:, 1]
        if np.any(t < ts[0]) or np.any(t > ts[-1]):
            warnings.warn("custom nonlinearity evaluated outside table range; clamped")
        return np.interp(t, ts, fs)

    def F(self, t):
        """Exact antiderivative of f with F(0) = 0 (closed form per family)."""
        t = np.asarray(t, dtype=np.float64)
        a = np.abs(t)
        if self.family == PURE_POWER or self.family == MASS_CRITICAL:
            return a**self.p / self.p
        q = self.two_sharp
        if self.family == MIN_FAMILY:
            inner = a**self.p / self.p
            outer = 1.0 / self.p - 1.0 / q + a**q / q
            return np.where(a <= 1.0, inner, outer)
        if self.family == DIFFERENCE_FAMILY:
            return a**q / q - a**self.p / self.p
        # custom: cumulative trapezoid of the table from 0
        return self._custom_F(t)

    def _custom_F(self, t):
        ts, fs = self.table[:, 0], self.table[:, 1]
        dense = np.linspace(ts[0], ts[-1], 4097)
        vals = np.interp(dense, ts, fs)
        cumul = np.concatenate(
            [[0.0], np.cumsum((vals[1:] + vals[:-1]) / 2 * np.diff(dense))]
        )
        i0 = np.searchsorted(dense, 0.0)
        cumul -= np.interp(0.0, dense, cumul)
        return np.interp(np.clip(t, ts[0], ts[-1]), dense, cumul)

    # growth classification ----------------------------------------------

    def growth_limits(self) -> GrowthData:
        """Closed-form eta limits; errors for the custom family."""
        if self.family == CUSTOM:
            raise ConfigError("limits must be supplied for custom nonlinearities")
        q = self.two_sharp
        if self.family == MASS_CRITICAL:
            v = 1.0 / q
            return GrowthData(v, v, v, v, q, self.two_star)
        if self.family == PURE_POWER:
            if self.p < q:
                at0, atinf = math.inf, 0.0
            elif self.p == q:
                at0 = atinf = 1.0 / q
            else:
                at0, atinf = 0.0, math.inf
            return GrowthData(at0, atinf, at0, atinf, q, self.two_star)
        if self.family == MIN_FAMILY:
            # F ~ |t|^p / p at 0 (p > 2#) and |t|^q / q at infinity
            return GrowthData(0.0, 1.0 / q, 0.0, 1.0 / q, q, self.two_star)
        # difference family: F ~ |t|^q / q at 0; F -> -inf at infinity so
        # the F_+ limsup vanishes while the liminf of F diverges down
        return GrowthData(1.0 / q, 0.0, 1.0 / q, -math.inf, q, self.two_star)

    def classify_dichotomy(self, t_samples=None) -> str:
        """Sign of f(t) t - 2# F(t) over a sample grid avoiding 0.

        Samples where the difference sits below the floating-point
        cancellation floor of its two terms are treated as exact zeros.
        """
        if t_samples is None:
            t_samples = default_dichotomy_samples()
        t = np.asarray(t_samples, dtype=np.float64)
        t = t[t != 0.0]
        ft = self.f(t) * t
        Ft = self.two_sharp * self.F(t)
        g = ft - Ft
        floor = 64.0 * np.finfo(float).eps * (np.abs(ft) + np.abs(Ft)) + 1e-300
        definite = np.abs(g) > floor
        if not np.any(definite):
            return MIXED
        signs = np.sign(g[definite])
        if np.all(signs > 0):
            return F_BELOW
        if np.all(signs < 0):
            return F_ABOVE
        return MIXED

    # construction-time growth check --------------------------------------

    def _check_growth(self):
        """Sample the (f1) growth bound for N > 2s; warn, never reject."""
        if self.family == CUSTOM or self.N <= 2 * self.s:
            return
        t = np.linspace(0.25, 50.0, 200)
        bound = t + t ** (self.two_star - 1.0)
        ratio = np.abs(self.f(t)) / bound
        # a ratio that keeps climbing at the tail signals supercritical growth
        if ratio[-1] > 4.0 * np.max(ratio[:100]):
            warnings.warn(
                f"{self.family} appears to violate the subcritical growth bound"
            )


def default_dichotomy_samples() -> np.ndarray:
    """Dense logarithmic sample grid on both sides of 0."""
    pos = np.geomspace(1e-3, 1e3, 513)
    return np.concatenate([-pos[::-1], pos])


def eval_f(nl: Nonlinearity, t):
    return nl.f(t)


def eval_F(nl: Nonlinearity, t):
    return nl.F(t)


def ah_dichotomy(nl: Nonlinearity, t_samples=None) -> str:
    return nl.classify_dichotomy(t_samples)


def growth_limits(nl: Nonlinearity) -> GrowthData:
    return nl.growth_limits()
