"""Periodic-box discretization with spectral fractional operators.

The whole space is truncated to a periodic cube [-L/2, L/2)^N discretized by
``grid_points`` samples per axis.  The first K axes ("y") carry the singular
Hardy weight and are offset by half a cell so that no sample sits on the
axis {y = 0}; the remaining N-K axes ("z") use the plain grid.  All energies
share the quadrature weight h^N, and the transform normalization is fixed so
that Parseval holds with that weight.
"""

from __future__ import annotations

import math
import struct
import warnings
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .errors import ConfigError, NumericsError, ResolutionError

# Guard used when normalizing by a field norm that may vanish.
EPS_MASS = 1e-12


def hardy_constant(K: int, s: float) -> float:
    """Optimal constant in the cylindrical Hardy inequality.

    For K > 2s the weight integral of u^2/|y|^(2s) is bounded by
    (Gamma((K-2s)/4) / (2^s Gamma((K+2s)/4)))^2 times the fractional
    Dirichlet energy.  Undefined at or below the boundary K = 2s.
    """
    if K <= 2 * s:
        raise ConfigError(f"Hardy constant undefined for K={K} <= 2s={2 * s}")
    num = math.gamma((K - 2 * s) / 4)
    den = (2.0**s) * math.gamma((K + 2 * s) / 4)
    return (num / den) ** 2


def hardy_mu_threshold(K: int, s: float) -> float:
    """Lower admissibility bound for mu when K > 2s (a negative number)."""
    return -1.0 / hardy_constant(K, s)


@dataclass(frozen=True)
class ProblemParams:
    """Problem instance: dimensions, fractional order, Hardy coefficient, box.

    Parameters
    ----------
    N : int
        Space dimension, 1 to 3.
    K : int
        Number of Hardy-weighted axes; 2 <= K <= N, or 0 for the plain
        mu = 0 configuration with no y/z split.
    s : float
        Fractional order of the operator, s > 0.
    mu : float
        Hardy coefficient.  Must be >= 0 when K <= 2s and above the
        Hardy threshold when K > 2s.
    box_length : float
        Side length L of the periodic cube.
    grid_points : int
        Samples per axis; even and at least 8 (powers of two recommended).
    """

    N: int
    K: int
    s: float
    mu: float
    box_length: float = 16.0
    grid_points: int = 64

    def __post_init__(self):
        if not 1 <= self.N <= 3:
            raise ConfigError(f"N must be in 1..3, got {self.N}")
        if self.K != 0 and not 2 <= self.K <= self.N:
            raise ConfigError(f"K must be 0 or in 2..N, got K={self.K}, N={self.N}")
        if not self.s > 0:
            raise ConfigError(f"s must be positive, got {self.s}")
        if not self.box_length > 0:
            raise ConfigError(f"box_length must be positive, got {self.box_length}")
        if self.grid_points < 8 or self.grid_points % 2 != 0:
            raise ConfigError(
                f"grid_points must be even and >= 8, got {self.grid_points}"
            )
        if self.K == 0:
            if self.mu != 0.0:
                raise ConfigError("mu must be 0 when K = 0 (no Hardy split)")
        elif self.K <= 2 * self.s:
            if self.mu < 0:
                raise ConfigError(
                    f"mu must be >= 0 when K <= 2s (K={self.K}, s={self.s})"
                )
        else:
            thr = hardy_mu_threshold(self.K, self.s)
            if self.mu <= thr:
                raise ConfigError(
                    f"mu below Hardy threshold {thr:.6g} for K={self.K}, s={self.s}"
                )

    @property
    def h(self) -> float:
        """Grid spacing per axis."""
        return self.box_length / self.grid_points

    @property
    def shape(self) -> tuple:
        return (self.grid_points,) * self.N

    @property
    def cell_volume(self) -> float:
        return self.h**self.N

    @property
    def two_sharp(self) -> float:
        """Mass-critical exponent 2 + 4s/N."""
        return 2.0 + 4.0 * self.s / self.N

    @property
    def two_star(self) -> float:
        """Upper Sobolev exponent; +inf when N <= 2s."""
        if self.N <= 2 * self.s:
            return math.inf
        return 2.0 * self.N / (self.N - 2.0 * self.s)


def axis_coords(params: ProblemParams, axis: int) -> np.ndarray:
    """Sample coordinates along one axis; y-axes are offset by half a cell."""
    n, h, L = params.grid_points, params.h, params.box_length
    j = np.arange(n, dtype=np.float64)
    if axis < params.K:
        return -L / 2 + (j + 0.5) * h
    return -L / 2 + j * h


@lru_cache(maxsize=16)
def _coord_arrays(params: ProblemParams) -> tuple:
    return tuple(axis_coords(params, a) for a in range(params.N))


def meshgrid(params: ProblemParams) -> list:
    """Open (broadcastable) coordinate arrays for all axes."""
    coords = _coord_arrays(params)
    return list(np.meshgrid(*coords, indexing="ij", sparse=True))


@dataclass(frozen=True)
class SpectralMultiplier:
    """|xi|^(2s) on the full discrete wavenumber lattice xi_k = 2 pi k / L."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values))
        self.values.setflags(write=False)


def _wavenumbers_1d(n: int, L: float) -> np.ndarray:
    return 2.0 * np.pi * np.fft.fftfreq(n, d=L / n)


@lru_cache(maxsize=16)
def multiplier(params: ProblemParams) -> SpectralMultiplier:
    """Full-lattice multiplier; exactly zero at xi = 0 and even in xi."""
    n, L = params.grid_points, params.box_length
    k1 = _wavenumbers_1d(n, L)
    xi2 = np.zeros(params.shape)
    for a in range(params.N):
        shape = [1] * params.N
        shape[a] = n
        xi2 = xi2 + (k1**2).reshape(shape)
    vals = xi2**params.s
    vals[(0,) * params.N] = 0.0
    return SpectralMultiplier(vals)


@lru_cache(maxsize=16)
def _rfft_multiplier(params: ProblemParams) -> np.ndarray:
    """Multiplier restricted to the rfftn lattice (last axis halved)."""
    n, L = params.grid_points, params.box_length
    k_full = _wavenumbers_1d(n, L)
    k_half = 2.0 * np.pi * np.fft.rfftfreq(n, d=L / n)
    xi2 = np.zeros(params.shape[:-1] + (n // 2 + 1,))
    for a in range(params.N):
        k1 = k_half if a == params.N - 1 else k_full
        shape = [1] * params.N
        shape[a] = len(k1)
        xi2 = xi2 + (k1**2).reshape(shape)
    vals = xi2**params.s
    vals[(0,) * params.N] = 0.0
    return vals


@lru_cache(maxsize=16)
def _rfft_weights(params: ProblemParams) -> np.ndarray:
    """Multiplicity of each rfftn bin when summing over the full lattice."""
    n = params.grid_points
    w = np.full(n // 2 + 1, 2.0)
    w[0] = 1.0
    w[-1] = 1.0  # Nyquist bin is unpaired for even n
    shape = [1] * params.N
    shape[-1] = n // 2 + 1
    return w.reshape(shape)


@lru_cache(maxsize=16)
def hardy_weight(params: ProblemParams) -> np.ndarray:
    """Pointwise weight 1/|y|^(2s) on the offset grid (requires K >= 2)."""
    if params.K < 2:
        raise ConfigError("Hardy term undefined for mu=0 configuration (K=0)")
    coords = _coord_arrays(params)
    y2 = np.zeros(params.shape)
    for a in range(params.K):
        shape = [1] * params.N
        shape[a] = params.grid_points
        y2 = y2 + (coords[a] ** 2).reshape(shape)
    return y2 ** (-params.s)


def mollified_hardy_weight(params: ProblemParams, eps: float) -> np.ndarray:
    """Optional regularized weight (|y|^2 + eps^2)^(-s)."""
    if params.K < 2:
        raise ConfigError("Hardy term undefined for mu=0 configuration (K=0)")
    coords = _coord_arrays(params)
    y2 = np.zeros(params.shape)
    for a in range(params.K):
        shape = [1] * params.N
        shape[a] = params.grid_points
        y2 = y2 + (coords[a] ** 2).reshape(shape)
    return (y2 + eps**2) ** (-params.s)


@dataclass(frozen=True)
class Field:
    """Real-valued samples on the periodic grid, row-major, y-axes first."""

    params: ProblemParams
    samples: np.ndarray
    g_invariant: bool = False

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.shape != self.params.shape:
            raise ConfigError(
                f"sample shape {arr.shape} does not match grid {self.params.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise NumericsError("field contains non-finite samples")
        if arr.flags.writeable:
            # freeze a private copy so callers cannot mutate shared state
            arr = arr.copy()
            arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    @classmethod
    def zeros(cls, params: ProblemParams) -> "Field":
        return cls(params, np.zeros(params.shape))

    @classmethod
    def from_function(cls, params: ProblemParams, fn, **kw) -> "Field":
        """Sample ``fn(*coords)`` on the grid (open meshgrid arguments)."""
        return cls(params, np.asarray(fn(*meshgrid(params)), dtype=np.float64), **kw)

    def scaled(self, c: float) -> "Field":
        return Field(self.params, c * self.samples, self.g_invariant)


def mass(u: Field) -> float:
    """Discrete squared L2 norm with the h^N quadrature weight."""
    return float(u.params.cell_volume * np.sum(u.samples**2))


def norm_l2(u: Field) -> float:
    return math.sqrt(mass(u))


def lp_norm_pow(u: Field, p: float) -> float:
    """|u|_p^p with the shared quadrature weight."""
    return float(u.params.cell_volume * np.sum(np.abs(u.samples) ** p))


def _check_finite(u: Field):
    if not np.all(np.isfinite(u.samples)):
        raise NumericsError("field contains non-finite samples")


def apply_Ds_squared(u: Field) -> float:
    """Fractional Dirichlet energy: sum over modes of |xi|^(2s) |u_hat|^2.

    Normalized so Parseval reproduces the physical-space quadrature mass
    exactly; equals the continuum integral up to spectral truncation error
    for band-limited fields.
    """
    _check_finite(u)
    p = u.params
    uh = np.fft.rfftn(u.samples)
    acc = np.sum(_rfft_multiplier(p) * _rfft_weights(p) * np.abs(uh) ** 2)
    return float(acc * p.cell_volume / p.grid_points**p.N)


def ds_squared_samples(samples: np.ndarray, params: ProblemParams) -> float:
    """apply_Ds_squared on a raw sample array (optimizer hot path)."""
    uh = np.fft.rfftn(samples)
    acc = np.sum(_rfft_multiplier(params) * _rfft_weights(params) * np.abs(uh) ** 2)
    return float(acc * params.cell_volume / params.grid_points**params.N)


def apply_Ds_operator(samples: np.ndarray, params: ProblemParams) -> np.ndarray:
    """Apply (-Delta)^s to a sample array via the Fourier multiplier."""
    return np.fft.irfftn(
        _rfft_multiplier(params) * np.fft.rfftn(samples), s=params.shape
    )


def hardy_weight_integral(u: Field) -> float:
    """Midpoint-rule integral of u^2 / |y|^(2s) on the offset grid.

    The caller multiplies by mu.  Errors out for K = 0 where the weight
    is undefined.
    """
    _check_finite(u)
    w = hardy_weight(u.params)
    return float(u.params.cell_volume * np.sum(u.samples**2 * w))


@lru_cache(maxsize=32)
def _dilation_matrix(params: ProblemParams, axis: int, t: float) -> np.ndarray:
    """Trig-interpolant evaluation matrix at the scaled points of one axis.

    The DFT of the samples reconstructs u(x0 + theta) = (1/n) sum_k
    u_hat_k exp(i xi_k theta), so evaluation at t*x_j uses the offset
    theta_j = t*x_j - x0.
    """
    n, L = params.grid_points, params.box_length
    x = axis_coords(params, axis)
    k = _wavenumbers_1d(n, L)
    theta = t * x - x[0]
    return np.exp(1j * np.outer(theta, k)) / n


@lru_cache(maxsize=32)
def _dilation_mask_1d(params: ProblemParams, axis: int, t: float) -> np.ndarray:
    """Points whose preimage t*x stays inside the box (zero-extension mask)."""
    x = axis_coords(params, axis)
    L = params.box_length
    return (np.abs(t * x) <= L / 2).astype(np.float64)


def dilate(u: Field, t: float) -> Field:
    """Mass-preserving dilation t * u := t^(N/2) u(t .).

    Realized by evaluating the trigonometric interpolant of ``u`` at the
    scaled sample points.  For t > 1 the preimage may leave the box; those
    samples are zero-extended (exact for localized fields).  Exact for
    band-limited fields when t <= 1 or t is an integer within band.
    """
    if not t > 0:
        raise ConfigError(f"dilation factor must be positive, got {t}")
    p = u.params
    if t >= p.grid_points / 2:
        raise ResolutionError("dilation exceeds resolution")
    if t == 1.0:
        return Field(p, u.samples.copy(), u.g_invariant)
    c = np.fft.fftn(u.samples)
    for a in range(p.N):
        E = _dilation_matrix(p, a, float(t))
        c = np.moveaxis(np.tensordot(E, c, axes=([1], [a])), 0, a)
    out = np.real(c) * t ** (p.N / 2)
    if t > 1.0:
        for a in range(p.N):
            shape = [1] * p.N
            shape[a] = p.grid_points
            out = out * _dilation_mask_1d(p, a, float(t)).reshape(shape)
    return Field(p, out, u.g_invariant)


def _group_images(samples: np.ndarray, params: ProblemParams) -> list:
    """Sample arrays of u(g.) for the fixed symmetry-check group elements.

    Reflections of every y-axis map the offset grid onto itself; for K = 2
    the quarter-turn in the (y1, y2) plane does as well.
    """
    images = []
    for a in range(params.K):
        images.append(np.flip(samples, axis=a))
    if params.K == 2:
        # (y1, y2) -> (-y2, y1): v[j1, j2, ...] = u[n-1-j2, j1, ...]
        perm = (1, 0) + tuple(range(2, params.N))
        images.append(np.transpose(np.flip(samples, axis=0), perm))
    return images


def symmetry_residual(u: Field) -> float:
    """Largest relative L2 deviation of u from its images under the group."""
    p = u.params
    if p.K < 2:
        raise ConfigError("symmetry residual requires K >= 2")
    base = norm_l2(u)
    denom = max(base, EPS_MASS)
    worst = 0.0
    for img in _group_images(u.samples, p):
        d = math.sqrt(p.cell_volume * np.sum((img - u.samples) ** 2))
        worst = max(worst, d / denom)
    return worst


def mark_g_invariant(u: Field, tol: float = 1e-6) -> Field:
    """Return a copy flagged G-invariant after verifying the residual."""
    res = symmetry_residual(u)
    if res > tol:
        raise NumericsError(f"symmetry residual {res:.3e} exceeds {tol:.1e}")
    return Field(u.params, u.samples, g_invariant=True)


# NVF1 binary field format ----------------------------------------------------

_NVF1_MAGIC = b"NVF1"
_NVF1_HEADER = struct.Struct("<4sIIdddI")


def write_field(path, u: Field):
    """Write a field in the NVF1 binary format (little endian, row major)."""
    p = u.params
    with open(path, "wb") as fh:
        fh.write(
            _NVF1_HEADER.pack(
                _NVF1_MAGIC, p.N, p.K, p.s, p.mu, p.box_length, p.grid_points
            )
        )
        fh.write(np.ascontiguousarray(u.samples, dtype="<f8").tobytes())


def read_field(path) -> Field:
    """Read a field written by :func:`write_field`."""
    with open(path, "rb") as fh:
        header = fh.read(_NVF1_HEADER.size)
        if len(header) < _NVF1_HEADER.size:
            raise ConfigError(f"{path}: truncated NVF1 header")
        magic, N, K, s, mu, L, n = _NVF1_HEADER.unpack(header)
        if magic != _NVF1_MAGIC:
            raise ConfigError(f"{path}: bad magic {magic!r}")
        params = ProblemParams(N=N, K=K, s=s, mu=mu, box_length=L, grid_points=n)
        raw = fh.read(8 * n**N)
        if len(raw) < 8 * n**N:
            raise ConfigError(f"{path}: truncated NVF1 payload")
        samples = np.frombuffer(raw, dtype="<f8").reshape(params.shape).copy()
    return Field(params, samples)
