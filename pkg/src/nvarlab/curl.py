"""Cylindrically symmetric vector fields from scalar profiles.

The ansatz U = (u/r)(-x2, x1, 0, ...) with G-invariant u is divergence free
and satisfies |U| = |u| pointwise.  Its curl energy, defined weakly as
int |grad U|^2 - (div U)^2, reduces to the scalar Dirichlet energy plus the
Hardy-type term int u^2/r^2, which is why the scalar configuration
(s = 1, mu = 1, K = 2) represents the vector problem exactly.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericsError
from .grid import (
    Field,
    ProblemParams,
    _coord_arrays,
    apply_Ds_squared,
    hardy_weight_integral,
    mass,
    symmetry_residual,
    write_field,
    read_field,
    _NVF1_HEADER,
    _NVF1_MAGIC,
)
from .energy import potential_integral
from .nonlinearity import Nonlinearity

_NVFV_MAGIC = b"NVFV"
_NVFV_HEADER = struct.Struct("<4sI")


@dataclass(frozen=True)
class VectorField:
    """N real component arrays on the grid; remembers its scalar source."""

    params: ProblemParams
    components: tuple
    source: Field | None = None

    def __post_init__(self):
        if len(self.components) != self.params.N:
            raise ConfigError("component count must equal the dimension")
        comps = []
        for c in self.components:
            arr = np.asarray(c, dtype=np.float64)
            if arr.shape != self.params.shape:
                raise ConfigError("component shape does not match the grid")
            if not np.all(np.isfinite(arr)):
                raise NumericsError("vector field contains non-finite samples")
            if arr.flags.writeable:
                arr = arr.copy()
                arr.setflags(write=False)
            comps.append(arr)
        object.__setattr__(self, "components", tuple(comps))


def vector_mass(U: VectorField) -> float:
    vol = U.params.cell_volume
    return float(vol * sum(np.sum(c**2) for c in U.components))


def lift(u: Field, allow_higher_dim: bool = False,
         symmetry_tol: float = 1e-6) -> VectorField:
    """Build the cylindrical ansatz field from a G-invariant scalar profile."""
    p = u.params
    if p.K != 2:
        raise ConfigError("lift requires the K = 2 cylindrical split")
    if p.N < 3:
        raise ConfigError("lift requires N >= 3")
    if p.N > 3 and not allow_higher_dim:
        raise ConfigError("N > 3 lift requires allow_higher_dim=True")
    if symmetry_residual(u) > symmetry_tol:
        raise ConfigError("lift requires G-invariance")
    coords = _coord_arrays(p)
    shape1 = [1] * p.N
    shape1[0] = p.grid_points
    shape2 = [1] * p.N
    shape2[1] = p.grid_points
    x1 = coords[0].reshape(shape1)
    x2 = coords[1].reshape(shape2)
    r = np.sqrt(x1**2 + x2**2)  # offset grid keeps r > 0
    g = u.samples / r
    comps = [-x2 * g, x1 * g] + [np.zeros(p.shape) for _ in range(p.N - 2)]
    return VectorField(p, tuple(comps), source=u)


def _grad_sq_and_div(U: VectorField):
    """Spectral sum of |grad U_c|^2 and the spectral divergence transform."""
    p = U.params
    n, L = p.grid_points, p.box_length
    kf = 2 * np.pi * np.fft.fftfreq(n, d=L / n)
    kh = 2 * np.pi * np.fft.rfftfreq(n, d=L / n)
    weight = np.full(n // 2 + 1, 2.0)
    weight[0] = 1.0
    weight[-1] = 1.0
    wshape = [1] * p.N
    wshape[-1] = n // 2 + 1
    w = weight.reshape(wshape)
    norm = p.cell_volume / n**p.N

    grad_sq = 0.0
    div_hat = None
    for c_idx, comp in enumerate(U.components):
        ch = np.fft.rfftn(comp)
        for a in range(p.N):
            k1 = kh if a == p.N - 1 else kf
            kshape = [1] * p.N
            kshape[a] = len(k1)
            ka = k1.reshape(kshape)
            grad_sq += float(np.sum(w * np.abs(1j * ka * ch) ** 2)) * norm
            if a == c_idx:
                term = 1j * ka * ch
                div_hat = term if div_hat is None else div_hat + term
    div_sq = float(np.sum(w * np.abs(div_hat) ** 2)) * norm
    return grad_sq, div_sq


def curl_energy(U: VectorField) -> float:
    """Weak curl energy: int |grad U|^2 - (div U)^2, evaluated spectrally."""
    grad_sq, div_sq = _grad_sq_and_div(U)
    return grad_sq - div_sq


def divergence_norm(U: VectorField) -> float:
    """L2 norm of the spectral divergence."""
    return math.sqrt(max(_grad_sq_and_div(U)[1], 0.0))


def gradient_norm(U: VectorField) -> float:
    """L2 norm of the full component-wise gradient."""
    return math.sqrt(max(_grad_sq_and_div(U)[0], 0.0))


def vector_energy(U: VectorField, nl: Nonlinearity) -> float:
    """Constrained energy of a lifted field, via the scalar reduction.

    Requires lift provenance: the nonlinear term is only defined through
    f(|V|) V / |V|, and the scalar reduction (including the quadratic part,
    whose curl form equals the scalar seminorm) avoids 0/0 on the axis.
    """
    if U.source is None:
        raise ConfigError("vector energy requires lifted provenance")
    p = U.params
    if p.s != 1.0 or p.mu != 1.0 or p.K != 2:
        raise ConfigError(
            "vector energy is defined for the curl configuration "
            "(s = 1, mu = 1, K = 2)"
        )
    u = U.source
    quad = apply_Ds_squared(u) + hardy_weight_integral(u)
    return quad / 2.0 - potential_integral(u, nl)


def scalar_quadratic_sum(u: Field) -> float:
    """|grad u|^2 + int u^2/r^2, the scalar side of the curl identity."""
    return apply_Ds_squared(u) + hardy_weight_integral(u)


def write_vector_field(path, U: VectorField):
    """One header with a component count, then N consecutive NVF1 payloads."""
    p = U.params
    with open(path, "wb") as fh:
        fh.write(_NVFV_HEADER.pack(_NVFV_MAGIC, p.N))
        for comp in U.components:
            fh.write(
                _NVF1_HEADER.pack(
                    _NVF1_MAGIC, p.N, p.K, p.s, p.mu, p.box_length, p.grid_points
                )
            )
            fh.write(np.ascontiguousarray(comp, dtype="<f8").tobytes())


def read_vector_field(path) -> VectorField:
    with open(path, "rb") as fh:
        head = fh.read(_NVFV_HEADER.size)
        if len(head) < _NVFV_HEADER.size:
            raise ConfigError(f"{path}: truncated NVFV header")
        magic, count = _NVFV_HEADER.unpack(head)
        if magic != _NVFV_MAGIC:
            raise ConfigError(f"{path}: bad magic {magic!r}")
        comps = []
        params = None
        for _ in range(count):
            header = fh.read(_NVF1_HEADER.size)
            m2, N, K, s, mu, L, n = _NVF1_HEADER.unpack(header)
            if m2 != _NVF1_MAGIC:
                raise ConfigError(f"{path}: bad component magic")
            params = ProblemParams(N=N, K=K, s=s, mu=mu, box_length=L,
                                   grid_points=n)
            raw = fh.read(8 * n**N)
            comps.append(np.frombuffer(raw, dtype="<f8").reshape(params.shape).copy())
    return VectorField(params, tuple(comps))
