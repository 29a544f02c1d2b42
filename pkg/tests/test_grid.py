import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nvarlab.errors import ConfigError, NumericsError, ResolutionError
from nvarlab.grid import (
    Field,
    ProblemParams,
    apply_Ds_squared,
    axis_coords,
    dilate,
    hardy_constant,
    hardy_mu_threshold,
    hardy_weight_integral,
    mark_g_invariant,
    mass,
    meshgrid,
    multiplier,
    read_field,
    symmetry_residual,
    write_field,
)

from oracles import fsum_quadrature, gradient_squared_fd


def params_1d(n=128, L=16.0, s=1.0):
    return ProblemParams(N=1, K=0, s=s, mu=0.0, box_length=L, grid_points=n)


def params_2d(n=64, L=16.0, s=1.0, mu=0.0, K=2):
    return ProblemParams(N=2, K=K, s=s, mu=mu, box_length=L, grid_points=n)


class TestProblemParams:
    def test_valid_ranges(self):
        ProblemParams(N=3, K=2, s=1.0, mu=1.0)
        ProblemParams(N=1, K=0, s=0.5, mu=0.0)

    @pytest.mark.parametrize("kw", [
        dict(N=4, K=2, s=1.0, mu=0.0),
        dict(N=2, K=1, s=1.0, mu=0.0),
        dict(N=2, K=3, s=1.0, mu=0.0),
        dict(N=2, K=2, s=-1.0, mu=0.0),
        dict(N=2, K=2, s=1.0, mu=0.0, grid_points=7),
        dict(N=2, K=2, s=1.0, mu=0.0, grid_points=10, box_length=-2.0),
        dict(N=2, K=0, s=1.0, mu=0.5),
    ])
    def test_invalid_rejected(self, kw):
        with pytest.raises(ConfigError):
            ProblemParams(**{**dict(box_length=16.0, grid_points=16), **kw})

    def test_mu_threshold_below_hardy(self):
        # K=3, s=1: threshold is -1/4 from the Gamma identity
        assert hardy_mu_threshold(3, 1.0) == pytest.approx(-0.25, rel=1e-12)
        with pytest.raises(ConfigError):
            ProblemParams(N=3, K=3, s=1.0, mu=-5.0)
        ProblemParams(N=3, K=3, s=1.0, mu=-0.2)  # admissible

    def test_mu_nonnegative_when_K_le_2s(self):
        with pytest.raises(ConfigError):
            ProblemParams(N=2, K=2, s=1.0, mu=-0.1)

    def test_exponents(self):
        p = params_2d()
        assert p.two_sharp == 4.0
        assert p.two_star == math.inf
        p3 = ProblemParams(N=3, K=2, s=1.0, mu=0.0)
        assert p3.two_star == pytest.approx(6.0)


class TestField:
    def test_shape_mismatch(self):
        p = params_1d()
        with pytest.raises(ConfigError):
            Field(p, np.zeros(16))

    def test_nonfinite_rejected(self):
        p = params_1d(n=16)
        bad = np.zeros(16)
        bad[3] = np.nan
        with pytest.raises(NumericsError):
            Field(p, bad)

    def test_immutability(self):
        p = params_1d(n=16)
        u = Field.zeros(p)
        with pytest.raises(ValueError):
            u.samples[0] = 1.0


class TestDsSquared:
    def test_zero_field(self):
        assert apply_Ds_squared(Field.zeros(params_1d())) == 0.0

    def test_single_mode_closed_form(self):
        # cos(2 pi x / L): multiplier (2 pi/L)^2, squared-norm L/2
        p = params_1d()
        x = meshgrid(p)[0]
        u = Field(p, np.cos(2 * np.pi * x / p.box_length))
        expected = (2 * np.pi / p.box_length) ** 2 * p.box_length / 2
        assert apply_Ds_squared(u) == pytest.approx(expected, rel=1e-13)

    def test_matches_finite_differences_2d(self):
        p = params_2d(n=128)
        xy = meshgrid(p)
        u = Field(p, np.exp(-(xy[0] ** 2 + xy[1] ** 2) / 2))
        spectral = apply_Ds_squared(u)
        fd = gradient_squared_fd(u.samples, p.h)
        assert fd == pytest.approx(spectral, rel=0.01)

    def test_homogeneity_exact_power_of_two(self):
        p = params_2d(n=32)
        xy = meshgrid(p)
        u = Field(p, np.exp(-(xy[0] ** 2 + xy[1] ** 2) / 3) * (1 + 0.5 * np.sin(xy[0])))
        assert apply_Ds_squared(u.scaled(2.0)) == 4.0 * apply_Ds_squared(u)

    def test_homogeneity_generic_scalar(self):
        p = params_2d(n=32)
        xy = meshgrid(p)
        u = Field(p, np.exp(-(xy[0] ** 2 + xy[1] ** 2) / 3))
        a = apply_Ds_squared(u.scaled(3.0))
        assert a == pytest.approx(9.0 * apply_Ds_squared(u), rel=1e-13)

    @given(seed=st.integers(0, 2**32 - 1))
    def test_parseval(self, seed):
        p = params_1d(n=64)
        u = Field(p, np.random.default_rng(seed).standard_normal(64))
        phys = mass(u)
        uh = np.fft.fft(u.samples)
        spec = p.cell_volume * float(np.sum(np.abs(uh) ** 2)) / p.grid_points
        assert spec == pytest.approx(phys, rel=1e-12)

    def test_constants_have_zero_energy(self):
        p = params_2d(n=32)
        u = Field(p, np.full(p.shape, 2.5))
        assert apply_Ds_squared(u) == pytest.approx(0.0, abs=1e-12)


class TestMultiplier:
    def test_zero_at_origin_and_even(self):
        p = params_2d(n=16, s=0.7)
        vals = multiplier(p).values
        assert vals[0, 0] == 0.0
        for a in range(2):
            assert np.allclose(vals, np.roll(np.flip(vals, axis=a), 1, axis=a))
        assert np.all(vals >= 0)


class TestHardyWeight:
    def test_zero_field(self):
        p = params_2d(mu=0.5)
        assert hardy_weight_integral(Field.zeros(p)) == 0.0

    def test_requires_hardy_axes(self):
        p = params_1d()
        with pytest.raises(ConfigError):
            hardy_weight_integral(Field(p, np.ones(p.shape)))

    def test_offset_grid_avoids_origin(self):
        p = params_2d(mu=1.0)
        y = axis_coords(p, 0)
        assert np.min(np.abs(y)) >= p.h / 2 - 1e-15

    def test_matches_fsum_quadrature_away_from_axis(self):
        p = ProblemParams(N=2, K=2, s=0.5, mu=0.3, box_length=16.0, grid_points=64)
        xy = meshgrid(p)
        r = np.sqrt(xy[0] ** 2 + xy[1] ** 2)
        u = Field(p, np.exp(-((r - 4.0) / 0.8) ** 2))
        direct = fsum_quadrature(u.samples ** 2 * (r ** -(2 * p.s)), p.cell_volume)
        assert hardy_weight_integral(u) == pytest.approx(direct, rel=1e-10)

    def test_gaussian_hardy_ratio(self):
        # K = N = 3, s = 1: optimal constant 4 from Gamma(5/4) = Gamma(1/4)/4
        p = ProblemParams(N=3, K=3, s=1.0, mu=0.0, box_length=16.0,
                          grid_points=48)
        coords = meshgrid(p)
        rr2 = sum(c ** 2 for c in coords)
        u = Field(p, np.exp(-rr2 / 2))
        ratio = hardy_weight_integral(u) / apply_Ds_squared(u)
        assert ratio <= 4.0
        assert hardy_constant(3, 1.0) == pytest.approx(4.0, rel=1e-12)


class TestDilate:
    def setup_method(self):
        # wide enough box that the spread field stays localized, fine enough
        # grid that the squeezed field stays band-limited
        self.p = params_2d(n=128, L=20.0, K=2, mu=0.5)
        xy = meshgrid(self.p)
        self.u = Field(self.p, np.exp(-(xy[0] ** 2 + xy[1] ** 2) / 2))

    def test_identity_bit_equal(self):
        v = dilate(self.u, 1.0)
        assert np.array_equal(v.samples, self.u.samples)

    @pytest.mark.parametrize("t", [0.5, 2.0])
    def test_mass_invariance(self, t):
        assert mass(dilate(self.u, t)) == pytest.approx(mass(self.u), rel=1e-8)

    @pytest.mark.parametrize("s,tol", [(1.0, 1e-6), (2.0, 1e-6)])
    def test_ds_scaling_integer_s(self, s, tol):
        p = params_2d(n=128, L=20.0, s=s)
        xy = meshgrid(p)
        u = Field(p, np.exp(-(xy[0] ** 2 + xy[1] ** 2) / 2))
        base = apply_Ds_squared(u)
        for t in (0.5, 2.0):
            val = apply_Ds_squared(dilate(u, t))
            assert val == pytest.approx(t ** (2 * s) * base, rel=tol)

    def test_ds_scaling_fractional_s_box_limited(self):
        # the |xi|^(2s) corner at the origin makes the lattice sum accurate
        # only to O((2 pi / L)^2) for fractional s; the scaling identity
        # holds at that level, not at spectral accuracy
        p = params_2d(n=64, s=0.5)
        xy = meshgrid(p)
        u = Field(p, np.exp(-(xy[0] ** 2 + xy[1] ** 2) / 2))
        ratio = apply_Ds_squared(dilate(u, 2.0)) / apply_Ds_squared(u)
        assert ratio == pytest.approx(2.0, rel=0.05)

    def test_roundtrip(self):
        v = dilate(dilate(self.u, 2.0), 0.5)
        err = math.sqrt(mass(Field(self.p, v.samples - self.u.samples)))
        assert err <= 1e-8 * math.sqrt(mass(self.u))

    def test_arbitrary_factor_preserves_mass(self):
        assert mass(dilate(self.u, 1.37)) == pytest.approx(mass(self.u), rel=1e-7)

    def test_resolution_error(self):
        with pytest.raises(ResolutionError):
            dilate(self.u, 40.0)

    def test_invalid_factor(self):
        with pytest.raises(ConfigError):
            dilate(self.u, -1.0)


class TestSymmetryResidual:
    def test_radial_gaussian(self):
        p = params_2d(mu=1.0)
        xy = meshgrid(p)
        u = Field(p, np.exp(-(xy[0] ** 2 + xy[1] ** 2) / 2))
        assert symmetry_residual(u) <= 1e-12

    def test_odd_function_large_residual(self):
        p = params_2d(mu=1.0)
        xy = meshgrid(p)
        u = Field(p, xy[0] * np.exp(-(xy[0] ** 2 + xy[1] ** 2) / 2))
        assert symmetry_residual(u) >= 0.1

    def test_zero_field_guarded(self):
        p = params_2d(mu=1.0)
        assert symmetry_residual(Field.zeros(p)) == 0.0

    def test_rotation_detects_axis_anisotropy(self):
        p = params_2d(mu=1.0)
        xy = meshgrid(p)
        u = Field(p, np.exp(-(xy[0] ** 2 / 1.0 + xy[1] ** 2 / 4.0)))
        assert symmetry_residual(u) > 0.05  # reflection-symmetric but not rotation

    def test_requires_hardy_axes(self):
        with pytest.raises(ConfigError):
            symmetry_residual(Field.zeros(params_1d()))

    def test_mark_g_invariant(self):
        p = params_2d(mu=1.0)
        xy = meshgrid(p)
        u = Field(p, np.exp(-(xy[0] ** 2 + xy[1] ** 2)))
        assert mark_g_invariant(u).g_invariant
        bad = Field(p, xy[0] * np.exp(-(xy[0] ** 2 + xy[1] ** 2)))
        with pytest.raises(NumericsError):
            mark_g_invariant(bad)


class TestNVF1:
    def test_roundtrip(self, rng, tmp_path):
        p = ProblemParams(N=2, K=2, s=0.75, mu=0.25, box_length=12.0,
                          grid_points=16)
        u = Field(p, rng.standard_normal(p.shape))
        path = tmp_path / "field.nvf1"
        write_field(path, u)
        v = read_field(path)
        assert v.params == p
        assert np.array_equal(v.samples, u.samples)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.nvf1"
        path.write_bytes(b"JUNK" + b"\x00" * 64)
        with pytest.raises(ConfigError):
            read_field(path)

    def test_truncated_payload(self, tmp_path):
        p = ProblemParams(N=1, K=0, s=1.0, mu=0.0, grid_points=16)
        u = Field(p, np.ones(16))
        path = tmp_path / "trunc.nvf1"
        write_field(path, u)
        data = path.read_bytes()
        path.write_bytes(data[:-8])
        with pytest.raises(ConfigError):
            read_field(path)

    @given(seed=st.integers(0, 2**31 - 1))
    def test_roundtrip_random(self, seed):
        import tempfile

        p = ProblemParams(N=1, K=0, s=0.5, mu=0.0, grid_points=8)
        u = Field(p, np.random.default_rng(seed).standard_normal(8))
        with tempfile.NamedTemporaryFile(suffix=".nvf1") as tmp:
            write_field(tmp.name, u)
            assert np.array_equal(read_field(tmp.name).samples, u.samples)
