"""Problem-specification layer: validation, partition functions, Gibbs laws."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from noneq import (
    BrownianSpec,
    ConfigError,
    Constant,
    DiffusionFactor,
    GridDensity1D,
    LangevinSpec,
    Linear,
    NoCirculation,
    QuadraticPotential,
    RadialLinearCirculation,
    RotationCirculation,
    SpecError,
    TanhPerturbedPotential,
    Sine,
    free_energy_difference,
    gaussian_kl,
    gibbs_gaussian,
    gibbs_grid_1d,
    partition_function,
    relative_entropy_grid,
    spec_from_config,
    validate_spec,
)


def quadratic_spec(k0=1.0, k1=None, beta=1.0, horizon=1.0, dimension=1, **kw):
    sched = Constant(k0) if k1 is None else Linear(k0, k1, horizon)
    pot = QuadraticPotential(stiffness=sched, dimension=dimension)
    return BrownianSpec(potential=pot, beta=beta, horizon=horizon, **kw)


class TestValidateSpec:
    def test_zero_circulation_passes_with_zero_residual(self):
        report = validate_spec(quadratic_spec())
        assert report.ok
        assert report.max_stationarity_residual == 0.0

    def test_rotation_on_radial_well_passes(self):
        """An antisymmetric rotation is divergence-free and orthogonal to a
        radial gradient, so the Gibbs measure stays stationary."""
        spec = quadratic_spec(dimension=2, circulation=RotationCirculation(rate=1.3))
        report = validate_spec(spec)
        assert report.ok
        assert report.max_stationarity_residual <= 1e-12

    def test_radial_circulation_rejected_with_exact_residual(self):
        # div(x e^{-V}) = e^{-x^2/2} (1 - x^2) for V = x^2/2, beta = 1; the
        # probe grid contains the origin where |...| peaks at exactly 1.
        spec = quadratic_spec(circulation=RadialLinearCirculation(rate=1.0))
        report = validate_spec(spec)
        assert not report.ok
        assert_allclose(report.max_stationarity_residual, 1.0, rtol=1e-12)
        assert any("stationarity" in m for m in report.messages)

    def test_residual_stable_under_probe_refinement(self):
        spec = quadratic_spec(circulation=RadialLinearCirculation(rate=1.0))
        coarse = validate_spec(spec, tol=1e-8, probes=41)
        fine = validate_spec(spec, tol=1e-8, probes=401)
        assert fine.max_stationarity_residual <= 2.0 * max(
            coarse.max_stationarity_residual, 1e-8)

    def test_ellipticity_floor_enforced(self):
        # gamma = sigma^2 = 0.25 clears a declared floor of 0.2 ...
        spec = quadratic_spec(
            diffusion=DiffusionFactor.isotropic(1, 0.5), gamma_minus=0.2)
        report = validate_spec(spec)
        assert report.ok
        assert_allclose(report.min_gamma_eigenvalue, 0.25, rtol=1e-12)

        # ... but sigma = 0.4 gives gamma = 0.16 and must be rejected.
        bad = quadratic_spec(
            diffusion=DiffusionFactor.isotropic(1, 0.4), gamma_minus=0.2)
        report = validate_spec(bad)
        assert not report.ok
        assert any("ellipticity" in m for m in report.messages)

    def test_langevin_spec_structural(self):
        spec = LangevinSpec(QuadraticPotential(Constant(1.0)), beta=2.0,
                            horizon=1.0, xi=0.7)
        report = validate_spec(spec)
        assert report.ok


class TestPartitionFunction:
    def test_standard_gaussian_normalizer(self):
        snap = partition_function(quadratic_spec(), 0.0)
        assert_allclose(snap.z, math.sqrt(2.0 * math.pi), rtol=1e-10)
        assert snap.error <= 1e-8

    def test_free_energy_definition(self):
        spec = quadratic_spec(k0=1.0, k1=2.0, beta=1.0)
        snap = partition_function(spec, spec.horizon)
        assert_allclose(snap.free_energy, -math.log(snap.z) / spec.beta, rtol=0,
                        atol=1e-15)

    def test_stiffness_switch_free_energy_gap(self):
        """Doubling the stiffness halves the Gibbs variance; the free-energy
        difference has the closed form (1/(2 beta)) ln(k_T / k_0)."""
        spec = quadratic_spec(k0=1.0, k1=2.0, beta=1.0)
        assert_allclose(free_energy_difference(spec), 0.5 * math.log(2.0),
                        rtol=1e-9)
        assert_allclose(free_energy_difference(spec), 0.34657, atol=5e-6)

    def test_quadrature_matches_closed_form_many_betas(self):
        for beta, k in [(0.5, 1.0), (1.0, 3.0), (4.0, 0.25)]:
            spec = quadratic_spec(k0=k, beta=beta)
            snap = partition_function(spec, 0.0)
            assert_allclose(snap.z, math.sqrt(2.0 * math.pi / (beta * k)),
                            rtol=1e-8)

    def test_constant_shift_moves_free_energy_exactly(self):
        class Shifted(QuadraticPotential):
            def v(self, x, s):
                return super().v(x, s) + 0.7

        base = quadratic_spec()
        shifted = BrownianSpec(
            potential=Shifted(Constant(1.0), dimension=1), beta=1.0, horizon=1.0)
        f0 = partition_function(base, 0.0).free_energy
        f1 = partition_function(shifted, 0.0).free_energy
        assert_allclose(f1 - f0, 0.7, rtol=1e-9)


class TestGibbsDensities:
    def test_gaussian_representation_variance(self):
        law = gibbs_gaussian(quadratic_spec(k0=2.0, beta=0.5), 0.0)
        assert_allclose(law.cov[0, 0], 1.0 / (0.5 * 2.0), rtol=1e-12)
        assert_allclose(law.mean, 0.0, atol=0)

    def test_gaussian_representation_requires_quadratic(self):
        spec = BrownianSpec(potential=TanhPerturbedPotential(Constant(0.3)),
                            beta=1.0, horizon=1.0)
        with pytest.raises(SpecError):
            gibbs_gaussian(spec, 0.0)

    def test_grid_density_normalized(self):
        like = GridDensity1D(-10.0, 10.0, np.ones(2000))
        dens = gibbs_grid_1d(quadratic_spec(), 0.0, like)
        assert abs(np.sum(dens.values) * dens.h - 1.0) <= 1e-10

    def test_grid_and_gaussian_agree_in_kl(self):
        spec = quadratic_spec(k0=1.5, beta=1.0)
        like = GridDensity1D(-10.0, 10.0, np.ones(4000))
        grid = gibbs_grid_1d(spec, 0.0, like)
        law = gibbs_gaussian(spec, 0.0)
        gauss_on_grid = GridDensity1D(like.lo, like.hi,
                                      law.pdf(grid.x[:, None]), 0.0)
        assert relative_entropy_grid(grid, gauss_on_grid) <= 1e-8


class TestSpecFromConfig:
    BASE = {
        "schema_version": 1,
        "kind": "brownian",
        "beta": 1.0,
        "horizon": 1.0,
        "potential": {"family": "quadratic",
                      "stiffness": {"kind": "linear", "start": 1.0, "end": 2.0}},
    }

    def test_roundtrip_quadratic(self):
        spec = spec_from_config(dict(self.BASE))
        assert isinstance(spec, BrownianSpec)
        assert_allclose(spec.potential.k.value(1.0), 2.0)

    def test_langevin_kind(self):
        cfg = dict(self.BASE, kind="langevin", friction=0.5)
        spec = spec_from_config(cfg)
        assert isinstance(spec, LangevinSpec)
        assert spec.xi == 0.5

    def test_unknown_family_rejected(self):
        cfg = dict(self.BASE, potential={"family": "morse"})
        with pytest.raises(ConfigError):
            spec_from_config(cfg)

    def test_schema_version_checked(self):
        cfg = dict(self.BASE, schema_version=0)
        with pytest.raises(ConfigError):
            spec_from_config(cfg)

    def test_rotation_requires_two_dimensions(self):
        cfg = dict(self.BASE, circulation={"family": "rotation", "rate": 1.0})
        with pytest.raises(ConfigError):
            spec_from_config(cfg)


def test_reversed_spec_mirrors_schedules():
    """The protocol-reversed problem runs the schedule backwards and flips
    the circulation sign."""
    spec = quadratic_spec(k0=1.0, k1=2.0)
    rev = spec.reversed()
    for s in np.linspace(0.0, 1.0, 7):
        assert_allclose(rev.potential.v(np.array([[0.8]]), s),
                        spec.potential.v(np.array([[0.8]]), 1.0 - s), rtol=1e-14)
    x = np.array([[0.3], [-1.2]])
    assert_allclose(rev.drift(x, 0.25), spec.reversed().drift(x, 0.25))


def test_diffusion_schedule_enters_gamma():
    spec = quadratic_spec(
        diffusion=DiffusionFactor.isotropic(1, 1.0, Sine(0.5, 1.0, 1.25)))
    g0 = spec.diffusion.gamma(0.0)[0, 0]
    g_half = spec.diffusion.gamma(0.5)[0, 0]
    assert_allclose(g0, 1.25 ** 2, rtol=1e-12)
    assert_allclose(g_half, (1.25 + 0.5 * math.sin(0.5 * math.pi)) ** 2, rtol=1e-12)
