"""Entropy balance identities, decay envelopes, and decay-rate certificates."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from noneq import (
    BrownianSpec,
    CertificateInfeasible,
    Constant,
    GaussianLaw,
    LangevinSpec,
    Linear,
    QuadraticPotential,
    SpecError,
    TanhPerturbedPotential,
    bakry_emery_kappa,
    decay_bound_lipschitz,
    decay_bound_supremum,
    gaussian_kl,
    gaussian_modified_functional,
    gibbs_gaussian,
    hypocoercivity_certificate,
    kinetic_decay_bound,
    kinetic_decay_bound_time_dependent,
    langevin_gibbs_gaussian,
    langevin_propagator,
    modified_functional_trace,
    optimize_omega,
    ou_moments_path,
    pinsker_talagrand_report,
    production_rate_check_brownian,
    production_rate_check_langevin,
    solve_fp_1d,
)
from noneq.model import Potential


def ou_spec(k0=1.0, k1=None, beta=1.0, horizon=1.0):
    sched = Constant(k0) if k1 is None else Linear(k0, k1, horizon)
    return BrownianSpec(QuadraticPotential(sched, dimension=1), beta=beta,
                        horizon=horizon)


def kin_spec(eta0=1.0, eta1=None, beta=1.0, horizon=1.0, xi=1.0):
    sched = Constant(eta0) if eta1 is None else Linear(eta0, eta1, horizon)
    return LangevinSpec(QuadraticPotential(sched, dimension=1), beta=beta,
                        horizon=horizon, xi=xi)


class TestProductionRateBrownian:
    def test_analytic_gaussian_identity(self):
        spec = ou_spec()
        times = np.linspace(0.0, 1.0, 401)
        laws = ou_moments_path(spec, GaussianLaw(np.array([2.0]),
                                                 np.array([[0.5]])), times)
        trace = production_rate_check_brownian(spec, laws, times)
        assert trace.max_residual <= 1e-6
        assert np.all(trace.r >= 0.0)

    def test_stationary_case_is_identically_zero(self):
        spec = ou_spec(k0=1.3, beta=2.0)
        times = np.linspace(0.0, 1.0, 101)
        laws = ou_moments_path(spec, gibbs_gaussian(spec, 0.0), times)
        trace = production_rate_check_brownian(spec, laws, times)
        assert np.max(np.abs(trace.r)) <= 1e-12
        assert np.max(np.abs(trace.dr_ds)) <= 1e-10
        assert np.max(np.abs(trace.rhs)) <= 1e-10

    def test_grid_identity_with_moving_schedule(self):
        spec = ou_spec(k0=1.0, k1=1.5)  # stiffness 1 + s/2
        init = GaussianLaw(np.array([0.5]), np.array([[0.7]]))
        sol = solve_fp_1d(spec, init, dt=1e-3, cells=1000, theta=0.5)
        trace = production_rate_check_brownian(spec, sol)
        assert trace.max_residual <= 1e-4

    def test_grid_residual_first_order_in_dt(self):
        """With the fully implicit stepper the identity residual is dominated
        by the O(dt) time discretization, so halving dt should halve it."""
        spec = ou_spec(k0=1.0, k1=1.5)
        init = GaussianLaw(np.array([0.5]), np.array([[0.7]]))
        res = []
        for dt in (2e-3, 1e-3):
            every = 5 * int(round(2e-3 / dt))
            sol = solve_fp_1d(spec, init, dt=dt, cells=1000, theta=1.0,
                              record_every=every)
            res.append(production_rate_check_brownian(spec, sol).max_residual)
        assert 1.6 <= res[0] / res[1] <= 2.6

    def test_homogeneous_entropy_is_monotone(self):
        spec = ou_spec()
        init = GaussianLaw(np.array([1.2]), np.array([[0.4]]))
        sol = solve_fp_1d(spec, init, dt=1e-3, cells=800, theta=1.0)
        trace = production_rate_check_brownian(spec, sol)
        assert trace.max_dr <= 1e-6


class TestProductionRateLangevin:
    def test_analytic_homogeneous_identity(self):
        spec = kin_spec()
        times = np.linspace(0.0, 1.0, 401)
        init = GaussianLaw(np.array([0.8, -0.4]), np.diag([0.6, 1.2]))
        laws = langevin_propagator(spec, times).push(init)
        trace = production_rate_check_langevin(spec, laws, times)
        assert trace.max_residual <= 1e-6

    def test_stationary_case_is_identically_zero(self):
        spec = kin_spec(eta0=1.5, beta=0.7)
        times = np.linspace(0.0, 1.0, 101)
        laws = langevin_propagator(spec, times).push(
            langevin_gibbs_gaussian(spec, 0.0))
        trace = production_rate_check_langevin(spec, laws, times)
        assert np.max(np.abs(trace.r)) <= 1e-10
        assert np.max(np.abs(trace.residual)) <= 1e-10

    def test_schedule_identity_via_propagator(self):
        spec = kin_spec(eta1=1.25)  # stiffness 1 + s/4
        times = np.linspace(0.0, 1.0, 401)
        init = GaussianLaw(np.array([0.8, -0.4]), np.diag([0.6, 1.2]))
        laws = langevin_propagator(spec, times).push(init)
        trace = production_rate_check_langevin(spec, laws, times)
        assert trace.max_residual <= 1e-5


class TestDecayEnvelopes:
    def test_zero_forcing_is_pure_exponential(self):
        times = np.linspace(0.0, 2.0, 81)
        r0, beta, gm, kappa = 0.8, 1.0, 1.0, 1.5
        env = decay_bound_supremum(times, r0, beta, gm, lambda s: kappa + 0.0 * s,
                                   lambda s: 0.0 * s)
        assert_allclose(env.bound, r0 * np.exp(-2.0 * gm * kappa * times / beta),
                        rtol=1e-9)

    def test_initial_value_is_exact(self):
        env = decay_bound_supremum(np.linspace(0.0, 1.0, 11), 0.37, 2.0, 0.5,
                                   lambda s: 1.0 + 0.0 * s,
                                   lambda s: 0.2 + 0.0 * s)
        assert env.bound[0] == pytest.approx(0.37, abs=1e-14)

    def test_constant_forcing_closed_form(self):
        """Zero start, constant rate bound and curvature: quadrature against
        the closed-form convolution."""
        times = np.linspace(0.0, 3.0, 121)
        beta, gm, kappa, l1 = 1.3, 0.8, 1.1, 0.45
        env = decay_bound_supremum(times, 0.0, beta, gm,
                                   lambda s: kappa + 0.0 * s,
                                   lambda s: l1 + 0.0 * s, tol=1e-12)
        rate = gm * kappa / beta
        closed = (beta * l1 / math.sqrt(2.0) * (1.0 - np.exp(-rate * times))
                  / rate) ** 2
        assert np.max(np.abs(env.bound - closed)) <= 1e-10

    def test_lipschitz_variant_closed_form(self):
        times = np.linspace(0.0, 2.0, 81)
        beta, gm, kappa, l2 = 1.0, 1.0, 0.9, 0.3
        env = decay_bound_lipschitz(times, 0.0, beta, gm,
                                    lambda s: kappa + 0.0 * s,
                                    lambda s: l2 + 0.0 * s, tol=1e-12)
        rate = gm * kappa / beta
        closed = (beta * (l2 / math.sqrt(kappa)) / math.sqrt(2.0)
                  * (1.0 - np.exp(-rate * times)) / rate) ** 2
        assert np.max(np.abs(env.bound - closed)) <= 1e-10

    def test_lipschitz_variant_needs_positive_curvature(self):
        times = np.linspace(0.0, 1.0, 5)
        with pytest.raises(CertificateInfeasible):
            decay_bound_lipschitz(times, 0.1, 1.0, 1.0,
                                  lambda s: 0.0 * s, lambda s: 0.2 + 0.0 * s)


class QuarticDoubleWell(Potential):
    """x^4 - x^2: strictly negative curvature near the origin."""

    is_quadratic = False
    dimension = 1

    def v(self, x, s):
        x0 = np.asarray(x, dtype=float)[..., 0]
        return x0 ** 4 - x0 ** 2

    def dv_ds(self, x, s):
        return np.zeros(np.asarray(x).shape[:-1])

    def grad(self, x, s):
        x0 = np.asarray(x, dtype=float)[..., 0]
        return (4.0 * x0 ** 3 - 2.0 * x0)[..., None]

    def hess(self, x, s):
        x0 = np.asarray(x, dtype=float)[..., 0]
        return (12.0 * x0 ** 2 - 2.0)[..., None, None]

    def dgrad_ds(self, x, s):
        return np.zeros_like(np.asarray(x, dtype=float))

    def envelope(self, s, beta):
        return 0.0, 1.0


class TestCurvatureProbe:
    def test_quadratic_recovers_beta(self):
        for beta in (0.5, 1.0, 3.0):
            spec = ou_spec(beta=beta)
            assert_allclose(bakry_emery_kappa(spec, 0.3), beta, rtol=1e-12)

    def test_tanh_perturbation_curvature(self):
        spec = BrownianSpec(TanhPerturbedPotential(Constant(0.5)), beta=1.0,
                            horizon=1.0)
        kappa = bakry_emery_kappa(spec, 0.0)
        assert_allclose(kappa, 1.0 - 0.5 * 4.0 / (3.0 * math.sqrt(3.0)),
                        atol=1e-4)
        assert_allclose(kappa, 0.6151, atol=1e-4)

    def test_nonconvex_rejected(self):
        spec = BrownianSpec(QuarticDoubleWell(), beta=1.0, horizon=1.0)
        with pytest.raises(CertificateInfeasible) as exc:
            bakry_emery_kappa(spec, 0.0)
        assert exc.value.constraint == "convexity"


class TestCertificates:
    def test_equal_diagonal_eigenvalues(self):
        # the weight matrix [[1, 0.5], [0.5, 1]] has eigenvalues 0.5, 1.5 ...
        eigs = np.linalg.eigvalsh(np.array([[1.0, 0.5], [0.5, 1.0]]))
        assert_allclose(eigs, [0.5, 1.5], rtol=1e-14)
        # ... but these weights violate 2b > c and must be rejected, by name
        with pytest.raises(CertificateInfeasible) as exc:
            hypocoercivity_certificate(1.0, 0.5, 1.0, xi=1.0, beta=1.0,
                                       hessian_bound=0.0, lsi_kappa=1.0)
        assert "2b" in exc.value.constraint

    def test_hand_computed_certificate(self):
        cert = hypocoercivity_certificate(0.05, 0.04, 0.05, xi=1.0, beta=1.0,
                                          hessian_bound=0.0, lsi_kappa=1.0)
        lam1_tilde = 0.525 - math.sqrt(0.253125)
        assert_allclose(cert.lambda1_tilde, lam1_tilde, rtol=1e-12)
        assert_allclose(cert.lambda1_tilde, 0.0218847, atol=1e-6)
        assert_allclose(cert.lambda2, 0.09, rtol=1e-12)
        assert_allclose(cert.omega, 0.5 * lam1_tilde / (0.5 + 0.09), rtol=1e-12)
        assert_allclose(cert.omega, 0.0185464, atol=1e-6)

    def test_determinant_constraint_named(self):
        with pytest.raises(CertificateInfeasible) as exc:
            hypocoercivity_certificate(0.01, 0.04, 0.05, xi=1.0, beta=1.0,
                                       hessian_bound=0.0, lsi_kappa=1.0)
        assert "ac" in exc.value.constraint

    def test_scaled_down_weights_stay_admissible(self):
        for t in (1.0, 0.5, 0.1):
            cert = hypocoercivity_certificate(0.05 * t, 0.04 * t, 0.05 * t,
                                              xi=1.0, beta=1.0,
                                              hessian_bound=0.0, lsi_kappa=1.0)
            assert cert.omega > 0.0


class TestKineticEnvelope:
    def cert(self):
        return hypocoercivity_certificate(0.05, 0.04, 0.05, xi=1.0, beta=1.0,
                                          hessian_bound=0.0, lsi_kappa=1.0)

    def test_zero_forcing_decay(self):
        cert = self.cert()
        times = np.linspace(0.0, 5.0, 41)
        bound = kinetic_decay_bound(cert, 0.7, times)
        assert_allclose(bound, 0.7 * np.exp(-cert.omega * times), rtol=1e-12)

    def test_asymptote_with_forcing(self):
        cert = self.cert()
        l1, l2 = 0.2, 0.1
        beta = cert.beta
        plateau = (beta ** 2 * l1 ** 2 / (2.0 * cert.omega ** 2)
                   + beta ** 2 / cert.omega * (cert.c + cert.b / 2.0) * l2 ** 2)
        far = kinetic_decay_bound(cert, 0.7, np.array([0.0, 3000.0]), l1, l2)
        assert_allclose(far[-1], plateau, rtol=1e-10)

    def test_time_dependent_matches_constant_without_forcing(self):
        cert = self.cert()
        times = np.linspace(0.0, 4.0, 81)
        const = kinetic_decay_bound(cert, 0.5, times)
        vari = kinetic_decay_bound_time_dependent(
            cert, 0.5, times, lambda s: cert.omega + 0.0 * s,
            lambda s: 0.0 * s, lambda s: 0.0 * s, tol=1e-12)
        assert np.max(np.abs(const - vari)) <= 1e-8

    def test_time_dependent_is_sharper_under_forcing(self):
        cert = self.cert()
        times = np.linspace(0.0, 4.0, 81)
        const = kinetic_decay_bound(cert, 0.5, times, l1=0.3, l2=0.2)
        vari = kinetic_decay_bound_time_dependent(
            cert, 0.5, times, lambda s: cert.omega + 0.0 * s,
            lambda s: 0.3 + 0.0 * s, lambda s: 0.2 + 0.0 * s, tol=1e-12)
        assert np.all(vari <= const + 1e-12)

    def test_gaussian_energy_respects_envelope(self):
        spec = kin_spec(eta0=1.0, horizon=6.0)
        cert = optimize_omega(1.0, 1.0, 1.0, 1.0)
        times = np.linspace(0.0, 6.0, 121)
        init = GaussianLaw(np.array([1.0, -0.5]), np.diag([0.5, 1.5]))
        laws = langevin_propagator(spec, times).push(init)
        energy = modified_functional_trace(spec, laws, times, cert.a, cert.b,
                                           cert.c)
        envelope = kinetic_decay_bound(cert, energy[0], times)
        assert np.all(energy <= envelope * (1.0 + 1e-6))
        assert energy[0] >= gaussian_kl(init, langevin_gibbs_gaussian(spec, 0.0))


class TestOmegaOptimizer:
    def test_returned_point_is_feasible_and_consistent(self):
        cert = optimize_omega(1.0, 1.0, 0.0, 1.0)
        rebuilt = hypocoercivity_certificate(cert.a, cert.b, cert.c, xi=1.0,
                                             beta=1.0, hessian_bound=0.0,
                                             lsi_kappa=1.0)
        assert_allclose(rebuilt.omega, cert.omega, rtol=1e-12)

    def test_dominates_hand_picked_point(self):
        cert = optimize_omega(1.0, 1.0, 0.0, 1.0)
        assert cert.omega >= 0.018546

    def test_feasible_down_to_small_friction(self):
        for xi in (1e-3, 1e-2, 1.0, 1e2):
            cert = optimize_omega(xi, 1.0, 1.0, 1.0, grid_points=15,
                                  refine_starts=3)
            assert cert.omega > 0.0

    def test_empty_feasible_set_reports_rescaling(self):
        with pytest.raises(CertificateInfeasible) as exc:
            optimize_omega(1.0, 1.0, 1e9, 1.0, grid_points=8, refine_starts=1)
        assert "rescal" in str(exc.value)


class TestInequalityToolkit:
    def test_identical_laws_all_zero(self):
        p = GaussianLaw(np.array([0.4]), np.array([[1.2]]))
        rep = pinsker_talagrand_report(p, p, kappa=1.0 / 1.2)
        assert rep.tv == 0.0 and rep.w2 == 0.0 and rep.sqrt_two_kl == 0.0
        assert rep.pinsker_ok and rep.talagrand_ok

    def test_unit_translation_saturates_transport_bound(self):
        p = GaussianLaw(np.array([1.0]), np.array([[1.0]]))
        q = GaussianLaw(np.array([0.0]), np.array([[1.0]]))
        rep = pinsker_talagrand_report(p, q, kappa=1.0)
        assert_allclose(rep.w2, 1.0, rtol=1e-14)
        assert_allclose(rep.talagrand_bound, 1.0, rtol=1e-14)
        assert abs(rep.w2 - rep.talagrand_bound) <= 1e-12

    def test_seeded_sweep_holds(self):
        rng = np.random.default_rng(2718)
        for _ in range(20):
            m = rng.normal(size=2) * 2.0
            s = np.exp(rng.normal(size=2) * 0.5)
            p = GaussianLaw(m[:1], np.array([[s[0] ** 2]]))
            q = GaussianLaw(m[1:], np.array([[s[1] ** 2]]))
            rep = pinsker_talagrand_report(p, q, kappa=1.0 / s[1] ** 2)
            assert rep.pinsker_ok and rep.talagrand_ok
