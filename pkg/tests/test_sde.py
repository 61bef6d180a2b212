"""Trajectory simulation: moments, work bookkeeping, change-of-measure weights."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from noneq import (
    BlowUpError,
    BrownianSpec,
    Constant,
    ControlField,
    GaussianLaw,
    LangevinSpec,
    Linear,
    QuadraticPotential,
    RotationCirculation,
    SpecError,
    langevin_gibbs_gaussian,
    langevin_propagator,
    ou_moments,
    simulate_forward,
    simulate_langevin,
    simulate_reverse,
    zero_control,
)
from noneq.model import Potential


class FlatPotential(Potential):
    """V identically zero; turns the overdamped dynamics into pure diffusion."""

    is_quadratic = False
    dimension = 1

    def v(self, x, s):
        return np.zeros(np.asarray(x).shape[:-1])

    def dv_ds(self, x, s):
        return np.zeros(np.asarray(x).shape[:-1])

    def grad(self, x, s):
        return np.zeros_like(np.asarray(x, dtype=float))

    def hess(self, x, s):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape + (1,))

    def dgrad_ds(self, x, s):
        return np.zeros_like(np.asarray(x, dtype=float))

    def envelope(self, s, beta):
        return 0.0, 1.0


def ou_spec(k0=1.0, k1=None, beta=1.0, horizon=1.0, **kw):
    sched = Constant(k0) if k1 is None else Linear(k0, k1, horizon)
    return BrownianSpec(QuadraticPotential(sched, dimension=1), beta=beta,
                        horizon=horizon, **kw)


class TestForward:
    def test_pure_diffusion_moments(self):
        spec = BrownianSpec(FlatPotential(), beta=1.0, horizon=1.0)
        n = 40000
        ens = simulate_forward(spec, n, dt=2e-3, seed=5,
                               init=np.zeros((n, 1)),
                               store_times=[0.5, 1.0])
        for t in (0.5, 1.0):
            x = ens.states_at(t)[:, 0]
            se_mean = x.std(ddof=1) / math.sqrt(n)
            assert abs(x.mean()) <= 4.0 * se_mean
            var = x.var(ddof=1)
            se_var = var * math.sqrt(2.0 / (n - 1))
            assert abs(var - 2.0 * t) <= 4.0 * se_var

    def test_ou_mean_decay(self):
        spec = ou_spec()
        n, dt = 30000, 1e-3
        ens = simulate_forward(spec, n, dt=dt, seed=3,
                               init=GaussianLaw(np.array([2.0]), np.array([[1e-20]])),
                               store_times=[0.5, 1.0])
        for t in (0.5, 1.0):
            x = ens.states_at(t)[:, 0]
            se = x.std(ddof=1) / math.sqrt(n)
            # O(dt) Euler bias plus Monte Carlo error
            assert abs(x.mean() - 2.0 * math.exp(-t)) <= 4.0 * se + 5.0 * dt

    def test_frozen_potential_has_exactly_zero_work(self):
        ens = simulate_forward(ou_spec(), 500, dt=1e-2, seed=1)
        assert_array_equal(ens.terminal_work, 0.0)

    def test_determinism_bit_identical(self):
        a = simulate_forward(ou_spec(k1=2.0), 300, dt=1e-2, seed=42)
        b = simulate_forward(ou_spec(k1=2.0), 300, dt=1e-2, seed=42)
        assert_array_equal(a.states, b.states)
        assert_array_equal(a.work, b.work)

    def test_weak_order_one_in_dt(self):
        """The sampled-chain mean follows the drift recursion exactly, so a
        zero-noise path isolates the Euler time-discretization error; halving
        dt should halve it."""
        errs = []
        for dt in (4e-3, 2e-3, 1e-3):
            k = int(round(1.0 / dt))
            ens = simulate_forward(ou_spec(), 1, dt=dt, seed=0,
                                   init=np.array([[2.0]]),
                                   noise=np.zeros((k, 1, 1)))
            errs.append(abs(ens.states_at(1.0)[0, 0] - 2.0 * math.exp(-1.0)))
        assert 1.6 <= errs[0] / errs[1] <= 2.6
        assert 1.6 <= errs[1] / errs[2] <= 2.6

    def test_work_additive_over_subintervals(self):
        """Work accumulated on [0, T] splits exactly across [0, T/2] and
        [T/2, T] when the second half is re-simulated from the stored states
        with the same noise increments."""
        n, dt = 64, 1e-2
        k = int(round(1.0 / dt))
        rng = np.random.default_rng(8)
        noise = rng.standard_normal((k, n, 1))
        full = simulate_forward(ou_spec(k0=1.0, k1=2.0), n, dt=dt, seed=0,
                                noise=noise, store_times=[0.0, 0.5, 1.0])
        # same schedule re-parameterized to start at T/2
        tail_spec = ou_spec(k0=1.5, k1=2.0, horizon=0.5)
        tail = simulate_forward(tail_spec, n, dt=dt, seed=0,
                                init=full.states_at(0.5),
                                noise=noise[k // 2:], store_times=[0.5])
        w_first = full.work[full.times.tolist().index(0.5)]
        assert_allclose(w_first + tail.terminal_work, full.terminal_work,
                        rtol=0, atol=1e-12)
        assert_allclose(tail.states_at(0.5), full.states_at(1.0), atol=1e-12)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_blowup_paths_raise(self):
        stiff = ou_spec(k0=1e6)
        with pytest.raises(BlowUpError):
            simulate_forward(stiff, 32, dt=1e-2, seed=0,
                             init=np.full((32, 1), 1.0))

    def test_csv_export_headers(self, tmp_path):
        ens = simulate_forward(ou_spec(), 10, dt=0.25, seed=9,
                               store_times=[0.0, 1.0])
        path = tmp_path / "paths.csv"
        ens.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0].startswith("# kind=brownian seed=9")
        assert "units=" in lines[0]
        assert lines[1] == "path,time,x0,work,log_weight"
        assert len(lines) == 2 + 2 * 10


class TestReverse:
    def test_frozen_potential_reverse_equals_forward(self):
        spec = ou_spec()
        fwd = simulate_forward(spec, 200, dt=1e-2, seed=17)
        rev = simulate_reverse(spec, 200, dt=1e-2, seed=17)
        assert_array_equal(fwd.states, rev.states)

    def test_circulation_sign_flip(self):
        spec = BrownianSpec(QuadraticPotential(Constant(1.0), dimension=2),
                            beta=1.0, horizon=1.0,
                            circulation=RotationCirculation(rate=0.8))
        rev = spec.reversed()
        rng = np.random.default_rng(0)
        x = rng.normal(size=(50, 2))
        for s in (0.0, 0.3, 0.9):
            gap = rev.drift(x, s) - spec.drift(x, spec.horizon - s)
            expected = -2.0 * spec.circulation.j(x, spec.horizon - s)
            assert_allclose(gap, expected, atol=1e-12)

    def test_reverse_from_gibbs_is_stationary(self):
        spec = ou_spec(beta=2.0)
        n, dt = 30000, 2e-3
        ens = simulate_reverse(spec, n, dt=dt, seed=23,
                               store_times=[0.0, 0.5, 1.0])
        sigma2 = 1.0 / 2.0
        for t in (0.0, 0.5, 1.0):
            x = ens.states_at(t)[:, 0]
            se_mean = math.sqrt(sigma2 / n)
            se_var = sigma2 * math.sqrt(2.0 / n)
            assert abs(x.mean()) <= 4.0 * se_mean
            assert abs(x.var(ddof=1) - sigma2) <= 4.0 * se_var + 2.0 * dt


class TestControlled:
    def test_zero_control_reduces_bit_identically(self):
        spec = ou_spec(k1=2.0)
        plain = simulate_forward(spec, 400, dt=5e-3, seed=7)
        ctrl = simulate_forward(spec, 400, dt=5e-3, seed=7,
                                control=zero_control(1))
        assert_array_equal(plain.states, ctrl.states)
        assert_array_equal(ctrl.terminal_log_weight, 0.0)

    def test_constant_control_shifts_pure_diffusion(self):
        spec = BrownianSpec(FlatPotential(), beta=1.0, horizon=1.0)
        u0 = 0.7
        n = 30000
        ens = simulate_forward(
            spec, n, dt=2e-3, seed=11, init=np.zeros((n, 1)),
            control=ControlField(lambda x, s: np.full((len(x), 1), u0)))
        x = ens.states_at(1.0)[:, 0]
        se = x.std(ddof=1) / math.sqrt(n)
        assert abs(x.mean() - u0) <= 4.0 * se

    def test_exponential_weight_is_normalized(self):
        """The exponential of the accumulated log-weight must average to one;
        this pins both the sign convention and the quadratic penalty factor."""
        spec = ou_spec(k1=1.5)
        n = 50000
        field = ControlField(lambda x, s: 0.8 * np.tanh(x))
        ens = simulate_forward(spec, n, dt=2e-3, seed=19, control=field)
        w = np.exp(ens.terminal_log_weight)
        se = w.std(ddof=1) / math.sqrt(n)
        assert abs(w.mean() - 1.0) <= 4.0 * se


class TestLangevin:
    def spec(self, eta1=None, xi=1.0):
        sched = Constant(1.0) if eta1 is None else Linear(1.0, eta1, 1.0)
        return LangevinSpec(QuadraticPotential(sched, dimension=1), beta=1.0,
                            horizon=1.0, xi=xi)

    def test_stationary_start_stays_stationary(self):
        spec = self.spec()
        n, dt = 30000, 1e-3
        ens = simulate_langevin(spec, n, dt=dt, seed=31,
                                store_times=[0.0, 0.5, 1.0])
        for t in (0.5, 1.0):
            x = ens.states_at(t)
            for col in range(2):
                se_mean = 1.0 / math.sqrt(n)
                se_var = math.sqrt(2.0 / n)
                assert abs(x[:, col].mean()) <= 4.0 * se_mean
                assert abs(x[:, col].var(ddof=1) - 1.0) <= 4.0 * se_var + 3.0 * dt

    def test_terminal_covariance_matches_propagator(self):
        spec = self.spec(eta1=1.5)
        init = GaussianLaw(np.array([0.5, -0.2]), np.diag([0.7, 1.3]))
        n, dt = 40000, 1e-3
        ens = simulate_langevin(spec, n, dt=dt, seed=37, init=init,
                                store_times=[1.0])
        law = langevin_propagator(spec, [0.0, 1.0]).push(init)[-1]
        x = ens.states_at(1.0)
        for col in range(2):
            se = x[:, col].std(ddof=1) / math.sqrt(n)
            assert abs(x[:, col].mean() - law.mean[col]) <= 4.0 * se + 5.0 * dt
            v = x[:, col].var(ddof=1)
            se_v = v * math.sqrt(2.0 / n)
            assert abs(v - law.cov[col, col]) <= 4.0 * se_v + 5.0 * dt

    def test_reverse_flips_hamiltonian_transport_only(self):
        """One zero-noise Euler step forward plus one reverse step from the
        same state cancels the transport part and doubles the friction."""
        spec = self.spec()
        x0 = np.array([[0.8, -0.5]])
        dt = 1e-3
        short = LangevinSpec(spec.potential, beta=1.0, horizon=dt, xi=1.0)
        f = simulate_langevin(short, 1, dt=dt, seed=0, init=x0,
                              noise=np.zeros((1, 1, 1)))
        r = simulate_langevin(short, 1, dt=dt, seed=0, init=x0,
                              noise=np.zeros((1, 1, 1)), reverse=True)
        df = f.states_at(dt)[0] - x0[0]
        dr = r.states_at(dt)[0] - x0[0]
        assert_allclose(df + dr, [0.0, -2.0 * dt * x0[0, 1]], atol=1e-14)

    def test_baoab_stationary_and_rejects_control(self):
        spec = self.spec()
        n = 20000
        ens = simulate_langevin(spec, n, dt=5e-3, seed=41, method="baoab",
                                store_times=[0.0, 1.0])
        x = ens.states_at(1.0)
        # splitting integrator samples the Gibbs law without O(dt) variance bias
        for col in range(2):
            assert abs(x[:, col].var(ddof=1) - 1.0) <= 4.0 * math.sqrt(2.0 / n) + 1e-3
        with pytest.raises(SpecError):
            simulate_langevin(spec, 8, dt=5e-3, method="baoab",
                              control=zero_control(1))

    def test_langevin_girsanov_normalized(self):
        spec = self.spec(eta1=1.5)
        n = 50000
        field = ControlField(lambda x, s: 0.6 * np.tanh(x[:, :1]))
        ens = simulate_langevin(spec, n, dt=2e-3, seed=43, control=field)
        w = np.exp(ens.terminal_log_weight)
        se = w.std(ddof=1) / math.sqrt(n)
        assert abs(w.mean() - 1.0) <= 4.0 * se


def test_store_times_must_lie_on_step_grid():
    with pytest.raises(SpecError):
        simulate_forward(ou_spec(), 4, dt=1e-2, store_times=[0.123456])


def test_ou_moments_api_agreement():
    """Single-time closed-form helper agrees with a direct simulation check."""
    spec = ou_spec()
    law = ou_moments(spec, GaussianLaw(np.array([2.0]), np.array([[1.0]])), 1.0)
    assert_allclose(law.mean[0], 2.0 * math.exp(-1.0), rtol=1e-9)
    assert_allclose(law.cov[0, 0], 1.0, rtol=1e-9)
