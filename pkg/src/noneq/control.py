"""Work-tilted value functions and the steering fields they induce.

The positive factor

    g(x, s) = E[ exp(-beta int_s^T dV/ds(x(u), u) du) | x(s) = x ]

(expectation over the uncontrolled dynamics) solves a backward equation with
killing rate beta dV/ds.  Its logarithm U = -ln(g)/beta is a value function:
the feedback u*(x, s) = -2 sigma(s)^T grad U steers the forward dynamics so
that the reweighted work estimator becomes deterministic, and the time-zero
slice tilts the Gibbs law into the matching optimal starting distribution
exp(-beta(V(x, 0) + U(x, 0))) / Z(T).

Three routes are provided: direct Monte Carlo for pointwise values, a fitted
Crank-Nicolson march for one-dimensional overdamped problems, and backward
quadratic (Riccati) coefficient flows for kinetic quadratic problems.  The
overdamped quadratic flow lives in gaussian_oracle.BrownianRiccati.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from . import rng as rngmod
from .errors import BlowUpError, PositivityError, SpecError
from .fokker_planck import GridDensity1D, _box_from_spec
from .gaussian_oracle import RICCATI_BLOWUP, GaussianLaw
from .model import BrownianSpec, LangevinSpec, langevin_partition_function, partition_function
from .odes import rk4_path
from .sde import ControlField

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Monte Carlo pointwise values
# ---------------------------------------------------------------------------

def feynman_kac_g(spec: BrownianSpec, x0, s0: float, n_paths: int, dt: float,
                  seed: int = 0) -> tuple[float, float]:
    """Monte Carlo estimate of g(x0, s0) with its standard error.

    Runs uncontrolled paths of the overdamped dynamics from the fixed point
    x0 at time s0 to the horizon and averages exp(-beta W) of the accumulated
    schedule work.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    d = spec.dimension
    if x0.shape != (d,):
        raise SpecError(f"x0 must have shape ({d},)")
    span = spec.horizon - s0
    n_steps = int(round(span / dt))
    if n_steps < 1 or abs(n_steps * dt - span) > 1e-9 * max(1.0, span):
        raise SpecError("dt must divide the interval [s0, T]")
    m = spec.diffusion.shape[1]
    amp = math.sqrt(2.0 * dt / spec.beta)

    vals = []
    for block, start, stop in rngmod.block_layout(n_paths):
        nb = stop - start
        gen = rngmod.block_generator(seed, block)
        x = np.tile(x0, (nb, 1))
        w = np.zeros(nb)
        for k in range(n_steps):
            s = s0 + k * dt
            z = gen.standard_normal((nb, m))
            x_new = x + dt * spec.drift(x, s) + amp * (z @ spec.diffusion.sigma(s).T)
            w += dt * spec.potential.dv_ds(0.5 * (x + x_new), s + 0.5 * dt)
            x = x_new
        vals.append(np.exp(-spec.beta * w))
    vals = np.concatenate(vals)
    mean = float(np.mean(vals))
    stderr = float(np.std(vals, ddof=1) / math.sqrt(len(vals)))
    return mean, stderr


# ---------------------------------------------------------------------------
# one-dimensional backward PDE solve
# ---------------------------------------------------------------------------

@dataclass
class GridControl1D:
    """g and its derived fields on a space-time grid (times ascending)."""

    spec: BrownianSpec
    times: np.ndarray      # (S,)
    lo: float
    hi: float
    g: np.ndarray          # (S, cells)
    _warned: bool = False

    @property
    def x(self) -> np.ndarray:
        return GridDensity1D.centers(self.lo, self.hi, self.g.shape[1])

    @property
    def value_grid(self) -> np.ndarray:
        """U = -ln(g)/beta on the same grid."""
        return -np.log(self.g) / self.spec.beta

    def _time_weights(self, s: float):
        times = self.times
        s = min(max(float(s), times[0]), times[-1])
        j = int(np.searchsorted(times, s, side="right")) - 1
        j = min(max(j, 0), len(times) - 2)
        frac = (s - times[j]) / (times[j + 1] - times[j])
        return j, frac

    def _interp(self, field: np.ndarray, x, s: float) -> np.ndarray:
        pts = np.asarray(x, dtype=float).reshape(-1)
        if not self._warned and (pts.min() < self.lo or pts.max() > self.hi):
            logger.warning("control query outside the solved box [%g, %g]; "
                           "using constant extrapolation", self.lo, self.hi)
            self._warned = True
        j, frac = self._time_weights(s)
        row = (1.0 - frac) * field[j] + frac * field[j + 1]
        return np.interp(pts, self.x, row)

    def value(self, x, s: float) -> np.ndarray:
        return self._interp(self.value_grid, x, s)

    def g_at(self, x, s: float) -> np.ndarray:
        return self._interp(self.g, x, s)

    def control_grid(self) -> np.ndarray:
        """u*(x, s) = -2 sigma(s) dU/dx sampled on the grid."""
        u_val = self.value_grid
        h = (self.hi - self.lo) / self.g.shape[1]
        du = np.empty_like(u_val)
        du[:, 1:-1] = (u_val[:, 2:] - u_val[:, :-2]) / (2 * h)
        du[:, 0] = (u_val[:, 1] - u_val[:, 0]) / h
        du[:, -1] = (u_val[:, -1] - u_val[:, -2]) / h
        sig = np.array([float(self.spec.diffusion.sigma(s)[0, 0]) for s in self.times])
        return -2.0 * sig[:, None] * du

    def control_field(self) -> ControlField:
        ugrid = self.control_grid()

        def evaluate(x, s):
            return self._interp(ugrid, x, s)[:, None]

        return ControlField(evaluate, tag="grid-pde")

    def tilted_initial_density(self) -> GridDensity1D:
        """Normalised optimal starting density exp(-beta V(., 0)) g(., 0) / Z(T)."""
        vals = np.exp(-self.spec.beta * self.spec.potential.v(self.x[:, None], 0.0)) \
            * self.g[0]
        return GridDensity1D(self.lo, self.hi, vals, 0.0).normalized()

    def tilted_initial_mass(self) -> float:
        """Unnormalised mass of the tilted start; equals 1 when consistent."""
        h = (self.hi - self.lo) / self.g.shape[1]
        vals = np.exp(-self.spec.beta * self.spec.potential.v(self.x[:, None], 0.0)) \
            * self.g[0]
        z_t = partition_function(self.spec, self.spec.horizon).z
        return float(np.sum(vals) * h / z_t)

    def hjb_residual(self, core_std: float = 5.0) -> float:
        """Max | U_s + L U - gamma (U_x)^2 + dV/ds | over the core region.

        The core masks out the zero-flux boundary layer, where the boxed
        problem legitimately differs from the free-space one.
        """
        from .entropy import derivative_uniform

        u_val = self.value_grid
        x = self.x
        h = x[1] - x[0]
        dt = self.times[1] - self.times[0]
        u_s = derivative_uniform(u_val, dt)
        resid = np.full_like(u_val, np.nan)
        for i, s in enumerate(self.times):
            gamma = float(self.spec.diffusion.gamma(s)[0, 0])
            beta = self.spec.beta
            v_c = self.spec.potential.v(x[:, None], s)
            v_f = self.spec.potential.v(0.5 * (x[:-1] + x[1:])[:, None], s)
            base = gamma / (beta * h * h)
            cup = base * np.exp(beta * (v_c[:-1] - v_f))
            cdn = base * np.exp(beta * (v_c[1:] - v_f))
            row = u_val[i]
            lu = np.zeros_like(row)
            lu[:-1] += cup * (row[1:] - row[:-1])
            lu[1:] += cdn * (row[:-1] - row[1:])
            ux = np.gradient(row, h)
            resid[i] = u_s[i] + lu - gamma * ux ** 2 \
                + self.spec.potential.dv_ds(x[:, None], s)
        center, std = self.spec.potential.envelope(0.0, self.spec.beta)
        core = np.abs(x - center) <= core_std * std
        return float(np.max(np.abs(resid[:, core])))


def solve_g_pde_1d(spec: BrownianSpec, dt: float, cells: int = 800,
                   radius_std: float = 10.0, theta: float = 0.5) -> GridControl1D:
    """March g backward from the flat horizon slice on a zero-flux box.

    The elliptic part uses the same Boltzmann-fitted interface weights as the
    density solver (so constants are in its kernel exactly), the killing term
    beta dV/ds sits on the diagonal, and ``theta`` selects implicit Euler (1)
    or Crank-Nicolson (0.5) in reversed time.
    """
    if spec.dimension != 1:
        raise SpecError("solve_g_pde_1d is one-dimensional")
    n_steps = int(round(spec.horizon / dt))
    if abs(n_steps * dt - spec.horizon) > 1e-9:
        raise SpecError("dt must divide the horizon")
    lo, hi = _box_from_spec(spec, radius_std)
    h = (hi - lo) / cells
    x = GridDensity1D.centers(lo, hi, cells)
    xcol = x[:, None]
    x_face = 0.5 * (x[:-1] + x[1:])[:, None]
    beta = spec.beta

    g = np.ones(cells)
    slices = [g.copy()]
    for k in range(n_steps - 1, -1, -1):
        s_mid = (k + 0.5) * dt
        v_c = spec.potential.v(xcol, s_mid)
        v_f = spec.potential.v(x_face, s_mid)
        gamma = float(spec.diffusion.gamma(s_mid)[0, 0])
        base = gamma / (beta * h * h)
        cup = np.concatenate([base * np.exp(beta * (v_c[:-1] - v_f)), [0.0]])
        cdn = np.concatenate([[0.0], base * np.exp(beta * (v_c[1:] - v_f))])
        diag = -(cup + cdn) - beta * spec.potential.dv_ds(xcol, s_mid)
        # (I - theta dt B) g_k = (I + (1-theta) dt B) g_{k+1}
        rhs = g * (1.0 + (1.0 - theta) * dt * diag)
        rhs[:-1] += (1.0 - theta) * dt * cup[:-1] * g[1:]
        rhs[1:] += (1.0 - theta) * dt * cdn[1:] * g[:-1]
        ab = np.zeros((3, cells))
        ab[0, 1:] = -theta * dt * cup[:-1]
        ab[1] = 1.0 - theta * dt * diag
        ab[2, :-1] = -theta * dt * cdn[1:]
        g = solve_banded((1, 1), ab, rhs)
        if g.min() <= 0.0:
            raise PositivityError(f"g lost positivity at s={k * dt:.6g}: min={g.min():.3e}")
        slices.append(g.copy())
    slices.reverse()
    times = dt * np.arange(n_steps + 1)
    return GridControl1D(spec=spec, times=times, lo=lo, hi=hi, g=np.array(slices))


# ---------------------------------------------------------------------------
# kinetic quadratic value function
# ---------------------------------------------------------------------------

class LangevinRiccati:
    """Backward quadratic value flow for kinetic dynamics.

    For an isotropic quadratic potential with fixed centre at the origin and
    scalar mass, U(q, p, s) = (Lqq |q|^2 + 2 Lqp q.p + Lpp |p|^2)/2 + c0(s)
    with coefficient ODEs integrated backward from zero terminal data.
    Exposes the value, the momentum-channel feedback
    u*(q, p, s) = -2 sqrt(xi) (Lqp q + Lpp p) and the tilted initial law.
    """

    def __init__(self, spec: LangevinSpec, times, substeps: int = 32):
        if not spec.potential.is_quadratic:
            raise SpecError("kinetic riccati solution requires a quadratic potential")
        pot = spec.potential
        probe = np.linspace(0.0, spec.horizon, 33)
        if max(abs(float(pot.mu.value(s))) for s in probe) > 1e-12:
            raise SpecError("kinetic riccati solution requires a centred potential")
        m_scalar = float(spec.mass[0, 0])
        if np.max(np.abs(spec.mass - m_scalar * np.eye(spec.dimension))) > 1e-12:
            raise SpecError("kinetic riccati solution requires scalar mass")
        self.spec = spec
        self.mass_scalar = m_scalar
        self.times = np.asarray(times, dtype=float)
        if abs(self.times[-1] - spec.horizon) > 1e-12:
            raise SpecError("riccati grid must end at the horizon")
        xi, beta, n = spec.xi, spec.beta, spec.dimension

        def rhs(s, y):
            lqq, lqp, lpp, c0 = y
            if max(abs(lqq), abs(lqp), abs(lpp), abs(c0)) > RICCATI_BLOWUP:
                raise BlowUpError(
                    f"riccati coefficients exceeded {RICCATI_BLOWUP:.0e} at s={s:.6g}")
            eta = float(pot.k.value(s))
            etad = float(pot.k.derivative(s))
            dqq = 2.0 * (eta * lqp + xi * lqp * lqp) - etad
            dqp = -lqq / m_scalar + eta * lpp + xi * lqp / m_scalar + 2.0 * xi * lqp * lpp
            dpp = 2.0 * (-lqp / m_scalar + xi * lpp / m_scalar + xi * lpp * lpp)
            dc0 = -(xi / beta) * n * lpp
            return np.array([dqq, dqp, dpp, dc0])

        back = rk4_path(rhs, np.zeros(4), self.times[::-1], substeps)
        coeffs = back[::-1]
        self.lqq = coeffs[:, 0].copy()
        self.lqp = coeffs[:, 1].copy()
        self.lpp = coeffs[:, 2].copy()
        self.c0 = coeffs[:, 3].copy()

    def _coef(self, s):
        return (np.interp(s, self.times, self.lqq),
                np.interp(s, self.times, self.lqp),
                np.interp(s, self.times, self.lpp),
                np.interp(s, self.times, self.c0))

    def value(self, q, p, s):
        q = np.asarray(q, dtype=float)
        p = np.asarray(p, dtype=float)
        lqq, lqp, lpp, c0 = self._coef(s)
        qq = np.sum(q * q, axis=-1)
        qp = np.sum(q * p, axis=-1)
        pp = np.sum(p * p, axis=-1)
        return 0.5 * (lqq * qq + 2.0 * lqp * qp + lpp * pp) + c0

    def g(self, q, p, s):
        return np.exp(-self.spec.beta * self.value(q, p, s))

    def control(self, x, s):
        """Momentum-channel feedback for the stacked state (q, p)."""
        n = self.spec.dimension
        x = np.asarray(x, dtype=float)
        _, lqp, lpp, _ = self._coef(s)
        return -2.0 * math.sqrt(self.spec.xi) * (lqp * x[..., :n] + lpp * x[..., n:])

    def control_field(self) -> ControlField:
        return ControlField(self.control, tag="kinetic-riccati")

    def _initial_precision(self) -> np.ndarray:
        n = self.spec.dimension
        eta0 = float(self.spec.potential.k.value(0.0))
        prec = np.zeros((2 * n, 2 * n))
        idx = np.arange(n)
        prec[idx, idx] = eta0 + self.lqq[0]
        prec[n + idx, n + idx] = 1.0 / self.mass_scalar + self.lpp[0]
        prec[idx, n + idx] = self.lqp[0]
        prec[n + idx, idx] = self.lqp[0]
        return self.spec.beta * prec

    def tilted_initial_law(self) -> GaussianLaw:
        prec = self._initial_precision()
        eigs = np.linalg.eigvalsh(prec)
        if eigs[0] <= 0:
            raise BlowUpError("tilted initial law is not normalisable")
        return GaussianLaw(np.zeros(prec.shape[0]), np.linalg.inv(prec))

    def tilted_initial_mass(self, z_horizon: float | None = None) -> float:
        """integral of exp(-beta(H(., 0) + U(., 0))) / Z(T); 1 when consistent."""
        if z_horizon is None:
            z_horizon = langevin_partition_function(self.spec, self.spec.horizon).z
        prec = self._initial_precision()
        n2 = prec.shape[0]
        sign, logdet = np.linalg.slogdet(prec)
        if sign <= 0:
            raise BlowUpError("tilted initial law is not normalisable")
        log_mass = -self.spec.beta * self.c0[0] \
            + 0.5 * n2 * math.log(2.0 * math.pi) - 0.5 * logdet - math.log(z_horizon)
        return math.exp(log_mass)


def langevin_control_solution(spec: LangevinSpec, times, substeps: int = 32) -> LangevinRiccati:
    return LangevinRiccati(spec, times, substeps)
