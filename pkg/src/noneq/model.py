"""Process specifications: potentials, circulation fields, diffusion factors.

A Brownian specification describes the overdamped SDE

    dx = (J - gamma grad V + beta^-1 div gamma) ds + sqrt(2/beta) sigma dw,

with gamma = sigma sigma^T, on a finite horizon [0, T].  A Langevin
specification describes the kinetic dynamics

    dq = M^-1 p ds,
    dp = -grad V ds - xi M^-1 p ds + sqrt(2 xi / beta) dw.

Both carry a transient equilibrium family: the Gibbs measure of the frozen
potential at each time, with partition function Z(s) and free energy
F(s) = -ln(Z(s)) / beta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, QuadratureError, SpecError

SCHEMA_VERSION = 1


# ---------------------------------------------------------------------------
# scalar schedules
# ---------------------------------------------------------------------------

class Schedule:
    """A smooth scalar function of time with an analytic derivative."""

    def value(self, s):
        raise NotImplementedError

    def derivative(self, s):
        raise NotImplementedError

    def __call__(self, s):
        return self.value(s)


class Constant(Schedule):
    def __init__(self, value: float):
        self.c = float(value)

    def value(self, s):
        return self.c + 0.0 * np.asarray(s, dtype=float)

    def derivative(self, s):
        return 0.0 * np.asarray(s, dtype=float)

    def __repr__(self):
        return f"Constant({self.c})"


class Linear(Schedule):
    """Linear ramp from ``start`` at s=0 to ``end`` at s=horizon."""

    def __init__(self, start: float, end: float, horizon: float):
        self.a = float(start)
        self.rate = (float(end) - float(start)) / float(horizon)

    def value(self, s):
        return self.a + self.rate * np.asarray(s, dtype=float)

    def derivative(self, s):
        return self.rate + 0.0 * np.asarray(s, dtype=float)

    def __repr__(self):
        return f"Linear(start={self.a}, rate={self.rate})"


class Sine(Schedule):
    """base + scale * sin(pi * frequency * s)."""

    def __init__(self, scale: float, frequency: float = 1.0, base: float = 0.0):
        self.scale = float(scale)
        self.freq = float(frequency)
        self.base = float(base)

    def value(self, s):
        return self.base + self.scale * np.sin(np.pi * self.freq * np.asarray(s, dtype=float))

    def derivative(self, s):
        return self.scale * np.pi * self.freq * np.cos(np.pi * self.freq * np.asarray(s, dtype=float))

    def __repr__(self):
        return f"Sine(scale={self.scale}, freq={self.freq}, base={self.base})"


class PiecewiseFrozen(Schedule):
    """Follows ``inner`` until s_freeze, constant afterwards (C^0 junction)."""

    def __init__(self, inner: Schedule, s_freeze: float):
        self.inner = inner
        self.s_freeze = float(s_freeze)

    def value(self, s):
        s = np.asarray(s, dtype=float)
        return self.inner.value(np.minimum(s, self.s_freeze))

    def derivative(self, s):
        s = np.asarray(s, dtype=float)
        return np.where(s < self.s_freeze, self.inner.derivative(np.minimum(s, self.s_freeze)), 0.0)


def schedule_from_config(node, horizon: float) -> Schedule:
    if isinstance(node, (int, float)):
        return Constant(node)
    if not isinstance(node, dict) or "kind" not in node:
        raise ConfigError(f"schedule must be a number or a mapping with 'kind': {node!r}")
    kind = node["kind"]
    try:
        if kind == "constant":
            return Constant(node["value"])
        if kind == "linear":
            return Linear(node["start"], node["end"], horizon)
        if kind == "sine":
            return Sine(node["scale"], node.get("frequency", 1.0), node.get("base", 0.0))
    except KeyError as exc:
        raise ConfigError(f"schedule {kind!r} is missing field {exc}") from None
    raise ConfigError(f"unknown schedule kind {kind!r}")


# ---------------------------------------------------------------------------
# potentials
# ---------------------------------------------------------------------------

class Potential:
    """Evaluator bundle for a confining potential V(x, s).

    All methods accept states of shape (..., n) and a scalar time; they
    return arrays of shape (...,), (..., n) or (..., n, n) as appropriate.
    """

    dimension: int
    is_quadratic = False

    def v(self, x, s):
        raise NotImplementedError

    def dv_ds(self, x, s):
        raise NotImplementedError

    def grad(self, x, s):
        raise NotImplementedError

    def hess(self, x, s):
        raise NotImplementedError

    def dgrad_ds(self, x, s):
        """Time derivative of the gradient (needed by Lipschitz-rate bounds)."""
        raise NotImplementedError

    def envelope(self, s, beta):
        """(center, std) of a Gaussian that dominates the Gibbs tail at time s."""
        raise NotImplementedError


class QuadraticPotential(Potential):
    """V(x, s) = k(s) |x - mu(s) 1|^2 / 2 with scalar schedules k > 0, mu."""

    is_quadratic = True

    def __init__(self, stiffness: Schedule, center: Schedule | None = None, dimension: int = 1):
        self.k = stiffness
        self.mu = center if center is not None else Constant(0.0)
        self.dimension = int(dimension)

    def _dev(self, x, s):
        return np.asarray(x, dtype=float) - self.mu.value(s)

    def v(self, x, s):
        d = self._dev(x, s)
        return 0.5 * self.k.value(s) * np.sum(d * d, axis=-1)

    def dv_ds(self, x, s):
        d = self._dev(x, s)
        return (0.5 * self.k.derivative(s) * np.sum(d * d, axis=-1)
                - self.k.value(s) * self.mu.derivative(s) * np.sum(d, axis=-1))

    def grad(self, x, s):
        return self.k.value(s) * self._dev(x, s)

    def hess(self, x, s):
        x = np.asarray(x, dtype=float)
        eye = np.eye(self.dimension)
        return self.k.value(s) * np.broadcast_to(eye, x.shape + (self.dimension,)).copy()

    def dgrad_ds(self, x, s):
        d = self._dev(x, s)
        return self.k.derivative(s) * d - self.k.value(s) * self.mu.derivative(s) * np.ones_like(d)

    def envelope(self, s, beta):
        k = float(self.k.value(s))
        if k <= 0:
            raise SpecError("quadratic potential requires positive stiffness")
        return float(self.mu.value(s)), 1.0 / math.sqrt(beta * k)


class TanhPerturbedPotential(Potential):
    """V(x, s) = x^2/2 + a(s) tanh(x), a bounded perturbation of a well (1D)."""

    dimension = 1

    def __init__(self, amplitude: Schedule):
        self.a = amplitude

    def v(self, x, s):
        x0 = np.asarray(x, dtype=float)[..., 0]
        return 0.5 * x0 * x0 + self.a.value(s) * np.tanh(x0)

    def dv_ds(self, x, s):
        x0 = np.asarray(x, dtype=float)[..., 0]
        return self.a.derivative(s) * np.tanh(x0)

    def grad(self, x, s):
        x0 = np.asarray(x, dtype=float)[..., 0]
        sech2 = 1.0 / np.cosh(x0) ** 2
        return (x0 + self.a.value(s) * sech2)[..., None]

    def hess(self, x, s):
        x0 = np.asarray(x, dtype=float)[..., 0]
        t = np.tanh(x0)
        sech2 = 1.0 - t * t
        return (1.0 - 2.0 * self.a.value(s) * t * sech2)[..., None, None]

    def dgrad_ds(self, x, s):
        x0 = np.asarray(x, dtype=float)[..., 0]
        sech2 = 1.0 / np.cosh(x0) ** 2
        return (self.a.derivative(s) * sech2)[..., None]

    def envelope(self, s, beta):
        # e^{-beta V} <= e^{beta |a|} e^{-beta x^2 / 2}: a unit-stiffness tail.
        return 0.0, 1.0 / math.sqrt(beta)


# ---------------------------------------------------------------------------
# circulation fields (divergence-free relative to the Gibbs weight)
# ---------------------------------------------------------------------------

class Circulation:
    """Evaluator bundle for the circulation drift J(x, s) and its divergence."""

    def j(self, x, s):
        raise NotImplementedError

    def div_j(self, x, s):
        raise NotImplementedError


class NoCirculation(Circulation):
    def j(self, x, s):
        return np.zeros_like(np.asarray(x, dtype=float))

    def div_j(self, x, s):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape[:-1])


class RotationCirculation(Circulation):
    """J(x) = rate * (x_2, -x_1): a solenoidal swirl, radially tangent (n = 2)."""

    def __init__(self, rate: float):
        self.rate = float(rate)

    def j(self, x, s):
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        out[..., 0] = self.rate * x[..., 1]
        out[..., 1] = -self.rate * x[..., 0]
        return out

    def div_j(self, x, s):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape[:-1])


class RadialLinearCirculation(Circulation):
    """J(x) = rate * x.  Generally *not* Gibbs-compatible; used to exercise
    the validator's failure path."""

    def __init__(self, rate: float = 1.0):
        self.rate = float(rate)

    def j(self, x, s):
        return self.rate * np.asarray(x, dtype=float)

    def div_j(self, x, s):
        x = np.asarray(x, dtype=float)
        return self.rate * x.shape[-1] * np.ones(x.shape[:-1])


# ---------------------------------------------------------------------------
# diffusion factors
# ---------------------------------------------------------------------------

class DiffusionFactor:
    """sigma(x, s) as an (n, m) matrix; gamma = sigma sigma^T.

    All built-in factors are state-independent, so div gamma = 0; the hook is
    kept in the drift for fidelity to the model class.
    """

    def __init__(self, base: np.ndarray, schedule: Schedule | None = None):
        base = np.atleast_2d(np.asarray(base, dtype=float))
        self.base = base
        self.schedule = schedule

    @property
    def shape(self):
        return self.base.shape

    def sigma(self, s) -> np.ndarray:
        if self.schedule is None:
            return self.base
        return float(self.schedule.value(s)) * self.base

    def gamma(self, s) -> np.ndarray:
        sig = self.sigma(s)
        return sig @ sig.T

    def div_gamma(self, x, s):
        x = np.asarray(x, dtype=float)
        return np.zeros_like(x)

    @classmethod
    def isotropic(cls, dimension: int, value: float = 1.0,
                  schedule: Schedule | None = None) -> "DiffusionFactor":
        return cls(value * np.eye(dimension), schedule)


# ---------------------------------------------------------------------------
# specifications
# ---------------------------------------------------------------------------

@dataclass
class BrownianSpec:
    """Overdamped diffusion on R^n with a time-dependent confining potential."""

    potential: Potential
    beta: float
    horizon: float
    circulation: Circulation = field(default_factory=NoCirculation)
    diffusion: DiffusionFactor | None = None
    gamma_minus: Optional[float] = None

    def __post_init__(self):
        if self.beta <= 0:
            raise SpecError("beta must be positive")
        if self.horizon <= 0:
            raise SpecError("horizon must be positive")
        if self.diffusion is None:
            self.diffusion = DiffusionFactor.isotropic(self.potential.dimension)
        n, m = self.diffusion.shape
        if n != self.potential.dimension:
            raise SpecError("diffusion factor row count must match the state dimension")
        if m < n:
            raise SpecError("diffusion factor must have at least n columns")

    @property
    def dimension(self) -> int:
        return self.potential.dimension

    def drift(self, x, s):
        """J - gamma grad V + beta^-1 div gamma, batched over x."""
        g = self.diffusion.gamma(s)
        gv = np.asarray(self.potential.grad(x, s))
        return (self.circulation.j(x, s) - gv @ g.T
                + self.diffusion.div_gamma(x, s) / self.beta)

    def reversed(self) -> "BrownianSpec":
        """The reverse process, as a Brownian spec in its own right.

        Coefficients are evaluated at mirrored time T - s and the circulation
        flips sign; potential and diffusion mirror in time.
        """
        return BrownianSpec(
            potential=_TimeMirroredPotential(self.potential, self.horizon),
            beta=self.beta,
            horizon=self.horizon,
            circulation=_NegatedMirroredCirculation(self.circulation, self.horizon),
            diffusion=_TimeMirroredDiffusion(self.diffusion, self.horizon),
            gamma_minus=self.gamma_minus,
        )


class _MirroredSchedule(Schedule):
    def __init__(self, inner: Schedule, horizon: float):
        self.inner = inner
        self.T = float(horizon)

    def value(self, s):
        return self.inner.value(self.T - np.asarray(s, dtype=float))

    def derivative(self, s):
        return -self.inner.derivative(self.T - np.asarray(s, dtype=float))


class _TimeMirroredPotential(Potential):
    def __init__(self, inner: Potential, horizon: float):
        self.inner = inner
        self.T = float(horizon)
        self.dimension = inner.dimension
        self.is_quadratic = inner.is_quadratic
        if inner.is_quadratic:
            self.k = _MirroredSchedule(inner.k, horizon)
            self.mu = _MirroredSchedule(inner.mu, horizon)

    def v(self, x, s):
        return self.inner.v(x, self.T - s)

    def dv_ds(self, x, s):
        return -self.inner.dv_ds(x, self.T - s)

    def grad(self, x, s):
        return self.inner.grad(x, self.T - s)

    def hess(self, x, s):
        return self.inner.hess(x, self.T - s)

    def dgrad_ds(self, x, s):
        return -self.inner.dgrad_ds(x, self.T - s)

    def envelope(self, s, beta):
        return self.inner.envelope(self.T - s, beta)


class _NegatedMirroredCirculation(Circulation):
    def __init__(self, inner: Circulation, horizon: float):
        self.inner = inner
        self.T = float(horizon)

    def j(self, x, s):
        return -self.inner.j(x, self.T - s)

    def div_j(self, x, s):
        return -self.inner.div_j(x, self.T - s)


class _TimeMirroredDiffusion(DiffusionFactor):
    def __init__(self, inner: DiffusionFactor, horizon: float):
        self.inner = inner
        self.T = float(horizon)
        self.base = inner.base

    @property
    def shape(self):
        return self.inner.shape

    def sigma(self, s):
        return self.inner.sigma(self.T - s)

    def div_gamma(self, x, s):
        return self.inner.div_gamma(x, self.T - s)


@dataclass
class LangevinSpec:
    """Kinetic diffusion on R^n x R^n.

    The noise enters momenta only, with factor sqrt(xi) I_n, so the friction
    matrix is xi M^-1 and the invariant family is exp(-beta H)/Zeta(s) with
    H = V(q, s) + p^T M^-1 p / 2.
    """

    potential: Potential
    beta: float
    horizon: float
    xi: float = 1.0
    mass: np.ndarray | None = None

    def __post_init__(self):
        if self.beta <= 0:
            raise SpecError("beta must be positive")
        if self.horizon <= 0:
            raise SpecError("horizon must be positive")
        if self.xi <= 0:
            raise SpecError("friction xi must be positive")
        n = self.potential.dimension
        if self.mass is None:
            self.mass = np.eye(n)
        self.mass = np.asarray(self.mass, dtype=float)
        if self.mass.shape != (n, n):
            raise SpecError("mass matrix must be n x n")
        if not np.allclose(self.mass, self.mass.T):
            raise SpecError("mass matrix must be symmetric")
        eigs = np.linalg.eigvalsh(self.mass)
        if eigs.min() <= 0:
            raise SpecError("mass matrix must be positive definite")
        self.mass_inv = np.linalg.inv(self.mass)

    @property
    def dimension(self) -> int:
        return self.potential.dimension

    def hamiltonian(self, q, p, s):
        p = np.asarray(p, dtype=float)
        kinetic = 0.5 * np.einsum("...i,ij,...j->...", p, self.mass_inv, p)
        return self.potential.v(q, s) + kinetic

    def dh_ds(self, q, p, s):
        return self.potential.dv_ds(q, s)


# ---------------------------------------------------------------------------
# partition function and Gibbs snapshots
# ---------------------------------------------------------------------------

@dataclass
class GibbsSnapshot:
    """Partition function and free energy of the frozen potential at time s."""

    s: float
    z: float
    free_energy: float
    error: float


def _gauss_legendre_panels(lo: float, hi: float, panels: int, order: int):
    nodes, weights = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    x = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
    w = (half[:, None] * weights[None, :]).ravel()
    return x, w


def _boltzmann_integral(spec: BrownianSpec, s: float, radius_std: float,
                        panels: int, order: int) -> float:
    n = spec.dimension
    center, std = spec.potential.envelope(s, spec.beta)
    lo, hi = center - radius_std * std, center + radius_std * std
    x1, w1 = _gauss_legendre_panels(lo, hi, panels, order)
    if n == 1:
        vals = np.exp(-spec.beta * spec.potential.v(x1[:, None], s))
        edge = math.exp(-spec.beta * float(spec.potential.v(np.array([[lo]]), s)[0]))
        z = float(np.sum(w1 * vals))
    elif n == 2:
        xx, yy = np.meshgrid(x1, x1, indexing="ij")
        pts = np.stack([xx, yy], axis=-1)
        vals = np.exp(-spec.beta * spec.potential.v(pts, s))
        z = float(np.einsum("i,j,ij->", w1, w1, vals))
        edge = math.exp(-spec.beta * float(spec.potential.v(np.array([[lo, center]]), s)[0]))
    else:
        raise NotImplementedError("quadrature partition function supports n <= 2")
    if edge * (hi - lo) ** n > 1e-12 * max(z, 1e-300):
        raise QuadratureError(
            "integration box too small: boundary Boltzmann weight is not negligible")
    return z


def partition_function(spec: BrownianSpec, s: float, radius_std: float = 8.0) -> GibbsSnapshot:
    """Z(s) and F(s) = -ln Z(s)/beta by composite Gauss-Legendre quadrature.

    The error estimate is the difference between two refinement levels; the
    box spans ``radius_std`` envelope standard deviations and the boundary
    weight is checked to be negligible.
    """
    panels = max(8, int(2 * radius_std))
    z_coarse = _boltzmann_integral(spec, s, radius_std, panels, 24)
    z = _boltzmann_integral(spec, s, radius_std, 2 * panels, 32)
    err = abs(z - z_coarse)
    if not (z > 0) or not math.isfinite(z):
        raise QuadratureError("partition function quadrature returned a non-positive value")
    return GibbsSnapshot(s=float(s), z=z, free_energy=-math.log(z) / spec.beta, error=err)


def langevin_partition_function(spec: LangevinSpec, s: float,
                                radius_std: float = 8.0) -> GibbsSnapshot:
    """Phase-space partition function: position quadrature times the exact
    Gaussian momentum integral (2 pi / beta)^{n/2} det(M)^{1/2}."""
    marginal = BrownianSpec(potential=spec.potential, beta=spec.beta, horizon=spec.horizon)
    snap = partition_function(marginal, s, radius_std)
    n = spec.dimension
    p_mass = (2.0 * math.pi / spec.beta) ** (n / 2.0) * math.sqrt(np.linalg.det(spec.mass))
    z = snap.z * p_mass
    return GibbsSnapshot(s=float(s), z=z, free_energy=-math.log(z) / spec.beta,
                         error=snap.error * p_mass)


def free_energy_difference(spec: BrownianSpec) -> float:
    """F(T) - F(0) of the transient equilibrium family."""
    return partition_function(spec, spec.horizon).free_energy - partition_function(spec, 0.0).free_energy


# ---------------------------------------------------------------------------
# Gibbs densities
# ---------------------------------------------------------------------------

def gibbs_gaussian(spec: BrownianSpec, s: float):
    """Exact Gaussian Gibbs law for a quadratic potential."""
    from .gaussian_oracle import GaussianLaw

    if not spec.potential.is_quadratic:
        raise SpecError("gibbs_gaussian requires a quadratic potential")
    pot = spec.potential
    k = float(pot.k.value(s))
    mu = float(pot.mu.value(s))
    n = spec.dimension
    return GaussianLaw(mean=np.full(n, mu), cov=np.eye(n) / (spec.beta * k))


def langevin_gibbs_gaussian(spec: LangevinSpec, s: float):
    """Exact phase-space Gaussian Gibbs law for a quadratic potential."""
    from .gaussian_oracle import GaussianLaw

    if not spec.potential.is_quadratic:
        raise SpecError("langevin_gibbs_gaussian requires a quadratic potential")
    pot = spec.potential
    k = float(pot.k.value(s))
    mu = float(pot.mu.value(s))
    n = spec.dimension
    mean = np.concatenate([np.full(n, mu), np.zeros(n)])
    cov = np.zeros((2 * n, 2 * n))
    cov[:n, :n] = np.eye(n) / (spec.beta * k)
    cov[n:, n:] = spec.mass / spec.beta
    return GaussianLaw(mean=mean, cov=cov)


def gibbs_grid(spec: BrownianSpec, s: float, lo: float, hi: float, cells: int):
    """Cell-centred Gibbs density on a uniform 1D grid, normalised on the grid."""
    from .fokker_planck import GridDensity1D

    x = GridDensity1D.centers(lo, hi, cells)
    vals = np.exp(-spec.beta * spec.potential.v(x[:, None], s))
    h = (hi - lo) / cells
    vals = vals / (np.sum(vals) * h)
    return GridDensity1D(lo=lo, hi=hi, values=vals, s=float(s))


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

@dataclass
class ValidationReport:
    ok: bool
    max_stationarity_residual: float
    min_gamma_eigenvalue: float
    gamma_floor: float
    messages: list[str]


def validate_spec(spec, tol: float = 1e-8, probes: int = 41,
                  radius_std: float = 6.0) -> ValidationReport:
    """Check Gibbs compatibility of the circulation and uniform ellipticity.

    The stationarity residual is |div J - beta J . grad V| e^{-beta V}
    evaluated on a probe grid and a small set of times; the ellipticity check
    compares the smallest eigenvalue of gamma with the declared floor.
    """
    messages: list[str] = []
    if isinstance(spec, LangevinSpec):
        # The Hamiltonian transport part is structurally Gibbs-compatible and
        # the momentum noise xi I_n is uniformly elliptic by construction.
        return ValidationReport(True, 0.0, spec.xi, spec.xi,
                                ["langevin spec: structural checks only"])

    n = spec.dimension
    times = np.linspace(0.0, spec.horizon, 9)
    max_resid = 0.0
    for s in times:
        center, std = spec.potential.envelope(s, spec.beta)
        axis = np.linspace(center - radius_std * std, center + radius_std * std, probes)
        if n == 1:
            pts = axis[:, None]
        elif n == 2:
            xx, yy = np.meshgrid(axis, axis, indexing="ij")
            pts = np.stack([xx.ravel(), yy.ravel()], axis=-1)
        else:
            raise NotImplementedError("validate_spec probes support n <= 2")
        jv = spec.circulation.j(pts, s)
        divj = spec.circulation.div_j(pts, s)
        gv = spec.potential.grad(pts, s)
        weight = np.exp(-spec.beta * spec.potential.v(pts, s))
        resid = np.abs(divj - spec.beta * np.sum(jv * gv, axis=-1)) * weight
        max_resid = max(max_resid, float(resid.max()))

    g_eigs = [np.linalg.eigvalsh(spec.diffusion.gamma(s)).min() for s in times]
    g_min = float(min(g_eigs))
    floor = spec.gamma_minus if spec.gamma_minus is not None else 0.0

    ok = True
    if max_resid > tol:
        ok = False
        messages.append(
            f"circulation breaks Gibbs stationarity: residual {max_resid:.3e} > {tol:.1e}")
    if spec.gamma_minus is not None and g_min < spec.gamma_minus - 1e-12:
        ok = False
        messages.append(
            f"ellipticity floor violated: min eig(gamma) {g_min:.3e} < declared {spec.gamma_minus}")
    if g_min <= 0:
        ok = False
        messages.append("gamma is not positive definite")
    if ok:
        messages.append("spec ok")
    return ValidationReport(ok, max_resid, g_min, floor, messages)


# ---------------------------------------------------------------------------
# configuration parsing (external interface)
# ---------------------------------------------------------------------------

def spec_from_config(cfg: dict):
    """Build a BrownianSpec or LangevinSpec from a parsed configuration mapping."""
    if not isinstance(cfg, dict):
        raise ConfigError("spec configuration must be a mapping")
    version = cfg.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version!r}; expected {SCHEMA_VERSION}")
    kind = cfg.get("kind")
    if kind not in ("brownian", "langevin"):
        raise ConfigError(f"spec kind must be 'brownian' or 'langevin', got {kind!r}")
    try:
        horizon = float(cfg["horizon"])
        beta = float(cfg["beta"])
    except KeyError as exc:
        raise ConfigError(f"spec is missing required field {exc}") from None
    dim = int(cfg.get("dimension", 1))

    pot_cfg = cfg.get("potential")
    if not isinstance(pot_cfg, dict) or "family" not in pot_cfg:
        raise ConfigError("potential must be a mapping with a 'family'")
    family = pot_cfg["family"]
    if family in ("quadratic", "translated_quadratic"):
        stiffness = schedule_from_config(pot_cfg.get("stiffness", 1.0), horizon)
        center = schedule_from_config(pot_cfg.get("center", 0.0), horizon)
        potential = QuadraticPotential(stiffness, center, dim)
    elif family == "tanh_perturbation":
        if dim != 1:
            raise ConfigError("tanh_perturbation potential is one-dimensional")
        amplitude = schedule_from_config(pot_cfg.get("amplitude", 0.0), horizon)
        potential = TanhPerturbedPotential(amplitude)
    else:
        raise ConfigError(f"unknown potential family {family!r}")

    if kind == "langevin":
        mass = cfg.get("mass")
        mass = np.asarray(mass, dtype=float) if mass is not None else None
        return LangevinSpec(potential=potential, beta=beta, horizon=horizon,
                            xi=float(cfg.get("friction", 1.0)), mass=mass)

    circ_cfg = cfg.get("circulation", {"family": "none"})
    fam = circ_cfg.get("family", "none")
    if fam == "none":
        circulation = NoCirculation()
    elif fam == "rotation":
        if dim != 2:
            raise ConfigError("rotation circulation requires dimension 2")
        circulation = RotationCirculation(float(circ_cfg.get("rate", 1.0)))
    elif fam == "radial_linear":
        circulation = RadialLinearCirculation(float(circ_cfg.get("rate", 1.0)))
    else:
        raise ConfigError(f"unknown circulation family {fam!r}")

    diff_cfg = cfg.get("diffusion", {"family": "constant", "value": 1.0})
    fam = diff_cfg.get("family", "constant")
    if fam == "constant":
        diffusion = DiffusionFactor.isotropic(dim, float(diff_cfg.get("value", 1.0)))
    elif fam == "schedule":
        diffusion = DiffusionFactor.isotropic(
            dim, 1.0, schedule_from_config(diff_cfg.get("value", 1.0), horizon))
    elif fam == "matrix":
        diffusion = DiffusionFactor(np.asarray(diff_cfg["value"], dtype=float))
    else:
        raise ConfigError(f"unknown diffusion family {fam!r}")

    gamma_minus = cfg.get("gamma_minus")
    return BrownianSpec(potential=potential, beta=beta, horizon=horizon,
                        circulation=circulation, diffusion=diffusion,
                        gamma_minus=float(gamma_minus) if gamma_minus is not None else None)
