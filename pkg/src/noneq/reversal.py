"""Equivalence between the re-reversed reverse process and steered dynamics.

Running the reverse process and then flipping its time axis produces a
forward-time diffusion whose drift is the reverse drift negated plus a score
correction (2/beta) gamma grad ln rho, with rho the reverse-process law at
the mirrored instant.  That law factorises as exp(-beta V) g / Z(T), so the
correction collapses to -2 gamma grad U: the re-reversed process IS the
forward process driven by the optimal feedback, started from the tilted
initial law.  This module checks the statement three ways: pointwise on
drifts (analytic Gaussian laws), distributionally on simulated marginals
(moments + Kolmogorov-Smirnov), and pointwise on grid densities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import ks_2samp

from .control import GridControl1D, LangevinRiccati
from .errors import SpecError
from .fokker_planck import GridDensity1D, _box_from_spec, solve_fp_1d
from .gaussian_oracle import BrownianRiccati, GaussianLaw, langevin_propagator, ou_moments_path
from .model import (BrownianSpec, LangevinSpec, gibbs_gaussian, langevin_gibbs_gaussian,
                    partition_function)
from .sde import ControlField, simulate_forward, simulate_langevin, simulate_reverse

KS_CRITICAL_1PCT = 1.6276  # asymptotic two-sample coefficient at the 1% level


@dataclass
class DriftField:
    """A drift b(x, s) together with a provenance tag for reports."""

    evaluate: object  # Callable[[np.ndarray, float], np.ndarray]
    tag: str

    def __call__(self, x, s):
        return self.evaluate(x, s)


def reversal_drift(spec, score_fn) -> DriftField:
    """Drift of the reverse process run backwards, as a forward-time field.

    ``score_fn(x, u)`` must give grad ln of the reverse-process law at reverse
    time u (momentum-block gradient only in the kinetic case).
    """
    if isinstance(spec, LangevinSpec):
        return DriftField(lambda x, s: kinetic_rereversed_drift(spec, score_fn, x, s),
                          tag="rereversed-kinetic")
    return DriftField(lambda x, s: rereversed_drift(spec, score_fn, x, s),
                      tag="rereversed")


def controlled_drift(spec, control_fn) -> DriftField:
    """Forward drift plus the steering term induced by a feedback control."""
    if isinstance(spec, LangevinSpec):
        return DriftField(lambda x, s: kinetic_steered_drift(spec, control_fn, x, s),
                          tag="steered-kinetic")
    return DriftField(lambda x, s: steered_drift(spec, control_fn, x, s),
                      tag="steered")


# ---------------------------------------------------------------------------
# drift-level identity
# ---------------------------------------------------------------------------

@dataclass
class DriftIdentityReport:
    times: np.ndarray
    residuals: np.ndarray  # per-time max over the probe cloud

    @property
    def max_residual(self) -> float:
        return float(np.max(self.residuals))


def rereversed_drift(spec: BrownianSpec, score_fn, x, s: float) -> np.ndarray:
    """Drift of the time-flipped reverse process at forward time s.

    ``score_fn(x, u)`` must return grad ln of the reverse-process law at
    reverse time u.  The formula is -b_R(x, T-s) + (2/beta) gamma(s) score.
    """
    rspec = spec.reversed()
    u = spec.horizon - s
    score = np.asarray(score_fn(x, u), dtype=float)
    return -rspec.drift(x, u) + (2.0 / spec.beta) * score @ spec.diffusion.gamma(s).T


def steered_drift(spec: BrownianSpec, control_fn, x, s: float) -> np.ndarray:
    u = np.asarray(control_fn(x, s), dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    return spec.drift(x, s) + u @ spec.diffusion.sigma(s).T


def drift_identity_check(spec: BrownianSpec, riccati: BrownianRiccati, times,
                         probe_std: float = 6.0, n_probe: int = 41,
                         substeps: int = 64) -> DriftIdentityReport:
    """Analytic check for quadratic dynamics.

    The reverse-process law is transported exactly (Gaussian moments), its
    score is closed-form, and the steering field comes from the quadratic
    value flow.
    """
    times = np.asarray(times, dtype=float)
    rspec = spec.reversed()
    rev_times = np.sort(np.unique(np.concatenate([[0.0], spec.horizon - times])))
    laws = ou_moments_path(rspec, gibbs_gaussian(spec, spec.horizon), rev_times,
                           substeps=substeps)
    law_at = {float(t): law for t, law in zip(rev_times, laws)}

    resid = np.empty(len(times))
    for i, s in enumerate(times):
        u = spec.horizon - float(s)
        law = law_at[float(u)]
        center, std = spec.potential.envelope(float(s), spec.beta)
        pts = np.linspace(center - probe_std * std, center + probe_std * std,
                          n_probe)[:, None]

        def score(x, _u, _law=law):
            return _law.score(x)

        lhs = rereversed_drift(spec, score, pts, float(s))
        rhs = steered_drift(spec, riccati.control, pts, float(s))
        resid[i] = float(np.max(np.abs(lhs - rhs)))
    return DriftIdentityReport(times=times, residuals=resid)


def kinetic_rereversed_drift(spec: LangevinSpec, score_p_fn, x, s: float) -> np.ndarray:
    """Kinetic analogue: only the momentum block receives the score correction."""
    n = spec.dimension
    u = spec.horizon - s
    q, p = x[:, :n], x[:, n:]
    eta_grad = spec.potential.grad(q, s)
    # reverse drift at reverse time u reads the potential at s and flips the
    # Hamiltonian transport
    drift_q = -(-(p @ spec.mass_inv.T))
    drift_p = -(eta_grad - spec.xi * (p @ spec.mass_inv.T))
    score_p = np.asarray(score_p_fn(x, u), dtype=float)
    drift_p = drift_p + (2.0 * spec.xi / spec.beta) * score_p
    return np.concatenate([drift_q, drift_p], axis=1)


def kinetic_steered_drift(spec: LangevinSpec, control_fn, x, s: float) -> np.ndarray:
    n = spec.dimension
    q, p = x[:, :n], x[:, n:]
    drift_q = p @ spec.mass_inv.T
    drift_p = -spec.potential.grad(q, s) - spec.xi * (p @ spec.mass_inv.T)
    u = np.asarray(control_fn(x, s), dtype=float)
    return np.concatenate([drift_q, drift_p + math.sqrt(spec.xi) * u], axis=1)


def kinetic_drift_identity_check(spec: LangevinSpec, riccati: LangevinRiccati, times,
                                 probe_std: float = 5.0, n_probe: int = 13,
                                 substeps: int = 64) -> DriftIdentityReport:
    times = np.asarray(times, dtype=float)
    rev_times = np.sort(np.unique(np.concatenate([[0.0], spec.horizon - times])))
    prop = langevin_propagator(spec, rev_times, reverse=True, substeps=substeps)
    laws = prop.push(langevin_gibbs_gaussian(spec, spec.horizon))
    law_at = {float(t): law for t, law in zip(rev_times, laws)}
    n = spec.dimension
    if n != 1:
        raise SpecError("the kinetic drift check probes a 1D position grid")

    resid = np.empty(len(times))
    for i, s in enumerate(times):
        u = spec.horizon - float(s)
        law = law_at[float(u)]
        qc = np.linspace(-probe_std, probe_std, n_probe)
        pc = np.linspace(-probe_std, probe_std, n_probe)
        qq, pp = np.meshgrid(qc, pc, indexing="ij")
        pts = np.stack([qq.ravel(), pp.ravel()], axis=-1)

        def score_p(x, _u, _law=law):
            return _law.score(x)[:, n:]

        lhs = kinetic_rereversed_drift(spec, score_p, pts, float(s))
        rhs = kinetic_steered_drift(spec, riccati.control, pts, float(s))
        resid[i] = float(np.max(np.abs(lhs - rhs)))
    return DriftIdentityReport(times=times, residuals=resid)


# ---------------------------------------------------------------------------
# marginal-law equivalence on simulated ensembles
# ---------------------------------------------------------------------------

@dataclass
class MatchedMarginalRow:
    time: float
    coordinate: int
    mean_gap: float
    mean_tol: float
    var_gap: float
    var_tol: float
    ks_stat: float
    ks_crit: float

    @property
    def ok(self) -> bool:
        return (self.mean_gap <= self.mean_tol and self.var_gap <= self.var_tol
                and self.ks_stat <= self.ks_crit)

    def line(self) -> str:
        flag = "ok " if self.ok else "FAIL"
        return (f"[{flag}] s={self.time:6.3f} coord={self.coordinate} "
                f"mean gap {self.mean_gap:.3e} (tol {self.mean_tol:.3e}) "
                f"var gap {self.var_gap:.3e} (tol {self.var_tol:.3e}) "
                f"KS {self.ks_stat:.4f} (crit {self.ks_crit:.4f})")


@dataclass
class LawEquivalenceReport:
    rows: list = field(default_factory=list)
    n_forward: int = 0
    n_reverse: int = 0

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.rows)

    def summary(self) -> str:
        head = (f"matched marginals: {self.n_forward} steered forward paths vs "
                f"{self.n_reverse} reverse paths\n")
        return head + "\n".join(r.line() for r in self.rows)


def _compare_samples(rows, t, fwd: np.ndarray, rev: np.ndarray):
    n1, n2 = len(fwd), len(rev)
    ks_crit = KS_CRITICAL_1PCT * math.sqrt((n1 + n2) / (n1 * n2))
    for c in range(fwd.shape[1]):
        a, b = fwd[:, c], rev[:, c]
        m1, m2 = a.mean(), b.mean()
        v1, v2 = a.var(ddof=1), b.var(ddof=1)
        mean_tol = 4.0 * math.sqrt(v1 / n1 + v2 / n2)
        m4_1 = np.mean((a - m1) ** 4)
        m4_2 = np.mean((b - m2) ** 4)
        var_tol = 4.0 * math.sqrt(max(m4_1 - v1 ** 2, 0.0) / n1
                                  + max(m4_2 - v2 ** 2, 0.0) / n2)
        ks = float(ks_2samp(a, b, method="asymp").statistic)
        rows.append(MatchedMarginalRow(time=float(t), coordinate=c,
                                       mean_gap=abs(m1 - m2), mean_tol=mean_tol,
                                       var_gap=abs(v1 - v2), var_tol=var_tol,
                                       ks_stat=ks, ks_crit=ks_crit))


def law_equivalence_test(spec: BrownianSpec, riccati: BrownianRiccati,
                         n_paths: int, dt: float, seed: int = 0,
                         times=None) -> LawEquivalenceReport:
    """Steered forward ensemble vs time-flipped reverse ensemble (overdamped).

    The forward run starts from the tilted initial law and follows the
    optimal feedback; the reverse run starts from the horizon Gibbs law and
    is uncontrolled.  Marginals at forward time s are matched against reverse
    marginals at T - s.
    """
    T = spec.horizon
    if times is None:
        times = np.linspace(0.0, T, 6)[1:]
    times = np.asarray(times, dtype=float)
    fwd = simulate_forward(spec, n_paths, dt, seed=seed,
                           init=riccati.tilted_initial_law(),
                           store_times=list(times),
                           control=ControlField(riccati.control, tag="riccati"))
    rev = simulate_reverse(spec, n_paths, dt, seed=seed + 104729,
                           store_times=[T - t for t in times])
    report = LawEquivalenceReport(n_forward=int(fwd.finite().sum()),
                                  n_reverse=int(rev.finite().sum()))
    for t in times:
        a = fwd.states_at(float(t))[fwd.finite()]
        b = rev.states_at(float(T - t))[rev.finite()]
        _compare_samples(report.rows, t, a, b)
    return report


def kinetic_law_equivalence_test(spec: LangevinSpec, riccati: LangevinRiccati,
                                 n_paths: int, dt: float, seed: int = 0,
                                 times=None) -> LawEquivalenceReport:
    """Kinetic version of the matched-marginal test on stacked (q, p) states."""
    T = spec.horizon
    if times is None:
        times = np.linspace(0.0, T, 6)[1:]
    times = np.asarray(times, dtype=float)
    fwd = simulate_langevin(spec, n_paths, dt, seed=seed,
                            init=riccati.tilted_initial_law(),
                            store_times=list(times),
                            control=riccati.control_field())
    rev = simulate_langevin(spec, n_paths, dt, seed=seed + 104729,
                            store_times=[T - t for t in times], reverse=True)
    report = LawEquivalenceReport(n_forward=int(fwd.finite().sum()),
                                  n_reverse=int(rev.finite().sum()))
    for t in times:
        a = fwd.states_at(float(t))[fwd.finite()]
        b = rev.states_at(float(T - t))[rev.finite()]
        _compare_samples(report.rows, t, a, b)
    return report


# ---------------------------------------------------------------------------
# density-level check on grids
# ---------------------------------------------------------------------------

@dataclass
class ReverseDensityReport:
    times: np.ndarray        # reverse times that were compared
    l1_errors: np.ndarray

    @property
    def max_l1(self) -> float:
        return float(np.max(self.l1_errors))


def reverse_density_check(spec: BrownianSpec, control: GridControl1D, dt: float,
                          cells: int = 800, radius_std: float = 10.0,
                          n_check: int = 5) -> ReverseDensityReport:
    """March the reverse-process density and compare with exp(-beta V) g / Z(T).

    Both solvers share the same box, so the comparison is pointwise in the
    cells; errors are reported in L1.  The final compared slice (reverse time
    T) doubles as a check that the reverse process ends in the tilted
    initial law.
    """
    if spec.dimension != 1:
        raise SpecError("reverse_density_check is one-dimensional")
    rspec = spec.reversed()
    lo, hi = _box_from_spec(rspec, radius_std)
    x = GridDensity1D.centers(lo, hi, cells)
    z_t = partition_function(spec, spec.horizon).z
    init = np.exp(-spec.beta * spec.potential.v(x[:, None], spec.horizon)) / z_t

    n_steps = int(round(spec.horizon / dt))
    record = max(1, n_steps // (4 * n_check))
    sol = solve_fp_1d(rspec, init, dt, cells=cells, radius_std=radius_std,
                      record_every=record)
    check_times = np.linspace(0.0, spec.horizon, n_check + 1)[1:]
    errs = np.empty(len(check_times))
    for i, u in enumerate(check_times):
        idx = int(np.argmin(np.abs(sol.times - u)))
        u_grid = float(sol.times[idx])
        rho = sol.snapshots[idx]
        s = spec.horizon - u_grid
        predicted = np.exp(-spec.beta * spec.potential.v(x[:, None], s)) \
            * control.g_at(x, s) / z_t
        errs[i] = float(np.sum(np.abs(rho - predicted)) * (hi - lo) / cells)
    return ReverseDensityReport(times=check_times, l1_errors=errs)


def grid_drift_identity_check(spec: BrownianSpec, control: GridControl1D, dt: float,
                              cells: int = 800, radius_std: float = 10.0,
                              n_check: int = 5, core_std: float = 4.0
                              ) -> DriftIdentityReport:
    """Drift-level identity along a finite-volume reverse run.

    The score is a centred difference of ln rho^R restricted to the core of
    the box; steering comes from the grid value function.  Agreement is
    limited by the spatial resolution (second-order differences), which sets
    the tolerance callers should use.
    """
    if spec.dimension != 1:
        raise SpecError("grid_drift_identity_check is one-dimensional")
    rspec = spec.reversed()
    lo, hi = _box_from_spec(rspec, radius_std)
    x = GridDensity1D.centers(lo, hi, cells)
    h = (hi - lo) / cells
    z_t = partition_function(spec, spec.horizon).z
    init = np.exp(-spec.beta * spec.potential.v(x[:, None], spec.horizon)) / z_t

    n_steps = int(round(spec.horizon / dt))
    record = max(1, n_steps // (4 * n_check))
    sol = solve_fp_1d(rspec, init, dt, cells=cells, radius_std=radius_std,
                      record_every=record)
    check_times = np.linspace(0.0, spec.horizon, n_check + 1)[1:]
    steer = control.control_field()
    resid = np.empty(len(check_times))
    fwd_times = np.empty(len(check_times))
    for i, u in enumerate(check_times):
        idx = int(np.argmin(np.abs(sol.times - u)))
        u_grid = float(sol.times[idx])
        s = spec.horizon - u_grid
        log_rho = np.log(np.maximum(sol.snapshots[idx], 1e-300))
        score = np.gradient(log_rho, h)
        center, std = spec.potential.envelope(s, spec.beta)
        core = np.abs(x - center) <= core_std * std
        pts = x[core][:, None]

        def score_fn(_x, _u, vals=score[core]):
            return vals[:, None]

        lhs = rereversed_drift(spec, score_fn, pts, s)
        rhs = steered_drift(spec, steer, pts, s)
        resid[i] = float(np.max(np.abs(lhs - rhs)))
        fwd_times[i] = s
    return DriftIdentityReport(times=fwd_times, residuals=resid)
