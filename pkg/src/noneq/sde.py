"""Path simulation for the overdamped and kinetic dynamics.

Euler-Maruyama is the base integrator.  Work is accumulated with the midpoint
rule on the explicit time derivative of the potential; the change-of-measure
exponent of a controlled run is accumulated from the *realised* noise
increments, so

    log dP/dP^u = -sqrt(beta/2) int u . dw - (beta/4) int |u|^2 ds

is available per path.  Paths that leave the finite range are flagged and
excluded from statistics; a run fails if more than a small fraction blow up.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import BlowUpError, SpecError
from .gaussian_oracle import GaussianLaw
from .model import BrownianSpec, LangevinSpec, gibbs_gaussian, langevin_gibbs_gaussian
from . import rng as rngmod

BLOWUP_FRACTION = 1e-3


@dataclass
class ControlField:
    """A feedback control u(x, s) valued in the noise space R^m."""

    evaluate: Callable[[np.ndarray, float], np.ndarray]
    tag: str = "custom"

    def __call__(self, x, s):
        return self.evaluate(x, s)


def zero_control(m: int) -> ControlField:
    return ControlField(lambda x, s: np.zeros(x.shape[:-1] + (m,)), tag="zero")


@dataclass
class TrajectoryEnsemble:
    """States, cumulative work and change-of-measure exponents on snapshot times."""

    times: np.ndarray        # (S,)
    states: np.ndarray       # (S, N, d)
    work: np.ndarray         # (S, N) cumulative work up to each snapshot
    log_weight: np.ndarray   # (S, N) cumulative Girsanov exponent
    flagged: np.ndarray      # (N,) blow-up flags
    seed: int
    dt: float
    kind: str

    @property
    def n_paths(self) -> int:
        return self.states.shape[1]

    @property
    def terminal_work(self) -> np.ndarray:
        return self.work[-1]

    @property
    def terminal_log_weight(self) -> np.ndarray:
        return self.log_weight[-1]

    def states_at(self, t: float) -> np.ndarray:
        idx = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[idx] - t) > 1e-9:
            raise KeyError(f"time {t} was not stored")
        return self.states[idx]

    def finite(self) -> np.ndarray:
        return ~self.flagged

    def to_csv(self, path, every: int = 1):
        """Long-format CSV: one row per stored time per path."""
        d = self.states.shape[2]
        cols = ",".join(f"x{i}" for i in range(d))
        with open(path, "w") as fh:
            fh.write(f"# kind={self.kind} seed={self.seed} dt={self.dt:.12g} "
                     f"units=dimensionless paths={self.n_paths}\n")
            fh.write(f"path,time,{cols},work,log_weight\n")
            for it, t in enumerate(self.times):
                for ip in range(0, self.n_paths, every):
                    xs = ",".join(f"{v:.12g}" for v in self.states[it, ip])
                    fh.write(f"{ip},{t:.12g},{xs},{self.work[it, ip]:.12g},"
                             f"{self.log_weight[it, ip]:.12g}\n")


def _time_grid(horizon: float, dt: float):
    n_steps = int(round(horizon / dt))
    if abs(n_steps * dt - horizon) > 1e-9 * max(1.0, horizon):
        raise SpecError("dt must divide the horizon")
    return n_steps


def _store_indices(store_times, dt, n_steps):
    if store_times is None:
        store_times = [0.0, n_steps * dt]
    idx = []
    for t in store_times:
        k = int(round(t / dt))
        if k < 0 or k > n_steps or abs(k * dt - t) > 1e-9:
            raise SpecError(f"store time {t} is not on the step grid")
        idx.append(k)
    idx = sorted(set(idx))
    return idx, np.array([k * dt for k in idx])


def gibbs_sampler(spec, s: float = 0.0) -> Callable[[np.random.Generator, int], np.ndarray]:
    """Exact (quadratic) or rejection (1D) sampler of the Gibbs law at time s."""
    if isinstance(spec, LangevinSpec):
        if spec.potential.is_quadratic:
            law = langevin_gibbs_gaussian(spec, s)
            return lambda gen, size: law.sample(gen, size)
        qs = _rejection_sampler_1d(spec.potential, spec.beta, s)
        n = spec.dimension
        p_chol = np.linalg.cholesky(spec.mass / spec.beta)

        def sample(gen, size):
            q = qs(gen, size)
            p = gen.standard_normal((size, n)) @ p_chol.T
            return np.concatenate([q, p], axis=1)

        return sample
    if spec.potential.is_quadratic:
        law = gibbs_gaussian(spec, s)
        return lambda gen, size: law.sample(gen, size)
    if spec.dimension == 1:
        return _rejection_sampler_1d(spec.potential, spec.beta, s)
    raise SpecError("no Gibbs sampler for this potential family")


def _rejection_sampler_1d(potential, beta: float, s: float):
    center, std = potential.envelope(s, beta)
    # log bound of e^{-beta V} / proposal density ratio, estimated on a probe
    # grid with a safety margin.
    probe = np.linspace(center - 10 * std, center + 10 * std, 4001)[:, None]
    log_target = -beta * potential.v(probe, s)
    log_prop = -0.5 * ((probe[:, 0] - center) / std) ** 2
    log_m = float(np.max(log_target - log_prop)) + 1e-6

    def sample(gen, size):
        out = np.empty((size, 1))
        got = 0
        while got < size:
            n_try = max(64, int(1.3 * (size - got)))
            x = center + std * gen.standard_normal(n_try)
            lt = -beta * potential.v(x[:, None], s)
            lp = -0.5 * ((x - center) / std) ** 2
            accept = np.log(gen.random(n_try)) < lt - lp - log_m
            x = x[accept]
            take = min(len(x), size - got)
            out[got:got + take, 0] = x[:take]
            got += take
        return out

    return sample


def _resolve_init(spec, init, s0: float = 0.0, n_paths: int | None = None):
    if init is None:
        return gibbs_sampler(spec, s0)
    if isinstance(init, GaussianLaw):
        return lambda gen, size: init.sample(gen, size)
    if callable(init):
        return init
    arr = np.asarray(init, dtype=float)
    if n_paths is not None and len(arr) != n_paths:
        raise SpecError("explicit initial state array must match n_paths")
    # Path blocks consume the array in order, so a cursor hands each block
    # its own slice.
    cursor = [0]

    def from_array(gen, size, _arr=arr, _cur=cursor):
        lo = _cur[0]
        hi = lo + size
        if hi > len(_arr):
            raise SpecError("explicit initial state array must match n_paths")
        _cur[0] = hi
        return _arr[lo:hi].copy()

    return from_array


def _finalize(stored, times, seed, dt, kind, blowup_fraction):
    states = np.concatenate([b[0] for b in stored], axis=1)
    work = np.concatenate([b[1] for b in stored], axis=1)
    logw = np.concatenate([b[2] for b in stored], axis=1)
    flagged = ~np.all(np.isfinite(states), axis=(0, 2))
    flagged |= ~np.isfinite(work[-1]) | ~np.isfinite(logw[-1])
    frac = flagged.mean()
    if frac > blowup_fraction:
        raise BlowUpError(
            f"{flagged.sum()} of {flagged.size} paths blew up "
            f"({100 * frac:.3f}% > {100 * blowup_fraction:.3f}%)")
    return TrajectoryEnsemble(times=times, states=states, work=work, log_weight=logw,
                              flagged=flagged, seed=seed, dt=dt, kind=kind)


# ---------------------------------------------------------------------------
# overdamped dynamics
# ---------------------------------------------------------------------------

def simulate_forward(spec: BrownianSpec, n_paths: int, dt: float, seed: int = 0,
                     init=None, store_times=None, control: Optional[ControlField] = None,
                     noise: Optional[np.ndarray] = None,
                     blowup_fraction: float = BLOWUP_FRACTION) -> TrajectoryEnsemble:
    """Euler-Maruyama ensemble of the overdamped SDE on [0, T].

    ``noise`` may inject standard-normal increments of shape (K, N, m) for
    reproducibility experiments; otherwise each path block draws its own
    counter-based stream.
    """
    n_steps = _time_grid(spec.horizon, dt)
    idx, times = _store_indices(store_times, dt, n_steps)
    sampler = _resolve_init(spec, init, n_paths=n_paths)
    d = spec.dimension
    m = spec.diffusion.shape[1]
    amp = math.sqrt(2.0 * dt / spec.beta)

    stored = []
    for block, start, stop in rngmod.block_layout(n_paths):
        nb = stop - start
        gen = rngmod.block_generator(seed, block)
        x = np.asarray(sampler(gen, nb), dtype=float).reshape(nb, d)
        w = np.zeros(nb)
        g = np.zeros(nb)
        keep_s = np.empty((len(idx), nb, d))
        keep_w = np.empty((len(idx), nb))
        keep_g = np.empty((len(idx), nb))
        pos = 0
        if idx and idx[0] == 0:
            keep_s[0], keep_w[0], keep_g[0] = x, w, g
            pos = 1
        for k in range(n_steps):
            s = k * dt
            if noise is not None:
                z = noise[k, start:stop]
            else:
                z = gen.standard_normal((nb, m))
            sig = spec.diffusion.sigma(s)
            drift = spec.drift(x, s)
            if control is not None:
                u = np.asarray(control(x, s), dtype=float).reshape(nb, m)
                drift = drift + u @ sig.T
                g -= math.sqrt(spec.beta / 2.0) * math.sqrt(dt) * np.sum(u * z, axis=1)
                g -= 0.25 * spec.beta * dt * np.sum(u * u, axis=1)
            x_new = x + dt * drift + amp * (z @ sig.T)
            s_mid = s + 0.5 * dt
            w += dt * spec.potential.dv_ds(0.5 * (x + x_new), s_mid)
            x = x_new
            if pos < len(idx) and idx[pos] == k + 1:
                keep_s[pos], keep_w[pos], keep_g[pos] = x, w, g
                pos += 1
        stored.append((keep_s, keep_w, keep_g))
    return _finalize(stored, times, seed, dt, "brownian", blowup_fraction)


def simulate_reverse(spec: BrownianSpec, n_paths: int, dt: float, seed: int = 0,
                     init=None, store_times=None,
                     noise: Optional[np.ndarray] = None,
                     blowup_fraction: float = BLOWUP_FRACTION) -> TrajectoryEnsemble:
    """Ensemble of the reverse process.

    The reverse dynamics is itself an overdamped spec (time-mirrored
    coefficients, negated circulation); by default it starts from the Gibbs
    law of the original potential at the horizon.
    """
    return simulate_forward(spec.reversed(), n_paths, dt, seed=seed, init=init,
                            store_times=store_times, noise=noise,
                            blowup_fraction=blowup_fraction)


# ---------------------------------------------------------------------------
# kinetic dynamics
# ---------------------------------------------------------------------------

def simulate_langevin(spec: LangevinSpec, n_paths: int, dt: float, seed: int = 0,
                      init=None, store_times=None,
                      control: Optional[ControlField] = None,
                      noise: Optional[np.ndarray] = None, reverse: bool = False,
                      method: str = "euler",
                      blowup_fraction: float = BLOWUP_FRACTION) -> TrajectoryEnsemble:
    """Ensemble of the kinetic dynamics (or its reverse) on [0, T].

    States are stacked (q, p).  For ``reverse=True`` the Hamiltonian part of
    the drift flips sign and the potential is read at mirrored time T - s;
    the default initial law is then the Gibbs law at the horizon.  The
    optional ``baoab`` splitting is available for uncontrolled runs.
    """
    if method not in ("euler", "baoab"):
        raise SpecError(f"unknown integrator {method!r}")
    if method == "baoab" and control is not None:
        raise SpecError("the change-of-measure bookkeeping requires the euler integrator")
    n_steps = _time_grid(spec.horizon, dt)
    idx, times = _store_indices(store_times, dt, n_steps)
    n = spec.dimension
    sampler = _resolve_init(spec, init, s0=spec.horizon if reverse else 0.0,
                            n_paths=n_paths)
    minv = spec.mass_inv
    xi, beta, T = spec.xi, spec.beta, spec.horizon
    sign = -1.0 if reverse else 1.0
    amp = math.sqrt(2.0 * xi * dt / beta)
    sqxi = math.sqrt(xi)

    if method == "baoab":
        evals, evecs = np.linalg.eigh(spec.mass)
        decay = evecs @ np.diag(np.exp(-xi * dt / evals)) @ evecs.T
        mb = spec.mass / beta
        ou_cov = mb - decay @ mb @ decay.T
        ou_chol = np.linalg.cholesky(ou_cov + 1e-300 * np.eye(n))

    def pot_time(s):
        return T - s if reverse else s

    stored = []
    for block, start, stop in rngmod.block_layout(n_paths):
        nb = stop - start
        gen = rngmod.block_generator(seed, block)
        x = np.asarray(sampler(gen, nb), dtype=float).reshape(nb, 2 * n)
        w = np.zeros(nb)
        g = np.zeros(nb)
        keep_s = np.empty((len(idx), nb, 2 * n))
        keep_w = np.empty((len(idx), nb))
        keep_g = np.empty((len(idx), nb))
        pos = 0
        if idx and idx[0] == 0:
            keep_s[0], keep_w[0], keep_g[0] = x, w, g
            pos = 1
        for k in range(n_steps):
            s = k * dt
            t = pot_time(s)
            q, p = x[:, :n], x[:, n:]
            if noise is not None:
                z = noise[k, start:stop]
            else:
                z = gen.standard_normal((nb, n))
            if method == "euler":
                gradv = spec.potential.grad(q, t)
                q_new = q + dt * sign * (p @ minv.T)
                p_drift = -sign * gradv - xi * (p @ minv.T)
                if control is not None:
                    u = np.asarray(control(x, s), dtype=float).reshape(nb, n)
                    p_drift = p_drift + sqxi * u
                    g -= math.sqrt(beta / 2.0) * math.sqrt(dt) * np.sum(u * z, axis=1)
                    g -= 0.25 * beta * dt * np.sum(u * u, axis=1)
                p_new = p + dt * p_drift + amp * z
            else:  # BAOAB, forward only in spirit but sign-aware
                half = 0.5 * dt
                p1 = p - half * sign * spec.potential.grad(q, t)
                q_half = q + half * sign * (p1 @ minv.T)
                p2 = p1 @ decay.T + z @ ou_chol.T
                t_end = pot_time(s + dt)
                q_new = q_half + half * sign * (p2 @ minv.T)
                p_new = p2 - half * sign * spec.potential.grad(q_new, t_end)
            x_new = np.concatenate([q_new, p_new], axis=1)
            # work along the process: time derivative of its own Hamiltonian
            t_mid = pot_time(s + 0.5 * dt)
            dv = spec.potential.dv_ds(0.5 * (q + q_new), t_mid)
            w += dt * (-dv if reverse else dv)
            x = x_new
            if pos < len(idx) and idx[pos] == k + 1:
                keep_s[pos], keep_w[pos], keep_g[pos] = x, w, g
                pos += 1
        stored.append((keep_s, keep_w, keep_g))
    return _finalize(stored, times, seed, dt, "langevin", blowup_fraction)
