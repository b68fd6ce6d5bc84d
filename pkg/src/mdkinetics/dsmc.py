"""Direct-simulation Monte Carlo integrator for the four-population kinetic system.

Each step evaluates eight interaction channels per particle against the
pre-step snapshot of all ensembles (Jacobi update), with per-particle
Bernoulli acceptance dt*kappa(partner) for kernel-weighted channels
(kappa(x) = 1 + x) and dt for unit-rate channels.  The step size is capped so
every acceptance probability is valid; the cap adapts to the current maximum
partner sample.

Randomness comes from the counter-based stream in :mod:`mdkinetics.rng`,
so trajectories are bit-identical for a fixed seed regardless of worker
count, and the vectorized numpy path and the compiled kernel agree exactly.

Channel layout (counter slots per step):
  0: N degeneration (C partner + accept; noise)     1: uniform-law extra draw
  2: N replenishment (M partner + accept)           3: D source index
  4: D clearance (M partner + accept; noise)        5: uniform-law extra draw
  6: D gain (C partner + accept)                    7: N source index
  8: M decay (accept; noise)                        9: uniform-law extra draw
 10: M recruitment (D partner + accept)
 12: C decay (accept; noise)                       13: uniform-law extra draw
 14: C recruitment (M partner + accept)
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng as crng
from .interactions import NoiseSpec
from .moments import means_rhs
from .params import ParameterSet, MomentState, POPULATIONS, scaled

U64 = np.uint64


@dataclass
class ParticleEnsemble:
    """Four equal-size populations of nonnegative density samples.

    ``samples`` has shape (4, n) in POPULATIONS order.  ``step_counter`` is the
    position in the counter-based random stream; together with ``seed`` it
    fully determines all future randomness.
    """

    samples: np.ndarray
    seed: int
    t: float = 0.0
    step_counter: int = 0

    @property
    def n_particles(self) -> int:
        return self.samples.shape[1]


@dataclass(frozen=True)
class StepPlan:
    """A validated step: dt * kappa_bound <= 1 keeps acceptances in [0, 1]."""

    dt: float
    kappa_bound: float

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.dt * self.kappa_bound > 1.0 + 1e-12:
            raise ValueError(
                f"dt*kappa_bound = {self.dt * self.kappa_bound:.4f} > 1: "
                "interaction probabilities would be invalid")


def plan_step(dt_target: float, kappa_bound: float) -> StepPlan:
    """Largest admissible step not exceeding the target."""
    return StepPlan(dt=min(dt_target, 1.0, 1.0 / kappa_bound), kappa_bound=kappa_bound)


def kappa_bound(ens: ParticleEnsemble) -> float:
    """Majorant of kappa over the partner ensembles of the kernel-weighted channels.

    Those channels draw partners from M and C only, so the bound is
    1 + max over the current M and C samples.
    """
    return 1.0 + max(float(ens.samples[2].max()), float(ens.samples[3].max()))


def init_ensemble(n_particles: int, initial_means, seed: int) -> ParticleEnsemble:
    """Sample every population uniformly on [m0 - w/2, m0 + w/2], w = sqrt(6/5).

    The width gives variance exactly 0.1.  Samples are clipped at zero, which
    only triggers when a requested mean is below w/2 (about 0.548).
    """
    if n_particles < 1:
        raise ValueError("need at least one particle")
    means = np.asarray(initial_means, dtype=float)
    if means.shape != (4,) or np.any(means <= 0):
        raise ValueError("need four positive initial means")
    w = math.sqrt(6.0 / 5.0)
    gen = np.random.default_rng(seed)
    samples = np.empty((4, n_particles))
    for i, m in enumerate(means):
        samples[i] = np.clip(gen.uniform(m - w / 2.0, m + w / 2.0, n_particles), 0.0, None)
    return ParticleEnsemble(samples=samples, seed=int(seed))


def estimate_moments(ens: ParticleEnsemble) -> MomentState:
    """Sample means and unbiased sample variances per population."""
    m = ens.samples.mean(axis=1)
    if ens.n_particles > 1:
        v = ens.samples.var(axis=1, ddof=1)
    else:
        v = np.zeros(4)
    return MomentState(t=ens.t, m=m, v=v)


@dataclass
class Histogram:
    """Unit-integral histogram on [0, L]; samples beyond L land in ``overflow``."""

    edges: np.ndarray
    values: np.ndarray
    overflow: int

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])


def to_histogram(samples: np.ndarray, L: float, n_bins: int) -> Histogram:
    """Density histogram normalized by the total sample count.

    The integral over [0, L] equals 1 exactly when no sample exceeds L;
    otherwise the deficit equals overflow / n_total.
    """
    samples = np.asarray(samples, float)
    overflow = int((samples > L).sum())
    counts, edges = np.histogram(samples, bins=n_bins, range=(0.0, L))
    width = L / n_bins
    values = counts / (samples.size * width)
    return Histogram(edges=edges, values=values, overflow=overflow)


def _law_code(law: str) -> int:
    spec = NoiseSpec(law)
    return 0 if spec.law == "two-point" else 1


def _check_noise_guard(params: ParameterSet, law: str) -> None:
    spec = NoiseSpec(law)
    for pop in POPULATIONS:
        spec.check_positivity(getattr(params, f"beta_{pop}"), getattr(params, f"sigma2_{pop}"))


def step(ens: ParticleEnsemble, params: ParameterSet, dt: float,
         law: str = "two-point", engine: str = "numba") -> ParticleEnsemble:
    """One forward Monte Carlo step of all eight channels (Jacobi commit).

    ``params`` are used as given; callers wanting the quasi-invariant scaling
    pass an already scaled set (see :func:`run`).  Raises if dt exceeds the
    current majorant bound.
    """
    StepPlan(dt=dt, kappa_bound=kappa_bound(ens))  # validates, raises on violation
    _check_noise_guard(params, law)
    out = np.empty_like(ens.samples)
    _dispatch(engine)(ens.samples, out, params, dt, U64(ens.seed), ens.step_counter,
                      _law_code(law))
    return ParticleEnsemble(samples=out, seed=ens.seed, t=ens.t + dt,
                            step_counter=ens.step_counter + 1)


def expected_moment_change(ens: ParticleEnsemble, params: ParameterSet, dt: float) -> np.ndarray:
    """Exact expectation of the one-step change of the four population means.

    Equals dt times the mean-ODE right-hand side evaluated at the empirical
    means; the loss-then-gain composition of the controlled C channels adds
    the O(dt^2) term dt^2 * nu * beta_C * m_C (zero without therapy).
    """
    StepPlan(dt=dt, kappa_bound=kappa_bound(ens))
    m = ens.samples.mean(axis=1)
    change = dt * means_rhs(m, params)
    change[3] += dt * dt * params.nu_control * params.beta_C * m[3]
    return change


# --------------------------------------------------------------------------
# numpy reference path


def _step_numpy(samples: np.ndarray, out: np.ndarray, params: ParameterSet,
                dt: float, seed: U64, step_idx: int, law: int) -> None:
    xN, xD, xM, xC = samples
    n = samples.shape[1]

    def draws(slot):
        return crng.draw_u64(seed, crng.counters(step_idx, slot, n))

    def loss(x, partner, beta, s2, slot):
        u = draws(slot)
        r = crng.to_unit(u) * n
        j = r.astype(np.int64)
        p = partner[j]
        acc = (r - j) < dt * (1.0 + p)
        phi = p / (1.0 + p)
        sd = np.sqrt(s2 * phi)
        if law == 0:
            eta = crng.sign_bit(u) * sd
        else:
            u2 = crng.to_unit(draws(slot + 1))
            eta = (2.0 * u2 - 1.0) * math.sqrt(3.0) * sd
        return np.where(acc, x - beta * phi * x + eta * x, x)

    def kernel_gain(x, partner, source, beta, slot):
        u = draws(slot)
        r = crng.to_unit(u) * n
        j = r.astype(np.int64)
        p = partner[j]
        acc = (r - j) < dt * (1.0 + p)
        y = source[(crng.to_unit(draws(slot + 1)) * n).astype(np.int64)]
        return np.where(acc, x + beta * (p / (1.0 + p)) * y, x)

    def unit_decay(x, beta, s2, slot):
        u = draws(slot)
        acc = crng.to_unit(u) < dt
        sd = math.sqrt(s2)
        if law == 0:
            eta = crng.sign_bit(u) * sd
        else:
            u2 = crng.to_unit(draws(slot + 1))
            eta = (2.0 * u2 - 1.0) * math.sqrt(3.0) * sd
        return np.where(acc, x - beta * x + eta * x, x)

    def unit_recruit(x, source, gamma, nu, slot):
        u = draws(slot)
        r = crng.to_unit(u) * n
        j = r.astype(np.int64)
        acc = (r - j) < dt
        return np.where(acc, x + gamma * source[j] - nu * x, x)

    tmp = loss(xN, xC, params.beta_N, params.sigma2_N, 0)
    out[0] = kernel_gain(tmp, xM, xD, params.beta_D, 2)
    tmp = loss(xD, xM, params.beta_D, params.sigma2_D, 4)
    out[1] = kernel_gain(tmp, xC, xN, params.beta_N, 6)
    tmp = unit_decay(xM, params.beta_M, params.sigma2_M, 8)
    out[2] = unit_recruit(tmp, xD, params.gamma_M, 0.0, 10)
    tmp = unit_decay(xC, params.beta_C, params.sigma2_C, 12)
    out[3] = unit_recruit(tmp, xM, params.gamma_C, params.nu_control, 14)


# --------------------------------------------------------------------------
# numba kernel (same draws, same arithmetic, particle-parallel)

_kernel_cache = {}


def _build_kernel():
    import numba as nb

    GOLD = U64(0x9E3779B97F4A7C15)
    MIX1 = U64(0xBF58476D1CE4E5B9)
    MIX2 = U64(0x94D049BB133111EB)
    INV53 = 1.0 / 9007199254740992.0
    SLOTS = U64(crng.SLOTS_PER_STEP)
    SQRT3 = math.sqrt(3.0)

    @nb.njit(nb.uint64(nb.uint64, nb.uint64), inline="always", cache=True)
    def draw(seed, ctr):
        z = seed + (ctr + U64(1)) * GOLD
        z = (z ^ (z >> U64(30))) * MIX1
        z = (z ^ (z >> U64(27))) * MIX2
        return z ^ (z >> U64(31))

    @nb.njit(nb.float64(nb.uint64), inline="always", cache=True)
    def unit(u):
        return (u >> U64(11)) * INV53

    @nb.njit(parallel=True, cache=True)
    def kernel(xN, xD, xM, xC, oN, oD, oM, oC,
               bn, bd, bm, bc, s2n, s2d, s2m, s2c, gm, gc, nu,
               dt, seed, step_idx, law):
        n = xN.shape[0]
        base = step_idx * SLOTS * U64(n)
        for i in nb.prange(n):
            ii = U64(i)
            # N: degeneration, then replenishment
            x = xN[i]
            u = draw(seed, base + U64(0) * U64(n) + ii)
            r = unit(u) * n
            j = int(r)
            p = xC[j]
            if (r - j) < dt * (1.0 + p):
                phi = p / (1.0 + p)
                sd = np.sqrt(s2n * phi)
                if law == 0:
                    eta = sd if (u & U64(1)) else -sd
                else:
                    u2 = unit(draw(seed, base + U64(1) * U64(n) + ii))
                    eta = (2.0 * u2 - 1.0) * SQRT3 * sd
                x = x - bn * phi * x + eta * x
            u = draw(seed, base + U64(2) * U64(n) + ii)
            r = unit(u) * n
            j = int(r)
            p = xM[j]
            if (r - j) < dt * (1.0 + p):
                u2 = draw(seed, base + U64(3) * U64(n) + ii)
                y = xD[int(unit(u2) * n)]
                x = x + bd * (p / (1.0 + p)) * y
            oN[i] = x
            # D: clearance, then damage gain
            x = xD[i]
            u = draw(seed, base + U64(4) * U64(n) + ii)
            r = unit(u) * n
            j = int(r)
            p = xM[j]
            if (r - j) < dt * (1.0 + p):
                phi = p / (1.0 + p)
                sd = np.sqrt(s2d * phi)
                if law == 0:
                    eta = sd if (u & U64(1)) else -sd
                else:
                    u2 = unit(draw(seed, base + U64(5) * U64(n) + ii))
                    eta = (2.0 * u2 - 1.0) * SQRT3 * sd
                x = x - bd * phi * x + eta * x
            u = draw(seed, base + U64(6) * U64(n) + ii)
            r = unit(u) * n
            j = int(r)
            p = xC[j]
            if (r - j) < dt * (1.0 + p):
                u2 = draw(seed, base + U64(7) * U64(n) + ii)
                y = xN[int(unit(u2) * n)]
                x = x + bn * (p / (1.0 + p)) * y
            oD[i] = x
            # M: decay, then recruitment by D
            x = xM[i]
            u = draw(seed, base + U64(8) * U64(n) + ii)
            if unit(u) < dt:
                sd = np.sqrt(s2m)
                if law == 0:
                    eta = sd if (u & U64(1)) else -sd
                else:
                    u2 = unit(draw(seed, base + U64(9) * U64(n) + ii))
                    eta = (2.0 * u2 - 1.0) * SQRT3 * sd
                x = x - bm * x + eta * x
            u = draw(seed, base + U64(10) * U64(n) + ii)
            r = unit(u) * n
            j = int(r)
            if (r - j) < dt:
                x = x + gm * xD[j]
            oM[i] = x
            # C: decay, then controlled recruitment by M
            x = xC[i]
            u = draw(seed, base + U64(12) * U64(n) + ii)
            if unit(u) < dt:
                sd = np.sqrt(s2c)
                if law == 0:
                    eta = sd if (u & U64(1)) else -sd
                else:
                    u2 = unit(draw(seed, base + U64(13) * U64(n) + ii))
                    eta = (2.0 * u2 - 1.0) * SQRT3 * sd
                x = x - bc * x + eta * x
            u = draw(seed, base + U64(14) * U64(n) + ii)
            r = unit(u) * n
            j = int(r)
            if (r - j) < dt:
                x = x + gc * xM[j] - nu * x
            oC[i] = x

    return kernel


def _step_numba(samples: np.ndarray, out: np.ndarray, params: ParameterSet,
                dt: float, seed: U64, step_idx: int, law: int) -> None:
    if "kernel" not in _kernel_cache:
        _kernel_cache["kernel"] = _build_kernel()
    _kernel_cache["kernel"](
        samples[0], samples[1], samples[2], samples[3],
        out[0], out[1], out[2], out[3],
        params.beta_N, params.beta_D, params.beta_M, params.beta_C,
        params.sigma2_N, params.sigma2_D, params.sigma2_M, params.sigma2_C,
        params.gamma_M, params.gamma_C, params.nu_control,
        dt, U64(seed), U64(step_idx), law)


def _dispatch(engine: str):
    if engine == "numba":
        return _step_numba
    if engine == "numpy":
        return _step_numpy
    raise ValueError(f"unknown engine {engine!r}; choose 'numba' or 'numpy'")


# --------------------------------------------------------------------------
# scaled runs on the mean-field clock


def run(ens: ParticleEnsemble, params: ParameterSet, epsilon: float, horizon: float,
        report_dt: float = 1.0, dt_target: float = 0.5, law: str = "two-point",
        engine: str = "numba", observer=None,
        histogram_times=(), histogram_L: float = 12.0, histogram_bins: int = 100,
        ) -> tuple[list[MomentState], dict[float, list[Histogram]]]:
    """Evolve the scaled dynamics so reported times follow the mean-field clock.

    Applies ``scaled(params, epsilon)`` and simulates to internal time
    horizon/epsilon; a report at mean-field time t reflects internal time
    t/epsilon.  ``dt_target`` is the step size on the scaled dynamics,
    auto-shrunk whenever the kernel majorant requires it.  Returns the moment
    trajectory at the report times (t=0 included) and histograms of all four
    populations at ``histogram_times``.  The ensemble is advanced in place so
    a subsequent call continues the same random stream.
    """
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    sp = scaled(params, epsilon)
    _check_noise_guard(sp, law)
    stepper = _dispatch(engine)
    law_i = _law_code(law)
    seed = U64(ens.seed)

    n_reports = int(round(horizon / report_dt)) if horizon > 0 else 0
    report_set = {k * report_dt for k in range(1, n_reports + 1)}
    if horizon > 0:
        report_set.add(horizon)
    hist_set = {float(t) for t in histogram_times}

    samples = ens.samples.copy()
    buf = np.empty_like(samples)
    step_idx = ens.step_counter
    tau = ens.t

    def snapshot(t_mf):
        e = ParticleEnsemble(samples=samples, seed=ens.seed, t=t_mf, step_counter=step_idx)
        ms = estimate_moments(e)
        if observer is not None:
            observer(e, ms)
        return ms

    def take_hist():
        return [to_histogram(samples[i], histogram_L, histogram_bins) for i in range(4)]

    trajectory = [snapshot(0.0)]
    histograms: dict[float, list[Histogram]] = {}
    if 0.0 in hist_set:
        histograms[0.0] = take_hist()

    t_prev = 0.0
    for t_next in sorted(report_set | (hist_set - {0.0})):
        tau_goal = tau + (t_next - t_prev) / epsilon
        while tau < tau_goal - 1e-9:
            kb = 1.0 + max(float(samples[2].max()), float(samples[3].max()))
            dt = min(plan_step(dt_target, kb).dt, tau_goal - tau)
            stepper(samples, buf, sp, dt, seed, step_idx, law_i)
            samples, buf = buf, samples
            tau += dt
            step_idx += 1
        t_prev = t_next
        if t_next in report_set:
            trajectory.append(snapshot(t_next))
        if t_next in hist_set:
            histograms[t_next] = take_hist()

    ens.samples = samples
    ens.t = tau
    ens.step_counter = step_idx
    return trajectory, histograms
