"""Nanbu-Babovsky direct simulation of the Boltzmann-type models.

Two modes share one stepper: theta-averaged (a fresh theta for every
interacting pair) and fixed-theta (one collocation value for the whole
run). Interactions may be gamma-scaled with noise, in which case the
recorded time is the scaled time ``tau = gamma t``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, EmptyRange
from .model import post_interaction_unchecked

MAX_REDRAWS = 50

INITIAL_CONDITIONS = ("dirac-shifted", "bimodal-h0", "uniform")


def make_rng(seed, *key):
    """Counter-based generator for the stream ``(seed, *key)``.

    Streams with different keys are independent, so collocation nodes can
    run in any order or process and still reproduce bit for bit.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


@dataclass
class ParticleEnsemble:
    """``N`` particle states plus the generator that drives them."""

    states: np.ndarray
    rng: np.random.Generator
    time: float = 0.0
    rng_seed: int = 0
    steps: int = 0

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=float)
        if self.states.ndim != 1 or self.states.size % 2:
            raise ConfigError("ensemble size must be even")

    @property
    def size(self):
        return self.states.size

    def moments(self):
        """``(mass, mean, energy, stderr_mean, stderr_energy)``."""
        v = self.states
        n = v.size
        v2 = v * v
        return (
            1.0,
            float(v.mean()),
            float(v2.mean()),
            float(v.std(ddof=1) / math.sqrt(n)),
            float(v2.std(ddof=1) / math.sqrt(n)),
        )


@dataclass(frozen=True)
class MCConfig:
    """Time stepping for :func:`run_mc`.

    ``dt`` is measured in the recorded time (scaled time when
    ``gamma < 1``); each step lets a fraction ``dt / gamma`` of the
    particles interact, so ``dt <= gamma``. ``theta=None`` selects the
    theta-averaged mode, a float selects fixed theta.
    """

    dt: float
    t_final: float
    gamma: float = 1.0
    theta: float | None = None
    record_every: int = 1
    snapshot_times: tuple = ()

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigError("gamma must lie in (0, 1]")
        if self.dt > self.gamma * (1.0 + 1e-12):
            raise ConfigError("dt / gamma must not exceed 1 (interaction probability)")
        if self.record_every < 1:
            raise ConfigError("record_every must be >= 1")

    @property
    def n_steps(self):
        return int(round(self.t_final / self.dt))


@dataclass
class MomentSeries:
    """Time-indexed moments of one run."""

    t: np.ndarray
    mass: np.ndarray
    mean: np.ndarray
    energy: np.ndarray
    stderr_mean: np.ndarray | None = None
    stderr_energy: np.ndarray | None = None

    def at(self, t):
        """Index of the record closest to time ``t``."""
        return int(np.argmin(np.abs(self.t - t)))


@dataclass
class MCResult:
    series: MomentSeries
    ensemble: ParticleEnsemble
    snapshots: dict = field(default_factory=dict)


def sample_initial(name, n, rng, space=None):
    """Draw ``n`` initial states from a named preset.

    ``dirac-shifted`` puts every particle at 1 (mean 1, energy 1).
    ``bimodal-h0`` samples the two-bump density with bumps at +-1/2.
    ``uniform`` is uniform on ``[-sqrt 3, sqrt 3]`` (mean 0, energy 1),
    or on the state space when it is bounded. Random presets are
    mirror-symmetrized so the sample mean is zero; on the real line the
    uniform sample is also rescaled to unit energy.
    """
    if n % 2:
        raise ConfigError("particle number must be even")
    half = n // 2
    bounded = space is not None and space.bounded
    if name == "dirac-shifted":
        return np.ones(n)
    if name == "bimodal-h0":
        out = np.empty(0)
        sd = 1.0 / math.sqrt(40.0)
        while out.size < half:
            centres = rng.choice([-0.5, 0.5], size=half)
            draw = centres + sd * rng.standard_normal(half)
            if bounded:
                draw = draw[(draw >= space.lower) & (draw <= space.upper)]
            out = np.concatenate([out, draw])
        out = out[:half]
        return np.concatenate([out, -out])
    if name == "uniform":
        if bounded:
            out = rng.uniform(space.lower, space.upper, half)
            return np.concatenate([out, -out])
        out = rng.uniform(-math.sqrt(3.0), math.sqrt(3.0), half)
        states = np.concatenate([out, -out])
        return states / math.sqrt(np.mean(states * states))
    raise ConfigError(f"unknown initial condition {name!r}; choose from {INITIAL_CONDITIONS}")


def _bounded_rejection(model, v, w, theta, gamma, eta, rng):
    """Redraw noise for pairs that leave the state space, then fall back
    to the noiseless interaction for stubborn pairs."""
    n = v.size
    eta_v, eta_w = eta[:n], eta[n:]
    v_star, w_star = post_interaction_unchecked(model, v, w, theta, gamma, eta_v, eta_w)
    space = model.space
    bad = ~(space.contains(v_star) & space.contains(w_star))
    tries = 0
    while bad.any() and tries < MAX_REDRAWS:
        idx = np.flatnonzero(bad)
        th = theta if np.ndim(theta) == 0 else theta[idx]
        new = model.noise.sample(rng, 2 * idx.size)
        vs, ws = post_interaction_unchecked(
            model, v[idx], w[idx], th, gamma, new[: idx.size], new[idx.size :]
        )
        v_star[idx] = vs
        w_star[idx] = ws
        bad[idx] = ~(space.contains(vs) & space.contains(ws))
        tries += 1
    if bad.any():
        idx = np.flatnonzero(bad)
        th = theta if np.ndim(theta) == 0 else theta[idx]
        zeros = np.zeros(idx.size)
        vs, ws = post_interaction_unchecked(model, v[idx], w[idx], th, gamma, zeros, zeros)
        v_star[idx] = vs
        w_star[idx] = ws
    return v_star, w_star


def nanbu_babovsky_step(ens, model, cfg):
    """Advance the ensemble by one step of length ``cfg.dt``.

    ``round(N * (dt/gamma) / 2)`` disjoint pairs are drawn uniformly and
    interact through the model rule; every other particle is left alone.
    The ensemble is updated in place and returned.
    """
    frac = cfg.dt / cfg.gamma
    if frac > 1.0 + 1e-12:
        raise ConfigError("dt / gamma must not exceed 1")
    n = ens.size
    n_pairs = min(int(round(n * frac / 2.0)), n // 2)
    rng = ens.rng
    if n_pairs:
        if 2 * n_pairs == n:
            idx = rng.permutation(n)
        else:
            idx = rng.choice(n, 2 * n_pairs, replace=False)
        i = idx[:n_pairs]
        j = idx[n_pairs:]
        theta = cfg.theta if cfg.theta is not None else model.theta.sample(rng, n_pairs)
        v = ens.states[i]
        w = ens.states[j]
        if model.diffusion.is_zero:
            eta = np.zeros(2 * n_pairs)
        else:
            eta = model.noise.sample(rng, 2 * n_pairs)
        if model.space.bounded:
            v_star, w_star = _bounded_rejection(model, v, w, theta, cfg.gamma, eta, rng)
        else:
            v_star, w_star = post_interaction_unchecked(
                model, v, w, theta, cfg.gamma, eta[:n_pairs], eta[n_pairs:]
            )
        ens.states[i] = v_star
        ens.states[j] = w_star
    ens.steps += 1
    ens.time = ens.steps * cfg.dt
    return ens


def run_mc(model, cfg, n_particles, seed, initial="uniform", stream=(0,)):
    """Run the particle scheme to ``cfg.t_final``.

    Parameters
    ----------
    model : InteractionModel
    cfg : MCConfig
    n_particles : int
        Even number of particles.
    seed : int
        Master seed; together with ``stream`` it fixes the generator.
    initial : str or ndarray
        Preset name (see :func:`sample_initial`) or explicit states.
    stream : tuple of int
        Stream key, e.g. ``(1, k)`` for collocation node ``k``.

    Returns
    -------
    MCResult
        Moment series recorded every ``cfg.record_every`` steps (and at
        the final step), the final ensemble, and particle snapshots at
        ``cfg.snapshot_times``.
    """
    if cfg.theta is not None and model.theta.law == "uniform" and not model.theta.contains(cfg.theta):
        raise ConfigError(f"theta={cfg.theta} outside the support {model.theta.support}")
    rng = make_rng(seed, *stream)
    if isinstance(initial, str):
        states = sample_initial(initial, int(n_particles), rng, model.space)
    else:
        states = np.array(initial, dtype=float)
    ens = ParticleEnsemble(states, rng, 0.0, int(seed))
    snap_steps = {int(round(t / cfg.dt)): t for t in cfg.snapshot_times}
    snapshots = {}
    rows = [(0.0, *ens.moments())]
    if 0 in snap_steps:
        snapshots[snap_steps[0]] = ens.states.copy()
    n_steps = cfg.n_steps
    for k in range(1, n_steps + 1):
        nanbu_babovsky_step(ens, model, cfg)
        if k % cfg.record_every == 0 or k == n_steps:
            rows.append((ens.time, *ens.moments()))
        if k in snap_steps:
            snapshots[snap_steps[k]] = ens.states.copy()
    arr = np.array(rows)
    series = MomentSeries(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], arr[:, 4], arr[:, 5])
    return MCResult(series, ens, snapshots)


def histogram(states, bins, range):
    """Density histogram of particle states over ``range``.

    Normalized to unit integral over the range (particles outside are
    ignored). Returns ``(centres, density)``.
    """
    states = states.states if isinstance(states, ParticleEnsemble) else np.asarray(states)
    bins = int(bins)
    if bins < 1:
        raise ValueError("bins must be >= 1")
    lo, hi = float(range[0]), float(range[1])
    if not lo < hi:
        raise EmptyRange("histogram range is empty")
    counts, edges = np.histogram(states, bins=bins, range=(lo, hi))
    total = counts.sum()
    if total == 0:
        raise EmptyRange("no particles inside the histogram range")
    width = (hi - lo) / bins
    centres = 0.5 * (edges[:-1] + edges[1:])
    return centres, counts / (total * width)
