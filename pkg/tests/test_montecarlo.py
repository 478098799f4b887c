import math

import numpy as np
import pytest

from kinuq.errors import ConfigError, EmptyRange
from kinuq.model import make_model
from kinuq.montecarlo import (
    MCConfig,
    ParticleEnsemble,
    histogram,
    make_rng,
    nanbu_babovsky_step,
    run_mc,
    sample_initial,
)


def test_four_particles_two_pairs():
    m = make_model("kac")
    ens = ParticleEnsemble(np.array([1.0, 2.0, 3.0, 4.0]), make_rng(0, 0))
    before = ens.states.copy()
    nanbu_babovsky_step(ens, m, MCConfig(1.0, 1.0, theta=1.0))
    assert np.all(ens.states != before)
    assert ens.time == 1.0


def test_pair_count_partial():
    m = make_model("kac")
    ens = ParticleEnsemble(np.arange(1000, dtype=float), make_rng(0, 0))
    before = ens.states.copy()
    nanbu_babovsky_step(ens, m, MCConfig(0.1, 1.0, theta=1.0))
    assert np.sum(ens.states != before) == 100


def test_dt_bound():
    with pytest.raises(ConfigError):
        MCConfig(1.5, 2.0)
    with pytest.raises(ConfigError):
        MCConfig(0.2, 2.0, gamma=0.1)
    with pytest.raises(ConfigError):
        ParticleEnsemble(np.zeros(3), make_rng(0))


def test_kac_energy_step_exact():
    m = make_model("kac")
    ens = ParticleEnsemble(sample_initial("uniform", 10000, make_rng(1)), make_rng(1, 1))
    e0 = np.sum(ens.states**2)
    for _ in range(50):
        nanbu_babovsky_step(ens, m, MCConfig(0.3, 10.0))
    assert abs(np.sum(ens.states**2) / e0 - 1) < 1e-12


def test_consensus_momentum_step_exact():
    m = make_model("linear-consensus", q0=0.5, lam=0.5)
    rng = make_rng(2)
    ens = ParticleEnsemble(rng.normal(0.3, 1.0, 10000), make_rng(2, 1))
    s0 = ens.states.sum()
    for _ in range(50):
        nanbu_babovsky_step(ens, m, MCConfig(0.5, 10.0))
    assert abs(ens.states.sum() - s0) < 1e-9


def test_consensus_averaged_energy_t1():
    m = make_model("linear-consensus", q0=0.5, lam=0.5)
    res = run_mc(m, MCConfig(0.01, 1.0), 100000, seed=3)
    e = res.series.energy[-1]
    se = res.series.stderr_energy[-1]
    assert abs(e - math.exp(-1 / 3)) < 4 * se + 2e-3


def test_consensus_fixed_theta_t2():
    m = make_model("linear-consensus", q0=0.5, lam=0.5)
    res = run_mc(m, MCConfig(0.01, 2.0, theta=0.0), 100000, seed=4)
    assert abs(res.series.energy[-1] - math.exp(-1)) < 4 * res.series.stderr_energy[-1] + 2e-3


def test_scaled_consensus_energy_rate_matches_fp_limit():
    # dE/dtau = -2 q0 E + D^2 mass in the quasi-invariant limit
    m = make_model("linear-consensus", q0=0.5, lam=0.4, d2=0.1, sigma2=0.01)
    res = run_mc(m, MCConfig(0.01, 1.0, gamma=0.01), 100000, seed=5)
    t = res.series.t
    e = res.series.energy
    pred = 0.1 + (1 - 0.1) * np.exp(-t)
    assert abs(e[-1] - pred[-1]) < 0.02


def test_bounded_confidence_stays_inside():
    m = make_model("bounded-confidence", d0=0.3, sigma2=0.05)
    res = run_mc(m, MCConfig(0.05, 2.0, gamma=0.05), 20000, seed=6, initial="bimodal-h0")
    assert np.all(np.abs(res.ensemble.states) <= 1.0)


def test_particle_count_constant():
    m = make_model("kac")
    res = run_mc(m, MCConfig(0.1, 1.0), 1000, seed=7)
    assert res.ensemble.size == 1000
    assert np.all(res.series.mass == 1.0)


def test_reproducible_bitwise():
    m = make_model("linear-consensus", q0=0.5, lam=0.5)
    a = run_mc(m, MCConfig(0.05, 1.0), 2000, seed=8, stream=(1, 3))
    b = run_mc(m, MCConfig(0.05, 1.0), 2000, seed=8, stream=(1, 3))
    c = run_mc(m, MCConfig(0.05, 1.0), 2000, seed=8, stream=(1, 4))
    assert np.array_equal(a.ensemble.states, b.ensemble.states)
    assert not np.array_equal(a.ensemble.states, c.ensemble.states)


def test_initial_presets():
    rng = make_rng(9)
    d = sample_initial("dirac-shifted", 10, rng)
    assert np.all(d == 1)
    u = sample_initial("uniform", 10000, rng)
    assert abs(u.mean()) < 1e-12 and abs(np.mean(u**2) - 1) < 1e-12
    h = sample_initial("bimodal-h0", 10000, rng, make_model("bounded-confidence").space)
    assert abs(h.mean()) < 1e-12 and np.all(np.abs(h) <= 1)
    with pytest.raises(ConfigError):
        sample_initial("other", 10, rng)


def test_histogram_point_mass():
    c, d = histogram(np.zeros(100), 4, (-1.0, 1.0))
    assert d.max() == pytest.approx(1 / 0.5)
    assert np.count_nonzero(d) == 1


def test_histogram_two_bins_uniform():
    x = make_rng(10).uniform(-1, 1, 100000)
    _, d = histogram(x, 2, (-1, 1))
    assert np.allclose(d, 0.5, atol=0.01)


def test_histogram_chi_square_normal():
    stats = pytest.importorskip("scipy.stats")
    n = 100000
    x = make_rng(11).standard_normal(n)
    centres, dens = histogram(x, 50, (-5, 5))
    edges = np.linspace(-5, 5, 51)
    probs = np.diff(stats.norm.cdf(edges))
    probs /= probs.sum()
    inside = np.sum((x >= -5) & (x <= 5))
    observed = dens * 0.2 * inside
    expected = probs * inside
    keep = expected > 5
    chi2 = np.sum((observed[keep] - expected[keep]) ** 2 / expected[keep])
    assert chi2 < stats.chi2.ppf(0.99, keep.sum() - 1)


def test_histogram_errors():
    with pytest.raises(EmptyRange):
        histogram(np.zeros(3), 5, (1.0, 1.0))
    with pytest.raises(EmptyRange):
        histogram(np.zeros(3), 5, (1.0, 2.0))
