import math

import numpy as np
import pytest

from kinuq import oracles
from kinuq.collocation import CollocationEnsemble, FPSetup, MCSetup, run_collocation
from kinuq.errors import BackendMismatch, StabilityViolation
from kinuq.fokker_planck import Grid1D
from kinuq.model import make_model
from kinuq.montecarlo import MCConfig, run_mc
from kinuq.quadrature import QuadratureRule, gauss_legendre


def fp_setup(**kw):
    base = dict(grid=Grid1D(101, -5, 5), dt=0.01, t_final=2.0, quad_order="SPE", snapshot_times=(1.0,))
    base.update(kw)
    return FPSetup(**base)


def test_single_node_equals_fixed_theta_run():
    m = make_model("linear-consensus", q0=0.5, lam=0.5)
    setup = MCSetup(0.05, 1.0, 2000, seed=3)
    ens = run_collocation(m, "mc", setup, rule=QuadratureRule([0.0], [1.0]), deterministic=False)
    direct = run_mc(m, MCConfig(0.05, 1.0, theta=0.0), 2000, 3, stream=(1, 0))
    assert np.array_equal(ens.energy[0], direct.series.energy)


def test_lambda_zero_nodes_identical_fp():
    m = make_model("linear-consensus", q0=0.5, lam=0.0, d2=0.1)
    ens = run_collocation(m, "fp", fp_setup(), n_nodes=5)
    for k in range(1, 5):
        assert np.array_equal(ens.fields[-1][k], ens.fields[-1][0])
    fmax = ens.fields[-1].max()
    assert np.all(ens.variance_field() <= 1e-14 * fmax * fmax)
    assert np.array_equal(ens.det_fields[-1], ens.fields[-1][0])


def test_mean_and_variance_small_cases():
    g = Grid1D(3, 0, 1)
    rule = QuadratureRule([0.0, 1.0], [0.5, 0.5])
    ens = CollocationEnsemble(rule, "fp", np.zeros(1), np.ones((2, 1)), np.zeros((2, 1)), np.ones((2, 1)), grid=g)
    p = np.array([0.0, 1.0, 2.0])
    q = np.array([2.0, 1.0, 0.0])
    ens.fields = [np.vstack([p, q])]
    assert np.allclose(ens.mean_field(), (p + q) / 2)
    ens.fields = [np.array([[0.0, 1.0, 1.0], [2.0, 1.0, 1.0]])]
    assert ens.mean_field()[0] == 1.0 and ens.variance_field()[0] == 1.0
    assert ens.variance_field()[1] == 0.0


def test_moment_of_mean_equals_mean_of_moments():
    m = make_model("linear-consensus", q0=0.5, lam=0.4, d2=0.1)
    ens = run_collocation(m, "fp", fp_setup())
    fbar = ens.mean_field(-1)
    g = ens.grid
    mass, mean, energy = ens.averaged_moments(-1)
    assert abs(g.integrate(fbar) - mass) < 1e-12
    assert abs(g.integrate(fbar, g.v) - mean) < 1e-12
    assert abs(g.integrate(fbar, g.v**2) - energy) < 1e-12
    assert abs(mass - 1) < 1e-12


def test_mc_backend_has_no_fields():
    m = make_model("linear-consensus", q0=0.5, lam=0.5)
    ens = run_collocation(m, "mc", MCSetup(0.1, 0.5, 200), n_nodes=2)
    with pytest.raises(BackendMismatch):
        ens.mean_field()
    with pytest.raises(BackendMismatch):
        ens.variance_field()


def test_node_permutation_bitwise():
    m = make_model("linear-consensus", q0=0.5, lam=0.5)
    rule = gauss_legendre(4)
    perm = QuadratureRule(rule.nodes[::-1], rule.weights[::-1])
    setup = MCSetup(0.05, 1.0, 1000, seed=5)
    a = run_collocation(m, "mc", setup, rule=rule)
    b = run_collocation(m, "mc", setup, rule=perm)
    assert np.array_equal(a.energy, b.energy)
    assert np.array_equal(a.averaged_energy(), b.averaged_energy())


def test_workers_do_not_change_results():
    m = make_model("linear-consensus", q0=0.5, lam=0.5)
    setup = MCSetup(0.05, 1.0, 1000, seed=5)
    a = run_collocation(m, "mc", setup, n_nodes=4, workers=1)
    b = run_collocation(m, "mc", setup, n_nodes=4, workers=3)
    assert np.array_equal(a.energy, b.energy) and np.array_equal(a.det_energy, b.det_energy)
    mf = make_model("bounded-confidence", d0=0.1)
    fs = FPSetup(Grid1D(21, -1, 1), None, 1.0)
    c = run_collocation(mf, "fp", fs, n_nodes=5, workers=1)
    d = run_collocation(mf, "fp", fs, n_nodes=5, workers=2)
    assert np.array_equal(c.fields[-1], d.fields[-1]) and c.dt == d.dt


def test_mc_collocation_energy_matches_per_node_closed_form():
    m = make_model("linear-consensus", q0=0.5, lam=0.5)
    setup = MCSetup(0.01, 3.0, 20000, seed=11, record_every=100)
    ens = run_collocation(m, "mc", setup, n_nodes=11)
    p = oracles.ConsensusParams(0.5, 0.5)
    ebar = ens.averaged_energy()
    se = ens.averaged_energy_stderr()
    for j in range(1, len(ens.t)):
        exp_ = sum(w * oracles.consensus_energy_f(p, ens.t[j], th) for th, w in zip(ens.rule.nodes, ens.rule.weights))
        assert abs(ebar[j] - exp_) < 4 * se[j]


def test_errors_are_tagged_with_node():
    m = make_model("linear-consensus", q0=0.5, lam=0.4, d2=0.1)
    with pytest.raises(StabilityViolation) as err:
        run_collocation(m, "fp", fp_setup(dt=0.5, snapshot_times=()), n_nodes=3, deterministic=False)
    assert err.value.node == 0


def test_refinement_changes_fbar_energy_little():
    m = make_model("linear-consensus", q0=0.5, lam=0.4, d2=0.1)
    setup = fp_setup(grid=Grid1D(101, -5, 5), dt=None, t_final=20.0, snapshot_times=())
    e10 = run_collocation(m, "fp", setup, n_nodes=11).averaged_moments()[2]
    e20 = run_collocation(m, "fp", setup, n_nodes=21).averaged_moments()[2]
    assert abs(e20 / e10 - 1) < 1e-3


def test_mean_field_matches_averaged_steady_density():
    m = make_model("linear-consensus", q0=0.5, lam=0.4, d2=0.1)
    setup = fp_setup(grid=Grid1D(201, -5, 5), dt=None, t_final=20.0, snapshot_times=(), quad_order="SPE")
    ens = run_collocation(m, "fp", setup, n_nodes=11)
    fb = oracles.const_diff_fbar_infty(oracles.ConsensusParams(0.5, 0.4), 0.1)
    g = ens.grid
    assert np.abs(ens.mean_field() - fb.density(g.v)).sum() * g.dv < 1e-2
