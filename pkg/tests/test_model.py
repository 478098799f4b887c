import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kinuq.errors import BoundsViolation, ConfigError
from kinuq.model import (
    DiffusionCoefficient,
    InteractionModel,
    NoiseSpec,
    StateSpace,
    UncertainParameter,
    averaged_drift_kernel,
    drift_kernel,
    make_model,
    post_interaction,
)

angles = st.floats(0.0, 2 * math.pi)
states = st.floats(-10, 10)


def test_uniform_parameter_moments():
    th = UncertainParameter.uniform(-1, 1)
    assert th.mean == 0 and abs(th.variance - 1 / 3) < 1e-15
    x = np.linspace(-1, 1, 100001)
    assert abs(np.trapezoid(th.density(x), x) - 1) < 1e-12
    with pytest.raises(ConfigError):
        UncertainParameter.uniform(1, 1)


def test_normal_parameter():
    th = UncertainParameter.standard_normal()
    assert th.mean == 0 and th.variance == 1
    rule = th.collocation_rule(5)
    assert abs(rule.expect(lambda t: t**2) - 1) < 1e-12


@pytest.mark.parametrize("law", ["uniform", "two-point"])
def test_noise_moments(law, rng):
    eta = NoiseSpec(0.3, law).sample(rng, 400000)
    assert abs(eta.mean()) < 5 * math.sqrt(0.3 / 400000)
    assert abs(eta.var() - 0.3) < 0.01


def test_two_point_variance_exact(rng):
    eta = NoiseSpec(0.04, "two-point").sample(rng, 10)
    assert np.allclose(eta**2, 0.04)


def test_quadratic_diffusion_vanishes_at_ends():
    d = DiffusionCoefficient.quadratic(0.5)
    assert d.amplitude(1.0) == 0 and d.amplitude(-1.0) == 0
    v = np.linspace(-0.9, 0.9, 7)
    h = 1e-6
    fd = (d.squared(v + h) - d.squared(v - h)) / (2 * h)
    assert np.allclose(d.squared_derivative(v), fd, atol=1e-8)


def test_kac_example():
    m = make_model("kac")
    vs, ws = post_interaction(m, 1.0, 0.0, math.pi / 3)
    assert abs(vs - 0.5) < 1e-7 and abs(ws - 0.8660254) < 1e-7
    assert abs(vs**2 + ws**2 - 1) < 1e-12


@given(states, states, angles)
def test_kac_identity_and_energy(v, w, th):
    m = make_model("kac")
    assert post_interaction(m, v, w, 0.0) == (v, w)
    vs, ws = post_interaction(m, v, w, th)
    assert abs(vs**2 + ws**2 - (v**2 + w**2)) <= 1e-12 * max(1.0, v**2 + w**2)


@given(states, states, angles, st.floats(0.01, 3))
def test_inelastic_kac_dissipates(v, w, th, p):
    m = make_model("inelastic-kac", p=p)
    vs, ws = post_interaction(m, v, w, th)
    assert vs**2 + ws**2 <= (v**2 + w**2) * (1 + 1e-12)


def test_consensus_example():
    m = make_model("linear-consensus", q0=0.5, lam=0.5)
    assert post_interaction(m, 1.0, -1.0, 0.0) == (0.0, 0.0)


@given(states, states, st.floats(-1, 1), st.floats(0.01, 1))
def test_symmetric_models_conserve_momentum(v, w, th, gamma):
    for m in (make_model("linear-consensus", q0=0.5, lam=0.4), make_model("bounded-confidence")):
        if m.space.bounded:
            v, w = np.clip([v / 10, w / 10], -1, 1)
        vs, ws = post_interaction(m, v, w, th, gamma)
        assert abs((vs + ws) - (v + w)) <= 1e-12 * max(1.0, abs(v) + abs(w))


@given(states, states, angles)
def test_general_rule_with_gamma_one(v, w, th):
    m = make_model("kac")
    p1, p2, q1, q2 = m.coefficients(th)
    vs, ws = post_interaction(m, v, w, th)
    assert abs(vs - (p1 * v + q1 * w)) <= 1e-12 * max(1, abs(v) + abs(w))
    assert abs(ws - (p2 * v + q2 * w)) <= 1e-12 * max(1, abs(v) + abs(w))


def test_bounds_violation():
    m = make_model("bounded-confidence", d0=0.5, sigma2=1.0)
    with pytest.raises(BoundsViolation):
        post_interaction(m, 0.0, 0.0, 0.0, 1.0, 5.0, 0.0)


def test_gamma_range():
    with pytest.raises(ConfigError):
        post_interaction(make_model("kac"), 1.0, 0.0, 0.1, gamma=1.5)


def test_drift_kernel_examples():
    assert drift_kernel(make_model("linear-consensus", q0=0.5, lam=0.4), 0.0, 1.0, 0.0) == 0.5
    assert abs(drift_kernel(make_model("inelastic-kac", p=1), 2.0, 7.0, math.pi / 2) + 2) < 1e-15
    for name in ("kac", "inelastic-kac", "linear-consensus", "bounded-confidence"):
        assert drift_kernel(make_model(name), 0.0, 0.0, 0.3) == 0


def test_averaged_drift_examples():
    bc = make_model("bounded-confidence", delta0=1.0, slope=0.5)
    assert abs(averaged_drift_kernel(bc, 0.0, 1.0) - 0.5) < 1e-15
    assert averaged_drift_kernel(bc, -0.9, 0.9) == 0
    assert averaged_drift_kernel(make_model("inelastic-kac", p=2.5), 3.0, 1.0) == -3


@pytest.mark.parametrize(
    "model",
    [
        make_model("kac"),
        make_model("inelastic-kac", p=1.0),
        make_model("linear-consensus", q0=0.3, lam=0.2),
        make_model("bounded-confidence", delta0=1.0, slope=0.5),
        make_model("bounded-confidence", delta0=0.75, slope=0.25),
    ],
    ids=lambda m: m.kind,
)
def test_averaged_drift_matches_theta_quadrature(model):
    lo, hi = model.theta.support
    # fine midpoint rule in theta as an independent oracle
    n = 200000
    th = lo + (hi - lo) * (np.arange(n) + 0.5) / n
    for v, w in [(0.3, -0.2), (-0.5, 0.5), (0.9, -0.1), (0.0, 0.45)]:
        ref = np.mean(drift_kernel(model, v, w, th))
        tol = 1e-10 if model.kind != "bounded-confidence" else 2e-5
        assert abs(averaged_drift_kernel(model, v, w) - ref) < tol


def test_kac_requires_full_circle():
    with pytest.raises(ConfigError):
        InteractionModel("kac", {}, UncertainParameter.uniform(0, 1))
    with pytest.raises(ConfigError):
        InteractionModel("kac", {}, None, space=StateSpace.interval())


def test_bounded_confidence_threshold_range():
    with pytest.raises(ConfigError):
        make_model("bounded-confidence", delta0=1.8, slope=0.5)
    with pytest.raises(ConfigError):
        make_model("bounded-confidence", theta_law="normal")


def test_consensus_parameter_checks():
    with pytest.raises(ConfigError):
        make_model("linear-consensus", q0=1.2)
    with pytest.raises(ConfigError):
        make_model("linear-consensus", lam=-0.1)
    with pytest.raises(ConfigError):
        make_model("nope")
