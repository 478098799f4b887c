"""Uncertain binary-interaction models.

A model bundles the interaction rule (Kac family or symmetric
consensus-type), the law of the uncertain parameter ``theta``, the noise
``eta`` and its state-dependent amplitude ``D(v)``, and the state space.
All evaluators are vectorized over numpy arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BoundsViolation, ConfigError
from .quadrature import QuadratureRule, gauss_hermite, gauss_legendre

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class UncertainParameter:
    """Law of the scalar random input: ``uniform`` on an interval or
    ``normal`` (standard normal)."""

    law: str = "uniform"
    lower: float = -1.0
    upper: float = 1.0

    def __post_init__(self):
        if self.law not in ("uniform", "normal"):
            raise ConfigError(f"unknown law {self.law!r}")
        if self.law == "uniform" and not self.lower < self.upper:
            raise ConfigError("uniform law needs lower < upper")

    @classmethod
    def uniform(cls, lower=-1.0, upper=1.0):
        return cls("uniform", float(lower), float(upper))

    @classmethod
    def standard_normal(cls):
        return cls("normal", -math.inf, math.inf)

    @property
    def support(self):
        return (self.lower, self.upper)

    @property
    def mean(self):
        return 0.5 * (self.lower + self.upper) if self.law == "uniform" else 0.0

    @property
    def variance(self):
        if self.law == "uniform":
            return (self.upper - self.lower) ** 2 / 12.0
        return 1.0

    def density(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.law == "uniform":
            inside = (theta >= self.lower) & (theta <= self.upper)
            return np.where(inside, 1.0 / (self.upper - self.lower), 0.0)
        return np.exp(-0.5 * theta**2) / math.sqrt(TWO_PI)

    def contains(self, theta):
        return self.lower <= theta <= self.upper

    def sample(self, rng, size):
        if self.law == "uniform":
            return rng.uniform(self.lower, self.upper, size)
        return rng.standard_normal(size)

    def collocation_rule(self, n):
        """Gaussian rule matched to the law: Legendre or Hermite."""
        if self.law == "uniform":
            return gauss_legendre(n, self.lower, self.upper)
        return gauss_hermite(n)


@dataclass(frozen=True)
class NoiseSpec:
    """Zero-mean noise ``eta`` with variance ``variance``.

    ``uniform`` draws from ``[-sqrt(3 var), sqrt(3 var)]``; ``two-point``
    draws ``+-sqrt(var)`` with equal probability.
    """

    variance: float = 0.0
    law: str = "uniform"

    def __post_init__(self):
        if self.variance < 0:
            raise ConfigError("noise variance must be non-negative")
        if self.law not in ("uniform", "two-point"):
            raise ConfigError(f"unknown noise law {self.law!r}")

    def sample(self, rng, size):
        if self.variance == 0.0:
            return np.zeros(size)
        if self.law == "uniform":
            half = math.sqrt(3.0 * self.variance)
            return rng.uniform(-half, half, size)
        sign = rng.integers(0, 2, size) * 2 - 1
        return sign * math.sqrt(self.variance)


@dataclass(frozen=True)
class StateSpace:
    """Either the real line truncated to ``[-L, L]`` or a bounded interval."""

    kind: str = "real"
    lower: float = -5.0
    upper: float = 5.0

    def __post_init__(self):
        if self.kind not in ("real", "interval"):
            raise ConfigError(f"unknown state space {self.kind!r}")
        if not self.lower < self.upper:
            raise ConfigError("state space needs lower < upper")

    @classmethod
    def real_line(cls, halfwidth=5.0):
        if halfwidth <= 0:
            raise ConfigError("truncation half-width must be positive")
        return cls("real", -float(halfwidth), float(halfwidth))

    @classmethod
    def interval(cls, lower=-1.0, upper=1.0):
        return cls("interval", float(lower), float(upper))

    @property
    def bounded(self):
        return self.kind == "interval"

    def contains(self, v):
        v = np.asarray(v)
        return (v >= self.lower) & (v <= self.upper)


@dataclass(frozen=True)
class DiffusionCoefficient:
    """Local diffusion amplitude ``D(v)``.

    ``zero``; ``constant`` with ``d2 = D^2``; ``quadratic`` with
    ``D(v) = d0 (1 - v^2)``, which vanishes at ``v = +-1``.
    """

    kind: str = "zero"
    d2: float = 0.0
    d0: float = 0.0

    def __post_init__(self):
        if self.kind == "constant" and not self.d2 > 0:
            raise ConfigError("constant diffusion needs d2 > 0")
        if self.kind == "quadratic" and not self.d0 > 0:
            raise ConfigError("quadratic diffusion needs d0 > 0")
        if self.kind not in ("zero", "constant", "quadratic"):
            raise ConfigError(f"unknown diffusion kind {self.kind!r}")

    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def constant(cls, d2):
        return cls("constant", d2=float(d2))

    @classmethod
    def quadratic(cls, d0):
        return cls("quadratic", d0=float(d0))

    @property
    def is_zero(self):
        return self.kind == "zero"

    def amplitude(self, v):
        v = np.asarray(v, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(v)
        if self.kind == "constant":
            return np.full_like(v, math.sqrt(self.d2))
        return self.d0 * (1.0 - v * v)

    def squared(self, v):
        """``D(v)^2``."""
        v = np.asarray(v, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(v)
        if self.kind == "constant":
            return np.full_like(v, self.d2)
        return (self.d0 * (1.0 - v * v)) ** 2

    def squared_derivative(self, v):
        """``d/dv D(v)^2``."""
        v = np.asarray(v, dtype=float)
        if self.kind != "quadratic":
            return np.zeros_like(v)
        return -4.0 * self.d0**2 * v * (1.0 - v * v)


KAC_FAMILY = ("kac", "inelastic-kac")
CONSENSUS_FAMILY = ("linear-consensus", "bounded-confidence")
MODEL_NAMES = KAC_FAMILY + CONSENSUS_FAMILY


@dataclass(frozen=True)
class InteractionModel:
    """Binary interaction rule with uncertain parameter.

    Parameters
    ----------
    kind : str
        One of ``kac``, ``inelastic-kac``, ``linear-consensus``,
        ``bounded-confidence``.
    params : dict
        ``p`` for inelastic Kac; ``q0`` and ``lam`` for linear consensus
        (``q = q0 + lam * theta``); ``delta0`` and ``slope`` for bounded
        confidence (threshold ``delta0 + slope * theta``).
    """

    kind: str
    params: dict = field(default_factory=dict)
    theta: UncertainParameter | None = None
    noise: NoiseSpec = NoiseSpec()
    diffusion: DiffusionCoefficient = DiffusionCoefficient()
    space: StateSpace = StateSpace()

    def __post_init__(self):
        if self.kind not in MODEL_NAMES:
            raise ConfigError(f"unknown model {self.kind!r}")
        kac_law = UncertainParameter.uniform(0.0, TWO_PI)
        if self.kind in KAC_FAMILY:
            if self.theta is None:
                object.__setattr__(self, "theta", kac_law)
            elif self.theta != kac_law:
                raise ConfigError("Kac models need theta ~ U(0, 2 pi)")
            if self.space.bounded:
                raise ConfigError("Kac models live on the real line")
            if self.kind == "inelastic-kac" and self.params.get("p", 0.0) < 0:
                raise ConfigError("inelasticity exponent p must be >= 0")
        else:
            if self.theta is None:
                object.__setattr__(self, "theta", UncertainParameter.uniform())
        if self.kind == "linear-consensus":
            q0 = self.params.get("q0")
            lam = self.params.get("lam")
            if q0 is None or lam is None:
                raise ConfigError("linear consensus needs q0 and lam")
            if not 0.0 < q0 < 1.0:
                raise ConfigError("q0 must lie in (0, 1)")
            if lam < 0:
                raise ConfigError("lam must be non-negative")
        if self.kind == "bounded-confidence":
            if not self.space.bounded or (self.space.lower, self.space.upper) != (-1.0, 1.0):
                raise ConfigError("bounded confidence lives on [-1, 1]")
            if self.theta.law != "uniform":
                raise ConfigError("bounded confidence needs a bounded theta law")
            ends = [self.threshold(t) for t in self.theta.support]
            if min(ends) < 0.0 or max(ends) > 2.0:
                raise ConfigError("threshold must stay in [0, 2] over the support")

    # -- coefficient functions ------------------------------------------

    @property
    def is_linear(self):
        """True when ``P(v, w; theta)`` is linear in ``(v, w)``."""
        return self.kind != "bounded-confidence"

    @property
    def p(self):
        return float(self.params.get("p", 0.0)) if self.kind == "inelastic-kac" else 0.0

    def q(self, theta):
        """Consensus strength ``q0 + lam * theta``."""
        return self.params["q0"] + self.params["lam"] * np.asarray(theta, dtype=float)

    def threshold(self, theta):
        """Bounded-confidence threshold ``delta0 + slope * theta``."""
        return self.params["delta0"] + self.params["slope"] * np.asarray(theta, dtype=float)

    def coefficients(self, theta):
        """``(p1, p2, q1, q2)`` of the linear rule at ``theta``."""
        theta = np.asarray(theta, dtype=float)
        if self.kind in KAC_FAMILY:
            c = np.cos(theta)
            s = np.sin(theta)
            p = self.p
            if p:
                c = c * np.abs(c) ** p
                s = s * np.abs(s) ** p
            return c, s, -s, c
        if self.kind == "linear-consensus":
            q = self.q(theta)
            return 1.0 - q, q, q, 1.0 - q
        raise ConfigError("bounded confidence has state-dependent coefficients")

    def consensus_weight(self, v, w, theta):
        """Interaction strength ``q`` for the symmetric models."""
        if self.kind == "linear-consensus":
            return self.q(theta) + 0.0 * (np.asarray(v) + np.asarray(w))
        if self.kind == "bounded-confidence":
            dist = np.abs(np.asarray(w, dtype=float) - np.asarray(v, dtype=float))
            return (dist <= self.threshold(theta)).astype(float)
        raise ConfigError("only symmetric models have a consensus weight")

    def linear_drift(self, theta=None):
        """``(a, b)`` with ``P(v, w; theta) = a v + b w``.

        ``theta=None`` returns the theta-averaged pair.
        """
        if self.kind == "bounded-confidence":
            raise ConfigError("bounded confidence drift is nonlinear")
        if self.kind == "linear-consensus":
            q = self.q(self.theta.mean if theta is None else theta)
            return -q, q
        if theta is None:
            # <cos|cos|^p> = <sin|sin|^p> = 0 over a full period
            return -1.0, 0.0
        p1, p2, q1, q2 = self.coefficients(theta)
        return 0.5 * (p1 + q2 - 2.0), 0.5 * (p2 + q1)

    def interaction_probability(self, dist, theta=None):
        """Bounded confidence: ``1{dist <= threshold(theta)}`` or, for
        ``theta=None``, its theta-average ``P(threshold >= dist)``."""
        dist = np.asarray(dist, dtype=float)
        if theta is not None:
            return (dist <= self.threshold(theta)).astype(float)
        delta0 = self.params["delta0"]
        slope = self.params["slope"]
        lo, hi = self.theta.support
        if slope == 0.0:
            return (dist <= delta0).astype(float)
        cut = (dist - delta0) / slope
        if slope > 0:
            frac = (hi - np.clip(cut, lo, hi)) / (hi - lo)
        else:
            frac = (np.clip(cut, lo, hi) - lo) / (hi - lo)
        return frac


def post_interaction_unchecked(model, v, w, theta, gamma, eta_v, eta_w):
    """Post-interaction pair without the bounded-space check."""
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    if model.kind in CONSENSUS_FAMILY:
        q = model.consensus_weight(v, w, theta)
        dv = gamma * q * (w - v)
        v_star = v + dv
        w_star = w - dv
    else:
        p1, p2, q1, q2 = model.coefficients(theta)
        v_star = v + gamma * ((p1 - 1.0) * v + q1 * w)
        w_star = w + gamma * (p2 * v + (q2 - 1.0) * w)
    if not model.diffusion.is_zero:
        v_star = v_star + model.diffusion.amplitude(v) * eta_v
        w_star = w_star + model.diffusion.amplitude(w) * eta_w
    return v_star, w_star


def post_interaction(model, v, w, theta, gamma=1.0, eta_v=0.0, eta_w=0.0):
    """Apply the binary rule
    ``v* = v + gamma[(p1-1) v + q1 w] + D(v) eta_v`` and its twin for ``w*``.

    With ``gamma=1`` and no noise this is the plain linear rule
    ``v* = p1 v + q1 w``, ``w* = p2 v + q2 w``.

    Raises
    ------
    BoundsViolation
        If the state space is bounded and either output leaves it.
    """
    if not 0.0 < gamma <= 1.0:
        raise ConfigError("gamma must lie in (0, 1]")
    v_star, w_star = post_interaction_unchecked(model, v, w, theta, gamma, eta_v, eta_w)
    if model.space.bounded:
        ok = model.space.contains(v_star) & model.space.contains(w_star)
        if not np.all(ok):
            raise BoundsViolation("post-interaction state left the state space")
    if np.ndim(v_star) == 0:
        return float(v_star), float(w_star)
    return v_star, w_star


def drift_kernel(model, v, w, theta):
    """``P(v, w; theta) = [(p1 + q2 - 2) v + (p2 + q1) w] / 2``.

    Reduces to ``q (w - v)`` for the symmetric models.
    """
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    if model.kind == "bounded-confidence":
        out = model.consensus_weight(v, w, theta) * (w - v)
    else:
        a, b = model.linear_drift(theta)
        out = a * v + b * w
    return float(out) if np.ndim(out) == 0 else out


def _theta_average(model, h, n=64):
    rule = model.theta.collocation_rule(n)
    return sum(wk * h(tk) for tk, wk in zip(rule.nodes, rule.weights))


def averaged_drift_kernel(model, v, w):
    """theta-average of :func:`drift_kernel`.

    Closed forms for the Kac family (``-v``), linear consensus
    (``<q> (w - v)``) and bounded confidence with uniform theta; other
    cases fall back to a 64-point Gaussian rule in theta.
    """
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    if model.kind == "bounded-confidence":
        if model.theta.law == "uniform":
            out = model.interaction_probability(np.abs(w - v)) * (w - v)
        else:
            out = _theta_average(model, lambda t: drift_kernel(model, v, w, t))
    elif model.kind == "linear-consensus" and model.theta.law == "normal":
        out = _theta_average(model, lambda t: drift_kernel(model, v, w, t))
    else:
        a, b = model.linear_drift(None)
        out = a * v + b * w
    return float(out) if np.ndim(out) == 0 else out


# --- presets ---------------------------------------------------------------


def make_model(
    name,
    *,
    q0=0.5,
    lam=0.5,
    p=1.0,
    delta0=1.0,
    slope=0.5,
    d2=None,
    d0=None,
    sigma2=0.0,
    noise_law="uniform",
    theta_law="uniform",
    halfwidth=5.0,
    bounded=None,
):
    """Build a model from a preset name and numeric parameters.

    Diffusion is constant when ``d2`` is given, quadratic when ``d0`` is
    given, zero otherwise. ``bounded`` forces ``[-1, 1]`` for linear
    consensus; bounded confidence is always on ``[-1, 1]``.
    """
    if name not in MODEL_NAMES:
        raise ConfigError(f"unknown model preset {name!r}; choose from {MODEL_NAMES}")
    if d2 is not None and d0 is not None:
        raise ConfigError("give either d2 (constant) or d0 (quadratic), not both")
    if d2 is not None:
        diffusion = DiffusionCoefficient.constant(d2)
    elif d0 is not None:
        diffusion = DiffusionCoefficient.quadratic(d0)
    else:
        diffusion = DiffusionCoefficient.zero()
    if bounded is None:
        bounded = name == "bounded-confidence" or diffusion.kind == "quadratic"
    space = StateSpace.interval() if bounded else StateSpace.real_line(halfwidth)
    noise = NoiseSpec(sigma2, noise_law)
    if name in KAC_FAMILY:
        params = {"p": float(p)} if name == "inelastic-kac" else {}
        return InteractionModel(name, params, None, noise, diffusion, space)
    theta = (
        UncertainParameter.uniform() if theta_law == "uniform" else UncertainParameter.standard_normal()
    )
    if name == "linear-consensus":
        params = {"q0": float(q0), "lam": float(lam)}
    else:
        params = {"delta0": float(delta0), "slope": float(slope)}
    return InteractionModel(name, params, theta, noise, diffusion, space)
