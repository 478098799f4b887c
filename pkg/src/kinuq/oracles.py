"""Closed-form moments and steady states of the uncertain kinetic models.

Everything here is a pure function of its arguments; these values are
the ground truth that the particle and grid solvers are checked against.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError, ParameterError
from .quadrature import erf, erfi_scaled

EXP_GUARD = 700.0
_SQRT_PI = math.sqrt(math.pi)


@dataclass(frozen=True)
class BlowUp:
    """Marker for a moment that is infinite at the requested time."""

    t: float
    t_blowup: float

    def __float__(self):
        return math.inf


@dataclass(frozen=True)
class ConsensusParams:
    """``q(theta) = q0 + lam * theta`` with ``theta`` of variance ``var_theta``."""

    q0: float
    lam: float
    var_theta: float = 1.0 / 3.0

    def __post_init__(self):
        if not 0.0 < self.q0 < 1.0:
            raise ConfigError("q0 must lie in (0, 1)")
        if self.lam < 0.0:
            raise ConfigError("lam must be non-negative")
        if self.var_theta < 0.0:
            raise ConfigError("variance must be non-negative")

    @property
    def xi_plus(self):
        return math.sqrt(2.0) * self.lam + (2.0 * self.q0 - 1.0) / math.sqrt(2.0)

    @property
    def xi_minus(self):
        return -math.sqrt(2.0) * self.lam + (2.0 * self.q0 - 1.0) / math.sqrt(2.0)


# --- Kac -------------------------------------------------------------------


def kac_means(t, theta):
    """``(m_g, m_f) = (exp(-t), exp((cos theta - 1) t))`` for unit initial mean."""
    if t < 0:
        raise DomainError("t must be non-negative")
    return math.exp(-t), math.exp((math.cos(theta) - 1.0) * t)


def kac_mean_lower_bound(t):
    """Lower bound ``erf(pi sqrt(t/2)) / sqrt(2 pi t)`` on the theta-mean
    of ``m_f``; equals 1 at ``t = 0``."""
    if t < 0:
        raise DomainError("t must be non-negative")
    if t == 0:
        return 1.0
    return erf(math.pi * math.sqrt(0.5 * t)) / math.sqrt(2.0 * math.pi * t)


def kac_mean_fbar(t):
    """Exact theta-mean ``exp(-t) I_0(t)`` of ``m_f`` for ``theta ~ U(0, 2 pi)``."""
    return float(np.exp(-t) * np.i0(t))


# --- consensus -------------------------------------------------------------


def consensus_energies(params, t, theta):
    """``(E_g, E_f)`` for unit initial energy and zero mean."""
    q0, lam = params.q0, params.lam
    e_g = math.exp(2.0 * (q0 * q0 - q0 + lam * lam * params.var_theta) * t)
    e_f = math.exp(2.0 * (q0 * q0 - q0 + lam * lam * theta * theta + lam * (2.0 * q0 - 1.0) * theta) * t)
    return e_g, e_f


def consensus_energy_f(params, t, theta):
    """``E_f(t; theta) = exp(2 q (q - 1) t)`` with ``q = q0 + lam theta``."""
    q = params.q0 + params.lam * theta
    return math.exp(2.0 * q * (q - 1.0) * t)


def consensus_energy_fbar_uniform(params, t):
    """theta-mean of ``E_f`` for ``theta ~ U(-1, 1)``, via ``erfi``.

    Evaluates ``1/(4 lam) sqrt(pi/(2t)) e^{-t/2} [erfi(xi+ sqrt t) - erfi(xi- sqrt t)]``
    in the scaled form ``e^{-x^2} erfi(x)`` so nothing overflows; returns
    ``inf`` once the exponent passes 700.
    """
    if t < 0:
        raise DomainError("t must be non-negative")
    if t == 0:
        return 1.0
    if params.lam == 0.0:
        return consensus_energy_f(params, t, 0.0)
    st = math.sqrt(t)
    a = params.xi_plus * st
    b = params.xi_minus * st
    pref = 1.0 / (4.0 * params.lam) * math.sqrt(math.pi / (2.0 * t))
    total = 0.0
    for x, sign in ((a, 1.0), (b, -1.0)):
        expo = x * x - 0.5 * t
        if expo > EXP_GUARD:
            return math.inf
        total += sign * erfi_scaled(x) * math.exp(expo)
    return pref * total


def consensus_fbar_branch(params):
    """Which large-time regime applies: ``"q0>1/2"``, ``"q0<1/2"`` or
    ``"q0=1/2"`` (sign of ``q0 - 1/2`` picks the dominant erfi term)."""
    d = params.q0 - 0.5
    if d > 0:
        return "q0>1/2"
    if d < 0:
        return "q0<1/2"
    return "q0=1/2"


def consensus_conditions(params):
    """``(deterministic_ok, stochastic_ok)``:
    ``lam < sqrt(q0 (1 - q0) / Var theta)`` and ``lam <= min(q0, 1 - q0)``."""
    q0, lam = params.q0, params.lam
    if params.var_theta == 0:
        det = True
    else:
        det = lam < math.sqrt(q0 * (1.0 - q0) / params.var_theta)
    sto = lam <= min(q0, 1.0 - q0)
    return det, sto


def normal_theta_energy_fbar(params, t):
    """theta-mean of ``E_f`` for standard normal theta.

    Finite for ``t < 1/(4 lam^2)``; a :class:`BlowUp` marker otherwise.
    """
    if t < 0:
        raise DomainError("t must be non-negative")
    q0, lam = params.q0, params.lam
    t_blow = math.inf if lam == 0 else 1.0 / (4.0 * lam * lam)
    if t >= t_blow:
        return BlowUp(t, t_blow)
    den = 1.0 - 4.0 * lam * lam * t
    expo = 2.0 * q0 * (q0 - 1.0) * t + 2.0 * lam * lam * (2.0 * q0 - 1.0) ** 2 * t * t / den
    return math.exp(expo) / math.sqrt(den)


# --- inelastic Kac, quasi-invariant limit ----------------------------------


@dataclass(frozen=True)
class SteadyStates:
    g_inf: object
    f_inf: object
    E_g_inf: float
    E_f_inf: float


def _gaussian(a, d2):
    # density proportional to exp(-a v^2 / D^2), unit mass
    def dens(v):
        v = np.asarray(v, dtype=float)
        return math.sqrt(a / (math.pi * d2)) * np.exp(-a * v * v / d2)

    return dens


def inelastic_kac_steady(p, d2, theta):
    """Gaussian steady states of the inelastic Kac Fokker-Planck limits.

    ``E_g = D^2/2``, ``E_f(theta) = D^2 / (2 (1 - cos theta |cos theta|^p))``.
    """
    if d2 <= 0:
        raise ConfigError("d2 must be positive")
    c = math.cos(theta) * abs(math.cos(theta)) ** p
    a_f = 1.0 - c
    if a_f <= 1e-15:
        raise DomainError("degenerate at theta = 0 or 2 pi: no steady state")
    return SteadyStates(_gaussian(1.0, d2), _gaussian(a_f, d2), 0.5 * d2, d2 / (2.0 * a_f))


def inelastic_kac_energy_fbar_infty():
    """theta-mean of the stationary energies: infinite."""
    return math.inf


def inelastic_kac_scaled_energy(gamma, d2, p=1.0):
    """Stationary energy of the gamma-scaled theta-averaged particle
    dynamics with ``Var eta = gamma`` and unit collision rate per scaled
    time; tends to ``D^2/2`` as ``gamma -> 0``."""
    # <(c-1)^2 + s^2> over theta for c = cos|cos|^p, s = sin|sin|^p
    grid = np.linspace(0.0, 2.0 * math.pi, 20001)[:-1]
    c = np.cos(grid) * np.abs(np.cos(grid)) ** p
    s = np.sin(grid) * np.abs(np.sin(grid)) ** p
    second = float(np.mean((c - 1.0) ** 2 + s * s))
    return d2 / (2.0 - gamma * second)


def const_diff_steady(params, d2, theta):
    """Gaussian steady states for linear consensus with constant ``D^2``.

    ``g_inf`` uses ``q0`` (zero-mean theta), ``f_inf`` uses
    ``q0 + lam theta``; ``E = D^2 / (2 q)``.
    """
    if d2 <= 0:
        raise ConfigError("d2 must be positive")
    q = params.q0 + params.lam * theta
    if q <= 0:
        raise ParameterError("need q0 + lam theta > 0")
    return SteadyStates(_gaussian(params.q0, d2), _gaussian(q, d2), d2 / (2.0 * params.q0), d2 / (2.0 * q))


@dataclass(frozen=True)
class FbarInfty:
    density: object
    E_fbar_inf: float
    E_g_inf: float

    @property
    def ratio(self):
        return self.E_fbar_inf / self.E_g_inf


def fbar_coefficients(params, d2):
    """``(C1, C2)`` and the function ``C3(v)`` of the stationary theta-mean
    for ``theta ~ U(-1, 1)``, so that
    ``fbar(v) = (C1 e^{-(q0-lam) v^2/D^2} + C2 e^{-(q0+lam) v^2/D^2} + C3(v)/v) / v^2``."""
    q0, lam = params.q0, params.lam
    d = math.sqrt(d2)
    c1 = d * math.sqrt(q0 - lam) / (2.0 * lam * _SQRT_PI)
    c2 = -d * math.sqrt(q0 + lam) / (2.0 * lam * _SQRT_PI)

    def c3(v):
        v = np.asarray(v, dtype=float)
        lo = np.vectorize(erf)(math.sqrt(q0 - lam) * v / d)
        hi = np.vectorize(erf)(math.sqrt(q0 + lam) * v / d)
        return d2 / (4.0 * lam) * (hi - lo)

    return c1, c2, c3


_SERIES_CUTOFF = 0.1


def const_diff_fbar_infty(params, d2):
    """Stationary theta-mean for constant ``D^2`` and ``theta ~ U(-1, 1)``.

    ``E_fbar = D^2/(4 lam) log((q0 + lam)/(q0 - lam))``. Near ``v = 0`` the
    closed form cancels badly, so ``|v|/D < 0.1`` uses its Taylor series.

    Raises
    ------
    ParameterError
        Unless ``0 < lam < q0``.
    """
    q0, lam = params.q0, params.lam
    if not 0.0 < lam < q0:
        raise ParameterError("need 0 < lam < q0")
    if d2 <= 0:
        raise ConfigError("d2 must be positive")
    d = math.sqrt(d2)
    a, b = q0 - lam, q0 + lam
    c1, c2, c3 = fbar_coefficients(params, d2)
    series_pref = 1.0 / (2.0 * lam * d * _SQRT_PI)

    def near(x):
        # (1/(2 lam D sqrt pi)) sum (-x^2)^n/n! (b^{n+3/2} - a^{n+3/2})/(n+3/2)
        total = np.zeros_like(x)
        term = np.ones_like(x)
        for n in range(30):
            if n:
                term = term * (-x * x) / n
            total = total + term * (b ** (n + 1.5) - a ** (n + 1.5)) / (n + 1.5)
        return series_pref * total

    def density(v):
        v = np.asarray(v, dtype=float)
        scalar = v.ndim == 0
        v = np.atleast_1d(v)
        x = v / d
        out = np.empty_like(v)
        small = np.abs(x) < _SERIES_CUTOFF
        out[small] = near(x[small])
        vb = v[~small]
        if vb.size:
            out[~small] = (
                c1 * np.exp(-a * vb * vb / d2) + c2 * np.exp(-b * vb * vb / d2) + c3(vb) / vb
            ) / (vb * vb)
        return float(out[0]) if scalar else out

    e_fbar = d2 / (4.0 * lam) * math.log(b / a)
    return FbarInfty(density, e_fbar, d2 / (2.0 * q0))


def const_diff_energy_ratio(q0, lam):
    """``E_fbar_inf / E_g_inf = (q0/(2 lam)) log((1 + lam/q0)/(1 - lam/q0))``;
    tends to 1 as ``lam -> 0``."""
    if not 0.0 <= lam < q0:
        raise ParameterError("need 0 <= lam < q0")
    r = lam / q0
    if r < 1e-4:
        return 1.0 + r * r / 3.0 + r**4 / 5.0
    return math.log((1.0 + r) / (1.0 - r)) / (2.0 * r)


# --- nonlinear diffusion ---------------------------------------------------


def nonlinear_diff_steady_shape(q_value, v):
    """Unnormalized ``exp(-q/(1 - v^2)) / (1 - v^2)^2`` on ``|v| < 1``.

    For ``D(v) = d0 (1 - v^2)`` and consensus strength ``q`` pass
    ``q_value = q / d0^2``.
    """
    if q_value <= 0:
        raise DomainError("q_value must be positive")
    v = np.asarray(v, dtype=float)
    if np.any(np.abs(v) >= 1.0):
        raise DomainError("shape is defined for |v| < 1 only")
    s = 1.0 - v * v
    out = np.exp(-q_value / s) / (s * s)
    return float(out) if out.ndim == 0 else out


def nonlinear_diff_normalizer(q_value, n=20001):
    """``int_{-1}^{1}`` of the shape, by composite Simpson on open ends."""
    if n % 2 == 0:
        n += 1
    v = np.linspace(-1.0, 1.0, n)
    vals = np.zeros(n)
    vals[1:-1] = nonlinear_diff_steady_shape(q_value, v[1:-1])
    h = v[1] - v[0]
    return float(h / 3.0 * (vals[0] + vals[-1] + 4.0 * vals[1:-1:2].sum() + 2.0 * vals[2:-1:2].sum()))


def nonlinear_diff_steady_density(q_value, v):
    """Normalized steady density; zero at and beyond ``|v| = 1``."""
    v = np.asarray(v, dtype=float)
    out = np.zeros_like(v)
    inside = np.abs(v) < 1.0
    out[inside] = nonlinear_diff_steady_shape(q_value, v[inside]) / nonlinear_diff_normalizer(q_value)
    return out


# --- Wasserstein -----------------------------------------------------------


def w2_to_dirac(second_moment):
    """``W_2`` distance to a point mass: square root of the second moment
    about that point."""
    if second_moment < 0:
        raise DomainError("second moment must be non-negative")
    return math.sqrt(second_moment)


ORACLES = (
    "kac-means",
    "kac-bound",
    "consensus-energies",
    "consensus-fbar",
    "consensus-conditions",
    "normal-fbar",
    "inelastic-kac",
    "const-diff",
    "const-diff-fbar",
    "nonlinear-shape",
    "w2",
)
