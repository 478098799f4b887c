"""Quadrature rules for collocation in the uncertain parameter and for
per-cell integration, plus the error functions used by the closed forms.

All rules here are *probability* rules: the weights sum to one and
``sum(w * h(nodes))`` approximates the expectation of ``h`` under the
law the rule was built for.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonConvergence

NEWTON_TOL = 1e-14
NEWTON_MAXITER = 100

_SQRT_PI = math.sqrt(math.pi)


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and normalized weights of a quadrature rule."""

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float).ravel()
        weights = np.asarray(self.weights, dtype=float).ravel()
        if nodes.shape != weights.shape:
            raise ValueError("nodes and weights must have the same length")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    def __len__(self):
        return self.nodes.size

    def expect(self, h):
        """Weighted sum ``sum_k w_k h(theta_k)``."""
        return float(np.dot(self.weights, h(self.nodes)))

    def sorted(self):
        """Return the same rule with nodes in ascending order."""
        order = np.argsort(self.nodes, kind="stable")
        return QuadratureRule(self.nodes[order], self.weights[order])


def _legendre_newton(n):
    # cosine guesses land inside the basin of every root
    i = np.arange(n)
    x = np.cos(np.pi * (i + 0.75) / (n + 0.5))
    for _ in range(NEWTON_MAXITER):
        p_prev = np.ones_like(x)
        p = x.copy()
        for k in range(2, n + 1):
            p_prev, p = p, ((2 * k - 1) * x * p - (k - 1) * p_prev) / k
        dp = n * (x * p - p_prev) / (x * x - 1.0)
        dx = p / dp
        x = x - dx
        if np.max(np.abs(dx)) < NEWTON_TOL:
            break
    else:
        raise NonConvergence(f"Legendre roots did not converge for n={n}")
    # derivative at the converged nodes
    p_prev = np.ones_like(x)
    p = x.copy()
    for k in range(2, n + 1):
        p_prev, p = p, ((2 * k - 1) * x * p - (k - 1) * p_prev) / k
    dp = n * (x * p - p_prev) / (x * x - 1.0)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    return x[::-1].copy(), w[::-1].copy()


def gauss_legendre(n, lower=-1.0, upper=1.0):
    """Gauss-Legendre rule for the uniform law on ``[lower, upper]``.

    Nodes are the roots of the degree-``n`` Legendre polynomial found by
    Newton iteration on the three-term recurrence. The rule integrates
    polynomials of degree ``2n - 1`` exactly.

    Parameters
    ----------
    n : int
        Number of nodes, ``n >= 1``.
    lower, upper : float
        Support of the uniform density.

    Returns
    -------
    QuadratureRule
        Ascending nodes in ``(lower, upper)``, weights summing to one.
    """
    n = int(n)
    if n < 1:
        raise ValueError("need at least one node")
    if not lower < upper:
        raise ValueError("lower must be smaller than upper")
    if n == 1:
        x, w = np.zeros(1), np.array([2.0])
    else:
        x, w = _legendre_newton(n)
    half = 0.5 * (upper - lower)
    mid = 0.5 * (upper + lower)
    return QuadratureRule(mid + half * x, 0.5 * w)


def _hermite_normalized(x, n):
    """Orthonormal probabilists' Hermite values h_n(x), h_{n-1}(x)."""
    h_prev = np.zeros_like(x)
    h = np.ones_like(x)
    for k in range(n):
        h_prev, h = h, (x * h - math.sqrt(k) * h_prev) / math.sqrt(k + 1)
    return h, h_prev


def gauss_hermite(n):
    """Gauss-Hermite rule for the standard normal law.

    Starting nodes come from the Golub-Welsch eigenvalue problem and are
    polished with Newton steps on the orthonormal recurrence, which also
    yields the weights ``1 / (n h_{n-1}(x)^2)``.
    """
    n = int(n)
    if n < 1:
        raise ValueError("need at least one node")
    if n == 1:
        return QuadratureRule(np.zeros(1), np.ones(1))
    off = np.sqrt(np.arange(1, n, dtype=float))
    jacobi = np.diag(off, 1) + np.diag(off, -1)
    x = np.linalg.eigvalsh(jacobi)
    for _ in range(NEWTON_MAXITER):
        h, h_prev = _hermite_normalized(x, n)
        dx = h / (math.sqrt(n) * h_prev)
        x = x - dx
        if np.max(np.abs(dx)) < NEWTON_TOL * max(1.0, np.max(np.abs(x))):
            break
    else:
        raise NonConvergence(f"Hermite roots did not converge for n={n}")
    _, h_prev = _hermite_normalized(x, n)
    w = 1.0 / (n * h_prev * h_prev)
    # symmetrize away rounding so odd moments vanish
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    return QuadratureRule(x, w / w.sum())


# Reference rules on [0, 1] used for the per-cell drift integral.
_CELL_GAUSS_POINTS = 6


def cell_rule(order):
    """Reference nodes in ``[0, 1]`` and weights for a cell quadrature.

    ``SP2`` is the midpoint rule, ``SP4`` Simpson, ``SPG`` six-point Gauss.
    """
    order = order.upper()
    if order == "SP2":
        return np.array([0.5]), np.array([1.0])
    if order == "SP4":
        return np.array([0.0, 0.5, 1.0]), np.array([1.0, 4.0, 1.0]) / 6.0
    if order in ("SPG", "SPE"):
        rule = gauss_legendre(_CELL_GAUSS_POINTS, 0.0, 1.0)
        return rule.nodes, rule.weights
    raise ValueError(f"unknown quadrature order {order!r}")


# --- error functions -------------------------------------------------------

ERFI_GUARD = 30.0
_ERFI_SERIES_MAX = 6.0
_LOG_DBL_MAX = math.log(np.finfo(float).max)


def erf(x):
    """Error function ``2/sqrt(pi) * int_0^x exp(-y^2) dy``."""
    return math.erf(x)


def _erfi_series(x):
    # Maclaurin terms are all positive, so no cancellation
    x2 = x * x
    term = x
    total = x
    k = 0
    while True:
        term *= x2 / (k + 1)
        contrib = term / (2 * k + 3)
        total += contrib
        k += 1
        if contrib <= 1e-17 * total:
            break
    return 2.0 / _SQRT_PI * total


def _erfi_asymptotic_scaled(x):
    # exp(-x^2) erfi(x) ~ 1/(sqrt(pi) x) * sum (2k-1)!! / (2x^2)^k,
    # truncated at the smallest term
    inv = 1.0 / (2.0 * x * x)
    term = 1.0
    total = 1.0
    k = 1
    while True:
        nxt = term * (2 * k - 1) * inv
        if nxt >= term or nxt < 1e-17 * total:
            break
        term = nxt
        total += term
        k += 1
    return total / (_SQRT_PI * x)


def erfi_scaled(x):
    """``exp(-x^2) * erfi(x)``, finite for every real ``x``."""
    x = float(x)
    if x == 0.0:
        return 0.0
    ax = abs(x)
    if ax <= _ERFI_SERIES_MAX:
        val = _erfi_series(ax) * math.exp(-ax * ax)
    else:
        val = _erfi_asymptotic_scaled(ax)
    return math.copysign(val, x)


def erfi(x):
    """Imaginary error function ``2/sqrt(pi) * int_0^x exp(y^2) dy``.

    Raises
    ------
    OverflowError
        If ``|x| > 30`` or the result is not representable as a double.
    """
    x = float(x)
    if abs(x) > ERFI_GUARD or x * x > _LOG_DBL_MAX:
        raise OverflowError(f"erfi({x}) overflows")
    if abs(x) <= _ERFI_SERIES_MAX:
        return math.copysign(_erfi_series(abs(x)), x) if x else 0.0
    return erfi_scaled(x) * math.exp(x * x)
