"""Structure-preserving finite-volume solver for the nonlocal
Fokker-Planck equations

    d_t f = d_v [ C[f] f + 1/2 D^2 d_v f ],
    C[f](v) = -int P(v, w) f(w) dw + 1/2 d_v D^2(v).

The interface flux is of Chang-Cooper type: the advective part uses a
convex blend ``(1 - delta) f_{i+1} + delta f_i`` whose weight ``delta``
is chosen so that the discrete flux vanishes on the local equilibrium
``f_{i+1}/f_i = exp(-lambda)``, ``lambda = int_{v_i}^{v_{i+1}} 2C/D^2``.
Boundaries carry zero flux, so mass is conserved to rounding.

Several parameter rows (collocation nodes, or the theta-averaged model)
can be advanced together; rows never interact.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NotConverged, SingularDiffusion, StabilityViolation
from .quadrature import cell_rule

QUAD_ORDERS = ("SP2", "SP4", "SPG", "SPE")
DELTA_TAYLOR_CUTOFF = 1e-4
TV_GROWTH_LIMIT = 10.0

# theta-averaged drift marker
AVERAGED = None


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid whose end points are the first and last cell centres."""

    n_points: int
    lower: float
    upper: float

    def __post_init__(self):
        if self.n_points < 3:
            raise ConfigError("grid needs at least 3 points")
        if not self.lower < self.upper:
            raise ConfigError("grid needs lower < upper")

    @property
    def dv(self):
        return (self.upper - self.lower) / (self.n_points - 1)

    @property
    def v(self):
        return self.lower + self.dv * np.arange(self.n_points)

    @property
    def interfaces(self):
        """Interior interface positions ``v_{i+1/2}``, ``i = 0..N-2``."""
        return self.v[:-1] + 0.5 * self.dv

    def integrate(self, values, weight=None):
        values = np.asarray(values, dtype=float)
        if weight is not None:
            values = values * weight
        return values.sum(axis=-1) * self.dv


@dataclass
class FieldOnGrid:
    """Cell averages ``f_i`` on a :class:`Grid1D`."""

    values: np.ndarray
    grid: Grid1D

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape[-1] != self.grid.n_points:
            raise ConfigError("field length does not match the grid")

    def mass(self):
        return self.grid.integrate(self.values)

    def mean(self):
        return self.grid.integrate(self.values, self.grid.v)

    def energy(self):
        return self.grid.integrate(self.values, self.grid.v**2)

    def total_variation(self):
        return np.abs(np.diff(self.values, axis=-1)).sum(axis=-1)


@dataclass
class FluxCoefficients:
    """Per-interface ``C~``, ``lambda``, ``delta`` and ``D^2`` (interior
    interfaces only; the two boundary fluxes are zero)."""

    ctilde: np.ndarray
    lam: np.ndarray
    delta: np.ndarray
    d2: np.ndarray
    dv: float


def compute_delta(lam):
    """Chang-Cooper weight ``1/lambda + 1/(1 - exp(lambda))``.

    Uses ``1/2 - lambda/12 + lambda^3/720`` for ``|lambda| < 1e-4`` and
    overflow-free forms elsewhere; ``+-inf`` map to the upwind limits 0
    and 1. The result always lies in ``[0, 1]``.
    """
    lam_arr = np.asarray(lam, dtype=float)
    out = np.empty_like(lam_arr)
    small = np.abs(lam_arr) < DELTA_TAYLOR_CUTOFF
    ls = lam_arr[small]
    out[small] = 0.5 - ls / 12.0 + ls**3 / 720.0
    big = ~small
    lb = np.abs(lam_arr[big])
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        # delta(|l|) = 1/|l| - exp(-|l|) / (1 - exp(-|l|)) ; delta(-l) = 1 - delta(l)
        pos = 1.0 / lb - 1.0 / np.expm1(lb)
    pos = np.where(np.isinf(lb), 0.0, pos)
    out[big] = np.where(lam_arr[big] > 0, pos, 1.0 - pos)
    out = np.clip(out, 0.0, 1.0)
    return float(out) if np.ndim(lam) == 0 else out


def _resolve_order(model, quad_order):
    order = quad_order.upper()
    if order not in QUAD_ORDERS:
        raise ConfigError(f"unknown quadrature order {quad_order!r}")
    if order == "SPE":
        exact = model.is_linear and model.diffusion.kind in ("constant", "zero")
        if not exact:
            warnings.warn(
                "no closed-form drift integral for this model; SPE falls back to SPG",
                stacklevel=3,
            )
            return "SPG", False
        return "SPE", True
    return order, False


class SPSolver:
    """Structure-preserving scheme for one or more parameter rows.

    Parameters
    ----------
    grid : Grid1D
    model : InteractionModel
    thetas : sequence of (float or None)
        One entry per row: a fixed theta, or ``None`` for the
        theta-averaged drift.
    quad_order : {"SP2", "SP4", "SPG", "SPE"}
        Quadrature for the drift integral in each cell; ``SPE`` integrates
        exactly where a closed form exists.
    steady_state : ndarray, optional
        Known positive steady state (one row per theta). When given, the
        interface weights are taken from it so that it is an exact
        discrete equilibrium (linear problems only).
    """

    def __init__(self, grid, model, thetas=(AVERAGED,), quad_order="SPG", steady_state=None):
        self.grid = grid
        self.model = model
        self.thetas = list(thetas)
        self.order, self.exact = _resolve_order(model, quad_order)
        dv = grid.dv
        v = grid.v
        diff = model.diffusion
        self.zero_diffusion = diff.is_zero
        self.d2_face = diff.squared(grid.interfaces)

        ref, wts = cell_rule(self.order)
        x = v[:-1, None] + dv * ref[None, :]
        if self.zero_diffusion:
            u = np.full_like(x, 2.0)
            log_term = np.zeros(grid.n_points - 1)
        else:
            d2x = diff.squared(x)
            if np.any(d2x <= 0.0):
                raise SingularDiffusion("a quadrature node hits a zero of the diffusion")
            u = 2.0 / d2x
            log_term = dv * (diff.squared_derivative(x) / d2x) @ wts
        self._log_term = log_term

        if model.is_linear:
            ab = [model.linear_drift(t) for t in self.thetas]
            self._a = np.array([float(a) for a, _ in ab])[:, None]
            self._b = np.array([float(b) for _, b in ab])[:, None]
            if self.exact and not self.zero_diffusion:
                d2 = diff.d2
                self._s1 = (v[1:] ** 2 - v[:-1] ** 2) / d2
                self._s0 = np.full(grid.n_points - 1, 2.0 * dv / d2)
            elif self.exact:
                self._s1 = v[1:] ** 2 - v[:-1] ** 2
                self._s0 = np.full(grid.n_points - 1, 2.0 * dv)
            else:
                self._s1 = dv * (x * u) @ wts
                self._s0 = dv * u @ wts
            self._kernel = None
        else:
            # lambda_i = -sum_j A[i, j] f_j + log_term_i
            dist = v[None, None, :] - x[:, :, None]
            rows = []
            for t in self.thetas:
                prob = model.interaction_probability(np.abs(dist), t)
                inner = prob * dist * dv
                rows.append(dv * np.einsum("iq,q,iqj->ij", u, wts, inner))
            self._kernel = np.array(rows)

        self._steady_lam = None
        if steady_state is not None:
            fs = np.atleast_2d(np.asarray(steady_state, dtype=float))
            if np.any(fs <= 0):
                raise ConfigError("steady state must be positive for the exact weights")
            self._steady_lam = np.log(fs[:, :-1] / fs[:, 1:])

    @property
    def n_rows(self):
        return len(self.thetas)

    def _as_rows(self, values):
        f = np.asarray(values, dtype=float)
        if f.ndim == 1:
            f = np.broadcast_to(f, (self.n_rows, f.size))
        if f.shape != (self.n_rows, self.grid.n_points):
            raise ConfigError(f"expected field rows of shape {(self.n_rows, self.grid.n_points)}")
        return f

    def lam(self, values):
        """``lambda_{i+1/2}`` per row, shape ``(rows, N-1)``."""
        if self._steady_lam is not None:
            return self._steady_lam.copy()
        f = self._as_rows(values)
        dv = self.grid.dv
        if self._kernel is None:
            mass = f.sum(axis=-1, keepdims=True) * dv
            mean = (f * self.grid.v).sum(axis=-1, keepdims=True) * dv
            return -self._a * mass * self._s1 - self._b * mean * self._s0 + self._log_term
        return -(self._kernel * f[:, None, :]).sum(axis=-1) + self._log_term

    def coefficients(self, values):
        lam = self.lam(values)
        dv = self.grid.dv
        if self.zero_diffusion:
            ctilde = lam / (2.0 * dv)
            delta = np.where(ctilde > 0, 0.0, np.where(ctilde < 0, 1.0, 0.5))
        else:
            ctilde = lam * 0.5 * self.d2_face / dv
            delta = compute_delta(lam)
        return FluxCoefficients(ctilde, lam, delta, self.d2_face, dv)

    def fluxes(self, values, coeffs=None):
        """Interior fluxes ``F_{i+1/2}``, shape ``(rows, N-1)``."""
        f = self._as_rows(values)
        c = self.coefficients(f) if coeffs is None else coeffs
        dv = self.grid.dv
        blend = (1.0 - c.delta) * f[:, 1:] + c.delta * f[:, :-1]
        return c.ctilde * blend + 0.5 * c.d2 * (f[:, 1:] - f[:, :-1]) / dv

    def rhs(self, values):
        """Semi-discrete right-hand side ``(F_{i+1/2} - F_{i-1/2}) / dv``."""
        flux = self.fluxes(values)
        pad = np.zeros((flux.shape[0], 1))
        full = np.concatenate([pad, flux, pad], axis=1)
        return (full[:, 1:] - full[:, :-1]) / self.grid.dv

    def stable_dt(self, values):
        """Explicit budget ``dv^2 / (2 max D^2 + dv max |C~|)``."""
        c = self.coefficients(values)
        dv = self.grid.dv
        denom = 2.0 * float(np.max(self.d2_face, initial=0.0)) + dv * float(np.max(np.abs(c.ctilde)))
        return math.inf if denom == 0 else dv * dv / denom

    def step(self, values, dt, tv_reference=None):
        """One classical RK4 step; negative values are floored and the
        row mass restored. Returns ``(new_values, floor_events)``."""
        f = np.array(self._as_rows(values))
        dv = self.grid.dv
        k1 = self.rhs(f)
        k2 = self.rhs(f + 0.5 * dt * k1)
        k3 = self.rhs(f + 0.5 * dt * k2)
        k4 = self.rhs(f + dt * k3)
        new = f + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        # judge divergence before flooring, which would mask it
        tv_ref = np.abs(np.diff(f, axis=-1)).sum(axis=-1) if tv_reference is None else tv_reference
        tv_new = np.abs(np.diff(new, axis=-1)).sum(axis=-1)
        if np.any(~np.isfinite(new)) or np.any(tv_new > TV_GROWTH_LIMIT * np.maximum(tv_ref, 1e-300)):
            raise StabilityViolation("total variation exploded; reduce dt")
        neg = new < 0.0
        events = neg.sum(axis=-1)
        if neg.any():
            mass = f.sum(axis=-1) * dv
            new = np.where(neg, 0.0, new)
            rows = events > 0
            new[rows] *= (mass[rows] / (new[rows].sum(axis=-1) * dv))[:, None]
        return new, events

    def evolve(self, values, dt, t_final, record_every=1, snapshot_times=()):
        """Integrate to ``t_final`` with fixed steps of (at most) ``dt``.

        Returns an :class:`FPRun` with per-row moment and residual
        histories and field snapshots.
        """
        f = np.array(self._as_rows(values))
        n_steps = max(1, int(math.ceil(t_final / dt - 1e-9)))
        h = t_final / n_steps
        snap_steps = {int(round(t / h)): t for t in snapshot_times}
        tv0 = np.abs(np.diff(f, axis=-1)).sum(axis=-1)
        run = FPRun(self.grid, list(self.thetas))
        run.record(0.0, f, self.rhs(f))
        if 0 in snap_steps:
            run.snapshots[snap_steps[0]] = f.copy()
        floors = np.zeros(self.n_rows, dtype=int)
        for k in range(1, n_steps + 1):
            f, events = self.step(f, h, tv_reference=tv0)
            floors += events
            if k % record_every == 0 or k == n_steps:
                run.record(k * h, f, self.rhs(f))
            if k in snap_steps:
                run.snapshots[snap_steps[k]] = f.copy()
        run.final = f
        run.floor_events = floors
        run.dt = h
        return run


@dataclass
class FPRun:
    """Histories of a (multi-row) Fokker-Planck integration."""

    grid: Grid1D
    thetas: list
    t: list = field(default_factory=list)
    mass: list = field(default_factory=list)
    mean: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    residual: list = field(default_factory=list)
    snapshots: dict = field(default_factory=dict)
    final: np.ndarray | None = None
    floor_events: np.ndarray | None = None
    dt: float = 0.0

    def record(self, t, f, rhs):
        g = self.grid
        self.t.append(t)
        self.mass.append(g.integrate(f))
        self.mean.append(g.integrate(f, g.v))
        self.energy.append(g.integrate(f, g.v**2))
        self.residual.append(np.max(np.abs(rhs), axis=-1))

    def history(self, name):
        """``(rows, records)`` array of a recorded quantity."""
        return np.array(getattr(self, name)).T


# --- single-field operations ------------------------------------------------


def _single(field_or_values, grid=None):
    if isinstance(field_or_values, FieldOnGrid):
        return field_or_values.values, field_or_values.grid
    return np.asarray(field_or_values, dtype=float), grid


def flux_coefficients(field, model, theta=AVERAGED, quad_order="SPG"):
    """All interface coefficients of ``field`` for one theta."""
    values, grid = _single(field)
    solver = SPSolver(grid, model, [theta], quad_order)
    c = solver.coefficients(values)
    return FluxCoefficients(c.ctilde[0], c.lam[0], c.delta[0], c.d2, c.dv)


def compute_ctilde(field, model, theta, interface_index, quad_order="SPG"):
    """``C~_{i+1/2} = D^2_{i+1/2}/(2 dv) int_{v_i}^{v_{i+1}} C[f]/(D^2/2) dv``."""
    values, grid = _single(field)
    solver = SPSolver(grid, model, [theta], quad_order)
    if not solver.zero_diffusion and solver.d2_face[interface_index] <= 0:
        raise SingularDiffusion("diffusion vanishes at the interface")
    return float(solver.coefficients(values).ctilde[0, interface_index])


def numerical_flux(field, coeffs, interface_index):
    """``F_{i+1/2} = C~[(1-delta) f_{i+1} + delta f_i] + D^2/2 (f_{i+1}-f_i)/dv``;
    boundary interfaces (``i = -1`` or ``i = N-1``) give zero."""
    values, _ = _single(field)
    i = int(interface_index)
    if i < 0 or i >= values.size - 1:
        return 0.0
    d = coeffs.delta[i]
    blend = (1.0 - d) * values[i + 1] + d * values[i]
    return float(coeffs.ctilde[i] * blend + 0.5 * coeffs.d2[i] * (values[i + 1] - values[i]) / coeffs.dv)


def step_rk4(field, model, theta, dt, quad_order="SPG"):
    """Advance one field by one RK4 step."""
    solver = SPSolver(field.grid, model, [theta], quad_order)
    new, _ = solver.step(field.values, dt)
    return FieldOnGrid(new[0], field.grid)


@dataclass
class SteadyResult:
    field: FieldOnGrid
    t: np.ndarray
    residual: np.ndarray
    mass: np.ndarray
    energy: np.ndarray
    converged: bool


def run_to_steady(field, model, theta, dt, quad_order="SPG", residual_tol=1e-10, t_max=100.0, check_every=10):
    """Step until ``max_i |F_{i+1/2} - F_{i-1/2}| / dv < residual_tol``.

    Raises
    ------
    NotConverged
        If ``t_max`` is reached first; the exception carries the final
        residual and the partial :class:`SteadyResult`.
    """
    solver = SPSolver(field.grid, model, [theta], quad_order)
    grid = field.grid
    f = np.array(field.values)[None, :]
    hist_t, hist_r, hist_m, hist_e = [], [], [], []
    t = 0.0
    tv0 = np.abs(np.diff(f, axis=-1)).sum(axis=-1)
    k = 0
    while True:
        res = float(np.max(np.abs(solver.rhs(f)))) if k % check_every == 0 else None
        if res is not None:
            hist_t.append(t)
            hist_r.append(res)
            hist_m.append(float(grid.integrate(f[0])))
            hist_e.append(float(grid.integrate(f[0], grid.v**2)))
            if res < residual_tol:
                converged = True
                break
            if t >= t_max:
                converged = False
                break
        f, _ = solver.step(f, dt, tv_reference=tv0)
        t += dt
        k += 1
    result = SteadyResult(
        FieldOnGrid(f[0], grid), np.array(hist_t), np.array(hist_r), np.array(hist_m), np.array(hist_e), converged
    )
    if not converged:
        raise NotConverged(hist_r[-1], result)
    return result


def h0(v):
    """Unnormalized bimodal initial profile with bumps at ``v = +-1/2``."""
    v = np.asarray(v, dtype=float)
    return np.exp(-20.0 * (v - 0.5) ** 2) + np.exp(-20.0 * (v + 0.5) ** 2)


def initial_field(grid, name="bimodal-h0"):
    """Named initial profile normalized to unit discrete mass."""
    if name == "bimodal-h0":
        vals = h0(grid.v)
    elif name == "uniform":
        vals = np.ones(grid.n_points)
    else:
        raise ConfigError(f"unknown FP initial condition {name!r}")
    return FieldOnGrid(vals / grid.integrate(vals), grid)
