"""Stochastic collocation over the uncertain parameter.

One fixed-theta solve per quadrature node (plus, optionally, one
theta-averaged reference solve); the family is then reduced to the
theta-mean ``fbar``, its variance, and the theta-averaged moments by
weighted sums in ascending node order.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import BackendMismatch, ConfigError, KinUQError
from .fokker_planck import AVERAGED, Grid1D, SPSolver, initial_field
from .montecarlo import MCConfig, histogram, run_mc
from .quadrature import QuadratureRule

SOLVERS = ("mc", "fp")


@dataclass(frozen=True)
class MCSetup:
    """Monte Carlo settings shared by every node."""

    dt: float
    t_final: float
    n_particles: int
    seed: int = 0
    gamma: float = 1.0
    initial: str = "uniform"
    record_every: int = 1
    snapshot_times: tuple = ()
    hist_bins: int = 50
    hist_range: tuple | None = None

    def mc_config(self, theta):
        return MCConfig(self.dt, self.t_final, self.gamma, theta, self.record_every, tuple(self.snapshot_times))


@dataclass(frozen=True)
class FPSetup:
    """Fokker-Planck settings shared by every node."""

    grid: Grid1D
    dt: float | None
    t_final: float
    quad_order: str = "SPG"
    initial: str = "bimodal-h0"
    record_every: int = 1
    snapshot_times: tuple = ()


@dataclass
class CollocationEnsemble:
    """Results of a collocation run.

    ``energy[k, j]`` is the energy of node ``k`` at record ``t[j]`` (same
    layout for ``mass``, ``mean``, ``stderr_energy``). ``det_*`` hold the
    theta-averaged reference run, if one was made. For the FP backend
    ``fields[s]`` is the ``(nodes, N)`` array at ``field_times[s]``; for
    MC ``histograms[s]`` holds per-node densities on ``hist_centres``.
    """

    rule: QuadratureRule
    backend: str
    t: np.ndarray
    mass: np.ndarray
    mean: np.ndarray
    energy: np.ndarray
    stderr_energy: np.ndarray | None = None
    det_mass: np.ndarray | None = None
    det_mean: np.ndarray | None = None
    det_energy: np.ndarray | None = None
    det_stderr_energy: np.ndarray | None = None
    det_stderr_mean: np.ndarray | None = None
    grid: Grid1D | None = None
    field_times: list = field(default_factory=list)
    fields: list = field(default_factory=list)
    det_fields: list = field(default_factory=list)
    hist_centres: np.ndarray | None = None
    histograms: list = field(default_factory=list)
    det_histograms: list = field(default_factory=list)
    floor_events: np.ndarray | None = None
    dt: float | None = None
    det_residual: np.ndarray | None = None

    @property
    def n_nodes(self):
        return len(self.rule)

    def _require_fields(self):
        if self.backend != "fp":
            raise BackendMismatch("grid fields exist only for the FP backend; use averaged_moments")

    def mean_field(self, time_index=-1):
        """``fbar_i = sum_k w_k f_i^k`` at ``field_times[time_index]``."""
        self._require_fields()
        return _weighted_sum(self.rule.weights, self.fields[time_index])

    def variance_field(self, time_index=-1):
        """``sum_k w_k (f_i^k)^2 - fbar_i^2``, clamped at zero."""
        self._require_fields()
        f = self.fields[time_index]
        fbar = _weighted_sum(self.rule.weights, f)
        var = _weighted_sum(self.rule.weights, f * f) - fbar * fbar
        return np.maximum(var, 0.0)

    def averaged_moments(self, time_index=-1):
        """``(mass, mean, energy)`` of ``fbar`` at ``t[time_index]`` as
        weighted sums of the per-node moments."""
        w = self.rule.weights
        return (
            float(_weighted_sum(w, self.mass[:, time_index])),
            float(_weighted_sum(w, self.mean[:, time_index])),
            float(_weighted_sum(w, self.energy[:, time_index])),
        )

    def averaged_energy(self):
        """``E_fbar`` at every record."""
        return _weighted_sum(self.rule.weights, self.energy)

    def averaged_energy_stderr(self):
        """Standard error of ``E_fbar`` from independent node runs."""
        if self.stderr_energy is None:
            return np.zeros(self.t.size)
        w = self.rule.weights
        return np.sqrt(_weighted_sum(w * w, self.stderr_energy**2))

    def mean_histogram(self, time_index=-1):
        """theta-mean of the per-node histograms (MC backend)."""
        if self.backend != "mc":
            raise BackendMismatch("histograms exist only for the MC backend")
        return _weighted_sum(self.rule.weights, self.histograms[time_index])


def stable_dt(model, setup, thetas):
    """Explicit step budget for all rows at the initial field; the
    same value is used whatever the worker split."""
    solver = SPSolver(setup.grid, model, thetas, setup.quad_order)
    f0 = initial_field(setup.grid, setup.initial)
    return solver.stable_dt(np.broadcast_to(f0.values, (len(thetas), setup.grid.n_points)))


def _weighted_sum(weights, rows):
    # fixed ascending-node accumulation so results do not depend on BLAS
    rows = np.asarray(rows, dtype=float)
    out = np.zeros(rows.shape[1:])
    for wk, row in zip(weights, rows):
        out = out + wk * row
    return out


def _mc_node(args):
    model, setup, theta, stream = args
    cfg = setup.mc_config(theta)
    res = run_mc(model, cfg, setup.n_particles, setup.seed, setup.initial, stream)
    s = res.series
    hists = []
    centres = None
    if res.snapshots:
        rng = setup.hist_range or (model.space.lower, model.space.upper)
        for t in setup.snapshot_times:
            centres, dens = histogram(res.snapshots[t], setup.hist_bins, rng)
            hists.append(dens)
    return s.t, s.mass, s.mean, s.energy, s.stderr_energy, centres, hists, s.stderr_mean


def _fp_rows(args):
    model, setup, thetas = args
    solver = SPSolver(setup.grid, model, thetas, setup.quad_order)
    f0 = initial_field(setup.grid, setup.initial)
    run = solver.evolve(f0.values, setup.dt, setup.t_final, setup.record_every, setup.snapshot_times)
    snaps = [run.snapshots[t] for t in setup.snapshot_times]
    return (
        np.array(run.t),
        run.history("mass"),
        run.history("mean"),
        run.history("energy"),
        snaps + [run.final],
        run.floor_events,
        run.history("residual"),
    )


def _tagged(fn, args, node):
    try:
        return fn(args)
    except KinUQError as exc:
        exc.node = node
        raise


def _map(fn, jobs, workers):
    if workers <= 1 or len(jobs) <= 1:
        return [_tagged(fn, a, node) for node, a in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [(node, pool.submit(fn, a)) for node, a in jobs]
        out = []
        for node, fut in futures:
            try:
                out.append(fut.result())
            except KinUQError as exc:
                exc.node = node
                raise
        return out


def run_collocation(model, solver, setup, rule=None, n_nodes=11, workers=1, deterministic=True):
    """Solve one fixed-theta problem per collocation node.

    Parameters
    ----------
    model : InteractionModel
    solver : {"mc", "fp"}
    setup : MCSetup or FPSetup
    rule : QuadratureRule, optional
        Collocation rule; defaults to the Gaussian rule matched to the
        theta law with ``n_nodes`` points. Nodes are sorted, so any
        permutation of the same rule gives identical output.
    workers : int
        Processes used for the node solves. Results do not depend on it.
    deterministic : bool
        Also solve the theta-averaged model as a reference.

    Returns
    -------
    CollocationEnsemble
    """
    solver = solver.lower()
    if solver not in SOLVERS:
        raise ConfigError(f"solver must be one of {SOLVERS}")
    if rule is None:
        rule = model.theta.collocation_rule(n_nodes)
    rule = rule.sorted()
    for th in rule.nodes:
        if model.theta.law == "uniform" and not model.theta.contains(th):
            raise ConfigError(f"collocation node {th} outside the support of theta")
    thetas = [float(t) for t in rule.nodes]
    workers = max(1, int(workers))

    if solver == "mc":
        if not isinstance(setup, MCSetup):
            raise ConfigError("the MC backend needs an MCSetup")
        jobs = [(k, (model, setup, th, (1, k))) for k, th in enumerate(thetas)]
        if deterministic:
            jobs.append((-1, (model, setup, AVERAGED, (0,))))
        results = _map(_mc_node, jobs, workers)
        det = results.pop() if deterministic else None
        ens = CollocationEnsemble(
            rule,
            "mc",
            results[0][0],
            np.array([r[1] for r in results]),
            np.array([r[2] for r in results]),
            np.array([r[3] for r in results]),
            np.array([r[4] for r in results]),
        )
        if det is not None:
            ens.det_mass, ens.det_mean, ens.det_energy, ens.det_stderr_energy = det[1:5]
            ens.det_stderr_mean = det[7]
        ens.field_times = list(setup.snapshot_times)
        if setup.snapshot_times:
            ens.hist_centres = results[0][5]
            ens.histograms = [np.array([r[6][s] for r in results]) for s in range(len(setup.snapshot_times))]
            if det is not None:
                ens.det_histograms = list(det[6])
        return ens

    if not isinstance(setup, FPSetup):
        raise ConfigError("the FP backend needs an FPSetup")
    rows = thetas + ([AVERAGED] if deterministic else [])
    if setup.dt is None:
        setup = replace(setup, dt=stable_dt(model, setup, rows))
    # rows never interact, so chunking across workers is bitwise neutral
    n_chunks = min(workers, len(rows))
    bounds = np.linspace(0, len(rows), n_chunks + 1).round().astype(int)
    jobs = [(int(a), (model, setup, rows[a:b])) for a, b in zip(bounds[:-1], bounds[1:])]
    parts = _map(_fp_rows, jobs, workers)
    t = parts[0][0]
    mass = np.vstack([p[1] for p in parts])
    mean = np.vstack([p[2] for p in parts])
    energy = np.vstack([p[3] for p in parts])
    fields = [np.vstack([p[4][s] for p in parts]) for s in range(len(parts[0][4]))]
    residual = np.vstack([p[6] for p in parts])
    floors = np.concatenate([p[5] for p in parts])
    k = len(thetas)
    ens = CollocationEnsemble(rule, "fp", t, mass[:k], mean[:k], energy[:k], grid=setup.grid)
    ens.dt = setup.dt
    ens.field_times = list(setup.snapshot_times) + [setup.t_final]
    ens.fields = [f[:k] for f in fields]
    ens.floor_events = floors[:k]
    if deterministic:
        ens.det_mass, ens.det_mean, ens.det_energy = mass[k], mean[k], energy[k]
        ens.det_fields = [f[k] for f in fields]
        ens.det_residual = residual[k]
    return ens


def collocation_energy_oracle(rule, per_node_energy, t):
    """``sum_k w_k E(t; theta_k)`` for a per-node closed form."""
    rule = rule.sorted()
    return float(sum(w * per_node_energy(t, th) for th, w in zip(rule.nodes, rule.weights)))


def random_node_rule(model, n, seed):
    """Equal-weight rule on seeded uniform draws over the theta support."""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=(2,))))
    lo, hi = model.theta.support
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ConfigError("random nodes need a bounded theta support")
    nodes = np.sort(rng.uniform(lo, hi, int(n)))
    return QuadratureRule(nodes, np.full(int(n), 1.0 / int(n)))
