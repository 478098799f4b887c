"""Experiment presets, run orchestration, CSV output and oracle comparison."""
from __future__ import annotations

import csv
import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import oracles
from .collocation import FPSetup, MCSetup, random_node_rule, run_collocation, stable_dt
from .errors import ConfigError, MissingData
from .fokker_planck import Grid1D
from .model import MODEL_NAMES, make_model

PRESETS = ("ex1a", "ex2a", "ex1b", "ex2b", "ex3b")
NUMBER_FORMAT = "%.15g"
MODE_FLOOR = 1e-3  # local maxima below this fraction of the peak are ignored


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one run.

    ``dt`` or ``sigma2`` left as ``None`` means: derive it (``dt = gamma``
    and ``sigma2 = gamma`` for Monte Carlo, the explicit step budget for
    Fokker-Planck). ``gammas`` lists the scaling values of a multi-gamma
    run; each gets its own subdirectory.
    """

    preset: str | None = None
    model: str = "linear-consensus"
    solver: str = "mc"
    q0: float = 0.5
    lam: float = 0.5
    p: float = 1.0
    delta0: float = 1.0
    slope: float = 0.5
    d2: float | None = None
    d0: float | None = None
    sigma2: float | None = None
    theta_law: str = "uniform"
    gamma: float = 1.0
    gammas: list | None = None
    particles: int = 100000
    nodes: int = 10
    node_source: str = "gauss"
    grid_points: int = 201
    domain: list = field(default_factory=lambda: [-5.0, 5.0])
    dt: float | None = None
    t_final: float = 10.0
    record_dt: float = 0.1
    seed: int = 0
    quad_order: str = "SPG"
    initial: str | None = None
    snapshot_times: list = field(default_factory=list)
    hist_bins: int = 60
    hist_range: list | None = None

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def keys(cls):
        return [f.name for f in dataclasses.fields(cls)]

    def validate(self):
        if self.model not in MODEL_NAMES:
            raise ConfigError(f"unknown model {self.model!r}")
        if self.solver not in ("mc", "fp"):
            raise ConfigError("solver must be mc or fp")
        if self.nodes < 0:
            raise ConfigError("nodes (M) must be >= 0")
        if self.node_source not in ("gauss", "random"):
            raise ConfigError("node_source must be gauss or random")
        if self.solver == "mc" and (self.particles < 2 or self.particles % 2):
            raise ConfigError("particles must be an even number >= 2")
        if self.t_final <= 0:
            raise ConfigError("t_final must be positive")
        if len(self.domain) != 2 or not self.domain[0] < self.domain[1]:
            raise ConfigError("domain needs two increasing values")
        for t in self.snapshot_times:
            if not 0 <= t <= self.t_final:
                raise ConfigError("snapshot times must lie in [0, t_final]")


PRESET_VALUES = {
    "ex1a": dict(
        model="linear-consensus", solver="mc", q0=0.5, lam=0.5, particles=100000, nodes=10,
        dt=0.002, t_final=50.0, record_dt=0.1, initial="uniform", snapshot_times=[2.0, 4.0],
        hist_range=[-3.0, 3.0], domain=[-5.0, 5.0],
    ),
    "ex2a": dict(
        model="inelastic-kac", solver="mc", p=1.0, d2=0.1, gammas=[0.1, 0.01], particles=20000,
        nodes=10, t_final=50.0, record_dt=1.0, initial="uniform", domain=[-5.0, 5.0],
    ),
    "ex1b": dict(
        model="linear-consensus", solver="fp", q0=0.5, lam=0.4, d2=0.1, grid_points=201,
        domain=[-5.0, 5.0], t_final=20.0, record_dt=0.1, quad_order="SPE", nodes=10, initial="bimodal-h0",
    ),
    "ex2b": dict(
        model="linear-consensus", solver="fp", q0=0.5, lam=0.4, d0=math.sqrt(0.025), grid_points=41,
        domain=[-1.0, 1.0], t_final=15.0, record_dt=0.1, quad_order="SPG", nodes=10, initial="bimodal-h0",
    ),
    "ex3b": dict(
        model="bounded-confidence", solver="fp", delta0=1.0, slope=0.5, d0=0.1, grid_points=21,
        domain=[-1.0, 1.0], t_final=50.0, record_dt=0.5, quad_order="SPG", nodes=10, initial="bimodal-h0",
    ),
}


def preset_config(name, **overrides):
    if name not in PRESET_VALUES:
        raise ConfigError(f"unknown preset {name!r}; choose from {PRESETS}")
    values = dict(PRESET_VALUES[name])
    values.update({k: v for k, v in overrides.items() if v is not None})
    if "gamma" in overrides and overrides["gamma"] is not None:
        values["gammas"] = None
    return ExperimentConfig(preset=name, **values)


def load_config_file(path):
    """Flat YAML mapping of :class:`ExperimentConfig` keys."""
    try:
        data = yaml.safe_load(Path(path).read_text()) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a flat mapping")
    data = {str(k).replace("-", "_"): v for k, v in data.items()}
    if "lambda" in data:
        data["lam"] = data.pop("lambda")
    unknown = set(data) - set(ExperimentConfig.keys())
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return data


def build_config(file_values=None, overrides=None):
    """Preset (if named) <- config file <- command-line overrides."""
    merged = dict(file_values or {})
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    name = merged.pop("preset", None)
    if name:
        cfg = preset_config(name, **merged)
    else:
        try:
            cfg = ExperimentConfig(**merged)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
    cfg.validate()
    return cfg


# --- running ---------------------------------------------------------------


def _model(cfg, gamma):
    sigma2 = cfg.sigma2
    if cfg.solver == "mc" and sigma2 is None:
        sigma2 = gamma if (cfg.d2 is not None or cfg.d0 is not None) else 0.0
    return make_model(
        cfg.model, q0=cfg.q0, lam=cfg.lam, p=cfg.p, delta0=cfg.delta0, slope=cfg.slope, d2=cfg.d2,
        d0=cfg.d0, sigma2=sigma2 or 0.0, theta_law=cfg.theta_law, halfwidth=max(abs(cfg.domain[0]), abs(cfg.domain[1])),
    )


def _rule(cfg, model):
    n = cfg.nodes + 1
    if cfg.node_source == "random":
        return random_node_rule(model, n, cfg.seed)
    return model.theta.collocation_rule(n)


def run_experiment(cfg, workers=1):
    """Run ``cfg`` and return ``[(gamma, model, ensemble), ...]``."""
    cfg.validate()
    gammas = cfg.gammas if cfg.gammas else [cfg.gamma]
    out = []
    for gamma in gammas:
        model = _model(cfg, gamma)
        rule = _rule(cfg, model)
        if cfg.solver == "mc":
            dt = cfg.dt if cfg.dt is not None else gamma
            setup = MCSetup(
                dt, cfg.t_final, int(cfg.particles), int(cfg.seed), gamma, cfg.initial or "uniform",
                max(1, int(round(cfg.record_dt / dt))), tuple(cfg.snapshot_times), int(cfg.hist_bins),
                tuple(cfg.hist_range) if cfg.hist_range else None,
            )
        else:
            grid = Grid1D(int(cfg.grid_points), float(cfg.domain[0]), float(cfg.domain[1]))
            setup = FPSetup(grid, cfg.dt, cfg.t_final, cfg.quad_order, cfg.initial or "bimodal-h0", 1,
                            tuple(cfg.snapshot_times))
            if cfg.dt is None:
                dt = stable_dt(model, setup, [float(t) for t in rule.nodes] + [None])
            else:
                dt = cfg.dt
            n_steps = max(1, math.ceil(cfg.t_final / dt - 1e-9))
            h = cfg.t_final / n_steps
            setup = dataclasses.replace(setup, dt=dt, record_every=max(1, int(round(cfg.record_dt / h))))
        ens = run_collocation(model, cfg.solver, setup, rule=rule, workers=workers)
        out.append((gamma, model, ens))
    return out


# --- output ----------------------------------------------------------------


def _fmt(x):
    return NUMBER_FORMAT % x


def write_csv(path, header, columns):
    rows = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(x) for x in r])


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise MissingData(f"{path} is empty")
    header, body = rows[0], np.array(rows[1:], dtype=float)
    return {name: body[:, i] for i, name in enumerate(header)}


def write_outputs(out_dir, cfg, model, ens, gamma):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    saved = cfg.to_dict()
    saved["gamma"] = gamma
    saved["gammas"] = None
    (out / "config.yaml").write_text(yaml.safe_dump(saved, sort_keys=True))
    m = ens.n_nodes
    node_cols = [f"E_{k}" for k in range(m)]
    write_csv(
        out / "ensemble_moments.csv",
        ["t", *node_cols, "E_bar", "E_det"],
        [ens.t, *ens.energy, ens.averaged_energy(), ens.det_energy],
    )
    if ens.backend == "mc":
        write_csv(
            out / "moments.csv",
            ["t", "mass", "mean", "energy", "stderr_mean", "stderr_energy"],
            [ens.t, ens.det_mass, ens.det_mean, ens.det_energy,
             ens.det_stderr_mean, ens.det_stderr_energy],
        )
        if ens.histograms:
            cols = [[], [], []] + [[] for _ in range(m)] + [[]]
            for s, t in enumerate(ens.field_times):
                parts = [np.full(ens.hist_centres.size, t), ens.hist_centres, ens.det_histograms[s],
                         *ens.histograms[s], ens.mean_histogram(s)]
                for c, p in zip(cols, parts):
                    c.append(p)
            write_csv(out / "histogram.csv", ["t", "v", "g", *[f"f_{k}" for k in range(m)], "fbar"],
                      [np.concatenate(c) for c in cols])
    else:
        write_csv(out / "moments.csv", ["t", "mass", "mean", "energy"],
                  [ens.t, ens.det_mass, ens.det_mean, ens.det_energy])
        v = ens.grid.v
        write_csv(out / "fields.csv", ["v", "f"], [v, ens.det_fields[-1]])
        write_csv(
            out / "ensemble_fields.csv",
            ["v", *[f"f_{k}" for k in range(m)], "fbar", "var"],
            [v, *ens.fields[-1], ens.mean_field(-1), ens.variance_field(-1)],
        )
        write_csv(out / "residuals.csv", ["t", "residual", "mass", "energy"],
                  [ens.t, ens.det_residual, ens.det_mass, ens.det_energy])
    rows = oracle_rows(cfg, model, ens, gamma)
    (out / "report.txt").write_text(format_report(rows, ens))
    return rows


# --- comparison ------------------------------------------------------------


@dataclass
class CompareRow:
    quantity: str
    observed: float
    expected: float
    tolerance: float
    kind: str = "rel"  # "rel", "abs", ">" or "info"

    @property
    def passed(self):
        if self.kind == "info":
            return True
        if self.kind == ">":
            return self.observed > self.expected
        err = abs(self.observed - self.expected)
        if self.kind == "rel":
            err = err / abs(self.expected) if self.expected else err
        return err <= self.tolerance


def count_modes(values, floor=MODE_FLOOR):
    """Strict local maxima above ``floor * max``."""
    f = np.asarray(values, dtype=float)
    cut = floor * f.max()
    idx = []
    for i in range(f.size):
        left = f[i - 1] if i > 0 else -math.inf
        right = f[i + 1] if i < f.size - 1 else -math.inf
        if f[i] > left and f[i] > right and f[i] > cut:
            idx.append(i)
    return idx


def fit_rate(t, e, t0, t1):
    """Least-squares slope of ``log e`` against ``t`` on ``[t0, t1]``."""
    sel = (t >= t0 - 1e-9) & (t <= t1 + 1e-9)
    return float(np.polyfit(t[sel], np.log(e[sel]), 1)[0])


def oracle_rows(cfg, model, ens, gamma, tol=None):
    """Observed vs expected rows for whatever closed forms apply."""
    rows = []

    def tl(x):
        return x if tol is None else tol

    t = np.asarray(ens.t)
    e_det = np.asarray(ens.det_energy)
    e_bar = np.asarray(ens.averaged_energy())
    if model.kind == "linear-consensus" and model.diffusion.is_zero:
        params = oracles.ConsensusParams(model.params["q0"], model.params["lam"], model.theta.variance)
        if t[-1] >= 20 and e_det[0] > 0:
            expected = 2.0 * (params.q0**2 - params.q0 + params.lam**2 * params.var_theta)
            rows.append(CompareRow("rate(E_det, [2,20])", fit_rate(t, e_det, 2.0, 20.0), expected, tl(0.05)))
        rule = ens.rule
        e0 = ens.energy[:, 0]
        for tt in (5.0, 10.0, 20.0):
            if tt <= t[-1]:
                j = int(np.argmin(np.abs(t - tt)))
                exp_bar = float(sum(w * e * oracles.consensus_energy_f(params, t[j], th)
                                    for th, w, e in zip(rule.nodes, rule.weights, e0)))
                rows.append(CompareRow(f"E_bar({tt:g})", float(e_bar[j]), exp_bar, tl(0.05)))
        if 20.0 <= t[-1]:
            j = int(np.argmin(np.abs(t - 20.0)))
            rows.append(CompareRow("E_bar(20)/E_det(20)", float(e_bar[j] / e_det[j]), 5.0, 0.0, ">"))
    elif model.kind == "linear-consensus" and model.diffusion.kind == "constant":
        params = oracles.ConsensusParams(model.params["q0"], model.params["lam"], model.theta.variance)
        d2 = model.diffusion.d2
        st = oracles.const_diff_steady(params, d2, 0.0)
        rows.append(CompareRow("E_g_inf", float(e_det[-1]), st.E_g_inf, tl(0.02)))
        if model.theta.law == "uniform" and 0 < params.lam < params.q0:
            fb = oracles.const_diff_fbar_infty(params, d2)
            rows.append(CompareRow("E_fbar_inf", float(e_bar[-1]), fb.E_fbar_inf, tl(0.02)))
            rows.append(CompareRow("E_fbar_inf/E_g_inf", float(e_bar[-1] / e_det[-1]), fb.ratio, tl(0.02)))
        if ens.backend == "fp":
            v = ens.grid.v
            l1 = float(np.abs(ens.det_fields[-1] - st.g_inf(v)).sum() * ens.grid.dv)
            rows.append(CompareRow("L1(g, g_inf)", l1, 0.0, tl(1e-3), "abs"))
    elif model.kind == "linear-consensus" and model.diffusion.kind == "quadratic":
        d0sq = model.diffusion.d0**2
        qv = model.params["q0"] / d0sq
        if ens.backend == "fp":
            v = ens.grid.v
            ref = oracles.nonlinear_diff_steady_density(qv, v)
            ref = ref / (ref.sum() * ens.grid.dv)
            l1 = float(np.abs(ens.det_fields[-1] - ref).sum() * ens.grid.dv)
            rows.append(CompareRow("L1(g, shape)", l1, 0.0, tl(1e-2), "abs"))
        gap = abs(e_bar[-1] - e_det[-1]) / e_det[-1]
        rows.append(CompareRow("|E_fbar-E_g|/E_g", float(gap), 0.05, 0.0, ">"))
    elif model.kind == "inelastic-kac" and not model.diffusion.is_zero:
        d2 = model.diffusion.d2
        rows.append(CompareRow("E_g(final)", float(e_det[-1]), 0.5 * d2, tl(0.10)))
        rows.append(CompareRow("E_g(final) finite-gamma", float(e_det[-1]),
                               oracles.inelastic_kac_scaled_energy(gamma, d2, model.p), 0.0, "info"))
        sel = t >= 10.0 - 1e-9
        if sel.sum() > 1:
            rows.append(CompareRow("min diff E_bar on [10,end]", float(np.min(np.diff(e_bar[sel]))), 0.0, 0.0, ">"))
    elif model.kind == "kac":
        m_det = np.asarray(ens.det_mean)
        j = int(np.argmin(np.abs(t - 1.0)))
        rows.append(CompareRow("m_g(1)", float(m_det[j]), math.exp(-t[j]), tl(0.01)))
    elif model.kind == "bounded-confidence" and ens.backend == "fp":
        g = ens.det_fields[-1]
        fb = ens.mean_field(-1)
        v = ens.grid.v
        rows.append(CompareRow("modes(g)", len(count_modes(g)), 1, 0.0, "abs"))
        rows.append(CompareRow("modes(fbar) - 3", len(count_modes(fb)) - 3, 0.0, 0.0, "info"))
        out = np.abs(v) > 0.25
        ratio = float(fb[out].sum() / max(g[out].sum(), 1e-300))
        rows.append(CompareRow("mass(|v|>0.25) fbar/g", ratio, 2.0, 0.0, ">"))
    return rows


def format_report(rows, ens=None):
    lines = ["quantity,observed,expected,tolerance,kind,status"]
    for r in rows:
        status = "pass" if r.passed else "FAIL"
        lines.append(f"{r.quantity},{_fmt(r.observed)},{_fmt(r.expected)},{_fmt(r.tolerance)},{r.kind},{status}")
    if ens is not None and ens.floor_events is not None:
        lines.append(f"# flooring events per node: {' '.join(str(int(x)) for x in ens.floor_events)}")
    if ens is not None and ens.dt is not None:
        lines.append(f"# time step: {_fmt(ens.dt)}")
    return "\n".join(lines) + "\n"


class _Loaded:
    """Minimal ensemble view rebuilt from CSV output."""

    def __init__(self, run_dir, cfg):
        em = read_csv(run_dir / "ensemble_moments.csv")
        self.t = em["t"]
        keys = sorted((k for k in em if k.startswith("E_") and k[2:].isdigit()), key=lambda k: int(k[2:]))
        self.energy = np.array([em[k] for k in keys])
        self._e_bar = em["E_bar"]
        self.det_energy = em["E_det"]
        mo = read_csv(run_dir / "moments.csv")
        self.det_mean = mo["mean"]
        self.n = len(keys)
        self.floor_events = None
        self.dt = None
        self.backend = cfg.solver
        self.grid = None
        if cfg.solver == "fp":
            fl = read_csv(run_dir / "fields.csv")
            ef = read_csv(run_dir / "ensemble_fields.csv")
            v = fl["v"]
            self.grid = Grid1D(v.size, float(v[0]), float(v[-1]))
            self.det_fields = [fl["f"]]
            self._fbar = ef["fbar"]
        self.rule = None

    def averaged_energy(self):
        return self._e_bar

    def mean_field(self, i=-1):
        return self._fbar


def compare_run(run_dir, tol=None):
    """Re-check a finished run against its oracles.

    Returns the list of rows; raises :class:`MissingData` if outputs are
    absent. Multi-gamma runs are compared subdirectory by subdirectory.
    """
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        raise MissingData(f"{run_dir} does not exist")
    if not (run_dir / "config.yaml").exists():
        subs = sorted(p for p in run_dir.iterdir() if (p / "config.yaml").exists())
        if not subs:
            raise MissingData(f"no run outputs under {run_dir}")
        rows = []
        for sub in subs:
            for r in compare_run(sub, tol):
                r.quantity = f"{sub.name}:{r.quantity}"
                rows.append(r)
        return rows
    for name in ("ensemble_moments.csv", "moments.csv"):
        if not (run_dir / name).exists():
            raise MissingData(f"{run_dir / name} is missing")
    values = yaml.safe_load((run_dir / "config.yaml").read_text())
    gamma = values.get("gamma", 1.0)
    cfg = ExperimentConfig(**values)
    model = _model(cfg, gamma)
    ens = _Loaded(run_dir, cfg)
    ens.rule = _rule(cfg, model).sorted()
    return oracle_rows(cfg, model, ens, gamma, tol)


def output_dirs(out, cfg):
    if cfg.gammas and len(cfg.gammas) > 1:
        return [Path(out) / f"gamma_{g:g}" for g in cfg.gammas]
    return [Path(out)]
