"""Experiment configuration, orchestration and persisted run records.

All model quantities are nondimensional. A config is a flat JSON object;
keys not given take the defaults of :class:`ExperimentConfig`.

Each run writes into ``output_dir``:

* ``manifest.json`` config snapshot, summary scalars, artifact names.
  It carries no timestamps, so identical config and seed give an
  identical file.
* ``timing.json`` wall-clock start/end.
* experiment-specific CSV / JSON / binary artifacts.
"""

from __future__ import annotations

import dataclasses
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .bourgain import (BourgainSpec, SpaceTimeField, modulation_symbol, strichartz_ratio,
                       trilinear_ratio)
from .dynamics import EvolutionParams, evolve, mass_balance_residual, time_nodes
from .errors import InvalidArgument, NotFoundError, UsageError
from .hum import assemble_control_operator, solve_linear_control
from .nonlinear import SampledControl, picard_iterate, steer_to_state
from .profiles import CutoffProfile, DampingProfile
from .rng import random_ensemble, random_field, stream
from .stabilization import fit_decay_rate, observability_constant, run_damped
from .torus import TorusGrid, l2_norm

EXPERIMENTS = ("simulate", "stabilize", "control-linear", "control-nonlinear", "steer",
               "estimate-norms")
TWO_PI = 2 * math.pi
MAX_MODES = 1024


@dataclass
class ExperimentConfig:
    experiment: str = "simulate"
    n_modes: int = 32
    T: float = 1.0
    dt: float = 1e-3
    # "lambda" in files and on the command line
    lam: float = 1.0
    b: float = 0.5
    s: float = 0.0
    omega: list | str = field(default_factory=lambda: [[0.0, math.pi]])
    damping_level: float = 1.0
    damping_width: float = 0.3
    eta: float | None = None
    cutoff: str = "bump"
    tol: float = 1e-10
    max_iter: int = 50
    seed: int = 0
    ensemble_size: int = 8
    u0_norm: float = 1e-2
    stride: int = 10
    n_times: int = 256
    triples: int = 20
    convention: str = "solver"
    max_horizon: float = 200.0
    output_dir: str = "run"

    def validate(self) -> ExperimentConfig:
        def need(cond, key, msg):
            if not cond:
                raise UsageError(key, msg)

        need(self.experiment in EXPERIMENTS, "experiment", f"must be one of {', '.join(EXPERIMENTS)}")
        need(isinstance(self.n_modes, int) and 8 <= self.n_modes <= MAX_MODES and self.n_modes % 2 == 0,
             "n_modes", f"must be an even integer in [8, {MAX_MODES}]")
        for key in ("T", "dt", "tol", "max_horizon", "damping_width"):
            v = getattr(self, key)
            ok = isinstance(v, (int, float)) and math.isfinite(v) and (v >= 0 if key == "damping_width" else v > 0)
            need(ok, key, "must be a positive finite number")
        need(self.dt <= self.T, "dt", f"time step {self.dt} exceeds the horizon T={self.T}")
        need(math.isfinite(self.lam), "lambda", "must be finite")
        need(-1 <= self.b <= 2, "b", "must lie in [-1, 2]")
        need(0 <= self.s <= 4, "s", "must lie in [0, 4]")
        need(self.damping_level >= 0 and math.isfinite(self.damping_level), "damping_level", "must be >= 0")
        need(self.cutoff in ("bump", "constant"), "cutoff", "must be 'bump' or 'constant'")
        for key in ("max_iter", "ensemble_size", "stride", "triples"):
            v = getattr(self, key)
            need(isinstance(v, int) and v >= 1, key, "must be a positive integer")
        need(isinstance(self.seed, int) and self.seed >= 0, "seed", "must be a non-negative integer")
        need(isinstance(self.n_times, int) and self.n_times >= 16, "n_times", "must be an integer >= 16")
        need(self.u0_norm > 0, "u0_norm", "must be positive")
        need(self.convention in ("solver", "quartic"), "convention", "must be 'solver' or 'quartic'")
        try:
            self.damping()
        except InvalidArgument as exc:
            key = "eta" if "floor" in str(exc) else "omega"
            raise UsageError(key, str(exc)) from None
        return self

    def damping(self) -> DampingProfile:
        if self.omega == "full":
            arcs = ((0.0, TWO_PI),)
        elif isinstance(self.omega, (list, tuple)) and self.omega:
            try:
                arcs = tuple((float(lo), float(hi)) for lo, hi in self.omega)
            except (TypeError, ValueError):
                raise UsageError("omega", "expected a list of [start, stop] pairs or 'full'") from None
        else:
            raise UsageError("omega", "expected a list of [start, stop] pairs or 'full'")
        return DampingProfile(arcs, self.damping_level, self.damping_width, self.eta)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["lambda"] = d.pop("lam")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentConfig:
        d = dict(d)
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        known = {f.name for f in dataclasses.fields(cls)}
        for key in d:
            if key not in known:
                raise UsageError(key, "unknown configuration key")
        # JSON has no int/float distinction for whole numbers like 2
        for f in dataclasses.fields(cls):
            if f.name in d and f.type in ("float", "float | None") and isinstance(d[f.name], int):
                d[f.name] = float(d[f.name])
        return cls(**d).validate()

    @classmethod
    def load(cls, path) -> ExperimentConfig:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError("config", f"cannot read {path}: {exc}") from None
        if not isinstance(data, dict):
            raise UsageError("config", "top level must be a JSON object")
        return cls.from_dict(data)


@dataclass
class RunRecord:
    config: ExperimentConfig
    output_dir: Path
    artifacts: dict
    summary: dict
    started: float = 0.0
    finished: float = 0.0

    def manifest(self) -> dict:
        return {"config": self.config.to_dict(), "summary": self.summary,
                "artifacts": dict(sorted(self.artifacts.items()))}

    def path(self, name: str) -> Path:
        if name not in self.artifacts:
            raise NotFoundError(f"run has no '{name}' artifact (have: {', '.join(sorted(self.artifacts))})")
        return self.output_dir / self.artifacts[name]

    @classmethod
    def load(cls, output_dir) -> RunRecord:
        output_dir = Path(output_dir)
        try:
            m = io.read_json(output_dir / "manifest.json")
        except FileNotFoundError:
            raise NotFoundError(f"no manifest.json in {output_dir}") from None
        return cls(ExperimentConfig.from_dict(m["config"]), output_dir, m["artifacts"], m["summary"])


def _control_grid_rows(ctrl: SampledControl, stride: int):
    x = ctrl.grid.points
    for i in range(0, len(ctrl.times), stride):
        mag = np.abs(ctrl.values[i])
        for xj, gj in zip(x, mag):
            yield {"t": float(ctrl.times[i]), "x": float(xj), "abs_g": float(gj)}


def _write_control(out: Path, ctrl: SampledControl, stride: int, art: dict):
    art["control_grid"] = io.write_csv(out / "control_grid.csv", _control_grid_rows(ctrl, stride),
                                       ["t", "x", "abs_g"]).name
    art["control_values"] = io.dump_coeffs(out / "control_values.bin", ctrl.values).name
    art["control_times"] = io.dump_coeffs(out / "control_times.bin", ctrl.times).name


def _operator(cfg: ExperimentConfig, grid: TorusGrid):
    return assemble_control_operator(cfg.damping(), CutoffProfile(cfg.T, cfg.cutoff), grid, cfg.dt)


def _run_simulate(cfg, grid, out, art):
    u0 = random_field(grid, stream(cfg.seed, "initial"), mass=1.0)
    a = cfg.damping()
    traj = evolve(u0, EvolutionParams(T=cfg.T, dt=cfg.dt, lam=cfg.lam, damping=a, stride=cfg.stride))
    art["trajectory"] = io.write_trajectory_csv(out / "trajectory.csv", traj).name
    art["snapshots"] = io.dump_coeffs(out / "snapshots.bin", traj.coeffs).name
    m = traj.masses()
    return {"mass_initial": m[0], "mass_final": m[-1],
            "relative_mass_change": (m[-1] - m[0]) / m[0],
            "mass_balance_residual": mass_balance_residual(traj, a)}


def _run_stabilize(cfg, grid, out, art):
    a = cfg.damping()
    u0 = random_field(grid, stream(cfg.seed, "initial"), mass=1.0)
    traj = run_damped(u0, a, cfg.lam, cfg.T, cfg.dt, stride=cfg.stride)
    rep = fit_decay_rate(traj)
    art["trajectory"] = io.write_trajectory_csv(out / "trajectory.csv", traj).name
    art["decay"] = io.write_json(out / "decay.json", rep.to_dict()).name
    ens = random_ensemble(grid, cfg.seed, cfg.ensemble_size, "observability", mass=1.0)
    obs = observability_constant(ens, a, cfg.lam, cfg.T, cfg.dt)
    art["observability"] = io.write_csv(out / "observability.csv", obs.rows(),
                                        ["member_id", "mass0", "integral", "ratio"]).name
    return {"gamma": rep.gamma, "C": rep.C, "fit_residual": rep.fit_residual,
            "observability_constant": obs.constant, "observability_failures": len(obs.failures)}


def _run_control_linear(cfg, grid, out, art):
    R = _operator(cfg, grid)
    bin_path, meta_path = io.save_operator(R, out / "operator")
    art["operator_matrix"], art["operator_metadata"] = bin_path.name, meta_path.name
    u0 = random_field(grid, stream(cfg.seed, "initial"), mass=1.0)
    res = solve_linear_control(u0, R, tol=max(cfg.tol, 1e-6))
    times = time_nodes(cfg.T, cfg.dt)
    _write_control(out, SampledControl(grid, times, res.control.sample(times)), cfg.stride, art)
    return {"terminal_residual": res.terminal_residual, "condition_number": R.condition_number,
            "hermitian_defect": R.hermitian_defect, "min_eigenvalue": R.min_eigenvalue}


def _run_control_nonlinear(cfg, grid, out, art):
    R = _operator(cfg, grid)
    u = random_field(grid, stream(cfg.seed, "initial"))
    u0 = u * (cfg.u0_norm / l2_norm(u))
    res = picard_iterate(u0, R, cfg.lam, tol=cfg.tol, max_iter=cfg.max_iter)
    art["history"] = io.write_json(out / "history.json", {"update_norms": res.history}).name
    art["trajectory"] = io.write_trajectory_csv(out / "trajectory.csv", res.trajectory).name
    times = res.trajectory.times
    _write_control(out, SampledControl(grid, times, res.control.sample(times)), cfg.stride, art)
    return {"terminal_residual": res.terminal_residual, "iterations": res.iterations,
            "contraction_ratio": res.contraction_ratio, "u0_norm": cfg.u0_norm}


def _run_steer(cfg, grid, out, art):
    R = _operator(cfg, grid)
    u0 = random_field(grid, stream(cfg.seed, "initial"), mass=1.0)
    u1 = random_field(grid, stream(cfg.seed, "target"), mass=1.0)
    res = steer_to_state(u0, u1, R, cfg.lam, tol=cfg.tol, max_iter=cfg.max_iter,
                         max_horizon=cfg.max_horizon)
    art["trajectory"] = io.write_trajectory_csv(out / "trajectory.csv", res.trajectory).name
    art["phases"] = io.write_json(out / "phases.json", [
        {"phase": p, "start": s, "end": e} for p, s, e in res.phases]).name
    _write_control(out, res.control, cfg.stride, art)
    return {"terminal_residual": res.terminal_error, "horizon_start": res.stab_horizon_start,
            "horizon_target": res.stab_horizon_target, "total_time": float(res.trajectory.times[-1]),
            "control_sup_l2": res.control.sup_l2()}


def _run_estimate_norms(cfg, grid, out, art):
    kw = dict(convention=cfg.convention)
    fields = [SpaceTimeField.free_solution(u, cfg.T, cfg.n_times)
              for u in random_ensemble(grid, cfg.seed, cfg.ensemble_size, "strichartz")]
    st = strichartz_ratio(fields, **kw)
    art["ratios"] = io.write_csv(out / "ratios.csv", st.rows(),
                                 ["member_id", "l4", "xnorm", "ratio"]).name
    trip = [SpaceTimeField.free_solution(u, cfg.T, cfg.n_times)
            for u in random_ensemble(grid, cfg.seed, 3 * cfg.triples, "trilinear")]
    tri = [trilinear_ratio(trip[3 * i], trip[3 * i + 1], trip[3 * i + 2], cfg.b, cfg.s, **kw)
           for i in range(cfg.triples)]
    art["trilinear"] = io.write_csv(out / "trilinear.csv",
                                    ({"triple_id": i, "ratio": r} for i, r in enumerate(tri)),
                                    ["triple_id", "ratio"]).name
    dt = cfg.T / (cfg.n_times - 1)
    p = np.abs(modulation_symbol(grid.wavenumbers, cfg.convention))
    resolution = {"N": grid.n_modes, "n_times": cfg.n_times, "dt": dt,
                  "padding": BourgainSpec(cfg.b).padding,
                  "tau_spacing": TWO_PI / (BourgainSpec(cfg.b).padding * cfg.n_times * dt),
                  "tau_nyquist": math.pi / dt, "max_abs_p": float(p.max())}
    summary = {"strichartz": st.summary(), "trilinear": {"min": min(tri), "max": max(tri),
                                                         "median": float(np.median(tri))},
               "resolution": resolution}
    art["norms_summary"] = io.write_json(out / "norms_summary.json", summary).name
    return {"max_ratio": st.max, "median_ratio": st.median, "min_ratio": st.min,
            "trilinear_max_ratio": max(tri), "skipped": len(st.skipped)}


RUNNERS = {
    "simulate": _run_simulate, "stabilize": _run_stabilize,
    "control-linear": _run_control_linear, "control-nonlinear": _run_control_nonlinear,
    "steer": _run_steer, "estimate-norms": _run_estimate_norms,
}


def run_experiment(config: ExperimentConfig) -> RunRecord:
    """Run one experiment and write its artifacts and manifest."""
    config.validate()
    out = Path(config.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError("output_dir", str(exc)) from None
    grid = TorusGrid(config.n_modes)
    art = {}
    started = time.time()
    summary = RUNNERS[config.experiment](config, grid, out, art)
    finished = time.time()
    summary = {k: (float(v) if isinstance(v, (float, np.floating)) else v) for k, v in summary.items()}
    record = RunRecord(config, out, art, summary, started, finished)
    io.write_json(out / "manifest.json", record.manifest())
    io.write_json(out / "timing.json", {"started": started, "finished": finished,
                                        "elapsed_seconds": finished - started})
    return record


def emit_plot_data(record: RunRecord, kind: str, svg: bool = False) -> list[Path]:
    """Plot-ready tables for ``kind`` in {decay, control, ratios}; optional SVG."""
    out = record.output_dir
    if kind == "decay":
        rows = io.read_csv(record.path("trajectory"))
        t = np.array([float(r["time"]) for r in rows])
        m = np.array([float(r["mass"]) for r in rows])
        with np.errstate(divide="ignore"):
            logm = np.log(m)
        written = [io.write_csv(out / "plot_decay.csv",
                                ({"t": a, "log_mass": b} for a, b in zip(t, logm)), ["t", "log_mass"])]
        fit = io.read_json(record.path("decay")) if "decay" in record.artifacts else None
        if fit is not None:
            # log mass = 2 log(C ||u0||) - 2 gamma t
            fit = {"slope": -2 * fit["gamma"], "intercept": 2 * math.log(fit["C"]) + logm[0],
                   "gamma": fit["gamma"]}
            written.append(io.write_json(out / "plot_decay_fit.json", fit))
        if svg:
            written.append(_svg_decay(out / "plot_decay.svg", t, logm, fit))
    elif kind == "control":
        src = record.path("control_grid")
        written = [io.write_csv(out / "plot_control.csv", io.read_csv(src), ["t", "x", "abs_g"])]
        if svg:
            written.append(_svg_control(out / "plot_control.svg", io.read_csv(src)))
    elif kind == "ratios":
        r = np.array([float(row["ratio"]) for row in io.read_csv(record.path("ratios"))])
        counts, edges = np.histogram(r, bins=max(5, min(30, len(r) // 2)))
        written = [io.write_csv(out / "plot_ratios.csv",
                                ({"bin_lo": lo, "bin_hi": hi, "count": int(c)}
                                 for lo, hi, c in zip(edges[:-1], edges[1:], counts)),
                                ["bin_lo", "bin_hi", "count"])]
        if svg:
            written.append(_svg_hist(out / "plot_ratios.svg", r))
    else:
        raise InvalidArgument(f"unknown plot kind {kind!r}")
    return written


def _figure():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def _svg_decay(path, t, logm, fit):
    plt = _figure()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(t, logm, lw=1.2, label="log mass")
    if fit is not None:
        ax.plot(t, fit["intercept"] + fit["slope"] * t, "--", lw=1, label="fit")
    ax.set_xlabel("t")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return path


def _svg_control(path, rows):
    plt = _figure()
    t = np.array([float(r["t"]) for r in rows])
    x = np.array([float(r["x"]) for r in rows])
    g = np.array([float(r["abs_g"]) for r in rows])
    nx = len(np.unique(x))
    fig, ax = plt.subplots(figsize=(5, 3.5))
    im = ax.pcolormesh(np.unique(x), np.unique(t), g.reshape(-1, nx), shading="auto")
    fig.colorbar(im, ax=ax, label="|g|")
    ax.set_xlabel("x")
    ax.set_ylabel("t")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return path


def _svg_hist(path, r):
    plt = _figure()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.hist(r, bins=max(5, min(30, len(r) // 2)))
    ax.set_xlabel("ratio")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return path
