"""Experiment orchestration: per-run workers, artifacts, summary assembly.

Each launched run produces `run_<k>.csv` (plus one CSV per comparator) in
the output directory. The parent process writes `aggregate.csv`, a canonical
`config.echo`, and `summary.json`. Workers are pure functions of the config
and the run id, so a pool of processes and an inline loop give identical
artifacts.

Error conventions in aggregate.csv: one-dimensional estimates report the
signed difference from the reference point, higher-dimensional ones the
Euclidean norm; scaled_error is T^{2 rho} times the error.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ..analysis import (
    DegenerateWindow,
    SingularAStar,
    empirical_covariance,
    fit_rate,
    make_linear_example,
    ybar_closed_form,
)
from ..averaging import (
    AveragingConfig,
    EstimateSeries,
    fb_combine,
    pr_average,
    read_estimates_csv,
    write_estimates_csv,
)
from ..core import (
    BoxConstraint,
    Direction,
    GainSchedule,
    NonFiniteState,
    integrate,
)
from ..errors import QsaError
from ..gfo import (
    GfoMethod,
    GfoProblem,
    builtin_objective,
    draw_protocol_probe,
    draw_theta0,
    make_gfo_field,
    spsa_baseline,
)
from ..probing import (
    ProbingSignal,
    Waveform,
    make_log_rational_frequencies,
)
from ..qmc import make_exp_sin_target, mc_baseline, qmc_estimate
from ..seeds import MC_DRAWS, PHASES, SPSA, THETA0, derive_token, run_rng, run_token
from .config import ExperimentConfig, serialize_config


@dataclass
class RunSummary:
    """Per-run record kept in summary.json; one per launched run."""

    run_id: int
    seed: int
    terminal: dict
    objective_evaluations: int | None
    wall_clock_s: float
    diverged: bool


def checkpoint_indices(times: np.ndarray) -> np.ndarray:
    """Up to 16 log-spaced stored-grid indices in [T/100, T], unique, sorted."""
    n = len(times)
    if n < 2:
        return np.array([n - 1], dtype=int)
    T = float(times[-1])
    lo = max(float(times[1]), T / 100.0)
    targets = np.geomspace(lo, T, 16)
    return np.unique(np.clip(np.searchsorted(times, targets), 1, n - 1))


def _reference_point(cfg: ExperimentConfig) -> np.ndarray:
    if cfg.kind == "linear_example":
        return np.zeros(2)
    if cfg.kind == "qmc":
        return np.zeros(1)
    return builtin_objective(cfg.model.objective, cfg.model.dim).theta_opt


def _error_value(terminal: np.ndarray, reference: np.ndarray) -> float:
    diff = np.asarray(terminal, dtype=float) - reference
    if diff.size == 1:
        return float(diff[0])
    return float(np.linalg.norm(diff))


def _qmc_probe(cfg: ExperimentConfig, run_id: int) -> ProbingSignal:
    p = cfg.probe
    if p.log_rational_pairs is not None:
        omega = np.array(make_log_rational_frequencies(p.log_rational_pairs).omega)
    else:
        omega = np.array(p.omega, dtype=float)
    k = len(omega)
    d = cfg.model.dim
    if p.v == "identity":
        v = np.eye(d)
    else:
        v = np.array(p.v, dtype=float)
    if p.phi_cycles == "uniform":
        phi = run_rng(cfg.master_seed, PHASES, run_id).uniform(0.0, 1.0, k)
    else:
        phi = np.array(p.phi_cycles, dtype=float)
    waveform = Waveform(p.waveform)
    return ProbingSignal(d=d, v=v, omega=omega, phi=phi, waveform=waveform)


def _run_linear(cfg: ExperimentConfig, run_id: int) -> dict:
    m = cfg.model
    model = make_linear_example(m.a_star_diag, m.omega_rad, m.forcing_scale)
    field, probe = model.field(), model.probe()
    g = GainSchedule(cfg.gain.a0, cfg.gain.rho, cfg.gain.capped)
    integ = cfg.integration
    theta0 = np.array(m.theta0, dtype=float)
    acfg = AveragingConfig(cfg.kappa)
    traj = integrate(field, probe, g, theta0, integ.T, integ.Ts,
                     store_stride=integ.store_stride)
    series = pr_average(traj, acfg)
    if "fb" in cfg.channels:
        back = integrate(field, probe, g, theta0, integ.T, integ.Ts,
                         direction=Direction.BACKWARD,
                         store_stride=integ.store_stride)
        series = fb_combine(series, pr_average(back, acfg))
    return {"series": series, "comp_series": {}, "comp_rows": [],
            "extra_terminal": {}, "eval_count": None}


def _run_qmc(cfg: ExperimentConfig, run_id: int) -> dict:
    m = cfg.model
    target = make_exp_sin_target(m.gamma)
    probe = _qmc_probe(cfg, run_id)
    g = GainSchedule(cfg.gain.a0, cfg.gain.rho, cfg.gain.capped)
    integ = cfg.integration
    acfg = AveragingConfig(cfg.kappa)
    if m.theta0 == "uniform":
        lo, hi = m.theta0_range
        theta0 = float(run_rng(cfg.master_seed, THETA0, run_id).uniform(lo, hi))
    else:
        theta0 = float(m.theta0[0])
    series = qmc_estimate(target, probe, g, theta0, integ.T, integ.Ts, acfg,
                          store_stride=integ.store_stride)
    comp_series = {}
    comp_rows = []
    extra_terminal = {}
    if "mc" in cfg.comparators:
        seed = derive_token(cfg.master_seed, MC_DRAWS, run_id)
        mc_series, sample_mean = mc_baseline(
            target, g, theta0, integ.T, integ.Ts, acfg, seed, dim=m.dim,
            store_stride=integ.store_stride)
        comp_series["mc"] = mc_series
        ref = 0.0 if target.true_mean is None else target.true_mean
        # row carries the stochastic PR estimator at equal budget
        term = mc_series.pr[-1]
        comp_rows.append(("mc", float(term[0]) - ref,
                          [float(x) for x in term]))
        extra_terminal["mc_mean"] = [float(sample_mean)]
    return {"series": series, "comp_series": comp_series,
            "comp_rows": comp_rows, "extra_terminal": extra_terminal,
            "eval_count": None}


def _gfo_problem(cfg: ExperimentConfig, method: str) -> GfoProblem:
    m = cfg.model
    obj = builtin_objective(m.objective, m.dim)
    box = None
    if m.box_lower is not None:
        box = BoxConstraint(np.array(m.box_lower), np.array(m.box_upper))
    return GfoProblem(objective=obj, epsilon=m.epsilon,
                      method=GfoMethod(method), box=box)


def _run_gfo(cfg: ExperimentConfig, run_id: int) -> dict:
    m, p = cfg.model, cfg.probe
    prob = _gfo_problem(cfg, m.method)
    probe = draw_protocol_probe(
        m.dim, cfg.master_seed, run_id,
        freq_range=p.freq_range_rad, amplitude=p.amplitude,
        phase_range=p.phase_range_rad)
    g = GainSchedule(cfg.gain.a0, cfg.gain.rho, cfg.gain.capped)
    integ = cfg.integration
    acfg = AveragingConfig(cfg.kappa)
    if m.theta0 == "uniform_box":
        theta0 = draw_theta0(prob.box, cfg.master_seed, run_id)
    else:
        theta0 = np.array(m.theta0, dtype=float)
    traj = integrate(make_gfo_field(prob), probe, g, theta0, integ.T, integ.Ts,
                     box=prob.box, store_stride=integ.store_stride)
    series = pr_average(traj, acfg)
    if "fb" in cfg.channels:
        back = integrate(make_gfo_field(prob), probe, g, theta0, integ.T,
                         integ.Ts, box=prob.box, direction=Direction.BACKWARD,
                         store_stride=integ.store_stride)
        series = fb_combine(series, pr_average(back, acfg))
    reference = prob.objective.theta_opt
    comp_series = {}
    comp_rows = []
    for name in cfg.comparators:
        method = "1qsgd" if name == "spsa1" else "2qsgd"
        twin = _gfo_problem(cfg, method)
        seed = derive_token(cfg.master_seed, SPSA, run_id)
        twin_traj = spsa_baseline(twin, g, theta0, integ.T, integ.Ts, seed,
                                  store_stride=integ.store_stride)
        twin_series = pr_average(twin_traj, acfg)
        comp_series[name] = twin_series
        term = twin_series.pr[-1]
        comp_rows.append((name, _error_value(term, reference),
                          [float(x) for x in term]))
    return {"series": series, "comp_series": comp_series,
            "comp_rows": comp_rows, "extra_terminal": {},
            "eval_count": prob.objective.eval_count}


def _nan_series(cfg: ExperimentConfig) -> EstimateSeries:
    d = 2 if cfg.kind == "linear_example" else (
        1 if cfg.kind == "qmc" else cfg.model.dim)
    integ = cfg.integration
    n = int(round(integ.T / integ.Ts)) // integ.store_stride
    times = np.arange(n + 1) * (integ.Ts * integ.store_stride)
    full = np.full((n + 1, d), np.nan)
    fb = np.full((n + 1, d), np.nan) if "fb" in cfg.channels else None
    return EstimateSeries(times=times, raw=full, pr=full.copy(), fb=fb)


_RUNNERS = {"linear_example": _run_linear, "qmc": _run_qmc, "gfo": _run_gfo}


def _worker(task) -> dict:
    """Executes one run; returns summary fields and its aggregate rows."""
    cfg, run_id, out_dir = task
    t_start = time.perf_counter()
    diverged = False
    try:
        result = _RUNNERS[cfg.kind](cfg, run_id)
    except NonFiniteState:
        diverged = True
        result = {"series": _nan_series(cfg), "comp_series": {},
                  "comp_rows": [], "extra_terminal": {}, "eval_count": None}
    wall = time.perf_counter() - t_start
    series = result["series"]

    out = Path(out_dir)
    if not diverged:
        write_estimates_csv(series, out / f"run_{run_id}.csv")
        for name, comp in result["comp_series"].items():
            write_estimates_csv(comp, out / f"run_{run_id}_{name}.csv")

    reference = _reference_point(cfg)
    rho, T = cfg.gain.rho, cfg.integration.T
    scale = T ** (2.0 * rho)
    rows = []
    terminal = dict(result["extra_terminal"])
    for channel in cfg.channels:
        values = getattr(series, channel)
        if values is None:
            continue
        term = values[-1]
        terminal[channel] = [float(x) for x in term]
        err = _error_value(term, reference)
        rows.append((run_id, channel, rho, T, err, scale * err))
    for name, err, term in result["comp_rows"]:
        terminal[name] = term
        rows.append((run_id, name, rho, T, err, scale * err))
    eval_count = result["eval_count"]

    return {
        "run_id": run_id,
        "seed": run_token(cfg.master_seed, run_id),
        "terminal": terminal,
        "objective_evaluations": eval_count,
        "wall_clock_s": wall,
        "diverged": diverged,
        "rows": rows,
    }


def _write_aggregate(path: Path, rows) -> None:
    lines = ["run_id,estimator,rho,T,error,scaled_error"]
    for run_id, estimator, rho, T, err, scaled in rows:
        lines.append(
            f"{run_id},{estimator},{rho!r},{float(T)!r},{err!r},{scaled!r}"
        )
    path.write_text("\n".join(lines) + "\n")


def run_experiment(
    cfg: ExperimentConfig,
    stem: str,
    out_root: str | Path | None = None,
    threads: int | None = None,
) -> tuple[Path, list[RunSummary]]:
    """Runs every configured run, writes all artifacts, returns summaries."""
    root = Path(out_root if out_root is not None else (cfg.out or "results"))
    out_dir = root / stem
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.echo").write_text(serialize_config(cfg))

    tasks = [(cfg, run_id, str(out_dir)) for run_id in range(cfg.runs)]
    if threads is not None and threads == 1:
        results = [_worker(task) for task in tasks]
    else:
        workers = threads
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_worker, tasks))
    results.sort(key=lambda r: r["run_id"])

    rows = [row for res in results for row in res["rows"]]
    _write_aggregate(out_dir / "aggregate.csv", rows)

    summaries = [
        RunSummary(
            run_id=res["run_id"],
            seed=res["seed"],
            terminal=res["terminal"],
            objective_evaluations=res["objective_evaluations"],
            wall_clock_s=res["wall_clock_s"],
            diverged=res["diverged"],
        )
        for res in results
    ]
    analyze_dir(out_dir, runs_meta=summaries)
    return out_dir, summaries


class MissingArtifact(QsaError):
    """An expected file under the experiment directory is absent."""


def _fit_channels(cfg: ExperimentConfig, series: EstimateSeries) -> dict:
    reference = _reference_point(cfg)
    T = cfg.integration.T
    lo = max(float(series.times[1]) if len(series.times) > 1 else T / 100.0,
             T / 100.0)
    channels = {}
    for channel in cfg.channels:
        values = getattr(series, channel)
        if values is None:
            continue
        try:
            fit = fit_rate(series, channel, reference, (lo, T))
        except (DegenerateWindow, ValueError):
            continue
        channels[channel] = {
            "slope": fit.slope,
            "r2": fit.r_squared,
            "window": [fit.window[0], fit.window[1]],
        }
    return channels


def _covariance_trace(cfg: ExperimentConfig, series_list) -> list:
    if not series_list:
        return []
    idx = checkpoint_indices(series_list[0].times)
    times = series_list[0].times
    rho = cfg.gain.rho
    trace = []
    for j in idx:
        T_j = float(times[j])
        terminals = np.stack([s.pr[j] for s in series_list])
        cov = empirical_covariance(terminals, T=T_j)
        trace.append([T_j, cov.scaled_trace(rho)])
    return trace


def analyze_dir(
    directory: str | Path, runs_meta: list[RunSummary] | None = None
) -> dict:
    """Recomputes fits and covariance from stored CSVs; rewrites summary.json.

    Run metadata (seeds, wall-clock, divergence flags) is carried from the
    caller after a fresh run, or from the existing summary.json on re-analysis,
    so analyze after run is byte-idempotent.
    """
    from .config import load_config

    out_dir = Path(directory)
    echo = out_dir / "config.echo"
    if not echo.exists():
        raise MissingArtifact(f"{echo} not found")
    cfg = load_config(echo)

    if runs_meta is None:
        summary_path = out_dir / "summary.json"
        if not summary_path.exists():
            raise MissingArtifact(f"{summary_path} not found")
        stored = json.loads(summary_path.read_text())
        runs_meta = [RunSummary(**entry) for entry in stored["runs"]]

    series_list = []
    for meta in runs_meta:
        path = out_dir / f"run_{meta.run_id}.csv"
        if meta.diverged and not path.exists():
            continue
        if not path.exists():
            raise MissingArtifact(f"{path} not found")
        series_list.append(read_estimates_csv(path))

    channels = _fit_channels(cfg, series_list[0]) if series_list else {}

    ybar: dict = {}
    if cfg.kind == "linear_example":
        m = cfg.model
        try:
            closed = ybar_closed_form(
                make_linear_example(m.a_star_diag, m.omega_rad, m.forcing_scale)
            )
            ybar["closed_form"] = [float(x) for x in closed]
        except SingularAStar:
            pass

    summary = {
        "config": asdict(cfg),
        "channels": channels,
        "ybar": ybar,
        "covariance_trace": _covariance_trace(cfg, series_list),
        "runs": [asdict(meta) for meta in sorted(runs_meta,
                                                 key=lambda r: r.run_id)],
    }
    (out_dir / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n"
    )
    return summary
