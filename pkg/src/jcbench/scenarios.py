"""Sweep pipelines and output emission.

run_fig1 sweeps the initial condition rho(0) = alpha |G0><G0| +
(1-alpha) |G1><G1| over an alpha grid, evolves it under each configured
solver, and correlates the tracked matrix-element series of each
non-Hermitian method against the master equation.  run_fig2 sweeps the pump
rate and compares steady states through the fidelity.

Sweeps are executed as stacked batches: the integrator's error norm is the
maximum over all entries, so each sweep member individually satisfies the
local-error tolerance, while the whole grid advances in one vectorized
integration.  If a batch fails, the sweep falls back to per-point
integration so a single pathological point only poisons its own rows.
CSV rows always appear in grid order.

The environment variable JCBENCH_WORKERS caps the worker threads used to run
independent sweep legs concurrently (default: available parallelism).
"""

from __future__ import annotations

import csv
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__, core, metrics, nheh, nhqm, steady
from .config import ScenarioConfig, TrackedElement, serialize_config
from .core import SystemParams, build_operators
from .errors import ConfigError, ConstantSeriesError, NumericsError
from .integrate import IntegrationSpec, Trajectory, integrate
from .lindblad import lindblad_rhs_fn

UNDEFINED = "undefined (constant series)"
OK = "ok"

FIG1_COLUMNS = ("alpha", "element", "part", "solver_pair", "correlation", "status")
FIG2_COLUMNS = ("pump_over_g", "method", "fidelity", "residual", "status")
#: The five panel series emitted for the time-series file, in output order.
PANEL_SERIES = (
    ("X0G1", "imag"),
    ("G1G0", "imag"),
    ("G0G0", "real"),
    ("G1G1", "real"),
    ("X0X0", "real"),
)


def worker_count() -> int:
    env = os.environ.get("JCBENCH_WORKERS", "")
    if env.strip():
        try:
            n = int(env)
        except ValueError as exc:
            raise ConfigError(f"JCBENCH_WORKERS must be an integer, got {env!r}") from exc
        if n < 1:
            raise ConfigError("JCBENCH_WORKERS must be >= 1")
        return n
    return os.cpu_count() or 1


@dataclass
class RunResult:
    kind: str
    tables: dict  # filename -> (columns, rows); rows are tuples
    manifest: dict


def initial_mixture(alpha: float, dim: int) -> np.ndarray:
    """rho(0) = alpha |G0><G0| + (1-alpha) |G1><G1|."""
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError(f"alpha must lie in [0, 1], got {alpha}")
    if dim < 4:
        raise ConfigError("the mixture initial state needs n_max_photons >= 1")
    rho = np.zeros((dim, dim), dtype=complex)
    rho[0, 0] = alpha
    rho[2, 2] = 1.0 - alpha
    return rho


def initial_state_from_text(text: str, dim: int) -> np.ndarray:
    """Parse "alpha:<value>" or "bare:<label>" into a density matrix."""
    kind, _, arg = text.partition(":")
    kind = kind.strip()
    if kind == "alpha":
        return initial_mixture(float(arg), dim)
    if kind == "bare":
        return core.projector(arg.strip(), dim)
    raise ConfigError(f"unknown initial-state spec {text!r} (alpha:<v> | bare:<label>)")


def _integration_spec(cfg: ScenarioConfig) -> IntegrationSpec:
    return IntegrationSpec.uniform(
        cfg.t_end, cfg.samples, t_start=cfg.t_start, method=cfg.method, dt_or_tol=cfg.dt_or_tol
    )


def _solver_rhs(name: str, params: SystemParams, ops):
    """Returns (rhs, post_step) for one solver.

    The nonlinear solver is integrated with per-step trace projection: its
    unit-trace manifold is exponentially repelling wherever loss is active
    (d tr/dt = 2 tr(rho D)(tr rho - 1)), so over long horizons rounding-level
    trace errors amplify beyond any fixed tolerance unless the state is
    projected back onto the manifold after each step.  On the manifold the
    projected and plain flows coincide.
    """
    if name == "lindblad":
        return lindblad_rhs_fn(params, ops), None
    if name == "nheh":
        return nheh.nheh_rhs_fn(params, ops), None
    if name == "nhqm":
        split = nhqm.build_split(params, ops, include_pump=params.pump_p > 0)
        return nhqm.nhqm_rhs_fn(split), nhqm.trace_projection
    raise ConfigError(f"unknown solver {name!r}")


def _solver_checks(name: str):
    """Per-solver trajectory tolerances (trace, hermiticity, psd?, eps_cut?)."""
    if name == "lindblad":
        return dict(trace_tol=core.TRACE_TOL, herm_tol=1e-9, check_psd=True, eps_cut=core.EPS_CUT)
    if name == "nheh":
        return dict(trace_tol=nheh.TRACE_TOL, herm_tol=1e-9, check_psd=False, eps_cut=core.EPS_CUT)
    return dict(trace_tol=nhqm.TRAJ_TRACE_TOL, herm_tol=1e-9, check_psd=False, eps_cut=None)


def _validate_members(times, states, params, checks):
    """Per-member invariant validation of a batched trajectory stack.

    states has shape (T, B, d, d); returns a list of B status strings.
    """
    n_t, n_b = states.shape[:2]
    status = [OK] * n_b
    tr_dev = np.abs(np.einsum("tbii->tb", states) - 1.0).max(axis=0)
    herm = np.abs(states - core.dagger(states)).reshape(n_t, n_b, -1).max(axis=(0, 2))
    for b in range(n_b):
        if tr_dev[b] > checks["trace_tol"]:
            status[b] = f"failed: trace drift {tr_dev[b]:.2e}"
        elif herm[b] > checks["herm_tol"]:
            status[b] = f"failed: hermiticity drift {herm[b]:.2e}"
    if checks["check_psd"]:
        min_eig = np.linalg.eigvalsh(0.5 * (states + core.dagger(states))).min(axis=(0, 2))
        for b in range(n_b):
            if status[b] == OK and min_eig[b] < -core.PSD_TOL:
                status[b] = f"failed: negative eigenvalue {min_eig[b]:.2e}"
    if checks["eps_cut"] is not None:
        pop = core.truncation_indicator(states, params).max(axis=0)
        for b in range(n_b):
            if status[b] == OK and pop[b] >= checks["eps_cut"]:
                status[b] = f"failed: truncation indicator {pop[b]:.2e}"
    return status


def _sweep_solver(name, params, ops, rho0_stack, spec):
    """Evolve a stack of initial states; returns (states (T,B,d,d), statuses)."""
    rhs, post = _solver_rhs(name, params, ops)
    checks = _solver_checks(name)
    n_b = rho0_stack.shape[0]
    try:
        states = integrate(rhs, rho0_stack, spec, post_step=post)
        return states, _validate_members(spec.times, states, params, checks)
    except NumericsError:
        # Isolate the failing members: integrate each sweep point on its own.
        n_t = len(spec.sample_times)
        states = np.zeros((n_t, n_b) + rho0_stack.shape[1:], dtype=complex)
        status = [OK] * n_b
        for b in range(n_b):
            try:
                one = integrate(rhs, rho0_stack[b], spec, post_step=post)
                states[:, b] = one
                status[b] = _validate_members(spec.times, one[:, None], params, checks)[0]
            except NumericsError as exc:
                status[b] = f"failed: {exc}"
        return states, status


def run_fig1(cfg: ScenarioConfig) -> RunResult:
    """Correlation sweep over the initial-condition parameter alpha."""
    if cfg.kind != "fig1":
        raise ConfigError(f"run_fig1 got a {cfg.kind!r} config")
    t0 = time.monotonic()
    params = cfg.params
    ops = build_operators(params)
    spec = _integration_spec(cfg)
    alphas = np.asarray(cfg.grid)
    rho0 = np.stack([initial_mixture(a, params.dim) for a in alphas])

    others = [s for s in cfg.solvers if s != "lindblad"]
    run_order = ["lindblad"] + others
    results: dict[str, tuple[np.ndarray, list[str]]] = {}
    with ThreadPoolExecutor(max_workers=min(len(run_order), worker_count())) as pool:
        futures = {
            name: pool.submit(_sweep_solver, name, params, ops, rho0, spec)
            for name in run_order
        }
        for name, fut in futures.items():
            results[name] = fut.result()

    lind_states, lind_status = results["lindblad"]
    rows = []
    for bi, alpha in enumerate(alphas):
        for el in cfg.tracked:
            i, j = el.indices
            if max(i, j) >= params.dim:
                raise ConfigError(f"tracked element {el.label} outside dimension {params.dim}")
            for name in others:
                states, status = results[name]
                pair = f"{name}-lindblad"
                if lind_status[bi] != OK:
                    rows.append((alpha, el.label, el.part, pair, None, lind_status[bi]))
                    continue
                if status[bi] != OK:
                    rows.append((alpha, el.label, el.part, pair, None, status[bi]))
                    continue
                x = metrics.extract_part(states[:, bi, i, j], el.part)
                y = metrics.extract_part(lind_states[:, bi, i, j], el.part)
                try:
                    corr = metrics.pearson(x, y)
                    rows.append((alpha, el.label, el.part, pair, corr, OK))
                except ConstantSeriesError:
                    rows.append((alpha, el.label, el.part, pair, None, UNDEFINED))

    tables = {"fig1_correlations.csv": (FIG1_COLUMNS, rows)}
    if cfg.timeseries_alpha is not None:
        ts_alpha = float(cfg.timeseries_alpha)
        where = np.flatnonzero(np.isclose(alphas, ts_alpha, rtol=0, atol=1e-12))
        if where.size:
            bi = int(where[0])
            per_solver = {name: results[name][0][:, bi] for name in run_order}
        else:
            one = np.stack([initial_mixture(ts_alpha, params.dim)])
            per_solver = {
                name: _sweep_solver(name, params, ops, one, spec)[0][:, 0] for name in run_order
            }
        ts_columns = ["t", "solver"] + [f"{p[:2]}_{lbl}" for lbl, p in PANEL_SERIES]
        ts_rows = []
        for name in run_order:
            states = per_solver[name]
            series = []
            for lbl, part in PANEL_SERIES:
                i, j = TrackedElement(lbl[:2], lbl[2:], part).indices
                series.append(metrics.extract_part(states[:, i, j], part))
            for k, t in enumerate(spec.times):
                ts_rows.append((t, name) + tuple(s[k] for s in series))
        tables[f"fig1_timeseries_alpha{ts_alpha:g}.csv"] = (tuple(ts_columns), ts_rows)

    manifest = _manifest(cfg, t0, {"n_alpha": len(alphas), "solvers": list(run_order)})
    return RunResult(kind="fig1", tables=tables, manifest=manifest)


def run_fig2(cfg: ScenarioConfig) -> RunResult:
    """Steady-state fidelity sweep over the pump rate."""
    if cfg.kind != "fig2":
        raise ConfigError(f"run_fig2 got a {cfg.kind!r} config")
    t0 = time.monotonic()
    rows = []
    cutoffs = {}
    n_start = None
    for pump in cfg.grid:
        params_p = replace(cfg.params, pump_p=float(pump))
        try:
            rho_l, params_used = steady.converged_lindblad_steady_state(params_p, n_start=n_start)
            n_start = max(4, params_used.n_max_photons)
            cutoffs[float(pump)] = params_used.n_max_photons
        except NumericsError as exc:
            for method in ("nheh", "nhqm"):
                if method in cfg.solvers:
                    rows.append((pump, method, None, None, f"failed: {exc}"))
            continue

        if "nheh" in cfg.solvers:
            try:
                ops_used = build_operators(params_used)
                rho_n = steady.nheh_steady_state(params_used, ops_used)
                fid = metrics.fidelity(rho_n, rho_l)
                residual = float(np.max(np.abs(nheh.nheh_rhs(params_used, ops_used, rho_n))))
                rows.append((pump, "nheh", fid, residual, OK))
            except NumericsError as exc:
                rows.append((pump, "nheh", None, None, f"failed: {exc}"))

        if "nhqm" in cfg.solvers:
            try:
                params_q = replace(params_p, n_max_photons=max(cfg.nhqm_n_max, 2))
                seeds = [core.projector(0, params_q.dim)]
                seeds += steady.default_seeds(params_q.dim, n_seeds=params_q.dim + 1 + cfg.nhqm_seeds)[
                    params_q.dim + 1:
                ]
                seeds.append(np.eye(params_q.dim, dtype=complex) / params_q.dim)
                report = steady.nhqm_fixed_points(
                    params_q, include_pump=params_q.pump_p > 0, seeds=seeds
                )
                if report.selected is None:
                    rows.append((pump, "nhqm", None, None,
                                 f"failed: {report.n_physical} candidates passed the filter"))
                else:
                    cand = report.candidates[report.selected]
                    rho_q = steady.embed_state(cand.state, params_used.dim)
                    fid = metrics.fidelity(rho_q, rho_l)
                    rows.append((pump, "nhqm", fid, cand.residual, OK))
            except NumericsError as exc:
                rows.append((pump, "nhqm", None, None, f"failed: {exc}"))

    manifest = _manifest(cfg, t0, {"lindblad_cutoffs": cutoffs})
    return RunResult(kind="fig2", tables={"fig2_fidelity.csv": (FIG2_COLUMNS, rows)},
                     manifest=manifest)


def run_evolve(cfg: ScenarioConfig) -> RunResult:
    """Single trajectory of one solver from a configured initial state."""
    if cfg.kind != "evolve":
        raise ConfigError(f"run_evolve got a {cfg.kind!r} config")
    t0 = time.monotonic()
    params = cfg.params
    ops = build_operators(params)
    spec = _integration_spec(cfg)
    rho0 = initial_state_from_text(cfg.initial, params.dim)
    states, status = _sweep_solver(cfg.solver, params, ops, rho0[None, ...], spec)
    if status[0] != OK:
        raise NumericsError(f"evolve: {status[0]}")
    tracked = cfg.tracked or ()
    columns = ["t"] + [f"{el.part}_{el.label}" for el in tracked]
    rows = []
    for k, t in enumerate(spec.times):
        vals = []
        for el in tracked:
            i, j = el.indices
            vals.append(metrics.extract_part(states[k, 0, i, j][None], el.part)[0])
        rows.append((t, *vals))
    manifest = _manifest(cfg, t0, {"solver": cfg.solver, "initial": cfg.initial})
    return RunResult(kind="evolve",
                     tables={"evolve_timeseries.csv": (tuple(columns), rows)},
                     manifest=manifest)


def run_steady(cfg: ScenarioConfig) -> RunResult:
    """Single steady state of one method, dumped entrywise."""
    if cfg.kind != "steady":
        raise ConfigError(f"run_steady got a {cfg.kind!r} config")
    t0 = time.monotonic()
    params = cfg.params
    method = cfg.steady_method
    if method == "lindblad":
        rho = steady.lindblad_steady_state(params)
    elif method == "nheh":
        rho = steady.nheh_steady_state(params)
    elif method == "nhqm":
        report = steady.nhqm_fixed_points(params)
        if report.selected is None:
            raise NumericsError(
                f"nhqm steady state is ambiguous: {report.n_physical} candidates "
                f"passed the physicality filter"
            )
        rho = report.candidates[report.selected].state
    else:
        raise ConfigError(f"unknown steady method {method!r}")
    rows = [
        (i, j, rho[i, j].real, rho[i, j].imag)
        for i in range(rho.shape[0])
        for j in range(rho.shape[1])
    ]
    manifest = _manifest(cfg, t0, {
        "method": method,
        "mean_photon_number": steady.mean_photon_number(rho),
    })
    return RunResult(kind="steady",
                     tables={"steady_state.csv": (("row", "col", "real", "imag"), rows)},
                     manifest=manifest)


def _manifest(cfg: ScenarioConfig, t0: float, extra: dict) -> dict:
    import scipy

    return {
        "name": cfg.name,
        "kind": cfg.kind,
        "versions": {
            "jcbench": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "tolerances": {
            "integration": cfg.dt_or_tol,
            "eps_cut": core.EPS_CUT,
            "steady_residual": steady.RESIDUAL_TOL,
        },
        "config": serialize_config(cfg),
        "wall_time_s": round(time.monotonic() - t0, 3),
        **extra,
    }


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".14e")


def emit_outputs(result: RunResult, out_dir) -> list[Path]:
    """Write the result tables as deterministic CSV files plus a run manifest.

    CSVs are UTF-8 with a header row, fixed column order, and floats in
    15-significant-digit scientific notation; identical runs on the same
    build produce byte-identical CSVs.  The manifest (manifest.json) carries
    the config echo, versions, tolerances, and wall time; its timing fields
    vary between runs by design.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from exc
    written = []
    for filename in sorted(result.tables):
        columns, rows = result.tables[filename]
        path = out / filename
        try:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(columns)
                for row in rows:
                    writer.writerow([_format_cell(v) for v in row])
        except OSError as exc:
            raise ConfigError(f"cannot write {path}: {exc}") from exc
        written.append(path)
    manifest_path = out / "manifest.json"
    manifest = dict(result.manifest)
    manifest["files"] = [p.name for p in written]
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append(manifest_path)
    return written


RUNNERS = {"fig1": run_fig1, "fig2": run_fig2, "evolve": run_evolve, "steady": run_steady}
