"""Declarative scenario configuration.

Files use INI sections parsed by configparser; the full grammar is documented
in the README.  A minimal sweep config looks like

    [scenario]
    name = fig1
    kind = fig1
    solvers = lindblad, nhqm, nheh

    [system]
    omega_x = 1000.0
    omega_c = 1000.0
    g = 1.0
    kappa = 0.1
    gamma_x = 0.01
    pump_p = 0.0
    n_max_photons = 1

    [sweep]
    kind = alpha
    grid = linspace:0:1:101
    timeseries_alpha = 0.0

    [integration]
    t_start = 0.0
    t_end = 1000.0
    samples = 2001
    method = rk45
    dt_or_tol = 1e-10

    [tracked]
    elements = X0X0:real; G1G1:real; G0G0:real; X0G1:real,imag,abs; G0G1:real,imag,abs

    [outputs]
    directory = out/fig1

Grids accept either `linspace:start:stop:count` or an explicit comma list.
parse_config(serialize_config(cfg)) returns an equal ScenarioConfig.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass

from .core import BasisIndex, SystemParams
from .errors import ConfigError

KINDS = ("fig1", "fig2", "evolve", "steady")
SOLVERS = ("lindblad", "nhqm", "nheh")

FIG1_ELEMENTS = "X0X0:real; G1G1:real; G0G0:real; X0G1:real,imag,abs; G0G1:real,imag,abs"


@dataclass(frozen=True)
class TrackedElement:
    row: str
    col: str
    part: str

    def __post_init__(self):
        BasisIndex.from_label(self.row)
        BasisIndex.from_label(self.col)
        if self.part not in ("real", "imag", "abs"):
            raise ConfigError(f"unknown part {self.part!r} in tracked element")

    @property
    def label(self) -> str:
        return f"{self.row}{self.col}"

    @property
    def indices(self) -> tuple[int, int]:
        return BasisIndex.from_label(self.row).flat, BasisIndex.from_label(self.col).flat


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    kind: str
    params: SystemParams
    solvers: tuple[str, ...] = SOLVERS
    sweep_kind: str | None = None          # "alpha" | "pump"
    grid: tuple[float, ...] = ()
    timeseries_alpha: float | None = None  # fig1: alpha used for the panel time series
    t_start: float = 0.0
    t_end: float = 1000.0
    samples: int = 2001
    method: str = "rk45"
    dt_or_tol: float = 1e-10
    tracked: tuple[TrackedElement, ...] = ()
    outputs: str = "out"
    # fig2 extras
    nhqm_n_max: int = 2
    nhqm_seeds: int = 4
    # evolve / steady extras
    solver: str | None = None
    initial: str | None = None             # "alpha:<value>" or "bare:<label>"
    steady_method: str | None = None       # lindblad | nheh | nhqm

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown scenario kind {self.kind!r}")
        for s in self.solvers:
            if s not in SOLVERS:
                raise ConfigError(f"unknown solver {s!r}")
        if self.kind in ("fig1", "fig2"):
            if not self.grid:
                raise ConfigError(f"{self.kind} scenario needs a nonempty sweep grid")
            if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
                raise ConfigError("sweep grid must be strictly increasing")
        if self.kind == "fig1":
            if self.sweep_kind != "alpha":
                raise ConfigError("fig1 sweeps the initial-condition mixing parameter alpha")
            if min(self.grid) < 0 or max(self.grid) > 1:
                raise ConfigError("alpha grid must lie in [0, 1]")
            if "lindblad" not in self.solvers or not (set(self.solvers) & {"nhqm", "nheh"}):
                raise ConfigError("fig1 needs lindblad plus at least one of nhqm/nheh")
        if self.kind == "fig2":
            if self.sweep_kind != "pump":
                raise ConfigError("fig2 sweeps the pump rate")
            if max(self.grid) >= self.params.kappa:
                raise ConfigError("pump grid must stay below kappa")
            if min(self.grid) < 0:
                raise ConfigError("pump values must be >= 0")
        if self.kind == "evolve" and (self.solver is None or self.initial is None):
            raise ConfigError("evolve scenario needs [evolve] solver and initial")
        if self.kind == "steady" and self.steady_method is None:
            raise ConfigError("steady scenario needs [steady] method")


def _parse_grid(text: str) -> tuple[float, ...]:
    text = text.strip()
    if text.startswith("linspace:"):
        try:
            _, a, b, n = text.split(":")
            a, b, n = float(a), float(b), int(n)
        except ValueError as exc:
            raise ConfigError(f"bad linspace grid {text!r}") from exc
        if n < 1:
            raise ConfigError("linspace grid needs count >= 1")
        import numpy as np

        return tuple(float(x) for x in np.linspace(a, b, n))
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad grid {text!r}") from exc


def _parse_tracked(text: str) -> tuple[TrackedElement, ...]:
    out = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        if ":" not in chunk:
            raise ConfigError(f"tracked element {chunk!r} needs ELEMENT:part[,part...]")
        label, parts = chunk.split(":", 1)
        label = label.strip()
        # Split the two basis labels: letter+digits+letter+digits.
        split_at = None
        for k in range(1, len(label)):
            if label[k] in ("G", "X") and label[:k][1:].isdigit() and len(label[:k]) >= 2:
                split_at = k
                break
        if split_at is None:
            raise ConfigError(f"cannot split element label {label!r} into two basis states")
        row, col = label[:split_at], label[split_at:]
        for part in parts.split(","):
            out.append(TrackedElement(row=row, col=col, part=part.strip()))
    return tuple(out)


def _serialize_tracked(tracked: tuple[TrackedElement, ...]) -> str:
    grouped: dict[str, list[str]] = {}
    order: list[str] = []
    for el in tracked:
        key = el.label
        if key not in grouped:
            grouped[key] = []
            order.append(key)
        grouped[key].append(el.part)
    return "; ".join(f"{key}:{','.join(grouped[key])}" for key in order)


def parse_config(text_or_path) -> ScenarioConfig:
    """Parse a scenario config from a path or from config text."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    text = None
    try:
        import os

        if isinstance(text_or_path, (str, bytes, os.PathLike)) and os.path.exists(text_or_path):
            with open(text_or_path, "r", encoding="utf-8") as fh:
                text = fh.read()
    except (ValueError, OSError):
        text = None
    if text is None:
        text = str(text_or_path)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc

    def need(section):
        if not cp.has_section(section):
            raise ConfigError(f"missing [{section}] section")
        return cp[section]

    scen = need("scenario")
    sys_sec = need("system")
    try:
        params = SystemParams(
            omega_x=sys_sec.getfloat("omega_x"),
            omega_c=sys_sec.getfloat("omega_c"),
            g=sys_sec.getfloat("g", 1.0),
            kappa=sys_sec.getfloat("kappa", 0.0),
            gamma_x=sys_sec.getfloat("gamma_x", 0.0),
            pump_p=sys_sec.getfloat("pump_p", 0.0),
            n_max_photons=sys_sec.getint("n_max_photons", 1),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad [system] section: {exc}") from exc

    kwargs: dict = {
        "name": scen.get("name", "scenario"),
        "kind": scen.get("kind", "fig1"),
        "params": params,
        "solvers": tuple(
            s.strip() for s in scen.get("solvers", ",".join(SOLVERS)).split(",") if s.strip()
        ),
    }
    if cp.has_section("sweep"):
        sweep = cp["sweep"]
        kwargs["sweep_kind"] = sweep.get("kind")
        if sweep.get("grid"):
            kwargs["grid"] = _parse_grid(sweep["grid"])
        if sweep.get("timeseries_alpha") not in (None, ""):
            kwargs["timeseries_alpha"] = sweep.getfloat("timeseries_alpha")
        if sweep.get("nhqm_n_max"):
            kwargs["nhqm_n_max"] = sweep.getint("nhqm_n_max")
        if sweep.get("nhqm_seeds"):
            kwargs["nhqm_seeds"] = sweep.getint("nhqm_seeds")
    if cp.has_section("integration"):
        intg = cp["integration"]
        kwargs["t_start"] = intg.getfloat("t_start", 0.0)
        kwargs["t_end"] = intg.getfloat("t_end", 1000.0)
        kwargs["samples"] = intg.getint("samples", 2001)
        kwargs["method"] = intg.get("method", "rk45")
        kwargs["dt_or_tol"] = intg.getfloat("dt_or_tol", 1e-10)
    if cp.has_section("tracked") and cp["tracked"].get("elements"):
        kwargs["tracked"] = _parse_tracked(cp["tracked"]["elements"])
    if cp.has_section("outputs"):
        kwargs["outputs"] = cp["outputs"].get("directory", "out")
    if cp.has_section("evolve"):
        kwargs["solver"] = cp["evolve"].get("solver")
        kwargs["initial"] = cp["evolve"].get("initial")
    if cp.has_section("steady"):
        kwargs["steady_method"] = cp["steady"].get("method")
    return ScenarioConfig(**kwargs)


def serialize_config(cfg: ScenarioConfig) -> str:
    """Canonical text form; parse_config(serialize_config(cfg)) == cfg."""
    cp = configparser.ConfigParser()
    cp["scenario"] = {
        "name": cfg.name,
        "kind": cfg.kind,
        "solvers": ", ".join(cfg.solvers),
    }
    p = cfg.params
    cp["system"] = {
        "omega_x": repr(p.omega_x),
        "omega_c": repr(p.omega_c),
        "g": repr(p.g),
        "kappa": repr(p.kappa),
        "gamma_x": repr(p.gamma_x),
        "pump_p": repr(p.pump_p),
        "n_max_photons": str(p.n_max_photons),
    }
    sweep: dict = {}
    if cfg.sweep_kind:
        sweep["kind"] = cfg.sweep_kind
    if cfg.grid:
        sweep["grid"] = ",".join(repr(x) for x in cfg.grid)
    if cfg.timeseries_alpha is not None:
        sweep["timeseries_alpha"] = repr(cfg.timeseries_alpha)
    if cfg.kind == "fig2":
        sweep["nhqm_n_max"] = str(cfg.nhqm_n_max)
        sweep["nhqm_seeds"] = str(cfg.nhqm_seeds)
    if sweep:
        cp["sweep"] = sweep
    cp["integration"] = {
        "t_start": repr(cfg.t_start),
        "t_end": repr(cfg.t_end),
        "samples": str(cfg.samples),
        "method": cfg.method,
        "dt_or_tol": repr(cfg.dt_or_tol),
    }
    if cfg.tracked:
        cp["tracked"] = {"elements": _serialize_tracked(cfg.tracked)}
    cp["outputs"] = {"directory": cfg.outputs}
    if cfg.kind == "evolve":
        cp["evolve"] = {"solver": cfg.solver or "", "initial": cfg.initial or ""}
    if cfg.kind == "steady":
        cp["steady"] = {"method": cfg.steady_method or ""}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def default_fig1_config(**overrides) -> ScenarioConfig:
    base = dict(
        name="fig1",
        kind="fig1",
        params=SystemParams(omega_x=1000.0, omega_c=1000.0, g=1.0,
                            kappa=0.1, gamma_x=0.01, pump_p=0.0, n_max_photons=1),
        solvers=SOLVERS,
        sweep_kind="alpha",
        grid=_parse_grid("linspace:0:1:101"),
        timeseries_alpha=0.0,
        t_end=1000.0,
        samples=2001,
        tracked=_parse_tracked(FIG1_ELEMENTS),
        outputs="out/fig1",
    )
    base.update(overrides)
    return ScenarioConfig(**base)


def default_fig2_config(**overrides) -> ScenarioConfig:
    base = dict(
        name="fig2",
        kind="fig2",
        params=SystemParams(omega_x=1000.0, omega_c=1000.0, g=1.0,
                            kappa=0.1, gamma_x=0.01, pump_p=0.0, n_max_photons=4),
        solvers=SOLVERS,
        sweep_kind="pump",
        grid=_parse_grid("linspace:0:0.09:10"),
        tracked=(),
        outputs="out/fig2",
    )
    base.update(overrides)
    return ScenarioConfig(**base)
