"""Corrected effective-Hamiltonian dynamics.

The effective Hamiltonian H = H_JC + H- (anti-Hermitian part as in the
normalized flow, pump included) conserves the excitation grading, so the
density matrix splits into blocks labelled by (row rung, column rung).  The
non-Hermitian flow alone drains each block; the correction superoperators

    C_X(rho) = X rho X'

re-deposit the drained weight one rung down (X = a, s) or up (X = a'),
giving the full right-hand side

    drho/dt = i(rho H' - H rho) + kappa C_a(rho) + gamma_x C_s(rho)
              + P C_a'(rho).

With these coefficients the summed block dynamics is algebraically identical
to the master equation, so trace is conserved exactly.  A variant with the
correction coefficients halved (kappa/2, gamma_x/2, P/2) is kept behind
``corrected=False``; it does not conserve trace and exists so tests can
quantify its disagreement.

Solution strategies
-------------------
joint      one integration of all blocks as a coupled system (default; for
           any pump this is the converged form of the schedules below).
cascade    loss-only schedule: blocks are solved level by level from the top
           of the ladder down, each level sourcing its correction terms from
           the already-solved level above (dense interpolants of those
           solutions).  Requires P = 0, since the pump couples each level to
           the not-yet-solved level below.
iterative  repeated cascade sweeps for P > 0: pump sources are taken from
           the previous sweep's trajectories and the sweep is iterated until
           the sampled trajectories stop changing.

A block's "level" is min(row rung, column rung): loss corrections lower both
rung labels by one, so level-l blocks depend only on level-(l+1) blocks, and
the top-down schedule is well ordered for every coherence block, not just
the rung-diagonal ones.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import core
from .core import OperatorSet, SystemParams, build_operators
from .errors import ConfigError, NumericsError
from .integrate import DenseOutput, IntegrationSpec, Trajectory, integrate
from .nhqm import anti_hermitian_diagonal

SOLVER_TAG = "NHEH"

#: Trace conservation requirement on the summed blocks along a trajectory.
TRACE_TOL = 1e-9
#: Iterative sweeps stop when successive sampled trajectories differ by less.
SWEEP_TOL = 1e-8
MAX_SWEEPS = 64
#: Stage integrations run at least this tight so that interpolated correction
#: sources do not dominate the error budget of a sweep.
STAGE_TOL_CAP = 1e-11


@dataclass(frozen=True)
class RungLayout:
    """Excitation-block structure of the truncated space.

    n_max_rung is the highest rung whose dynamics receives corrections (the
    top of the solved ladder); blocks above it are constrained to vanish in
    the initial state for loss-only cascades.
    """

    n_max_photons: int
    n_max_rung: int

    def __post_init__(self):
        if self.n_max_rung < 0 or self.n_max_rung > self.n_max_photons + 1:
            raise ConfigError(
                f"n_max_rung must lie in [0, {self.n_max_photons + 1}], got {self.n_max_rung}"
            )

    @property
    def dim(self) -> int:
        return 2 * (self.n_max_photons + 1)

    @property
    def excitations(self) -> np.ndarray:
        return core.excitation_numbers(self.dim)

    def rung_indices(self, n: int) -> np.ndarray:
        """Flat indices spanning rung n."""
        return np.flatnonzero(self.excitations == n)

    def block(self, row_rung: int, col_rung: int):
        """np.ix_ selector of the (row rung, column rung) block."""
        return np.ix_(self.rung_indices(row_rung), self.rung_indices(col_rung))

    def level_mask(self, level: int) -> np.ndarray:
        """Boolean mask of all entries whose block level min(row, col) == level."""
        exc = self.excitations
        lev = np.minimum.outer(exc, exc)
        return lev == level


def default_layout(params: SystemParams) -> RungLayout:
    return RungLayout(n_max_photons=params.n_max_photons, n_max_rung=params.n_max_photons + 1)


def nheh_rhs(
    params: SystemParams,
    ops: OperatorSet,
    rho: np.ndarray,
    *,
    corrected: bool = True,
) -> np.ndarray:
    """Full (all blocks jointly) right-hand side at state `rho`."""
    return nheh_rhs_fn(params, ops, corrected=corrected)(0.0, rho)


def nheh_rhs_fn(params: SystemParams, ops: OperatorSet, *, corrected: bool = True):
    """(t, rho) -> drho/dt closure for the joint system."""
    h = ops.h_jc
    d = anti_hermitian_diagonal(params, include_pump=True)  # h_minus = -i diag(d)
    factor = 1.0 if corrected else 0.5
    jumps = []
    for rate, x in ((params.kappa, ops.a), (params.gamma_x, ops.sigma), (params.pump_p, ops.a_dag)):
        if rate > 0:
            jumps.append((factor * rate, x, core.dagger(x)))
    dcol = d[:, None]
    drow = d[None, :]

    def rhs(t, rho):
        # i(rho H' - H rho) with H = h - i diag(d):
        #   Hermitian part i[rho, h], anti-Hermitian part -(diag(d) rho + rho diag(d)).
        out = 1j * (rho @ h - h @ rho) - (dcol * rho + rho * drow)
        for coeff, x, xd in jumps:
            out = out + coeff * (x @ rho @ xd)
        return out

    return rhs


def _check_initial_support(rho0: np.ndarray, layout: RungLayout):
    exc = layout.excitations
    lev = np.maximum.outer(exc, exc)
    outside = np.abs(rho0[lev > layout.n_max_rung])
    if outside.size and outside.max() > 1e-12:
        raise ConfigError(
            f"initial state has weight {outside.max():.3e} above rung {layout.n_max_rung}"
        )


def evolve_nheh_cascade(
    params: SystemParams,
    rho0: np.ndarray,
    spec: IntegrationSpec,
    layout: RungLayout | None = None,
    *,
    strategy: str = "joint",
    ops: OperatorSet | None = None,
    corrected: bool = True,
    sweep_tol: float = SWEEP_TOL,
    max_sweeps: int = MAX_SWEEPS,
    trace_tol: float = TRACE_TOL,
    validate: bool = True,
) -> Trajectory:
    """Evolve `rho0` under the corrected effective-Hamiltonian dynamics.

    strategy selects between the joint solve (default), the loss-only
    top-down cascade, and the iterative sweep for pumped systems; see the
    module docstring.  The summed trace over all blocks must stay within
    `trace_tol` of 1 at every sample (checked when `validate` is set).
    """
    ops = ops or build_operators(params)
    layout = layout or default_layout(params)
    core.validate_density_matrix(rho0, what="initial state")
    _check_initial_support(rho0, layout)

    if strategy == "joint":
        states = integrate(nheh_rhs_fn(params, ops, corrected=corrected), rho0, spec)
    elif strategy == "cascade":
        if params.pump_p > 0:
            raise NumericsError(
                "cascade schedule with pump_p > 0 references not-yet-solved lower rungs; "
                "use strategy='iterative' or 'joint'"
            )
        states = _sweep(params, ops, layout, rho0, spec, corrected, pump_sources=None)[0]
    elif strategy == "iterative":
        states = _iterate_sweeps(params, ops, layout, rho0, spec, corrected, sweep_tol, max_sweeps)
    else:
        raise ConfigError(f"unknown strategy {strategy!r} (joint | cascade | iterative)")

    times = spec.times
    if validate:
        core.validate_trajectory(
            times, states, params,
            trace_tol=trace_tol, herm_tol=1e-9, eps_cut=core.EPS_CUT, check_psd=False,
            what=SOLVER_TAG,
        )
    return Trajectory(times=times, states=states, solver_tag=SOLVER_TAG)


def _stage_spec(spec: IntegrationSpec) -> IntegrationSpec:
    if spec.method == "rk45" and spec.dt_or_tol > STAGE_TOL_CAP:
        return IntegrationSpec(
            t_start=spec.t_start, t_end=spec.t_end, sample_times=spec.sample_times,
            method=spec.method, dt_or_tol=STAGE_TOL_CAP,
        )
    return spec


def _sweep(params, ops, layout, rho0, spec, corrected, pump_sources):
    """One top-down pass over block levels.

    Returns (sampled assembled states, per-level DenseOutput interpolants).
    Loss corrections source the interpolants of the level above from this
    sweep; pump corrections source `pump_sources` (previous sweep, one level
    below), or nothing on the first sweep.
    """
    h = ops.h_jc
    d = anti_hermitian_diagonal(params, include_pump=True)
    dcol, drow = d[:, None], d[None, :]
    factor = 1.0 if corrected else 0.5
    loss_jumps = []
    for rate, x in ((params.kappa, ops.a), (params.gamma_x, ops.sigma)):
        if rate > 0:
            loss_jumps.append((factor * rate, x, core.dagger(x)))
    pump_coeff = factor * params.pump_p
    a_dag, a_ = ops.a_dag, ops.a

    stage_spec = _stage_spec(spec)
    top = layout.n_max_rung
    n_samples = len(spec.sample_times)
    assembled = np.zeros((n_samples, layout.dim, layout.dim), dtype=complex)
    interpolants: dict[int, DenseOutput] = {}

    for level in range(top, -1, -1):
        mask = layout.level_mask(level)
        if not mask.any():
            continue
        upper = interpolants.get(level + 1)
        pump_src = pump_sources.get(level - 1) if pump_sources else None

        def rhs(t, y, _upper=upper, _pump=pump_src, _mask=mask):
            out = (1j * (y @ h - h @ y) - (dcol * y + y * drow)) * _mask
            if _upper is not None:
                src = _upper(t)
                for coeff, x, xd in loss_jumps:
                    out = out + coeff * (x @ src @ xd)
            if _pump is not None and pump_coeff > 0:
                out = out + pump_coeff * (a_dag @ _pump(t) @ a_)
            return out

        y0 = rho0 * mask
        samples, interp = integrate(rhs, y0, stage_spec, dense=True)
        interpolants[level] = interp
        assembled += samples

    return assembled, interpolants


def _iterate_sweeps(params, ops, layout, rho0, spec, corrected, sweep_tol, max_sweeps):
    prev_states, prev_interps = _sweep(params, ops, layout, rho0, spec, corrected, None)
    for _ in range(max_sweeps):
        states, interps = _sweep(params, ops, layout, rho0, spec, corrected, prev_interps)
        delta = float(np.max(np.abs(states - prev_states)))
        if delta < sweep_tol:
            return states
        prev_states, prev_interps = states, interps
    raise NumericsError(
        f"iterative cascade did not converge below {sweep_tol:.1e} in {max_sweeps} sweeps"
    )
