"""Master-equation dynamics: the exact reference against which the
non-Hermitian methods are compared.

The flow is

    drho/dt = i [rho, H] + (kappa/2) D_a(rho) + (gamma_x/2) D_s(rho)
              + (P/2) D_a'(rho),

with D_X(rho) = 2 X rho X' - X'X rho - rho X'X.  It preserves trace and
hermiticity exactly, and positivity up to integrator error.
"""

from __future__ import annotations

import numpy as np

from . import core
from .core import OperatorSet, SystemParams, build_operators
from .integrate import IntegrationSpec, Trajectory, integrate

SOLVER_TAG = "Lindblad"


def lindblad_rhs(params: SystemParams, ops: OperatorSet, rho: np.ndarray) -> np.ndarray:
    """Right-hand side of the master equation at state `rho`.

    Hermitian and traceless output for Hermitian input.  Broadcasts over
    leading axes of `rho`.
    """
    out = core.hermitian_flow(ops.h_jc, rho)
    if params.kappa:
        out = out + 0.5 * params.kappa * core.lindblad_dissipator(ops.a, rho)
    if params.gamma_x:
        out = out + 0.5 * params.gamma_x * core.lindblad_dissipator(ops.sigma, rho)
    if params.pump_p:
        out = out + 0.5 * params.pump_p * core.lindblad_dissipator(ops.a_dag, rho)
    return out


def lindblad_rhs_fn(params: SystemParams, ops: OperatorSet):
    """(t, rho) -> drho/dt closure with cached operator products.

    Algebraically identical to lindblad_rhs; the X'X products are
    precomputed once so trajectory integration does not rebuild them at
    every stage evaluation.
    """
    h = ops.h_jc
    terms = []
    for rate, x in ((params.kappa, ops.a), (params.gamma_x, ops.sigma), (params.pump_p, ops.a_dag)):
        if rate > 0:
            terms.append((0.5 * rate, x, core.dagger(x), core.dagger(x) @ x))

    def rhs(t, rho):
        out = 1j * (rho @ h - h @ rho)
        for coeff, x, xd, xdx in terms:
            out = out + coeff * (2.0 * (x @ rho @ xd) - xdx @ rho - rho @ xdx)
        return out

    return rhs


def evolve_lindblad(
    params: SystemParams,
    rho0: np.ndarray,
    spec: IntegrationSpec,
    *,
    ops: OperatorSet | None = None,
    eps_cut: float = core.EPS_CUT,
    validate: bool = True,
) -> Trajectory:
    """Evolve `rho0` under the master equation, sampling at spec.sample_times.

    When `validate` is set, every sampled state is checked for trace
    conservation, hermiticity, positivity, and truncation adequacy (the
    population of the truncation-affected states must stay below `eps_cut`);
    violations raise with the first offending time.
    """
    ops = ops or build_operators(params)
    core.validate_density_matrix(rho0, what="initial state")
    states = integrate(lindblad_rhs_fn(params, ops), rho0, spec)
    times = spec.times
    if validate:
        core.validate_trajectory(times, states, params, eps_cut=eps_cut, what=SOLVER_TAG)
    return Trajectory(times=times, states=states, solver_tag=SOLVER_TAG)
