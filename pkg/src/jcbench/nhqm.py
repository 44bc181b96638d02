"""Normalized non-Hermitian evolution.

The Hamiltonian is split into Hermitian and anti-Hermitian parts,
H = H+ + H- with H+ = H+' and H- = -H-'.  Evolving the normalized density
operator under the non-Hermitian Schroedinger flow yields the nonlinear
equation

    drho/dt = i(rho H+ - H+ rho) + i(rho H-' - H- rho) + 2i rho tr(rho H-),

whose last term restores trace conservation that the plain non-Hermitian
flow loses.  Loss enters H- as -i(kappa/2) a'a - i(gamma_x/2) s's; a linear
cavity pump enters as an additional -i(P/2) a a' term.

The explicit six-element system on the lowest two excitation rungs
(first_rung_rhs) is kept as an independently written cross-check of the
general matrix flow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import core
from .core import OperatorSet, SystemParams, build_operators
from .errors import ConfigError, NumericsError
from .integrate import IntegrationSpec, Trajectory, integrate

SOLVER_TAG = "NHQM"

#: Unit-trace gate for states fed to the nonlinear right-hand side.
RHS_TRACE_TOL = 1e-6
#: Maximum tolerated trace drift along an evolved trajectory.
TRAJ_TRACE_TOL = 1e-6


@dataclass(frozen=True)
class NhqmSplit:
    """Hermitian / anti-Hermitian decomposition of the effective Hamiltonian."""

    h_plus: np.ndarray
    h_minus: np.ndarray

    def __post_init__(self):
        hp, hm = self.h_plus, self.h_minus
        scale = max(1.0, float(np.max(np.abs(hp))), float(np.max(np.abs(hm))))
        if np.max(np.abs(hp - core.dagger(hp))) > 1e-12 * scale:
            raise ValueError("h_plus must be Hermitian")
        if np.max(np.abs(hm + core.dagger(hm))) > 1e-12 * scale:
            raise ValueError("h_minus must be anti-Hermitian")

    @property
    def dim(self) -> int:
        return self.h_plus.shape[0]


def anti_hermitian_diagonal(params: SystemParams, include_pump: bool) -> np.ndarray:
    """Real diagonal d such that h_minus = -i diag(d), built from exact integers.

    d = (kappa/2) a'a + (gamma_x/2) s's (+ (P/2) a a' when pumping).  On the
    truncated space a a' equals photons+1 except on the top Fock level, where
    it is 0 (= a'a + 1 - (n_max+1) on that level).
    """
    dim = params.dim
    ph = core.photon_numbers(dim).astype(float)
    tls = (np.arange(dim) % 2).astype(float)
    d = 0.5 * params.kappa * ph + 0.5 * params.gamma_x * tls
    if include_pump:
        aad = ph + 1.0
        aad[ph == params.n_max_photons] = 0.0
        d = d + 0.5 * params.pump_p * aad
    return d


def build_split(params: SystemParams, ops: OperatorSet, include_pump: bool = False) -> NhqmSplit:
    """h_plus = H_JC; h_minus = -i[(kappa/2) a'a + (gamma_x/2) s's (+ (P/2) a a')]."""
    d = anti_hermitian_diagonal(params, include_pump)
    h_minus = np.diag(-1j * d)
    h_minus.setflags(write=False)
    return NhqmSplit(h_plus=ops.h_jc, h_minus=h_minus)


def nhqm_rhs(split: NhqmSplit, rho: np.ndarray, *, trace_tol: float = RHS_TRACE_TOL) -> np.ndarray:
    """Nonlinear right-hand side at a normalized state.

    The equation presumes unit trace; inputs whose trace deviates from 1 by
    more than `trace_tol` are rejected.  For Hermitian unit-trace input the
    output is Hermitian and traceless.
    """
    tr = np.einsum("...ii->...", rho)
    if np.max(np.abs(tr - 1.0)) > trace_tol:
        raise NumericsError(
            f"nhqm_rhs requires a normalized state; max |tr - 1| = {np.max(np.abs(tr - 1.0)):.3e}"
        )
    return nhqm_flow(split.h_plus, split.h_minus, rho)


def nhqm_flow(h_plus, h_minus, rho):
    """The flow itself, without the unit-trace gate (internal fast path)."""
    out = core.hermitian_flow(h_plus, rho)
    out = out + 1j * (rho @ core.dagger(h_minus) - h_minus @ rho)
    coupling = np.einsum("...ij,ji->...", rho, h_minus)
    out = out + (2j * coupling)[..., None, None] * rho
    return out


def nhqm_rhs_fn(split: NhqmSplit):
    """(t, rho) -> drho/dt closure (no per-call trace gate; the evolver
    validates sampled states instead)."""
    h_plus = split.h_plus
    h_minus = split.h_minus

    def rhs(t, rho):
        return nhqm_flow(h_plus, h_minus, rho)

    return rhs


def trace_projection(y: np.ndarray) -> np.ndarray:
    """Project a state (or stack of states) back onto the unit-trace manifold.

    The flow conserves trace on the manifold but repels from it wherever loss
    is active: d(tr rho)/dt = 2 tr(rho D)(tr rho - 1) with D >= 0, so over
    long horizons rounding-level trace errors grow like exp(2 int tr(rho D)).
    Long-time integrations therefore re-project after every accepted step.
    """
    return y / np.einsum("...ii->...", y)[..., None, None]


def first_rung_rhs(
    params: SystemParams,
    rho_elements: np.ndarray,
    *,
    trace_tol: float = RHS_TRACE_TOL,
    cubic_damping: bool = False,
) -> np.ndarray:
    """Six-element reduction of the dissipative nonlinear flow.

    `rho_elements` holds (rho_G0G0, rho_G1G1, rho_X0X0, rho_G1G0, rho_G1X0,
    rho_X0G0); the three populations must be real and sum to 1 within
    `trace_tol`.  Returns the six time derivatives.

    The X0 population's self-damping term is -gamma_x px (1 - px).  With
    ``cubic_damping=True`` an extra px factor multiplies that term; the cubic
    form disagrees with the general matrix flow and is retained only so the
    test suite can quantify the disagreement.

    Defined for the loss-only model; raises if params carries a pump.
    """
    if params.pump_p != 0:
        raise ConfigError("first_rung_rhs covers the loss-only model (pump_p must be 0)")
    p0, p1, px, u, c, v = np.asarray(rho_elements, dtype=complex)
    diag_sum = (p0 + p1 + px).real
    if abs(diag_sum - 1.0) > trace_tol or max(abs(p0.imag), abs(p1.imag), abs(px.imag)) > trace_tol:
        raise NumericsError(f"population sum {diag_sum:.12f} deviates from 1 beyond {trace_tol:.1e}")

    g, k, gx = params.g, params.kappa, params.gamma_x
    wc, wx = params.omega_c, params.omega_x
    cbar = np.conj(c)
    norm = k * p1 + gx * px  # = 2i tr(rho h_minus) on this support

    dp0 = norm * p0
    dp1 = -1j * g * (cbar - c) - k * p1 + norm * p1
    if cubic_damping:
        dpx = -1j * g * (c - cbar) + k * p1 * px - gx * px * (1.0 - px) * px
    else:
        dpx = -1j * g * (c - cbar) - gx * px + norm * px
    du = -1j * wc * u - 1j * g * v - 0.5 * k * u + norm * u
    dc = -1j * g * (px - p1) - 1j * (wc - wx) * c - 0.5 * (k + gx) * c + norm * c
    dv = -1j * wx * v - 1j * g * u - 0.5 * gx * v + norm * v
    return np.array([dp0, dp1, dpx, du, dc, dv])


def first_rung_indices() -> tuple[tuple[int, int], ...]:
    """(row, col) flat-index pairs of the six tracked elements, in order."""
    g0, g1, x0 = 0, 2, 1
    return ((g0, g0), (g1, g1), (x0, x0), (g1, g0), (g1, x0), (x0, g0))


def evolve_nhqm(
    params: SystemParams,
    rho0: np.ndarray,
    spec: IntegrationSpec,
    *,
    include_pump: bool | None = None,
    ops: OperatorSet | None = None,
    renormalize: bool = False,
    trace_tol: float = TRAJ_TRACE_TOL,
    validate: bool = True,
) -> Trajectory:
    """Evolve `rho0` under the normalized non-Hermitian flow.

    include_pump defaults to (pump_p > 0).  Pumped runs require
    n_max_photons >= 2, because a a' acts one level above the nominal support
    and the top-level clipping would otherwise distort the first rung.

    The flow conserves trace analytically; by default no renormalization is
    applied, so trace drift measures integrator error (capped at `trace_tol`).
    ``renormalize=True`` divides by the trace after every accepted step -- a
    debugging aid that masks that error, off by default.
    """
    if include_pump is None:
        include_pump = params.pump_p > 0
    if include_pump and params.n_max_photons < 2:
        raise ConfigError("pumped runs require n_max_photons >= 2")
    ops = ops or build_operators(params)
    core.validate_density_matrix(rho0, what="initial state")
    split = build_split(params, ops, include_pump)

    post = trace_projection if renormalize else None
    states = integrate(nhqm_rhs_fn(split), rho0, spec, post_step=post)
    times = spec.times
    if validate:
        core.validate_trajectory(
            times, states, params,
            trace_tol=trace_tol, herm_tol=1e-9, eps_cut=None, check_psd=False,
            what=SOLVER_TAG,
        )
    return Trajectory(times=times, states=states, solver_tag=SOLVER_TAG)
