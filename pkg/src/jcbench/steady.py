"""Steady states of all three flows.

For the linear flows (master equation and corrected cascade) the generator is
assembled as an explicit matrix and the steady state is the trace-normalized
kernel vector.  Two assemblies are provided:

* the full generator on column-stacked density matrices (dimension d^2),
  solved by SVD -- fine up to d ~ 32;
* the generator restricted to the excitation-diagonal sector (dimension
  ~ 4 n_max + 2), which contains every steady state of these flows because
  the generator never mixes excitation-difference sectors.  This is the only
  tractable route at the cutoffs a strong pump demands.

The nonlinear normalized flow can have several fixed points; they are found
by long-time integration from a seed battery plus damped Gauss-Newton
refinement, deduplicated, and classified.  A candidate is reported as
physical when it is Hermitian, unit-trace, positive semidefinite, AND
locally attracting.  The attractivity check is part of the filter because
rank-one projectors onto decaying eigenmodes are fixed points of the
normalized flow that pass every algebraic check, yet the dynamics never
settles on them from generic states; stability is what singles out the
steady state the flow actually reaches.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from . import core, lindblad, nheh, nhqm
from .core import OperatorSet, SystemParams, build_operators
from .errors import (
    ConfigError,
    CutoffError,
    FixedPointSearchError,
    NullSpaceError,
    NumericsError,
)
from .integrate import IntegrationSpec, integrate

#: Residual ceiling for any reported steady state / fixed point (max norm).
RESIDUAL_TOL = 1e-10
#: Two candidates closer than this (entrywise) are the same fixed point.
DEDUP_TOL = 1e-6
#: A fixed point is attracting when its traceless Jacobian spectrum stays
#: below this real-part threshold.
STABILITY_TOL = 1e-6
#: Dimension bound for the dense d^2 x d^2 route.
FULL_ROUTE_MAX_DIM = 32


def _require_bounded(params: SystemParams):
    if params.pump_p > 0 and params.pump_p >= params.kappa:
        raise NumericsError(
            f"no normalizable steady state for pump_p = {params.pump_p} >= kappa = {params.kappa}"
        )


def _terms(params: SystemParams, ops: OperatorSet, kind: str):
    """(coeff, A, B) triples meaning coeff * A rho B, summing to the chosen flow."""
    dim = params.dim
    eye = np.eye(dim, dtype=complex)
    h = ops.h_jc
    terms = [(1j, eye, h), (-1j, h, eye)]
    jumps = ((params.kappa, ops.a), (params.gamma_x, ops.sigma), (params.pump_p, ops.a_dag))
    if kind == "lindblad":
        for rate, x in jumps:
            if rate > 0:
                xdx = core.dagger(x) @ x
                terms += [(rate, x, core.dagger(x)), (-rate / 2, xdx, eye), (-rate / 2, eye, xdx)]
    elif kind == "nheh":
        d = np.diag(nhqm.anti_hermitian_diagonal(params, include_pump=True)).astype(complex)
        terms += [(-1.0, d, eye), (-1.0, eye, d)]
        for rate, x in jumps:
            if rate > 0:
                terms.append((rate, x, core.dagger(x)))
    else:
        raise ConfigError(f"unknown generator kind {kind!r}")
    return terms


def liouvillian_matrix(params: SystemParams, ops: OperatorSet | None = None,
                       kind: str = "lindblad") -> np.ndarray:
    """Dense generator on column-stacked density matrices (dimension d^2)."""
    ops = ops or build_operators(params)
    d = params.dim
    out = np.zeros((d * d, d * d), dtype=complex)
    for coeff, a, b in _terms(params, ops, kind):
        out += coeff * np.kron(b.T, a)
    return out


def sector_indices(dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Row/column flat indices (i_k, j_k) of the excitation-diagonal sector."""
    exc = core.excitation_numbers(dim)
    rows, cols = [], []
    for n in range(int(exc.max()) + 1):
        idx = np.flatnonzero(exc == n)
        for i in idx:
            for j in idx:
                rows.append(i)
                cols.append(j)
    return np.asarray(rows), np.asarray(cols)


def sector_generator(params: SystemParams, ops: OperatorSet | None = None,
                     kind: str = "lindblad"):
    """Generator restricted to the excitation-diagonal sector.

    Returns (matrix, rows, cols) where matrix[p, q] propagates sector entry
    q = (rows[q], cols[q]) into entry p.  The sector is invariant, so this is
    the exact dynamics of any state supported on it.
    """
    ops = ops or build_operators(params)
    rows, cols = sector_indices(params.dim)
    size = len(rows)
    out = np.zeros((size, size), dtype=complex)
    for coeff, a, b in _terms(params, ops, kind):
        a_sub = a[np.ix_(rows, rows)]
        b_sub = b[np.ix_(cols, cols)]
        out += coeff * (a_sub * b_sub.T)
    return out, rows, cols


def sector_to_matrix(vec: np.ndarray, rows: np.ndarray, cols: np.ndarray, dim: int) -> np.ndarray:
    rho = np.zeros((dim, dim), dtype=complex)
    rho[rows, cols] = vec
    return rho


def matrix_to_sector(rho: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    return rho[rows, cols]


def mean_photon_number(rho: np.ndarray) -> float:
    ph = core.photon_numbers(rho.shape[-1])
    return float(np.sum(ph * np.einsum("...ii->...i", rho).real, axis=-1))


def _kernel_from_svd(mat: np.ndarray, what: str) -> np.ndarray:
    """Smallest right-singular vector, with rank-1 kernel assertions."""
    _, s, vh = scipy.linalg.svd(mat)
    if s[-1] >= 1e-10:
        raise NullSpaceError(f"{what}: smallest singular value {s[-1]:.3e} >= 1e-10, no kernel")
    if len(s) > 1 and s[-2] <= 1e-8 * max(1.0, s[0]):
        raise NullSpaceError(
            f"{what}: second singular value {s[-2]:.3e} is also tiny; kernel is degenerate"
        )
    return vh[-1].conj()


def _finalize_steady(rho: np.ndarray, params: SystemParams, ops: OperatorSet,
                     eps_cut: float | None, what: str) -> np.ndarray:
    tr = np.trace(rho)
    if abs(tr) < 1e-10:
        raise NullSpaceError(f"{what}: kernel vector is traceless, not a state")
    rho = rho / tr
    rho = 0.5 * (rho + core.dagger(rho))
    residual = float(np.max(np.abs(lindblad.lindblad_rhs(params, ops, rho))))
    if residual > RESIDUAL_TOL:
        raise NullSpaceError(f"{what}: steady-state residual {residual:.3e} exceeds 1e-10")
    core.validate_density_matrix(rho, what=what)
    if eps_cut is not None:
        pop = float(core.truncation_indicator(rho[None, ...], params)[0])
        if pop >= eps_cut:
            raise CutoffError(
                f"{what}: truncation-indicator population {pop:.3e} >= eps_cut {eps_cut:.1e}"
            )
    return rho


def lindblad_steady_state(
    params: SystemParams,
    ops: OperatorSet | None = None,
    *,
    eps_cut: float | None = core.EPS_CUT,
    method: str = "auto",
) -> np.ndarray:
    """Unique steady state of the master equation at this truncation.

    Requires pump_p < kappa (a linear gain at or above the linear loss has no
    normalizable steady state).  method: "full" solves the d^2 system,
    "sector" the excitation-diagonal restriction, "auto" picks by size.  The
    result satisfies |max lindblad_rhs| < 1e-10, unit trace, hermiticity and
    positivity, and (unless eps_cut is None) the truncation-adequacy gate.
    """
    _require_bounded(params)
    ops = ops or build_operators(params)
    if method == "auto":
        method = "full" if params.dim <= FULL_ROUTE_MAX_DIM else "sector"
    if method == "full":
        vec = _kernel_from_svd(liouvillian_matrix(params, ops), "Liouvillian")
        rho = vec.reshape(params.dim, params.dim, order="F")
    elif method == "sector":
        mat, rows, cols = sector_generator(params, ops)
        vec = _kernel_from_svd(mat, "sector Liouvillian")
        rho = sector_to_matrix(vec, rows, cols, params.dim)
    else:
        raise ConfigError(f"unknown steady-state method {method!r}")
    return _finalize_steady(rho, params, ops, eps_cut, "Lindblad steady state")


def converged_lindblad_steady_state(
    params: SystemParams,
    *,
    mean_tol: float = 1e-8,
    eps_cut: float = core.EPS_CUT,
    n_start: int | None = None,
    n_cap: int = 2048,
) -> tuple[np.ndarray, SystemParams]:
    """Steady state with the cutoff chosen by doubling.

    Doubles n_max_photons until the steady-state mean photon number changes
    by less than `mean_tol` AND the truncation-indicator population clears
    `eps_cut`.  Returns (state, params at the accepted cutoff).  `n_start`
    seeds the search (e.g. from a previous, slightly smaller pump).
    """
    _require_bounded(params)
    from dataclasses import replace

    n = max(2, int(n_start) if n_start else max(4, params.n_max_photons))
    prev = None  # (rho, params, mean, top)
    while n <= n_cap:
        p_n = replace(params, n_max_photons=n)
        rho = lindblad_steady_state(p_n, eps_cut=None)
        mean = mean_photon_number(rho)
        if prev is not None:
            rho_p, params_p, mean_p, top_p = prev
            if abs(mean - mean_p) < mean_tol and top_p < eps_cut:
                # Doubling this cutoff no longer moves the mean: accept it.
                return rho_p, params_p
        top = float(core.truncation_indicator(rho[None, ...], p_n)[0])
        prev = (rho, p_n, mean, top)
        n *= 2
    raise CutoffError(f"steady-state cutoff search exceeded n_max_photons = {n_cap}")


def nheh_steady_state(
    params: SystemParams,
    ops: OperatorSet | None = None,
    *,
    residual_tol: float = RESIDUAL_TOL,
    window: float = 200.0,
    max_windows: int = 200,
) -> np.ndarray:
    """Steady state of the corrected cascade by long-time evolution.

    The pumped cascade couples every rung, so the blocks are evolved jointly;
    starting from the vacuum the trajectory stays in the excitation-diagonal
    sector, whose generator is assembled explicitly and applied through
    sparse Krylov propagation (e^{M dt} v) in windows of length `window`
    until the full right-hand-side residual drops below `residual_tol`.
    """
    _require_bounded(params)
    ops = ops or build_operators(params)
    mat, rows, cols = sector_generator(params, ops, kind="nheh")
    sparse = scipy.sparse.csr_matrix(mat * window)

    dim = params.dim
    v = matrix_to_sector(core.projector(0, dim), rows, cols)
    rho = None
    for _ in range(max_windows):
        v = scipy.sparse.linalg.expm_multiply(sparse, v)
        rho = sector_to_matrix(v, rows, cols, dim)
        residual = float(np.max(np.abs(nheh.nheh_rhs(params, ops, rho))))
        if residual < residual_tol:
            break
    else:
        raise NumericsError(
            f"cascade evolution did not reach residual {residual_tol:.1e} "
            f"within {max_windows * window:g} time units"
        )
    tr_dev = abs(np.trace(rho) - 1.0)
    if tr_dev > 1e-9:
        raise NumericsError(f"cascade evolution lost trace by {tr_dev:.3e}")
    rho = 0.5 * (rho + core.dagger(rho))
    return rho / np.trace(rho).real


# ---------------------------------------------------------------------------
# Nonlinear fixed points
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FixedPointCandidate:
    state: np.ndarray
    residual: float
    checks: dict
    details: dict

    @property
    def physical(self) -> bool:
        return all(self.checks.values())

    @property
    def failed(self) -> tuple[str, ...]:
        return tuple(name for name, ok in self.checks.items() if not ok)


@dataclass(frozen=True)
class FixedPointReport:
    candidates: tuple[FixedPointCandidate, ...]
    selected: int | None
    n_max_photons: int

    @property
    def n_physical(self) -> int:
        return sum(1 for c in self.candidates if c.physical)


def _herm_indices(d):
    return np.triu_indices(d, k=1)


def _herm_to_real(m: np.ndarray, iu) -> np.ndarray:
    return np.concatenate([np.diag(m).real, m[iu].real, m[iu].imag])


def _real_to_herm(x: np.ndarray, d: int, iu) -> np.ndarray:
    m = np.zeros((d, d), dtype=complex)
    np.fill_diagonal(m, x[:d])
    n_off = iu[0].size
    off = x[d:d + n_off] + 1j * x[d + n_off:]
    m[iu] = off
    m[(iu[1], iu[0])] = off.conj()
    return m


def default_seeds(dim: int, n_seeds: int = 64, rng_seed: int = 20260810) -> list[np.ndarray]:
    """Bare-state projectors, the maximally mixed state, then random PSD states."""
    seeds = [core.projector(i, dim) for i in range(dim)]
    seeds.append(np.eye(dim, dtype=complex) / dim)
    rng = np.random.default_rng(rng_seed)
    while len(seeds) < n_seeds:
        a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        rho = a @ a.conj().T
        seeds.append(rho / np.trace(rho).real)
    return seeds[:n_seeds]


def _pre_integrate(split, seeds, pre_t, tol):
    """Long-time integration endpoints for each seed (independent failures allowed).

    Integrated with per-step trace projection: the unit-trace manifold of the
    nonlinear flow is repelling wherever loss is active, and pre_t is long.
    """
    spec = IntegrationSpec(t_start=0.0, t_end=pre_t, sample_times=(pre_t,), dt_or_tol=tol)
    rhs = nhqm.nhqm_rhs_fn(split)
    stack = np.stack(seeds)
    try:
        return list(integrate(rhs, stack, spec, post_step=nhqm.trace_projection)[0])
    except NumericsError:
        endpoints = []
        for seed in seeds:
            try:
                endpoints.append(integrate(rhs, seed, spec, post_step=nhqm.trace_projection)[0])
            except NumericsError:
                continue
        return endpoints


def _newton_refine(split, rho, *, tol, max_iter=60):
    d = split.dim
    iu = _herm_indices(d)

    def fvec(x):
        m = _real_to_herm(x, d, iu)
        r = nhqm.nhqm_flow(split.h_plus, split.h_minus, m)
        r = 0.5 * (r + core.dagger(r))
        return np.concatenate([_herm_to_real(r, iu), [np.trace(m).real - 1.0]])

    x = _herm_to_real(0.5 * (rho + core.dagger(rho)), iu)
    fx = fvec(x)
    for _ in range(max_iter):
        if np.max(np.abs(fx[:-1])) < tol and abs(fx[-1]) < tol:
            break
        jac = _fd_jacobian(fvec, x, fx.size)
        step, *_ = np.linalg.lstsq(jac, -fx, rcond=None)
        lam, improved = 1.0, False
        for _ in range(25):
            x_try = x + lam * step
            f_try = fvec(x_try)
            if np.linalg.norm(f_try) < np.linalg.norm(fx):
                x, fx, improved = x_try, f_try, True
                break
            lam *= 0.5
        if not improved:
            break
    m = _real_to_herm(x, d, iu)
    residual = float(np.max(np.abs(nhqm.nhqm_flow(split.h_plus, split.h_minus, m))))
    return m, residual


def _fd_jacobian(fvec, x, n_out, rel=1e-6):
    jac = np.empty((n_out, x.size))
    for k in range(x.size):
        h = rel * max(1.0, abs(x[k]))
        xp = x.copy()
        xm = x.copy()
        xp[k] += h
        xm[k] -= h
        jac[:, k] = (fvec(xp) - fvec(xm)) / (2 * h)
    return jac


def _max_traceless_eig(split, rho):
    """Largest real part of the flow's Jacobian spectrum on traceless perturbations."""
    d = split.dim
    iu = _herm_indices(d)

    def flow(x):
        m = _real_to_herm(x, d, iu)
        r = nhqm.nhqm_flow(split.h_plus, split.h_minus, m)
        return _herm_to_real(0.5 * (r + core.dagger(r)), iu)

    x0 = _herm_to_real(0.5 * (rho + core.dagger(rho)), iu)
    jac = _fd_jacobian(flow, x0, x0.size)
    trace_row = np.zeros(x0.size)
    trace_row[:d] = 1.0
    basis = scipy.linalg.null_space(trace_row[None, :])
    reduced = basis.T @ jac @ basis
    return float(np.max(scipy.linalg.eigvals(reduced).real))


def nhqm_fixed_points(
    params: SystemParams,
    include_pump: bool | None = None,
    seeds: list[np.ndarray] | None = None,
    *,
    ops: OperatorSet | None = None,
    n_seeds: int = 64,
    pre_t: float = 600.0,
    pre_tol: float = 1e-10,
    residual_tol: float = RESIDUAL_TOL,
    dedup_tol: float = DEDUP_TOL,
    stability_tol: float = STABILITY_TOL,
    trace_tol: float = 1e-8,
    psd_tol: float = core.PSD_TOL,
) -> FixedPointReport:
    """Enumerate and classify fixed points of the normalized non-Hermitian flow.

    Every seed is integrated to t = pre_t, the endpoint is refined by damped
    Gauss-Newton iteration on the fixed-point equations, converged points are
    deduplicated, and each surviving candidate is labelled by the checks
    {hermitian, unit_trace, positive, attracting} (see module docstring for
    why attractivity belongs in the filter).  `selected` is set when exactly
    one candidate passes every check.
    """
    if include_pump is None:
        include_pump = params.pump_p > 0
    if include_pump and params.n_max_photons < 2:
        raise ConfigError("pumped fixed-point searches require n_max_photons >= 2")
    ops = ops or build_operators(params)
    split = nhqm.build_split(params, ops, include_pump)
    if seeds is None:
        seeds = default_seeds(params.dim, n_seeds)

    raw = []
    for endpoint in _pre_integrate(split, seeds, pre_t, pre_tol):
        state, residual = _newton_refine(split, endpoint, tol=residual_tol * 1e-1)
        if residual < residual_tol:
            raw.append((state, residual))
    if not raw:
        raise FixedPointSearchError("no fixed point converged from any seed")

    raw.sort(key=lambda sr: (sr[1], tuple(np.round(sr[0], 12).ravel().view(float))))
    kept: list[tuple[np.ndarray, float]] = []
    for state, residual in raw:
        if any(np.max(np.abs(state - other)) < dedup_tol for other, _ in kept):
            continue
        kept.append((state, residual))

    candidates = []
    for state, residual in kept:
        herm_dev = float(np.max(np.abs(state - core.dagger(state))))
        tr_dev = abs(np.trace(state).real - 1.0) + abs(np.trace(state).imag)
        min_eig = float(np.linalg.eigvalsh(0.5 * (state + core.dagger(state))).min())
        max_re = _max_traceless_eig(split, state)
        checks = {
            "hermitian": herm_dev <= 1e-8,
            "unit_trace": tr_dev <= trace_tol,
            "positive": min_eig >= -psd_tol,
            "attracting": max_re <= stability_tol,
        }
        state = state.copy()
        state.setflags(write=False)
        candidates.append(FixedPointCandidate(
            state=state,
            residual=residual,
            checks=checks,
            details={"min_eig": min_eig, "trace_dev": tr_dev, "max_re_jacobian": max_re},
        ))

    physical = [i for i, c in enumerate(candidates) if c.physical]
    selected = physical[0] if len(physical) == 1 else None
    return FixedPointReport(
        candidates=tuple(candidates),
        selected=selected,
        n_max_photons=params.n_max_photons,
    )


def embed_state(rho: np.ndarray, dim: int) -> np.ndarray:
    """Embed a state from a smaller cutoff into `dim` (flat orderings nest)."""
    small = rho.shape[-1]
    if small > dim:
        raise ValueError(f"cannot embed dimension {small} into {dim}")
    out = np.zeros((dim, dim), dtype=complex)
    out[:small, :small] = rho
    return out
