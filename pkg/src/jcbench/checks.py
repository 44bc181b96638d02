"""Built-in invariant suite behind `jcbench --check`.

A quick, deterministic subset of the structural invariants the test suite
verifies in full: operator identities, superoperator trace properties, the
equivalence of the corrected cascade and master-equation right-hand sides,
the reduced-system cross-check, metric properties, and integrator order.
"""

from __future__ import annotations

import numpy as np

from . import core, lindblad, metrics, nheh, nhqm, steady
from .core import SystemParams, build_operators
from .integrate import IntegrationSpec, integrate

PARAMS = SystemParams(omega_x=5.0, omega_c=5.2, g=1.0, kappa=0.1, gamma_x=0.01,
                      pump_p=0.05, n_max_photons=3)


def _random_hermitian_state(rng, dim):
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def _checks():
    rng = np.random.default_rng(12345)
    ops = build_operators(PARAMS)
    dim = PARAMS.dim

    def operator_invariants():
        herm = np.max(np.abs(ops.h_jc - core.dagger(ops.h_jc)))
        comm = np.max(np.abs(ops.h_jc @ ops.n_op - ops.n_op @ ops.h_jc))
        top = core.projector(dim - 2, dim) + core.projector(dim - 1, dim)
        art = np.max(np.abs(
            ops.a @ ops.a_dag - ops.a_dag @ ops.a
            - (np.eye(dim) - (PARAMS.n_max_photons + 1) * top)
        ))
        return herm == 0.0 and comm == 0.0 and art < 1e-13, (
            f"hermiticity {herm:.1e}, [h,N] {comm:.1e}, ladder artifact {art:.1e}"
        )

    def dissipator_traceless():
        worst = 0.0
        for _ in range(25):
            rho = _random_hermitian_state(rng, dim)
            for x in (ops.a, ops.sigma, ops.a_dag):
                worst = max(worst, abs(np.trace(core.lindblad_dissipator(x, rho))))
        return worst < 1e-12, f"max |tr D_X(rho)| = {worst:.1e}"

    def rhs_equivalence():
        worst = 0.0
        for _ in range(50):
            rho = _random_hermitian_state(rng, dim)
            diff = nheh.nheh_rhs(PARAMS, ops, rho) - lindblad.lindblad_rhs(PARAMS, ops, rho)
            worst = max(worst, float(np.max(np.abs(diff))))
        return worst < 1e-13, f"max |cascade - master| = {worst:.1e}"

    def reduced_system():
        p = SystemParams(omega_x=1000.0, omega_c=1000.0, g=1.0, kappa=0.1,
                         gamma_x=0.01, n_max_photons=1)
        po = build_operators(p)
        split = nhqm.build_split(p, po, include_pump=False)
        worst = 0.0
        for _ in range(50):
            diag = rng.dirichlet((1.0, 1.0, 1.0))
            off = 0.1 * (rng.standard_normal(3) + 1j * rng.standard_normal(3))
            rho = np.zeros((4, 4), dtype=complex)
            (g0, g1, x0) = (0, 2, 1)
            rho[g0, g0], rho[g1, g1], rho[x0, x0] = diag
            for (i, j), val in zip(((g1, g0), (g1, x0), (x0, g0)), off):
                rho[i, j] = val
                rho[j, i] = np.conj(val)
            general = nhqm.nhqm_rhs(split, rho)
            elems = np.array([rho[i, j] for i, j in nhqm.first_rung_indices()])
            reduced = nhqm.first_rung_rhs(p, elems)
            got = np.array([general[i, j] for i, j in nhqm.first_rung_indices()])
            worst = max(worst, float(np.max(np.abs(got - reduced))))
        return worst < 1e-12, f"max |general - reduced| = {worst:.1e}"

    def metric_properties():
        oks = []
        oks.append(abs(metrics.pearson([1, 2, 3], [1, 2, 3]) - 1.0) < 1e-14)
        oks.append(abs(metrics.pearson([1, 2, 3], [-1, -2, -3]) + 1.0) < 1e-14)
        rho = _random_hermitian_state(rng, dim)
        sig = _random_hermitian_state(rng, dim)
        f1, f2 = metrics.fidelity(rho, sig), metrics.fidelity(sig, rho)
        oks.append(abs(f1 - f2) < 1e-10 and 0.0 <= f1 <= 1.0 + 1e-12)
        oks.append(abs(metrics.fidelity(rho, rho) - 1.0) < 1e-10)
        return all(oks), f"pearson/fidelity identities ({sum(oks)}/4)"

    def integrator_order():
        p = SystemParams(omega_x=1.0, omega_c=1.3, g=1.0, kappa=0.2, gamma_x=0.05,
                         n_max_photons=1)
        po = build_operators(p)
        rhs = lindblad.lindblad_rhs_fn(p, po)
        rho0 = core.projector(2, p.dim)
        ref = integrate(rhs, rho0, IntegrationSpec.uniform(4.0, 2, dt_or_tol=1e-12))[-1]
        errs = []
        for dt in (0.08, 0.04):
            spec = IntegrationSpec.uniform(4.0, 2, method="rk4", dt_or_tol=dt)
            errs.append(float(np.max(np.abs(integrate(rhs, rho0, spec)[-1] - ref))))
        factor = errs[0] / errs[1]
        return 12.0 <= factor <= 20.0, f"halving factor {factor:.2f}"

    def vacuum_steady_state():
        p = SystemParams(omega_x=3.0, omega_c=3.0, g=1.0, kappa=0.1, gamma_x=0.01,
                         n_max_photons=2)
        rho = steady.lindblad_steady_state(p)
        dev = float(np.max(np.abs(rho - core.projector(0, p.dim))))
        return dev < 1e-10, f"|rho_ss - vacuum| = {dev:.1e}"

    return (
        ("operator invariants", operator_invariants),
        ("dissipators traceless", dissipator_traceless),
        ("cascade rhs = master rhs", rhs_equivalence),
        ("reduced first-rung system", reduced_system),
        ("metric properties", metric_properties),
        ("integrator order 4", integrator_order),
        ("loss-only steady state is the vacuum", vacuum_steady_state),
    )


def run_self_checks(verbose: bool = False) -> bool:
    all_ok = True
    for name, fn in _checks():
        try:
            ok, detail = fn()
        except Exception as exc:  # a check crashing is a failure, not an abort
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        all_ok &= ok
        if verbose:
            print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return all_ok
