"""Basis, operators, and superoperator actions for a two-level system coupled
to a single truncated cavity mode.

The flat basis interleaves the TLS within each photon level:

    flat index = 2*photons + (0 for G, 1 for X)   ->   G0, X0, G1, X1, ...

so the states of excitation rung n, {|G,n>, |X,n-1>}, sit on adjacent flat
indices 2n and 2n - 1.  The excitation number of a flat index i is
i//2 + i%2, and rung n is the eigenspace of the excitation operator
N = a'a + s's with eigenvalue n.

All operators are dense complex matrices; the dimensions used here never
exceed a few hundred, so sparse machinery is not warranted.  Constructors
return read-only arrays, and every operation below is a pure function, so
values can be shared freely between threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, CutoffError, IntegrationDrift, NumericsError

TLS_GROUND = "G"
TLS_EXCITED = "X"

#: Default tolerances for density-matrix invariant checks.
HERM_TOL = 1e-10
TRACE_TOL = 1e-9
PSD_TOL = 1e-8
#: Default ceiling on the truncation-indicator population along a trajectory.
EPS_CUT = 1e-8


@dataclass(frozen=True)
class SystemParams:
    """Physical rates of the damped, pumped TLS-cavity model.

    All frequencies and rates are in units of the light-matter coupling g
    (g itself defaults to 1 and fixes the unit system); times are in units
    of 1/g.

    Attributes
    ----------
    omega_x, omega_c : float
        TLS and cavity-mode frequencies.
    g : float
        Light-matter coupling, > 0.
    kappa : float
        Cavity photon leakage rate, >= 0.
    gamma_x : float
        TLS spontaneous-emission rate, >= 0.
    pump_p : float
        Linear cavity-photon pump rate, >= 0.  A normalizable steady state
        additionally requires pump_p < kappa; that is enforced where a
        steady state is actually requested, not here.
    n_max_photons : int
        Fock-space cutoff; photon numbers 0..n_max_photons are retained.
    """

    omega_x: float
    omega_c: float
    g: float = 1.0
    kappa: float = 0.0
    gamma_x: float = 0.0
    pump_p: float = 0.0
    n_max_photons: int = 1

    def __post_init__(self):
        if not self.g > 0:
            raise ConfigError(f"coupling g must be positive, got {self.g}")
        for name in ("kappa", "gamma_x", "pump_p"):
            value = getattr(self, name)
            if value < 0 or not np.isfinite(value):
                raise ConfigError(f"rate {name} must be finite and >= 0, got {value}")
        if int(self.n_max_photons) != self.n_max_photons or self.n_max_photons < 0:
            raise ConfigError(
                f"n_max_photons must be a nonnegative integer, got {self.n_max_photons}"
            )

    @property
    def dim(self) -> int:
        """Dimension of the truncated joint Hilbert space, 2*(n_max_photons+1)."""
        return 2 * (self.n_max_photons + 1)


@dataclass(frozen=True)
class BasisIndex:
    """A bare state |tls, photons> of the joint basis."""

    tls: str
    photons: int

    def __post_init__(self):
        if self.tls not in (TLS_GROUND, TLS_EXCITED):
            raise ConfigError(f"tls state must be 'G' or 'X', got {self.tls!r}")
        if int(self.photons) != self.photons or self.photons < 0:
            raise ConfigError(f"photon number must be a nonnegative integer, got {self.photons}")

    @property
    def flat(self) -> int:
        """Flat index 2*photons + (0 for G, 1 for X)."""
        return 2 * self.photons + (1 if self.tls == TLS_EXCITED else 0)

    @property
    def excitation(self) -> int:
        """Excitation number photons + (1 if the TLS is excited)."""
        return self.photons + (1 if self.tls == TLS_EXCITED else 0)

    @classmethod
    def from_flat(cls, index: int) -> "BasisIndex":
        if index < 0:
            raise ConfigError(f"flat index must be >= 0, got {index}")
        return cls(TLS_EXCITED if index % 2 else TLS_GROUND, index // 2)

    @property
    def label(self) -> str:
        return f"{self.tls}{self.photons}"

    @classmethod
    def from_label(cls, label: str) -> "BasisIndex":
        label = label.strip()
        if len(label) < 2 or label[0] not in (TLS_GROUND, TLS_EXCITED) or not label[1:].isdigit():
            raise ConfigError(f"cannot parse basis label {label!r} (expected e.g. 'G0', 'X1')")
        return cls(label[0], int(label[1:]))


def excitation_numbers(dim: int) -> np.ndarray:
    """Excitation number of every flat index, as an int array of length `dim`."""
    i = np.arange(dim)
    return i // 2 + i % 2


def photon_numbers(dim: int) -> np.ndarray:
    """Photon number of every flat index."""
    return np.arange(dim) // 2


def basis_labels(dim: int) -> list[str]:
    return [BasisIndex.from_flat(i).label for i in range(dim)]


@dataclass(frozen=True)
class OperatorSet:
    """Precomputed operators on the truncated joint space.

    h_jc = omega_x s's + omega_c a'a + g (s a' + a s') is Hermitian and
    commutes exactly with n_op (both are assembled from exact integer
    diagonals, so the commutator vanishes bitwise).  On the truncated space
    [a, a'] = I - (n_max+1) P_top, where P_top projects onto the top Fock
    level; that truncation artifact is asserted in tests, not hidden.
    """

    a: np.ndarray
    a_dag: np.ndarray
    sigma: np.ndarray
    sigma_dag: np.ndarray
    h_jc: np.ndarray
    n_op: np.ndarray

    @property
    def dim(self) -> int:
        return self.a.shape[0]


def _read_only(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def build_operators(params: SystemParams) -> OperatorSet:
    """Construct the operator set of the model on the truncated space."""
    n_max = params.n_max_photons
    if n_max == 0 and params.pump_p > 0:
        raise ConfigError("pumping requested with n_max_photons = 0: no room to pump")
    dim = params.dim

    a = np.zeros((dim, dim), dtype=complex)
    for p in range(1, n_max + 1):
        amp = np.sqrt(p)
        a[2 * (p - 1), 2 * p] = amp          # |G,p> -> |G,p-1>
        a[2 * (p - 1) + 1, 2 * p + 1] = amp  # |X,p> -> |X,p-1>
    sigma = np.zeros((dim, dim), dtype=complex)
    for p in range(n_max + 1):
        sigma[2 * p, 2 * p + 1] = 1.0        # |X,p> -> |G,p>

    a_dag = a.conj().T.copy()
    sigma_dag = sigma.conj().T.copy()

    # Exact integer diagonals keep [h_jc, n_op] = 0 bitwise; building a'a as a
    # product would round (sqrt(p))**2 away from p.
    ph = photon_numbers(dim).astype(float)
    tls = (np.arange(dim) % 2).astype(float)
    h_jc = (
        params.omega_x * np.diag(tls).astype(complex)
        + params.omega_c * np.diag(ph).astype(complex)
        + params.g * (sigma @ a_dag + a @ sigma_dag)
    )
    n_op = np.diag(excitation_numbers(dim).astype(float)).astype(complex)

    return OperatorSet(
        a=_read_only(a),
        a_dag=_read_only(a_dag),
        sigma=_read_only(sigma),
        sigma_dag=_read_only(sigma_dag),
        h_jc=_read_only(h_jc),
        n_op=_read_only(n_op),
    )


def _check_dims(x: np.ndarray, rho: np.ndarray):
    if x.shape[-1] != x.shape[-2]:
        raise ValueError(f"operator must be square, got shape {x.shape}")
    if rho.shape[-1] != rho.shape[-2] or rho.shape[-1] != x.shape[-1]:
        raise ValueError(f"dimension mismatch: operator {x.shape}, state {rho.shape}")


def dagger(x: np.ndarray) -> np.ndarray:
    """Conjugate transpose over the last two axes."""
    return x.conj().swapaxes(-1, -2)


def hermitian_flow(x: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """i (rho x' - x rho).

    For Hermitian x this is i [rho, x], the generator of the unitary part of
    the dynamics; for anti-Hermitian x it is -i {x, rho}.  Broadcasts over
    leading axes of `rho`.
    """
    _check_dims(x, rho)
    return 1j * (rho @ dagger(x) - x @ rho)


def lindblad_dissipator(x: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """2 x rho x' - x'x rho - rho x'x (traceless and Hermitian for Hermitian rho)."""
    _check_dims(x, rho)
    xdx = dagger(x) @ x
    return 2.0 * (x @ rho @ dagger(x)) - xdx @ rho - rho @ xdx


def jump_transfer(x: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """x rho x'; preserves positive semidefiniteness."""
    _check_dims(x, rho)
    return x @ rho @ dagger(x)


def rung_projector(n: int, rho: np.ndarray) -> np.ndarray:
    """Keep only the matrix elements whose row and column excitation both equal n.

    Summing the projections over all integer n in [0, n_max_photons + 1]
    recovers the excitation-diagonal part of rho; inter-rung coherences live
    in blocks with unequal row/column excitation and are zeroed for every n.
    """
    dim = rho.shape[-1]
    exc = excitation_numbers(dim)
    if int(n) != n or n < 0 or n > exc.max():
        raise ValueError(f"rung index {n} outside [0, {exc.max()}]")
    keep = exc == n
    mask = np.outer(keep, keep)
    return rho * mask


def block_mask(dim: int, row_exc: int, col_exc: int) -> np.ndarray:
    """Boolean mask of the (row rung, column rung) block of a dim x dim matrix."""
    exc = excitation_numbers(dim)
    return np.outer(exc == row_exc, exc == col_exc)


def projector(state: BasisIndex | int | str, dim: int) -> np.ndarray:
    """Rank-1 projector |state><state| on the flat basis."""
    if isinstance(state, str):
        state = BasisIndex.from_label(state)
    flat = state.flat if isinstance(state, BasisIndex) else int(state)
    if not 0 <= flat < dim:
        raise ConfigError(f"basis state index {flat} outside dimension {dim}")
    rho = np.zeros((dim, dim), dtype=complex)
    rho[flat, flat] = 1.0
    return rho


def validate_density_matrix(
    rho: np.ndarray,
    *,
    herm_tol: float = HERM_TOL,
    trace_tol: float = TRACE_TOL,
    psd_tol: float = PSD_TOL,
    check_trace: bool = True,
    check_psd: bool = True,
    what: str = "density matrix",
):
    """Raise NumericsError if `rho` violates hermiticity/trace/positivity tolerances.

    Hermiticity is checked relative to the largest entry magnitude.
    """
    scale = max(1.0, float(np.max(np.abs(rho))))
    herm = float(np.max(np.abs(rho - dagger(rho))))
    if herm > herm_tol * scale:
        raise NumericsError(f"{what} is not Hermitian: max |rho - rho'| = {herm:.3e}")
    if check_trace:
        tr_dev = float(np.max(np.abs(np.einsum("...ii->...", rho) - 1.0)))
        if tr_dev > trace_tol:
            raise NumericsError(f"{what} trace deviates from 1 by {tr_dev:.3e}")
    if check_psd:
        min_eig = float(np.linalg.eigvalsh(0.5 * (rho + dagger(rho))).min())
        if min_eig < -psd_tol:
            raise NumericsError(f"{what} has negative eigenvalue {min_eig:.3e}")


def truncation_indicator(states: np.ndarray, params: SystemParams) -> np.ndarray:
    """Population on the states where the truncated operator algebra is inexact.

    Without pumping only the top rung |X, n_max> is affected (the raising part
    of h_jc is clipped there); with pumping the whole top Fock level
    {|G,n_max>, |X,n_max>} is affected because a' is clipped on it.  Returns
    the summed population over that index set for each leading-axis entry of
    `states`.
    """
    dim = states.shape[-1]
    idx = [dim - 1] if params.pump_p == 0 else [dim - 2, dim - 1]
    pop = np.zeros(states.shape[:-2])
    for i in idx:
        pop = pop + states[..., i, i].real
    return pop


def validate_trajectory(
    times: np.ndarray,
    states: np.ndarray,
    params: SystemParams,
    *,
    herm_tol: float = HERM_TOL,
    trace_tol: float = TRACE_TOL,
    psd_tol: float = PSD_TOL,
    eps_cut: float | None = EPS_CUT,
    check_psd: bool = True,
    what: str = "trajectory",
):
    """Check invariants along sampled states (leading axis = time).

    Raises CutoffError with the first offending time when the truncation
    indicator exceeds `eps_cut`, and NumericsError for trace/hermiticity/
    positivity violations.
    """
    tr_dev = np.abs(np.einsum("...ii->...", states) - 1.0)
    if tr_dev.max() > trace_tol:
        k = int(np.argmax(tr_dev.reshape(len(times), -1).max(axis=1)))
        raise IntegrationDrift(
            f"{what}: trace drift {tr_dev.max():.3e} exceeds {trace_tol:.1e}", times[k]
        )
    herm = np.abs(states - dagger(states)).reshape(len(times), -1).max(axis=1)
    if herm.max() > herm_tol:
        k = int(np.argmax(herm))
        raise IntegrationDrift(
            f"{what}: hermiticity drift {herm.max():.3e} exceeds {herm_tol:.1e}", times[k]
        )
    if check_psd:
        eigs = np.linalg.eigvalsh(0.5 * (states + dagger(states)))
        min_eig = eigs.reshape(len(times), -1).min(axis=1)
        if min_eig.min() < -psd_tol:
            k = int(np.argmin(min_eig))
            raise IntegrationDrift(
                f"{what}: negative eigenvalue {min_eig.min():.3e} below -{psd_tol:.1e}",
                times[k],
            )
    if eps_cut is not None:
        pop = truncation_indicator(states, params).reshape(len(times), -1).max(axis=1)
        if pop.max() >= eps_cut:
            k = int(np.argmax(pop >= eps_cut))
            raise CutoffError(
                f"{what}: truncation-indicator population {pop.max():.3e} reached "
                f"eps_cut = {eps_cut:.1e}; increase n_max_photons",
                times[k],
            )
