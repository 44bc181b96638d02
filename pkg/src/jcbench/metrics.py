"""Trajectory and state comparison measures.

pearson is the plain sample correlation coefficient of two real series;
fidelity is the Uhlmann measure F(rho, sigma) = [tr sqrt(sqrt(rho) sigma
sqrt(rho))]^2, equal to 1 exactly when the states coincide.  Matrix square
roots are taken through Hermitian eigendecomposition, with eigenvalues in
[-psd_tol, 0] clipped to 0: integrator noise routinely produces such tiny
negative eigenvalues and clipping them is the standard, documented remedy.
Anything below -psd_tol is treated as a genuinely non-positive input and
rejected.
"""

from __future__ import annotations

import numpy as np

from .core import PSD_TOL, BasisIndex, dagger
from .errors import ConstantSeriesError, NumericsError
from .integrate import Trajectory

PARTS = ("real", "imag", "abs")


def pearson(x, y) -> float:
    """Sample correlation coefficient of two equal-length real series.

    Raises ConstantSeriesError when either series has zero variance -- the
    coefficient is undefined there and this never returns NaN.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or y.ndim != 1 or x.shape != y.shape:
        raise ValueError(f"series must be 1-d and equal length, got {x.shape} and {y.shape}")
    if len(x) < 2:
        raise ValueError("need at least two points")
    dx = x - x.mean()
    dy = y - y.mean()
    sx = np.sqrt(np.dot(dx, dx))
    sy = np.sqrt(np.dot(dy, dy))
    if sx == 0.0 or sy == 0.0:
        raise ConstantSeriesError("correlation undefined: constant series")
    return float(np.dot(dx, dy) / (sx * sy))


def extract_part(series: np.ndarray, part: str) -> np.ndarray:
    if part == "real":
        return series.real
    if part == "imag":
        return series.imag
    if part == "abs":
        return np.abs(series)
    raise ValueError(f"unknown part {part!r} (expected one of {PARTS})")


def trajectory_correlation(
    a: Trajectory,
    b: Trajectory,
    element: tuple[BasisIndex, BasisIndex],
    part: str = "real",
) -> float:
    """pearson of one matrix element's series extracted from two trajectories.

    The trajectories must share their sample times exactly.  `element` is the
    (row, column) basis-state pair; `part` selects the real part, imaginary
    part, or modulus of the complex series.
    """
    if len(a.times) != len(b.times) or not np.array_equal(a.times, b.times):
        raise ValueError("trajectories are sampled on different time grids")
    row, col = element
    i = row.flat if isinstance(row, BasisIndex) else int(row)
    j = col.flat if isinstance(col, BasisIndex) else int(col)
    if not (0 <= i < a.dim and 0 <= j < a.dim):
        raise ValueError(f"element ({i}, {j}) outside dimension {a.dim}")
    return pearson(extract_part(a.element(i, j), part), extract_part(b.element(i, j), part))


def _sqrt_psd(rho: np.ndarray, psd_tol: float, what: str) -> np.ndarray:
    vals, vecs = np.linalg.eigh(rho)
    if vals.min() < -psd_tol:
        raise NumericsError(f"{what} has eigenvalue {vals.min():.3e} below -{psd_tol:.1e}")
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.conj().T


def fidelity(rho: np.ndarray, sigma: np.ndarray, *, psd_tol: float = PSD_TOL) -> float:
    """Uhlmann fidelity of two density matrices, in [0, 1].

    Computed as (sum_i sqrt(lambda_i))^2 over the eigenvalues of
    sqrt(rho) sigma sqrt(rho); symmetric in its arguments to ~1e-10 and equal
    to 1 iff rho = sigma (within tolerance).
    """
    if rho.shape != sigma.shape or rho.shape[-1] != rho.shape[-2]:
        raise ValueError(f"need equal square shapes, got {rho.shape} and {sigma.shape}")
    rho_h = 0.5 * (rho + dagger(rho))
    sigma_h = 0.5 * (sigma + dagger(sigma))
    sq = _sqrt_psd(rho_h, psd_tol, "first state")
    mid = sq @ sigma_h @ sq
    vals = np.linalg.eigvalsh(0.5 * (mid + dagger(mid)))
    if vals.min() < -psd_tol:
        raise NumericsError(f"second state has eigenvalue below -{psd_tol:.1e}")
    vals = np.clip(vals, 0.0, None)
    return float(np.sum(np.sqrt(vals)) ** 2)
