"""Fixed-step and adaptive integration of complex-array-valued ODEs.

Both schemes land exactly on every requested sample time by clipping the step
(no interpolation is used for the returned samples).  The adaptive scheme is
the Dormand-Prince 5(4) embedded pair; its per-step local error is controlled
in the mixed norm

    err = max over entries of |e| / (1 + |y|),

which keeps tiny matrix entries from dominating while still bounding the
absolute error of order-one entries.  Everything here is deterministic:
identical inputs give bit-identical outputs within one build.

The state may be an ndarray of any shape (a matrix, a stacked batch of
matrices, a vector); the right-hand side must map (t, y) -> array of the same
shape.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, IntegrationError

RK45 = "rk45"
RK4 = "rk4"

# Dormand-Prince 5(4) tableau.
_DP_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_B5 = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
# b5 - b4: coefficients of the embedded error estimate.
_DP_E = (
    71 / 57600,
    0.0,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)

_MAX_FACTOR = 5.0
_MIN_FACTOR = 0.2
_SAFETY = 0.9


@dataclass(frozen=True)
class IntegrationSpec:
    """What to integrate over: the window, the sample times, and the scheme.

    dt_or_tol is the fixed step for method "rk4" and the mixed-norm local
    error tolerance for method "rk45".
    """

    t_start: float
    t_end: float
    sample_times: tuple[float, ...]
    method: str = RK45
    dt_or_tol: float = 1e-10

    def __post_init__(self):
        if not np.isfinite(self.t_start) or not np.isfinite(self.t_end):
            raise ConfigError("integration window must be finite")
        if not self.t_start < self.t_end:
            raise ConfigError(f"need t_start < t_end, got [{self.t_start}, {self.t_end}]")
        if self.method not in (RK45, RK4):
            raise ConfigError(f"unknown method {self.method!r} (expected 'rk45' or 'rk4')")
        if not self.dt_or_tol > 0:
            raise ConfigError(f"dt_or_tol must be positive, got {self.dt_or_tol}")
        ts = np.asarray(self.sample_times, dtype=float)
        if ts.size == 0:
            raise ConfigError("sample_times must be nonempty")
        if np.any(np.diff(ts) <= 0):
            raise ConfigError("sample_times must be strictly increasing")
        if ts[0] < self.t_start or ts[-1] > self.t_end:
            raise ConfigError("sample_times must lie within [t_start, t_end]")
        object.__setattr__(self, "sample_times", tuple(float(t) for t in ts))

    @classmethod
    def uniform(cls, t_end, n_samples, *, t_start=0.0, method=RK45, dt_or_tol=1e-10):
        """n_samples uniformly spaced sample times on [t_start, t_end]."""
        ts = np.linspace(t_start, t_end, int(n_samples))
        return cls(t_start=float(t_start), t_end=float(t_end),
                   sample_times=tuple(ts), method=method, dt_or_tol=dt_or_tol)

    @property
    def times(self) -> np.ndarray:
        return np.asarray(self.sample_times, dtype=float)


@dataclass(frozen=True)
class Trajectory:
    """Sampled states of one solver run; times strictly increasing."""

    times: np.ndarray
    states: np.ndarray  # shape (len(times), dim, dim)
    solver_tag: str

    def __len__(self) -> int:
        return len(self.times)

    @property
    def dim(self) -> int:
        return self.states.shape[-1]

    def element(self, row: int, col: int) -> np.ndarray:
        """Complex time series of one matrix element."""
        return self.states[:, row, col]


class DenseOutput:
    """Piecewise cubic Hermite interpolant built from accepted integrator steps."""

    def __init__(self, ts, ys, fs):
        self.ts = np.asarray(ts, dtype=float)
        self.ys = np.asarray(ys)
        self.fs = np.asarray(fs)
        if len(self.ts) < 2:
            # Degenerate single-node output (constant).
            self.ts = np.concatenate([self.ts, self.ts + 1.0])
            self.ys = np.concatenate([self.ys, self.ys[:1]])
            self.fs = np.concatenate([self.fs, np.zeros_like(self.fs[:1])])

    def __call__(self, t: float) -> np.ndarray:
        k = int(np.searchsorted(self.ts, t, side="right")) - 1
        k = min(max(k, 0), len(self.ts) - 2)
        t0, t1 = self.ts[k], self.ts[k + 1]
        h = t1 - t0
        s = (t - t0) / h
        y0, y1 = self.ys[k], self.ys[k + 1]
        f0, f1 = self.fs[k], self.fs[k + 1]
        h00 = (1 + 2 * s) * (1 - s) ** 2
        h10 = s * (1 - s) ** 2
        h01 = s * s * (3 - 2 * s)
        h11 = s * s * (s - 1)
        return h00 * y0 + (h10 * h) * f0 + h01 * y1 + (h11 * h) * f1


def _err_norm(err: np.ndarray, y_ref: np.ndarray) -> float:
    return float(np.max(np.abs(err) / (1.0 + np.abs(y_ref))))


def integrate(rhs, y0, spec: IntegrationSpec, *, post_step=None, dense: bool = False):
    """Integrate dy/dt = rhs(t, y) and return the states at spec.sample_times.

    Returns an ndarray of shape (n_samples, *y0.shape), or a tuple
    (samples, DenseOutput) when dense=True.  `post_step`, if given, is applied
    to the state after every accepted step (debugging hook, e.g. trace
    renormalization); it must return the adjusted state.

    Raises IntegrationError on step-size underflow or a non-finite right-hand
    side, reporting the failing time.
    """
    y = np.array(y0, dtype=complex)
    if spec.method == RK4:
        return _run_rk4(rhs, y, spec, post_step, dense)
    return _run_dp54(rhs, y, spec, post_step, dense)


def _underflow_limit(t: float) -> float:
    return 16.0 * np.finfo(float).eps * max(1.0, abs(t))


def _run_dp54(rhs, y, spec, post_step, dense):
    tol = spec.dt_or_tol
    samples = spec.times
    out = np.empty((len(samples),) + y.shape, dtype=complex)
    node_t, node_y, node_f = [], [], []

    t = spec.t_start
    k1 = np.asarray(rhs(t, y))
    if not np.all(np.isfinite(k1.view(float))):
        raise IntegrationError("non-finite right-hand side", time=t)

    idx = 0
    if samples[0] == t:
        out[0] = y
        idx = 1
    if dense:
        node_t.append(t)
        node_y.append(y.copy())
        node_f.append(k1.copy())

    # Initial step guess; the controller corrects it within a few steps.
    scale = _err_norm(k1, y)
    h = min(spec.t_end - spec.t_start, 0.01 * (1.0 + float(np.max(np.abs(y)))) / (scale + 1e-12))
    h = max(h, _underflow_limit(t))

    ks = [k1] + [None] * 6
    while idx < len(samples):
        target = samples[idx]
        clipped = t + h >= target
        h_step = target - t if clipped else h
        if h_step <= 0:
            # Landed on the sample within rounding.
            t = target
            while idx < len(samples) and samples[idx] <= t:
                out[idx] = y
                idx += 1
            continue
        if not clipped and h_step < _underflow_limit(t):
            raise IntegrationError("step size underflow", time=t)

        for i in range(1, 7):
            yi = y + h_step * sum(a * ks[j] for j, a in enumerate(_DP_A[i]) if a != 0.0)
            ks[i] = np.asarray(rhs(t + _DP_C[i] * h_step, yi))
        y_new = y + h_step * sum(b * ks[i] for i, b in enumerate(_DP_B5) if b != 0.0)
        err = h_step * sum(e * ks[i] for i, e in enumerate(_DP_E) if e != 0.0)

        err_norm = _err_norm(err, y_new)
        if not np.isfinite(err_norm):
            raise IntegrationError("non-finite right-hand side", time=t)

        if err_norm <= tol:
            t_new = target if clipped else t + h_step
            y = y_new
            if post_step is not None:
                y = post_step(y)
                ks[6] = np.asarray(rhs(t_new, y))
            t = t_new
            k1 = ks[6]  # FSAL
            ks[0] = k1
            if dense:
                node_t.append(t)
                node_y.append(y.copy())
                node_f.append(k1.copy())
            while idx < len(samples) and samples[idx] <= t:
                out[idx] = y
                idx += 1
            factor = _MAX_FACTOR if err_norm == 0.0 else min(
                _MAX_FACTOR, _SAFETY * (tol / err_norm) ** 0.2
            )
            proposed = h_step * factor
            # A clipped step is shorter than the controller asked for; passing
            # it must not shrink the nominal step.
            h = max(proposed, h) if clipped else proposed
            h = max(h, _underflow_limit(t))
        else:
            h = h_step * max(_MIN_FACTOR, _SAFETY * (tol / err_norm) ** 0.2)
            if h < _underflow_limit(t):
                raise IntegrationError("step size underflow", time=t)

    if dense:
        return out, DenseOutput(node_t, node_y, node_f)
    return out


def _run_rk4(rhs, y, spec, post_step, dense):
    h_nom = spec.dt_or_tol
    samples = spec.times
    out = np.empty((len(samples),) + y.shape, dtype=complex)
    node_t, node_y, node_f = [], [], []

    t = spec.t_start
    idx = 0
    if samples[0] == t:
        out[0] = y
        idx = 1
    if dense:
        f0 = np.asarray(rhs(t, y))
        node_t.append(t)
        node_y.append(y.copy())
        node_f.append(f0.copy())

    while idx < len(samples):
        target = samples[idx]
        clipped = h_nom >= target - t
        h = target - t if clipped else h_nom
        if h <= 0:
            t = target
            while idx < len(samples) and samples[idx] <= t:
                out[idx] = y
                idx += 1
            continue
        k1 = np.asarray(rhs(t, y))
        k2 = np.asarray(rhs(t + 0.5 * h, y + 0.5 * h * k1))
        k3 = np.asarray(rhs(t + 0.5 * h, y + 0.5 * h * k2))
        k4 = np.asarray(rhs(t + h, y + h * k3))
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(y.view(float))):
            raise IntegrationError("non-finite right-hand side", time=t)
        if post_step is not None:
            y = post_step(y)
        t = target if clipped else t + h
        if dense:
            node_t.append(t)
            node_y.append(y.copy())
            node_f.append(np.asarray(rhs(t, y)).copy())
        while idx < len(samples) and samples[idx] <= t:
            out[idx] = y
            idx += 1

    if dense:
        return out, DenseOutput(node_t, node_y, node_f)
    return out
