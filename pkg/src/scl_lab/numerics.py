"""Small dense linear algebra, fixed-step ODE integration, and Riccati synthesis.

Everything here operates on plain numpy arrays: vectors are 1-D float64
arrays, matrices are 2-D.  The routines are sized for desk-scale control
problems (state dimension <= 8) and favour determinism over generality:
fixed-step RK4, central finite differences, closed-form eigenvalues up to
3x3 with a LAPACK fallback above.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np
import scipy.linalg

# Default integration step for all benchmark simulations (seconds).
DEFAULT_DT = 1e-3

# Central finite-difference step for Jacobians.
FD_STEP = 1e-5

# |x|_inf beyond this declares the trajectory divergent.
DIVERGENCE_LIMIT = 1e6

# A matrix is Hurwitz when every eigenvalue real part is below this margin.
HURWITZ_MARGIN = -1e-9

MAX_EIG_DIM = 8


class NonFiniteState(RuntimeError):
    """A state or derivative evaluation produced NaN or Inf."""

    def __init__(self, t: float, what: str = "state"):
        super().__init__(f"non-finite {what} at t={t:.6g}")
        self.t = t


class DivergenceDetected(RuntimeError):
    """State norm exceeded DIVERGENCE_LIMIT; carries the partial trajectory."""

    def __init__(self, t: float, samples: list):
        super().__init__(f"|x|_inf exceeded {DIVERGENCE_LIMIT:g} at t={t:.6g}")
        self.t = t
        self.samples = samples


class NoConvergence(RuntimeError):
    """An iterative numerical routine failed to converge."""


class NotStabilizable(RuntimeError):
    """No stabilizing feedback exists (or none was found) for the pair (A, B)."""


def as_vector(x, dim: Optional[int] = None, name: str = "x") -> np.ndarray:
    v = np.atleast_1d(np.asarray(x, dtype=float))
    if v.ndim != 1:
        raise ValueError(f"{name} must be a 1-D vector, got shape {v.shape}")
    if dim is not None and v.shape[0] != dim:
        raise ValueError(f"{name} must have dimension {dim}, got {v.shape[0]}")
    return v


def as_matrix(M, rows: Optional[int] = None, cols: Optional[int] = None,
              name: str = "M") -> np.ndarray:
    A = np.asarray(M, dtype=float)
    if A.ndim != 2:
        raise ValueError(f"{name} must be a 2-D matrix, got shape {A.shape}")
    if rows is not None and A.shape[0] != rows:
        raise ValueError(f"{name} must have {rows} rows, got {A.shape[0]}")
    if cols is not None and A.shape[1] != cols:
        raise ValueError(f"{name} must have {cols} columns, got {A.shape[1]}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} has non-finite entries")
    return A


def rk4_step(f: Callable, t: float, x: np.ndarray, dt: float) -> np.ndarray:
    """One classical 4th-order Runge-Kutta step of x' = f(t, x).

    Deterministic for identical inputs.  Raises NonFiniteState when the
    combined update is not finite (a NaN or Inf at any stage propagates
    into the sum).
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    k1 = f(t, x)
    k2 = f(t + 0.5 * dt, x + 0.5 * dt * k1)
    k3 = f(t + 0.5 * dt, x + 0.5 * dt * k2)
    k4 = f(t + dt, x + dt * k3)
    out = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise NonFiniteState(t, "RK4 update")
    return out


def step_count(t0: float, t_end: float, dt: float) -> int:
    """Number of RK4 steps covering [t0, t_end]; dt must divide the span."""
    if t_end <= t0:
        raise ValueError("t_end must exceed t0")
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    span = t_end - t0
    n = int(round(span / dt))
    if n < 1 or abs(n * dt - span) > 1e-9:
        raise ValueError(f"dt={dt:g} does not divide the span {span:g}")
    return n


def integrate(f: Callable, x0, t0: float, t_end: float, dt: float,
              observer_hook: Optional[Callable] = None) -> List[Tuple[float, np.ndarray]]:
    """Fixed-step RK4 trajectory of x' = f(t, x) over [t0, t_end].

    Returns ``1 + (t_end - t0)/dt`` samples of (t, x).  The optional
    ``observer_hook(t, x)`` runs once per step, after the state update.
    Raises DivergenceDetected (carrying the partial trajectory, divergent
    sample included) as soon as |x|_inf exceeds DIVERGENCE_LIMIT.
    """
    x = as_vector(x0)
    n = step_count(t0, t_end, dt)
    samples = [(t0, x.copy())]
    for k in range(n):
        t = t0 + k * dt
        x = rk4_step(f, t, x, dt)
        t_next = t0 + (k + 1) * dt
        samples.append((t_next, x.copy()))
        if observer_hook is not None:
            observer_hook(t_next, x)
        if np.max(np.abs(x)) > DIVERGENCE_LIMIT:
            raise DivergenceDetected(t_next, samples)
    return samples


def jacobian_fd(f: Callable, x0, u0, h: float = FD_STEP) -> Tuple[np.ndarray, np.ndarray]:
    """Central-difference Jacobians (A, B) of f(x, u) at (x0, u0).

    A[i, j] = (f_i(x0 + h e_j, u0) - f_i(x0 - h e_j, u0)) / (2 h), and the
    analogous expression over u for B.  Exact for affine fields up to
    round-off.
    """
    if h <= 0.0:
        raise ValueError("h must be positive")
    x0 = as_vector(x0, name="x0")
    u0 = as_vector(u0, name="u0")
    n = x0.shape[0]
    m = u0.shape[0]

    def probe(x, u):
        val = np.asarray(f(x, u), dtype=float)
        if not np.all(np.isfinite(val)):
            raise NonFiniteState(0.0, "finite-difference probe")
        return val

    A = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        A[:, j] = (probe(x0 + e, u0) - probe(x0 - e, u0)) / (2.0 * h)
    B = np.empty((n, m))
    for j in range(m):
        e = np.zeros(m)
        e[j] = h
        B[:, j] = (probe(x0, u0 + e) - probe(x0, u0 - e)) / (2.0 * h)
    return A, B


def _roots_quadratic(c1: float, c0: float) -> np.ndarray:
    # x^2 + c1 x + c0
    disc = c1 * c1 - 4.0 * c0
    if disc >= 0.0:
        s = math.sqrt(disc)
        # Avoid cancellation: compute the larger-magnitude root first.
        if c1 >= 0.0:
            r1 = (-c1 - s) / 2.0
        else:
            r1 = (-c1 + s) / 2.0
        r2 = c0 / r1 if r1 != 0.0 else (-c1 - r1)
        return np.array([r1, r2], dtype=complex)
    s = math.sqrt(-disc) / 2.0
    return np.array([complex(-c1 / 2.0, s), complex(-c1 / 2.0, -s)])


def _roots_cubic(c2: float, c1: float, c0: float) -> np.ndarray:
    # x^3 + c2 x^2 + c1 x + c0, real coefficients.
    shift = c2 / 3.0
    p = c1 - 3.0 * shift * shift
    q = 2.0 * shift ** 3 - shift * c1 + c0
    scale_p = max(abs(c1), 3.0 * shift * shift, 1.0e-300)
    scale_q = max(abs(c0), abs(shift * c1), 2.0 * abs(shift) ** 3, 1.0e-300)
    if abs(p) <= 1e-12 * scale_p and abs(q) <= 1e-12 * scale_q:
        # Triple root; exact for observer-gain companion matrices.
        return np.full(3, complex(-shift))
    disc = -4.0 * p ** 3 - 27.0 * q ** 2
    disc_scale = 4.0 * abs(p) ** 3 + 27.0 * q * q
    if abs(disc) <= 1e-10 * disc_scale:
        # One simple and one double real root.
        t1 = 3.0 * q / p
        t2 = -t1 / 2.0
        ts = np.array([t1, t2, t2], dtype=complex)
    elif disc > 0.0:
        # Three distinct real roots (requires p < 0): trigonometric form.
        r = 2.0 * math.sqrt(-p / 3.0)
        arg = 3.0 * q / (p * r)
        arg = min(1.0, max(-1.0, arg))
        theta = math.acos(arg)
        ts = np.array([r * math.cos((theta - 2.0 * math.pi * k) / 3.0)
                       for k in range(3)], dtype=complex)
    else:
        # One real root and a complex pair: Cardano with a stable cube root.
        s = math.sqrt(q * q / 4.0 + p ** 3 / 27.0)
        if q >= 0.0:
            u = -_cbrt(q / 2.0 + s)
        else:
            u = _cbrt(-q / 2.0 + s)
        v = -p / (3.0 * u)
        t_real = u + v
        re = -t_real / 2.0
        im = (math.sqrt(3.0) / 2.0) * (u - v)
        ts = np.array([complex(t_real), complex(re, im), complex(re, -im)])
    return ts - shift


def _cbrt(x: float) -> float:
    return math.copysign(abs(x) ** (1.0 / 3.0), x)


def eigenvalues(M) -> np.ndarray:
    """Eigenvalues of a small square matrix.

    Uses characteristic-polynomial closed forms for n <= 3 (so repeated
    observer-gain poles come out exact) and LAPACK above that, up to
    n = 8.
    """
    A = as_matrix(M)
    n, cols = A.shape
    if n != cols:
        raise ValueError(f"matrix must be square, got {A.shape}")
    if n > MAX_EIG_DIM:
        raise ValueError(f"eigenvalues supports n <= {MAX_EIG_DIM}, got {n}")
    if n == 1:
        return np.array([complex(A[0, 0])])
    if n == 2:
        tr = A[0, 0] + A[1, 1]
        det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
        return _roots_quadratic(-tr, det)
    if n == 3:
        c2 = -(A[0, 0] + A[1, 1] + A[2, 2])
        c1 = (A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
              + A[0, 0] * A[2, 2] - A[0, 2] * A[2, 0]
              + A[1, 1] * A[2, 2] - A[1, 2] * A[2, 1])
        c0 = -np.linalg.det(A)
        return _roots_cubic(c2, c1, c0)
    try:
        return np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(f"eigenvalue iteration failed: {exc}") from exc


def is_hurwitz(M) -> bool:
    """True when every eigenvalue real part is below -1e-9."""
    return bool(np.max(eigenvalues(M).real) < HURWITZ_MARGIN)


@dataclass
class CareProblem:
    """Data for the continuous algebraic Riccati equation.

    A'P + PA - P B R^-1 B' P + Q = 0 with Q symmetric PSD and R symmetric
    positive definite.
    """

    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        self.A = as_matrix(self.A, name="A")
        n = self.A.shape[0]
        if self.A.shape[1] != n:
            raise ValueError("A must be square")
        self.B = as_matrix(self.B, rows=n, name="B")
        m = self.B.shape[1]
        self.Q = as_matrix(self.Q, rows=n, cols=n, name="Q")
        self.R = as_matrix(self.R, rows=m, cols=m, name="R")
        if np.max(np.abs(self.Q - self.Q.T)) > 1e-12:
            raise ValueError("Q must be symmetric within 1e-12")
        try:
            np.linalg.cholesky(self.R)
        except np.linalg.LinAlgError as exc:
            raise ValueError("R must be symmetric positive definite") from exc


def care_residual(p: CareProblem, P: np.ndarray) -> float:
    """Infinity norm of the Riccati residual at P."""
    RiBtP = np.linalg.solve(p.R, p.B.T @ P)
    res = p.A.T @ P + P @ p.A - P @ p.B @ RiBtP + p.Q
    return float(np.max(np.abs(res)))


def solve_care(p: CareProblem) -> Tuple[np.ndarray, np.ndarray]:
    """Solve the CARE and return (P, K) with K = R^-1 B' P.

    The returned P is symmetric PSD with residual below
    1e-8 * (1 + |P|_inf^2), and A - B K is verified Hurwitz.  Raises
    NotStabilizable when no stabilizing solution exists and NoConvergence
    when the solver result fails the residual bound.
    """
    try:
        P = scipy.linalg.solve_continuous_are(p.A, p.B, p.Q, p.R)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError, ValueError) as exc:
        raise NotStabilizable(f"CARE solve failed: {exc}") from exc
    P = 0.5 * (P + P.T)
    res = care_residual(p, P)
    bound = 1e-8 * (1.0 + float(np.max(np.abs(P))) ** 2)
    if not np.isfinite(res) or res > bound:
        raise NoConvergence(f"CARE residual {res:.3e} exceeds bound {bound:.3e}")
    K = np.linalg.solve(p.R, p.B.T @ P)
    if not is_hurwitz(p.A - p.B @ K):
        raise NotStabilizable("closed loop A - B K is not Hurwitz")
    return P, K


class DelayLine:
    """Pure transport delay quantized to the integration grid.

    Holds round(delay/dt) samples; until the line fills, the output is
    ``fill_value``.  A zero delay is the identity.
    """

    def __init__(self, delay: float, dt: float, fill_value: float = 0.0):
        if delay < 0.0:
            raise ValueError("delay must be non-negative")
        if dt <= 0.0:
            raise ValueError("dt must be positive")
        self.delay = float(delay)
        self.dt = float(dt)
        self.fill_value = float(fill_value)
        self.steps = int(round(delay / dt))
        self._buf: deque = deque([self.fill_value] * self.steps, maxlen=self.steps or 1)

    def push(self, sample: float) -> float:
        """Feed one sample in, pop the sample from round(delay/dt) steps ago."""
        if self.steps == 0:
            return float(sample)
        out = self._buf.popleft()
        self._buf.append(float(sample))
        return out

    def reset(self):
        self._buf = deque([self.fill_value] * self.steps, maxlen=self.steps or 1)

    def __len__(self) -> int:
        return self.steps
