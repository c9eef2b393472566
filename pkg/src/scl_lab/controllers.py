"""Concrete control laws: PID, LQR state feedback, backstepping, the two
feedback-linearizing controllers with their singularity guards, and a
disturbance-rejection law built on a linear extended state observer.

All laws implement the small ControlLaw interface used by the simulation
harness: ``step(x, ref, t, dt) -> u`` plus ``reset``.  Laws are
deterministic for identical call sequences and single-owner mutable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .numerics import as_matrix, as_vector

# Feedback-linearizing input transforms are declared singular when the
# denominator magnitude drops below this.
SINGULAR_GUARD = 1e-6

# Denominators below this are counted as near-singular passes (input
# spike territory) without tripping the hard guard.
NEAR_SINGULAR = 1e-2


class SingularInput(RuntimeError):
    """The input transform denominator vanished (system uncontrollable there)."""

    def __init__(self, x2: float, denominator: float):
        super().__init__(
            f"singular input transform at x2={x2:.9g} (1 + cos x2 = {denominator:.3e})")
        self.x2 = x2
        self.denominator = denominator


class ControlLaw:
    """Uniform controller interface: measured state in, input vector out."""

    name = "law"

    def step(self, x, ref, t, dt) -> np.ndarray:
        raise NotImplementedError

    def reset(self):
        pass

    def components(self) -> Optional[dict]:
        """Per-step channel breakdown for the trace; None means defaults."""
        return None


@dataclass(frozen=True)
class PidGains:
    kp: float
    ki: float
    kd: float

    def __post_init__(self):
        for g in (self.kp, self.ki, self.kd):
            if not math.isfinite(g):
                raise ValueError("PID gains must be finite")


class Pid:
    """Textbook discrete PID on an error signal.

    Trapezoidal integral, backward-difference derivative, no derivative
    filter and no anti-windup.  The first call primes the difference so
    the derivative term starts at zero.
    """

    def __init__(self, gains: PidGains):
        self.gains = gains
        self.integral = 0.0
        self._e_prev: Optional[float] = None

    def update(self, e: float, dt: float) -> float:
        if dt <= 0.0:
            raise ValueError("dt must be positive")
        e_prev = e if self._e_prev is None else self._e_prev
        self.integral += 0.5 * dt * (e + e_prev)
        derivative = (e - e_prev) / dt
        self._e_prev = e
        g = self.gains
        return g.kp * e + g.ki * self.integral + g.kd * derivative

    def reset(self):
        self.integral = 0.0
        self._e_prev = None


class PidTrackingLaw(ControlLaw):
    """PID on the tracking error ref - output_map(x).

    ``output_map`` extracts the scalar controlled output from whatever
    state vector the law is fed (the raw plant state, or a primary-state
    estimate when used inside a composite law).
    """

    def __init__(self, gains: PidGains, output_map, name="pid"):
        self.pid = Pid(gains)
        self.output_map = output_map
        self.name = name

    def step(self, x, ref, t, dt):
        e = float(ref) - float(self.output_map(x))
        return np.array([self.pid.update(e, dt)])

    def reset(self):
        self.pid.reset()


class LqrLaw(ControlLaw):
    """Static full-state feedback u = -K x.

    ``stage_feedback`` opts the simulation harness into evaluating the
    law at RK4 stage states (the continuous closed loop) instead of
    holding the sampled command over the step.
    """

    stage_feedback = False

    def __init__(self, K, name="lqr", stage_feedback=False):
        self.K = as_matrix(K, name="K")
        self.name = name
        self.stage_feedback = stage_feedback

    def control(self, x):
        return -self.K @ x

    def step(self, x, ref, t, dt):
        return self.control(as_vector(x))


class ZeroLaw(ControlLaw):
    """Emits zero input; stands in for an absent controller channel."""

    name = "zero"

    def __init__(self, m: int = 1):
        self.m = m

    def step(self, x, ref, t, dt):
        return np.zeros(self.m)

    def control(self, x):
        return np.zeros(self.m)

    def u_s(self, x, xhat_s):
        return np.zeros(self.m)


@dataclass(frozen=True)
class BacksteppingParams:
    a: float
    c: float

    def __post_init__(self):
        if self.a <= 0.0 or self.c <= 0.0:
            raise ValueError("backstepping parameters a, c must be positive")


class BacksteppingSecondary:
    """Recursive stabilizer for the two-state remainder system.

    Drives the remainder-state estimate to zero through the surface
    z2 = xs2 + a*arctan(xs1); the sin terms use the measured x2 so the
    plant nonlinearity cancels exactly.
    """

    def __init__(self, params: BacksteppingParams):
        self.params = params

    def u_s(self, x, xhat_s) -> np.ndarray:
        a, c = self.params.a, self.params.c
        x2 = float(x[1])
        s1 = float(xhat_s[0])
        s2 = float(xhat_s[1])
        z2 = s2 + a * math.atan(s1)
        g = math.sin(x2) - math.sin(s2)
        u = (2.0 * s1 + 3.0 * s2 - 2.0 * x2 * x2
             - a / (s1 * s1 + 1.0) * (math.sin(s2) + s2 + g)
             - c * z2)
        return np.array([u])

    def reset(self):
        pass


class _SingularGuardLaw(ControlLaw):
    """Shared machinery for laws with a 1/(1 + cos x2) input transform.

    ``control`` raises SingularInput inside the hard guard band;
    ``control_clamped`` (used by the simulation loop and by stage
    evaluation) instead floors the denominator at the guard and counts
    the event, keeping the emitted input finite so a run can record the
    (usually divergence-bound) aftermath.  These laws default to stage
    feedback: the continuous closed loop is what resolves a singular
    crossing without step-size artifacts.
    """

    stage_feedback = True

    def __init__(self, K, name):
        self.K = as_vector(np.asarray(K, dtype=float).ravel(), name="K")
        self.name = name
        self.singular_count = 0
        self.near_singular_count = 0

    def reset(self):
        self.singular_count = 0
        self.near_singular_count = 0

    def _u(self, x, denominator):
        raise NotImplementedError

    def _den(self, x) -> float:
        den = 1.0 + math.cos(x[1])
        if abs(den) < NEAR_SINGULAR:
            self.near_singular_count += 1
        return den

    def control(self, x) -> np.ndarray:
        x = as_vector(x, dim=2)
        den = self._den(x)
        if abs(den) < SINGULAR_GUARD:
            self.singular_count += 1
            raise SingularInput(x[1], den)
        return self._u(x, den)

    def control_clamped(self, x) -> np.ndarray:
        x = as_vector(x, dim=2)
        den = self._den(x)
        if abs(den) < SINGULAR_GUARD:
            self.singular_count += 1
            den = SINGULAR_GUARD
        return self._u(x, den)

    def step(self, x, ref, t, dt):
        return self.control_clamped(x)


class FlcEx3(_SingularGuardLaw):
    """Exact linearization to a double integrator in z = (x1, x2 + sin x2)."""

    def __init__(self, K, name="flc"):
        super().__init__(K, name)

    def _u(self, x, den):
        x1, x2 = float(x[0]), float(x[1])
        z1 = x1
        z2 = x2 + math.sin(x2)
        v = -(self.K[0] * z1 + self.K[1] * z2)
        u = v / den + 2.0 * x1 + 3.0 * x2 - 2.0 * x2 * x2
        return np.array([u])


class RflcEx3(_SingularGuardLaw):
    """Robust variant: transforms onto the origin-Jacobian target system."""

    def __init__(self, K, name="rflc"):
        super().__init__(K, name)

    def _u(self, x, den):
        x1, x2 = float(x[0]), float(x[1])
        z1 = x1
        z2 = 0.5 * x2 + 0.5 * math.sin(x2)
        v = -(self.K[0] * z1 + self.K[1] * z2)
        u = (2.0 * v / den + 2.0 * x1 + 3.0 * x2 - 2.0 * x2 * x2
             - (4.0 * x1 + 3.0 * x2 + 3.0 * math.sin(x2)) / den)
        return np.array([u])


def leso_error_matrix(omega0: float) -> np.ndarray:
    """Estimation-error dynamics matrix of the bandwidth-parameterized
    extended state observer; all three poles sit at -omega0."""
    return np.array([
        [-3.0 * omega0, 1.0, 0.0],
        [-3.0 * omega0 ** 2, 0.0, 1.0],
        [-omega0 ** 3, 0.0, 0.0],
    ])


@dataclass
class LesoState:
    """Extended-state estimates (x1, x2, lumped disturbance x3)."""

    x1: float = 0.0
    x2: float = 0.0
    x3: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.x1, self.x2, self.x3])


class AdrcLaw(ControlLaw):
    """Disturbance-rejection law: LESO plus u = -x3_hat/b + u0.

    The observer gains are pinned at (3 w0, 3 w0^2, w0^3).  The LESO is
    advanced one RK4 step per control step, holding the previous
    sample's (y, u) constant, so the loop stays causal; its output
    channel is initialized at the first measurement to skip the
    artificial output-estimation transient.  The nominal feedback u0
    acts on the measured states (the lumped-disturbance channel x3_hat
    is what the observer contributes), so the law engages at full
    authority from the first sample.
    """

    def __init__(self, b: float, omega0: float, K, name="adrc"):
        if b == 0.0:
            raise ValueError("input-gain estimate b must be nonzero")
        if omega0 <= 0.0:
            raise ValueError("observer bandwidth must be positive")
        self.b = float(b)
        self.omega0 = float(omega0)
        self.K = as_vector(np.asarray(K, dtype=float).ravel(), name="K")
        self.name = name
        self.xhat = np.zeros(3)
        self._prev: Optional[tuple] = None

    def _leso_rate(self, xh, y, u):
        w0 = self.omega0
        e1 = xh[0] - y
        return np.array([
            xh[1] - 3.0 * w0 * e1,
            xh[2] - 3.0 * w0 ** 2 * e1 + self.b * u,
            -w0 ** 3 * e1,
        ])

    def _advance(self, y, u, dt):
        xh = self.xhat
        k1 = self._leso_rate(xh, y, u)
        k2 = self._leso_rate(xh + 0.5 * dt * k1, y, u)
        k3 = self._leso_rate(xh + 0.5 * dt * k2, y, u)
        k4 = self._leso_rate(xh + dt * k3, y, u)
        self.xhat = xh + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    def step(self, x, ref, t, dt):
        y = float(x[0])
        if self._prev is None:
            self.xhat[0] = y
        else:
            self._advance(*self._prev, dt)
        u0 = -(self.K[0] * float(x[0]) + self.K[1] * float(x[1]))
        u = -self.xhat[2] / self.b + u0
        self._prev = (y, u)
        return np.array([u])

    def reset(self):
        self.xhat = np.zeros(3)
        self._prev = None

    @property
    def state(self) -> LesoState:
        return LesoState(*self.xhat)
