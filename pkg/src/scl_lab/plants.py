"""Benchmark plants, scenarios, input blocks, and the closed-loop harness.

Plant fields are written with numpy ufuncs and ellipsis indexing so the
same callable evaluates a single state ``(n,)`` or a batch ``(B, n)``;
the batched form is what makes the decomposition checks cheap to run
over many randomized inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np

from .numerics import (
    DEFAULT_DT,
    DIVERGENCE_LIMIT,
    DelayLine,
    NonFiniteState,
    as_vector,
)


@dataclass(frozen=True)
class Saturation:
    """Symmetric-or-not hard input clamp into [lo, hi]."""

    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("saturation bounds must satisfy lo < hi")

    def __call__(self, u):
        return np.clip(u, self.lo, self.hi)


@dataclass(frozen=True)
class PlantModel:
    """Nonlinear plant x' = field(t, x, u_eff, d), y = output(x).

    ``field`` receives the effective input, i.e. after any saturation
    block; the simulation harness applies ``saturation`` (and any
    scenario delay) to the commanded input first.  ``analytic_jacobian``
    holds the exact (A, B) of the field at the origin when available.
    ``remainder_field(t, x, xs, u, u_s)`` optionally carries the
    hand-derived dynamics of the nonlinear remainder; the
    decomposition-exactness harness integrates it against the generic
    construction, which is what certifies the hand derivation.
    """

    name: str
    n: int
    m: int
    p: int
    field: Callable
    output: Callable
    analytic_jacobian: Optional[Tuple[np.ndarray, np.ndarray]] = None
    saturation: Optional[Saturation] = None
    remainder_field: Optional[Callable] = None

    def nominal_field(self, t, x, u):
        """Disturbance-free field with the known saturation block applied.

        This is the model a controller-side observer is allowed to use:
        it knows the plant equations and the saturation, never the
        disturbance or an unmodeled input delay.
        """
        u_eff = self.saturation(u) if self.saturation is not None else u
        return self.field(t, x, u_eff, 0.0)


@dataclass(frozen=True)
class Scenario:
    """One benchmark run: initial state, disturbance, blocks, horizon."""

    label: str
    x0: np.ndarray
    t_end: float
    d: Optional[np.ndarray] = None
    input_delay: float = 0.0
    reference: Optional[Callable] = None  # y_d(t); None means stabilization

    def __post_init__(self):
        if self.t_end <= 0.0:
            raise ValueError("t_end must be positive")
        if self.input_delay < 0.0:
            raise ValueError("input delay must be non-negative")

    def disturbance(self, n: int) -> np.ndarray:
        if self.d is None:
            return np.zeros(n)
        return as_vector(self.d, dim=n, name="d")

    def ref(self, t: float) -> float:
        return float(self.reference(t)) if self.reference is not None else 0.0

    @property
    def tracking(self) -> bool:
        return self.reference is not None


@dataclass
class SimulationTrace:
    """Uniform-grid record of one closed-loop run.

    ``xhat_p + xhat_s == x`` holds exactly whenever the run used the
    compensation observer; for plain state-feedback methods the columns
    degenerate to ``xhat_p = x`` and ``xhat_s = 0``.
    """

    t: np.ndarray
    x: np.ndarray
    u_cmd: np.ndarray
    u_applied: np.ndarray
    u_p: np.ndarray
    u_s: np.ndarray
    xhat_p: np.ndarray
    xhat_s: np.ndarray
    y: np.ndarray
    y_d: np.ndarray
    sat_active: np.ndarray
    dt: float
    diverged: bool = False
    divergence_time: Optional[float] = None
    singular_events: int = 0
    near_singular_events: int = 0
    tracking: bool = False

    def __len__(self) -> int:
        return self.t.shape[0]


# --- Example plants -------------------------------------------------------

def _ex1_field(t, x, u, d):
    xv = x[..., 0]
    uv = u[..., 0]
    return np.stack((-4.0 * xv + xv * uv,), axis=-1) + d


def _ex1_output(x):
    return x[..., 0:1]


EX2_A = np.array([[0.0, 1.0, 0.0],
                  [0.0, 0.0, 1.0],
                  [-4.0, -6.0, -4.0]])
EX2_B = np.array([0.0, 0.0, 1.0])
EX2_C = np.array([-1.0, 0.0, 1.0])
EX2_SAT = Saturation(-2.0, 2.0)


def _ex2_field(t, x, u, d):
    return x @ EX2_A.T + u[..., 0:1] * EX2_B + d


def _ex2_output(x):
    return (x @ EX2_C)[..., None]


def _ex2_remainder(t, x, xs, u, u_s):
    # A xs + b (sat(u) - u) + b u_s; the trailing term vanishes for the
    # benchmark split u_p = u.
    drive = np.clip(u[..., 0:1], -2.0, 2.0) - u[..., 0:1] + u_s[..., 0:1]
    return xs @ EX2_A.T + drive * EX2_B


def _ex3_field(t, x, u, d):
    x1 = x[..., 0]
    x2 = x[..., 1]
    dx1 = x2 + np.sin(x2)
    dx2 = -2.0 * x1 - 3.0 * x2 + 2.0 * x2 * x2 + u[..., 0]
    return np.stack((dx1, dx2), axis=-1) + d


def _ex3_output(x):
    return x[..., 0:1]


def _ex3_remainder(t, x, xs, u, u_s):
    # The sin and quadratic terms read the measured x2; only this
    # reading matches the generic remainder f - A1 xp - B1 up term by
    # term (the exactness harness certifies it).
    x2 = x[..., 1]
    s1 = xs[..., 0]
    s2 = xs[..., 1]
    d1 = 2.0 * s2 - x2 + np.sin(x2)
    d2 = -2.0 * s1 - 3.0 * s2 + 2.0 * x2 * x2 + u_s[..., 0]
    return np.stack((d1, d2), axis=-1)


def _ex2_reference(t: float) -> float:
    return math.sin(0.25 * t) if t <= 4.0 * math.pi else 0.0


def build_example1() -> Tuple[PlantModel, Scenario]:
    """Scalar bilinear plant x' = -4x + x u + d, y = x.

    Scenario: constant reference y_d = 20, constant disturbance d = 3,
    x0 = -1.  The horizon is 30 s: the remainder state contracts at rate
    4 - u, and u settles at 77/20 = 3.85, so the true output needs about
    27 s to come within 2 percent of the reference.
    """
    plant = PlantModel(
        name="ex1", n=1, m=1, p=1,
        field=_ex1_field, output=_ex1_output,
        analytic_jacobian=(np.array([[-4.0]]), np.array([[0.0]])),
    )
    scenario = Scenario(
        label="nominal", x0=np.array([-1.0]), t_end=30.0,
        d=np.array([3.0]), reference=lambda t: 20.0,
    )
    return plant, scenario


def build_example2() -> Tuple[PlantModel, Scenario]:
    """Third-order non-minimum-phase plant with a +/-2 input saturation.

    x' = A x + b sat(u), y = c'x; the reference is a half sine,
    sin(0.25 t) up to 4*pi and zero afterwards, over a 25 s horizon.
    """
    plant = PlantModel(
        name="ex2", n=3, m=1, p=1,
        field=_ex2_field, output=_ex2_output,
        analytic_jacobian=(EX2_A.copy(), EX2_B.reshape(3, 1).copy()),
        saturation=EX2_SAT,
        remainder_field=_ex2_remainder,
    )
    scenario = Scenario(
        label="nominal", x0=np.zeros(3), t_end=25.0,
        reference=_ex2_reference,
    )
    return plant, scenario


def build_example3() -> Tuple[PlantModel, List[Scenario]]:
    """Two-state plant with a mismatched sin nonlinearity, four scenarios.

    x1' = x2 + sin x2 + d1, x2' = -2 x1 - 3 x2 + 2 x2^2 + u + d2.
    Scenarios: (i) x0=[2,2]; (ii) x0=[5,5]; (iii) x0=[2,2], d=[1,1];
    (iv) x0=[2,2] with a 0.2 s input delay.  All stabilization runs over
    10 s.
    """
    plant = PlantModel(
        name="ex3", n=2, m=1, p=1,
        field=_ex3_field, output=_ex3_output,
        analytic_jacobian=(np.array([[0.0, 2.0], [-2.0, -3.0]]),
                           np.array([[0.0], [1.0]])),
        remainder_field=_ex3_remainder,
    )
    scenarios = [
        Scenario(label="i", x0=np.array([2.0, 2.0]), t_end=10.0),
        Scenario(label="ii", x0=np.array([5.0, 5.0]), t_end=10.0),
        Scenario(label="iii", x0=np.array([2.0, 2.0]), t_end=10.0,
                 d=np.array([1.0, 1.0])),
        Scenario(label="iv", x0=np.array([2.0, 2.0]), t_end=10.0,
                 input_delay=0.2),
    ]
    return plant, scenarios


# --- Closed-loop harness --------------------------------------------------

def simulate(plant: PlantModel, law, scenario: Scenario,
             dt: float = DEFAULT_DT, t_end: Optional[float] = None) -> SimulationTrace:
    """Run one closed-loop simulation on a uniform grid.

    Per step: evaluate the control law on the measured state, push the
    command through the (optional) delay line and saturation, hold the
    applied input constant over one RK4 step of the plant, and record
    every signal.  Stops early, with the divergence flag set, when
    |x|_inf exceeds the divergence limit or the integrator goes
    non-finite; the divergent sample itself is not recorded so emitted
    files stay finite.

    The disturbance is applied to the plant only; the law never sees it.
    The law receives the commanded input history only through its own
    internal state (an input delay is an unmodeled uncertainty).
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    horizon = float(t_end if t_end is not None else scenario.t_end)
    n_steps = int(round(horizon / dt))
    if n_steps < 1 or abs(n_steps * dt - horizon) > 1e-9:
        raise ValueError(f"dt={dt:g} does not divide the horizon {horizon:g}")

    n, m, p = plant.n, plant.m, plant.p
    x = as_vector(scenario.x0, dim=n, name="x0").copy()
    d_vec = scenario.disturbance(n)
    delays = ([DelayLine(scenario.input_delay, dt) for _ in range(m)]
              if scenario.input_delay > 0.0 else None)

    law.reset()
    singular_before = _singular_count(law)
    near_before = _near_singular_count(law)

    N = n_steps + 1
    rec_t = np.empty(N)
    rec_x = np.empty((N, n))
    rec_ucmd = np.empty((N, m))
    rec_uapp = np.empty((N, m))
    rec_up = np.empty((N, m))
    rec_us = np.empty((N, m))
    rec_xhp = np.empty((N, n))
    rec_xhs = np.empty((N, n))
    rec_y = np.empty((N, p))
    rec_yd = np.empty(N)
    rec_sat = np.zeros(N, dtype=bool)

    stage_feedback = bool(getattr(law, "stage_feedback", False)) and delays is None

    diverged = False
    divergence_time = None
    rows = 0
    for k in range(N):
        t = k * dt
        ref = scenario.ref(t)
        u_cmd = as_vector(law.step(x, ref, t, dt), dim=m, name="u")
        comps = law.components() or {}
        u_delayed = (np.array([delays[j].push(u_cmd[j]) for j in range(m)])
                     if delays is not None else u_cmd)
        if plant.saturation is not None:
            u_applied = plant.saturation(u_delayed)
            saturated = bool(np.any(u_applied != u_delayed))
        else:
            u_applied = u_delayed
            saturated = False

        rec_t[k] = t
        rec_x[k] = x
        rec_ucmd[k] = u_cmd
        rec_uapp[k] = u_applied
        rec_up[k] = comps.get("u_p", u_cmd)
        rec_us[k] = comps.get("u_s", np.zeros(m))
        rec_xhp[k] = comps.get("xhat_p", x)
        rec_xhs[k] = comps.get("xhat_s", np.zeros(n))
        rec_y[k] = plant.output(x)
        rec_yd[k] = ref
        rec_sat[k] = saturated
        rows = k + 1
        if k == n_steps:
            break

        try:
            x_next = _plant_step(plant, law, t, x, u_applied, d_vec, dt,
                                 stage_feedback)
        except NonFiniteState:
            diverged = True
            divergence_time = t + dt
            break
        if np.max(np.abs(x_next)) > DIVERGENCE_LIMIT:
            diverged = True
            divergence_time = t + dt
            break
        x = x_next

    return SimulationTrace(
        t=rec_t[:rows], x=rec_x[:rows], u_cmd=rec_ucmd[:rows],
        u_applied=rec_uapp[:rows], u_p=rec_up[:rows], u_s=rec_us[:rows],
        xhat_p=rec_xhp[:rows], xhat_s=rec_xhs[:rows], y=rec_y[:rows],
        y_d=rec_yd[:rows], sat_active=rec_sat[:rows], dt=dt,
        diverged=diverged, divergence_time=divergence_time,
        singular_events=_singular_count(law) - singular_before,
        near_singular_events=_near_singular_count(law) - near_before,
        tracking=scenario.tracking,
    )


def _plant_step(plant, law, t, x, u_applied, d_vec, dt, stage_feedback):
    """One RK4 step of the plant under either input convention.

    Default: zero-order hold on the applied input.  Memoryless laws may
    opt into stage feedback (law re-evaluated at every RK4 stage state),
    which realises the continuous closed loop; only valid without a
    delay line.
    """
    if stage_feedback:
        stage_control = getattr(law, "control_clamped", law.control)

        def f(tau, xi):
            u = stage_control(xi)
            if plant.saturation is not None:
                u = plant.saturation(u)
            return plant.field(tau, xi, u, d_vec)
    else:
        def f(tau, xi):
            return plant.field(tau, xi, u_applied, d_vec)
    k1 = f(t, x)
    k2 = f(t + 0.5 * dt, x + 0.5 * dt * k1)
    k3 = f(t + 0.5 * dt, x + 0.5 * dt * k2)
    k4 = f(t + dt, x + dt * k3)
    out = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise NonFiniteState(t, "plant step")
    return out


def _singular_count(law) -> int:
    return int(getattr(law, "singular_count", 0))


def _near_singular_count(law) -> int:
    return int(getattr(law, "near_singular_count", 0))
