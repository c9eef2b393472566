"""Benchmark wiring: the three example problems, the five control
pipelines, and regeneration of the comparison table.

Gains are fixed here, once, for every pipeline:

* PID for the scalar bilinear example: (0.66, 1.33, -0.02).
* PID for the saturated NMP example: (-0.5, -1.3, 0).
* LQR weights Q = diag(10, 10), R = 1; each method solves its own
  Riccati problem on its own linearized model.
* Backstepping a = c = 10, observer bandwidth w0 = 2, input-gain
  estimate b = 2 (the value of 1 + cos x2 at the origin).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from .controllers import (
    AdrcLaw,
    BacksteppingParams,
    BacksteppingSecondary,
    ControlLaw,
    FlcEx3,
    LqrLaw,
    PidGains,
    PidTrackingLaw,
    RflcEx3,
)
from .decomposition import CompositeLaw, make_decomposition, make_decomposition_ex1
from .metrics import PerformanceReport, report
from .numerics import CareProblem, DEFAULT_DT, solve_care
from .plants import (
    EX2_C,
    PlantModel,
    Scenario,
    SimulationTrace,
    build_example1,
    build_example2,
    build_example3,
    simulate,
)

EXAMPLES = ("ex1", "ex2", "ex3")
METHODS = ("sclc", "jlc", "flc", "rflc", "adrc")
SCENARIOS_EX3 = ("i", "ii", "iii", "iv")

PID_EX1 = PidGains(0.66, 1.33, -0.02)
PID_EX2 = PidGains(-0.5, -1.3, 0.0)
LQR_Q = np.diag([10.0, 10.0])
LQR_R = np.array([[1.0]])
BACKSTEPPING = BacksteppingParams(a=10.0, c=10.0)
ADRC_OMEGA0 = 2.0
ADRC_B = 2.0

# Design models for the methods that do not linearize about the origin
# Jacobians: exact linearization yields a double integrator, and the
# disturbance-rejection model is a double integrator with input gain b.
FLC_DESIGN = (np.array([[0.0, 1.0], [0.0, 0.0]]), np.array([[0.0], [1.0]]))
ADRC_DESIGN = (np.array([[0.0, 1.0], [0.0, 0.0]]), np.array([[0.0], [ADRC_B]]))


class ConfigError(ValueError):
    """Invalid example/method/scenario combination or option."""


_REJECTIONS = {
    ("ex1", "jlc"): "the bilinear plant has no fixed equilibrium to expand "
                    "about (any input is an equilibrium input at x = 0), so a "
                    "Taylor-expansion pipeline cannot be constructed",
    ("ex1", "flc"): "the input transform loses the plant at x = 0, which the "
                    "trajectory must cross on its way to the reference",
    ("ex1", "rflc"): "not part of the benchmark set for the bilinear example",
    ("ex1", "adrc"): "not part of the benchmark set for the bilinear example",
    ("ex2", "flc"): "the saturation block is irreversible, so the real input "
                    "cannot be recovered from the linearizing transform",
    ("ex2", "rflc"): "the saturation block is irreversible, so the real input "
                     "cannot be recovered from the linearizing transform",
    ("ex2", "adrc"): "not part of the benchmark set for the saturated example",
}


def lqr_gain(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Feedback gain K (for u = -K x) with the shared Q, R weights."""
    _, K = solve_care(CareProblem(A, B, LQR_Q, LQR_R))
    return K


@dataclass
class RunSetup:
    example: str
    method: str
    scenario: Scenario
    plant: PlantModel
    law: ControlLaw


def _sclc_ex1() -> Tuple[PlantModel, Scenario, ControlLaw]:
    plant, scenario = build_example1()
    dec = make_decomposition_ex1(scenario.ref(0.0))
    primary = PidTrackingLaw(PID_EX1, lambda xp: float(xp[0]), name="pid")
    return plant, scenario, CompositeLaw(dec, primary, secondary=None, name="sclc")


def _sclc_ex2() -> Tuple[PlantModel, Scenario, ControlLaw]:
    plant, scenario = build_example2()
    dec = make_decomposition(plant)
    primary = PidTrackingLaw(PID_EX2, lambda xp: float(EX2_C @ xp), name="pid")
    return plant, scenario, CompositeLaw(dec, primary, secondary=None, name="sclc")


def _jlc_ex2() -> Tuple[PlantModel, Scenario, ControlLaw]:
    plant, scenario = build_example2()
    law = PidTrackingLaw(PID_EX2, lambda x: float(EX2_C @ x), name="jlc")
    return plant, scenario, law


def _ex3_law(method: str) -> ControlLaw:
    plant, _scenarios = build_example3()
    dec = make_decomposition(plant)
    if method == "sclc":
        K = lqr_gain(dec.A1, dec.B1)
        primary = LqrLaw(K, name="lqr")
        secondary = BacksteppingSecondary(BACKSTEPPING)
        return CompositeLaw(dec, primary, secondary, name="sclc")
    if method == "jlc":
        # Shares the decomposition's (A1, B1) by construction.
        return LqrLaw(lqr_gain(dec.A1, dec.B1), name="jlc", stage_feedback=True)
    if method == "flc":
        return FlcEx3(lqr_gain(*FLC_DESIGN))
    if method == "rflc":
        return RflcEx3(lqr_gain(dec.A1, dec.B1))
    if method == "adrc":
        return AdrcLaw(ADRC_B, ADRC_OMEGA0, lqr_gain(*ADRC_DESIGN))
    raise ConfigError(f"unknown method {method!r}")


def build_run(example: str, method: str,
              scenario: Optional[str] = None) -> RunSetup:
    """Resolve one benchmark cell into (plant, scenario, law).

    Rejects combinations the benchmark set rules out, with the reason.
    """
    if example not in EXAMPLES:
        raise ConfigError(f"unknown example {example!r}; choose from {EXAMPLES}")
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}; choose from {METHODS}")
    if (example, method) in _REJECTIONS:
        raise ConfigError(f"{method} on {example}: {_REJECTIONS[(example, method)]}")
    if example != "ex3" and scenario is not None:
        raise ConfigError(f"{example} has a single scenario; drop --scenario")

    if example == "ex1":
        plant, sc, law = _sclc_ex1()
    elif example == "ex2":
        plant, sc, law = _sclc_ex2() if method == "sclc" else _jlc_ex2()
    else:
        label = scenario if scenario is not None else "i"
        if label not in SCENARIOS_EX3:
            raise ConfigError(
                f"unknown scenario {label!r}; choose from {SCENARIOS_EX3}")
        plant, scenarios = build_example3()
        sc = scenarios[SCENARIOS_EX3.index(label)]
        law = _ex3_law(method)
    return RunSetup(example=example, method=method, scenario=sc,
                    plant=plant, law=law)


def run(example: str, method: str, scenario: Optional[str] = None,
        dt: float = DEFAULT_DT,
        t_end: Optional[float] = None) -> Tuple[SimulationTrace, PerformanceReport]:
    """Simulate one benchmark cell and evaluate it."""
    setup = build_run(example, method, scenario)
    trace = simulate(setup.plant, setup.law, setup.scenario, dt=dt, t_end=t_end)
    return trace, report(trace)


@dataclass
class Table1:
    """IAE/ITAE of the five pipelines over the four ex3 scenarios."""

    cells: Dict[Tuple[str, str], PerformanceReport]

    def value(self, scenario: str, method: str, index: str) -> Optional[float]:
        rep = self.cells[(scenario, method)]
        return rep.iae if index == "iae" else rep.itae

    def rows(self) -> List[List[str]]:
        """Rows shaped like the published comparison: scenario x
        {IAE, ITAE} with one column per method."""
        out = [["Sce.", "Index"] + [m.upper() for m in METHODS]]
        for sc in SCENARIOS_EX3:
            for index in ("iae", "itae"):
                row = [f"({sc})", index.upper()]
                for method in METHODS:
                    v = self.value(sc, method, index)
                    row.append("-" if v is None else f"{v:.3f}")
                out.append(row)
        return out


def table1(dt: float = DEFAULT_DT) -> Table1:
    """Run all 5 methods x 4 scenarios of the two-state example."""
    cells = {}
    for sc in SCENARIOS_EX3:
        for method in METHODS:
            _, rep = run("ex3", method, scenario=sc, dt=dt)
            cells[(sc, method)] = rep
    return Table1(cells)
