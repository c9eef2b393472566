import math

import numpy as np
import pytest
import scipy.linalg

from scl_lab.controllers import ControlLaw, ZeroLaw
from scl_lab.numerics import eigenvalues, is_hurwitz
from scl_lab.plants import (
    EX2_A,
    EX2_B,
    EX2_C,
    Saturation,
    Scenario,
    build_example1,
    build_example2,
    build_example3,
    simulate,
)


class ConstantLaw(ControlLaw):
    def __init__(self, value):
        self.value = float(value)

    def step(self, x, ref, t, dt):
        return np.array([self.value])


def field_at(plant, x, u, d=0.0):
    return plant.field(0.0, np.asarray(x, float), np.asarray(u, float), d)


class TestExample1:
    def test_field_values(self):
        plant, _ = build_example1()
        assert field_at(plant, [1.0], [0.0])[0] == pytest.approx(-4.0)
        assert field_at(plant, [0.0], [5.0])[0] == pytest.approx(0.0)
        assert field_at(plant, [2.0], [3.0], d=3.0)[0] == pytest.approx(1.0)

    def test_scenario(self):
        _, sc = build_example1()
        assert sc.x0[0] == -1.0
        assert sc.d[0] == 3.0
        assert sc.ref(0.0) == 20.0 and sc.ref(9.9) == 20.0

    def test_open_loop_settles_at_d_over_four(self):
        plant, sc = build_example1()
        trace = simulate(plant, ZeroLaw(), sc, dt=1e-3, t_end=10.0)
        assert trace.x[-1, 0] == pytest.approx(3.0 / 4.0, abs=1e-9)


class TestExample2:
    def test_saturation(self):
        sat = Saturation(-2.0, 2.0)
        assert sat(3.0) == 2.0
        assert sat(-5.0) == -2.0
        assert sat(1.5) == 1.5

    def test_output_map(self):
        plant, _ = build_example2()
        y = plant.output(np.array([1.0, 0.0, 2.0]))
        assert y[0] == pytest.approx(1.0)

    def test_reference_stops_after_half_sine(self):
        _, sc = build_example2()
        assert sc.ref(4.0 * math.pi + 0.1) == 0.0
        assert sc.ref(2.0 * math.pi) == pytest.approx(1.0)

    def test_open_loop_stable(self):
        lam = eigenvalues(EX2_A)
        assert is_hurwitz(EX2_A)
        assert sorted(np.round(lam.real, 9)) == pytest.approx([-2.0, -1.0, -1.0])
        plant, sc = build_example2()
        bumped = Scenario(label="bump", x0=np.array([1.0, -2.0, 0.5]),
                          t_end=25.0)
        trace = simulate(plant, ZeroLaw(), bumped, dt=1e-3)
        assert np.max(np.abs(trace.x[-1])) < 1e-6

    def test_nonminimum_phase_zeros(self):
        # Invariant zeros from the system-matrix pencil; one must sit in
        # the open right half-plane.
        n = 3
        M = np.block([[EX2_A, EX2_B.reshape(3, 1)],
                      [EX2_C.reshape(1, 3), np.zeros((1, 1))]])
        N = np.block([[np.eye(n), np.zeros((n, 1))],
                      [np.zeros((1, n + 1))]])
        zeros = [z for z in scipy.linalg.eigvals(M, N) if np.isfinite(z)]
        zeros = np.sort_complex(np.asarray(zeros))
        np.testing.assert_allclose(zeros, [-1.0, 1.0], atol=1e-9)
        assert max(z.real for z in zeros) > 0

    def test_constant_command_saturates_throughout(self):
        plant, sc = build_example2()
        trace = simulate(plant, ConstantLaw(10.0), sc, dt=1e-3, t_end=2.0)
        assert np.all(trace.u_applied == 2.0)
        assert np.all(trace.sat_active)


class TestExample3:
    def test_field_values(self):
        plant, _ = build_example3()
        np.testing.assert_allclose(field_at(plant, [0.0, 0.0], [0.0]), [0.0, 0.0])
        expected = [math.pi / 2 + 1.0,
                    -3.0 * math.pi / 2 + 2.0 * (math.pi / 2) ** 2]
        np.testing.assert_allclose(field_at(plant, [0.0, math.pi / 2], [0.0]),
                                   expected, atol=1e-12)

    def test_scenarios(self):
        _, scs = build_example3()
        labels = [s.label for s in scs]
        assert labels == ["i", "ii", "iii", "iv"]
        assert np.array_equal(scs[0].x0, [2.0, 2.0])
        assert np.array_equal(scs[1].x0, [5.0, 5.0])
        assert np.array_equal(scs[2].d, [1.0, 1.0])
        assert scs[3].input_delay == 0.2
        assert all(s.t_end == 10.0 for s in scs)

    def test_zero_controller_zero_state_stays_put(self):
        plant, scs = build_example3()
        rest = Scenario(label="rest", x0=np.zeros(2), t_end=1.0)
        trace = simulate(plant, ZeroLaw(), rest, dt=1e-3)
        assert np.all(trace.x == 0.0)
        assert np.all(trace.u_cmd == 0.0)


class TestEquilibria:
    def test_origin_is_equilibrium_for_every_example(self):
        plants = [build_example1()[0], build_example2()[0], build_example3()[0]]
        for plant in plants:
            dx = plant.field(0.0, np.zeros(plant.n), np.zeros(plant.m), 0.0)
            np.testing.assert_allclose(dx, np.zeros(plant.n), atol=1e-15)


class TestHarness:
    def test_delay_block_shifts_applied_input(self):
        plant, scs = build_example3()
        trace = simulate(plant, ConstantLaw(1.0), scs[3], dt=1e-3, t_end=1.0)
        # 0.2 s of fill value, then the command appears.
        assert np.all(trace.u_applied[:200] == 0.0)
        assert np.all(trace.u_applied[200:] == 1.0)
        assert np.all(trace.u_cmd == 1.0)

    def test_divergent_run_truncates_cleanly(self):
        plant, scs = build_example3()

        class PositiveFeedback(ControlLaw):
            def step(self, x, ref, t, dt):
                return np.array([100.0 * x[1] ** 2 + 10.0])

        trace = simulate(plant, PositiveFeedback(), scs[1], dt=1e-3)
        assert trace.diverged
        assert trace.divergence_time is not None
        assert np.all(np.isfinite(trace.x))
        assert len(trace) < 10001

    def test_dt_must_divide_horizon(self):
        plant, sc = build_example1()
        with pytest.raises(ValueError):
            simulate(plant, ZeroLaw(), sc, dt=3e-4, t_end=1.0)
