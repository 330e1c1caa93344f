"""
Tests for the quadrotor simulator: equilibrium, delay filters, adjoints and
parameter randomization.
"""
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gradnav.diffcore import Tensor, check_gradient, ops
from gradnav.models.drone import ControlInput, DelayRegisters, DroneParams, DroneState
from gradnav.schemas.config import RandomizationRanges
from gradnav.services.dynamics import (
    QuadrotorDynamics,
    body_x_axis,
    quat_from_euler,
    rotation_matrix,
)

DT = 0.05


def _moving_state(n, seed=0):
    rng = np.random.default_rng(seed)
    values = np.zeros((n, 16))
    values[:, 0:3] = rng.uniform(-1.0, 1.0, size=(n, 3)) + [0.0, 0.0, 1.3]
    values[:, 3:7] = quat_from_euler(*rng.uniform(-0.3, 0.3, size=(3, n)))
    values[:, 7:10] = rng.uniform(-0.5, 0.5, size=(n, 3))
    values[:, 10:13] = rng.uniform(-0.4, 0.4, size=(n, 3))
    return DroneState.from_array(values)


def _randomized_params(n, seed=0):
    return QuadrotorDynamics().sample_params(RandomizationRanges(), np.random.default_rng(seed), n)


def test_hover_is_a_fixed_point():
    """Test that hover thrust with zero rates keeps the drone in place."""
    n = 3
    params = DroneParams.nominal(n)
    c = float(params.hover_thrust[0])
    state = DroneState.hover(n)
    registers = DelayRegisters.initial(n, c)
    u = ControlInput(w_d=Tensor(np.zeros((n, 3))), c=Tensor(np.full(n, c)))
    sim = QuadrotorDynamics()

    nxt, _ = sim.step(state, u, params, registers, DT)

    np.testing.assert_allclose(nxt.p.data, state.p.data, atol=1e-10)
    np.testing.assert_allclose(nxt.v.data, 0.0, atol=1e-10)
    np.testing.assert_allclose(nxt.q.data, state.q.data, atol=1e-10)


def test_quaternion_norm_drift_over_an_episode():
    """Test that 600 steps of spinning keep unit quaternions."""
    n = 2
    params = _randomized_params(n)
    state = _moving_state(n)
    registers = DelayRegisters.initial(n, 0.5)
    u = ControlInput(w_d=Tensor(np.tile([0.5, -0.3, 0.8], (n, 1))), c=Tensor(np.full(n, 0.5)))
    sim = QuadrotorDynamics()
    for _ in range(600):
        state, registers = sim.step(state, u, params, registers, DT)
    np.testing.assert_allclose(np.linalg.norm(state.q.data, axis=1), 1.0, atol=1e-6)


def test_unit_delay_factors_pass_commands_through():
    """Test that delay factors of one make filtered commands equal the commands."""
    n = 2
    params = DroneParams.nominal(n, k_motor=1.0, k_rate=1.0)
    registers = DelayRegisters.initial(n, 0.3)
    w_d = np.array([[0.1, 0.2, 0.3], [-0.5, 0.0, 0.4]])
    u = ControlInput(w_d=Tensor(w_d), c=Tensor(np.array([0.7, 0.2])))
    _, regs = QuadrotorDynamics().step(DroneState.hover(n), u, params, registers, DT)
    np.testing.assert_allclose(regs.w_tilde.data, w_d)
    np.testing.assert_allclose(regs.c_tilde.data, [0.7, 0.2])


def test_batched_step_matches_single_steps():
    """Test that stepping n drones together is bit-identical to stepping each alone."""
    n = 4
    rng = np.random.default_rng(3)
    params = _randomized_params(n, seed=3)
    state = _moving_state(n, seed=3)
    registers = DelayRegisters(
        w_tilde=Tensor(rng.uniform(-0.5, 0.5, size=(n, 3))),
        c_tilde=Tensor(rng.uniform(0.3, 0.7, size=n)),
        w_dot_prev=Tensor(rng.uniform(-1.0, 1.0, size=(n, 3))),
    )
    u = ControlInput(w_d=Tensor(rng.uniform(-1.0, 1.0, size=(n, 3))), c=Tensor(rng.uniform(0.0, 1.0, size=n)))
    sim = QuadrotorDynamics()
    batched, batched_regs = sim.step(state, u, params, registers, DT)

    per_drone = ("mass", "inertia", "max_thrust", "k_motor", "k_rate", "k_drag")
    for i in range(n):
        rows = slice(i, i + 1)
        single_params = replace(params, **{name: getattr(params, name)[rows] for name in per_drone})
        single_state = DroneState.from_array(state.numpy()[rows])
        single_regs = DelayRegisters(
            Tensor(registers.w_tilde.data[rows]),
            Tensor(registers.c_tilde.data[rows]),
            Tensor(registers.w_dot_prev.data[rows]),
        )
        single_u = ControlInput(w_d=Tensor(u.w_d.data[rows]), c=Tensor(u.c.data[rows]))
        nxt, regs = sim.step(single_state, single_u, single_params, single_regs, DT)

        assert np.array_equal(nxt.numpy()[0], batched.numpy()[i])
        assert np.array_equal(regs.w_tilde.data[0], batched_regs.w_tilde.data[i])
        assert np.array_equal(regs.c_tilde.data[0], batched_regs.c_tilde.data[i])
        assert np.array_equal(regs.w_dot_prev.data[0], batched_regs.w_dot_prev.data[i])


def test_thrust_is_clamped_to_unit_interval():
    """Test that out-of-range thrust commands saturate."""
    n = 1
    params = DroneParams.nominal(n)
    registers = DelayRegisters.initial(n, 0.0)
    u = ControlInput(w_d=Tensor(np.zeros((n, 3))), c=Tensor(np.array([3.0])))
    _, regs = QuadrotorDynamics().step(DroneState.hover(n), u, params, registers, DT)
    assert regs.c_tilde.data[0] == pytest.approx(1.0)


def test_invalid_inputs_raise():
    """Test non-positive dt and non-finite commands."""
    n = 1
    params = DroneParams.nominal(n)
    registers = DelayRegisters.initial(n, 0.5)
    state = DroneState.hover(n)
    sim = QuadrotorDynamics()
    good = ControlInput(w_d=Tensor(np.zeros((n, 3))), c=Tensor(np.array([0.5])))
    with pytest.raises(ValueError):
        sim.step(state, good, params, registers, 0.0)
    bad = ControlInput(w_d=Tensor(np.array([[np.nan, 0.0, 0.0]])), c=Tensor(np.array([0.5])))
    with pytest.raises(ValueError):
        sim.step(state, bad, params, registers, DT)


def _step_objective(n, steps, seed):
    sim = QuadrotorDynamics()
    params = _randomized_params(n, seed)
    state = _moving_state(n, seed)
    registers = DelayRegisters.initial(n, 0.5)
    weights = np.random.default_rng(seed + 100).normal(size=(5, n, 4))

    def f(t):
        s, regs = state, registers
        for _ in range(steps):
            u = ControlInput(w_d=t[:, :3], c=t[:, 3])
            s, regs = sim.step(s, u, params, regs, DT)
        return (
            ops.sum(weights[0, :, :3] * s.p)
            + ops.sum(weights[1] * s.q)
            + ops.sum(weights[2, :, :3] * s.v)
            + ops.sum(weights[3, :, :3] * s.w)
            + ops.sum(weights[4, :, 0] * regs.c_tilde)
        )

    return f


@pytest.mark.parametrize("steps", [1, 3])
def test_step_adjoint_matches_finite_differences(steps):
    """Test one step and a three-step chain against central differences."""
    n = 3
    rng = np.random.default_rng(7)
    commands = np.concatenate([rng.uniform(-1.0, 1.0, size=(n, 3)), rng.uniform(0.3, 0.7, size=(n, 1))], axis=1)
    f = _step_objective(n, steps, seed=steps)
    assert check_gradient(f, commands, floor=1e-5) < 1e-4


def test_state_adjoint_matches_finite_differences():
    """Test the gradient of the next state with respect to the current velocity."""
    n = 2
    sim = QuadrotorDynamics()
    params = _randomized_params(n, 3)
    base = _moving_state(n, 3)
    registers = DelayRegisters.initial(n, 0.5)
    u = ControlInput(w_d=Tensor(np.full((n, 3), 0.2)), c=Tensor(np.full(n, 0.55)))
    weights = np.random.default_rng(11).normal(size=(n, 3))

    def f(v):
        state = DroneState(p=base.p, q=base.q, v=v, w=base.w, a=base.a)
        nxt, _ = sim.step(state, u, params, registers, DT)
        return ops.sum(weights * nxt.p) + ops.sum(weights * nxt.v)

    assert check_gradient(f, base.v.data, floor=1e-5) < 1e-4


def test_sample_params_within_ranges_and_seeded():
    """Test that randomized parameters respect their ranges and the seed."""
    ranges = RandomizationRanges()
    sim = QuadrotorDynamics()
    a = sim.sample_params(ranges, np.random.default_rng(5), 64)
    b = sim.sample_params(ranges, np.random.default_rng(5), 64)
    np.testing.assert_array_equal(a.mass, b.mass)
    assert np.all((a.mass >= 1.0) & (a.mass <= 1.5))
    assert np.all((a.max_thrust >= 22.0) & (a.max_thrust <= 30.0))
    assert np.all((a.k_motor >= 0.5) & (a.k_motor <= 0.8))
    assert np.all((a.k_drag >= 0.4) & (a.k_drag <= 0.6))
    assert a.inertia.shape == (64, 3)
    with pytest.raises(ValueError):
        sim.sample_params(ranges, np.random.default_rng(0), 0)


def test_drone_params_validation():
    """Test rejection of non-physical parameters."""
    with pytest.raises(ValueError):
        DroneParams.nominal(1, mass=-1.0)
    with pytest.raises(ValueError):
        DroneParams.nominal(1, k_motor=1.5)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (4,), elements=st.floats(-1.0, 1.0)).filter(lambda q: np.linalg.norm(q) > 0.1))
def test_rotation_matrix_is_orthonormal(q):
    """Test R(q) for arbitrary unit quaternions."""
    unit = q / np.linalg.norm(q)
    R = rotation_matrix(unit).data
    np.testing.assert_allclose(R @ R.T, np.eye(3), atol=1e-12)
    assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-12)


def test_yaw_quaternion_heading():
    """Test that a pure yaw rotates the body x axis in the horizontal plane."""
    yaw = np.array([0.0, np.pi / 2, -np.pi / 4])
    q = quat_from_euler(np.zeros(3), np.zeros(3), yaw)
    heading = body_x_axis(Tensor(q)).data
    np.testing.assert_allclose(heading, np.stack([np.cos(yaw), np.sin(yaw), np.zeros(3)], axis=1), atol=1e-12)
