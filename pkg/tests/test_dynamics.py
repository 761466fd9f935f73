import math

import numpy as np
import pytest
from scipy.linalg import expm

from qdspin.analytic import fidelity_godden
from qdspin.constants import HBAR_UEV_PS, TRAJECTORY_COLUMNS
from qdspin.dynamics import (
    H_DOWN,
    H_UP,
    SystemState,
    _generator,
    _rk4_propagator,
    beat_signal,
    evolve,
    oracle_fidelity,
    oracle_step,
    steady_hole_fidelity,
    trajectory_frame,
)
from qdspin.errors import IntegrationError, ParameterError
from qdspin.models import CircularPolarization, EvolutionSpec, PumpSpec, QuantumDotParams
from qdspin.units import Energy, Rate, Time, energy_to_omega


def _random_dot(rng) -> QuantumDotParams:
    gamma_e = rng.uniform(0.005, 0.05)
    return QuantumDotParams(
        fss_zero=Energy(rng.uniform(0.0, 40.0)),
        gamma_e=Rate(gamma_e),
        gamma_h=Rate(rng.uniform(0.0, 0.1 * gamma_e)),
        gamma_r=Rate(rng.uniform(0.0, 0.003)),
    )


def test_oracle_matches_closed_form_on_random_dots(rng):
    worst = 0.0
    for _ in range(200):
        qd = _random_dot(rng)
        closed = fidelity_godden(qd.fss_zero, qd.gamma_x, qd.gamma_h).f
        dynamic = oracle_fidelity(qd).f
        worst = max(worst, abs(dynamic - closed) / closed)
    assert worst <= 1e-6


@pytest.mark.parametrize("fss, expected", [(2.01, 0.9896), (13.2, 0.7615), (31.2, 0.582)])
def test_oracle_reproduces_tabulated_fidelities(fss, expected):
    qd = QuantumDotParams(fss_zero=Energy(fss), gamma_e=Rate(0.021), gamma_h=Rate(0.0), gamma_r=Rate(0.0))
    assert oracle_fidelity(qd).f == pytest.approx(expected, abs=5e-4)


def test_rk4_propagator_local_error_is_fifth_order(qd_e):
    m = _generator(energy_to_omega(qd_e.fss_zero).value, qd_e)
    h = 2.0
    errors = [np.abs(_rk4_propagator(m, step) - expm(m * step)).max() for step in (h, h / 2)]
    assert 28.0 < errors[0] / errors[1] < 36.0


def test_probability_is_conserved(qd_a):
    traj = evolve(EvolutionSpec(qd_a, t_max=Time(2000.0), dt=oracle_step(qd_a)))
    assert np.abs(traj.total_probability - 1.0).max() < 1e-7
    assert traj.vectors[:, [0, 1, 4, 5, 6]].min() > -1e-10
    assert traj.states[-1].trace() == pytest.approx(1.0, abs=1e-7)


def test_pi_pulse_creates_co_exciton(qd_e):
    traj = evolve(EvolutionSpec(qd_e, t_max=Time(10.0), dt=Time(0.1)))
    assert traj.n_co[0] == pytest.approx(1.0)
    assert traj.n_cross[0] == 0.0
    assert traj.p_empty[0] == pytest.approx(0.0, abs=1e-15)


def test_zero_pulse_area_leaves_dot_empty(qd_e):
    pump = PumpSpec(pulse_area=0.0)
    traj = evolve(EvolutionSpec(qd_e, t_max=Time(100.0), dt=Time(0.5), pump=pump))
    assert np.allclose(traj.p_empty, 1.0)
    assert np.allclose(traj.exciton_population, 0.0)


def test_pump_arrival_delays_excitation(qd_e):
    pump = PumpSpec(arrival=Time(50.0))
    traj = evolve(EvolutionSpec(qd_e, t_max=Time(200.0), dt=Time(0.5), pump=pump))
    i = traj.index_at(Time(50.0))
    assert traj.p_empty[i - 1] == pytest.approx(1.0)
    assert traj.n_co[i] == pytest.approx(1.0)


def test_pump_after_t_max_is_rejected(qd_e):
    pump = PumpSpec(arrival=Time(500.0))
    with pytest.raises(ParameterError):
        evolve(EvolutionSpec(qd_e, t_max=Time(100.0), dt=Time(0.5), pump=pump))


def test_sigma_minus_mirrors_sigma_plus(qd_c):
    plus = oracle_fidelity(qd_c)
    minus = oracle_fidelity(qd_c, pump=PumpSpec(polarization=CircularPolarization.SIGMA_MINUS))
    assert minus.f == pytest.approx(plus.f, rel=1e-12)

    spec = EvolutionSpec(
        qd_c,
        t_max=Time(1200.0),
        dt=oracle_step(qd_c),
        pump=PumpSpec(polarization=CircularPolarization.SIGMA_MINUS),
    )
    traj = evolve(spec)
    assert traj.target_hole_index == H_UP
    assert traj.p_hole_up[-1] > traj.p_hole_down[-1]


def test_sigma_plus_initializes_hole_down(qd_c):
    traj = evolve(EvolutionSpec(qd_c, t_max=Time(1200.0), dt=oracle_step(qd_c)))
    assert traj.target_hole_index == H_DOWN
    assert steady_hole_fidelity(traj).f == pytest.approx(
        traj.p_hole_down[-1] / (traj.p_hole_down[-1] + traj.p_hole_up[-1])
    )


def test_beat_signal_is_damped_cosine(qd_e):
    traj = evolve(EvolutionSpec(qd_e, t_max=Time(400.0), dt=Time(0.01)))
    beats = beat_signal(traj)
    t = beats.x
    delta = qd_e.fss_zero.value / HBAR_UEV_PS
    expected = np.exp(-qd_e.gamma_x.value * t) * np.cos(delta * t)
    assert np.abs(beats.y - expected).max() < 1e-9


def test_zero_fss_has_no_beats(qd_c):
    qd = qd_c.with_fss(Energy(0.0))
    traj = evolve(EvolutionSpec(qd, t_max=Time(300.0), dt=Time(0.5)))
    assert np.allclose(traj.n_cross, 0.0)
    assert oracle_fidelity(qd).f == pytest.approx(1.0, abs=1e-12)


def test_step_guard_rejects_coarse_grids(qd_e):
    omega = energy_to_omega(qd_e.fss_zero).value
    with pytest.raises(ParameterError):
        EvolutionSpec(qd_e, t_max=Time(100.0), dt=Time(0.06 / omega))
    EvolutionSpec(qd_e, t_max=Time(100.0), dt=Time(0.049 / omega))


def test_steady_state_needs_empty_exciton(qd_e):
    traj = evolve(EvolutionSpec(qd_e, t_max=Time(100.0), dt=Time(0.1)))
    with pytest.raises(IntegrationError):
        steady_hole_fidelity(traj)


def test_index_at_outside_trajectory(qd_e):
    traj = evolve(EvolutionSpec(qd_e, t_max=Time(10.0), dt=Time(0.1)))
    assert traj.index_at(Time(5.0)) == 50
    with pytest.raises(ParameterError):
        traj.index_at(Time(20.0))


def test_initial_state_round_trip():
    rho = np.array([[0.3, 0.1 + 0.05j], [0.1 - 0.05j, 0.2]])
    state = SystemState(rho, 0.1, 0.25, 0.15, Time(0.0))
    again = SystemState.from_vector(state.to_vector(), 0.0)
    assert np.allclose(again.rho_x, rho)
    assert again.trace() == pytest.approx(1.0)


def test_evolve_from_hole_state_keeps_it(qd_c):
    hole = SystemState(np.zeros((2, 2), dtype=complex), 0.0, 1.0, 0.0, Time(0.0))
    traj = evolve(EvolutionSpec(qd_c, t_max=Time(100.0), dt=Time(0.5), pump=PumpSpec(pulse_area=0.0)), hole)
    # Γh = 0: the hole never leaves
    assert np.allclose(traj.p_hole_up, 1.0)


def test_trajectory_frame_columns(qd_e):
    traj = evolve(EvolutionSpec(qd_e, t_max=Time(5.0), dt=Time(0.1)))
    frame = trajectory_frame(traj)
    assert list(frame.columns) == TRAJECTORY_COLUMNS
    assert len(frame) == len(traj) == 51
    assert frame["time_ps"].iloc[-1] == pytest.approx(5.0)


def test_oracle_step_resolves_fastest_rate(qd_e):
    dt = oracle_step(qd_e).value
    scale = max(energy_to_omega(qd_e.fss_zero).value, qd_e.gamma_x.value)
    assert dt * scale == pytest.approx(0.005)
    assert math.isfinite(dt)
