"""Open-system dynamics of exciton ionization into a single hole spin.

The density matrix is kept as a real 7-vector

    [n(X↑⇓), n(X↓⇑), Re ρ01, Im ρ01, p_empty, p(h⇑), p(h⇓)]

where ρ01 is the coherence between the two circular exciton states. The FSS
Hamiltonian (ħδ/2)·σx couples them; every exciton decays at ΓX and the
electron-tunneling part Γe feeds the spin-conserving hole (X↑⇓ → h⇓,
X↓⇑ → h⇑). Radiative decay and hole escape from the exciton empty the dot;
holes tunnel out at Γh.

The equations are linear, so a fixed RK4 step is a fixed 7×7 matrix. It is
built once from the RK4 stages and applied in blocks of matrix powers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
import pandas as pd

from .constants import (
    COHERENCE_TOLERANCE,
    ORACLE_STEP_FRACTION,
    ORACLE_TAIL,
    POSITIVITY_TOLERANCE,
    PROPAGATION_BLOCK,
    STEADY_STATE_EXCITON_LIMIT,
    TRACE_STEP_TOLERANCE,
    TRACE_TOTAL_TOLERANCE,
    TRAJECTORY_COLUMNS,
)
from .errors import IntegrationError, ParameterError
from .models import (
    CircularPolarization,
    EvolutionSpec,
    FidelityValue,
    PumpSpec,
    QuantumDotParams,
    Spectrum,
)
from .units import Energy, Time, energy_to_omega

# State-vector layout
X_UP = 0  # X↑⇓, bright under σ+
X_DOWN = 1  # X↓⇑, bright under σ-
RE_C = 2
IM_C = 3
EMPTY = 4
H_UP = 5
H_DOWN = 6
POPULATIONS = [X_UP, X_DOWN, EMPTY, H_UP, H_DOWN]


@dataclass(frozen=True)
class SystemState:
    """Snapshot of the {empty, X↑⇓, X↓⇑, h⇑, h⇓} manifold."""

    rho_x: np.ndarray
    p_empty: float
    p_hole_up: float
    p_hole_down: float
    time: Time

    @classmethod
    def vacuum(cls) -> "SystemState":
        return cls(np.zeros((2, 2), dtype=complex), 1.0, 0.0, 0.0, Time(0.0))

    @classmethod
    def from_vector(cls, v: np.ndarray, t: float) -> "SystemState":
        c = complex(v[RE_C], v[IM_C])
        rho = np.array([[v[X_UP], c], [c.conjugate(), v[X_DOWN]]], dtype=complex)
        return cls(rho, float(v[EMPTY]), float(v[H_UP]), float(v[H_DOWN]), Time(t))

    def to_vector(self) -> np.ndarray:
        c = self.rho_x[0, 1]
        return np.array(
            [
                self.rho_x[0, 0].real,
                self.rho_x[1, 1].real,
                c.real,
                c.imag,
                self.p_empty,
                self.p_hole_up,
                self.p_hole_down,
            ]
        )

    def trace(self) -> float:
        return float(np.trace(self.rho_x).real) + self.p_empty + self.p_hole_up + self.p_hole_down


@dataclass(frozen=True)
class Trajectory:
    """Time-ordered states; ``vectors`` has one 7-vector row per time stamp."""

    time: np.ndarray
    vectors: np.ndarray
    pump: PumpSpec
    fss: Energy

    def __len__(self) -> int:
        return int(self.time.size)

    @property
    def co_index(self) -> int:
        return X_UP if self.pump.polarization is CircularPolarization.SIGMA_PLUS else X_DOWN

    @property
    def cross_index(self) -> int:
        return X_DOWN if self.co_index == X_UP else X_UP

    @property
    def target_hole_index(self) -> int:
        # spin-conserving ionization of the pumped exciton
        return H_DOWN if self.co_index == X_UP else H_UP

    @property
    def other_hole_index(self) -> int:
        return H_UP if self.target_hole_index == H_DOWN else H_DOWN

    @property
    def n_co(self) -> np.ndarray:
        return self.vectors[:, self.co_index]

    @property
    def n_cross(self) -> np.ndarray:
        return self.vectors[:, self.cross_index]

    @property
    def re_coherence(self) -> np.ndarray:
        return self.vectors[:, RE_C]

    @property
    def im_coherence(self) -> np.ndarray:
        return self.vectors[:, IM_C]

    @property
    def p_empty(self) -> np.ndarray:
        return self.vectors[:, EMPTY]

    @property
    def p_hole_up(self) -> np.ndarray:
        return self.vectors[:, H_UP]

    @property
    def p_hole_down(self) -> np.ndarray:
        return self.vectors[:, H_DOWN]

    @property
    def exciton_population(self) -> np.ndarray:
        return self.vectors[:, X_UP] + self.vectors[:, X_DOWN]

    @property
    def total_probability(self) -> np.ndarray:
        return self.vectors[:, POPULATIONS].sum(axis=1)

    @property
    def states(self) -> List[SystemState]:
        return [SystemState.from_vector(v, t) for t, v in zip(self.time, self.vectors)]

    def state_at(self, index: int) -> SystemState:
        return SystemState.from_vector(self.vectors[index], self.time[index])

    def index_at(self, t: Time) -> int:
        """Index of the sample closest to ``t``.

        Raises:
            ParameterError: If ``t`` lies outside the trajectory
        """
        dt = self.time[1] - self.time[0] if len(self) > 1 else 0.0
        if t.value < self.time[0] or t.value > self.time[-1] + 0.5 * dt:
            raise ParameterError(
                f"t = {t} outside trajectory [{self.time[0]:g}, {self.time[-1]:g}] ps"
            )
        return int(np.argmin(np.abs(self.time - t.value)))


def _generator(omega: float, qd: QuantumDotParams) -> np.ndarray:
    g_x = qd.gamma_x.value
    g_e = qd.gamma_e.value
    g_h = qd.gamma_h.value
    g_r = qd.gamma_r.value

    m = np.zeros((7, 7))
    m[X_UP, X_UP] = -g_x
    m[X_UP, IM_C] = -omega
    m[X_DOWN, X_DOWN] = -g_x
    m[X_DOWN, IM_C] = omega
    m[RE_C, RE_C] = -g_x
    m[IM_C, X_UP] = 0.5 * omega
    m[IM_C, X_DOWN] = -0.5 * omega
    m[IM_C, IM_C] = -g_x
    m[EMPTY, X_UP] = g_r + g_h
    m[EMPTY, X_DOWN] = g_r + g_h
    m[EMPTY, H_UP] = g_h
    m[EMPTY, H_DOWN] = g_h
    m[H_UP, X_DOWN] = g_e
    m[H_UP, H_UP] = -g_h
    m[H_DOWN, X_UP] = g_e
    m[H_DOWN, H_DOWN] = -g_h
    return m


def _rk4_step(m: np.ndarray, x: np.ndarray, dt: float) -> np.ndarray:
    k1 = m @ x
    k2 = m @ (x + 0.5 * dt * k1)
    k3 = m @ (x + 0.5 * dt * k2)
    k4 = m @ (x + dt * k3)
    return x + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def _rk4_propagator(m: np.ndarray, dt: float) -> np.ndarray:
    # one RK4 step applied to every basis vector at once
    return _rk4_step(m, np.eye(m.shape[0]), dt)


def _propagate(p: np.ndarray, x0: np.ndarray, n_steps: int) -> np.ndarray:
    """Rows x0, P·x0, …, P^n·x0."""
    block = min(PROPAGATION_BLOCK, n_steps + 1)
    powers = np.empty((block, 7, 7))
    powers[0] = np.eye(7)
    for i in range(1, block):
        powers[i] = powers[i - 1] @ p
    jump = powers[-1] @ p

    out = np.empty((n_steps + 1, 7))
    x = x0
    for start in range(0, n_steps + 1, block):
        stop = min(start + block, n_steps + 1)
        out[start:stop] = powers[: stop - start] @ x
        x = jump @ x
    return out


def _apply_pump(x: np.ndarray, pump: PumpSpec) -> np.ndarray:
    """Instantaneous rotation of the {empty, pumped exciton} pair.

    Coherences between the empty dot and the excitons are not tracked.
    """
    idx = X_UP if pump.polarization is CircularPolarization.SIGMA_PLUS else X_DOWN
    half = 0.5 * pump.pulse_area
    c2 = math.cos(half) ** 2
    s2 = math.sin(half) ** 2
    y = x.copy()
    y[EMPTY] = c2 * x[EMPTY] + s2 * x[idx]
    y[idx] = s2 * x[EMPTY] + c2 * x[idx]
    y[RE_C] = math.cos(half) * x[RE_C]
    y[IM_C] = math.cos(half) * x[IM_C]
    return y


def _check_trajectory(time: np.ndarray, vectors: np.ndarray) -> None:
    total = vectors[:, POPULATIONS].sum(axis=1)
    step_drift = np.abs(np.diff(total))
    if step_drift.size and step_drift.max() > TRACE_STEP_TOLERANCE:
        i = int(np.argmax(step_drift)) + 1
        raise IntegrationError(
            f"probability changed by {step_drift.max():.3e} in one step at t = {time[i]:g} ps"
        )
    drift = np.abs(total - 1.0)
    if drift.max() > TRACE_TOTAL_TOLERANCE:
        i = int(np.argmax(drift))
        raise IntegrationError(f"total probability {total[i]:.12f} at t = {time[i]:g} ps")

    pops = vectors[:, POPULATIONS]
    if pops.min() < -POSITIVITY_TOLERANCE:
        i = int(np.unravel_index(np.argmin(pops), pops.shape)[0])
        raise IntegrationError(
            f"population {pops.min():.3e} below zero at t = {time[i]:g} ps; reduce dt"
        )
    excess = (
        vectors[:, RE_C] ** 2 + vectors[:, IM_C] ** 2 - vectors[:, X_UP] * vectors[:, X_DOWN]
    )
    if excess.max() > COHERENCE_TOLERANCE:
        i = int(np.argmax(excess))
        raise IntegrationError(f"exciton coherence exceeds populations at t = {time[i]:g} ps")


def evolve(spec: EvolutionSpec, initial: Optional[SystemState] = None) -> Trajectory:
    """Integrate the level scheme on a fixed RK4 grid.

    The pump is applied at the grid point nearest its arrival time; the state
    stored there is the post-pump state.

    Args:
        spec: Dot, grid and pump description
        initial: State at t = 0 (empty dot by default)

    Returns:
        Trajectory sampled at t = 0, dt, 2dt, …

    Raises:
        ParameterError: If the pump arrives after t_max
        IntegrationError: If probability or positivity is lost
    """
    dt = spec.dt.value
    n = spec.n_steps
    k = int(round(spec.pump.arrival.value / dt))
    if k > n:
        raise ParameterError(f"pump arrival {spec.pump.arrival} is after t_max {spec.t_max}")

    p = _rk4_propagator(_generator(spec.omega, spec.qd), dt)
    x0 = (initial or SystemState.vacuum()).to_vector()

    before = _propagate(p, x0, k)
    after = _propagate(p, _apply_pump(before[-1], spec.pump), n - k)
    vectors = np.concatenate([before[:-1], after])
    time = np.arange(n + 1) * dt

    _check_trajectory(time, vectors)
    return Trajectory(time=time, vectors=vectors, pump=spec.pump, fss=spec.fss)


def steady_hole_fidelity(traj: Trajectory) -> FidelityValue:
    """Hole-spin fidelity p_target/(p_target + p_other) at the final time.

    Raises:
        IntegrationError: If excitons remain or no hole was created
    """
    last = traj.vectors[-1]
    exciton = last[X_UP] + last[X_DOWN]
    if exciton > STEADY_STATE_EXCITON_LIMIT:
        raise IntegrationError(
            f"exciton population {exciton:.3e} remains at t = {traj.time[-1]:g} ps; "
            "extend t_max"
        )
    target = last[traj.target_hole_index]
    other = last[traj.other_hole_index]
    total = target + other
    if total <= 1e-14:
        raise IntegrationError("no hole population at the final time")
    return FidelityValue(float(min(max(target / total, 0.0), 1.0)))


def beat_signal(traj: Trajectory) -> Spectrum:
    """Exciton spin beats n_co(t) − n_cross(t) on the trajectory grid."""
    return Spectrum(
        traj.time,
        traj.n_co - traj.n_cross,
        meta={"x_label": "time", "x_unit": "ps", "y_label": "n_co - n_cross", "y_unit": "1"},
    )


def oracle_step(qd: QuantumDotParams, fss: Optional[Energy] = None, fraction: float = ORACLE_STEP_FRACTION) -> Time:
    omega = abs(energy_to_omega(fss if fss is not None else qd.fss_zero).value)
    return Time(fraction / max(omega, qd.gamma_x.value))


def oracle_fidelity(
    qd: QuantumDotParams,
    fss: Optional[Energy] = None,
    pump: Optional[PumpSpec] = None,
) -> FidelityValue:
    """Brute-force fidelity from a trajectory long enough for the exciton to empty."""
    pump = pump or PumpSpec()
    if not qd.gamma_x.value > 0:
        raise ParameterError("oracle needs a decaying exciton (gamma_x > 0)")
    t_max = pump.arrival.value + math.log(1.0 / ORACLE_TAIL) / qd.gamma_x.value
    spec = EvolutionSpec(
        qd=qd,
        t_max=Time(t_max),
        dt=oracle_step(qd, fss),
        pump=pump,
        fss_override=fss,
    )
    return steady_hole_fidelity(evolve(spec))


def trajectory_frame(traj: Trajectory) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "time_ps": traj.time,
            "n_co": traj.n_co,
            "n_cross": traj.n_cross,
            "re_coherence": traj.re_coherence,
            "im_coherence": traj.im_coherence,
            "p_hole_up": traj.p_hole_up,
            "p_hole_down": traj.p_hole_down,
            "p_empty": traj.p_empty,
        },
        columns=TRAJECTORY_COLUMNS,
    )
