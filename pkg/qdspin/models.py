from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from datetime import datetime
from enum import Enum
from typing import Any, Dict, Optional

import numpy as np

from .constants import (
    DEFAULT_E_REF_KV_CM,
    DEFAULT_GAMMA_R,
    DEFAULT_PC_SCALE_PA,
    DEFAULT_PROBE_DELAY_PS,
    DEFAULT_PULSE_FWHM_UEV,
    DEFAULT_T2_STAR_PS,
    DEFAULT_TRION_BINDING_UEV,
    DEFAULT_X0_DIP_FRACTION,
    DEFAULT_CW_LINEWIDTH_UEV,
    DEFAULT_CW_SPAN_UEV,
    DEFAULT_CW_STEP_UEV,
    DEFAULT_DETUNING_STEP_UEV,
    ERROR_CORRECTION_THRESHOLD,
    RESOLUTION_GUARD,
)
from .errors import ParameterError
from .units import (
    Energy,
    Field,
    FssSlope,
    Intensity,
    Rate,
    Time,
    energy_to_omega,
    require,
)


class LinearPolarization(str, Enum):
    H = "H"
    V = "V"

    @property
    def s(self) -> int:
        """Stark-shift sign: +1 raises the FSS (H), -1 lowers it (V)."""
        return 1 if self is LinearPolarization.H else -1


class CircularPolarization(str, Enum):
    SIGMA_PLUS = "sigma+"
    SIGMA_MINUS = "sigma-"


class ProbePolarization(str, Enum):
    CO = "co"
    CROSS = "cross"


@dataclass(frozen=True)
class QuantumDotParams:
    """One dot's physical record.

    ΓX is always derived as Γr + Γe + Γh and never stored.
    """

    fss_zero: Energy
    gamma_e: Rate
    gamma_h: Rate
    gamma_r: Rate = Rate(DEFAULT_GAMMA_R)
    chi_e: FssSlope = FssSlope(0.0)
    e_ref: Field = Field(DEFAULT_E_REF_KV_CM)
    trion_binding: Energy = Energy(DEFAULT_TRION_BINDING_UEV)
    t2_star: Time = Time(DEFAULT_T2_STAR_PS)
    name: str = "qd"

    def __post_init__(self) -> None:
        require(self.fss_zero, Energy, "fss_zero")
        require(self.gamma_e, Rate, "gamma_e")
        require(self.gamma_h, Rate, "gamma_h")
        require(self.gamma_r, Rate, "gamma_r")
        require(self.chi_e, FssSlope, "chi_e")
        require(self.e_ref, Field, "e_ref")
        require(self.trion_binding, Energy, "trion_binding")
        require(self.t2_star, Time, "t2_star")
        if not self.gamma_e.value > self.gamma_h.value:
            raise ParameterError(
                f"{self.name}: gamma_e ({self.gamma_e}) must exceed gamma_h ({self.gamma_h})"
            )

    @property
    def gamma_x(self) -> Rate:
        return Rate(self.gamma_r.value + self.gamma_e.value + self.gamma_h.value)

    def with_rates(self, gamma_e: Rate, gamma_h: Rate) -> "QuantumDotParams":
        return replace(self, gamma_e=gamma_e, gamma_h=gamma_h)

    def with_fss(self, fss: Energy) -> "QuantumDotParams":
        return replace(self, fss_zero=fss)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "fss_zero_ueV": self.fss_zero.value,
            "gamma_e_per_ps": self.gamma_e.value,
            "gamma_h_per_ps": self.gamma_h.value,
            "gamma_r_per_ps": self.gamma_r.value,
            "gamma_x_per_ps": self.gamma_x.value,
            "chi_e_ueV_per_kV_cm": self.chi_e.value,
            "e_ref_kV_cm": self.e_ref.value,
            "trion_binding_ueV": self.trion_binding.value,
            "t2_star_ps": self.t2_star.value,
        }


@dataclass(frozen=True)
class CwDriveConfig:
    """Detuned CW laser used to Stark-tune the fine-structure splitting.

    a_dipole is in meV²·µm²·W⁻¹ and k_screen in eV·µm²·W⁻¹, as tabulated.
    """

    polarization: LinearPolarization
    delta_cw_zero: Energy
    a_dipole: float
    k_screen: float
    intensity: Intensity = Intensity(0.0)
    name: str = "cw"

    def __post_init__(self) -> None:
        object.__setattr__(self, "polarization", LinearPolarization(self.polarization))
        require(self.delta_cw_zero, Energy, "delta_cw_zero")
        require(self.intensity, Intensity, "intensity")
        if not self.a_dipole >= 0:
            raise ParameterError(f"a_dipole must be >= 0, got {self.a_dipole}")
        if not math.isfinite(self.k_screen):
            raise ParameterError(f"k_screen must be finite, got {self.k_screen}")

    @property
    def s(self) -> int:
        return self.polarization.s

    def with_intensity(self, intensity: Intensity) -> "CwDriveConfig":
        return replace(self, intensity=intensity)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "polarization": self.polarization.value,
            "s": self.s,
            "delta_cw_zero_ueV": self.delta_cw_zero.value,
            "a_meV2_um2_per_W": self.a_dipole,
            "k_eV_um2_per_W": self.k_screen,
            "intensity_kW_cm2": self.intensity.value,
        }


@dataclass(frozen=True)
class FidelityValue:
    f: float
    is_lower_bound: bool = False
    sigma: Optional[float] = None
    n_samples: Optional[int] = None

    def __post_init__(self) -> None:
        if not (0.0 <= self.f <= 1.0):
            raise ParameterError(f"fidelity must lie in [0, 1], got {self.f}")

    @property
    def error_rate(self) -> float:
        return 1.0 - self.f

    @property
    def meets_error_threshold(self) -> bool:
        return self.error_rate < ERROR_CORRECTION_THRESHOLD

    def to_dict(self) -> Dict[str, Any]:
        return {
            "fidelity": self.f,
            "is_lower_bound": self.is_lower_bound,
            "sigma": self.sigma,
            "n_samples": self.n_samples,
            "meets_error_threshold": self.meets_error_threshold,
        }


@dataclass(frozen=True)
class FssValue:
    """Fine-structure splitting after a tuning model, clamped at zero."""

    energy: Energy
    clamped: bool = False

    @property
    def value(self) -> float:
        return self.energy.value


@dataclass(frozen=True)
class QubitTimescales:
    init_time: Time
    hole_lifetime: Time
    meets_2th_gt_t2star: bool

    def to_dict(self) -> Dict[str, Any]:
        return {
            "init_time_ps": self.init_time.value,
            "hole_lifetime_ps": self.hole_lifetime.value,
            "meets_2th_gt_t2star": self.meets_2th_gt_t2star,
        }


@dataclass(frozen=True)
class PumpSpec:
    polarization: CircularPolarization = CircularPolarization.SIGMA_PLUS
    pulse_area: float = math.pi
    arrival: Time = Time(0.0)

    def __post_init__(self) -> None:
        object.__setattr__(self, "polarization", CircularPolarization(self.polarization))
        require(self.arrival, Time, "arrival")
        if not (0.0 <= self.pulse_area <= 2.0 * math.pi):
            raise ParameterError(f"pulse_area must lie in [0, 2π], got {self.pulse_area}")


@dataclass(frozen=True)
class EvolutionSpec:
    qd: QuantumDotParams
    t_max: Time
    dt: Time
    pump: PumpSpec = PumpSpec()
    fss_override: Optional[Energy] = None

    def __post_init__(self) -> None:
        require(self.t_max, Time, "t_max")
        require(self.dt, Time, "dt")
        if self.fss_override is not None:
            require(self.fss_override, Energy, "fss_override")
        if not self.dt.value > 0:
            raise ParameterError("dt must be > 0")
        if self.t_max.value < self.dt.value:
            raise ParameterError("t_max must cover at least one step")
        rate_scale = max(abs(self.omega), self.qd.gamma_x.value)
        if self.dt.value * rate_scale > RESOLUTION_GUARD:
            raise ParameterError(
                f"step-size guard violated: dt·max(δ, ΓX) = {self.dt.value * rate_scale:.3g} "
                f"> {RESOLUTION_GUARD}"
            )

    @property
    def fss(self) -> Energy:
        return self.fss_override if self.fss_override is not None else self.qd.fss_zero

    @property
    def omega(self) -> float:
        return energy_to_omega(self.fss).value

    @property
    def n_steps(self) -> int:
        return int(math.ceil(self.t_max.value / self.dt.value - 1e-9))


@dataclass(frozen=True)
class Spectrum:
    """Sampled curve with optional per-point noise and free-form metadata."""

    x: np.ndarray
    y: np.ndarray
    sigma: Optional[np.ndarray] = None
    meta: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim != 1 or x.shape != y.shape:
            raise ParameterError(f"x and y must be 1-D of equal length, got {x.shape} and {y.shape}")
        if x.size > 1:
            d = np.diff(x)
            if not (np.all(d > 0) or np.all(d < 0)):
                raise ParameterError("x must be strictly monotone")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if self.sigma is not None:
            s = np.broadcast_to(np.asarray(self.sigma, dtype=float), x.shape).copy()
            object.__setattr__(self, "sigma", s)

    def __len__(self) -> int:
        return int(self.x.size)

    def with_y(self, y: np.ndarray, sigma: Optional[np.ndarray] = None, **meta: Any) -> "Spectrum":
        return Spectrum(self.x, y, sigma, {**self.meta, **meta})


@dataclass(frozen=True)
class SpectrumConfig:
    pulse_fwhm: Energy = Energy(DEFAULT_PULSE_FWHM_UEV)
    trion_binding: Energy = Energy(DEFAULT_TRION_BINDING_UEV)
    probe_delay: Time = Time(DEFAULT_PROBE_DELAY_PS)
    noise_sigma: float = 0.0
    rng_seed: int = 0
    pc_scale: float = DEFAULT_PC_SCALE_PA
    x0_dip: float = DEFAULT_X0_DIP_FRACTION
    detuning_step: Energy = Energy(DEFAULT_DETUNING_STEP_UEV)

    def __post_init__(self) -> None:
        require(self.pulse_fwhm, Energy, "pulse_fwhm")
        require(self.trion_binding, Energy, "trion_binding")
        require(self.probe_delay, Time, "probe_delay")
        require(self.detuning_step, Energy, "detuning_step")
        if not self.pulse_fwhm.value > 0:
            raise ParameterError("pulse_fwhm must be > 0")
        if not self.noise_sigma >= 0:
            raise ParameterError("noise_sigma must be >= 0")
        if not self.detuning_step.value > 0:
            raise ParameterError("detuning_step must be > 0")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "pulse_fwhm_ueV": self.pulse_fwhm.value,
            "trion_binding_ueV": self.trion_binding.value,
            "probe_delay_ps": self.probe_delay.value,
            "noise_sigma_pA": self.noise_sigma,
            "rng_seed": self.rng_seed,
            "pc_scale_pA": self.pc_scale,
            "x0_dip": self.x0_dip,
            "detuning_step_ueV": self.detuning_step.value,
        }


@dataclass(frozen=True)
class CwLineConfig:
    """High-resolution CW photocurrent line scan of the neutral exciton."""

    fss: Energy
    linewidth: Energy = Energy(DEFAULT_CW_LINEWIDTH_UEV)
    waveplate_zero: float = 0.0  # deg
    e_v: Energy = Energy(0.0)
    amplitude: float = DEFAULT_PC_SCALE_PA
    noise_sigma: float = 0.0
    rng_seed: int = 0
    span: Energy = Energy(DEFAULT_CW_SPAN_UEV)
    step: Energy = Energy(DEFAULT_CW_STEP_UEV)

    def __post_init__(self) -> None:
        for name in ("fss", "linewidth", "e_v", "span", "step"):
            require(getattr(self, name), Energy, name)
        if not self.linewidth.value > 0:
            raise ParameterError("linewidth must be > 0")
        if not self.step.value > 0 or not self.span.value > 0:
            raise ParameterError("span and step must be > 0")
        if not self.noise_sigma >= 0:
            raise ParameterError("noise_sigma must be >= 0")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "fss_ueV": self.fss.value,
            "linewidth_ueV": self.linewidth.value,
            "waveplate_zero_deg": self.waveplate_zero,
            "e_v_ueV": self.e_v.value,
            "amplitude_pA": self.amplitude,
            "noise_sigma_pA": self.noise_sigma,
            "rng_seed": self.rng_seed,
        }


def generate_run_id() -> str:
    """Generate a unique run id."""
    return datetime.now().strftime("%Y%m%d_%H%M%S")
