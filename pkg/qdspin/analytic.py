"""Closed-form fidelity and fine-structure tuning models.

All energies are µeV, rates ps⁻¹, CW intensities kW·cm⁻². The ``*_values``
kernels are plain numpy functions shared with the fitting models and the
scenario sweeps; the typed functions validate their inputs and wrap results.
"""

from __future__ import annotations

import math

import numpy as np

from .constants import EV_TO_UEV, HBAR_UEV_PS, KW_PER_CM2_TO_W_PER_UM2, MEV2_TO_UEV2
from .errors import ModelDomainError, ParameterError
from .models import CwDriveConfig, FidelityValue, FssValue, QuantumDotParams, QubitTimescales
from .units import Energy, Field, Intensity, Rate, Time, require, ueV_to_rad_per_ps


# Array kernels
def fidelity_values(fss_ueV, g):
    """F = 1 − ½·δ²/(δ² + g²) with δ = fss/ħ and g = ΓX − Γh (ps⁻¹)."""
    delta = ueV_to_rad_per_ps(np.asarray(fss_ueV, dtype=float))
    d2 = delta * delta
    return 1.0 - 0.5 * d2 / (d2 + g * g)


def rabi_energy_sq_values(intensity_kw_cm2, a_dipole):
    """(ħΩ)² in µeV² for a CW intensity in kW·cm⁻² and a in meV²·µm²·W⁻¹."""
    irradiance = np.multiply(intensity_kw_cm2, KW_PER_CM2_TO_W_PER_UM2)
    return a_dipole * irradiance * MEV2_TO_UEV2


def detuning_values(intensity_kw_cm2, delta_cw_zero, k_screen):
    """ħΔ_CW(I) in µeV; k_screen is in eV·µm²·W⁻¹."""
    irradiance = np.multiply(intensity_kw_cm2, KW_PER_CM2_TO_W_PER_UM2)
    return delta_cw_zero - k_screen * irradiance * EV_TO_UEV


def ose_shift_values(intensity_kw_cm2, s, delta_cw_zero, a_dipole, k_screen):
    """Signed Stark shift of the FSS in µeV.

    Written as (s/2)·ħ²Ω²/(√(Δ² + ħ²Ω²) + Δ), algebraically equal to
    (s/2)(√(Δ² + ħ²Ω²) − Δ) without the cancellation at small drive.
    """
    w2 = rabi_energy_sq_values(intensity_kw_cm2, a_dipole)
    det = detuning_values(intensity_kw_cm2, delta_cw_zero, k_screen)
    denom = np.sqrt(det * det + w2) + det
    with np.errstate(divide="ignore", invalid="ignore"):
        shift = np.where(w2 > 0, 0.5 * s * w2 / np.where(w2 > 0, denom, 1.0), 0.0)
    return shift


def ose_fss_values(intensity_kw_cm2, s, fss_zero, delta_cw_zero, a_dipole, k_screen):
    """Unclamped δ_FS(I) = δ|I=0 + Δω(I)."""
    return fss_zero + ose_shift_values(intensity_kw_cm2, s, delta_cw_zero, a_dipole, k_screen)


# Typed models
def fidelity_godden(fss: Energy, gamma_x: Rate, gamma_h: Rate) -> FidelityValue:
    """Steady-state hole-spin fidelity after exciton ionization.

    Args:
        fss: Fine-structure splitting ħδ_FS
        gamma_x: Total exciton decay rate ΓX = Γr + Γe + Γh
        gamma_h: Hole tunneling rate Γh

    Returns:
        FidelityValue in [0.5, 1]

    Raises:
        ModelDomainError: If gamma_x <= gamma_h
    """
    require(fss, Energy, "fss")
    require(gamma_x, Rate, "gamma_x")
    require(gamma_h, Rate, "gamma_h")
    g = gamma_x.value - gamma_h.value
    if not g > 0:
        raise ModelDomainError(
            f"gamma_x ({gamma_x}) must exceed gamma_h ({gamma_h}); the hole would outlive its feeding"
        )
    return FidelityValue(float(fidelity_values(fss.value, g)))


def fss_at_field(qd: QuantumDotParams, e: Field) -> FssValue:
    """Linearized FSS at DC field ``e``: fss_zero + χE·(e − e_ref), clamped at 0."""
    require(e, Field, "e")
    raw = qd.fss_zero.value + qd.chi_e.value * (e.value - qd.e_ref.value)
    if raw < 0:
        return FssValue(Energy(0.0), clamped=True)
    return FssValue(Energy(raw))


def delta_cw_at_intensity(cw: CwDriveConfig) -> Energy:
    """Effective CW detuning ħΔ_CW(I) = ħΔ_CW|I=0 − k·I."""
    return Energy(float(detuning_values(cw.intensity.value, cw.delta_cw_zero.value, cw.k_screen)))


def _checked_detuning(cw: CwDriveConfig) -> float:
    det = delta_cw_at_intensity(cw).value
    if not det > 0:
        raise ModelDomainError(
            f"effective CW detuning {det:.4g} µeV at I = {cw.intensity} is not positive; "
            "the dispersive Stark model does not apply"
        )
    return det


def ose_shift(cw: CwDriveConfig) -> Energy:
    """Optical-Stark change of the FSS.

    V polarization lowers the FSS (negative shift), H raises it.

    Raises:
        ModelDomainError: If the effective detuning is not positive
    """
    _checked_detuning(cw)
    return Energy(
        float(
            ose_shift_values(
                cw.intensity.value, cw.s, cw.delta_cw_zero.value, cw.a_dipole, cw.k_screen
            )
        )
    )


def ose_shift_dispersive(cw: CwDriveConfig) -> Energy:
    """Small-drive limit s·ħ²Ω²/(4ħΔ_CW) of :func:`ose_shift`."""
    det = _checked_detuning(cw)
    w2 = float(rabi_energy_sq_values(cw.intensity.value, cw.a_dipole))
    return Energy(cw.s * w2 / (4.0 * det))


def fss_after_ose(fss_zero: Energy, cw: CwDriveConfig) -> FssValue:
    require(fss_zero, Energy, "fss_zero")
    raw = fss_zero.value + ose_shift(cw).value
    if raw < 0:
        return FssValue(Energy(0.0), clamped=True)
    return FssValue(Energy(raw))


def fidelity_vs_intensity(qd: QuantumDotParams, cw: CwDriveConfig) -> FidelityValue:
    """Fidelity with the FSS Stark-tuned by the CW drive.

    At zero intensity the shift is exactly 0 and this is the same evaluation as
    :func:`fidelity_godden` on ``qd.fss_zero``.
    """
    fss = fss_after_ose(qd.fss_zero, cw)
    return fidelity_godden(fss.energy, qd.gamma_x, qd.gamma_h)


def fidelity_lower_bound(pc_cross: float, noise_sigma: float, n_samples: int) -> FidelityValue:
    """Noise-floor lower bound on the fidelity when no co-polarized peak is seen.

    The unresolved co-polarized amplitude is bounded by ε = σ/√N, the standard
    error of the mean over N points inside the laser FWHM.

    Args:
        pc_cross: Cross-polarized trion peak amplitude (pA)
        noise_sigma: Photocurrent noise standard deviation (pA)
        n_samples: Number of points averaged

    Returns:
        FidelityValue flagged as a lower bound

    Raises:
        ParameterError: If pc_cross <= 0, noise_sigma < 0 or n_samples < 2
    """
    if not pc_cross > 0:
        raise ParameterError(f"pc_cross must be > 0, got {pc_cross}")
    if not noise_sigma >= 0:
        raise ParameterError(f"noise_sigma must be >= 0, got {noise_sigma}")
    if n_samples < 2:
        raise ParameterError(f"n_samples must be >= 2, got {n_samples}")
    eps = noise_sigma / math.sqrt(n_samples)
    return FidelityValue(
        pc_cross / (pc_cross + eps),
        is_lower_bound=True,
        sigma=eps,
        n_samples=int(n_samples),
    )


def qubit_timescales(qd: QuantumDotParams) -> QubitTimescales:
    """Initialization time 1/Γe, hole lifetime 1/Γh and the 2Th > T₂* flag."""
    if not (qd.gamma_e.value > 0 and qd.gamma_h.value > 0):
        raise ModelDomainError("qubit timescales need gamma_e > 0 and gamma_h > 0")
    lifetime = 1.0 / qd.gamma_h.value
    return QubitTimescales(
        init_time=Time(1.0 / qd.gamma_e.value),
        hole_lifetime=Time(lifetime),
        meets_2th_gt_t2star=2.0 * lifetime > qd.t2_star.value,
    )


def decay_limited_linewidth(qd: QuantumDotParams) -> Energy:
    """Homogeneous exciton linewidth ħΓX."""
    return Energy(HBAR_UEV_PS * qd.gamma_x.value)


def with_intensity(cw: CwDriveConfig, intensity_kw_cm2: float) -> CwDriveConfig:
    return cw.with_intensity(Intensity(intensity_kw_cm2))
