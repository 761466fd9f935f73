"""Synthetic photocurrent spectra and the estimators that read fidelity back out.

Two-color spectra: after the pump has initialized a hole, a probe π pulse of
the given circular polarization addresses one hole spin through the positive
trion. The trion peak sits at the trion binding energy with the Gaussian line
shape of the transform-limited probe; a negative dip at zero detuning is left
over from subtracting the neutral-exciton peak. The cross-polarized probe sees
the target hole, the co-polarized probe sees the other one.
"""

from __future__ import annotations

import math
from dataclasses import replace
from typing import Iterable, Optional, Tuple

import numpy as np

from .analytic import fidelity_lower_bound
from .constants import PEAK_DETECTION_SIGMAS
from .dynamics import Trajectory
from .errors import FitError, ParameterError, SynthesisError
from .fitting import GAUSSIAN, LORENTZIAN, fit, gaussian_amplitude_model, model_gaussian, model_lorentzian
from .models import CwLineConfig, FidelityValue, ProbePolarization, Spectrum, SpectrumConfig
from .units import Time

PROBE_STREAM = {ProbePolarization.CO: 0, ProbePolarization.CROSS: 1}


def detuning_grid(cfg: SpectrumConfig) -> np.ndarray:
    """Probe detunings (µeV) on integer multiples of the configured step.

    Covers two pulse FWHM below zero detuning to two above the trion energy.
    """
    step = cfg.detuning_step.value
    width = 2.0 * cfg.pulse_fwhm.value
    lo = math.floor(-width / step)
    hi = math.ceil((cfg.trion_binding.value + width) / step)
    return np.arange(lo, hi + 1) * step


def _two_color(population: float, cfg: SpectrumConfig, probe_pol: ProbePolarization) -> Spectrum:
    probe_pol = ProbePolarization(probe_pol)
    x = detuning_grid(cfg)
    fwhm = cfg.pulse_fwhm.value
    y = cfg.pc_scale * population * model_gaussian(x, 1.0, cfg.trion_binding.value, fwhm, 0.0)
    y = y - cfg.x0_dip * cfg.pc_scale * model_gaussian(x, 1.0, 0.0, fwhm, 0.0)

    sigma = None
    if cfg.noise_sigma > 0:
        rng = np.random.default_rng([cfg.rng_seed, PROBE_STREAM[probe_pol]])
        y = y + rng.normal(0.0, cfg.noise_sigma, size=x.size)
        sigma = np.full(x.size, cfg.noise_sigma)

    return Spectrum(
        x,
        y,
        sigma,
        meta={
            "x_label": "probe detuning",
            "x_unit": "ueV",
            "y_label": "photocurrent",
            "y_unit": "pA",
            "probe": probe_pol.value,
            "population": population,
            "seed": cfg.rng_seed,
        },
    )


def synth_two_color_spectrum(
    traj: Trajectory,
    cfg: SpectrumConfig,
    probe_pol: ProbePolarization,
) -> Spectrum:
    """Two-color pump-probe spectrum at the configured probe delay.

    Raises:
        SynthesisError: If the probe delay lies outside the trajectory
    """
    try:
        i = traj.index_at(cfg.probe_delay)
    except ParameterError as e:
        raise SynthesisError(f"probe delay: {e}") from e
    probe_pol = ProbePolarization(probe_pol)
    hole = traj.target_hole_index if probe_pol is ProbePolarization.CROSS else traj.other_hole_index
    spectrum = _two_color(float(traj.vectors[i, hole]), cfg, probe_pol)
    return spectrum.with_y(
        spectrum.y,
        spectrum.sigma,
        probe_delay_ps=float(traj.time[i]),
        exciton_population=float(traj.exciton_population[i]),
    )


def synth_two_color_pair_from_fidelity(f: float, cfg: SpectrumConfig) -> Tuple[Spectrum, Spectrum]:
    """(co, cross) spectra for hole populations (1 − f, f)."""
    if not (0.0 <= f <= 1.0):
        raise ParameterError(f"fidelity must lie in [0, 1], got {f}")
    return (
        _two_color(1.0 - f, cfg, ProbePolarization.CO),
        _two_color(f, cfg, ProbePolarization.CROSS),
    )


def _window(spectrum: Spectrum, center: float, half_width: float) -> Spectrum:
    mask = np.abs(spectrum.x - center) <= half_width
    sigma = None if spectrum.sigma is None else spectrum.sigma[mask]
    return Spectrum(spectrum.x[mask], spectrum.y[mask], sigma, dict(spectrum.meta))


def extract_fidelity(spec_co: Spectrum, spec_cross: Spectrum, cfg: SpectrumConfig) -> FidelityValue:
    """Fidelity from the trion peak amplitudes, A_cross/(A_cross + A_co).

    The cross peak is fitted freely near the trion energy; the co peak is
    fitted with the cross peak's center and width. When the co amplitude is
    below twice its own uncertainty the noise-floor lower bound is returned
    instead, using the co points within the pulse FWHM.

    Raises:
        SynthesisError: If the grids differ or no cross peak is detected
    """
    if spec_co.x.shape != spec_cross.x.shape or not np.allclose(spec_co.x, spec_cross.x):
        raise SynthesisError("co and cross spectra must share the detuning grid")

    fwhm = cfg.pulse_fwhm.value
    trion = cfg.trion_binding.value
    cross = _window(spec_cross, trion, 2.0 * fwhm)
    co = _window(spec_co, trion, 2.0 * fwhm)

    try:
        res_x = fit(GAUSSIAN, cross)
    except FitError as e:
        raise SynthesisError(f"cross-polarized trion peak not detected: {e}") from e
    a_x, s_x = res_x["A"], res_x.sigma("A")
    if not (a_x > 0 and a_x >= PEAK_DETECTION_SIGMAS * s_x):
        raise SynthesisError(
            f"cross-polarized trion peak not detected (A = {a_x:.3g} ± {s_x:.2g} pA)"
        )
    x0, width = res_x["x0"], abs(res_x["fwhm"])

    try:
        res_c = fit(gaussian_amplitude_model(x0, width), co)
        a_c, s_c = res_c["A"], res_c.sigma("A")
    except FitError:
        a_c, s_c = 0.0, math.inf

    if a_c > 0 and a_c >= PEAK_DETECTION_SIGMAS * s_c:
        total = a_x + a_c
        sigma_f = math.sqrt((a_c * s_x) ** 2 + (a_x * s_c) ** 2) / total**2
        return FidelityValue(a_x / total, sigma=sigma_f)

    inner = np.abs(spec_co.x - x0) <= 0.5 * width
    n = int(np.count_nonzero(inner))
    if n < 2:
        raise SynthesisError(f"only {n} co-polarized points inside the pulse FWHM")
    noise = float(np.std(spec_co.y[inner], ddof=1))
    return fidelity_lower_bound(a_x, noise, n)


def _line_grid(cfg: CwLineConfig) -> np.ndarray:
    n = int(round(cfg.span.value / cfg.step.value))
    return cfg.e_v.value + np.arange(-n, n + 1) * cfg.step.value


def line_center(cfg: CwLineConfig, angle: float) -> float:
    """Line center E_V + fss·sin²(2(θ − θ_zero)) for a half-wave plate at θ degrees."""
    return cfg.e_v.value + cfg.fss.value * math.sin(math.radians(2.0 * (angle - cfg.waveplate_zero))) ** 2


def synth_cw_line_scan(cfg: CwLineConfig, angle: float, index: int = 0) -> Spectrum:
    """High-resolution CW photocurrent scan of the neutral exciton at one waveplate angle.

    ``index`` selects the noise stream so each angle of a scan gets its own draw.
    """
    x = _line_grid(cfg)
    center = line_center(cfg, angle)
    y = model_lorentzian(x, cfg.amplitude, center, cfg.linewidth.value, 0.0)
    sigma = None
    if cfg.noise_sigma > 0:
        rng = np.random.default_rng([cfg.rng_seed, index])
        y = y + rng.normal(0.0, cfg.noise_sigma, size=x.size)
        sigma = np.full(x.size, cfg.noise_sigma)
    return Spectrum(
        x,
        y,
        sigma,
        meta={
            "x_label": "laser energy",
            "x_unit": "ueV",
            "y_label": "photocurrent",
            "y_unit": "pA",
            "angle_deg": angle,
            "center_ueV": center,
            "seed": cfg.rng_seed,
        },
    )


def synth_waveplate_scan(cfg: CwLineConfig, angles: Iterable[float]) -> Spectrum:
    """Lorentzian-fitted line centers vs waveplate angle."""
    angles = np.asarray(list(angles), dtype=float)
    centers = np.empty(angles.size)
    errors = np.empty(angles.size)
    for i, angle in enumerate(angles):
        res = fit(LORENTZIAN, synth_cw_line_scan(cfg, float(angle), index=i))
        centers[i] = res["x0"]
        errors[i] = res.sigma("x0")
    sigma = errors if cfg.noise_sigma > 0 else None
    return Spectrum(
        angles,
        centers,
        sigma,
        meta={
            "x_label": "waveplate angle",
            "x_unit": "deg",
            "y_label": "line center",
            "y_unit": "ueV",
            "seed": cfg.rng_seed,
        },
    )


def line_center_precision(cfg: CwLineConfig, n_trials: int = 200, angle: float = 0.0) -> dict:
    """Monte-Carlo scatter of the fitted line center against linewidth/(SNR·√N).

    N counts the scan points within one FWHM of the line.
    """
    if not cfg.noise_sigma > 0:
        raise ParameterError("line_center_precision needs noise_sigma > 0")
    centers = np.array(
        [fit(LORENTZIAN, synth_cw_line_scan(cfg, angle, index=i))["x0"] for i in range(n_trials)]
    )
    x = _line_grid(cfg)
    n_in = int(np.count_nonzero(np.abs(x - line_center(cfg, angle)) <= 0.5 * cfg.linewidth.value))
    snr = cfg.amplitude / cfg.noise_sigma
    return {
        "empirical_sigma_ueV": float(np.std(centers, ddof=1)),
        "estimate_sigma_ueV": cfg.linewidth.value / (snr * math.sqrt(n_in)),
        "bias_ueV": float(np.mean(centers) - line_center(cfg, angle)),
        "snr": snr,
        "n_in_fwhm": n_in,
        "n_trials": n_trials,
    }


def add_noise(
    spectrum: Spectrum,
    level: float,
    rng: np.random.Generator,
    mode: str = "rms",
    reference: float = 0.0,
) -> Spectrum:
    """Add Gaussian noise scaled to the signal.

    ``rms``: σ = level × RMS of the noiseless y. ``relative``: σᵢ = level × |yᵢ − reference|,
    e.g. a Stark-shifted FSS with ``reference`` the undriven value.
    """
    if not level >= 0:
        raise ParameterError(f"noise level must be >= 0, got {level}")
    y = spectrum.y
    if mode == "rms":
        sigma = np.full(y.size, level * float(np.sqrt(np.mean(y * y))))
    elif mode == "relative":
        sigma = level * np.abs(y - reference)
    else:
        raise ParameterError(f"unknown noise mode {mode!r}")
    noisy = y + rng.normal(0.0, 1.0, size=y.size) * sigma
    return spectrum.with_y(noisy, sigma if level > 0 else None, noise_level=level, noise_mode=mode)


def probe_delay_spectra(
    traj: Trajectory, cfg: SpectrumConfig, delay: Optional[Time] = None
) -> Tuple[Spectrum, Spectrum]:
    """(co, cross) spectra of one trajectory, optionally at another probe delay."""
    if delay is not None:
        cfg = replace(cfg, probe_delay=delay)
    return (
        synth_two_color_spectrum(traj, cfg, ProbePolarization.CO),
        synth_two_color_spectrum(traj, cfg, ProbePolarization.CROSS),
    )
