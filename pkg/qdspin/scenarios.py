"""Scenario runner.

One function per experiment turns a parsed :class:`ScenarioConfig` into a
:class:`ScenarioResult` (tables, spectra, fits, figures, summary);
:func:`run_scenario` writes the result and its run metadata.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from . import plotting
from .analytic import (
    fidelity_godden,
    fidelity_values,
    fss_after_ose,
    fss_at_field,
    ose_fss_values,
    qubit_timescales,
    with_intensity,
)
from .config import ScenarioConfig, console, expect_sweep_unit
from .constants import (
    HBAR_UEV_PS,
    OSE_SIGN_CONVENTION,
    REFERENCE_GAMMA_E,
    SCHEMA_ID,
    VERIFY_MIN_POINTS,
    VERIFY_TOLERANCE,
)
from .dynamics import (
    Trajectory,
    beat_signal,
    evolve,
    oracle_fidelity,
    oracle_step,
    steady_hole_fidelity,
    trajectory_frame,
)
from .errors import ConfigError, FitError, IntegrationError
from .fitting import DAMPED_SINE, LINEAR, LORENTZIAN, SIN2, FitResult, fit, fit_models, ose_fss_model
from .io_utils import (
    fit_table,
    read_xy_csv,
    summary_table,
    verification_table,
    write_frame,
    write_json,
    write_spectrum,
)
from .models import CwDriveConfig, EvolutionSpec, QuantumDotParams, Spectrum, generate_run_id
from .spectra import (
    add_noise,
    extract_fidelity,
    line_center_precision,
    probe_delay_spectra,
    synth_cw_line_scan,
    synth_waveplate_scan,
)
from .units import Energy, Field, Intensity, Rate, Time, field_to_bias_values

# (dot, FSS, closed-form fidelity) triples the dynamics cross-check may re-evaluate
Check = Tuple[QuantumDotParams, Energy, float]


@dataclass
class ScenarioResult:
    frame: pd.DataFrame
    extras: Dict[str, pd.DataFrame] = field(default_factory=dict)
    spectra: Dict[str, Spectrum] = field(default_factory=dict)
    fits: Dict[str, FitResult] = field(default_factory=dict)
    figures: Dict[str, Any] = field(default_factory=dict)
    summary: Dict[str, Any] = field(default_factory=dict)
    checks: List[Check] = field(default_factory=list)


# Helpers
def _first_dot(cfg: ScenarioConfig) -> QuantumDotParams:
    if not cfg.dots:
        raise ConfigError(f"scenario {cfg.scenario!r} needs a dot block", "/dots")
    return cfg.dots[0]


def _drives(cfg: ScenarioConfig) -> List[CwDriveConfig]:
    if not cfg.drives:
        raise ConfigError(f"scenario {cfg.scenario!r} needs a CW drive block", "/drives")
    return cfg.drives


def _sweep(cfg: ScenarioConfig, default: np.ndarray) -> np.ndarray:
    return cfg.sweep if cfg.sweep is not None else np.asarray(default, dtype=float)


def _spread(n: int, k: int) -> np.ndarray:
    """Up to k indices spread evenly over range(n), both ends included."""
    if n == 0 or k <= 0:
        return np.array([], dtype=int)
    return np.unique(np.round(np.linspace(0, n - 1, min(k, n))).astype(int))


def _substream(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def _nan_if_none(a: Optional[np.ndarray], n: int) -> np.ndarray:
    return a if a is not None else np.full(n, np.nan)


def _label(name: str) -> str:
    return name if re.search(r"\[.*\]\s*$", name) else f"{name} [1]"


def _unit_of(label: str) -> str:
    m = re.search(r"\[(.*)\]\s*$", label)
    return m.group(1) if m else "1"


def _warn_clamped(count: int, what: str) -> None:
    if count:
        console.print(f"[yellow]Warning:[/yellow] FSS clamped at 0 for {count} {what}")


# fig3: fidelity vs fine-structure splitting
def scenario_fidelity_vs_fss(cfg: ScenarioConfig) -> ScenarioResult:
    expect_sweep_unit(cfg, Energy)
    ge, gh, gr = cfg.reference_rates or (Rate(REFERENCE_GAMMA_E), Rate(0.0), Rate(0.0))
    reference = QuantumDotParams(
        fss_zero=Energy(0.0), gamma_e=ge, gamma_h=gh, gamma_r=gr, name="reference"
    )
    g = reference.gamma_x.value - reference.gamma_h.value

    fss = _sweep(cfg, np.linspace(0.0, 40.0, 401))
    if np.any(fss < 0):
        raise ConfigError("FSS sweep values must be >= 0", "/sweep")
    f = fidelity_values(fss, g)

    oracle = np.full(fss.size, np.nan)
    idx = _spread(fss.size, cfg.oracle_points)
    if idx.size:
        console.print(f"[cyan]Integrating the dynamics at {idx.size} FSS values...[/cyan]")
    for i in idx:
        oracle[i] = oracle_fidelity(reference, fss=Energy(float(fss[i]))).f

    frame = pd.DataFrame({"fss [ueV]": fss, "fidelity [1]": f, "fidelity_oracle [1]": oracle})
    markers = pd.DataFrame(
        {
            "dot": [d.name for d in cfg.dots],
            "fss [ueV]": [d.fss_zero.value for d in cfg.dots],
            "fidelity [1]": fidelity_values(np.array([d.fss_zero.value for d in cfg.dots]), g),
            "fidelity_own_rates [1]": [
                fidelity_godden(d.fss_zero, d.gamma_x, d.gamma_h).f for d in cfg.dots
            ],
        }
    )

    summary: Dict[str, Any] = {
        "reference gamma_x - gamma_h [1/ps]": g,
        "fidelity at sweep start": float(f[0]),
        "fidelity at sweep end": float(f[-1]),
        "monotone in |FSS|": bool(np.all(np.diff(f) * np.sign(np.diff(fss)) <= 0)),
    }
    for _, row in markers.iterrows():
        summary[f"fidelity {row['dot']} ({row['fss [ueV]']:g} ueV)"] = float(row["fidelity [1]"])
    if idx.size:
        residual = np.abs(oracle[idx] - f[idx]) / f[idx]
        summary["dynamics max rel. residual"] = float(residual.max())

    return ScenarioResult(
        frame=frame,
        extras={"markers": markers},
        figures={"": plotting.plot_fidelity_vs_fss(frame, markers)},
        summary=summary,
        checks=[(reference, Energy(float(x)), float(y)) for x, y in zip(fss, f)],
    )


# fig4: fidelity vs DC field through tabulated tunneling rates
def scenario_fidelity_vs_field(cfg: ScenarioConfig) -> ScenarioResult:
    expect_sweep_unit(cfg, Field)
    dot = _first_dot(cfg)
    if cfg.rates is None:
        raise ConfigError("fidelity vs field needs a rate table", "/rates")
    table = cfg.rates
    fields = _sweep(cfg, table.fields)
    geom = cfg.geometry

    rows = []
    checks: List[Check] = []
    clamped = 0
    for e in fields:
        fss = fss_at_field(dot, Field(float(e)))
        ge, gh = table.at(Field(float(e)))
        qd = dot.with_rates(ge, gh)
        fid = fidelity_godden(fss.energy, qd.gamma_x, qd.gamma_h)
        ts = qubit_timescales(qd)
        clamped += fss.clamped
        rows.append(
            {
                "field [kV/cm]": float(e),
                "bias [V]": float(field_to_bias_values(e, geom.v_bi.value, geom.w_i_nm)),
                "fss [ueV]": fss.value,
                "fss_clamped [bool]": fss.clamped,
                "gamma_e [1/ps]": ge.value,
                "gamma_h [1/ps]": gh.value,
                "init_time [ps]": ts.init_time.value,
                "hole_lifetime [ps]": ts.hole_lifetime.value,
                "fidelity [1]": fid.f,
                "meets_2th_gt_t2star [bool]": ts.meets_2th_gt_t2star,
            }
        )
        checks.append((qd, fss.energy, fid.f))
    _warn_clamped(clamped, "field points")
    if table.illustrative:
        console.print("[yellow]Warning:[/yellow] rate table is illustrative, not measured data")

    frame = pd.DataFrame(rows)
    flag = frame["meets_2th_gt_t2star [bool]"].to_numpy()
    flips = np.nonzero(flag[1:] != flag[:-1])[0]
    summary = {
        "rate table illustrative": table.illustrative,
        "fidelity min": float(frame["fidelity [1]"].min()),
        "fidelity max": float(frame["fidelity [1]"].max()),
        "init time min [ps]": float(frame["init_time [ps]"].min()),
        "init time max [ps]": float(frame["init_time [ps]"].max()),
        "hole lifetime max [ps]": float(frame["hole_lifetime [ps]"].max()),
        "2Th > T2* flag flips at [kV/cm]": float(fields[flips[0] + 1]) if flips.size else None,
    }
    return ScenarioResult(
        frame=frame,
        figures={"": plotting.plot_fidelity_vs_field(frame)},
        summary=summary,
        checks=checks,
    )


# fig5b: Stark-tuned FSS vs CW intensity
def _branch_names(drives: List[CwDriveConfig]) -> List[str]:
    names = [d.polarization.value for d in drives]
    return names if len(set(names)) == len(names) else [d.name for d in drives]


def scenario_fss_vs_intensity(cfg: ScenarioConfig) -> ScenarioResult:
    expect_sweep_unit(cfg, Intensity)
    dot = _first_dot(cfg)
    drives = _drives(cfg)
    names = _branch_names(drives)
    intensity = _sweep(cfg, np.linspace(0.0, 0.44, 45))

    frame = pd.DataFrame({"intensity [kW/cm^2]": intensity})
    summary: Dict[str, Any] = {"FSS at zero drive [ueV]": dot.fss_zero.value}
    checks: List[Check] = []
    for name, drive in zip(names, drives):
        values = [fss_after_ose(dot.fss_zero, with_intensity(drive, float(i))) for i in intensity]
        fss = np.array([v.value for v in values])
        frame[f"fss_{name} [ueV]"] = fss
        _warn_clamped(sum(v.clamped for v in values), f"{name}-polarized intensities")
        summary[f"FSS {name} at {intensity[-1]:g} kW/cm^2 [ueV]"] = float(fss[-1])
        summary[f"FSS {name} minimum [ueV]"] = float(fss.min())
        summary[f"{name} branch strictly monotone"] = bool(
            np.all(np.diff(fss) > 0) or np.all(np.diff(fss) < 0)
        )
        checks.extend(
            (dot, v.energy, fidelity_godden(v.energy, dot.gamma_x, dot.gamma_h).f) for v in values
        )

    fits: Dict[str, FitResult] = {}
    measured = pd.DataFrame()
    if cfg.intensities is not None and cfg.noise_level > 0:
        x = cfg.intensities[cfg.intensities > 0]
        if x.size < cfg.intensities.size:
            console.print(
                "[yellow]Warning:[/yellow] zero intensity dropped from the synthetic data "
                "(relative noise vanishes there)"
            )
        console.print(
            f"[cyan]Fitting the Stark model to synthetic data "
            f"({100 * cfg.noise_level:g}% noise, {x.size} points)...[/cyan]"
        )
        parts = []
        for k, (name, drive) in enumerate(zip(names, drives)):
            clean = Spectrum(
                x,
                ose_fss_values(
                    x, drive.s, dot.fss_zero.value, drive.delta_cw_zero.value, drive.a_dipole, drive.k_screen
                ),
            )
            noisy = add_noise(
                clean,
                cfg.noise_level,
                np.random.default_rng([cfg.seed, k]),
                mode="relative",
                reference=dot.fss_zero.value,
            )
            model = ose_fss_model(drive.s, dot.fss_zero.value, drive.delta_cw_zero.value)
            res = fit(model, noisy)
            fits[f"ose_{name}"] = res
            summary[f"a {name} [meV^2 um^2/W]"] = f"{res['a']:.4g} ± {res.sigma('a'):.2g} (injected {drive.a_dipole:g})"
            summary[f"k {name} [eV um^2/W]"] = f"{res['k']:.4g} ± {res.sigma('k'):.2g} (injected {drive.k_screen:g})"
            parts.append(
                pd.DataFrame(
                    {
                        "drive": name,
                        "intensity [kW/cm^2]": x,
                        "fss [ueV]": noisy.y,
                        "sigma [ueV]": noisy.sigma,
                        "fit [ueV]": model(x, *res.values),
                    }
                )
            )
        measured = pd.concat(parts, ignore_index=True)

    extras = {"measured": measured} if not measured.empty else {}
    return ScenarioResult(
        frame=frame,
        extras=extras,
        fits=fits,
        figures={"": plotting.plot_fss_vs_intensity(frame, names, measured)},
        summary=summary,
        checks=checks,
    )


# fig5c: fidelity vs CW intensity, with a synthetic measurement overlay
def scenario_fidelity_vs_intensity(cfg: ScenarioConfig) -> ScenarioResult:
    expect_sweep_unit(cfg, Intensity)
    dot = _first_dot(cfg)
    drive = _drives(cfg)[0]
    intensity = _sweep(cfg, np.linspace(0.0, 0.3, 31))

    values = [fss_after_ose(dot.fss_zero, with_intensity(drive, float(i))) for i in intensity]
    _warn_clamped(sum(v.clamped for v in values), "intensities")
    fid = np.array([fidelity_godden(v.energy, dot.gamma_x, dot.gamma_h).f for v in values])

    oracle = np.full(intensity.size, np.nan)
    for i in _spread(intensity.size, cfg.oracle_points):
        oracle[i] = oracle_fidelity(dot, fss=values[i].energy).f

    frame = pd.DataFrame(
        {
            "intensity [kW/cm^2]": intensity,
            "fss [ueV]": [v.value for v in values],
            "fidelity [1]": fid,
            "fidelity_oracle [1]": oracle,
        }
    )
    summary: Dict[str, Any] = {
        "fidelity at sweep start": float(fid[0]),
        f"fidelity at {intensity[-1]:g} kW/cm^2": float(fid[-1]),
        "fidelity max": float(fid.max()),
    }

    measured = pd.DataFrame()
    if cfg.intensities is not None:
        sc = cfg.spectrum
        noise = sc.noise_sigma if sc.noise_sigma > 0 else cfg.noise_level * sc.pc_scale
        console.print(
            f"[cyan]Synthesizing two-color spectra at {cfg.intensities.size} intensities "
            f"(probe delay {sc.probe_delay})...[/cyan]"
        )
        rows = []
        for i, level in enumerate(cfg.intensities):
            fss = fss_after_ose(dot.fss_zero, with_intensity(drive, float(level)))
            traj = evolve(
                EvolutionSpec(dot, t_max=sc.probe_delay, dt=oracle_step(dot, fss.energy), fss_override=fss.energy)
            )
            point_cfg = replace(sc, noise_sigma=noise, rng_seed=_substream(cfg.seed, i))
            co, cross = probe_delay_spectra(traj, point_cfg)
            value = extract_fidelity(co, cross, point_cfg)
            rows.append(
                {
                    "intensity [kW/cm^2]": float(level),
                    "fidelity_model [1]": fidelity_godden(fss.energy, dot.gamma_x, dot.gamma_h).f,
                    "fidelity_measured [1]": value.f,
                    "sigma [1]": np.nan if value.is_lower_bound else value.sigma,
                    "lower_bound [bool]": value.is_lower_bound,
                }
            )
        measured = pd.DataFrame(rows)
        resolved = measured[~measured["lower_bound [bool]"]]
        if not resolved.empty:
            within = (
                (resolved["fidelity_measured [1]"] - resolved["fidelity_model [1]"]).abs()
                <= resolved["sigma [1]"]
            )
            summary["measured points within 1 sigma"] = f"{int(within.sum())}/{len(resolved)}"
        summary["lower bounds reported"] = int(measured["lower_bound [bool]"].sum())

    extras = {"measured": measured} if not measured.empty else {}
    return ScenarioResult(
        frame=frame,
        extras=extras,
        figures={"": plotting.plot_fidelity_vs_intensity(frame, measured)},
        summary=summary,
        checks=[(dot, v.energy, float(f)) for v, f in zip(values, fid)],
    )


# beats: exciton spin precession and its damped-sine fit
def _beat_grid(cfg: ScenarioConfig) -> np.ndarray:
    expect_sweep_unit(cfg, Time)
    t = _sweep(cfg, np.linspace(0.0, 400.0, 200))
    if t.size < 8 or t[0] != 0.0:
        raise ConfigError("beat sampling needs >= 8 times starting at 0 ps", "/sweep")
    step = t[1] - t[0]
    if not (step > 0 and np.allclose(np.diff(t), step, rtol=1e-9, atol=0.0)):
        raise ConfigError("beat sampling must be uniform", "/sweep")
    return t


def _sampled_beats(qd: QuantumDotParams, fss: Energy, t: np.ndarray) -> Tuple[Spectrum, Trajectory]:
    """Beat signal at the sample times; the integrator step divides the sample step."""
    step = float(t[1] - t[0])
    n_sub = max(1, math.ceil(step / oracle_step(qd, fss).value))
    traj = evolve(EvolutionSpec(qd, t_max=Time(float(t[-1])), dt=Time(step / n_sub), fss_override=fss))
    signal = beat_signal(traj)
    return Spectrum(t, signal.y[::n_sub][: t.size], meta=signal.meta), traj


def _fit_beats(data: Spectrum) -> Tuple[Optional[FitResult], bool]:
    try:
        res = fit(DAMPED_SINE, data)
    except FitError as e:
        console.print(f"[yellow]Warning:[/yellow] beat frequency not identifiable: {e}")
        return None, False
    delta = abs(res["delta"])
    return res, bool(res.converged and delta > 0 and res.sigma("delta") < 0.5 * delta)


def scenario_beats(cfg: ScenarioConfig) -> ScenarioResult:
    t = _beat_grid(cfg)
    dot = _first_dot(cfg)

    clean, traj = _sampled_beats(dot, dot.fss_zero, t)
    data = add_noise(clean, cfg.noise_level, np.random.default_rng(cfg.seed))
    res, identifiable = _fit_beats(data)
    fitted = DAMPED_SINE(t, *res.values) if res is not None else np.full(t.size, np.nan)

    frame = pd.DataFrame(
        {
            "time [ps]": t,
            "signal [1]": clean.y,
            "signal_noisy [1]": data.y,
            "sigma [1]": _nan_if_none(data.sigma, t.size),
            "fit [1]": fitted,
        }
    )
    summary: Dict[str, Any] = {
        "FSS injected [ueV]": dot.fss_zero.value,
        "gamma_x injected [1/ps]": dot.gamma_x.value,
        "frequency identifiable": identifiable,
    }
    fits: Dict[str, FitResult] = {}
    if res is not None:
        fits["beats"] = res
        summary["FSS recovered [ueV]"] = HBAR_UEV_PS * abs(res["delta"])
        summary["FSS sigma [ueV]"] = HBAR_UEV_PS * res.sigma("delta")
        summary["gamma_x recovered [1/ps]"] = res["gamma"]
        summary["gamma_x sigma [1/ps]"] = res.sigma("gamma")

    extras = {"trajectory": trajectory_frame(traj)}
    figures = {
        "": plotting.plot_series(
            t,
            {"fit": fitted},
            "delay (ps)",
            r"$n_{co} - n_{cross}$",
            points={"simulated": data.y},
        )
    }

    if cfg.drives and cfg.intensities is not None:
        drive = cfg.drives[0]
        console.print(
            f"[cyan]Sweeping {drive.polarization.value}-polarized CW intensity over "
            f"{cfg.intensities.size} values...[/cyan]"
        )
        rows = []
        for j, level in enumerate(cfg.intensities):
            fss = fss_after_ose(dot.fss_zero, with_intensity(drive, float(level)))
            sweep_clean, _ = _sampled_beats(dot, fss.energy, t)
            sweep_data = add_noise(sweep_clean, cfg.noise_level, np.random.default_rng([cfg.seed, j + 1]))
            r, ok = _fit_beats(sweep_data)
            rows.append(
                {
                    "intensity [kW/cm^2]": float(level),
                    "fss_injected [ueV]": fss.value,
                    "fss_recovered [ueV]": HBAR_UEV_PS * abs(r["delta"]) if r else np.nan,
                    "sigma [ueV]": HBAR_UEV_PS * r.sigma("delta") if r else np.nan,
                    "gamma_x_recovered [1/ps]": r["gamma"] if r else np.nan,
                    "identifiable [bool]": ok,
                }
            )
        sweep = pd.DataFrame(rows)
        extras["intensity"] = sweep
        figures["intensity"] = plotting.plot_series(
            sweep["intensity [kW/cm^2]"].to_numpy(),
            {"model": sweep["fss_injected [ueV]"].to_numpy()},
            r"CW intensity (kW cm$^{-2}$)",
            r"$\hbar\delta_{FS}$ ($\mu$eV)",
            points={"beat fit": sweep["fss_recovered [ueV]"].to_numpy()},
            yerr=sweep["sigma [ueV]"].to_numpy(),
        )

    return ScenarioResult(frame=frame, extras=extras, fits=fits, figures=figures, summary=summary)


# spectrum: co/cross two-color spectra and the extracted fidelity
def scenario_spectrum(cfg: ScenarioConfig) -> ScenarioResult:
    dot = _first_dot(cfg)
    sc = cfg.spectrum
    traj = evolve(EvolutionSpec(dot, t_max=sc.probe_delay, dt=oracle_step(dot)))
    co, cross = probe_delay_spectra(traj, sc)
    value = extract_fidelity(co, cross, sc)

    summary: Dict[str, Any] = {
        "fidelity extracted": value.f,
        "lower bound": value.is_lower_bound,
        "sigma": value.sigma,
        "fidelity model": fidelity_godden(dot.fss_zero, dot.gamma_x, dot.gamma_h).f,
        "meets error threshold": value.meets_error_threshold,
    }
    try:
        summary["fidelity at probe delay"] = steady_hole_fidelity(traj).f
    except IntegrationError as e:
        console.print(f"[yellow]Warning:[/yellow] {e}")

    frame = pd.DataFrame(
        {
            "detuning [ueV]": co.x,
            "pc_co [pA]": co.y,
            "pc_cross [pA]": cross.y,
            "sigma [pA]": _nan_if_none(co.sigma, len(co)),
        }
    )
    figure = plotting.plot_series(
        co.x,
        {},
        r"probe detuning ($\mu$eV)",
        "photocurrent (pA)",
        points={"co": co.y, "cross": cross.y},
    )
    return ScenarioResult(
        frame=frame,
        spectra={"co": co, "cross": cross},
        figures={"": figure},
        summary=summary,
    )


# fit: named model against an external CSV
def scenario_fit(cfg: ScenarioConfig) -> ScenarioResult:
    if not cfg.fit:
        raise ConfigError("fit scenario needs a fit block", "/fit")
    models = fit_models()
    name = cfg.fit["model"]
    if name not in models:
        raise ConfigError(f"unknown model {name!r}; choose from {', '.join(sorted(models))}", "/fit/model")
    model = models[name]
    path = Path(cfg.fit["data"]).expanduser()
    if not path.is_absolute():
        path = cfg.base_dir / path
    data = read_xy_csv(path, cfg.fit.get("x_column"), cfg.fit.get("y_column"), cfg.fit.get("sigma_column"))
    console.print(f"[cyan]Fitting {name} to {len(data)} points from {path.name}...[/cyan]")

    res = fit(model, data)
    if not res.converged:
        console.print(f"[yellow]Warning:[/yellow] fit did not converge ({res.message})")
    fitted = model(data.x, *res.values)
    xl, yl = _label(data.meta["x_label"]), _label(data.meta["y_label"])
    yu = _unit_of(yl)
    frame = pd.DataFrame(
        {xl: data.x, yl: data.y, f"fit [{yu}]": fitted, f"residual [{yu}]": data.y - fitted}
    )
    summary: Dict[str, Any] = {
        f"{n} [{u}]": f"{v:.6g} ± {s:.2g}"
        for n, v, s, u in zip(res.names, res.values, res.uncertainties, res.units)
    }
    summary["chi2_red"] = res.chi2_reduced
    summary["converged"] = res.converged
    figure = plotting.plot_series(data.x, {"fit": fitted}, xl, yl, points={"data": data.y}, yerr=data.sigma)
    return ScenarioResult(frame=frame, fits={name: res}, figures={"": figure}, summary=summary)


# cwscan: waveplate-resolved CW line scans
def scenario_cw_scan(cfg: ScenarioConfig) -> ScenarioResult:
    cw = cfg.cw_line
    if cw is None:
        raise ConfigError("cwscan needs a cw_line block", "/cw_line")
    angles = cfg.angles if cfg.angles is not None else np.linspace(0.0, 90.0, 19)

    line = synth_cw_line_scan(cw, float(angles[0]))
    line_fit = fit(LORENTZIAN, line)
    console.print(f"[cyan]Fitting {angles.size} line scans across the waveplate angle...[/cyan]")
    scan = synth_waveplate_scan(cw, angles)
    res = fit(SIN2, scan)
    fitted = SIN2(angles, *res.values)

    frame = pd.DataFrame(
        {
            "angle [deg]": angles,
            "line_center [ueV]": scan.y,
            "sigma [ueV]": _nan_if_none(scan.sigma, angles.size),
            "fit [ueV]": fitted,
        }
    )
    extras = {
        "line": pd.DataFrame(
            {
                "energy [ueV]": line.x,
                "photocurrent [pA]": line.y,
                "fit [pA]": LORENTZIAN(line.x, *line_fit.values),
            }
        )
    }
    summary: Dict[str, Any] = {
        "FSS injected [ueV]": cw.fss.value,
        "FSS recovered [ueV]": abs(res["A"]),
        "FSS sigma [ueV]": res.sigma("A"),
        "angular frequency f": res["f"],
        "linewidth injected [ueV]": cw.linewidth.value,
        "linewidth fitted [ueV]": abs(line_fit["fwhm"]),
    }
    if cfg.trials > 1 and cw.noise_sigma > 0:
        console.print(f"[cyan]Monte-Carlo line-center precision over {cfg.trials} trials...[/cyan]")
        precision = line_center_precision(cw, cfg.trials, float(angles[0]))
        summary["line center scatter [ueV]"] = precision["empirical_sigma_ueV"]
        summary["linewidth/(SNR sqrt N) [ueV]"] = precision["estimate_sigma_ueV"]

    figure = plotting.plot_series(
        angles,
        {"fit": fitted},
        "half-wave plate angle (deg)",
        r"line center ($\mu$eV)",
        points={"scan": scan.y},
        yerr=scan.sigma,
    )
    return ScenarioResult(
        frame=frame,
        extras=extras,
        fits={"sin2": res, "line": line_fit},
        figures={"": figure},
        summary=summary,
    )


# chie: linear FSS tuning with DC field
def scenario_chi_e(cfg: ScenarioConfig) -> ScenarioResult:
    expect_sweep_unit(cfg, Field)
    if not cfg.dots:
        raise ConfigError("chie needs at least one dot", "/dots")
    fields = _sweep(cfg, np.linspace(50.0, 70.0, 11))

    parts = []
    fits: Dict[str, FitResult] = {}
    summary: Dict[str, Any] = {}
    for k, dot in enumerate(cfg.dots):
        values = [fss_at_field(dot, Field(float(e))) for e in fields]
        _warn_clamped(sum(v.clamped for v in values), f"fields of {dot.name}")
        clean = Spectrum(fields, [v.value for v in values])
        data = add_noise(clean, cfg.noise_level, np.random.default_rng([cfg.seed, k]))
        res = fit(LINEAR, data)
        fits[dot.name] = res
        summary[f"chi_e {dot.name} [ueV/(kV/cm)]"] = (
            f"{res['m']:.4g} ± {res.sigma('m'):.2g} (injected {dot.chi_e.value:g})"
        )
        parts.append(
            pd.DataFrame(
                {
                    "dot": dot.name,
                    "field [kV/cm]": fields,
                    "fss [ueV]": data.y,
                    "sigma [ueV]": _nan_if_none(data.sigma, fields.size),
                    "fit [ueV]": LINEAR(fields, *res.values),
                }
            )
        )
    frame = pd.concat(parts, ignore_index=True)
    figure = plotting.plot_groups(
        frame,
        "dot",
        "field [kV/cm]",
        "fss [ueV]",
        "fit [ueV]",
        "sigma [ueV]",
        r"DC field (kV cm$^{-1}$)",
        r"$\hbar\delta_{FS}$ ($\mu$eV)",
    )
    return ScenarioResult(frame=frame, fits=fits, figures={"": figure}, summary=summary)


SCENARIO_RUNNERS: Dict[str, Callable[[ScenarioConfig], ScenarioResult]] = {
    "fig3": scenario_fidelity_vs_fss,
    "fig4": scenario_fidelity_vs_field,
    "fig5b": scenario_fss_vs_intensity,
    "fig5c": scenario_fidelity_vs_intensity,
    "beats": scenario_beats,
    "spectrum": scenario_spectrum,
    "fit": scenario_fit,
    "cwscan": scenario_cw_scan,
    "chie": scenario_chi_e,
}


def verify_against_dynamics(checks: List[Check], n_points: int = VERIFY_MIN_POINTS) -> List[Dict[str, float]]:
    """Re-evaluate closed-form fidelities with the integrator at evenly spread points.

    Raises:
        IntegrationError: If any relative residual exceeds VERIFY_TOLERANCE
    """
    rows = []
    for i in _spread(len(checks), n_points):
        qd, fss, closed = checks[i]
        dynamic = oracle_fidelity(qd, fss=fss).f
        rows.append(
            {
                "fss_ueV": fss.value,
                "closed_form": closed,
                "dynamics": dynamic,
                "rel_residual": abs(dynamic - closed) / closed,
            }
        )
    verification_table(rows, VERIFY_TOLERANCE)
    worst = max((r["rel_residual"] for r in rows), default=0.0)
    if worst > VERIFY_TOLERANCE:
        raise IntegrationError(
            f"closed form and dynamics disagree: relative residual {worst:.2e} > {VERIFY_TOLERANCE:g}"
        )
    return rows


def write_outputs(cfg: ScenarioConfig, result: ScenarioResult) -> List[Path]:
    out, stem = cfg.output_dir, cfg.stem
    paths = [write_frame(result.frame, out / f"{stem}.{cfg.fmt}", cfg.fmt)]
    for name, frame in result.extras.items():
        paths.append(write_frame(frame, out / f"{stem}_{name}.{cfg.fmt}", cfg.fmt))
    for name, spectrum in result.spectra.items():
        paths.extend(write_spectrum(spectrum, out / f"{stem}_{name}.csv", cfg.sha256, cfg.seed))
    if result.fits:
        paths.append(write_json(out / f"{stem}.fit.json", {n: r.to_dict() for n, r in result.fits.items()}))
    for name, fig in result.figures.items():
        if cfg.svg:
            paths.append(plotting.save_svg(fig, out / (f"{stem}_{name}.svg" if name else f"{stem}.svg")))
        else:
            plt.close(fig)
    return paths


def run_scenario(cfg: ScenarioConfig) -> Dict[str, Any]:
    """Execute one scenario and write its tables, figures and run metadata.

    Returns:
        The metadata written to ``<stem>.meta.json``

    Raises:
        QdSpinError: Subclasses from the numerical layers or config checks
        OSError: If the output directory cannot be written
    """
    console.rule(f"[bold blue]qdspin: {cfg.scenario}[/bold blue]")
    run_id = generate_run_id()
    cfg.output_dir.mkdir(parents=True, exist_ok=True)

    result = SCENARIO_RUNNERS[cfg.scenario](cfg)

    verification: List[Dict[str, float]] = []
    if cfg.verify:
        if result.checks:
            console.print("[cyan]Cross-checking closed-form values against the dynamics...[/cyan]")
            verification = verify_against_dynamics(result.checks)
            console.print("[green]✓ Closed form and dynamics agree[/green]")
        else:
            console.print(f"[yellow]Warning:[/yellow] {cfg.scenario} has no closed-form values to verify")

    paths = write_outputs(cfg, result)

    summary_table(f"{cfg.scenario} summary", result.summary)
    for name, res in result.fits.items():
        fit_table(res, title=f"Fit: {name}")

    meta = {
        "run_id": run_id,
        "schema": SCHEMA_ID,
        "scenario": cfg.scenario,
        "config_sha256": cfg.sha256,
        "seed": cfg.seed,
        "ose_sign_convention": OSE_SIGN_CONVENTION,
        "config": cfg.to_dict(),
        "outputs": [p.name for p in paths],
        "summary": result.summary,
        "verification": verification,
    }
    write_json(cfg.output_dir / f"{cfg.stem}.meta.json", meta)
    console.print(
        f"\n[bold green]Run complete.[/bold green] Data stored in: [cyan]{cfg.output_dir}[/cyan]"
    )
    return meta
