"""Damped least-squares fitting with Jacobian covariance.

Each model is a :class:`FitModel` bundling f(x, p), an optional analytic
Jacobian, an initial-guess heuristic and an optional post-fit normalization
that maps degenerate parameter sets onto one canonical branch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.fft import rfft, rfftfreq
from scipy.optimize import least_squares

from .analytic import ose_fss_values
from .constants import (
    FIT_CONDITION_LIMIT,
    FIT_DAMPING_INIT,
    FIT_FTOL,
    FIT_GTOL,
    FIT_MAX_ITER,
    FIT_SOLVER,
    FIT_XTOL,
)
from .errors import FitError
from .models import Spectrum

FOUR_LN2 = 4.0 * math.log(2.0)

ArrayFn = Callable[[np.ndarray, np.ndarray], np.ndarray]
Normalizer = Callable[[np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray]]


@dataclass(frozen=True)
class FitModel:
    name: str
    param_names: Tuple[str, ...]
    param_units: Tuple[str, ...]
    func: ArrayFn
    guess: ArrayFn
    jac: Optional[ArrayFn] = None
    normalize: Optional[Normalizer] = None
    fixed: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if len(self.param_names) < 1:
            raise FitError(f"model {self.name} has no parameters")
        if len(self.param_names) != len(self.param_units):
            raise FitError(f"model {self.name}: one unit per parameter required")

    @property
    def n_params(self) -> int:
        return len(self.param_names)

    def __call__(self, x, *params: float) -> np.ndarray:
        return self.func(np.asarray(x, dtype=float), np.asarray(params, dtype=float))


@dataclass(frozen=True)
class FitResult:
    model: str
    names: Tuple[str, ...]
    units: Tuple[str, ...]
    values: np.ndarray
    covariance: np.ndarray
    chi2_reduced: float
    converged: bool
    n_iter: int
    n_points: int
    absolute_sigma: bool
    message: str = ""
    solver: str = FIT_SOLVER
    damping_init: str = FIT_DAMPING_INIT

    @property
    def uncertainties(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    def __getitem__(self, name: str) -> float:
        return float(self.values[self.names.index(name)])

    def sigma(self, name: str) -> float:
        return float(self.uncertainties[self.names.index(name)])

    @property
    def params(self) -> Dict[str, float]:
        return {n: float(v) for n, v in zip(self.names, self.values)}

    def to_dict(self) -> Dict[str, Any]:
        return {
            "model": self.model,
            "parameters": {
                n: {"value": float(v), "sigma": float(s), "unit": u}
                for n, v, s, u in zip(self.names, self.values, self.uncertainties, self.units)
            },
            "covariance": self.covariance.tolist(),
            "chi2_reduced": self.chi2_reduced,
            "converged": self.converged,
            "n_iter": self.n_iter,
            "n_points": self.n_points,
            "covariance_estimator": "jacobian" + ("" if self.absolute_sigma else " (scaled by chi2_red)"),
            "solver": self.solver,
            "damping_init": self.damping_init,
        }

    def report(self) -> str:
        lines = [f"model: {self.model}"]
        for n, v, s, u in zip(self.names, self.values, self.uncertainties, self.units):
            lines.append(f"  {n} = {v:.6g} ± {s:.2g} {u}".rstrip())
        lines.append(f"  chi2_red = {self.chi2_reduced:.4g}  (n = {self.n_points})")
        status = "converged" if self.converged else "NOT converged"
        lines.append(f"  {status} after {self.n_iter} iterations")
        lines.append(f"  solver: {self.solver}; initial damping {self.damping_init}")
        return "\n".join(lines)


def _initial(model: FitModel, x, y, init) -> np.ndarray:
    if init is None:
        p0 = np.asarray(model.guess(x, y), dtype=float)
    elif isinstance(init, Mapping):
        missing = [n for n in model.param_names if n not in init]
        if missing:
            raise FitError(f"initial values missing for {', '.join(missing)}")
        p0 = np.array([float(init[n]) for n in model.param_names])
    else:
        p0 = np.asarray(init, dtype=float)
    if p0.shape != (model.n_params,) or not np.all(np.isfinite(p0)):
        raise FitError(f"bad initial parameters for {model.name}: {p0}")
    return p0


def _covariance(jac: np.ndarray) -> np.ndarray:
    # column scaling keeps the condition test independent of parameter units
    scale = np.linalg.norm(jac, axis=0)
    if np.any(scale == 0) or not np.all(np.isfinite(scale)):
        raise FitError("singular normal equations: a parameter does not affect the model")
    js = jac / scale
    jtj = js.T @ js
    try:
        if np.linalg.cond(jtj) > FIT_CONDITION_LIMIT:
            raise FitError("singular normal equations: parameters are not identifiable")
        inv = np.linalg.inv(jtj)
    except np.linalg.LinAlgError as e:
        raise FitError(f"singular normal equations: {e}") from e
    cov = inv / np.outer(scale, scale)
    return 0.5 * (cov + cov.T)


def fit(
    model: FitModel,
    data: Spectrum,
    init: Optional[Union[Sequence[float], Mapping[str, float]]] = None,
    max_iter: int = FIT_MAX_ITER,
) -> FitResult:
    """Minimize Σ((y − f(x; p))/σ)² with Levenberg-Marquardt.

    Without per-point sigma every point has unit weight and the covariance is
    scaled by χ²_red.

    Args:
        model: Model to fit
        data: Data with optional sigma
        init: Initial parameters (sequence or name mapping); model heuristic if None
        max_iter: Iteration budget

    Returns:
        FitResult; ``converged`` is False when the budget ran out

    Raises:
        FitError: On invalid data or singular normal equations
    """
    x, y = data.x, data.y
    n = model.n_params
    if x.size <= n:
        raise FitError(f"{x.size} points cannot determine {n} parameters")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise FitError("data contain non-finite values")
    absolute = data.sigma is not None
    if absolute:
        if not (np.all(np.isfinite(data.sigma)) and np.all(data.sigma > 0)):
            raise FitError("sigma must be finite and > 0")
        w = 1.0 / data.sigma
    else:
        w = np.ones_like(y)

    p0 = _initial(model, x, y, init)

    def residuals(p):
        return (y - model.func(x, p)) * w

    if model.jac is not None:
        def jac(p):
            return -model.jac(x, p) * w[:, None]

        max_nfev = max_iter
    else:
        jac = "2-point"
        max_nfev = max_iter * (n + 1)

    try:
        with np.errstate(all="ignore"):
            res = least_squares(
                residuals,
                p0,
                jac=jac,
                method="lm",
                xtol=FIT_XTOL,
                ftol=FIT_FTOL,
                gtol=FIT_GTOL,
                max_nfev=max_nfev,
            )
    except ValueError as e:
        raise FitError(f"{model.name}: {e}") from e

    values = res.x
    cov = _covariance(np.atleast_2d(res.jac))
    dof = x.size - n
    chi2_red = float(np.sum(res.fun**2) / dof)
    if not absolute:
        cov = cov * chi2_red
    if model.normalize is not None:
        values, cov = model.normalize(values, cov)

    return FitResult(
        model=model.name,
        names=model.param_names,
        units=model.param_units,
        values=np.asarray(values, dtype=float),
        covariance=cov,
        chi2_reduced=chi2_red,
        converged=bool(res.status > 0),
        n_iter=int(res.njev if res.njev is not None else res.nfev),
        n_points=int(x.size),
        absolute_sigma=absolute,
        message=str(res.message),
    )


# Model functions
def model_damped_sine(t, A, gamma, delta, phi, c):
    return A * np.exp(-gamma * t) * np.cos(delta * t + phi) + c


def model_lorentzian(x, A, x0, fwhm, c):
    h2 = (0.5 * fwhm) ** 2
    return A * h2 / ((x - x0) ** 2 + h2) + c


def model_gaussian(x, A, x0, fwhm, c):
    return A * np.exp(-FOUR_LN2 * (x - x0) ** 2 / fwhm**2) + c


def model_sin2(theta, A, f, theta0, c):
    """A·sin²(f·(θ − θ0)) + c with angles in degrees."""
    return A * np.sin(np.radians(f * (theta - theta0))) ** 2 + c


def model_linear(x, m, b):
    return m * x + b


def model_ose_fss(intensity, a, k, s, fss_zero, delta_cw_zero):
    """Stark-tuned FSS vs CW intensity (kW·cm⁻²), unclamped."""
    return ose_fss_values(intensity, s, fss_zero, delta_cw_zero, a, k)


# Jacobians
def _jac_damped_sine(t, p):
    A, gamma, delta, phi, _ = p
    env = np.exp(-gamma * t)
    cos = np.cos(delta * t + phi)
    sin = np.sin(delta * t + phi)
    return np.column_stack(
        [env * cos, -t * A * env * cos, -t * A * env * sin, -A * env * sin, np.ones_like(t)]
    )


def _jac_lorentzian(x, p):
    A, x0, fwhm, _ = p
    h = 0.5 * fwhm
    u = x - x0
    d = u * u + h * h
    return np.column_stack(
        [h * h / d, A * h * h * 2.0 * u / d**2, A * h * u * u / d**2, np.ones_like(x)]
    )


def _jac_gaussian(x, p):
    A, x0, fwhm, _ = p
    u = x - x0
    e = np.exp(-FOUR_LN2 * u * u / fwhm**2)
    return np.column_stack(
        [
            e,
            A * e * 2.0 * FOUR_LN2 * u / fwhm**2,
            A * e * 2.0 * FOUR_LN2 * u * u / fwhm**3,
            np.ones_like(x),
        ]
    )


def _jac_sin2(theta, p):
    A, f, theta0, _ = p
    u = np.radians(f * (theta - theta0))
    ds = np.sin(2.0 * u)
    return np.column_stack(
        [
            np.sin(u) ** 2,
            A * ds * np.radians(theta - theta0),
            -A * ds * np.radians(f),
            np.ones_like(theta),
        ]
    )


def _jac_linear(x, p):
    return np.column_stack([x, np.ones_like(x)])


# Initial guesses
def _baseline(y: np.ndarray) -> float:
    k = max(y.size // 10, 1)
    return float(np.median(np.concatenate([y[:k], y[-k:]])))


def _peak_guess(x, y):
    c = _baseline(y)
    i = int(np.argmax(y))
    A = float(y[i] - c)
    above = np.nonzero(y - c >= 0.5 * A)[0]
    width = abs(x[above[-1]] - x[above[0]]) if above.size > 1 else 0.0
    if width <= 0:
        width = 2.0 * float(np.median(np.abs(np.diff(x))))
    return np.array([A, float(x[i]), width, c])


def _dominant_frequency(x, y, demean: bool = True) -> float:
    """Angular frequency of the strongest discrete-spectrum peak (zero-padded)."""
    dx = float(np.median(np.diff(x)))
    n_fft = 8 * (1 << int(math.ceil(math.log2(max(y.size, 2)))))
    spectrum = np.abs(rfft(y - np.mean(y) if demean else y, n=n_fft))
    freqs = rfftfreq(n_fft, d=dx)
    return 2.0 * math.pi * float(freqs[int(np.argmax(spectrum))])


def _guess_damped_sine(t, y):
    tail = max(y.size // 10, 1)
    c = float(np.median(y[-tail:]))
    yc = y - c

    # decreasing envelope of |y|: running max from the end
    env = np.maximum.accumulate(np.abs(yc)[::-1])[::-1]
    below = np.nonzero(env < env[0] / math.e)[0]
    span = t[-1] - t[0]
    t_e = (t[below[0]] - t[0]) if below.size else span
    gamma = 1.0 / max(t_e, span / y.size)

    delta = _dominant_frequency(t, yc, demean=False)

    # amplitude and phase from a linear solve at fixed (gamma, delta)
    e = np.exp(-gamma * t)
    basis = np.column_stack([e * np.cos(delta * t), e * np.sin(delta * t)])
    (p, q), *_ = np.linalg.lstsq(basis, yc, rcond=None)
    return np.array([math.hypot(p, q), gamma, delta, math.atan2(-q, p), c])


def _guess_sin2(theta, y):
    c = float(np.min(y))
    A = float(np.max(y) - c)
    nu = _dominant_frequency(theta, y) / (2.0 * math.pi)  # cycles per degree
    f = 180.0 * nu if nu > 0 else 180.0 / max(abs(theta[-1] - theta[0]), 1e-12)
    theta0 = float(theta[int(np.argmin(y))])
    return np.array([A, f, theta0, c])


def _guess_linear(x, y):
    m, b = np.polyfit(x, y, 1)
    return np.array([m, b])


def _normalize_sin2(p, cov):
    """Map onto f > 0 and θ0 ∈ [0°, 90°/f).

    A shift of θ0 by an odd number of 90°/f swaps sin² for cos², so the
    amplitude flips sign and the offset absorbs it.
    """
    A, f, theta0, c = (float(v) for v in p)
    t = np.eye(4)
    if f < 0:
        f = -f
        t[1, 1] = -1.0
    quarter = 90.0 / f
    m = math.floor(theta0 / quarter)
    theta0 -= m * quarter
    step = np.eye(4)
    step[2, 1] = m * 90.0 / f**2
    if m % 2:
        A, c = -A, c + A
        step[0, 0] = -1.0
        step[3, 0] = 1.0
        step[3, 3] = 1.0
    t = step @ t
    return np.array([A, f, theta0, c]), t @ cov @ t.T


def _unpack(fn):
    return lambda x, p: fn(x, *p)


DAMPED_SINE = FitModel(
    name="damped_sine",
    param_names=("A", "gamma", "delta", "phi", "c"),
    param_units=("1", "1/ps", "rad/ps", "rad", "1"),
    func=_unpack(model_damped_sine),
    guess=_guess_damped_sine,
    jac=_jac_damped_sine,
)

LORENTZIAN = FitModel(
    name="lorentzian",
    param_names=("A", "x0", "fwhm", "c"),
    param_units=("pA", "ueV", "ueV", "pA"),
    func=_unpack(model_lorentzian),
    guess=_peak_guess,
    jac=_jac_lorentzian,
)

GAUSSIAN = FitModel(
    name="gaussian",
    param_names=("A", "x0", "fwhm", "c"),
    param_units=("pA", "ueV", "ueV", "pA"),
    func=_unpack(model_gaussian),
    guess=_peak_guess,
    jac=_jac_gaussian,
)

SIN2 = FitModel(
    name="sin2",
    param_names=("A", "f", "theta0", "c"),
    param_units=("ueV", "1", "deg", "ueV"),
    func=_unpack(model_sin2),
    guess=_guess_sin2,
    jac=_jac_sin2,
    normalize=_normalize_sin2,
)

LINEAR = FitModel(
    name="linear",
    param_names=("m", "b"),
    param_units=("y/x", "y"),
    func=_unpack(model_linear),
    guess=_guess_linear,
    jac=_jac_linear,
)


def gaussian_amplitude_model(x0: float, fwhm: float) -> FitModel:
    """Gaussian of fixed center and width; only amplitude and offset are free."""

    def func(x, p):
        return model_gaussian(x, p[0], x0, fwhm, p[1])

    def jac(x, p):
        return np.column_stack([np.exp(-FOUR_LN2 * (x - x0) ** 2 / fwhm**2), np.ones_like(x)])

    def guess(x, y):
        (A, c), *_ = np.linalg.lstsq(jac(x, None), y, rcond=None)
        return np.array([A, c])

    return FitModel(
        name="gaussian_amplitude",
        param_names=("A", "c"),
        param_units=("pA", "pA"),
        func=func,
        guess=guess,
        jac=jac,
        fixed={"x0": x0, "fwhm": fwhm},
    )


def ose_fss_model(s: int, fss_zero: float, delta_cw_zero: float) -> FitModel:
    """FSS vs CW intensity with (a, k) free; polarization and zero-drive values fixed."""

    def func(x, p):
        return model_ose_fss(x, p[0], p[1], s, fss_zero, delta_cw_zero)

    def guess(x, y):
        # dispersive small-drive slope s·10a/(4Δ0), ignoring screening
        lo = x <= np.min(x) + (np.max(x) - np.min(x)) / 3.0
        if np.count_nonzero(lo) < 2:
            lo = np.ones_like(x, dtype=bool)
        slope = np.polyfit(x[lo], y[lo] - fss_zero, 1)[0] if np.ptp(x[lo]) > 0 else 0.0
        a = abs(4.0 * delta_cw_zero * slope / (10.0 * s))
        k = delta_cw_zero / (20.0 * max(float(np.max(x)), 1e-12))
        return np.array([max(a, 1e-3), k])

    return FitModel(
        name="ose_fss",
        param_names=("a", "k"),
        param_units=("meV^2 um^2/W", "eV um^2/W"),
        func=func,
        guess=guess,
        fixed={"s": s, "fss_zero": fss_zero, "delta_cw_zero": delta_cw_zero},
    )


def fit_models() -> Dict[str, FitModel]:
    return {m.name: m for m in (DAMPED_SINE, LORENTZIAN, GAUSSIAN, SIN2, LINEAR)}
