"""Tunneling rates as a function of DC field.

Rates are measured, not modeled, so they enter as a table. Between rows the
logarithm of each rate is interpolated with a monotone piecewise cubic; there
is no extrapolation. A phenomenological Γ(E) = A·exp(−b/E) law builds
illustrative tables from two anchor points per carrier.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Dict, Iterable, List, Sequence, Tuple

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import ModelDomainError, ParameterError
from .units import DiodeGeometry, Field, Rate, Voltage, bias_to_field


@dataclass(frozen=True)
class ExpRateLaw:
    """Γ(E) = prefactor·exp(−barrier/E), E in kV·cm⁻¹, Γ in ps⁻¹."""

    prefactor: float
    barrier: float

    @classmethod
    def from_anchors(cls, anchors: Sequence[Tuple[float, float]]) -> "ExpRateLaw":
        """Solve the two-point law through (E1, Γ1), (E2, Γ2)."""
        if len(anchors) != 2:
            raise ParameterError("an exponential rate law needs exactly two anchors")
        (e1, g1), (e2, g2) = anchors
        if not (e1 > 0 and e2 > 0 and e1 != e2 and g1 > 0 and g2 > 0):
            raise ParameterError(f"invalid rate anchors {anchors}")
        barrier = math.log(g2 / g1) / (1.0 / e1 - 1.0 / e2)
        return cls(prefactor=g1 * math.exp(barrier / e1), barrier=barrier)

    def __call__(self, e_kv_cm):
        return self.prefactor * np.exp(-self.barrier / np.asarray(e_kv_cm, dtype=float))

    def to_dict(self) -> Dict[str, float]:
        return {"prefactor_per_ps": self.prefactor, "barrier_kV_cm": self.barrier}


@dataclass(frozen=True)
class RateTable:
    fields: np.ndarray
    gamma_e: np.ndarray
    gamma_h: np.ndarray
    illustrative: bool = False

    def __post_init__(self) -> None:
        e = np.asarray(self.fields, dtype=float)
        ge = np.asarray(self.gamma_e, dtype=float)
        gh = np.asarray(self.gamma_h, dtype=float)
        if e.ndim != 1 or e.size < 2 or e.shape != ge.shape or e.shape != gh.shape:
            raise ParameterError("a rate table needs >= 2 rows of (field, gamma_e, gamma_h)")
        d = np.diff(e)
        if np.all(d < 0):
            e, ge, gh = e[::-1], ge[::-1], gh[::-1]
        elif not np.all(d > 0):
            raise ParameterError("rate table field axis must be strictly monotone")
        if not (np.all(ge > 0) and np.all(gh > 0)):
            raise ParameterError("tabulated rates must be > 0")
        bad = np.nonzero(ge <= gh)[0]
        if bad.size:
            raise ParameterError(f"gamma_e must exceed gamma_h; violated at E = {e[bad[0]]:g} kV/cm")
        for name, arr in (("fields", e), ("gamma_e", ge), ("gamma_h", gh)):
            object.__setattr__(self, name, arr)

    @classmethod
    def from_rows(cls, rows: Iterable[Dict[str, Any]], geom: DiodeGeometry = DiodeGeometry()) -> "RateTable":
        """Rows carry ``field`` (kV/cm) or ``bias`` (V) plus ``gamma_e`` and ``gamma_h``."""
        fields: List[float] = []
        ge: List[float] = []
        gh: List[float] = []
        for row in rows:
            if "field" in row:
                fields.append(float(row["field"]))
            else:
                fields.append(bias_to_field(Voltage(float(row["bias"])), geom).value)
            ge.append(float(row["gamma_e"]))
            gh.append(float(row["gamma_h"]))
        return cls(np.array(fields), np.array(ge), np.array(gh))

    @classmethod
    def from_laws(
        cls, electron: ExpRateLaw, hole: ExpRateLaw, fields: Sequence[float]
    ) -> "RateTable":
        e = np.asarray(fields, dtype=float)
        return cls(e, electron(e), hole(e), illustrative=True)

    @property
    def field_range(self) -> Tuple[float, float]:
        return float(self.fields[0]), float(self.fields[-1])

    def _interpolate(self, values: np.ndarray, e):
        e = np.asarray(e, dtype=float)
        lo, hi = self.field_range
        if np.any(e < lo) or np.any(e > hi):
            raise ModelDomainError(
                f"field outside rate table [{lo:g}, {hi:g}] kV/cm; no extrapolation"
            )
        return np.exp(PchipInterpolator(self.fields, np.log(values))(e))

    def gamma_e_at(self, e):
        return self._interpolate(self.gamma_e, e)

    def gamma_h_at(self, e):
        return self._interpolate(self.gamma_h, e)

    def at(self, e: Field) -> Tuple[Rate, Rate]:
        """(Γe, Γh) at field ``e``.

        Raises:
            ModelDomainError: If ``e`` lies outside the table, or the
                interpolated Γe does not exceed Γh there
        """
        ge = float(self.gamma_e_at(e.value))
        gh = float(self.gamma_h_at(e.value))
        if ge <= gh:
            raise ModelDomainError(
                f"interpolated gamma_e {ge:.4g} <= gamma_h {gh:.4g} 1/ps at E = {e.value:g} kV/cm"
            )
        return Rate(ge), Rate(gh)

    def to_rows(self) -> List[Dict[str, float]]:
        return [
            {"field": float(e), "gamma_e": float(a), "gamma_h": float(b)}
            for e, a, b in zip(self.fields, self.gamma_e, self.gamma_h)
        ]
