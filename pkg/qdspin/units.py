"""Unit-tagged quantities and conversions.

Each physical magnitude used by the package is wrapped in a small frozen
dataclass carrying its canonical unit. Operations declared on one dimension
reject the others at the call boundary, so an Energy can never be passed where
a Rate is expected.

Canonical units:
    Energy: µeV
    AngularFrequency: rad·ps⁻¹
    Rate: ps⁻¹
    Time: ps
    Field: kV·cm⁻¹
    Intensity: kW·cm⁻² (laboratory axis)
    Irradiance: W·µm⁻² (used inside the Stark-shift model)
    Voltage: V
    FssSlope: µeV per kV·cm⁻¹
    Angle: degrees

Each conversion has a scalar array kernel (``*_values``) and a typed wrapper.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import ClassVar, Tuple, Type, TypeVar

import numpy as np

from .constants import (
    DEFAULT_V_BI,
    DEFAULT_W_I_NM,
    HBAR_UEV_PS,
    KW_PER_CM2_TO_W_PER_UM2,
    V_PER_NM_TO_KV_PER_CM,
)
from .errors import ParameterError, QuantityError, UnitError

Q = TypeVar("Q", bound="Quantity")


@dataclass(frozen=True)
class Quantity:
    value: float

    unit: ClassVar[str] = ""
    aliases: ClassVar[Tuple[str, ...]] = ()
    non_negative: ClassVar[bool] = False

    def __post_init__(self) -> None:
        if isinstance(self.value, Quantity):
            raise UnitError(
                f"{type(self).__name__} cannot wrap a {type(self.value).__name__}"
            )
        v = float(self.value)
        if not math.isfinite(v):
            raise QuantityError(f"{type(self).__name__} must be finite, got {v}")
        if self.non_negative and v < 0:
            raise QuantityError(f"{type(self).__name__} must be >= 0, got {v} {self.unit}")
        object.__setattr__(self, "value", v)

    def __float__(self) -> float:
        return self.value

    def __str__(self) -> str:
        return f"{self.value:g} {self.unit}"

    @classmethod
    def accepts_unit(cls, unit: str) -> bool:
        return unit == cls.unit or unit in cls.aliases


@dataclass(frozen=True)
class Energy(Quantity):
    unit: ClassVar[str] = "µeV"
    aliases: ClassVar[Tuple[str, ...]] = ("ueV", "micro-eV")


@dataclass(frozen=True)
class AngularFrequency(Quantity):
    unit: ClassVar[str] = "rad/ps"
    aliases: ClassVar[Tuple[str, ...]] = ("rad ps^-1",)


@dataclass(frozen=True)
class Rate(Quantity):
    unit: ClassVar[str] = "1/ps"
    aliases: ClassVar[Tuple[str, ...]] = ("ps^-1", "per_ps")
    non_negative: ClassVar[bool] = True


@dataclass(frozen=True)
class Time(Quantity):
    unit: ClassVar[str] = "ps"
    non_negative: ClassVar[bool] = True


@dataclass(frozen=True)
class Field(Quantity):
    unit: ClassVar[str] = "kV/cm"
    aliases: ClassVar[Tuple[str, ...]] = ("kV cm^-1",)


@dataclass(frozen=True)
class Intensity(Quantity):
    unit: ClassVar[str] = "kW/cm^2"
    aliases: ClassVar[Tuple[str, ...]] = ("kW cm^-2",)
    non_negative: ClassVar[bool] = True


@dataclass(frozen=True)
class Irradiance(Quantity):
    unit: ClassVar[str] = "W/um^2"
    aliases: ClassVar[Tuple[str, ...]] = ("W µm^-2", "W/µm^2")
    non_negative: ClassVar[bool] = True


@dataclass(frozen=True)
class Voltage(Quantity):
    unit: ClassVar[str] = "V"


@dataclass(frozen=True)
class FssSlope(Quantity):
    unit: ClassVar[str] = "ueV/(kV/cm)"
    aliases: ClassVar[Tuple[str, ...]] = ("µeV/(kV/cm)", "ueV V^-1 cm")


@dataclass(frozen=True)
class Angle(Quantity):
    unit: ClassVar[str] = "deg"


@dataclass(frozen=True)
class DiodeGeometry:
    """Built-in voltage and intrinsic-region width of the p-i-n/Schottky diode."""

    v_bi: Voltage = Voltage(DEFAULT_V_BI)
    w_i_nm: float = DEFAULT_W_I_NM

    def __post_init__(self) -> None:
        require(self.v_bi, Voltage, "v_bi")
        if not (self.w_i_nm > 0):
            raise ParameterError(f"w_i must be > 0 nm, got {self.w_i_nm}")

    def to_dict(self) -> dict:
        return {"v_bi_V": self.v_bi.value, "w_i_nm": self.w_i_nm}


def require(q: object, cls: Type[Q], name: str = "argument") -> Q:
    """Check that ``q`` carries the dimension ``cls``.

    Raises:
        UnitError: If ``q`` is a bare number or a quantity of another dimension
    """
    if not isinstance(q, cls):
        got = type(q).__name__
        raise UnitError(f"{name} must be {cls.__name__} [{cls.unit}], got {got}")
    return q


# Array kernels
def ueV_to_rad_per_ps(e_ueV):
    return np.divide(e_ueV, HBAR_UEV_PS)


def rad_per_ps_to_ueV(w):
    return np.multiply(w, HBAR_UEV_PS)


def kw_cm2_to_w_um2(i_kw_cm2):
    return np.multiply(i_kw_cm2, KW_PER_CM2_TO_W_PER_UM2)


def w_um2_to_kw_cm2(i_w_um2):
    return np.divide(i_w_um2, KW_PER_CM2_TO_W_PER_UM2)


def bias_to_field_values(v, v_bi: float = DEFAULT_V_BI, w_i_nm: float = DEFAULT_W_I_NM):
    return (np.add(v, v_bi) / w_i_nm) * V_PER_NM_TO_KV_PER_CM


def field_to_bias_values(e_kv_cm, v_bi: float = DEFAULT_V_BI, w_i_nm: float = DEFAULT_W_I_NM):
    return np.divide(e_kv_cm, V_PER_NM_TO_KV_PER_CM) * w_i_nm - v_bi


# Typed conversions
def energy_to_omega(e: Energy) -> AngularFrequency:
    """Convert an energy splitting to the angular frequency ω = E/ħ.

    Args:
        e: Energy in µeV

    Returns:
        Angular frequency in rad·ps⁻¹
    """
    require(e, Energy, "e")
    return AngularFrequency(float(ueV_to_rad_per_ps(e.value)))


def omega_to_energy(w: AngularFrequency) -> Energy:
    require(w, AngularFrequency, "w")
    return Energy(float(rad_per_ps_to_ueV(w.value)))


def bias_to_field(v: Voltage, geom: DiodeGeometry = DiodeGeometry()) -> Field:
    """Convert a diode bias voltage to the DC field across the intrinsic region.

    E = (V + V_bi) / W_i. Negative fields are returned as-is; callers that need
    a reverse-bias field reject them.

    Args:
        v: Applied bias in V
        geom: Diode geometry (built-in voltage, intrinsic width)

    Returns:
        Field in kV·cm⁻¹
    """
    require(v, Voltage, "v")
    return Field(float(bias_to_field_values(v.value, geom.v_bi.value, geom.w_i_nm)))


def field_to_bias(e: Field, geom: DiodeGeometry = DiodeGeometry()) -> Voltage:
    require(e, Field, "e")
    return Voltage(float(field_to_bias_values(e.value, geom.v_bi.value, geom.w_i_nm)))


def intensity_convert(i: Intensity) -> Irradiance:
    """Convert a laboratory intensity (kW·cm⁻²) to irradiance in W·µm⁻².

    Raises:
        UnitError: If ``i`` is not an Intensity
        QuantityError: If the magnitude is negative (raised on construction)
    """
    require(i, Intensity, "i")
    return Irradiance(float(kw_cm2_to_w_um2(i.value)))


def intensity_unconvert(i: Irradiance) -> Intensity:
    require(i, Irradiance, "i")
    return Intensity(float(w_um2_to_kw_cm2(i.value)))


QUANTITY_TYPES = {
    cls.__name__: cls
    for cls in (
        Energy,
        AngularFrequency,
        Rate,
        Time,
        Field,
        Intensity,
        Irradiance,
        Voltage,
        FssSlope,
        Angle,
    )
}
