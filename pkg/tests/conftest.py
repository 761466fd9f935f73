import json
from pathlib import Path

import numpy as np
import pytest

from qdspin.config import set_quiet
from qdspin.models import CwDriveConfig, LinearPolarization, QuantumDotParams
from qdspin.units import Energy, Field, FssSlope, Rate


@pytest.fixture(autouse=True)
def quiet_console():
    set_quiet(True)
    yield
    set_quiet(False)


@pytest.fixture
def qd_a():
    """Low-FSS dot with radiative decay and slow hole escape."""
    return QuantumDotParams(
        fss_zero=Energy(2.01),
        gamma_e=Rate(0.021),
        gamma_h=Rate(3.968e-5),
        gamma_r=Rate(1.0 / 700.0),
        chi_e=FssSlope(-0.0219),
        e_ref=Field(72.0),
        name="qd-a",
    )


@pytest.fixture
def qd_c():
    return QuantumDotParams(
        fss_zero=Energy(13.2),
        gamma_e=Rate(0.021),
        gamma_h=Rate(0.0),
        gamma_r=Rate(0.0),
        chi_e=FssSlope(-0.10),
        e_ref=Field(60.0),
        name="qd-c",
    )


@pytest.fixture
def qd_e():
    return QuantumDotParams(
        fss_zero=Energy(31.2),
        gamma_e=Rate(0.021),
        gamma_h=Rate(0.0),
        gamma_r=Rate(0.0),
        chi_e=FssSlope(0.25),
        e_ref=Field(72.0),
        name="qd-e",
    )


@pytest.fixture
def drive_h():
    return CwDriveConfig(LinearPolarization.H, Energy(76.6), a_dipole=275.0, k_screen=8.4, name="h")


@pytest.fixture
def drive_v():
    return CwDriveConfig(LinearPolarization.V, Energy(63.4), a_dipole=275.0, k_screen=8.4, name="v")


@pytest.fixture
def drive_fidelity():
    return CwDriveConfig(LinearPolarization.V, Energy(33.4), a_dipole=275.0, k_screen=3.5, name="fid")


@pytest.fixture
def rng():
    return np.random.default_rng(20240101)


@pytest.fixture
def write_config(tmp_path):
    """Write a config document into tmp_path and return its path."""

    def _write(doc, name="config.json") -> Path:
        path = tmp_path / name
        path.write_text(json.dumps(doc), encoding="utf-8")
        return path

    return _write
