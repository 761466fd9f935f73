import numpy as np
import pytest

from qdspin.analytic import (
    decay_limited_linewidth,
    delta_cw_at_intensity,
    fidelity_godden,
    fidelity_lower_bound,
    fidelity_values,
    fidelity_vs_intensity,
    fss_after_ose,
    fss_at_field,
    ose_shift,
    ose_shift_dispersive,
    qubit_timescales,
    with_intensity,
)
from qdspin.errors import ModelDomainError, ParameterError, UnitError
from qdspin.models import CwDriveConfig, FidelityValue, LinearPolarization, QuantumDotParams
from qdspin.units import Energy, Field, FssSlope, Rate


@pytest.mark.parametrize(
    "fss, expected",
    [(0.0, 1.0), (2.01, 0.9896), (13.2, 0.7615), (31.2, 0.582)],
)
def test_fidelity_at_tabulated_splittings(fss, expected):
    f = fidelity_godden(Energy(fss), Rate(0.021), Rate(0.0)).f
    assert f == pytest.approx(expected, abs=5e-4)


def test_fidelity_bounds_and_monotonicity():
    fss = np.linspace(0.0, 500.0, 2001)
    f = fidelity_values(fss, 0.021)
    assert np.all(f <= 1.0) and np.all(f >= 0.5)
    assert np.all(np.diff(f) < 0)
    assert fidelity_values(1e7, 0.021) == pytest.approx(0.5, abs=1e-9)


def test_fidelity_even_in_fss():
    assert fidelity_values(-7.3, 0.021) == pytest.approx(fidelity_values(7.3, 0.021))


def test_fidelity_uses_gamma_x_minus_gamma_h():
    # Γr only enters through ΓX; ΓX − Γh is the decisive rate
    a = fidelity_godden(Energy(10.0), Rate(0.03), Rate(0.002)).f
    b = fidelity_godden(Energy(10.0), Rate(0.028), Rate(0.0)).f
    assert a == pytest.approx(b)


def test_fidelity_domain_error():
    with pytest.raises(ModelDomainError):
        fidelity_godden(Energy(1.0), Rate(0.001), Rate(0.002))
    with pytest.raises(ModelDomainError):
        fidelity_godden(Energy(1.0), Rate(0.002), Rate(0.002))


def test_fidelity_rejects_bare_numbers():
    with pytest.raises(UnitError):
        fidelity_godden(2.01, Rate(0.021), Rate(0.0))


def test_fss_at_field_linear(qd_e):
    assert fss_at_field(qd_e, Field(72.0)).value == pytest.approx(31.2)
    assert fss_at_field(qd_e, Field(82.0)).value == pytest.approx(33.7)
    assert not fss_at_field(qd_e, Field(82.0)).clamped


def test_fss_at_field_below_reference(qd_a):
    assert qd_a.e_ref.value == 72.0
    assert fss_at_field(qd_a, Field(72.0)).value == pytest.approx(2.01)
    assert fss_at_field(qd_a, Field(52.0)).value == pytest.approx(2.448, abs=1e-3)


def test_fss_at_field_clamps_at_zero():
    qd = QuantumDotParams(
        fss_zero=Energy(0.2), gamma_e=Rate(0.021), gamma_h=Rate(0.0), chi_e=FssSlope(-1.0)
    )
    value = fss_at_field(qd, Field(qd.e_ref.value + 1.0))
    assert value.value == 0.0
    assert value.clamped


def test_zero_slope_gives_constant_fidelity(qd_c):
    qd = QuantumDotParams(fss_zero=qd_c.fss_zero, gamma_e=qd_c.gamma_e, gamma_h=qd_c.gamma_h)
    fs = {
        fidelity_godden(fss_at_field(qd, Field(e)).energy, qd.gamma_x, qd.gamma_h).f
        for e in (40.0, 60.0, 80.0)
    }
    assert len(fs) == 1


def test_ose_v_drive_lowers_fss(drive_v):
    fss = fss_after_ose(Energy(13.2), with_intensity(drive_v, 0.44))
    assert fss.value == pytest.approx(4.573, abs=0.01)
    assert ose_shift(with_intensity(drive_v, 0.44)).value < 0


def test_ose_h_drive_raises_fss(drive_h):
    fss = fss_after_ose(Energy(13.2), with_intensity(drive_h, 0.2))
    assert fss.value == pytest.approx(15.4, abs=0.05)
    assert ose_shift(with_intensity(drive_h, 0.2)).value > 0


def test_ose_zero_intensity_is_exactly_zero(drive_h, drive_v):
    assert ose_shift(drive_h).value == 0.0
    assert ose_shift(drive_v).value == 0.0


def test_ose_dispersive_limit(drive_v):
    cw = with_intensity(drive_v, 1e-4)
    assert ose_shift_dispersive(cw).value == pytest.approx(ose_shift(cw).value, rel=1e-3)


def test_ose_h_branch_monotone(drive_h):
    fss = [fss_after_ose(Energy(13.2), with_intensity(drive_h, i)).value for i in np.linspace(0, 0.44, 45)]
    assert np.all(np.diff(fss) > 0)


def test_ose_nonpositive_detuning_is_domain_error():
    cw = CwDriveConfig(LinearPolarization.V, Energy(1.0), a_dipole=275.0, k_screen=8.4)
    with pytest.raises(ModelDomainError):
        ose_shift(with_intensity(cw, 0.44))


def test_ose_clamps_negative_fss():
    cw = CwDriveConfig(LinearPolarization.V, Energy(20.0), a_dipole=2000.0, k_screen=0.0)
    value = fss_after_ose(Energy(1.0), with_intensity(cw, 0.4))
    assert value.clamped
    assert value.value == 0.0


def test_fidelity_vs_intensity(qd_c, drive_fidelity):
    assert fidelity_vs_intensity(qd_c, drive_fidelity).f == pytest.approx(0.7615, abs=5e-4)
    f = fidelity_vs_intensity(qd_c, with_intensity(drive_fidelity, 0.25)).f
    assert f == pytest.approx(0.8855, abs=1e-3)
    # quoted measurement 0.868 ± 0.036
    assert abs(f - 0.868) <= 0.036


def test_fidelity_vs_intensity_at_zero_matches_godden(qd_a, drive_v):
    expected = fidelity_godden(qd_a.fss_zero, qd_a.gamma_x, qd_a.gamma_h).f
    assert fidelity_vs_intensity(qd_a, drive_v).f == expected


def test_lower_bound():
    value = fidelity_lower_bound(10.0, 0.1, 25)
    assert value.is_lower_bound
    assert value.f == pytest.approx(10.0 / 10.02)
    assert value.sigma == pytest.approx(0.02)
    assert value.n_samples == 25


@pytest.mark.parametrize("args", [(0.0, 0.1, 25), (10.0, -0.1, 25), (10.0, 0.1, 1)])
def test_lower_bound_rejects_bad_input(args):
    with pytest.raises(ParameterError):
        fidelity_lower_bound(*args)


@pytest.mark.parametrize("gamma_h, expected", [(3.968e-5, True), (1.0 / 3000.0, False)])
def test_qubit_timescales_flag(gamma_h, expected):
    qd = QuantumDotParams(fss_zero=Energy(2.01), gamma_e=Rate(0.021), gamma_h=Rate(gamma_h))
    ts = qubit_timescales(qd)
    assert ts.meets_2th_gt_t2star is expected
    assert ts.init_time.value == pytest.approx(1.0 / 0.021)
    assert ts.hole_lifetime.value == pytest.approx(1.0 / gamma_h)


def test_qubit_timescales_need_hole_escape(qd_c):
    with pytest.raises(ModelDomainError):
        qubit_timescales(qd_c)


def test_decay_limited_linewidth(qd_a):
    assert decay_limited_linewidth(qd_a).value == pytest.approx(14.79, abs=0.05)


@pytest.mark.parametrize("f, meets", [(0.995, True), (0.99, False), (0.98, False)])
def test_error_threshold(f, meets):
    assert FidelityValue(f).meets_error_threshold is meets


def test_gamma_e_must_exceed_gamma_h():
    with pytest.raises(ParameterError):
        QuantumDotParams(fss_zero=Energy(1.0), gamma_e=Rate(0.001), gamma_h=Rate(0.001))


@pytest.mark.parametrize(
    "drive, intensity, expected",
    [("drive_v", 0.44, 26.44), ("drive_fidelity", 0.25, 24.65)],
)
def test_delta_cw_at_intensity(request, drive, intensity, expected):
    cw = with_intensity(request.getfixturevalue(drive), intensity)
    assert delta_cw_at_intensity(cw).value == pytest.approx(expected, abs=1e-9)


@pytest.mark.parametrize(
    "pc_cross, sigma, n, expected",
    [(10.0, 0.1, 16, 0.99751), (5.0, 0.2, 25, 0.99206)],
)
def test_lower_bound_examples(pc_cross, sigma, n, expected):
    assert fidelity_lower_bound(pc_cross, sigma, n).f == pytest.approx(expected, abs=5e-6)


def test_lower_bound_tightens_with_samples_and_loosens_with_noise():
    by_n = [fidelity_lower_bound(4.0, 0.1, n).f for n in range(2, 200)]
    by_sigma = [fidelity_lower_bound(4.0, s, 16).f for s in np.linspace(0.0, 2.0, 81)]
    assert np.all(np.diff(by_n) > 0)
    assert np.all(np.diff(by_sigma) < 0)
    assert by_sigma[0] == 1.0
