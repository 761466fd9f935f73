"""Physical constants, canonical units and shared defaults.

Canonical internal units are µeV for energies, ps for times, ps⁻¹ for rates,
kV·cm⁻¹ for fields and W·µm⁻² for irradiance. Every conversion factor used by
the package lives here so that no module hardcodes its own.
"""

from scipy.constants import e, hbar

# Reduced Planck constant in µeV·ps (658.2119569...)
HBAR_UEV_PS = hbar / e * 1e18


# Conversion factors
# 1 kW·cm⁻² = 1e3 W / 1e8 µm²
KW_PER_CM2_TO_W_PER_UM2 = 1.0e-5

# 1 V·nm⁻¹ = 1e7 V·cm⁻¹ = 1e4 kV·cm⁻¹
V_PER_NM_TO_KV_PER_CM = 1.0e4

MEV2_TO_UEV2 = 1.0e6
EV_TO_UEV = 1.0e6


# Diode geometry (reverse-biased Schottky diode)
DEFAULT_V_BI = 0.76  # V
DEFAULT_W_I_NM = 230.0  # nm


# Dot defaults
DEFAULT_GAMMA_R = 1.0 / 700.0  # ps⁻¹, radiative recombination
DEFAULT_T2_STAR_PS = 10_000.0  # extrinsic hole dephasing
DEFAULT_TRION_BINDING_UEV = 2500.0
DEFAULT_E_REF_KV_CM = 72.0
REFERENCE_GAMMA_E = 0.021  # ps⁻¹, rate at which the fidelity-vs-FSS curve is drawn


# Spectroscopy defaults
DEFAULT_PULSE_FWHM_UEV = 200.0  # transform-limited pump/probe pulse
DEFAULT_PROBE_DELAY_PS = 1000.0  # >= 5/ΓX for ΓX >= 0.005 ps⁻¹
DEFAULT_DETUNING_STEP_UEV = 10.0
DEFAULT_X0_DIP_FRACTION = 0.5  # depth of the X0 subtraction dip, in pc_scale units
DEFAULT_PC_SCALE_PA = 10.0

DEFAULT_CW_LINEWIDTH_UEV = 40.0
DEFAULT_CW_SPAN_UEV = 200.0
DEFAULT_CW_STEP_UEV = 1.0


# Integrator
RESOLUTION_GUARD = 0.05  # max dt·max(δ, ΓX)
ORACLE_STEP_FRACTION = 0.005  # dt·max(δ, ΓX) for oracle runs
ORACLE_TAIL = 1e-10  # exciton population left at t_max
STEADY_STATE_EXCITON_LIMIT = 1e-8
TRACE_STEP_TOLERANCE = 1e-9
TRACE_TOTAL_TOLERANCE = 1e-7
POSITIVITY_TOLERANCE = 1e-10
PROPAGATION_BLOCK = 256
COHERENCE_TOLERANCE = 1e-7  # |ρ01|² − ρ00·ρ11


# Fitting
FIT_MAX_ITER = 200
FIT_XTOL = 1e-10
FIT_FTOL = 1e-12
FIT_GTOL = 1e-15
FIT_CONDITION_LIMIT = 1e12  # column-scaled JᵀJ
FIT_SOLVER = "scipy least_squares, method=lm (MINPACK lmder)"
# MINPACK sets its own initial Levenberg parameter; a 1e-3 start cannot be passed in
FIT_DAMPING_INIT = "not settable (MINPACK default)"
PEAK_DETECTION_SIGMAS = 2.0


# Fidelity
ERROR_CORRECTION_THRESHOLD = 0.0075


# Scenario I/O
SCHEMA_ID = "qdspin/v1"
OSE_SIGN_CONVENTION = (
    "qdspin-ose/v1: dw = (s/2)(sqrt(D^2 + (hbar*Omega)^2) - D), s=+1 H, s=-1 V; "
    "V-polarized drive lowers the FSS"
)

# Dynamics cross-check of closed-form scenarios
VERIFY_TOLERANCE = 1e-6  # relative
VERIFY_MIN_POINTS = 5

SCENARIOS = ["fig3", "fig4", "fig5b", "fig5c", "beats", "spectrum", "fit", "cwscan", "chie"]

# Trajectory CSV export
TRAJECTORY_COLUMNS = [
    "time_ps",
    "n_co",
    "n_cross",
    "re_coherence",
    "im_coherence",
    "p_hole_up",
    "p_hole_down",
    "p_empty",
]

SPECTRUM_COLUMNS = ["x", "y", "sigma"]
