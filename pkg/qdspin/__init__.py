__all__ = [
    "analytic",
    "cli",
    "config",
    "constants",
    "dynamics",
    "errors",
    "fitting",
    "io_utils",
    "models",
    "plotting",
    "rates",
    "scenarios",
    "spectra",
    "units",
]
