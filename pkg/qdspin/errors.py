from __future__ import annotations

from typing import Optional


class QdSpinError(Exception):
    """Base class for all errors raised by qdspin."""


class UnitError(QdSpinError, TypeError):
    """A quantity of the wrong dimension was passed."""


class QuantityError(QdSpinError, ValueError):
    """A magnitude violates its invariant (sign, finiteness)."""


class ParameterError(QdSpinError, ValueError):
    """A parameter record violates one of its invariants."""


class ModelDomainError(QdSpinError, ValueError):
    """A closed-form model was evaluated outside its domain of validity."""


class IntegrationError(QdSpinError, RuntimeError):
    """The time integrator could not produce a trustworthy trajectory."""


class FitError(QdSpinError, RuntimeError):
    """Least-squares fit could not be set up or its covariance is undefined."""


class SynthesisError(QdSpinError, RuntimeError):
    """Spectrum synthesis or fidelity extraction failed."""


class ConfigError(QdSpinError, ValueError):
    """Scenario configuration is invalid.

    Args:
        message: Human readable description
        path: JSON pointer of the offending element ("" for the document root)
    """

    def __init__(self, message: str, path: Optional[str] = None):
        self.path = path or ""
        super().__init__(f"{self.path or '/'}: {message}")


NUMERICAL_ERRORS = (
    ModelDomainError,
    IntegrationError,
    FitError,
    SynthesisError,
    ParameterError,
    QuantityError,
    UnitError,
)
