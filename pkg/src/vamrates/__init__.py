"""Quantitative asymptotic regularity for viscosity-type proximal iterations.

Runs the viscosity iteration with error terms (and its exact and Halpern-type
special cases) for m-accretive operators on R^d, builds explicit rate
certificates from moduli of the parameter schedules and checks them against
recorded residuals.
"""

from .core import (
    TOL_FLOAT,
    DomainError,
    HorizonExceeded,
    MissingModulus,
    PreconditionViolation,
    Verdict,
)
from .iteration import ErrorTerms, IterationTrace, ParamSchedule, ScheduleModuli, run_vame
from .moduli import Modulus, RealSequence
from .operators import ContractionMap, ResolventOperator
from .rates import RateCertificate
from .verify import VerificationReport, certify, empirical_rate

__all__ = [
    "TOL_FLOAT",
    "ContractionMap",
    "DomainError",
    "ErrorTerms",
    "HorizonExceeded",
    "IterationTrace",
    "MissingModulus",
    "Modulus",
    "ParamSchedule",
    "PreconditionViolation",
    "RateCertificate",
    "RealSequence",
    "ResolventOperator",
    "ScheduleModuli",
    "Verdict",
    "VerificationReport",
    "certify",
    "empirical_rate",
    "run_vame",
]
