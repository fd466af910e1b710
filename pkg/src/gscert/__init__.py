"""Numerical checks for vanishing theorems of flat functions under
differential inequalities |X.f| <= c|f| along vector fields."""

from .certifier import CertifyConfig, GsCertificate, certify_gs, flatness_probe, lower_bound_witness
from .expr import ParsedFunction, differentiate, evaluate, parse, simplify
from .field import VectorField, classify_singularity, eigenvalues, jacobian_at
from .flow import IntegratorConfig, Orbit, fit_sink_rate, integrate

__version__ = "0.1.0"

__all__ = [
    "CertifyConfig", "GsCertificate", "certify_gs", "flatness_probe", "lower_bound_witness",
    "ParsedFunction", "differentiate", "evaluate", "parse", "simplify",
    "VectorField", "classify_singularity", "eigenvalues", "jacobian_at",
    "IntegratorConfig", "Orbit", "fit_sink_rate", "integrate",
]
