"""Kinetic models with uncertain interactions: particle and structure-preserving
Fokker-Planck solvers, stochastic collocation, and closed-form oracles."""

from .collocation import CollocationEnsemble, FPSetup, MCSetup, run_collocation
from .errors import (
    BackendMismatch,
    BoundsViolation,
    ConfigError,
    DomainError,
    EmptyRange,
    KinUQError,
    MissingData,
    NonConvergence,
    NotConverged,
    ParameterError,
    SingularDiffusion,
    StabilityViolation,
)
from .fokker_planck import FieldOnGrid, FluxCoefficients, Grid1D, SPSolver
from .model import InteractionModel, UncertainParameter, make_model
from .montecarlo import MCConfig, run_mc
from .quadrature import QuadratureRule, erf, erfi, gauss_hermite, gauss_legendre

__version__ = "0.1.0"
