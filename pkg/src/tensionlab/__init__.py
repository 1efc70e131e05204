"""Harmonic maps into flat conformal metrics: tension solver, Beltrami tools,
quasiconformal diagnostics and the Teichmueller isometry audit."""

__version__ = "0.1.0"

from .analytic import CONVENTIONS, DEFAULT_CONVENTION, AnalyticCoefficient, family_coefficient
from .beltrami import (
    BeltramiProblem,
    beltrami_residual,
    construct_entire,
    inverse_beltrami_residual,
    invert_map,
    nu_quasiregular_residual,
    nu_twist,
    solve_beltrami_ls,
)
from .errors import TensionLabError
from .field import ComplexField, GridSpec
from .metric import FlatMetric, builtin_metric, metric_from_theta
from .records import MapRecord, read_record, write_record
from .tension import SolveParams, SolveReport, solve_dirichlet, tension_residual
