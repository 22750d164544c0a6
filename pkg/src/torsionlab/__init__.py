"""Numerical lab for the planar torsion problem, its integral identities and
quantitative rigidity estimates for Serrin's problem and the Soap Bubble Theorem."""

from .geometry import (
    BoundaryCurve, BoundaryGrid, CurveError, GeometrySummary, InteriorGrid, area_perimeter,
    asymmetry, curve_frame, delta_gamma, diameter, reference_constants, rho_in_out,
    sphere_condition_radii, summarize,
)
from .identities import IdentityReport, run_all
from .stability import FamilySpec, StabilityRecord, estimate_mu, run_family
from .torsion import SolverError, TorsionSolution, find_critical_point, solve_torsion

__version__ = "0.1.0"

__all__ = [
    "BoundaryCurve", "BoundaryGrid", "CurveError", "FamilySpec", "GeometrySummary",
    "IdentityReport", "InteriorGrid", "SolverError", "StabilityRecord", "TorsionSolution",
    "area_perimeter", "asymmetry", "curve_frame", "delta_gamma", "diameter", "estimate_mu",
    "find_critical_point", "reference_constants", "rho_in_out", "run_all", "run_family",
    "solve_torsion", "sphere_condition_radii", "summarize",
]
