"""Operator algebra of a charge on a sphere around a magnetic monopole.

Operators are first-order differential operators with function coefficients,
evaluated pointwise through truncated Taylor jets; identities between them
are checked coefficient by coefficient on grids.
"""
from .algebra_checks import IdentitySuite, Mutation, Report, builtin_suites, run_suite, run_suites
from .fields import Coords, Grid, PointSet, SpherePoint, TestFunction, make_grid, test_function, test_function_catalog
from .holonomy import LoopSpec, convergence_scan, exp_apply, gido_loop
from .jets import Jet, jet_var
from .monopole import (NORTH, SOUTH, GaugeChoice, PhysicalParams, angular_momentum_gauged, gauge_function,
                       geometric_momentum, geometric_momentum_gauged)
from .operators import FirstOrderOperator, apply, commutator, conjugate, operator_equal
from .quantization import ab_phase, dirac_check, flux_quantum, lz_spectrum, quantized_flux

__version__ = "0.1.0"
