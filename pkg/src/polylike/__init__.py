"""Numerical laboratory for polynomial-like maps in one and two complex variables."""
from .maps import (Domain, Family, MapSpec, MapSpecError, Shape, ValidationReport,
                   map_spec_from_dict, parse_map_spec, serialize_map_spec,
                   validate_polynomial_like)
from .preimage import FiberCapExceeded, PreimageSet, fiber, iterated_fiber
from .measure import (InvarianceResidual, Provenance, WalkError, WeightedCloud,
                      invariance_report, read_cloud, sample_equilibrium, standard_tests,
                      transfer_iterate, write_cloud)
from .spectrum import LyapSpectrum, entropy_estimate, lyapunov, lyapunov_sweep, mixing_decay
from .periodic import PeriodicPointSet, discrepancy, periodic_measure, periodic_points
from .geometry import DegreeTable, critical_volume, degree_estimate, degree_table, plb_decay
from .green1d import expansion_constant, green, hausdorff_dimension, holder_check
from .exceptional import AlgebraicSet, Line, Point, fiber_count_in_X, invariance_verdict
from . import reference

__version__ = "0.1.0"
