"""
Inverse package: linearization bundles, DN traces, reachable-set constants,
reconstruction of F and the stability harness.
"""
from .dnmap import DiscrepancyEstimate, DNTrace, estimate_discrepancy, linearized_dn, nonlinear_dn
from .linearize import (
    LinearizationBundle,
    build_bundle,
    check_frechet_lambda,
    check_frechet_s,
    integral_identity_check,
    symmetric_lambda_grid,
)
from .reachable import InversionResult, ReachableConstants, compute_constants, invert_lambda
from .reconstruct import (
    PotentialData,
    ReconstructedNonlinearity,
    compare_to_truth,
    reconstruct,
    uniqueness_probe,
)
from .stability import StabilityRun, run_stability

__all__ = [
    "DiscrepancyEstimate",
    "DNTrace",
    "estimate_discrepancy",
    "linearized_dn",
    "nonlinear_dn",
    "LinearizationBundle",
    "build_bundle",
    "check_frechet_lambda",
    "check_frechet_s",
    "integral_identity_check",
    "symmetric_lambda_grid",
    "InversionResult",
    "ReachableConstants",
    "compute_constants",
    "invert_lambda",
    "PotentialData",
    "ReconstructedNonlinearity",
    "compare_to_truth",
    "reconstruct",
    "uniqueness_probe",
    "StabilityRun",
    "run_stability",
]
