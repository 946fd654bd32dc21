"""
Exception hierarchy for the DN-map laboratory.
"""
from typing import Any, Dict, Optional


class DnlabError(Exception):
    """Base class for every error raised by dnlab."""

    def to_dict(self) -> Dict[str, Any]:
        """Machine-readable description used by the CLI error JSON."""
        return {"error": type(self).__name__, "message": str(self)}


class ConfigError(DnlabError):
    """Scenario configuration is malformed or inconsistent."""

    def __init__(self, message: str, key: Optional[str] = None):
        super().__init__(message)
        self.key = key

    def to_dict(self) -> Dict[str, Any]:
        data = super().to_dict()
        data["key"] = self.key
        return data


class GridError(DnlabError):
    """Invalid discretization request."""


class SolverError(DnlabError):
    """
    Failure of a time-stepping solve.

    Carries the partial solve report (when available) and the excitation
    parameter lambda of the failing member of a solution family.
    """

    def __init__(self, message: str, report: Any = None, level: Optional[int] = None,
                 lam: Optional[float] = None):
        super().__init__(message)
        self.report = report
        self.level = level
        self.lam = lam

    def with_lambda(self, lam: float) -> "SolverError":
        """Tag the error with the excitation parameter it was raised for."""
        self.lam = lam
        return self

    def to_dict(self) -> Dict[str, Any]:
        data = super().to_dict()
        data["level"] = self.level
        data["lambda"] = self.lam
        if self.report is not None and hasattr(self.report, "to_dict"):
            data["report"] = self.report.to_dict()
        return data


class NewtonDivergence(SolverError):
    """Newton residual not reduced below tolerance within the iteration budget."""


class BlowUp(SolverError):
    """Solution sup norm exceeded the configured cap."""


class SingularStepMatrix(SolverError):
    """The implicit step matrix could not be factorized."""


class PerturbationTooLarge(DnlabError):
    """Boundary perturbation lies outside the ball B_epsilon."""

    def __init__(self, norm: float, epsilon: float):
        super().__init__(f"perturbation surrogate norm {norm:.6g} exceeds epsilon {epsilon:.6g}")
        self.norm = norm
        self.epsilon = epsilon


class WitnessedError(DnlabError):
    """An error that points at a concrete offending (t, x, u) sample."""

    def __init__(self, message: str, witness: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.witness = witness or {}

    def to_dict(self) -> Dict[str, Any]:
        data = super().to_dict()
        data["witness"] = self.witness
        return data


class HypothesisViolation(WitnessedError):
    """A semilinear term failed a required hypothesis check."""


class InvariantViolation(WitnessedError):
    """A numerical invariant did not hold at this discretization."""


class OutOfRange(WitnessedError):
    """A requested value lies outside the sampled reachable range."""


class ReconstructionError(WitnessedError):
    """Reconstruction of the semilinear term could not be completed."""


class NonMonotoneTable(ReconstructionError):
    """A per-node (s, F) table is not strictly increasing in s."""


class EmptyValidBox(ReconstructionError):
    """The valid box in s is empty or thinner than the s-sample spacing."""
