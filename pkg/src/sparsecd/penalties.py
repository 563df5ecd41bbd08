"""Scalar penalty machinery.

Threshold (proximal) operators, penalty values and derivatives, and the
per-penalty slope-bound factors consumed by the screening rules.  All
functions here are pure and safe to call concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

SCALAR_FAMILIES = ("lasso", "mcp", "scad", "mnet")
GROUP_FAMILIES = ("group-mcp", "group-scad")
FAMILIES = SCALAR_FAMILIES + GROUP_FAMILIES

# Base operator behind each family and the code used by the compiled kernels.
_BASE = {
    "lasso": "lasso",
    "mcp": "mcp",
    "mnet": "mcp",
    "group-mcp": "mcp",
    "scad": "scad",
    "group-scad": "scad",
}
PEN_CODE = {"lasso": 0, "mcp": 1, "scad": 2}


@dataclass(frozen=True)
class PenaltySpec:
    """Penalty family plus its tuning constants.

    gamma controls the concavity (must exceed 1 for MCP-type penalties and 2
    for SCAD-type ones; it is ignored for the lasso).  alpha is the Mnet mix
    between the MCP part (alpha) and the ridge part (1 - alpha); it must be
    1 for every other family.
    """

    family: str
    gamma: float = 3.0
    alpha: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown penalty family {self.family!r}")
        if self.family in ("mcp", "mnet", "group-mcp") and not self.gamma > 1.0:
            raise ValueError("gamma must exceed 1 for MCP-type penalties")
        if self.family in ("scad", "group-scad") and not self.gamma > 2.0:
            raise ValueError("gamma must exceed 2 for SCAD-type penalties")
        if self.family == "mnet":
            if not 0.0 < self.alpha <= 1.0:
                raise ValueError("alpha must lie in (0, 1]")
        elif self.alpha != 1.0:
            raise ValueError("alpha is only used by the mnet family")

    @property
    def base(self) -> str:
        return _BASE[self.family]

    @property
    def code(self) -> int:
        return PEN_CODE[self.base]

    @property
    def grouped(self) -> bool:
        return self.family in GROUP_FAMILIES


def _soft(z: float, lam: float) -> float:
    return math.copysign(max(abs(z) - lam, 0.0), z)


CURVATURE_MARGIN = 1e-4


def min_curvature(gamma: float, lam2: float, base: str) -> float:
    """Smallest quadratic curvature keeping the univariate problem convex.

    Coordinate updates under GLM weights can see curvatures below 1/gamma
    (MCP) or 1/(gamma-1) (SCAD), where the closed-form operator is invalid.
    Updates clamp their curvature to this floor, which damps the step but
    leaves the fixed points (and hence the KKT conditions) unchanged.
    """
    if base == "mcp":
        return (1.0 + CURVATURE_MARGIN) / gamma - lam2
    if base == "scad":
        return (1.0 + CURVATURE_MARGIN) / (gamma - 1.0) - lam2
    return 0.0


def scaled_threshold(z: float, lam1: float, gamma: float, d: float, base: str) -> float:
    """Minimizer of (d/2)*b**2 - z*b + J_{lam1,gamma}(|b|).

    d bundles the quadratic curvature seen by one coordinate: column
    curvature (1 for a standardized gaussian column) plus any ridge term.
    Kink-point ties resolve toward the lower regime; the one-sided limits
    agree by continuity.
    """
    if base == "lasso":
        return _soft(z, lam1) / d
    az = abs(z)
    if base == "mcp":
        if az <= lam1:
            return 0.0
        if az <= gamma * lam1 * d:
            return math.copysign((az - lam1) / (d - 1.0 / gamma), z)
        return z / d
    # scad
    if az <= lam1 * (1.0 + d):
        return _soft(z, lam1) / d
    if az <= gamma * lam1 * d:
        return math.copysign(
            (az - gamma * lam1 / (gamma - 1.0)) / (d - 1.0 / (gamma - 1.0)), z
        )
    return z / d


def threshold(z: float, lam: float, spec: PenaltySpec, ridge: float = 0.0) -> float:
    """Univariate threshold operator for a standardized column.

    Returns the minimizer of ``(1/2)(b - z)**2 + J_{lam,gamma}(|b|) +
    (ridge/2) * b**2``.  For Mnet pass ``lam = alpha * lambda`` and
    ``ridge = (1 - alpha) * lambda``; elsewhere ridge is 0.
    """
    if lam < 0.0:
        raise ValueError("lambda must be nonnegative")
    if ridge < 0.0:
        raise ValueError("ridge must be nonnegative")
    base = spec.base
    d = 1.0 + ridge
    if base == "mcp" and spec.gamma * d <= 1.0:
        raise ValueError("gamma*(1+ridge) must exceed 1: univariate problem is not convex")
    if base == "scad" and (spec.gamma - 1.0) * d <= 1.0:
        raise ValueError("(gamma-1)*(1+ridge) must exceed 1: univariate problem is not convex")
    return scaled_threshold(z, lam, spec.gamma, d, base)


def penalty_value(t: float, lam: float, spec: PenaltySpec) -> float:
    """Penalty J_{lam,gamma}(t) at t = |beta| (or a group norm), t >= 0.

    The Mnet ridge term is accounted for separately by the objective; here
    mnet means the MCP part at its own lambda.
    """
    if t < 0.0:
        raise ValueError("t must be nonnegative")
    base = spec.base
    g = spec.gamma
    if base == "lasso":
        return lam * t
    if base == "mcp":
        if t <= g * lam:
            return lam * t - t * t / (2.0 * g)
        return g * lam * lam / 2.0
    # scad: continuous antiderivative of the three-regime derivative
    if t <= lam:
        return lam * t
    if t <= g * lam:
        return (2.0 * g * lam * t - t * t - lam * lam) / (2.0 * (g - 1.0))
    return lam * lam * (g + 1.0) / 2.0


def penalty_derivative(t: float, lam: float, spec: PenaltySpec) -> float:
    """Derivative of J_{lam,gamma} at t >= 0; continuous, in [0, lam]."""
    if t < 0.0:
        raise ValueError("t must be nonnegative")
    base = spec.base
    g = spec.gamma
    if base == "lasso":
        return lam
    if base == "mcp":
        return max(lam - t / g, 0.0)
    if t <= lam:
        return lam
    if t <= g * lam:
        return (g * lam - t) / (g - 1.0)
    return 0.0


def slope_bound(spec: PenaltySpec) -> float:
    """Rate factor bounding how fast residual correlations move in lambda.

    1 for the lasso, gamma/(gamma-1) for MCP-type penalties and
    gamma/(gamma-2) for SCAD-type ones; tends to the lasso value as
    gamma -> infinity.
    """
    base = spec.base
    if base == "lasso":
        return 1.0
    if base == "mcp":
        return spec.gamma / (spec.gamma - 1.0)
    return spec.gamma / (spec.gamma - 2.0)
