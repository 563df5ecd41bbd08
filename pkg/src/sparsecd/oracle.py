"""Independent correctness oracles for the test suite.

Everything here is deliberately decoupled from the solver's update formulas:
closed-form orthogonal-design paths, grid minimization of the univariate and
tiny-instance objectives, and finite-difference stationarity checks.  Only
the objective definition itself is shared vocabulary with the solver.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .penalties import PenaltySpec
from .solver import objective


@dataclass
class OracleReport:
    """Outcome of one oracle comparison."""

    max_deviation: float
    failing: list
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_deviation <= self.tolerance


def _pen_value(t, lam: float, gamma: float, base: str):
    # independent re-statement of the penalty functions (not imported from
    # sparsecd.penalties, so a sign error there cannot hide here)
    t = np.abs(np.asarray(t, dtype=np.float64))
    if base == "lasso":
        return lam * t
    if base == "mcp":
        return np.where(t <= gamma * lam, lam * t - 0.5 * t * t / gamma,
                        0.5 * gamma * lam * lam)
    return np.where(
        t <= lam,
        lam * t,
        np.where(
            t <= gamma * lam,
            (2.0 * gamma * lam * t - t * t - lam * lam) / (2.0 * (gamma - 1.0)),
            0.5 * lam * lam * (gamma + 1.0),
        ),
    )


def univariate_objective(b, z: float, lam: float, spec: PenaltySpec,
                         ridge: float = 0.0) -> np.ndarray:
    """(1/2)(b - z)^2 + J(|b|) + (ridge/2) b^2, vectorized over b."""
    b = np.asarray(b, dtype=np.float64)
    pen = _pen_value(b, lam, spec.gamma, spec.base)
    return 0.5 * (b - z) ** 2 + pen + 0.5 * ridge * b * b


def grid_minimize_univariate(z: float, lam: float, spec: PenaltySpec,
                             ridge: float = 0.0, step: float = 1e-5) -> float:
    """Grid-minimize the univariate objective over [-2|z|, 2|z|].

    Coarse pass at 1e-3 resolution, then local refinement down to ``step``;
    the pieces of the objective are wide relative to the coarse grid for the
    lambda ranges used in the tests.
    """
    bound = 2.0 * abs(z)
    if bound == 0.0:
        return 0.0
    grid = np.arange(-bound, bound + 1e-3, 1e-3)
    vals = univariate_objective(grid, z, lam, spec, ridge)
    best = grid[int(np.argmin(vals))]
    width = 1e-3
    while width > step:
        lo, hi = best - 2.0 * width, best + 2.0 * width
        width /= 10.0
        grid = np.arange(lo, hi + width, width)
        vals = univariate_objective(grid, z, lam, spec, ridge)
        best = grid[int(np.argmin(vals))]
    return float(best)


def orthogonal_path_oracle(z: np.ndarray, lambdas: np.ndarray,
                           spec: PenaltySpec) -> np.ndarray:
    """Closed-form coefficient path for an orthonormal design (X'X/n = I).

    z holds the per-variable least-squares values x_j' y / n.  Returns an
    (m, p) array.  The problem separates, so each coefficient follows the
    published closed forms; beyond gamma * lambda the estimate equals z.
    """
    z = np.asarray(z, dtype=np.float64)
    lams = np.asarray(lambdas, dtype=np.float64)
    g = spec.gamma
    out = np.zeros((lams.size, z.size))
    for k, lam in enumerate(lams):
        az = np.abs(z)
        sz = np.sign(z)
        if spec.base == "lasso":
            out[k] = sz * np.maximum(az - lam, 0.0)
        elif spec.base == "mcp":
            firm = (g / (g - 1.0)) * sz * np.maximum(az - lam, 0.0)
            out[k] = np.where(az <= g * lam, firm, z)
        else:  # scad
            soft = sz * np.maximum(az - lam, 0.0)
            mid = sz * ((g - 1.0) / (g - 2.0)) * np.maximum(az - lam * g / (g - 1.0), 0.0)
            out[k] = np.where(az <= 2.0 * lam, soft, np.where(az <= g * lam, mid, z))
    return out


def verify_orthonormal(xs: np.ndarray, tol: float = 1e-8) -> None:
    n, p = xs.shape
    gram = xs.T @ xs / n
    if not np.allclose(gram, np.eye(p), atol=tol):
        raise ValueError("design is not orthonormal (X'X/n != I)")


def brute_force_small(sd, spec: PenaltySpec, lam: float,
                      coarse: int = 101, refine_step: float = 1e-5) -> np.ndarray:
    """Grid-global minimizer of the objective for p <= 3.

    Scans the box [-B, B]^p with B = 2 max |x_j' y / n| on a coarse lattice,
    then refines around the best point until the step is below refine_step.
    """
    p = sd.p
    if p > 3:
        raise ValueError("brute force is restricted to p <= 3")
    z = sd.xs.T @ sd.yc / sd.n
    bound = 2.0 * max(float(np.max(np.abs(z))), 1e-3)
    axes = [np.linspace(-bound, bound, coarse)] * p
    best = _grid_argmin(axes, sd, spec, lam)
    width = 2.0 * bound / (coarse - 1)
    while width > refine_step:
        new_width = width / 5.0
        axes = [np.linspace(b - width, b + width, 11) for b in best]
        best = _grid_argmin(axes, sd, spec, lam)
        width = new_width
    return best


def _grid_argmin(axes, sd, spec, lam) -> np.ndarray:
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    vals = np.array([objective(b, 0.0, sd, spec, lam) for b in pts])
    return pts[int(np.argmin(vals))]


def grid_local_minima(sd, spec: PenaltySpec, lam: float,
                      coarse: int = 201) -> list[np.ndarray]:
    """All strict local minima of the objective on a 2-d coarse lattice,
    refined; used to inspect multi-minimum landscapes (p = 2 only)."""
    if sd.p != 2:
        raise ValueError("landscape enumeration implemented for p = 2")
    z = sd.xs.T @ sd.yc / sd.n
    bound = 2.0 * max(float(np.max(np.abs(z))), 1e-3)
    ax = np.linspace(-bound, bound, coarse)
    grid = np.empty((coarse, coarse))
    for i, b1 in enumerate(ax):
        for j, b2 in enumerate(ax):
            grid[i, j] = objective(np.array([b1, b2]), 0.0, sd, spec, lam)
    minima = []
    for i in range(1, coarse - 1):
        for j in range(1, coarse - 1):
            patch = grid[i - 1:i + 2, j - 1:j + 2]
            if grid[i, j] == patch.min() and (patch > grid[i, j]).sum() >= 7:
                start = np.array([ax[i], ax[j]])
                minima.append(_refine_point(start, 2.0 * bound / (coarse - 1),
                                            sd, spec, lam))
    return minima


def _refine_point(point, width, sd, spec, lam, target=1e-6) -> np.ndarray:
    best = point.copy()
    while width > target:
        axes = [np.linspace(b - width, b + width, 11) for b in best]
        best = _grid_argmin(axes, sd, spec, lam)
        width /= 5.0
    return best


def finite_diff_check(beta: np.ndarray, intercept: float, sd,
                      spec: PenaltySpec, lam: float,
                      step: float = 1e-5, tol: float = 1e-6) -> OracleReport:
    """Directional stationarity test at a claimed solution.

    For each coordinate, the one-sided differences of the objective in both
    directions must be >= -tol (one-sided handles the kinks at zero).
    """
    q0 = objective(beta, intercept, sd, spec, lam)
    worst = -np.inf
    failing = []
    for j in range(len(beta)):
        for sign in (1.0, -1.0):
            b = beta.copy()
            b[j] += sign * step
            slope = (objective(b, intercept, sd, spec, lam) - q0) / step
            if -slope > worst:
                worst = -slope
            if slope < -tol:
                failing.append(j)
    return OracleReport(max_deviation=max(worst, 0.0), failing=sorted(set(failing)),
                        tolerance=tol)
