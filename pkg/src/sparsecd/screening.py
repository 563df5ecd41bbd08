"""Discarding rules, KKT violation detection, and local-convexity tracking.

The sequential strong rules are heuristics: they bound how fast residual
correlations can move between consecutive lambda values and discard
variables that cannot reach the inclusion threshold.  Violations are
possible, so every path fit pairs them with KKT checks (see
:mod:`sparsecd.path`).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import StandardizedDesign
from .penalties import PenaltySpec, penalty_derivative, slope_bound

EIG_DENSE_LIMIT = 500  # exact eigensolve up to this active-set size


@dataclass
class ScreenSets:
    """Working sets of one lambda step of a targeted-cycling algorithm."""

    strong: np.ndarray  # S(lambda_k)
    active_prev: np.ndarray  # A(lambda_{k-1})
    target: np.ndarray  # T, grows monotonically within the step
    violations_inner: list = field(default_factory=list)  # V1 entrants
    violations_outer: list = field(default_factory=list)  # V / V2 entrants


@dataclass
class ConvexityStatus:
    """Local-convexity diagnostic at one lambda.

    tau_min is the smallest eigenvalue of the active-set Gram matrix
    X_A' X_A / n.  locally_convex is None for grouped penalties, where no
    criterion is defined.  lambda_star (the largest lambda at which
    convexity first fails) is a path-level quantity filled by the driver.
    """

    tau_min: float
    locally_convex: bool | None
    lambda_star: float | None = None


def null_residual(sd: StandardizedDesign) -> np.ndarray:
    """Residual of the null (intercept-only) model: r0 = y - mu(null)."""
    if sd.family == "gaussian":
        return sd.yc
    return sd.y - sd.y.mean()


def lambda_max(sd: StandardizedDesign, spec: PenaltySpec | None = None) -> float:
    """Smallest lambda with an all-zero solution: max_j |x_j' r0 / n|.

    Divided by alpha for the Mnet penalty, whose MCP part only sees
    alpha * lambda.  Grouped penalties have their own variant in
    :mod:`sparsecd.groups`.
    """
    if np.all(sd.constant):
        raise ValueError("all columns are constant")
    c0 = sd.xs.T @ null_residual(sd) / sd.n
    lmax = float(np.max(np.abs(c0)))
    if spec is not None and spec.family == "mnet":
        lmax /= spec.alpha
    return lmax


def strong_set(
    c_prev: np.ndarray, lambda_k: float, lambda_prev: float, spec: PenaltySpec
) -> np.ndarray:
    """Sequential strong rule: indices kept for the solve at lambda_k.

    Discards j when |c_j(lambda_{k-1})| < alpha * {lambda_k +
    slope_bound * (lambda_k - lambda_prev)}; for the lasso this is the
    classic 2*lambda_k - lambda_prev cutoff.
    """
    if lambda_k > lambda_prev:
        raise ValueError("lambda_k must not exceed lambda_prev")
    thr = spec.alpha * (lambda_k + slope_bound(spec) * (lambda_k - lambda_prev))
    return np.flatnonzero(np.abs(c_prev) >= thr)


def basic_rules(
    c0: np.ndarray, lam: float, lmax: float, norms: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Single-lambda SAFE and strong keep-sets for the lasso.

    c0 holds x_j' y / n; norms holds the products ||x_j|| * ||y|| / n.
    Returns (safe_keep, strong_keep); the strong rule discards at least as
    much, so strong_keep is a subset of safe_keep.
    """
    if lam > lmax:
        raise ValueError("lambda must not exceed lambda_max")
    ac = np.abs(c0)
    safe_keep = np.flatnonzero(ac >= lam - norms * (lmax - lam) / lmax)
    strong_keep = np.flatnonzero(ac >= 2.0 * lam - lmax)
    return safe_keep, strong_keep


def kkt_check(state, spec: PenaltySpec, check_set: np.ndarray, kkt_tol: float) -> np.ndarray:
    """Stationarity check for the (zero-coefficient) variables in check_set.

    Returns the indices whose residual correlation reaches the inclusion
    boundary: |x_j' r / n| >= alpha * lambda - kkt_tol.  An empty result
    certifies the current solution on check_set.
    """
    check_set = np.asarray(check_set, dtype=np.intp)
    if check_set.size == 0:
        return check_set
    r = state.residual
    n = state.xs.shape[0]
    if check_set.size > state.xs.shape[1] // 2:
        c = (state.xs.T @ r) / n
        c = c[check_set]
    else:
        c = (state.xs[:, check_set].T @ r) / n
    return check_set[np.abs(c) >= spec.alpha * state.lam - kkt_tol]


def kkt_residuals(
    beta: np.ndarray,
    corr: np.ndarray,
    lam: float,
    spec: PenaltySpec,
) -> tuple[float, float]:
    """Worst-case stationarity errors of a solution on the full dimension.

    corr holds x_j' r / n at the solution.  Returns (active_err,
    inactive_excess): active_err is max_j |corr_j - dJ(|beta_j|) sign -
    lambda2 beta_j| over the active set; inactive_excess is
    max_j |corr_j| - alpha * lambda over the zero set (negative when the
    strict condition holds).
    """
    lam1 = spec.alpha * lam
    lam2 = (1.0 - spec.alpha) * lam
    nz = beta != 0.0
    active_err = 0.0
    if np.any(nz):
        grad = np.array(
            [penalty_derivative(abs(b), lam1, spec) * np.sign(b) for b in beta[nz]]
        )
        active_err = float(np.max(np.abs(corr[nz] - grad - lam2 * beta[nz])))
    inactive_excess = -np.inf
    if np.any(~nz):
        inactive_excess = float(np.max(np.abs(corr[~nz])) - lam1)
    return active_err, inactive_excess


def active_gram_min_eig(xs: np.ndarray, active: np.ndarray) -> float:
    """Minimum eigenvalue of X_A' X_A / n for the active columns.

    Empty active set: +inf (convex by convention).  |A| > n: 0 by the rank
    argument.  Exact dense eigensolve up to EIG_DENSE_LIMIT columns, a
    shifted inverse-power iteration beyond that (diagnostics must not
    dominate runtime).
    """
    a = np.asarray(active, dtype=np.intp)
    n = xs.shape[0]
    if a.size == 0:
        return np.inf
    if a.size > n:
        return 0.0
    xa = xs[:, a]
    gram = xa.T @ xa / n
    if a.size <= EIG_DENSE_LIMIT:
        return float(max(np.linalg.eigvalsh(gram)[0], 0.0))
    return _inverse_power_min_eig(gram)


def _inverse_power_min_eig(gram: np.ndarray, iters: int = 500) -> float:
    from scipy.linalg import LinAlgError, cho_factor, cho_solve

    k = gram.shape[0]
    shift = 1e-10 * max(float(np.trace(gram)) / k, 1.0)
    try:
        cf = cho_factor(gram + shift * np.eye(k), lower=True)
    except LinAlgError:
        return float(max(np.linalg.eigvalsh(gram)[0], 0.0))
    rng = np.random.default_rng(0)
    vec = rng.standard_normal(k)
    vec /= np.linalg.norm(vec)
    lam = np.inf
    for _ in range(iters):
        nxt = cho_solve(cf, vec)
        nrm = np.linalg.norm(nxt)
        if nrm == 0.0:
            return 0.0
        nxt /= nrm
        lam_new = float(nxt @ gram @ nxt)
        if abs(lam_new - lam) <= 1e-10 * max(1.0, abs(lam_new)):
            return float(max(lam_new, 0.0))
        vec, lam = nxt, lam_new
    # clustered spectrum: the power iteration stalls, fall back to the
    # exact solve rather than report an inflated eigenvalue
    return float(max(np.linalg.eigvalsh(gram)[0], 0.0))


def local_convexity(tau_min: float, spec: PenaltySpec, lam: float) -> ConvexityStatus:
    """Penalty-specific local-convexity test at one lambda.

    MCP: gamma > 1/tau_min; SCAD: gamma > 1 + 1/tau_min; Mnet:
    gamma > 1/(tau_min + (1-alpha)*lambda); lasso is always convex.
    Grouped penalties report None (criterion undefined).
    """
    fam = spec.family
    if fam == "lasso":
        return ConvexityStatus(tau_min, True)
    if fam in ("group-mcp", "group-scad"):
        return ConvexityStatus(tau_min, None)
    if fam == "mnet":
        denom = tau_min + (1.0 - spec.alpha) * lam
        flag = denom > 0.0 and spec.gamma > 1.0 / denom
        return ConvexityStatus(tau_min, bool(flag))
    if fam == "mcp":
        flag = tau_min > 0.0 and spec.gamma > 1.0 / tau_min
        return ConvexityStatus(tau_min, bool(flag))
    # scad
    flag = tau_min > 0.0 and spec.gamma > 1.0 + 1.0 / tau_min
    return ConvexityStatus(tau_min, bool(flag))


def default_kkt_tol(lmax: float) -> float:
    """Relative KKT tolerance: 1e-6 * max(1, lambda_max)."""
    return 1e-6 * max(1.0, lmax)
