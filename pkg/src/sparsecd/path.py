"""Regularization-path drivers: targeted cycling with KKT repair.

Four strategies fit the same sequence of solutions:

* ``cyclic``  - full coordinate descent over all variables, one KKT pass as
  a certificate;
* ``strong``  - solve on the sequential-strong-rule keep-set, then check the
  discarded variables and absorb any violations until none remain;
* ``active``  - like ``strong`` with the previous active set as the target;
* ``hybrid``  - two-stage targeted cycling: start from the previous active
  set, first repair against the strong set, then against its complement.

Whatever the strategy, every stored solution satisfies the KKT conditions on
the full dimension, so the strategies differ in speed, not in output.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, StandardizedDesign, standardize, unstandardize
from .penalties import PenaltySpec
from .screening import (
    active_gram_min_eig,
    default_kkt_tol,
    kkt_check,
    lambda_max,
    local_convexity,
    strong_set,
)
from .solver import (
    DEFAULT_MAX_ITER,
    DEFAULT_MAX_OUTER,
    DEFAULT_TOL,
    ConvergenceError,
    SolverState,
    deviance as solver_deviance,
    glm_outer,
    initial_state,
    solve_fixed_lambda,
)

STRATEGIES = ("cyclic", "strong", "active", "hybrid")

# GLM paths stop early once the fit explains 99% of the null deviance:
# below that the model is (numerically) saturated and the remaining lambdas
# drive the linear predictor toward separation.
SATURATION_FRACTION = 0.01


@dataclass
class ViolationRecord:
    """Variables erroneously discarded by the strong rule at one lambda."""

    lambda_index: int
    lam: float
    indices: list[int]
    locally_convex: bool | None

    @property
    def count(self) -> int:
        return len(self.indices)


@dataclass
class ViolationLog:
    """Per-lambda record of strong-rule violations along one path.

    For the strong and hybrid strategies these are the variables outside the
    strong set absorbed during KKT repair; for active cycling, repaired
    entrants outside the strong set; for cyclic fits, the variables that
    ended up active despite being discarded by the rule.
    """

    records: list[ViolationRecord] = field(default_factory=list)

    def n_violated_lambdas(self) -> int:
        return sum(1 for r in self.records if r.count > 0)

    def n_violated_variables(self) -> int:
        return sum(r.count for r in self.records)

    def csv_rows(self):
        for r in self.records:
            yield (r.lambda_index, r.lam, r.count, r.locally_convex,
                   ";".join(str(i) for i in r.indices))


@dataclass
class CoefPath:
    """Solutions along a decreasing lambda sequence.

    beta rows are per-lambda coefficient vectors (standardized scale until
    :func:`sparsecd.data.unstandardize` is applied); corr holds the residual
    correlations x_j' r / n at each solution, which also seed the next
    strong set.  Set sizes, the violation log, and the local-convexity
    diagnostics mirror the fitting process.
    """

    lambdas: np.ndarray
    beta: np.ndarray
    intercept: np.ndarray
    corr: np.ndarray
    strong_size: np.ndarray
    active_size: np.ndarray
    violations: ViolationLog
    tau_min: np.ndarray
    locally_convex: np.ndarray  # dtype=object: True/False/None per lambda
    lambda_star: float | None
    family: str
    spec: PenaltySpec
    strategy: str
    standardized: bool
    n_cycles: np.ndarray
    group_index: np.ndarray | None = None
    group_norms: np.ndarray | None = None
    beta_whitened: np.ndarray | None = None  # group paths only
    stop_reason: str | None = None  # set when the path was truncated

    @property
    def m(self) -> int:
        return len(self.lambdas)

    @property
    def p(self) -> int:
        return self.beta.shape[1]

    def first_nonconvex_index(self) -> int | None:
        for k, flag in enumerate(self.locally_convex):
            if flag is False:
                return k
        return None

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Linear predictor (m, n_new) for every lambda; original scale only."""
        if self.standardized:
            raise ValueError("unstandardize the path before predicting on raw x")
        return self.beta @ np.asarray(x).T + self.intercept[:, None]


def _as_lambda_array(lambdas) -> np.ndarray:
    values = getattr(lambdas, "values", lambdas)
    arr = np.atleast_1d(np.asarray(values, dtype=np.float64))
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("lambdas must be a non-empty 1-d sequence")
    if np.any(arr <= 0):
        raise ValueError("lambdas must be positive")
    if arr.size > 1 and np.any(np.diff(arr) >= 0):
        raise ValueError("lambdas must be strictly decreasing")
    return arr


def _solve_on(state: SolverState, spec: PenaltySpec, target: np.ndarray,
              sd: StandardizedDesign, max_outer: int) -> None:
    state.target = np.asarray(np.sort(target), dtype=np.intp)
    if sd.family == "gaussian":
        solve_fixed_lambda(state, spec)
    else:
        glm_outer(state, spec, sd, max_outer=max_outer)


def fit_path(
    data: Dataset,
    spec: PenaltySpec,
    lambdas,
    strategy: str = "hybrid",
    *,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    max_outer: int = DEFAULT_MAX_OUTER,
    kkt_tol: float | None = None,
) -> CoefPath:
    """Fit a full path on a Dataset and return original-scale coefficients."""
    sd = standardize(data)
    path = fit_path_standardized(
        sd, spec, lambdas, strategy,
        tol=tol, max_iter=max_iter, max_outer=max_outer, kkt_tol=kkt_tol,
    )
    return unstandardize(path, sd)


def fit_path_standardized(
    sd: StandardizedDesign,
    spec: PenaltySpec,
    lambdas,
    strategy: str = "hybrid",
    *,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    max_outer: int = DEFAULT_MAX_OUTER,
    kkt_tol: float | None = None,
) -> CoefPath:
    """Fit a path on an already-standardized design (timing entry point).

    The first lambda is assigned the null model rather than solved: the
    sequence is expected to start at lambda_max, where the all-zero solution
    is exact by definition.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    if spec.grouped:
        raise ValueError("use sparsecd.groups.fit_group_path for grouped penalties")
    lams = _as_lambda_array(lambdas)
    m, n, p = lams.size, sd.n, sd.p
    lmax = lambda_max(sd, spec)
    if kkt_tol is None:
        kkt_tol = default_kkt_tol(lmax)
    glm = sd.family != "gaussian"
    nonconst = np.flatnonzero(~sd.constant)

    beta = np.zeros((m, p))
    intercept = np.zeros(m)
    corr = np.zeros((m, p))
    strong_size = np.zeros(m, dtype=np.int64)
    active_size = np.zeros(m, dtype=np.int64)
    tau_min = np.zeros(m)
    convex = np.empty(m, dtype=object)
    n_cycles = np.zeros(m, dtype=np.int64)
    log = ViolationLog()

    state = initial_state(sd, lams[0], tol=tol, max_iter=max_iter)
    c = sd.xs.T @ state.residual / n
    corr[0] = c
    intercept[0] = state.intercept
    strong_size[0] = int(np.sum(np.abs(c[nonconst]) >= spec.alpha * lams[0]))
    status0 = local_convexity(np.inf, spec, lams[0])
    tau_min[0] = status0.tau_min
    convex[0] = status0.locally_convex
    log.records.append(ViolationRecord(0, float(lams[0]), [], status0.locally_convex))

    null_dev = None
    if glm:
        null_dev = float(np.sum(solver_deviance(sd.y, state.eta, sd.family)))

    m_eff = m
    stop_reason = None
    for k in range(1, m):
        lam_k, lam_prev = float(lams[k]), float(lams[k - 1])
        state.lam = lam_k
        cycles_before = state.n_iter
        c_prev = corr[k - 1]
        rule_keep = strong_set(c_prev[nonconst], lam_k, lam_prev, spec)
        rule_keep = nonconst[rule_keep]
        a_prev = np.flatnonzero(state.beta)
        # active variables are never screened out: the rule bounds how fast
        # inactive correlations move, not where a nonzero coefficient goes
        strong = np.union1d(rule_keep, a_prev)
        strong_size[k] = strong.size
        in_strong = np.zeros(p, dtype=bool)
        in_strong[strong] = True
        violators: list[int] = []

        try:
            if strategy == "cyclic":
                _solve_on(state, spec, nonconst, sd, max_outer)
            elif strategy == "strong":
                target = strong
                while True:
                    _solve_on(state, spec, target, sd, max_outer)
                    check = np.setdiff1d(nonconst, target, assume_unique=True)
                    viol = kkt_check(state, spec, check, kkt_tol)
                    if viol.size == 0:
                        break
                    violators.extend(int(j) for j in viol)
                    target = np.union1d(target, viol)
            elif strategy == "active":
                target = a_prev
                while True:
                    _solve_on(state, spec, target, sd, max_outer)
                    check = np.setdiff1d(nonconst, target, assume_unique=True)
                    viol = kkt_check(state, spec, check, kkt_tol)
                    if viol.size == 0:
                        break
                    violators.extend(int(j) for j in viol if not in_strong[j])
                    target = np.union1d(target, viol)
            else:  # hybrid
                target = a_prev
                while True:
                    _solve_on(state, spec, target, sd, max_outer)
                    v1 = kkt_check(
                        state, spec, np.setdiff1d(strong, target, assume_unique=True),
                        kkt_tol,
                    )
                    if v1.size:
                        target = np.union1d(target, v1)
                        continue
                    rest = np.setdiff1d(nonconst, np.union1d(target, strong),
                                        assume_unique=True)
                    v2 = kkt_check(state, spec, rest, kkt_tol)
                    if v2.size:
                        violators.extend(int(j) for j in v2)
                        target = np.union1d(target, v2)
                        continue
                    break
        except ConvergenceError as exc:
            stop_reason = f"path truncated before lambda index {k}: {exc}"
            warnings.warn(stop_reason, stacklevel=2)
            m_eff = k
            break

        beta[k] = state.beta
        intercept[k] = state.intercept
        corr[k] = sd.xs.T @ state.residual / n
        active = np.flatnonzero(state.beta)
        active_size[k] = active.size
        if strategy == "cyclic":
            violators = [int(j) for j in active if not in_strong[j]]
        status = local_convexity(active_gram_min_eig(sd.xs, active), spec, lam_k)
        tau_min[k] = status.tau_min
        convex[k] = status.locally_convex
        n_cycles[k] = state.n_iter - cycles_before
        log.records.append(
            ViolationRecord(k, lam_k, sorted(set(violators)), status.locally_convex)
        )
        if glm:
            dev = float(np.sum(solver_deviance(sd.y, state.eta, sd.family)))
            if dev < SATURATION_FRACTION * null_dev:
                stop_reason = (
                    f"saturated fit at lambda index {k} (deviance below "
                    f"{SATURATION_FRACTION:.0%} of null); remaining lambdas skipped"
                )
                warnings.warn(stop_reason, stacklevel=2)
                m_eff = k + 1
                break

    lambda_star = None
    for k in range(m_eff):
        if convex[k] is False:
            lambda_star = float(lams[k])
            break

    return CoefPath(
        lambdas=lams[:m_eff],
        beta=beta[:m_eff],
        intercept=intercept[:m_eff],
        corr=corr[:m_eff],
        strong_size=strong_size[:m_eff],
        active_size=active_size[:m_eff],
        violations=log,
        tau_min=tau_min[:m_eff],
        locally_convex=convex[:m_eff],
        lambda_star=lambda_star,
        family=sd.family,
        spec=spec,
        strategy=strategy,
        standardized=True,
        n_cycles=n_cycles[:m_eff],
        stop_reason=stop_reason,
    )
