"""Coordinate-descent kernel driver.

Solves the penalized problem at a fixed lambda over a given target set with
warm starts; GLMs run an outer quadratic-majorization loop around the same
inner solver.  The per-cycle hot loop lives in :mod:`sparsecd.backends`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import backends
from .data import StandardizedDesign
from .penalties import PenaltySpec, min_curvature, penalty_value, scaled_threshold

ETA_LIMIT = 30.0  # |linear predictor| beyond this is a saturated fit
WEIGHT_FLOOR = 1e-5  # keeps the working residual finite at saturated points

DEFAULT_TOL = 1e-7
DEFAULT_MAX_ITER = 10_000
# the binomial majorization converges linearly, so the outer budget must be
# generous; iterations are cheap (warm-started inner solves take 1-2 cycles)
DEFAULT_MAX_OUTER = 10_000


class ConvergenceError(RuntimeError):
    """Raised when an iteration limit is hit or a GLM fit saturates.

    Carries the last solver state so callers can report partial results.
    """

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


@dataclass
class SolverState:
    """Mutable state of one path fit; exclusively owned by that fit.

    rw is the working residual: for gaussian it is y - X beta; for GLMs it
    is the majorized residual whose weighted form w * rw equals the model
    residual y - mu(eta).  target holds the indices currently cycled over.
    """

    xs: np.ndarray
    beta: np.ndarray
    rw: np.ndarray
    intercept: float
    target: np.ndarray
    lam: float
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    w: np.ndarray | None = None
    v: np.ndarray = field(default=None)  # per-column curvature
    eta: np.ndarray | None = None  # GLM linear predictor
    n_iter: int = 0

    def __post_init__(self):
        self.target = np.asarray(self.target, dtype=np.intp)
        if self.v is None:
            self.v = np.ones(self.xs.shape[1])

    @property
    def residual(self) -> np.ndarray:
        """Model residual: y - X beta (gaussian) or y - mu(eta) (GLM)."""
        if self.w is None:
            return self.rw
        return self.w * self.rw

    @property
    def active(self) -> np.ndarray:
        return np.flatnonzero(self.beta)


def mu_from_eta(eta: np.ndarray, family: str) -> np.ndarray:
    if family == "binomial":
        return 1.0 / (1.0 + np.exp(-eta))
    if family == "poisson":
        return np.exp(np.minimum(eta, ETA_LIMIT))
    raise ValueError(f"no link for family {family!r}")


def deviance(y: np.ndarray, eta: np.ndarray, family: str) -> np.ndarray:
    """Per-observation deviance at linear predictor eta.

    gaussian: squared error; binomial/poisson: -2 log-likelihood (poisson
    drops the beta-free log y! term).
    """
    if family == "gaussian":
        return (y - eta) ** 2
    if family == "binomial":
        return 2.0 * (np.logaddexp(0.0, eta) - y * eta)
    if family == "poisson":
        return 2.0 * (np.exp(np.minimum(eta, ETA_LIMIT)) - y * eta)
    raise ValueError(f"unknown family {family!r}")


def initial_state(
    sd: StandardizedDesign,
    lam: float,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> SolverState:
    """Null-model state: beta = 0, intercept at the unpenalized MLE."""
    n = sd.n
    v = np.where(sd.constant, 0.0, 1.0)
    if sd.family == "gaussian":
        return SolverState(
            xs=sd.xs, beta=np.zeros(sd.p), rw=sd.yc.copy(), intercept=0.0,
            target=np.arange(sd.p), lam=lam, tol=tol, max_iter=max_iter, v=v,
        )
    ybar = float(sd.y.mean())
    if sd.family == "binomial":
        if ybar <= 0.0 or ybar >= 1.0:
            raise ValueError("binomial response is all one class")
        intercept = float(np.log(ybar / (1.0 - ybar)))
    else:
        if ybar <= 0.0:
            raise ValueError("poisson response is identically zero")
        intercept = float(np.log(ybar))
    eta = np.full(n, intercept)
    state = SolverState(
        xs=sd.xs, beta=np.zeros(sd.p), rw=np.zeros(n), intercept=intercept,
        target=np.arange(sd.p), lam=lam, tol=tol, max_iter=max_iter,
        w=np.ones(n), v=v, eta=eta,
    )
    _refresh_majorization(state, sd)
    return state


def glm_weights(mu: np.ndarray, family: str) -> np.ndarray:
    """Majorization weights of the negative log-likelihood at mu.

    binomial uses the global curvature bound 1/4, which makes every outer
    step a true majorize-minimize step (the objective can never increase,
    so support oscillation is impossible); poisson uses the current-iterate
    curvature mu, capped.
    """
    if family == "binomial":
        return np.full(mu.shape, 0.25)
    w = np.minimum(mu, np.exp(ETA_LIMIT))  # poisson
    return np.maximum(w, WEIGHT_FLOOR)


def _refresh_majorization(state: SolverState, sd: StandardizedDesign) -> None:
    """Recompute weights, working residual, and curvatures at current eta.

    Only the curvatures of the current target columns are needed; the rest
    stay zero and are skipped by the kernel.
    """
    mu = mu_from_eta(state.eta, sd.family)
    w = glm_weights(mu, sd.family)
    t = state.target
    v = np.zeros(sd.p)
    if t.size:
        v[t] = (sd.xs[:, t] ** 2).T @ w / sd.n
    state.v = v
    state.w = w
    state.rw = (sd.y - mu) / w


def cd_update(j: int, state: SolverState, spec: PenaltySpec) -> SolverState:
    """One coordinate update; reference form of the kernel inner step.

    Computes z_j = x_j' (w rw) / n + v_j beta_j and applies the threshold
    operator at lambda1 = alpha * lambda with ridge (1 - alpha) * lambda;
    curvatures below the penalty's convexity floor are clamped (damping the
    step, not moving its fixed point).  Fixed points satisfy the
    coordinatewise stationarity condition.
    """
    n = state.xs.shape[0]
    vj = state.v[j]
    if vj <= 0.0:
        return state
    lam1 = spec.alpha * state.lam
    lam2 = (1.0 - spec.alpha) * state.lam
    a = max(vj, min_curvature(spec.gamma, lam2, spec.base))
    xj = state.xs[:, j]
    wrw = state.rw if state.w is None else state.w * state.rw
    zj = float(xj @ wrw) / n + a * state.beta[j]
    bnew = scaled_threshold(zj, lam1, spec.gamma, a + lam2, spec.base)
    diff = bnew - state.beta[j]
    if diff != 0.0:
        state.beta[j] = bnew
        state.rw -= diff * xj
    return state


def solve_fixed_lambda(state: SolverState, spec: PenaltySpec) -> SolverState:
    """Cycle coordinate updates over the target set until convergence.

    Convergence is max per-cycle coefficient change below tol (columns are
    standardized, so changes are already on a common scale).  For GLM inner
    problems the unpenalized intercept is updated at the top of each cycle.
    """
    lam1 = spec.alpha * state.lam
    lam2 = (1.0 - spec.alpha) * state.lam
    glm = state.w is not None
    if state.target.size == 0 and not glm:
        return state
    target = np.asarray(np.sort(state.target), dtype=np.intp)
    wsum = float(state.w.sum()) if glm else 0.0
    for it in range(1, state.max_iter + 1):
        delta0 = 0.0
        if glm:
            d0 = float(state.w @ state.rw) / wsum
            if d0 != 0.0:
                state.intercept += d0
                state.rw -= d0
                delta0 = abs(d0)
        maxdiff = backends.cd_cycle(
            state.xs, state.w, state.rw, state.beta, state.v, target,
            lam1, lam2, spec.gamma, spec.code,
        )
        state.n_iter += 1
        if max(maxdiff, delta0) < state.tol:
            return state
    raise ConvergenceError(
        f"coordinate descent did not converge in {state.max_iter} cycles "
        f"at lambda={state.lam:.6g}",
        state=state,
    )


def glm_outer(
    state: SolverState,
    spec: PenaltySpec,
    sd: StandardizedDesign,
    max_outer: int = DEFAULT_MAX_OUTER,
) -> SolverState:
    """Majorize-and-solve loop for binomial/poisson likelihoods.

    Alternates a quadratic approximation of the negative log-likelihood
    around the current linear predictor with an inner penalized solve.  The
    outer step is objective-guarded: when the full step does not descend
    (the quadratic model can overshoot near the inclusion threshold of a
    nonconvex penalty), it is halved toward the previous iterate, and
    convergence is only declared after an undamped step.  On exit the
    working residual is refreshed so that w * rw equals y - mu(eta) exactly.
    """
    if state.eta is None:
        raise ValueError("state was not initialized for a GLM fit")
    q_old = objective(state.beta, state.intercept, sd, spec, state.lam)
    tol = state.tol
    d_eta = 1.0
    d_eta_prev = np.inf
    for _ in range(max_outer):
        beta_old = state.beta.copy()
        int_old = state.intercept
        eta_old = state.eta.copy()
        _refresh_majorization(state, sd)
        rw0 = state.rw.copy()
        # inexact inner solves: early majorization points only need rough
        # minimization (any surrogate descent keeps the outer step monotone);
        # the tolerance tightens automatically as eta settles
        state.tol = max(tol, 0.1 * d_eta)
        try:
            solve_fixed_lambda(state, spec)
        finally:
            state.tol = tol
        state.eta = eta_old + (rw0 - state.rw)
        q_new = objective(state.beta, state.intercept, sd, spec, state.lam)
        step = float(np.max(np.abs(state.eta - eta_old)))
        ratio = step / d_eta_prev
        if (q_new <= q_old and 0.2 < ratio < 0.995
                and np.array_equal(np.sign(state.beta), np.sign(beta_old))):
            # guarded geometric extrapolation: during support-stable
            # stretches the majorized iteration contracts linearly, so the
            # limit can be estimated from consecutive steps; fall back to the
            # plain (guaranteed-descent) step whenever this overshoots
            f = min(ratio / (1.0 - ratio), 49.0)
            beta_x = state.beta + f * (state.beta - beta_old)
            int_x = state.intercept + f * (state.intercept - int_old)
            eta_x = state.eta + f * (state.eta - eta_old)
            if np.max(np.abs(eta_x)) <= ETA_LIMIT:
                q_x = objective(beta_x, int_x, sd, spec, state.lam)
                if q_x <= q_new:
                    state.beta, state.intercept, state.eta = beta_x, int_x, eta_x
                    q_new = q_x
        damped = False
        if not q_new <= q_old + 1e-12 * (1.0 + abs(q_old)):
            # the quadratic model overshot (possible for poisson, whose
            # weights are not a global curvature bound): halve toward the
            # previous iterate until the true objective descends
            beta_in, int_in, eta_in = state.beta.copy(), state.intercept, state.eta.copy()
            t = 0.5
            while t > 1e-6:
                state.beta = beta_old + t * (beta_in - beta_old)
                state.intercept = int_old + t * (int_in - int_old)
                state.eta = eta_old + t * (eta_in - eta_old)
                q_new = objective(state.beta, state.intercept, sd, spec, state.lam)
                if q_new <= q_old:
                    break
                t *= 0.5
            else:
                state.beta, state.intercept, state.eta = beta_old, int_old, eta_old
                raise ConvergenceError(
                    f"no descending outer step at lambda={state.lam:.6g}",
                    state=state,
                )
            damped = True
        if np.max(np.abs(state.eta)) > ETA_LIMIT:
            raise ConvergenceError(
                f"saturated fit: |eta| exceeded {ETA_LIMIT:g} at "
                f"lambda={state.lam:.6g}",
                state=state,
            )
        d_eta = float(np.max(np.abs(state.eta - eta_old)))
        d_eta_prev = step if step > 0.0 else np.inf
        q_old = q_new
        if d_eta < tol and not damped:
            _refresh_majorization(state, sd)
            return state
    raise ConvergenceError(
        f"GLM outer loop did not converge in {max_outer} iterations "
        f"at lambda={state.lam:.6g}",
        state=state,
    )


def objective(
    beta: np.ndarray,
    intercept: float,
    sd: StandardizedDesign,
    spec: PenaltySpec,
    lam: float,
) -> float:
    """Penalized objective on the standardized scale.

    Gaussian: ||yc - eta||^2 / (2n) + penalty; binomial/poisson: mean
    negative log-likelihood + penalty (poisson drops the beta-free log y!
    term).  The Mnet ridge term enters here, not in penalty_value.
    """
    n = sd.n
    eta = intercept + sd.xs @ beta
    if sd.family == "gaussian":
        r = sd.yc - eta
        loss = 0.5 * float(r @ r) / n
    elif sd.family == "binomial":
        loss = float(np.mean(np.logaddexp(0.0, eta) - sd.y * eta))
    elif sd.family == "poisson":
        loss = float(np.mean(np.exp(eta) - sd.y * eta))
    else:
        raise ValueError(f"unknown family {sd.family!r}")
    lam1 = spec.alpha * lam
    lam2 = (1.0 - spec.alpha) * lam
    pen = sum(penalty_value(abs(b), lam1, spec) for b in beta if b != 0.0)
    if lam2 > 0.0:
        pen += 0.5 * lam2 * float(beta @ beta)
    return loss + pen
