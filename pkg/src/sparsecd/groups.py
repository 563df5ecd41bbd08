"""Group coordinate descent for group MCP/SCAD (gaussian and binomial).

Blocks are whitened first so each group satisfies X_g' X_g / n = I; the
blockwise update then has a closed form: threshold the norm of
z_g = X_g' r / n + beta_g and keep the direction.  Group-level sequential
strong rules and KKT repair mirror the scalar path drivers.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import backends
from .data import Dataset, StandardizedDesign, standardize, unstandardize
from .penalties import (
    PenaltySpec,
    min_curvature,
    penalty_derivative,
    penalty_value,
    scaled_threshold,
    slope_bound,
)
from .path import (
    SATURATION_FRACTION,
    STRATEGIES,
    CoefPath,
    ViolationLog,
    ViolationRecord,
    _as_lambda_array,
)
from .screening import default_kkt_tol, null_residual
from .solver import (
    DEFAULT_MAX_ITER,
    DEFAULT_MAX_OUTER,
    DEFAULT_TOL,
    ETA_LIMIT,
    ConvergenceError,
    deviance as solver_deviance,
    glm_weights,
    mu_from_eta,
)

RANK_TOL = 1e-10


@dataclass
class GroupLayout:
    """Contiguous column ranges of each group in the original design."""

    labels: np.ndarray
    starts: np.ndarray
    ends: np.ndarray

    @property
    def n_groups(self) -> int:
        return len(self.labels)

    @property
    def sizes(self) -> np.ndarray:
        return self.ends - self.starts

    @property
    def multipliers(self) -> np.ndarray:
        """Per-group penalty multipliers lambda_g / lambda = sqrt(p_g)."""
        return np.sqrt(self.sizes.astype(np.float64))


@dataclass
class GroupDesign:
    """Group-orthonormalized design with the per-group back-transforms.

    q holds the whitened columns; group g occupies q[:, t_starts[g]:t_ends[g]]
    (possibly fewer columns than the original block when rank-deficient).
    transforms[g] maps whitened coefficients back to the standardized scale.
    """

    q: np.ndarray
    t_starts: np.ndarray
    t_ends: np.ndarray
    transforms: list
    ranks: np.ndarray
    layout: GroupLayout
    sd: StandardizedDesign

    @property
    def pt(self) -> int:
        return self.q.shape[1]

    def back_transform(self, beta_t: np.ndarray) -> np.ndarray:
        """Whitened-scale coefficients -> standardized-column coefficients."""
        p = self.sd.p
        beta = np.zeros(p)
        for g in range(self.layout.n_groups):
            lo, hi = self.layout.starts[g], self.layout.ends[g]
            tlo, thi = self.t_starts[g], self.t_ends[g]
            if thi > tlo:
                beta[lo:hi] = self.transforms[g] @ beta_t[tlo:thi]
        return beta


def build_group_layout(group_index: np.ndarray) -> GroupLayout:
    gi = np.asarray(group_index)
    change = np.flatnonzero(np.diff(gi) != 0)
    starts = np.concatenate(([0], change + 1)).astype(np.intp)
    ends = np.concatenate((change + 1, [len(gi)])).astype(np.intp)
    labels = gi[starts]
    if len(np.unique(labels)) != len(labels):
        raise ValueError("group identifiers must be contiguous")
    return GroupLayout(labels=labels, starts=starts, ends=ends)


def group_orthonormalize(sd: StandardizedDesign, layout: GroupLayout) -> GroupDesign:
    """Whiten each block so that X_g' X_g / n = I within 1e-8.

    Rank-deficient groups get a reduced-rank transform (with a warning);
    fitted values are invariant under transform plus back-transform.
    """
    n = sd.n
    blocks = []
    transforms = []
    ranks = np.zeros(layout.n_groups, dtype=np.int64)
    t_starts = np.zeros(layout.n_groups, dtype=np.intp)
    t_ends = np.zeros(layout.n_groups, dtype=np.intp)
    pos = 0
    for g in range(layout.n_groups):
        lo, hi = layout.starts[g], layout.ends[g]
        block = sd.xs[:, lo:hi]
        gram = block.T @ block / n
        vals, vecs = np.linalg.eigh(gram)
        keep = vals > RANK_TOL * max(float(vals[-1]), 1.0)
        r = int(keep.sum())
        if r < hi - lo:
            warnings.warn(
                f"group {layout.labels[g]} is rank deficient ({r} of {hi - lo})",
                stacklevel=2,
            )
        m = vecs[:, keep] / np.sqrt(vals[keep])
        blocks.append(block @ m)
        transforms.append(m)
        ranks[g] = r
        t_starts[g] = pos
        pos += r
        t_ends[g] = pos
    q = np.asfortranarray(np.hstack(blocks)) if pos else np.zeros((n, 0), order="F")
    return GroupDesign(
        q=q, t_starts=t_starts, t_ends=t_ends, transforms=transforms,
        ranks=ranks, layout=layout, sd=sd,
    )


def group_norms(gd: GroupDesign, r: np.ndarray) -> np.ndarray:
    """Per-group ||Q_g' r / n||_2."""
    c = gd.q.T @ r / gd.sd.n
    return np.array(
        [np.linalg.norm(c[gd.t_starts[g]:gd.t_ends[g]]) for g in range(gd.layout.n_groups)]
    )


def group_lambda_max(gd: GroupDesign) -> float:
    """Smallest lambda at which every group is zero: max_g ||Q_g' r0 / n|| / sqrt(p_g)."""
    norms = group_norms(gd, null_residual(gd.sd))
    mult = gd.layout.multipliers
    return float(np.max(norms / mult))


def group_strong_set(
    c_prev_norms: np.ndarray,
    lambda_k: float,
    lambda_prev: float,
    spec: PenaltySpec,
    multipliers: np.ndarray,
) -> np.ndarray:
    """Groups kept by the sequential strong rule at lambda_k."""
    if lambda_k > lambda_prev:
        raise ValueError("lambda_k must not exceed lambda_prev")
    thr = multipliers * (lambda_k + slope_bound(spec) * (lambda_k - lambda_prev))
    return np.flatnonzero(c_prev_norms >= thr)


@dataclass
class GroupState:
    """Solver state of one group path fit (whitened coordinates).

    v is the isotropic block curvature: 1 for gaussian; under GLM weights w
    it is max_i w_i, which bounds Q_g' W Q_g / n for whitened blocks and so
    keeps the norm update a valid closed-form descent step.
    """

    beta_t: np.ndarray
    rw: np.ndarray
    intercept: float
    lam: float
    tol: float
    max_iter: int
    w: np.ndarray | None = None
    eta: np.ndarray | None = None
    v: float = 1.0
    n_iter: int = 0

    @property
    def residual(self) -> np.ndarray:
        return self.rw if self.w is None else self.w * self.rw


def group_update(g: int, state: GroupState, spec: PenaltySpec, gd: GroupDesign) -> GroupState:
    """One blockwise update; reference form of the group kernel step."""
    n = gd.sd.n
    a = max(state.v, min_curvature(spec.gamma, 0.0, spec.base))
    lo, hi = gd.t_starts[g], gd.t_ends[g]
    if hi == lo:
        return state
    qg = gd.q[:, lo:hi]
    wrw = state.rw if state.w is None else state.w * state.rw
    zg = qg.T @ wrw / n + a * state.beta_t[lo:hi]
    t = float(np.linalg.norm(zg))
    bnew = np.zeros(hi - lo)
    if t > 0.0:
        tnew = scaled_threshold(t, state.lam * gd.layout.multipliers[g], spec.gamma, a, spec.base)
        bnew = (tnew / t) * zg
    diff = bnew - state.beta_t[lo:hi]
    if np.any(diff != 0.0):
        state.beta_t[lo:hi] = bnew
        state.rw -= qg @ diff
    return state


def _group_solve(state: GroupState, spec: PenaltySpec, target: np.ndarray,
                 gd: GroupDesign) -> None:
    """Cycle blockwise updates over the target groups until convergence."""
    glm = state.w is not None
    target = np.asarray(np.sort(target), dtype=np.intp)
    mult = gd.layout.multipliers
    wsum = float(state.w.sum()) if glm else 0.0
    for _ in range(state.max_iter):
        delta0 = 0.0
        if glm:
            d0 = float(state.w @ state.rw) / wsum
            if d0 != 0.0:
                state.intercept += d0
                state.rw -= d0
                delta0 = abs(d0)
        maxdiff = backends.group_cycle(
            gd.q, state.w, state.rw, state.beta_t, gd.t_starts, gd.t_ends,
            target, mult, state.v, state.lam, spec.gamma, spec.code,
        )
        state.n_iter += 1
        if max(maxdiff, delta0) < state.tol:
            return
    raise ConvergenceError(
        f"group coordinate descent did not converge at lambda={state.lam:.6g}",
        state=state,
    )


def group_objective(beta_t: np.ndarray, intercept: float, gd: GroupDesign,
                    spec: PenaltySpec, lam: float) -> float:
    """Penalized objective on the whitened scale (the fitted criterion)."""
    sd = gd.sd
    eta = intercept + gd.q @ beta_t
    if sd.family == "gaussian":
        r = sd.yc - eta
        loss = 0.5 * float(r @ r) / sd.n
    else:
        loss = float(np.mean(np.logaddexp(0.0, eta) - sd.y * eta))
    pen = 0.0
    mult = gd.layout.multipliers
    for g in range(gd.layout.n_groups):
        nb = float(np.linalg.norm(beta_t[gd.t_starts[g]:gd.t_ends[g]]))
        if nb > 0.0:
            pen += penalty_value(nb, lam * mult[g], spec)
    return loss + pen


def _group_glm_outer(state: GroupState, spec: PenaltySpec, target: np.ndarray,
                     gd: GroupDesign, max_outer: int) -> None:
    """Same objective-guarded majorization loop as the scalar GLM solver."""
    y = gd.sd.y
    q_old = group_objective(state.beta_t, state.intercept, gd, spec, state.lam)
    tol = state.tol
    d_eta = 1.0
    d_eta_prev = np.inf
    for _ in range(max_outer):
        beta_old = state.beta_t.copy()
        int_old = state.intercept
        eta_old = state.eta.copy()
        mu = mu_from_eta(state.eta, "binomial")
        state.w = glm_weights(mu, "binomial")
        state.v = float(np.max(state.w))
        state.rw = (y - mu) / state.w
        rw0 = state.rw.copy()
        state.tol = max(tol, 0.1 * d_eta)  # inexact early inner solves
        try:
            _group_solve(state, spec, target, gd)
        finally:
            state.tol = tol
        state.eta = eta_old + (rw0 - state.rw)
        q_new = group_objective(state.beta_t, state.intercept, gd, spec, state.lam)
        step = float(np.max(np.abs(state.eta - eta_old)))
        ratio = step / d_eta_prev
        if (q_new <= q_old and 0.2 < ratio < 0.995
                and np.array_equal(np.sign(state.beta_t), np.sign(beta_old))):
            # guarded geometric extrapolation, as in the scalar GLM loop
            f = min(ratio / (1.0 - ratio), 49.0)
            beta_x = state.beta_t + f * (state.beta_t - beta_old)
            int_x = state.intercept + f * (state.intercept - int_old)
            eta_x = state.eta + f * (state.eta - eta_old)
            if np.max(np.abs(eta_x)) <= ETA_LIMIT:
                q_x = group_objective(beta_x, int_x, gd, spec, state.lam)
                if q_x <= q_new:
                    state.beta_t, state.intercept, state.eta = beta_x, int_x, eta_x
                    q_new = q_x
        damped = False
        if not q_new <= q_old + 1e-12 * (1.0 + abs(q_old)):
            beta_in, int_in, eta_in = state.beta_t.copy(), state.intercept, state.eta.copy()
            t = 0.5
            while t > 1e-6:
                state.beta_t = beta_old + t * (beta_in - beta_old)
                state.intercept = int_old + t * (int_in - int_old)
                state.eta = eta_old + t * (eta_in - eta_old)
                q_new = group_objective(state.beta_t, state.intercept, gd, spec, state.lam)
                if q_new <= q_old:
                    break
                t *= 0.5
            else:
                state.beta_t, state.intercept, state.eta = beta_old, int_old, eta_old
                raise ConvergenceError(
                    f"no descending outer step at lambda={state.lam:.6g}",
                    state=state,
                )
            damped = True
        if np.max(np.abs(state.eta)) > ETA_LIMIT:
            raise ConvergenceError(
                f"saturated fit at lambda={state.lam:.6g}", state=state)
        d_eta = float(np.max(np.abs(state.eta - eta_old)))
        d_eta_prev = step if step > 0.0 else np.inf
        q_old = q_new
        if d_eta < tol and not damped:
            mu = mu_from_eta(state.eta, "binomial")
            state.rw = (y - mu) / state.w
            return
    raise ConvergenceError(
        f"GLM outer loop did not converge at lambda={state.lam:.6g}", state=state)


def _solve_groups(state: GroupState, spec: PenaltySpec, target: np.ndarray,
                  gd: GroupDesign, max_outer: int) -> None:
    if gd.sd.family == "gaussian":
        _group_solve(state, spec, target, gd)
    else:
        _group_glm_outer(state, spec, target, gd, max_outer)


def _group_kkt_check(state: GroupState, spec: PenaltySpec, check: np.ndarray,
                     gd: GroupDesign, kkt_tol: float) -> np.ndarray:
    check = np.asarray(check, dtype=np.intp)
    if check.size == 0:
        return check
    norms = group_norms(gd, state.residual)
    mult = gd.layout.multipliers
    return check[norms[check] >= mult[check] * state.lam - kkt_tol]


def group_kkt_residuals(gd: GroupDesign, beta_t: np.ndarray, r: np.ndarray,
                        lam: float, spec: PenaltySpec) -> tuple[float, float]:
    """Blockwise stationarity errors (active_err, inactive_excess)."""
    n = gd.sd.n
    mult = gd.layout.multipliers
    active_err = 0.0
    inactive_excess = -np.inf
    for g in range(gd.layout.n_groups):
        lo, hi = gd.t_starts[g], gd.t_ends[g]
        if hi == lo:
            continue
        cg = gd.q[:, lo:hi].T @ r / n
        bg = beta_t[lo:hi]
        nb = float(np.linalg.norm(bg))
        if nb > 0.0:
            grad = penalty_derivative(nb, lam * mult[g], spec) * bg / nb
            active_err = max(active_err, float(np.linalg.norm(cg - grad)))
        else:
            inactive_excess = max(
                inactive_excess, float(np.linalg.norm(cg)) - lam * mult[g])
    return active_err, inactive_excess


def fit_group_path(
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
    """Group-penalty analogue of fit_path; coefficients on the original scale."""
    sd = standardize(data)
    path = fit_group_path_standardized(
        sd, spec, lambdas, strategy,
        tol=tol, max_iter=max_iter, max_outer=max_outer, kkt_tol=kkt_tol,
    )
    return unstandardize(path, sd)


def fit_group_path_standardized(
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
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    if not spec.grouped:
        raise ValueError("fit_group_path requires a group penalty family")
    if sd.family == "poisson":
        raise ValueError("group penalties support gaussian and binomial only")
    if sd.group_index is None:
        raise ValueError("dataset has no group index")
    lams = _as_lambda_array(lambdas)
    layout = build_group_layout(sd.group_index)
    gd = group_orthonormalize(sd, layout)
    m, n, p = lams.size, sd.n, sd.p
    ngrp = layout.n_groups
    mult = layout.multipliers
    if kkt_tol is None:
        kkt_tol = default_kkt_tol(group_lambda_max(gd))
    glm = sd.family != "gaussian"
    allg = np.arange(ngrp, dtype=np.intp)

    beta = np.zeros((m, p))
    intercept = np.zeros(m)
    corr = np.zeros((m, p))
    gnorms = np.zeros((m, ngrp))
    strong_size = np.zeros(m, dtype=np.int64)
    active_size = np.zeros(m, dtype=np.int64)
    tau_min = np.full(m, np.nan)
    convex = np.empty(m, dtype=object)
    convex[:] = None
    n_cycles = np.zeros(m, dtype=np.int64)
    beta_t_path = np.zeros((m, gd.pt))
    log = ViolationLog()

    if glm:
        ybar = float(sd.y.mean())
        if ybar <= 0.0 or ybar >= 1.0:
            raise ValueError("binomial response is all one class")
        b0 = float(np.log(ybar / (1.0 - ybar)))
        eta = np.full(n, b0)
        mu = mu_from_eta(eta, "binomial")
        w = glm_weights(mu, "binomial")
        state = GroupState(
            beta_t=np.zeros(gd.pt), rw=(sd.y - mu) / w, intercept=b0,
            lam=float(lams[0]), tol=tol, max_iter=max_iter, w=w, eta=eta,
            v=float(np.max(w)),
        )
    else:
        state = GroupState(
            beta_t=np.zeros(gd.pt), rw=sd.yc.copy(), intercept=0.0,
            lam=float(lams[0]), tol=tol, max_iter=max_iter,
        )

    r0 = state.residual
    corr[0] = sd.xs.T @ r0 / n
    gnorms[0] = group_norms(gd, r0)
    intercept[0] = state.intercept
    strong_size[0] = int(np.sum(gnorms[0] >= mult * lams[0]))
    log.records.append(ViolationRecord(0, float(lams[0]), [], None))

    null_dev = None
    if glm:
        null_dev = float(np.sum(solver_deviance(sd.y, state.eta, "binomial")))
    m_eff = m
    stop_reason = None

    def active_groups() -> np.ndarray:
        return np.array(
            [g for g in range(ngrp)
             if np.any(state.beta_t[gd.t_starts[g]:gd.t_ends[g]] != 0.0)],
            dtype=np.intp,
        )

    for k in range(1, m):
        lam_k, lam_prev = float(lams[k]), float(lams[k - 1])
        state.lam = lam_k
        cycles_before = state.n_iter
        rule_keep = group_strong_set(gnorms[k - 1], lam_k, lam_prev, spec, mult)
        a_prev = active_groups()
        strong = np.union1d(rule_keep, a_prev).astype(np.intp)
        strong_size[k] = strong.size
        in_strong = np.zeros(ngrp, dtype=bool)
        in_strong[strong] = True
        violators: list[int] = []

        try:
            if strategy == "cyclic":
                _solve_groups(state, spec, allg, gd, max_outer)
            elif strategy == "strong":
                target = strong
                while True:
                    _solve_groups(state, spec, target, gd, max_outer)
                    check = np.setdiff1d(allg, target, assume_unique=True)
                    viol = _group_kkt_check(state, spec, check, gd, kkt_tol)
                    if viol.size == 0:
                        break
                    violators.extend(int(g) for g in viol)
                    target = np.union1d(target, viol).astype(np.intp)
            elif strategy == "active":
                target = a_prev
                while True:
                    _solve_groups(state, spec, target, gd, max_outer)
                    check = np.setdiff1d(allg, target, assume_unique=True)
                    viol = _group_kkt_check(state, spec, check, gd, kkt_tol)
                    if viol.size == 0:
                        break
                    violators.extend(int(g) for g in viol if not in_strong[g])
                    target = np.union1d(target, viol).astype(np.intp)
            else:  # hybrid
                target = a_prev
                while True:
                    _solve_groups(state, spec, target, gd, max_outer)
                    v1 = _group_kkt_check(
                        state, spec, np.setdiff1d(strong, target, assume_unique=True),
                        gd, kkt_tol)
                    if v1.size:
                        target = np.union1d(target, v1).astype(np.intp)
                        continue
                    rest = np.setdiff1d(allg, np.union1d(target, strong),
                                        assume_unique=True)
                    v2 = _group_kkt_check(state, spec, rest, gd, kkt_tol)
                    if v2.size:
                        violators.extend(int(g) for g in v2)
                        target = np.union1d(target, v2).astype(np.intp)
                        continue
                    break
        except ConvergenceError as exc:
            stop_reason = f"path truncated before lambda index {k}: {exc}"
            warnings.warn(stop_reason, stacklevel=2)
            m_eff = k
            break

        r = state.residual
        beta[k] = gd.back_transform(state.beta_t)
        beta_t_path[k] = state.beta_t
        intercept[k] = state.intercept
        corr[k] = sd.xs.T @ r / n
        gnorms[k] = group_norms(gd, r)
        act = active_groups()
        active_size[k] = act.size
        if strategy == "cyclic":
            violators = [int(g) for g in act if not in_strong[g]]
        n_cycles[k] = state.n_iter - cycles_before
        log.records.append(ViolationRecord(k, lam_k, sorted(set(violators)), None))
        if glm:
            dev = float(np.sum(solver_deviance(sd.y, state.eta, "binomial")))
            if dev < SATURATION_FRACTION * null_dev:
                stop_reason = (
                    f"saturated fit at lambda index {k} (deviance below "
                    f"{SATURATION_FRACTION:.0%} of null); remaining lambdas skipped"
                )
                warnings.warn(stop_reason, stacklevel=2)
                m_eff = k + 1
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
        lambda_star=None,
        family=sd.family,
        spec=spec,
        strategy=strategy,
        standardized=True,
        n_cycles=n_cycles[:m_eff],
        group_index=sd.group_index.copy(),
        group_norms=gnorms[:m_eff],
        beta_whitened=beta_t_path[:m_eff],
        stop_reason=stop_reason,
    )
