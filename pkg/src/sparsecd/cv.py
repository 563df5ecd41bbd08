"""Lambda-sequence construction and k-fold cross-validation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, standardize
from .groups import build_group_layout, fit_group_path, group_lambda_max, group_orthonormalize
from .path import fit_path
from .penalties import PenaltySpec
from .screening import lambda_max
from .solver import deviance


@dataclass
class LambdaPath:
    """Log-equispaced decreasing lambda sequence from lambda_max down."""

    values: np.ndarray
    min_ratio: float
    count: int


def lambda_sequence(lmax: float, min_ratio: float = 0.05, m: int = 100) -> LambdaPath:
    """Geometric sequence of m values from lmax to min_ratio * lmax."""
    if lmax <= 0.0:
        raise ValueError("lambda_max must be positive")
    if not 0.0 < min_ratio < 1.0:
        raise ValueError("min_ratio must lie in (0, 1)")
    if m < 2:
        raise ValueError("need at least 2 lambda values")
    values = np.geomspace(lmax, min_ratio * lmax, num=m)
    values[0] = lmax  # exact endpoints
    values[-1] = min_ratio * lmax
    return LambdaPath(values=values, min_ratio=min_ratio, count=m)


def default_lambda_path(data: Dataset, spec: PenaltySpec, min_ratio: float = 0.05,
                        m: int = 100) -> LambdaPath:
    """Lambda sequence anchored at the data's own lambda_max."""
    sd = standardize(data)
    if spec.grouped:
        if sd.group_index is None:
            raise ValueError("group penalties require a group index (--groups)")
        gd = group_orthonormalize(sd, build_group_layout(sd.group_index))
        lmax = group_lambda_max(gd)
    else:
        lmax = lambda_max(sd, spec)
    if m == 1:
        return LambdaPath(values=np.array([lmax]), min_ratio=1.0, count=1)
    return lambda_sequence(lmax, min_ratio, m)


@dataclass
class CVResult:
    """Per-lambda cross-validated deviance and the selected lambda."""

    lambdas: np.ndarray
    mean_deviance: np.ndarray
    se: np.ndarray
    n_nonzero: np.ndarray
    folds: np.ndarray
    lambda_min: float
    index_min: int
    lambda_1se: float


def make_folds(y: np.ndarray, family: str, k: int, seed: int) -> np.ndarray:
    """Deterministic fold labels, stratified by class for binomial data."""
    n = len(y)
    if k < 2 or k > n:
        raise ValueError("need 2 <= k <= n folds")
    rng = np.random.default_rng(seed)
    folds = np.empty(n, dtype=np.int64)
    if family == "binomial":
        for cls in (0.0, 1.0):
            idx = np.flatnonzero(y == cls)
            idx = rng.permutation(idx)
            folds[idx] = np.arange(len(idx)) % k
    else:
        perm = rng.permutation(n)
        folds[perm] = np.arange(n) % k
    return folds


def cross_validate(
    data: Dataset,
    spec: PenaltySpec,
    path: LambdaPath | None = None,
    strategy: str = "hybrid",
    k: int = 10,
    *,
    seed: int = 0,
    threads: int = 1,
    tol: float = 1e-7,
) -> CVResult:
    """k-fold cross-validation over a shared lambda sequence.

    The sequence is computed on the full data and reused in every fold so
    the deviance curves align.  Each fold is standardized and fitted on its
    own training rows; held-out deviance is evaluated on the original scale.
    Selection: plain minimum mean deviance (a one-standard-error lambda is
    also reported).
    """
    if path is None:
        path = default_lambda_path(data, spec)
    lams = path.values
    folds = make_folds(data.y, data.family, k, seed)
    if data.family == "binomial":
        for f in range(k):
            ytr = data.y[folds != f]
            if len(np.unique(ytr)) < 2:
                raise ValueError(
                    "a training fold lost one class even under stratification; "
                    "reduce k or rebalance the data"
                )

    fitter = fit_group_path if spec.grouped else fit_path

    def one_fold(f: int) -> np.ndarray:
        train = folds != f
        test = ~train
        dtr = Dataset(
            x=data.x[train], y=data.y[train], family=data.family,
            group_index=data.group_index,
        )
        fitted = fitter(dtr, spec, lams, strategy, tol=tol)
        eta = fitted.predict(data.x[test])
        dev = deviance(data.y[test][None, :], eta, data.family)
        return dev.mean(axis=1)

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as ex:
            fold_dev = list(ex.map(one_fold, range(k)))
    else:
        fold_dev = [one_fold(f) for f in range(k)]

    full = fitter(data, spec, lams, strategy, tol=tol)
    # fold (or full) fits may stop early on a saturated GLM; aggregate over
    # the lambda prefix every fit reached
    m_common = min(min(len(d) for d in fold_dev), full.m)
    lams = lams[:m_common]
    fold_dev = np.vstack([d[:m_common] for d in fold_dev])  # (k, m_common)

    mean_dev = fold_dev.mean(axis=0)
    se = fold_dev.std(axis=0, ddof=1) / np.sqrt(k)
    n_nonzero = (full.beta[:m_common] != 0.0).sum(axis=1)

    idx = int(np.argmin(mean_dev))
    cutoff = mean_dev[idx] + se[idx]
    idx_1se = 0
    for j in range(len(lams)):
        if mean_dev[j] <= cutoff:
            idx_1se = j
            break
    return CVResult(
        lambdas=lams,
        mean_deviance=mean_dev,
        se=se,
        n_nonzero=np.asarray(n_nonzero, dtype=np.int64),
        folds=folds,
        lambda_min=float(lams[idx]),
        index_min=idx,
        lambda_1se=float(lams[idx_1se]),
    )
