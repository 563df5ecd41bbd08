"""Synthetic data generators and the strong-rule violation experiment.

Covariates are equicorrelated (shared-factor construction) or block
correlated; responses follow the gaussian, binomial, or poisson model.  The
experiment runner fits paths over replicated datasets and summarizes
eliminated-variable counts and strong-rule violations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cv import default_lambda_path
from .data import Dataset
from .groups import fit_group_path
from .path import CoefPath, fit_path
from .penalties import PenaltySpec
from .solver import ETA_LIMIT


@dataclass(frozen=True)
class SimDesign:
    """One simulation scenario: data-generating process plus fit settings."""

    n: int = 200
    p: int = 2000
    family: str = "gaussian"
    correlation: str = "common"  # "common" | "block"
    rho: float = 0.0
    block_size: int | None = None
    n_signal: int = 20
    signal: float = 1.0
    coding: str = "alternating"  # "alternating" | "positive" | "group-alternating"
    snr: float | None = None  # gaussian only; None keeps unit noise variance
    penalty: str = "mcp"
    gamma: float = 3.0
    alpha: float = 1.0
    nlambda: int = 100
    min_ratio: float = 0.05
    seed: int = 0
    replicates: int = 20

    def spec(self) -> PenaltySpec:
        return PenaltySpec(self.penalty, gamma=self.gamma, alpha=self.alpha)

    def __post_init__(self):
        if not 0.0 <= self.rho < 1.0:
            raise ValueError("rho must lie in [0, 1)")
        if self.correlation == "block":
            if not self.block_size or self.p % self.block_size:
                raise ValueError("block_size must divide p")
        elif self.correlation != "common":
            raise ValueError(f"unknown correlation structure {self.correlation!r}")
        if self.n_signal > self.p:
            raise ValueError("support size cannot exceed p")


def true_beta(design: SimDesign) -> np.ndarray:
    """Signal vector: support on the first n_signal coordinates.

    "alternating" flips the sign every coordinate; "positive" keeps them
    all at +signal; "group-alternating" (block designs) flips the sign
    every block while all coordinates inside a block share it.
    """
    beta = np.zeros(design.p)
    s = design.n_signal
    if design.coding == "alternating":
        signs = np.where(np.arange(s) % 2 == 0, 1.0, -1.0)
    elif design.coding == "positive":
        signs = np.ones(s)
    elif design.coding == "group-alternating":
        size = design.block_size
        if not size or s % size:
            raise ValueError("group-alternating coding needs block_size dividing n_signal")
        signs = np.repeat(np.where(np.arange(s // size) % 2 == 0, 1.0, -1.0), size)
    else:
        raise ValueError(f"unknown signal coding {design.coding!r}")
    beta[:s] = design.signal * signs
    return beta


def _draw_response(x, beta, design, rng) -> np.ndarray:
    eta = x @ beta
    if design.family == "gaussian":
        sigma = 1.0
        if design.snr is not None:
            sigma = float(np.sqrt(eta @ eta / (design.n * design.snr)))
        return eta + sigma * rng.standard_normal(design.n)
    eta = np.clip(eta, -ETA_LIMIT, ETA_LIMIT)
    if design.family == "binomial":
        prob = 1.0 / (1.0 + np.exp(-eta))
        return rng.binomial(1, prob).astype(np.float64)
    if design.family == "poisson":
        return rng.poisson(np.exp(eta)).astype(np.float64)
    raise ValueError(f"unknown family {design.family!r}")


def gen_common_corr(design: SimDesign, rng=None) -> Dataset:
    """Equicorrelated standard-normal covariates.

    x_ij = sqrt(rho) u_i + sqrt(1-rho) e_ij, so columns are marginally
    standard normal with pairwise correlation rho.
    """
    if rng is None:
        rng = np.random.default_rng(design.seed)
    e = rng.standard_normal((design.n, design.p))
    if design.rho > 0.0:
        u = rng.standard_normal(design.n)
        x = np.sqrt(design.rho) * u[:, None] + np.sqrt(1.0 - design.rho) * e
    else:
        x = e
    y = _draw_response(x, true_beta(design), design, rng)
    return Dataset(x=x, y=y, family=design.family)


def gen_block_corr(design: SimDesign, rng=None) -> Dataset:
    """Block-correlated covariates: within-block correlation rho, blocks
    independent; the group index labels the blocks 1..G."""
    if design.correlation != "block":
        raise ValueError("design is not a block design")
    if rng is None:
        rng = np.random.default_rng(design.seed)
    size = design.block_size
    n_blocks = design.p // size
    e = rng.standard_normal((design.n, design.p))
    if design.rho > 0.0:
        u = rng.standard_normal((design.n, n_blocks))
        x = np.sqrt(design.rho) * np.repeat(u, size, axis=1) \
            + np.sqrt(1.0 - design.rho) * e
    else:
        x = e
    y = _draw_response(x, true_beta(design), design, rng)
    group_index = np.repeat(np.arange(1, n_blocks + 1), size)
    return Dataset(x=x, y=y, family=design.family, group_index=group_index)


def generate(design: SimDesign, rng=None) -> Dataset:
    if design.correlation == "block":
        return gen_block_corr(design, rng)
    return gen_common_corr(design, rng)


def path_metrics(path: CoefPath, n_units: int) -> dict:
    """Table-style summary of one fitted path.

    n_units is p for scalar penalties and the group count for grouped ones;
    the eliminated count averages n_units minus the kept-set size over the
    lambda grid.  Convex-region violations are the ones at lambdas above
    lambda_star (None when convexity is undefined, as for group penalties).
    """
    eliminated = float(np.mean(n_units - path.strong_size))
    k_star = path.first_nonconvex_index()
    if all(flag is None for flag in path.locally_convex):
        convex_viol = None
    else:
        limit = k_star if k_star is not None else path.m
        convex_viol = sum(
            1 for r in path.violations.records if r.count > 0 and r.lambda_index < limit
        )
    return {
        "eliminated": eliminated,
        "violated_lambdas": path.violations.n_violated_lambdas(),
        "violated_units": path.violations.n_violated_variables(),
        "violated_lambdas_convex": convex_viol,
    }


def run_replicate(design: SimDesign, rep: int, strategy: str = "strong") -> dict:
    """Generate and fit one replicate; returns its path metrics."""
    spec = design.spec()
    rng = np.random.default_rng([design.seed, rep])
    data = generate(design, rng)
    lams = default_lambda_path(data, spec, design.min_ratio, design.nlambda)
    if spec.grouped:
        path = fit_group_path(data, spec, lams.values, strategy)
        n_units = len(np.unique(data.group_index))
    else:
        path = fit_path(data, spec, lams.values, strategy)
        n_units = design.p
    row = path_metrics(path, n_units)
    row["replicate"] = rep
    return row


def violation_experiment(
    design: SimDesign,
    strategy: str = "strong",
    threads: int = 1,
) -> tuple[dict, list[dict]]:
    """Replicate the violation study for one scenario.

    Returns (summary, per_replicate).  Replicate r draws from the derived
    seed (design.seed, r), so identical designs give identical results and
    replicates are independent streams.
    """
    reps = range(design.replicates)
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as ex:
            rows = list(ex.map(lambda r: run_replicate(design, r, strategy), reps))
    else:
        rows = [run_replicate(design, r, strategy) for r in reps]

    def avg(key):
        vals = [r[key] for r in rows]
        if any(v is None for v in vals):
            return None
        return float(np.mean(vals))

    summary = {
        "family": design.family,
        "penalty": design.penalty,
        "rho": design.rho,
        "replicates": design.replicates,
        "unit": "groups" if design.spec().grouped else "variables",
        "avg_eliminated": avg("eliminated"),
        "avg_violated_lambdas": avg("violated_lambdas"),
        "avg_violated_units": avg("violated_units"),
        "avg_violated_lambdas_convex": avg("violated_lambdas_convex"),
    }
    return summary, rows
