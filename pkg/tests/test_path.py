import numpy as np
import pytest

from sparsecd import (
    Dataset,
    PenaltySpec,
    default_lambda_path,
    fit_path,
    fit_path_standardized,
    standardize,
)
from sparsecd.screening import kkt_residuals, lambda_max

MCP = PenaltySpec("mcp", gamma=3.0)
SCAD = PenaltySpec("scad", gamma=4.0)
LASSO = PenaltySpec("lasso")


def sim_data(n=100, p=200, rho=0.0, family="gaussian", seed=0, signal=1.0, k=10):
    rng = np.random.default_rng(seed)
    e = rng.normal(size=(n, p))
    if rho > 0:
        u = rng.normal(size=n)
        x = np.sqrt(rho) * u[:, None] + np.sqrt(1 - rho) * e
    else:
        x = e
    beta = np.zeros(p)
    beta[:k] = signal * np.where(np.arange(k) % 2 == 0, 1.0, -1.0)
    eta = x @ beta
    if family == "gaussian":
        y = eta + rng.normal(size=n)
    elif family == "binomial":
        y = rng.binomial(1, 1 / (1 + np.exp(-eta))).astype(float)
    else:
        y = rng.poisson(np.exp(np.clip(eta, -10, 10))).astype(float)
    return Dataset(x, y, family=family)


def full_kkt_sweep(path, sd, spec, kkt_tol):
    """Certificate: every stored solution satisfies the KKT conditions."""
    for k in range(path.m):
        active_err, inactive_excess = kkt_residuals(
            path.beta[k], path.corr[k], float(path.lambdas[k]), spec
        )
        assert active_err <= kkt_tol, (k, active_err)
        assert inactive_excess <= kkt_tol, (k, inactive_excess)


class TestPathBasics:
    def test_single_lambda_all_zero(self):
        d = sim_data(seed=1)
        sd = standardize(d)
        lm = lambda_max(sd)
        path = fit_path_standardized(sd, MCP, [lm], "hybrid")
        assert path.m == 1
        assert np.all(path.beta == 0.0)
        assert path.violations.n_violated_lambdas() == 0

    def test_lambdas_must_decrease(self):
        d = sim_data(seed=1)
        with pytest.raises(ValueError, match="decreasing"):
            fit_path(d, MCP, [0.5, 0.5], "hybrid")
        with pytest.raises(ValueError, match="positive"):
            fit_path(d, MCP, [0.5, -0.1], "hybrid")

    def test_group_spec_rejected(self):
        d = sim_data(seed=1)
        with pytest.raises(ValueError, match="group"):
            fit_path(d, PenaltySpec("group-mcp", gamma=3.0), [0.5], "hybrid")

    def test_unknown_strategy(self):
        d = sim_data(seed=1)
        with pytest.raises(ValueError, match="strategy"):
            fit_path(d, MCP, [0.5], "turbo")

    def test_target_monotone_growth_implicit(self):
        # absorbed violators never leave: active sets can only certify
        d = sim_data(seed=2, rho=0.5)
        lams = default_lambda_path(d, MCP, 0.05, 40)
        path = fit_path(d, MCP, lams.values, "strong")
        assert path.m == 40


class TestCertificates:
    @pytest.mark.parametrize("strategy", ["cyclic", "strong", "active", "hybrid"])
    @pytest.mark.parametrize("spec", [MCP, SCAD, LASSO], ids=["mcp", "scad", "lasso"])
    def test_gaussian_full_kkt(self, strategy, spec):
        d = sim_data(n=80, p=120, rho=0.3, seed=3)
        sd = standardize(d)
        lams = default_lambda_path(d, spec, 0.05, 30)
        path = fit_path_standardized(sd, spec, lams.values, strategy)
        kkt_tol = 1e-6 * max(1.0, lambda_max(sd, spec))
        full_kkt_sweep(path, sd, spec, kkt_tol)

    @pytest.mark.parametrize("family", ["binomial", "poisson"])
    def test_glm_full_kkt(self, family):
        signal = 0.5 if family == "binomial" else 0.3
        d = sim_data(n=100, p=60, family=family, seed=4, signal=signal, k=4)
        sd = standardize(d)
        lams = default_lambda_path(d, MCP, 0.1, 25)
        path = fit_path_standardized(sd, MCP, lams.values, "hybrid")
        kkt_tol = 1e-6 * max(1.0, lambda_max(sd))
        full_kkt_sweep(path, sd, MCP, kkt_tol)

    def test_mnet_full_kkt(self):
        d = sim_data(n=80, p=100, rho=0.5, seed=5)
        sd = standardize(d)
        spec = PenaltySpec("mnet", gamma=3.0, alpha=0.5)
        lams = default_lambda_path(d, spec, 0.05, 30)
        path = fit_path_standardized(sd, spec, lams.values, "strong")
        kkt_tol = 1e-6 * max(1.0, lambda_max(sd, spec))
        full_kkt_sweep(path, sd, spec, kkt_tol)


class TestStrategyEquivalence:
    def test_gaussian_uncorrelated(self):
        d = sim_data(n=100, p=300, rho=0.0, seed=6)
        lams = default_lambda_path(d, MCP, 0.05, 40)
        paths = {
            s: fit_path(d, MCP, lams.values, s, tol=1e-9)
            for s in ("cyclic", "strong", "active", "hybrid")
        }
        ref = paths["cyclic"].beta
        for s, p_ in paths.items():
            assert np.abs(p_.beta - ref).max() < 1e-6, s

    def test_lasso_correlated(self):
        d = sim_data(n=100, p=300, rho=0.5, seed=7)
        lams = default_lambda_path(d, LASSO, 0.05, 40)
        paths = {
            s: fit_path(d, LASSO, lams.values, s, tol=1e-9)
            for s in ("cyclic", "strong", "active", "hybrid")
        }
        ref = paths["cyclic"].beta
        for s, p_ in paths.items():
            assert np.abs(p_.beta - ref).max() < 1e-6, s


class TestViolationLog:
    def test_records_cover_every_lambda(self):
        d = sim_data(n=100, p=200, rho=0.5, seed=8)
        lams = default_lambda_path(d, MCP, 0.05, 30)
        path = fit_path(d, MCP, lams.values, "strong")
        assert len(path.violations.records) == path.m
        for rec in path.violations.records:
            assert rec.count == len(rec.indices)

    def test_counts_consistent(self):
        d = sim_data(n=100, p=200, rho=0.5, seed=9)
        lams = default_lambda_path(d, MCP, 0.05, 30)
        path = fit_path(d, MCP, lams.values, "strong")
        log = path.violations
        assert log.n_violated_variables() >= log.n_violated_lambdas()

    def test_cyclic_logs_rule_misses_posthoc(self):
        d = sim_data(n=100, p=200, rho=0.5, seed=10)
        lams = default_lambda_path(d, MCP, 0.05, 30)
        path = fit_path(d, MCP, lams.values, "cyclic")
        # every logged violator is active at that lambda
        for rec in path.violations.records:
            for j in rec.indices:
                assert path.beta[rec.lambda_index, j] != 0.0


class TestConvexityTracking:
    def test_lambda_star_consistency(self):
        d = sim_data(n=60, p=150, rho=0.5, seed=11)
        lams = default_lambda_path(d, MCP, 0.05, 40)
        path = fit_path(d, MCP, lams.values, "hybrid")
        k_star = path.first_nonconvex_index()
        if k_star is None:
            assert path.lambda_star is None
        else:
            assert path.lambda_star == pytest.approx(float(path.lambdas[k_star]))
            assert all(flag is True for flag in path.locally_convex[:k_star])

    def test_lasso_path_always_convex(self):
        d = sim_data(n=60, p=150, rho=0.5, seed=12)
        lams = default_lambda_path(d, LASSO, 0.05, 20)
        path = fit_path(d, LASSO, lams.values, "hybrid")
        assert all(flag is True for flag in path.locally_convex)
        assert path.lambda_star is None

    def test_overparameterized_active_set_flags_nonconvex(self):
        # tiny n: the active set outgrows the sample size at small lambda
        d = sim_data(n=20, p=100, rho=0.0, seed=13, k=5)
        lams = default_lambda_path(d, MCP, 0.01, 40)
        path = fit_path(d, MCP, lams.values, "hybrid")
        assert path.lambda_star is not None


class TestGlmTruncation:
    def test_saturated_logistic_truncates_with_reason(self):
        # p >> n with strong separation pressure at tiny lambda
        d = sim_data(n=40, p=120, family="binomial", seed=14, signal=2.0, k=6)
        lams = default_lambda_path(d, MCP, 0.01, 60)
        with pytest.warns(UserWarning):
            path = fit_path(d, MCP, lams.values, "hybrid")
        assert path.m < 60
        assert path.stop_reason is not None
        assert len(path.violations.records) == path.m
