import numpy as np
import pytest

from sparsecd import Dataset, PenaltySpec, objective, standardize
from sparsecd.data import StandardizedDesign
from sparsecd.oracle import finite_diff_check
from sparsecd.solver import (
    ConvergenceError,
    cd_update,
    glm_outer,
    initial_state,
    solve_fixed_lambda,
)

MCP = PenaltySpec("mcp", gamma=3.0)
LASSO = PenaltySpec("lasso")


def orthonormal_sd(n, p, y, seed=0):
    """StandardizedDesign with X'X/n exactly I (bypasses centering)."""
    from scipy.stats import ortho_group

    q = ortho_group.rvs(n, random_state=seed)[:, :p]
    xs = np.asfortranarray(np.sqrt(n) * q)
    y = np.asarray(y, dtype=np.float64)
    return StandardizedDesign(
        xs=xs, col_center=np.zeros(p), col_scale=np.ones(p),
        constant=np.zeros(p, dtype=bool), yc=y - y.mean(),
        y_center=float(y.mean()), family="gaussian", y=y,
    )


def random_sd(n, p, seed=0, family="gaussian", beta=None, noise=1.0):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, p))
    if beta is None:
        beta = np.zeros(p)
    eta = x @ beta
    if family == "gaussian":
        y = eta + noise * rng.normal(size=n)
    elif family == "binomial":
        y = rng.binomial(1, 1 / (1 + np.exp(-eta))).astype(float)
    else:
        y = rng.poisson(np.exp(np.clip(eta, -30, 30))).astype(float)
    return standardize(Dataset(x, y, family=family))


class TestCdUpdate:
    def test_single_orthonormal_column_firm_threshold(self):
        n = 16
        rng = np.random.default_rng(2)
        u = rng.normal(size=n)
        u -= u.mean()
        u /= np.sqrt(u @ u / n)
        y = 2.0 * u  # x'y/n = 2
        sd = StandardizedDesign(
            xs=np.asfortranarray(u[:, None]), col_center=np.zeros(1),
            col_scale=np.ones(1), constant=np.zeros(1, dtype=bool),
            yc=y - y.mean(), y_center=float(y.mean()), family="gaussian", y=y,
        )
        state = initial_state(sd, 1.0)
        state.target = np.array([0])
        cd_update(0, state, MCP)
        # z = 2, lambda = 1, gamma = 3 -> firm threshold gives 1.5
        assert state.beta[0] == pytest.approx(1.5, abs=1e-10)
        # residual updated consistently
        assert np.abs(state.rw - (sd.yc - sd.xs[:, 0] * 1.5)).max() < 1e-10

    def test_subthreshold_is_fixed_point(self):
        sd = random_sd(30, 4, seed=5)
        state = initial_state(sd, lam=10.0)
        before = state.beta.copy()
        r_before = state.rw.copy()
        for j in range(4):
            cd_update(j, state, MCP)
        assert np.array_equal(state.beta, before)
        assert np.array_equal(state.rw, r_before)

    def test_lasso_soft_threshold_arithmetic(self):
        n = 16
        rng = np.random.default_rng(7)
        u = rng.normal(size=n)
        u -= u.mean()
        u /= np.sqrt(u @ u / n)
        y = 0.7 * u
        sd = StandardizedDesign(
            xs=np.asfortranarray(u[:, None]), col_center=np.zeros(1),
            col_scale=np.ones(1), constant=np.zeros(1, dtype=bool),
            yc=y - y.mean(), y_center=float(y.mean()), family="gaussian", y=y,
        )
        state = initial_state(sd, 0.5)
        cd_update(0, state, LASSO)
        assert state.beta[0] == pytest.approx(0.2, abs=1e-12)


class TestSolveFixedLambda:
    def test_empty_target_returns_unchanged(self):
        sd = random_sd(30, 5, seed=1)
        state = initial_state(sd, 0.5)
        state.target = np.array([], dtype=np.intp)
        before = state.beta.copy()
        out = solve_fixed_lambda(state, MCP)
        assert np.array_equal(out.beta, before)

    def test_orthonormal_converges_one_cycle_to_closed_form(self):
        rng = np.random.default_rng(3)
        n = p = 24
        y = rng.normal(size=n) * 2
        sd = orthonormal_sd(n, p, y, seed=3)
        z = sd.xs.T @ sd.yc / n
        state = initial_state(sd, 0.4)
        solve_fixed_lambda(state, MCP)
        from sparsecd.oracle import orthogonal_path_oracle

        want = orthogonal_path_oracle(z, [0.4], MCP)[0]
        assert np.abs(state.beta - want).max() < 1e-10

    def test_lambda_above_lambda_max_keeps_zero(self):
        sd = random_sd(40, 12, seed=4)
        from sparsecd.screening import lambda_max

        state = initial_state(sd, lambda_max(sd) * 1.01)
        solve_fixed_lambda(state, MCP)
        assert np.all(state.beta == 0.0)

    def test_max_iter_exceeded_raises_with_state(self):
        sd = random_sd(50, 30, seed=6, beta=np.ones(30) * 0.5)
        state = initial_state(sd, 0.01, max_iter=1)
        with pytest.raises(ConvergenceError) as ei:
            solve_fixed_lambda(state, MCP)
        assert ei.value.state is state


class TestGlmOuter:
    def test_null_model_binomial_intercept(self):
        sd = random_sd(60, 8, seed=8, family="binomial")
        state = initial_state(sd, 5.0)  # above lambda_max
        state.target = np.arange(8)
        glm_outer(state, MCP, sd)
        ybar = sd.y.mean()
        assert state.intercept == pytest.approx(np.log(ybar / (1 - ybar)), abs=1e-6)
        assert np.all(state.beta == 0.0)

    def test_poisson_single_predictor_matches_newton(self):
        # strong single predictor, small lambda, |beta| beyond gamma*lambda:
        # the penalized fit must match the unpenalized GLM on the support
        rng = np.random.default_rng(9)
        n = 300
        x = rng.normal(size=(n, 3))
        beta_true = np.array([0.6, 0.0, 0.0])
        y = rng.poisson(np.exp(0.3 + x @ beta_true)).astype(float)
        sd = standardize(Dataset(x, y, family="poisson"))
        lam = 0.15  # above the noise correlations, below the signal
        state = initial_state(sd, lam)
        state.target = np.arange(3)
        glm_outer(state, MCP, sd)
        assert list(np.flatnonzero(state.beta)) == [0]
        assert abs(state.beta[0]) > 3 * lam  # debiased regime

        # Newton solver for the 1-variable + intercept poisson likelihood
        b0, b1 = float(np.log(y.mean())), 0.0
        xj = sd.xs[:, 0]
        for _ in range(200):
            eta = b0 + b1 * xj
            mu = np.exp(eta)
            g = np.array([np.mean(mu - y), np.mean((mu - y) * xj)])
            h = np.array([[np.mean(mu), np.mean(mu * xj)],
                          [np.mean(mu * xj), np.mean(mu * xj * xj)]])
            step = np.linalg.solve(h, g)
            b0, b1 = b0 - step[0], b1 - step[1]
            if np.abs(step).max() < 1e-12:
                break
        assert state.beta[0] == pytest.approx(b1, abs=1e-4)
        assert state.intercept == pytest.approx(b0, abs=1e-4)


class TestObjective:
    def test_null_gaussian(self):
        sd = random_sd(25, 4, seed=10)
        q = objective(np.zeros(4), 0.0, sd, MCP, 1.0)
        assert q == pytest.approx(0.5 * sd.yc @ sd.yc / 25)

    def test_mcp_saturated_coordinate_contribution(self):
        sd = random_sd(25, 2, seed=11)
        lam, gamma = 0.3, 3.0
        b = np.array([gamma * lam + 1.0, 0.0])
        q0 = objective(np.zeros(2), 0.0, sd, MCP, lam)
        q1 = objective(b, 0.0, sd, MCP, lam)
        loss0 = 0.5 * sd.yc @ sd.yc / 25
        r = sd.yc - sd.xs @ b
        loss1 = 0.5 * r @ r / 25
        assert q1 - loss1 == pytest.approx(gamma * lam**2 / 2)
        assert q0 == pytest.approx(loss0)

    def test_mnet_alpha_one_equals_mcp(self):
        sd = random_sd(25, 3, seed=12)
        b = np.array([0.5, -0.2, 0.0])
        mnet1 = PenaltySpec("mnet", gamma=3.0, alpha=1.0)
        assert objective(b, 0.0, sd, mnet1, 0.7) == pytest.approx(
            objective(b, 0.0, sd, MCP, 0.7)
        )


class TestSolverInvariants:
    def test_residual_integrity_full_path(self):
        from sparsecd import default_lambda_path, fit_path_standardized

        rng = np.random.default_rng(13)
        x = rng.normal(size=(80, 60))
        beta = np.zeros(60)
        beta[:5] = [1, -1, 0.8, -0.6, 0.5]
        y = x @ beta + rng.normal(size=80)
        d = Dataset(x, y)
        sd = standardize(d)
        lams = default_lambda_path(d, MCP, 0.05, 50)
        path = fit_path_standardized(sd, MCP, lams.values, "hybrid")
        # recompute residual correlations from scratch at several lambdas
        for k in (10, 25, 49):
            r = sd.yc - sd.xs @ path.beta[k]
            c = sd.xs.T @ r / 80
            assert np.abs(c - path.corr[k]).max() < 1e-6

    def test_descent_across_cycles_convex_regime(self):
        sd = random_sd(60, 20, seed=14, beta=np.r_[np.ones(3), np.zeros(17)])
        lam = 0.2
        state = initial_state(sd, lam)
        state.target = np.arange(20)
        qs = [objective(state.beta, 0.0, sd, MCP, lam)]
        from sparsecd import backends

        for _ in range(30):
            backends.cd_cycle(
                sd.xs, None, state.rw, state.beta, state.v,
                np.arange(20, dtype=np.intp), lam, 0.0, 3.0, 1,
            )
            qs.append(objective(state.beta, 0.0, sd, MCP, lam))
        diffs = np.diff(qs)
        assert np.all(diffs <= 1e-12)

    def test_local_minimum_spot_check(self):
        sd = random_sd(60, 15, seed=15, beta=np.r_[np.ones(2), np.zeros(13)])
        lam = 0.15
        state = initial_state(sd, lam)
        state.target = np.arange(15)
        solve_fixed_lambda(state, MCP)
        q0 = objective(state.beta, 0.0, sd, MCP, lam)
        for j in np.flatnonzero(state.beta):
            for eps in (1e-3, -1e-3):
                b = state.beta.copy()
                b[j] += eps
                assert objective(b, 0.0, sd, MCP, lam) >= q0 - 1e-9

    def test_converged_solution_passes_finite_diff_oracle(self):
        sd = random_sd(50, 8, seed=16, beta=np.r_[np.ones(2), np.zeros(6)])
        lam = 0.2
        state = initial_state(sd, lam)
        state.target = np.arange(8)
        solve_fixed_lambda(state, MCP)
        report = finite_diff_check(state.beta, 0.0, sd, MCP, lam)
        assert report.passed, report.failing
