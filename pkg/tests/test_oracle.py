import numpy as np
import pytest

from sparsecd import Dataset, PenaltySpec, standardize
from sparsecd.oracle import (
    brute_force_small,
    finite_diff_check,
    grid_local_minima,
    grid_minimize_univariate,
    orthogonal_path_oracle,
    verify_orthonormal,
)

MCP = PenaltySpec("mcp", gamma=3.0)
SCAD = PenaltySpec("scad", gamma=4.0)
LASSO = PenaltySpec("lasso")


class TestOrthogonalOracle:
    def test_mcp_example(self):
        out = orthogonal_path_oracle(np.array([2.0]), np.array([1.0]), MCP)
        assert out[0, 0] == pytest.approx(1.5)

    def test_scad_example(self):
        out = orthogonal_path_oracle(np.array([2.0]), np.array([1.0]), SCAD)
        assert out[0, 0] == pytest.approx(1.0)

    def test_zero_lambda_returns_z(self):
        z = np.array([0.3, -1.7, 2.2])
        for spec in (MCP, SCAD, LASSO):
            out = orthogonal_path_oracle(z, np.array([0.0]), spec)
            assert np.allclose(out[0], z)

    def test_verify_orthonormal_rejects(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ValueError, match="orthonormal"):
            verify_orthonormal(rng.normal(size=(20, 5)))


class TestBruteForce:
    def _orthonormal_sd(self, n, z_vals, seed=0):
        from scipy.stats import ortho_group

        p = len(z_vals)
        q = ortho_group.rvs(n, random_state=seed)[:, :p]
        xs = np.sqrt(n) * q
        y = xs @ np.asarray(z_vals) / 1.0  # x_j'y/n = z_j
        from sparsecd.data import StandardizedDesign

        return StandardizedDesign(
            xs=np.asfortranarray(xs), col_center=np.zeros(p),
            col_scale=np.ones(p), constant=np.zeros(p, dtype=bool),
            yc=y, y_center=0.0, family="gaussian", y=y,
        )

    def test_p1_matches_orthogonal_oracle(self):
        sd = self._orthonormal_sd(20, [1.8])
        got = brute_force_small(sd, MCP, 0.9)
        want = orthogonal_path_oracle(np.array([1.8]), np.array([0.9]), MCP)[0, 0]
        assert got[0] == pytest.approx(want, abs=1e-4)

    def test_huge_lambda_gives_zero(self):
        sd = self._orthonormal_sd(20, [1.0, -0.5])
        got = brute_force_small(sd, MCP, 50.0)
        assert np.abs(got).max() < 1e-4

    def test_p_limit(self):
        rng = np.random.default_rng(1)
        sd = standardize(Dataset(rng.normal(size=(20, 4)), rng.normal(size=20)))
        with pytest.raises(ValueError):
            brute_force_small(sd, MCP, 0.5)

    def test_two_local_minima_landscape(self):
        # correlated p=2 MCP instance engineered for two minima
        rng = np.random.default_rng(3)
        n = 60
        u = rng.normal(size=n)
        e = rng.normal(size=n)
        x1 = u
        x2 = 0.95 * u + np.sqrt(1 - 0.95**2) * e
        x = np.c_[x1, x2]
        y = 1.2 * x1 + 0.1 * rng.normal(size=n)
        sd = standardize(Dataset(x, y))
        lam = 0.45
        minima = grid_local_minima(sd, MCP, lam, coarse=121)
        assert len(minima) >= 2
        # solver lands on one of the grid minima and certifies it
        from sparsecd.solver import initial_state, solve_fixed_lambda

        state = initial_state(sd, lam)
        state.target = np.arange(2)
        solve_fixed_lambda(state, MCP)
        dists = [np.abs(state.beta - m).max() for m in minima]
        assert min(dists) < 1e-3
        report = finite_diff_check(state.beta, 0.0, sd, MCP, lam)
        assert report.passed


class TestFiniteDiff:
    def test_zero_solution_at_lambda_max_passes(self):
        rng = np.random.default_rng(4)
        sd = standardize(Dataset(rng.normal(size=(40, 6)), rng.normal(size=40)))
        from sparsecd.screening import lambda_max

        lam = lambda_max(sd) * 1.0001
        report = finite_diff_check(np.zeros(6), 0.0, sd, MCP, lam)
        assert report.passed

    def test_perturbed_solution_fails_with_index(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=(50, 4))
        y = 2 * x[:, 0] + 0.1 * rng.normal(size=50)
        sd = standardize(Dataset(x, y))
        from sparsecd.solver import initial_state, solve_fixed_lambda

        state = initial_state(sd, 0.3)
        state.target = np.arange(4)
        solve_fixed_lambda(state, MCP)
        bad = state.beta.copy()
        j = int(np.flatnonzero(bad)[0])
        bad[j] += 0.01
        report = finite_diff_check(bad, 0.0, sd, MCP, 0.3)
        assert not report.passed
        assert j in report.failing


class TestGridUnivariate:
    def test_self_consistency_with_orthogonal_forms(self):
        rng = np.random.default_rng(6)
        for _ in range(50):
            z = float(rng.uniform(-3, 3))
            lam = float(rng.uniform(0.1, 1.5))
            for spec in (MCP, SCAD):
                grid = grid_minimize_univariate(z, lam, spec)
                closed = orthogonal_path_oracle(
                    np.array([z]), np.array([lam]), spec)[0, 0]
                assert abs(grid - closed) < 1e-4
