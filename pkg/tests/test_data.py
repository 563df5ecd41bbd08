import numpy as np
import pytest

from sparsecd import (
    Dataset,
    PenaltySpec,
    default_lambda_path,
    fit_path,
    fit_path_standardized,
    load_dataset,
    standardize,
    unstandardize,
)


def test_load_dataset_binomial(tmp_path):
    xf = tmp_path / "x.csv"
    yf = tmp_path / "y.csv"
    xf.write_text("1,2\n3,4\n5,6\n")
    yf.write_text("1\n0\n1\n")
    d = load_dataset(xf, yf, family="binomial")
    assert d.n == 3 and d.p == 2


def test_load_dataset_dimension_mismatch(tmp_path):
    xf = tmp_path / "x.csv"
    yf = tmp_path / "y.csv"
    xf.write_text("1,2\n3,4\n5,6\n")
    yf.write_text("1\n0\n1\n0\n")
    with pytest.raises(ValueError, match="rows"):
        load_dataset(xf, yf)


def test_load_dataset_groups(tmp_path):
    xf = tmp_path / "x.csv"
    yf = tmp_path / "y.csv"
    gf = tmp_path / "g.txt"
    xf.write_text("1,2,3,4\n5,6,7,8\n9,1,2,3\n")
    yf.write_text("1.5\n0.25\n-1\n")
    gf.write_text("1\n1\n2\n2\n")
    d = load_dataset(xf, yf, group_path=gf)
    assert len(np.unique(d.group_index)) == 2


def test_load_dataset_non_numeric(tmp_path):
    xf = tmp_path / "x.csv"
    yf = tmp_path / "y.csv"
    xf.write_text("1,oops\n3,4\n")
    yf.write_text("1\n0\n")
    with pytest.raises(ValueError, match="numeric"):
        load_dataset(xf, yf)


def test_load_dataset_header_flag(tmp_path):
    xf = tmp_path / "x.csv"
    yf = tmp_path / "y.csv"
    xf.write_text("a,b\n1,2\n3,4\n")
    yf.write_text("y\n1\n0\n")
    d = load_dataset(xf, yf, family="binomial", header=True)
    assert d.n == 2


def test_binomial_coding_enforced():
    with pytest.raises(ValueError, match="0/1"):
        Dataset(np.eye(3), np.array([0.0, 1.0, 2.0]), family="binomial")


def test_poisson_integer_enforced():
    with pytest.raises(ValueError):
        Dataset(np.eye(3), np.array([0.0, 1.5, 2.0]), family="poisson")
    with pytest.raises(ValueError):
        Dataset(np.eye(3), np.array([0.0, -1.0, 2.0]), family="poisson")


def test_non_contiguous_groups_rejected():
    with pytest.raises(ValueError, match="contiguous"):
        Dataset(np.random.default_rng(0).normal(size=(4, 3)),
                np.zeros(4), group_index=[1, 2, 1])


def test_standardize_simple_column():
    d = Dataset(np.array([[1.0], [2.0], [3.0]]), np.array([1.0, 2.0, 4.0]))
    sd = standardize(d)
    assert abs(sd.xs[:, 0].mean()) < 1e-12
    assert np.dot(sd.xs[:, 0], sd.xs[:, 0]) / 3 == pytest.approx(1.0, abs=1e-12)
    # yc centered
    assert abs(sd.yc.mean()) < 1e-12
    assert sd.y_center == pytest.approx(7.0 / 3.0)


def test_standardize_idempotent():
    rng = np.random.default_rng(3)
    d = Dataset(rng.normal(size=(40, 5)), rng.normal(size=40))
    sd1 = standardize(d)
    sd2 = standardize(Dataset(sd1.xs, sd1.yc))
    assert np.abs(sd2.xs - sd1.xs).max() < 1e-10
    assert np.abs(sd2.col_scale - 1.0).max() < 1e-10
    assert np.abs(sd2.col_center).max() < 1e-10


def test_constant_column_flagged_and_pinned():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(30, 4))
    x[:, 2] = 5.0
    beta = np.array([1.0, -1.0, 0.0, 0.5])
    y = x @ beta + 0.1 * rng.normal(size=30)
    with pytest.warns(UserWarning, match="constant"):
        d = Dataset(x, y)
        sd = standardize(d)
    assert sd.constant[2]
    spec = PenaltySpec("mcp", gamma=3.0)
    with pytest.warns(UserWarning, match="constant"):
        lams = default_lambda_path(d, spec, 0.05, 25)
        path = fit_path(d, spec, lams.values, "hybrid")
    assert np.all(path.beta[:, 2] == 0.0)


def test_standardization_invariants_random():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(50, 8)) * rng.uniform(0.5, 4.0, size=8) + rng.normal(size=8)
    d = Dataset(x, rng.normal(size=50))
    sd = standardize(d)
    norms = np.einsum("ij,ij->j", sd.xs, sd.xs) / 50
    assert np.abs(norms - 1.0).max() < 1e-10
    assert np.abs(sd.xs.mean(axis=0)).max() < 1e-10


class TestUnstandardize:
    def _fit(self, family="gaussian", seed=0):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(60, 10)) * rng.uniform(0.5, 3.0, size=10) + rng.normal(size=10)
        beta = np.zeros(10)
        beta[:3] = [1.0, -0.8, 0.6]
        eta = x @ beta
        if family == "gaussian":
            y = eta + rng.normal(size=60)
        else:
            y = rng.binomial(1, 1 / (1 + np.exp(-(eta - eta.mean())))).astype(float)
        d = Dataset(x, y, family=family)
        spec = PenaltySpec("mcp", gamma=3.0)
        lams = default_lambda_path(d, spec, 0.1, 20)
        sd = standardize(d)
        std_path = fit_path_standardized(sd, spec, lams.values, "hybrid")
        return d, sd, std_path

    def test_null_model_intercept(self):
        d, sd, std_path = self._fit()
        orig = unstandardize(std_path, sd)
        assert np.all(orig.beta[0] == 0.0)
        assert orig.intercept[0] == pytest.approx(d.y.mean())

    @pytest.mark.parametrize("family", ["gaussian", "binomial"])
    def test_prediction_invariance(self, family):
        d, sd, std_path = self._fit(family)
        orig = unstandardize(std_path, sd)
        for k in range(std_path.m):
            # the standardized gaussian model predicts the centered response
            eta_std = std_path.intercept[k] + sd.xs @ std_path.beta[k] + sd.y_center
            eta_orig = orig.intercept[k] + d.x @ orig.beta[k]
            assert np.abs(eta_std - eta_orig).max() < 1e-10

    def test_scale_division(self):
        d, sd, std_path = self._fit()
        orig = unstandardize(std_path, sd)
        assert np.allclose(orig.beta, std_path.beta / sd.col_scale, atol=1e-12)

    def test_idempotent(self):
        d, sd, std_path = self._fit()
        orig = unstandardize(std_path, sd)
        again = unstandardize(orig, sd)
        assert again is orig
