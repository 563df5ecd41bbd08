"""Dataset ingestion, column standardization, and back-transformation of
fitted coefficients to the original scale."""

from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass

import numpy as np

RESPONSE_FAMILIES = ("gaussian", "binomial", "poisson")

# population scaling: each non-constant column ends with ||x_j||^2 / n = 1
STANDARDIZE_TOL = 1e-10


@dataclass
class Dataset:
    """Raw regression data: n x p covariates, length-n response.

    For binomial the response must be coded 0/1; for poisson it must hold
    nonnegative integers.  group_index, when present, assigns each column to
    a contiguous, non-overlapping group.
    """

    x: np.ndarray
    y: np.ndarray
    family: str = "gaussian"
    group_index: np.ndarray | None = None

    def __post_init__(self):
        self.x = np.ascontiguousarray(np.asarray(self.x, dtype=np.float64))
        self.y = np.asarray(self.y, dtype=np.float64).reshape(-1)
        if self.x.ndim != 2:
            raise ValueError("x must be a 2-d matrix")
        n, p = self.x.shape
        if n < 2 or p < 1:
            raise ValueError(f"need n >= 2 and p >= 1, got n={n}, p={p}")
        if self.y.shape[0] != n:
            raise ValueError(f"y has {self.y.shape[0]} rows but x has {n}")
        if not np.all(np.isfinite(self.x)) or not np.all(np.isfinite(self.y)):
            raise ValueError("x and y must be finite with no missing values")
        if self.family not in RESPONSE_FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.family == "binomial" and not np.all(np.isin(self.y, (0.0, 1.0))):
            raise ValueError("binomial response must be coded 0/1")
        if self.family == "poisson":
            if np.any(self.y < 0) or np.any(self.y != np.floor(self.y)):
                raise ValueError("poisson response must be nonnegative integers")
        if self.group_index is not None:
            gi = np.asarray(self.group_index).reshape(-1)
            if gi.shape[0] != p:
                raise ValueError(f"group index has {gi.shape[0]} entries for p={p}")
            _validate_groups(gi)
            self.group_index = gi.astype(np.int64)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]


def _validate_groups(gi: np.ndarray) -> None:
    """Group labels must form contiguous, non-overlapping runs."""
    if not np.all(gi == np.floor(gi)):
        raise ValueError("group identifiers must be integers")
    change = np.flatnonzero(np.diff(gi) != 0)
    run_labels = gi[np.concatenate(([0], change + 1))]
    if len(np.unique(run_labels)) != len(run_labels):
        raise ValueError("group identifiers must be contiguous (each group one run)")


@dataclass
class StandardizedDesign:
    """Column-standardized design plus the affine back-transform.

    Every non-constant column of xs has mean 0 and ||xs_j||^2 / n = 1.
    Constant columns are flagged (mask ``constant``), zeroed out, and carry
    coefficient 0 on every path.  For gaussian data the response is centered
    so the standardized-scale intercept is 0; GLMs keep the raw response and
    fit the intercept explicitly.  Immutable after construction and safe to
    share across concurrent readers.
    """

    xs: np.ndarray
    col_center: np.ndarray
    col_scale: np.ndarray
    constant: np.ndarray
    yc: np.ndarray
    y_center: float
    family: str
    y: np.ndarray
    group_index: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.xs.shape[0]

    @property
    def p(self) -> int:
        return self.xs.shape[1]


def standardize(d: Dataset) -> StandardizedDesign:
    """Center and scale columns to ||x_j||^2 / n = 1; center gaussian y."""
    n = d.n
    center = d.x.mean(axis=0)
    xc = d.x - center
    scale = np.sqrt(np.einsum("ij,ij->j", xc, xc) / n)
    const = scale <= STANDARDIZE_TOL * np.maximum(1.0, np.abs(center))
    if np.any(const):
        warnings.warn(
            f"{int(const.sum())} constant column(s) detected; their coefficients "
            "are pinned to zero",
            stacklevel=2,
        )
    safe_scale = np.where(const, 1.0, scale)
    xs = xc / safe_scale
    xs[:, const] = 0.0
    if d.family == "gaussian":
        y_center = float(d.y.mean())
        yc = d.y - y_center
    else:
        y_center = 0.0
        yc = d.y.copy()
    return StandardizedDesign(
        xs=np.asfortranarray(xs),
        col_center=center,
        col_scale=safe_scale,
        constant=const,
        yc=yc,
        y_center=y_center,
        family=d.family,
        y=d.y.copy(),
        group_index=None if d.group_index is None else d.group_index.copy(),
    )


def unstandardize(path, sd: StandardizedDesign):
    """Map a coefficient path fitted on ``sd`` back to the original scale.

    Fitted values are invariant: x @ beta_orig + intercept_orig equals
    xs @ beta_std + intercept_std at every lambda.
    """
    if path.beta.shape[1] != sd.p:
        raise ValueError("path and design dimensions disagree")
    if not path.standardized:
        return path
    beta = path.beta / sd.col_scale[None, :]
    intercept = path.intercept + sd.y_center - beta @ sd.col_center
    return dataclasses.replace(path, beta=beta, intercept=intercept, standardized=False)


def load_dataset(
    x_path,
    y_path,
    family: str = "gaussian",
    group_path=None,
    header: bool = False,
) -> Dataset:
    """Load a Dataset from headerless CSV files (``header=True`` skips row 1).

    x: numeric CSV with n rows and p columns; y: n rows, one column; the
    optional group file holds one integer per line, p lines.
    """
    skip = 1 if header else 0
    try:
        x = np.loadtxt(x_path, delimiter=",", skiprows=skip, dtype=np.float64, ndmin=2)
    except ValueError as exc:
        raise ValueError(f"could not parse {x_path} as numeric CSV: {exc}") from exc
    try:
        y = np.loadtxt(y_path, delimiter=",", skiprows=skip, dtype=np.float64, ndmin=1)
    except ValueError as exc:
        raise ValueError(f"could not parse {y_path} as numeric CSV: {exc}") from exc
    if y.ndim != 1:
        y = y.reshape(-1)
    group_index = None
    if group_path is not None:
        group_index = np.loadtxt(group_path, dtype=np.int64, ndmin=1)
    return Dataset(x=x, y=y, family=family, group_index=group_index)
