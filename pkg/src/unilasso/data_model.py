"""Core data containers, validation and standardization.

All containers are frozen dataclasses holding numpy arrays; nothing here
mutates its input, so instances can be shared freely across workers.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

__all__ = [
    "Family",
    "Dataset",
    "StandardizationStats",
    "FitConfig",
    "ValidationReport",
    "ValidationError",
    "validate",
    "standardize",
    "load_csv",
]


class Family(str, Enum):
    GAUSSIAN = "gaussian"
    BINOMIAL = "binomial"


class ValidationError(ValueError):
    """Raised when a dataset violates a structural invariant."""


@dataclass(frozen=True)
class Dataset:
    """Feature matrix plus response.

    features is n x p, stored Fortran-ordered since both stages scan columns.
    """

    features: np.ndarray
    response: np.ndarray
    family: Family = Family.GAUSSIAN
    feature_names: tuple[str, ...] | None = None

    def __post_init__(self):
        X = np.asfortranarray(np.asarray(self.features, dtype=np.float64))
        y = np.ascontiguousarray(np.asarray(self.response, dtype=np.float64))
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "response", y)
        object.__setattr__(self, "family", Family(self.family))
        if self.feature_names is not None:
            object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class StandardizationStats:
    """Per-column means and population SDs (divisor n).

    constant_mask flags zero-variance columns; their sd entry is set to 1 so
    downstream code can divide blindly, but they must be excluded from fits.
    """

    means: np.ndarray
    sds: np.ndarray
    constant_mask: np.ndarray


@dataclass(frozen=True)
class FitConfig:
    """Knobs shared by the solver, CV and the pipeline."""

    n_lambda: int = 100
    lambda_min_ratio: float | None = None  # auto: 1e-3 if p >= n else 1e-4
    n_folds: int = 10
    tol: float = 1e-9
    max_iter: int = 100_000
    seed: int = 0
    loo: bool = True
    sign_constraint: bool = True
    use_magnitude: bool = True

    def __post_init__(self):
        if self.n_lambda < 2:
            raise ValueError("n_lambda must be >= 2")
        if self.lambda_min_ratio is not None and not 0 < self.lambda_min_ratio < 1:
            raise ValueError("lambda_min_ratio must be in (0, 1)")
        if self.n_folds < 2:
            raise ValueError("n_folds must be >= 2")
        if self.tol <= 0:
            raise ValueError("tol must be positive")

    def min_ratio(self, n: int, p: int) -> float:
        if self.lambda_min_ratio is not None:
            return self.lambda_min_ratio
        return 1e-3 if p >= n else 1e-4

    def with_(self, **kwargs) -> "FitConfig":
        return replace(self, **kwargs)


@dataclass(frozen=True)
class ValidationReport:
    n: int
    p: int
    family: Family
    constant_columns: tuple[int, ...] = field(default_factory=tuple)


def validate(dataset: Dataset) -> ValidationReport:
    """Check structural invariants; raise ValidationError on violation."""
    X, y = dataset.features, dataset.response
    if X.ndim != 2:
        raise ValidationError("features must be a 2-d matrix")
    n, p = X.shape
    if y.shape != (n,):
        raise ValidationError(f"response length {y.shape} does not match n={n}")
    if n < 3:
        raise ValidationError("need at least 3 observations (LOO requires n-1 >= 2)")
    if not np.all(np.isfinite(X)):
        bad = np.argwhere(~np.isfinite(X))[0]
        raise ValidationError(f"non-finite feature entry at row {bad[0]}, column {bad[1]}")
    if not np.all(np.isfinite(y)):
        bad = int(np.argwhere(~np.isfinite(y))[0][0])
        raise ValidationError(f"non-finite response entry at row {bad}")
    if dataset.family == Family.BINOMIAL:
        if not np.all(np.isin(y, (0.0, 1.0))):
            raise ValidationError("non-binary response for binomial family")
    if dataset.feature_names is not None and len(dataset.feature_names) != p:
        raise ValidationError("feature_names length does not match p")
    const = tuple(int(j) for j in np.flatnonzero(X.std(axis=0) == 0.0))
    return ValidationReport(n=n, p=p, family=dataset.family, constant_columns=const)


def standardize(dataset: Dataset) -> tuple[np.ndarray, StandardizationStats]:
    """Center and scale columns to mean 0, population variance 1.

    Constant columns come out as all-zero and are flagged in constant_mask.
    """
    X = dataset.features
    means = X.mean(axis=0)
    sds = X.std(axis=0)  # population form, divisor n
    mask = sds == 0.0
    safe = np.where(mask, 1.0, sds)
    Z = np.asfortranarray((X - means) / safe)
    Z[:, mask] = 0.0
    return Z, StandardizationStats(means=means, sds=safe, constant_mask=mask)


def load_csv(
    path,
    response: str | None = None,
    response_index: int | None = None,
    family: Family = Family.GAUSSIAN,
) -> Dataset:
    """Read a headed CSV into a Dataset.

    The response column is chosen by name or zero-based index; every other
    column becomes a feature in file order.  Parsing uses the dot decimal
    separator regardless of locale.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        rows = list(reader)
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    if response is not None:
        if response not in header:
            raise ValidationError(f"{path}: response column {response!r} not found")
        ridx = header.index(response)
    elif response_index is not None:
        if not 0 <= response_index < len(header):
            raise ValidationError(f"{path}: response index {response_index} out of range")
        ridx = response_index
    else:
        raise ValidationError("a response column must be selected")
    try:
        data = np.array([[float(v) for v in row] for row in rows], dtype=np.float64)
    except ValueError as exc:
        raise ValidationError(f"{path}: non-numeric cell ({exc})") from None
    if data.shape[1] != len(header):
        raise ValidationError(f"{path}: ragged rows")
    feat_cols = [j for j in range(len(header)) if j != ridx]
    names = tuple(header[j] for j in feat_cols)
    return Dataset(
        features=data[:, feat_cols],
        response=data[:, ridx],
        family=family,
        feature_names=names,
    )
