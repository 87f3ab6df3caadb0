"""Shared types and numerical helpers for the panel estimators."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import linalg, stats

from ..exceptions import EstimationError, SingularMatrixWarning, ValidationError

CONST = "const"
YEAR_PREFIX = "year_"
COV_TYPES = ("unadjusted", "robust", "clustered")


@dataclass(frozen=True)
class GMMOptions:
    """Instrument and weighting options for system GMM.

    ``lag_min``/``lag_max`` bound the lags of GMM-style instruments for the
    differenced equation. With ``level_instruments=False`` the levels
    equation keeps only IV-style instruments.
    """

    lag_min: int = 2
    lag_max: int = 4
    collapse: bool = True
    steps: str = "two"
    windmeijer: bool = True
    level_instruments: bool = True

    def __post_init__(self):
        if self.lag_min < 2:
            raise ValidationError("lag_min must be at least 2 for endogenous instruments")
        if self.lag_max < self.lag_min:
            raise ValidationError("lag_max must be >= lag_min")
        if self.steps not in ("one", "two"):
            raise ValidationError(f"steps must be 'one' or 'two', got {self.steps!r}")


@dataclass(frozen=True)
class RegressionSpec:
    """Declarative description of one panel regression."""

    dependent: str
    regressors: tuple
    include_lagged_dependent: bool = False
    endogenous: tuple = ()
    predetermined: tuple = ()
    instruments: tuple = ()
    year_dummies: bool = False
    gmm_options: GMMOptions = field(default_factory=GMMOptions)
    cov_type: str = "clustered"

    def __post_init__(self):
        object.__setattr__(self, "regressors", tuple(self.regressors))
        object.__setattr__(self, "endogenous", tuple(self.endogenous))
        object.__setattr__(self, "predetermined", tuple(self.predetermined))
        object.__setattr__(self, "instruments", tuple(self.instruments))
        extra = (set(self.endogenous) | set(self.predetermined)) - set(self.regressors)
        if extra:
            raise ValidationError(f"endogenous/predetermined not among regressors: {sorted(extra)}")
        if set(self.endogenous) & set(self.predetermined):
            raise ValidationError("a regressor cannot be both endogenous and predetermined")
        if self.dependent in self.regressors:
            raise ValidationError("dependent variable listed as a regressor")
        if self.cov_type not in COV_TYPES:
            raise ValidationError(f"cov_type must be one of {COV_TYPES}")


@dataclass
class RegressionResult:
    """Estimates, covariance and diagnostics of a fitted model.

    ``df_resid`` is ``None`` for estimators with asymptotic normal inference.
    """

    estimator: str
    dependent: str
    params: pd.Series
    cov: pd.DataFrame
    n_obs: int
    n_entities: int
    df_resid: int | None = None
    r2: float = np.nan
    r2_adjusted: float = np.nan
    resid: pd.Series | None = None
    fitted: pd.Series | None = None
    design: pd.DataFrame | None = None
    cov_type: str = "clustered"
    diagnostics: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    @property
    def std_errors(self):
        return pd.Series(np.sqrt(np.clip(np.diag(self.cov.to_numpy()), 0, None)), index=self.params.index)

    @property
    def tstats(self):
        return self.params / self.std_errors

    @property
    def pvalues(self):
        t = np.abs(self.tstats.to_numpy())
        if self.df_resid is None:
            p = 2 * stats.norm.sf(t)
        else:
            p = 2 * stats.t.sf(t, self.df_resid)
        return pd.Series(p, index=self.params.index)

    def summary_frame(self):
        return pd.DataFrame(
            {
                "coef": self.params,
                "std_err": self.std_errors,
                "stat": self.tstats,
                "pvalue": self.pvalues,
            }
        )


def check_panel_xy(X, y=None, missing="drop"):
    """Validate and align a panel design and response.

    ``X`` must be a DataFrame with a two-level ``(entity, time)`` index.
    Rows with missing values in ``X`` or ``y`` are dropped (or rejected when
    ``missing="raise"``). The result is sorted by entity then time.
    """
    if not isinstance(X, pd.DataFrame):
        raise ValidationError("X must be a DataFrame indexed by (entity, time)")
    if not isinstance(X.index, pd.MultiIndex) or X.index.nlevels != 2:
        raise ValidationError("X must have a two-level (entity, time) MultiIndex")
    if X.index.duplicated().any():
        raise ValidationError("duplicate (entity, time) index entries")
    X = X.astype(float)
    if y is not None:
        if isinstance(y, pd.Series):
            if not y.index.equals(X.index):
                y = y.reindex(X.index)
        else:
            arr = np.asarray(y, dtype=float).ravel()
            if arr.size != len(X):
                raise ValidationError("X and y have different lengths")
            y = pd.Series(arr, index=X.index)
        y = y.astype(float)
    mask = np.isfinite(X.to_numpy()).all(axis=1)
    if y is not None:
        mask &= np.isfinite(y.to_numpy())
    if not mask.all() and missing != "keep":
        if missing == "raise":
            raise ValidationError("missing values in estimation data")
        X = X[mask]
        y = y[mask] if y is not None else None
    order = np.lexsort((X.index.get_level_values(1), X.index.get_level_values(0)))
    X = X.iloc[order]
    if y is not None:
        y = y.iloc[order]
    if len(X) == 0:
        raise ValidationError("no complete observations")
    return X, y


def year_dummy_frame(index, base=None):
    """Time dummies for every period except the first (or ``base``)."""
    times = index.get_level_values(1)
    periods = sorted(pd.unique(times))
    base = periods[0] if base is None else base
    cols = {}
    for t in periods:
        if t == base:
            continue
        cols[f"{YEAR_PREFIX}{t}"] = (times == t).astype(float)
    return pd.DataFrame(cols, index=index)


def build_design(X, add_const=True, year_dummies=False):
    parts = []
    if add_const:
        parts.append(pd.DataFrame({CONST: np.ones(len(X))}, index=X.index))
    parts.append(X)
    if year_dummies:
        parts.append(year_dummy_frame(X.index))
    return pd.concat(parts, axis=1)


def check_rank(x, names):
    """Raise if the design is rank deficient, naming the collinear columns."""
    if x.shape[0] < x.shape[1]:
        raise EstimationError(f"more regressors ({x.shape[1]}) than observations ({x.shape[0]})")
    if x.shape[1] == 0:
        return
    _, r, piv = linalg.qr(x, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = max(x.shape) * np.finfo(float).eps * diag[0] * 1e3
    rank = int(np.sum(diag > tol))
    if rank < x.shape[1]:
        bad = [names[i] for i in sorted(piv[rank:])]
        raise EstimationError(f"rank-deficient design; collinear column(s): {', '.join(bad)}")


def ols_fit(x, y):
    """Least squares via QR. Returns ``(beta, xtx_inv)``."""
    q, r = np.linalg.qr(x)
    beta = linalg.solve_triangular(r, q.T @ y)
    rinv = linalg.solve_triangular(r, np.eye(r.shape[0]))
    return beta, rinv @ rinv.T


def ols_cov(x, e, xtx_inv, cov_type, groups=None, df_model=None, extra_df=0):
    """Coefficient covariance for OLS-type estimators.

    Parameters
    ----------
    df_model : int
        Number of estimated slope parameters (defaults to ``x.shape[1]``).
    extra_df : int
        Additional absorbed parameters (e.g. entity effects) removed from the
        residual degrees of freedom for the unadjusted and robust forms.
    """
    n = x.shape[0]
    k = x.shape[1] if df_model is None else df_model
    dof = n - k - extra_df
    if dof <= 0:
        raise EstimationError("no residual degrees of freedom")
    if cov_type == "unadjusted":
        return xtx_inv * (e @ e) / dof
    if cov_type == "robust":
        meat = (x * (e * e)[:, None]).T @ x
        return (n / dof) * xtx_inv @ meat @ xtx_inv
    if cov_type == "clustered":
        if groups is None:
            raise ValidationError("clustered covariance needs group labels")
        codes, uniq = pd.factorize(groups, sort=True)
        g = len(uniq)
        if g < 2:
            raise EstimationError("clustered covariance needs at least two clusters")
        scores = np.zeros((g, x.shape[1]))
        np.add.at(scores, codes, x * e[:, None])
        meat = scores.T @ scores
        adj = (g / (g - 1)) * ((n - 1) / max(n - k, 1))
        return adj * xtx_inv @ meat @ xtx_inv
    raise ValidationError(f"unknown cov_type {cov_type!r}")


def sym_inverse(m, what="matrix"):
    """Inverse of a symmetric matrix, falling back to the pseudo-inverse with a warning."""
    m = (m + m.T) / 2.0
    try:
        c = linalg.cho_factor(m)
        inv = linalg.cho_solve(c, np.eye(m.shape[0]))
        if np.linalg.cond(m) < 1e12:
            return inv
    except linalg.LinAlgError:
        pass
    warnings.warn(f"singular {what}; using generalized inverse", SingularMatrixWarning, stacklevel=3)
    return np.linalg.pinv(m, hermitian=True)


def slope_names(names):
    return [n for n in names if n != CONST and not str(n).startswith(YEAR_PREFIX)]


def r_squared(y, e, centered=True):
    tss = ((y - y.mean()) ** 2).sum() if centered else (y ** 2).sum()
    return float(1 - (e @ e) / tss) if tss > 0 else np.nan


def adjusted_r2(r2, n, k):
    if n - k <= 0:
        return np.nan
    return float(1 - (1 - r2) * (n - 1) / (n - k))
