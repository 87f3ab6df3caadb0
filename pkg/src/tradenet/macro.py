"""Macroeconomic covariates: composite indices, trade-policy measures, transforms."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .countries import check_country_code
from .exceptions import DataWarning, ValidationError

logger = logging.getLogger(__name__)

WGI_COLUMNS = ("wgi_va", "wgi_ps", "wgi_ge", "wgi_rq", "wgi_rl", "wgi_cc")
INFRA_COLUMNS = ("tel_lines", "air_freight", "energy_use", "elec_cons")
MACRO_COLUMNS = ("country", "year", "rgdpc", "gdp", "hc", "pop", "fdi") + WGI_COLUMNS + INFRA_COLUMNS
TARIFF_COLUMNS = ("country", "year", "tariff")

COVARIATE_COLUMNS = (
    "country", "year", "rgdpc", "hc", "pop", "tc", "infra", "iqi", "rta", "fdi", "ofr", "crisis",
)

CRISIS_YEARS = range(2007, 2010)

# never logged: shell indices, dummies, and PCA scores (which are centred on zero)
DEFAULT_UNLOGGED = frozenset({"kcore", "crisis", "iqi", "infra"})


# ---------------------------------------------------------------------------
# Principal-component indices

class PCAIndex(TransformerMixin, BaseEstimator):
    """First-principal-component composite index on standardized indicators.

    Columns are standardized with the fitted mean and sample standard
    deviation; the score is the projection on the leading eigenvector of the
    correlation matrix. The sign is chosen so the score correlates
    positively with the row mean of the standardized inputs, or, when that
    mean has no variance, so the first loading is positive.

    Attributes
    ----------
    mean_, scale_ : ndarray of shape (n_features,)
    loadings_ : ndarray of shape (n_features,)
    explained_variance_ratio_ : float
    """

    def fit(self, X, y=None):
        x, names = _as_matrix(X)
        n, k = x.shape
        if k < 2:
            raise ValidationError("a composite index needs at least two indicators")
        if n < k + 1:
            raise ValidationError(f"need at least {k + 1} observations, got {n}")
        if not np.all(np.isfinite(x)):
            raise ValidationError("indicator matrix contains missing or non-finite cells")
        scale = x.std(axis=0, ddof=1)
        for j, s in enumerate(scale):
            if not s > 0:
                raise ValidationError(f"zero-variance column {names[j]!r}")
        self.mean_ = x.mean(axis=0)
        self.scale_ = scale
        z = (x - self.mean_) / self.scale_
        corr = np.corrcoef(z, rowvar=False)
        vals, vecs = np.linalg.eigh(corr)
        load = vecs[:, -1]
        rowmean = z.mean(axis=1)
        rowmean -= rowmean.mean()
        score = z @ load
        cov = float(np.dot(score, rowmean))
        if abs(cov) > 1e-10 * np.linalg.norm(score) * max(np.linalg.norm(rowmean), 1e-300):
            sign = np.sign(cov)
        else:
            # degenerate orientation: make the first non-zero loading positive
            sign = np.sign(load[np.flatnonzero(np.abs(load) > 1e-12)[0]])
        self.loadings_ = load * sign
        self.explained_variance_ratio_ = float(vals[-1] / vals.sum())
        self.feature_names_in_ = np.asarray(names, dtype=object)
        self.n_features_in_ = k
        return self

    def transform(self, X):
        check_is_fitted(self, "loadings_")
        x, _ = _as_matrix(X)
        if x.shape[1] != self.n_features_in_:
            raise ValidationError(f"expected {self.n_features_in_} columns, got {x.shape[1]}")
        return ((x - self.mean_) / self.scale_) @ self.loadings_


def _as_matrix(X):
    if isinstance(X, pd.DataFrame):
        return X.to_numpy(dtype=float), [str(c) for c in X.columns]
    x = np.asarray(X, dtype=float)
    if x.ndim != 2:
        raise ValidationError("indicator matrix must be two-dimensional")
    return x, [f"x{j}" for j in range(x.shape[1])]


def pca_index(indicator_matrix):
    """Scores of the oriented first principal component."""
    return PCAIndex().fit_transform(indicator_matrix)


# ---------------------------------------------------------------------------
# Regional memberships

@dataclass(frozen=True)
class MembershipMatrix:
    """Binary country-by-REC membership table."""

    frame: pd.DataFrame

    def __post_init__(self):
        f = self.frame
        for code in f.index:
            check_country_code(code)
        vals = f.to_numpy()
        if not np.isin(vals, (0, 1)).all():
            raise ValidationError("membership cells must be 0 or 1")

    @classmethod
    def from_csv(cls, path):
        f = pd.read_csv(path, dtype={"country": str})
        if "country" not in f.columns:
            raise ValidationError(f"{path}: missing 'country' column")
        f = f.set_index("country").sort_index()
        return cls(f.astype(np.int64))

    @property
    def countries(self):
        return tuple(self.frame.index)

    @property
    def n_recs(self):
        return self.frame.shape[1]

    def memberships(self, country):
        if country not in self.frame.index:
            raise ValidationError(f"country {country!r} not in membership matrix")
        return int(self.frame.loc[country].sum())

    def shared(self):
        """``B[i, j] = 1`` iff countries i and j share at least one REC; zero diagonal."""
        m = self.frame.to_numpy()
        b = (m @ m.T > 0).astype(np.int64)
        np.fill_diagonal(b, 0)
        return pd.DataFrame(b, index=self.frame.index, columns=self.frame.index)


def rta_measure(country, year, gdps, B):
    """GDP-weighted regional trade agreement exposure.

    ``RTA = sum_j B[i, j] * GDP_j / GDP_i`` over partners sharing a REC.

    Parameters
    ----------
    gdps : mapping
        ``(country, year) -> GDP`` or ``country -> GDP`` for the given year.
    B : MembershipMatrix or DataFrame
        Membership matrix, or an already-derived shared-REC matrix.
    """
    shared = B.shared() if isinstance(B, MembershipMatrix) else B

    def gdp(c):
        for key in ((c, year), c):
            if key in gdps:
                val = gdps[key]
                if val is not None and np.isfinite(val):
                    return float(val)
        raise ValidationError(f"missing GDP for ({c}, {year})")

    if country not in shared.index:
        raise ValidationError(f"country {country!r} not in membership matrix")
    row = shared.loc[country]
    partners = [c for c in row.index if row[c] == 1]
    own = gdp(country)
    if not partners:
        return 0.0
    return sum(gdp(c) for c in partners) / own


def overlap_frequency_ratio(country, memberships, mode="overlap"):
    """Overlap of a country's REC memberships, bounded in ``[0, 1]``.

    ``mode="overlap"`` gives ``(m - 1) / (R - 1)``; ``mode="share"`` gives
    ``m / R``, with ``m`` the country's memberships and ``R`` the number of RECs.
    """
    m = memberships.memberships(country)
    r = memberships.n_recs
    if mode == "share":
        return m / r
    if mode != "overlap":
        raise ValidationError(f"unknown OFR mode {mode!r}")
    if m == 0:
        warnings.warn(f"{country} belongs to no REC; overlap ratio set to 0", DataWarning, stacklevel=2)
        return 0.0
    return (m - 1) / (r - 1)


def trade_cost(country_tariffs, country, mode="count"):
    """Tariff-based trade cost of ``country``.

    ``mode="count"`` divides the country's tariff by the number of countries;
    ``mode="share"`` divides it by the sum of all tariffs.
    """
    if not country_tariffs:
        raise ValidationError("empty tariff mapping")
    if country not in country_tariffs or country_tariffs[country] is None or not np.isfinite(country_tariffs[country]):
        raise ValidationError(f"missing tariff for {country!r}")
    t = float(country_tariffs[country])
    if mode == "count":
        return t / len(country_tariffs)
    if mode == "share":
        total = float(sum(country_tariffs.values()))
        return t / total if total else 0.0
    raise ValidationError(f"unknown trade-cost mode {mode!r}")


def crisis_dummy(year):
    return int(year in CRISIS_YEARS)


# ---------------------------------------------------------------------------
# Log policy

def is_logged(column, unlogged=DEFAULT_UNLOGGED):
    return column not in unlogged and not column.startswith("year_")


def log_transform_policy(panel_column, values, epsilon=1e-6, unlogged=DEFAULT_UNLOGGED):
    """Apply ``log(x + epsilon)`` unless the column is exempt.

    Raises
    ------
    ValidationError
        If a logged column has negative values.
    """
    x = np.asarray(values, dtype=float)
    if not is_logged(panel_column, unlogged):
        return x
    if np.any(x < 0):
        raise ValidationError(f"negative value in log-transformed column {panel_column!r}")
    return np.log(x + epsilon)


class LogTransformer(TransformerMixin, BaseEstimator):
    """Column-wise log policy over a DataFrame; key columns pass through."""

    def __init__(self, epsilon=1e-6, unlogged=DEFAULT_UNLOGGED, keys=("country", "year")):
        self.epsilon = epsilon
        self.unlogged = unlogged
        self.keys = keys

    def fit(self, X, y=None):
        self.feature_names_in_ = np.asarray(X.columns, dtype=object)
        return self

    def transform(self, X):
        out = X.copy()
        for col in X.columns:
            if col in self.keys:
                continue
            out[col] = log_transform_policy(col, X[col].to_numpy(), self.epsilon, frozenset(self.unlogged))
        return out


# ---------------------------------------------------------------------------
# Readers and covariate construction

def read_macro_csv(path):
    f = pd.read_csv(path, dtype={"country": str})
    missing = set(MACRO_COLUMNS) - set(f.columns)
    if missing:
        raise ValidationError(f"{path}: missing columns {sorted(missing)}")
    return f[list(MACRO_COLUMNS)]


def read_tariffs_csv(path):
    f = pd.read_csv(path, dtype={"country": str})
    missing = set(TARIFF_COLUMNS) - set(f.columns)
    if missing:
        raise ValidationError(f"{path}: missing columns {sorted(missing)}")
    return f[list(TARIFF_COLUMNS)]


def _check_ranges(macro):
    wgi = macro[list(WGI_COLUMNS)].to_numpy(dtype=float)
    if np.any(np.abs(wgi[np.isfinite(wgi)]) > 2.5):
        raise ValidationError("governance indicators must lie in [-2.5, 2.5]")
    for col in ("pop", "gdp"):
        v = macro[col].to_numpy(dtype=float)
        if np.any(v[np.isfinite(v)] <= 0):
            raise ValidationError(f"{col} must be positive")


def build_covariates(macro, memberships, tariffs, tc_mode="count", ofr_mode="overlap"):
    """Construct the regression covariates for every complete country-year.

    Rows with any missing required input are dropped first. Both composite
    indices are fitted on the pooled remaining country-years.

    Returns
    -------
    DataFrame
        Columns ``COVARIATE_COLUMNS``, sorted by country and year.
    """
    _check_ranges(macro)
    merged = macro.merge(tariffs, on=["country", "year"], how="left")
    required = [c for c in MACRO_COLUMNS if c not in ("country", "year")] + ["tariff"]
    complete = merged.dropna(subset=required)
    complete = complete[complete["country"].isin(memberships.countries)]
    dropped = len(merged) - len(complete)
    if dropped:
        logger.info("dropped %d country-year(s) with missing macro inputs", dropped)
    complete = complete.sort_values(["country", "year"]).reset_index(drop=True)
    if complete.empty:
        raise ValidationError("no complete macro country-years")

    iqi = PCAIndex().fit_transform(complete[list(WGI_COLUMNS)])
    infra = PCAIndex().fit_transform(complete[list(INFRA_COLUMNS)])
    shared = memberships.shared()
    gdp_all = {(r.country, int(r.year)): float(r.gdp) for r in macro.itertuples() if np.isfinite(r.gdp)}

    rows = []
    tariff_by_year = {
        yr: dict(zip(grp["country"], grp["tariff"].astype(float)))
        for yr, grp in complete.groupby("year")
    }
    for k, r in enumerate(complete.itertuples()):
        yr = int(r.year)
        rows.append(
            {
                "country": r.country,
                "year": yr,
                "rgdpc": float(r.rgdpc),
                "hc": float(r.hc),
                "pop": float(r.pop),
                "tc": trade_cost(tariff_by_year[yr], r.country, tc_mode),
                "infra": float(infra[k]),
                "iqi": float(iqi[k]),
                "rta": _rta_available(r.country, yr, gdp_all, shared),
                "fdi": float(r.fdi),
                "ofr": overlap_frequency_ratio(r.country, memberships, ofr_mode),
                "crisis": crisis_dummy(yr),
            }
        )
    return pd.DataFrame(rows, columns=list(COVARIATE_COLUMNS))


def _rta_available(country, year, gdps, shared):
    # partners without a GDP figure that year are outside the sample
    row = shared.loc[country]
    partners = [c for c in row.index if row[c] == 1 and (c, year) in gdps]
    sub = shared.loc[[country] + partners, [country] + partners]
    return rta_measure(country, year, gdps, sub)
