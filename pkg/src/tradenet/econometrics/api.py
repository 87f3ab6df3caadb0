"""Function-style entry points taking a panel and a :class:`RegressionSpec`."""

from __future__ import annotations

import pandas as pd

from ..exceptions import ValidationError
from ._base import RegressionSpec
from .gmm import SystemGMM
from .static import FixedEffects, PooledOLS, RandomEffects


def _indexed(panel):
    if hasattr(panel, "indexed"):
        return panel.indexed()
    if isinstance(panel, pd.DataFrame) and {"country", "year"} <= set(panel.columns):
        return panel.set_index(["country", "year"])
    if isinstance(panel, pd.DataFrame) and isinstance(panel.index, pd.MultiIndex):
        return panel
    raise ValidationError("panel must be a PanelDataset or a country-year frame")


def _xy(panel, spec, extra=()):
    frame = _indexed(panel)
    cols = list(spec.regressors) + [c for c in extra if c not in spec.regressors]
    missing = set(cols + [spec.dependent]) - set(frame.columns)
    if missing:
        raise ValidationError(f"panel lacks column(s) {sorted(missing)}")
    return frame[cols], frame[spec.dependent].rename(spec.dependent)


def _static(cls, panel, spec):
    if not isinstance(spec, RegressionSpec):
        raise ValidationError("spec must be a RegressionSpec")
    X, y = _xy(panel, spec)
    return cls(cov_type=spec.cov_type, year_dummies=spec.year_dummies).fit(X, y).result_


def pooled_ols(panel, spec):
    """Pooled least squares of ``spec.dependent`` on ``spec.regressors``."""
    return _static(PooledOLS, panel, spec)


def fixed_effects_within(panel, spec):
    """Entity fixed effects via the within transformation."""
    return _static(FixedEffects, panel, spec)


def random_effects_gls(panel, spec):
    """Swamy-Arora random-effects GLS."""
    return _static(RandomEffects, panel, spec)


def system_gmm(panel, spec, history=None):
    """Two-equation system GMM for the dynamic model in ``spec``.

    Parameters
    ----------
    panel : PanelDataset or DataFrame
    spec : RegressionSpec
        Must set ``include_lagged_dependent``.
    history : DataFrame, optional
        Earlier country-years with the same columns. They supply lags and
        instruments but are not estimation rows.
    """
    if not spec.include_lagged_dependent:
        raise ValidationError("system GMM needs include_lagged_dependent=True")
    X, y = _xy(panel, spec, spec.instruments)
    start = None
    if history is not None:
        start = int(X.index.get_level_values(1).min())
        hist = _indexed(history)
        hist = hist[hist.index.get_level_values(1) < start]
        if spec.dependent not in hist.columns:
            raise ValidationError(f"history lacks column {spec.dependent!r}")
        X = pd.concat([hist.reindex(columns=X.columns), X]).sort_index()
        y = pd.concat([hist[spec.dependent], y]).reindex(X.index)
    opts = spec.gmm_options
    est = SystemGMM(
        endogenous=spec.endogenous,
        predetermined=spec.predetermined,
        instruments=spec.instruments,
        year_dummies=spec.year_dummies,
        lag_min=opts.lag_min,
        lag_max=opts.lag_max,
        collapse=opts.collapse,
        steps=opts.steps,
        windmeijer=opts.windmeijer,
        level_instruments=opts.level_instruments,
        dependent_name=spec.dependent,
        estimation_start=start,
    )
    return est.fit(X, y).result_
