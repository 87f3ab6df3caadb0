"""Static panel estimators: pooled OLS, fixed effects (within) and random effects GLS."""

from __future__ import annotations

import warnings

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ..exceptions import EstimationError, ValidationError, VarianceComponentWarning
from ._base import (
    CONST,
    COV_TYPES,
    RegressionResult,
    adjusted_r2,
    build_design,
    check_panel_xy,
    check_rank,
    ols_cov,
    ols_fit,
    r_squared,
    year_dummy_frame,
)


class _PanelRegressor(RegressorMixin, BaseEstimator):
    _name = "panel"

    def __init__(self, cov_type="clustered", year_dummies=False):
        self.cov_type = cov_type
        self.year_dummies = year_dummies

    def _validate_params(self):
        if self.cov_type not in COV_TYPES:
            raise ValidationError(f"cov_type must be one of {COV_TYPES}, got {self.cov_type!r}")

    def _finish(self, result):
        self.result_ = result
        self.coef_ = result.params.drop(CONST, errors="ignore").to_numpy()
        self.intercept_ = float(result.params.get(CONST, 0.0))
        self.feature_names_in_ = np.asarray(self._regressors, dtype=object)
        self.n_features_in_ = len(self._regressors)
        return self

    def _design_for_predict(self, X):
        check_is_fitted(self, "result_")
        X, _ = check_panel_xy(X[list(self._regressors)], missing="raise")
        d = build_design(X, add_const=CONST in self.result_.params.index, year_dummies=False)
        if self.year_dummies:
            dummies = year_dummy_frame(X.index)
            for name in self.result_.params.index:
                if name.startswith("year_"):
                    d[name] = dummies[name] if name in dummies else 0.0
        return d.reindex(columns=self.result_.params.index, fill_value=0.0)


class PooledOLS(_PanelRegressor):
    """Pooled least squares on a ``(entity, time)``-indexed design.

    Parameters
    ----------
    cov_type : {"clustered", "robust", "unadjusted"}, default "clustered"
        ``"robust"`` is HC1; ``"clustered"`` clusters by entity.
    year_dummies : bool, default False
    """

    _name = "pooled_ols"

    def fit(self, X, y):
        self._validate_params()
        X, y = check_panel_xy(X, y)
        self._regressors = list(X.columns)
        d = build_design(X, add_const=True, year_dummies=self.year_dummies)
        x, yy = d.to_numpy(), y.to_numpy()
        check_rank(x, list(d.columns))
        beta, xtx_inv = ols_fit(x, yy)
        e = yy - x @ beta
        groups = X.index.get_level_values(0)
        cov = ols_cov(x, e, xtx_inv, self.cov_type, groups)
        r2 = r_squared(yy, e)
        n, k = x.shape
        result = RegressionResult(
            estimator=self._name,
            dependent=y.name or "y",
            params=pd.Series(beta, index=d.columns),
            cov=pd.DataFrame(cov, index=d.columns, columns=d.columns),
            n_obs=n,
            n_entities=len(pd.unique(groups)),
            df_resid=(len(pd.unique(groups)) - 1) if self.cov_type == "clustered" else n - k,
            r2=r2,
            r2_adjusted=adjusted_r2(r2, n, k),
            resid=pd.Series(e, index=X.index),
            fitted=pd.Series(x @ beta, index=X.index),
            design=d,
            cov_type=self.cov_type,
        )
        return self._finish(result)

    def predict(self, X):
        d = self._design_for_predict(X)
        return d.to_numpy() @ self.result_.params.to_numpy()


def _demean(frame, groups):
    return frame - frame.groupby(groups).transform("mean")


class FixedEffects(_PanelRegressor):
    """Within (entity-demeaned) estimator, identical to least squares with entity dummies.

    Attributes
    ----------
    effects_ : Series
        Estimated entity intercepts ``mean(y_i) - mean(X_i) @ beta``.
    """

    _name = "fixed_effects"

    def fit(self, X, y):
        self._validate_params()
        X, y = check_panel_xy(X, y)
        self._regressors = list(X.columns)
        d = build_design(X, add_const=False, year_dummies=self.year_dummies)
        groups = X.index.get_level_values(0)
        dm = _demean(d, groups)
        ym = _demean(y, groups)
        for col in d.columns:
            scale = np.abs(d[col].to_numpy()).max() + 1.0
            if np.abs(dm[col].to_numpy()).max() <= 1e-10 * scale:
                raise EstimationError(f"time-invariant regressor {col!r} has no within variation")
        x, yy = dm.to_numpy(), ym.to_numpy()
        check_rank(x, list(d.columns))
        beta, xtx_inv = ols_fit(x, yy)
        e = yy - x @ beta
        n, k = x.shape
        n_ent = len(pd.unique(groups))
        if self.cov_type == "clustered":
            cov = ols_cov(x, e, xtx_inv, "clustered", groups)
            df_resid = n_ent - 1
        else:
            cov = ols_cov(x, e, xtx_inv, self.cov_type, extra_df=n_ent)
            df_resid = n - k - n_ent
        effects = (y - d @ beta).groupby(groups).mean()
        r2 = r_squared(yy, e)
        result = RegressionResult(
            estimator=self._name,
            dependent=y.name or "y",
            params=pd.Series(beta, index=d.columns),
            cov=pd.DataFrame(cov, index=d.columns, columns=d.columns),
            n_obs=n,
            n_entities=n_ent,
            df_resid=df_resid,
            r2=r2,
            r2_adjusted=adjusted_r2(r2, n - n_ent + 1, k + 1),
            resid=pd.Series(e, index=X.index),
            fitted=pd.Series(d.to_numpy() @ beta + effects.reindex(groups).to_numpy(), index=X.index),
            design=d,
            cov_type=self.cov_type,
            extras={"effects": effects},
        )
        self.effects_ = effects
        return self._finish(result)

    def predict(self, X):
        d = self._design_for_predict(X)
        ent = X.index.get_level_values(0)
        alpha = self.effects_.reindex(ent).fillna(self.effects_.mean()).to_numpy()
        return d.to_numpy() @ self.result_.params.to_numpy() + alpha


class RandomEffects(_PanelRegressor):
    """Random-effects GLS with Swamy-Arora variance components.

    The idiosyncratic variance comes from the within regression, the
    between variance from the regression on entity means; ``theta_i``
    quasi-demeans each entity. A negative entity-effect variance is clamped
    to zero (``theta = 0``, i.e. pooled OLS) with a warning.

    With ``cov_type="unadjusted"`` the covariance is ``sigma2_e (X*'X*)^-1``
    on the quasi-demeaned design, so its difference from the unadjusted
    fixed-effects covariance is positive semi-definite.
    """

    _name = "random_effects"

    def fit(self, X, y):
        self._validate_params()
        X, y = check_panel_xy(X, y)
        self._regressors = list(X.columns)
        d = build_design(X, add_const=True, year_dummies=self.year_dummies)
        groups = X.index.get_level_values(0)
        check_rank(d.to_numpy(), list(d.columns))
        n = len(d)
        sizes = pd.Series(1, index=groups).groupby(level=0).sum()
        n_ent = len(sizes)
        if n_ent < 2:
            raise EstimationError("random effects needs at least two entities")

        # idiosyncratic variance from the within regression on time-varying columns
        dm = _demean(d.drop(columns=CONST), groups)
        varying = [c for c in dm.columns if np.abs(dm[c].to_numpy()).max() > 1e-10 * (np.abs(d[c].to_numpy()).max() + 1)]
        ym = _demean(y, groups).to_numpy()
        if varying:
            xw = dm[varying].to_numpy()
            bw, _ = ols_fit(xw, ym)
            ew = ym - xw @ bw
        else:
            ew = ym
        sigma2_e = float(ew @ ew) / (n - n_ent - len(varying))

        # between regression on entity means
        means = d.groupby(groups).mean()
        ymean = y.groupby(groups).mean()
        xb = means.to_numpy()
        if xb.shape[0] <= xb.shape[1]:
            raise EstimationError("too few entities for the between regression")
        bb, _ = ols_fit(xb, ymean.to_numpy())
        eb = ymean.to_numpy() - xb @ bb
        sigma2_b = float(eb @ eb) / (n_ent - xb.shape[1])
        t_bar = n_ent / float((1.0 / sizes).sum())
        sigma2_u = sigma2_b - sigma2_e / t_bar
        if sigma2_u < 0:
            warnings.warn(
                "negative entity-effect variance estimate clamped to zero", VarianceComponentWarning, stacklevel=2
            )
            sigma2_u = 0.0
        t_i = sizes.reindex(groups).to_numpy().astype(float)
        theta_i = 1.0 - np.sqrt(sigma2_e / (t_i * sigma2_u + sigma2_e))

        xs = d.to_numpy() - theta_i[:, None] * means.reindex(groups).to_numpy()
        ys = y.to_numpy() - theta_i * ymean.reindex(groups).to_numpy()
        beta, xtx_inv = ols_fit(xs, ys)
        e = ys - xs @ beta
        if self.cov_type == "unadjusted":
            # model-based GLS covariance, on the same variance scale as the within estimator
            cov = sigma2_e * xtx_inv
        else:
            cov = ols_cov(xs, e, xtx_inv, self.cov_type, groups)
        k = xs.shape[1]
        r2 = r_squared(ys, e)
        theta = pd.Series(theta_i, index=X.index).groupby(level=0).first()
        result = RegressionResult(
            estimator=self._name,
            dependent=y.name or "y",
            params=pd.Series(beta, index=d.columns),
            cov=pd.DataFrame(cov, index=d.columns, columns=d.columns),
            n_obs=n,
            n_entities=n_ent,
            df_resid=(n_ent - 1) if self.cov_type == "clustered" else n - k,
            r2=r2,
            r2_adjusted=adjusted_r2(r2, n, k),
            resid=pd.Series(y.to_numpy() - d.to_numpy() @ beta, index=X.index),
            fitted=pd.Series(d.to_numpy() @ beta, index=X.index),
            design=d,
            cov_type=self.cov_type,
            extras={"sigma2_e": sigma2_e, "sigma2_u": sigma2_u, "theta": theta},
        )
        self.theta_ = theta
        self.sigma2_e_ = sigma2_e
        self.sigma2_u_ = sigma2_u
        return self._finish(result)

    def predict(self, X):
        d = self._design_for_predict(X)
        return d.to_numpy() @ self.result_.params.to_numpy()
