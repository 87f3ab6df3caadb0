"""Blundell-Bond system GMM for dynamic panels.

Each entity contributes a block of rows: first the differenced equation for
every estimation period, then the levels equation for the same periods.
Rows whose data are missing are zeroed in ``y``, ``X`` and ``Z`` so they
drop out of every moment sum. Missing instrument values are set to zero.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy import stats
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ..exceptions import EstimationError, InstrumentProliferationWarning, ValidationError
from ._base import CONST, YEAR_PREFIX, RegressionResult, check_panel_xy, slope_names, sym_inverse
from .diagnostics import TestResult, wald_joint


@dataclass
class GMMState:
    """Stacked system arrays kept for post-estimation tests."""

    Z: np.ndarray  # (N, R, L)
    X: np.ndarray  # (N, R, K)
    y: np.ndarray  # (N, R)
    n_periods: int  # periods per equation; the first n_periods rows are differences
    diff_valid: np.ndarray  # (N, n_periods)
    resid: np.ndarray  # (N, R) final residuals
    W: np.ndarray  # final weight matrix
    A_inv: np.ndarray  # (X'Z W Z'X)^-1
    cov: np.ndarray
    hansen: float
    hansen_df: int
    instrument_names: list


def _grid(X, y):
    """Reindex onto a full entity x period grid of consecutive integer periods."""
    ent = X.index.get_level_values(0)
    time = X.index.get_level_values(1)
    entities = sorted(pd.unique(ent))
    t_vals = np.asarray(sorted(pd.unique(time)))
    if not np.issubdtype(t_vals.dtype, np.integer):
        raise ValidationError("system GMM needs integer time periods")
    periods = np.arange(t_vals.min(), t_vals.max() + 1)
    full = pd.MultiIndex.from_product([entities, periods], names=X.index.names)
    xg = X.reindex(full).to_numpy().reshape(len(entities), len(periods), X.shape[1])
    yg = y.reindex(full).to_numpy().reshape(len(entities), len(periods))
    return entities, periods, xg, yg


def _lag(a, lag):
    """Shift along the period axis; entries without history become NaN."""
    out = np.full_like(a, np.nan, dtype=float)
    if lag < a.shape[1]:
        out[:, lag:] = a[:, : a.shape[1] - lag]
    return out


def _windmeijer(ZX_i, Ze1_i, W2, A2_inv, XZ, Ze2):
    """Windmeijer finite-sample correction term ``D`` (K x K).

    ``D[:, j]`` is the derivative of the two-step estimate with respect to
    the j-th first-step coefficient through the estimated weight matrix.
    """
    g = W2 @ Ze2
    a = Ze1_i @ g  # (N,)
    b = np.einsum("nlk,l->nk", ZX_i, g)  # (N, K)
    mg = np.einsum("nlk,n->lk", ZX_i, a) + np.einsum("nl,nk->lk", Ze1_i, b)
    return A2_inv @ XZ @ W2 @ mg


class SystemGMM(RegressorMixin, BaseEstimator):
    """System GMM estimator of ``y_it = phi y_i,t-1 + X_it b + u_i + e_it``.

    ``fit(X, y)`` takes regressors and the dependent variable indexed by
    ``(entity, period)``; the lagged dependent variable is built internally.

    Parameters
    ----------
    endogenous : sequence of str
        Regressors instrumented by their own lags ``lag_min..lag_max``.
    predetermined : sequence of str
        Regressors instrumented by lags ``lag_min-1..lag_max-1``.
    instruments : sequence of str
        Columns of ``X`` used only as IV-style instruments.
    year_dummies : bool, default False
        Add period dummies as exogenous regressors, instrumented in the
        levels equation.
    lag_min, lag_max : int, default 2, 4
    collapse : bool, default True
        One instrument column per lag instead of one per period and lag.
    steps : {"one", "two"}, default "two"
    windmeijer : bool, default True
        Finite-sample corrected two-step covariance.
    level_instruments : bool, default True
        Use lagged differences as GMM-style instruments for the levels equation.
    dependent_name : str, default "y"
    estimation_start : int, optional
        First period used as an estimation row. Earlier periods only supply
        lags and instruments. Defaults to the third period of the data.

    Attributes
    ----------
    result_ : RegressionResult
    state_ : GMMState
    """

    def __init__(
        self,
        endogenous=(),
        predetermined=(),
        instruments=(),
        year_dummies=False,
        lag_min=2,
        lag_max=4,
        collapse=True,
        steps="two",
        windmeijer=True,
        level_instruments=True,
        dependent_name="y",
        estimation_start=None,
    ):
        self.endogenous = endogenous
        self.predetermined = predetermined
        self.instruments = instruments
        self.year_dummies = year_dummies
        self.lag_min = lag_min
        self.lag_max = lag_max
        self.collapse = collapse
        self.steps = steps
        self.windmeijer = windmeijer
        self.level_instruments = level_instruments
        self.dependent_name = dependent_name
        self.estimation_start = estimation_start

    # -- construction of the stacked system --------------------------------

    def _build(self, X, y):
        if self.lag_min < 2:
            raise ValidationError("lag_min must be at least 2")
        if self.lag_max < self.lag_min:
            raise ValidationError("lag_max must be >= lag_min")
        if self.steps not in ("one", "two"):
            raise ValidationError("steps must be 'one' or 'two'")
        instruments = list(self.instruments)
        missing = set(instruments) - set(X.columns)
        if missing:
            raise ValidationError(f"instrument column(s) not in X: {sorted(missing)}")
        regressors = [c for c in X.columns if c not in instruments]
        endog = list(self.endogenous)
        predet = list(self.predetermined)
        unknown = (set(endog) | set(predet)) - set(regressors)
        if unknown:
            raise ValidationError(f"endogenous/predetermined not among regressors: {sorted(unknown)}")
        exog = [c for c in regressors if c not in endog and c not in predet]

        # keep rows with a finite dependent variable; regressors may be NaN
        yv = y.reindex(X.index)
        entities, periods, xg, yg = _grid(X, yv)
        n_ent, n_per = yg.shape
        if n_per < 4:
            raise EstimationError("system GMM needs at least 4 periods")
        col = {c: j for j, c in enumerate(X.columns)}
        start = 2
        if self.estimation_start is not None:
            start = max(start, int(np.searchsorted(periods, self.estimation_start)))
        tq = n_per - start
        if tq < 1:
            raise EstimationError("no estimation periods after the lag history")
        est = slice(start, n_per)

        ylag = _lag(yg, 1)
        xr = xg[:, :, [col[c] for c in regressors]] if regressors else np.zeros((n_ent, n_per, 0))
        dy = yg - ylag
        dylag = _lag(dy, 1)
        dxr = xr - _lag(xr, 1)

        diff_valid = np.isfinite(dy[:, est]) & np.isfinite(dylag[:, est]) & np.isfinite(dxr[:, est]).all(axis=2)
        lev_valid = np.isfinite(yg[:, est]) & np.isfinite(ylag[:, est]) & np.isfinite(xr[:, est]).all(axis=2)

        names = [f"L1.{self.dependent_name}"] + regressors
        xd = np.concatenate([dylag[:, est, None], dxr[:, est]], axis=2)
        xl = np.concatenate([ylag[:, est, None], xr[:, est]], axis=2)
        yd, yl = dy[:, est], yg[:, est]

        est_periods = periods[start:]
        if self.year_dummies:
            base = None
            for j, p in enumerate(est_periods):
                if lev_valid[:, j].any():
                    base = p
                    break
            dummy_periods = [p for j, p in enumerate(est_periods) if p != base and (lev_valid[:, j] | diff_valid[:, j]).any()]
            dmat = np.stack([(periods == p).astype(float) for p in dummy_periods], axis=1) if dummy_periods else np.zeros((n_per, 0))
            dlev = np.broadcast_to(dmat[est], (n_ent, tq, dmat.shape[1]))
            ddif = np.broadcast_to((dmat - np.vstack([np.full((1, dmat.shape[1]), np.nan), dmat[:-1]]))[est], (n_ent, tq, dmat.shape[1]))
            xd = np.concatenate([xd, ddif], axis=2)
            xl = np.concatenate([xl, dlev], axis=2)
            names += [f"{YEAR_PREFIX}{p}" for p in dummy_periods]
        else:
            dmat = np.zeros((n_per, 0))
            dlev = np.zeros((n_ent, tq, 0))
        xd = np.concatenate([xd, np.zeros((n_ent, tq, 1))], axis=2)
        xl = np.concatenate([xl, np.ones((n_ent, tq, 1))], axis=2)
        names.append(CONST)

        # instruments: list of (name, diff-rows block, level-rows block)
        zcols = []

        def add(name, dblock, lblock):
            dblock = np.where(np.isfinite(dblock), dblock, 0.0)
            lblock = np.where(np.isfinite(lblock), lblock, 0.0)
            zcols.append((name, dblock, lblock))

        zero = np.zeros((n_ent, tq))
        gmm_vars = [(self.dependent_name, yg, self.lag_min, self.lag_max)]
        gmm_vars += [(c, xg[:, :, col[c]], self.lag_min, self.lag_max) for c in endog]
        gmm_vars += [(c, xg[:, :, col[c]], self.lag_min - 1, self.lag_max - 1) for c in predet]
        for var, arr, lo, hi in gmm_vars:
            for lag in range(lo, hi + 1):
                lagged = _lag(arr, lag)[:, est]
                if self.collapse:
                    add(f"{var}:L{lag}", lagged, zero)
                else:
                    for j, p in enumerate(est_periods):
                        block = np.zeros((n_ent, tq))
                        block[:, j] = lagged[:, j]
                        add(f"{var}:L{lag}@{p}", block, zero)
            if self.level_instruments:
                darr = arr - _lag(arr, 1)
                ldiff = _lag(darr, lo - 1)[:, est]
                if self.collapse:
                    add(f"D.{var}:L{lo - 1}", zero, ldiff)
                else:
                    for j, p in enumerate(est_periods):
                        block = np.zeros((n_ent, tq))
                        block[:, j] = ldiff[:, j]
                        add(f"D.{var}:L{lo - 1}@{p}", zero, block)
        for c in exog + instruments:
            arr = xg[:, :, col[c]]
            add(f"iv:{c}", (arr - _lag(arr, 1))[:, est], arr[:, est])
        for j in range(dlev.shape[2]):
            add(f"iv:{names[len(names) - 1 - dlev.shape[2] + j]}", zero, dlev[:, :, j])
        add("iv:const", zero, np.ones((n_ent, tq)))

        z = np.stack([np.concatenate([d, l], axis=1) for _, d, l in zcols], axis=2)
        xs = np.concatenate([xd, xl], axis=1)
        ys = np.concatenate([yd, yl], axis=1)
        valid = np.concatenate([diff_valid, lev_valid], axis=1)
        xs = np.where(valid[:, :, None], xs, 0.0)
        ys = np.where(valid, ys, 0.0)
        z = np.where(valid[:, :, None], z, 0.0)
        # drop instrument columns that carry no information in the estimation sample
        keep = np.abs(z).sum(axis=(0, 1)) > 0
        z = z[:, :, keep]
        znames = [n for (n, _, _), k in zip(zcols, keep) if k]
        return entities, est_periods, names, z, xs, ys, tq, diff_valid, lev_valid, znames

    # -- estimation ---------------------------------------------------------

    def fit(self, X, y):
        if not isinstance(X, pd.DataFrame):
            raise ValidationError("X must be a DataFrame indexed by (entity, period)")
        X, y = check_panel_xy(X, y if y is not None else None, missing="keep")
        entities, est_periods, names, z, xs, ys, tq, diff_valid, lev_valid, znames = self._build(X, y)
        n_ent = z.shape[0]
        L, K = z.shape[2], xs.shape[2]
        if L < K:
            raise EstimationError(f"under-identified: {L} instruments for {K} parameters")
        if L > n_ent:
            warnings.warn(
                f"instrument proliferation: {L} instruments for {n_ent} entities",
                InstrumentProliferationWarning,
                stacklevel=2,
            )

        ZX_i = np.einsum("nrl,nrk->nlk", z, xs)
        Zy_i = np.einsum("nrl,nr->nl", z, ys)
        ZX, Zy = ZX_i.sum(axis=0), Zy_i.sum(axis=0)

        R = 2 * tq
        H = np.eye(R)
        H[:tq, :tq] = 2 * np.eye(tq) - np.eye(tq, k=1) - np.eye(tq, k=-1)
        ZHZ = np.einsum("nrl,rs,nsm->lm", z, H, z)
        W1 = sym_inverse(ZHZ, "one-step weight matrix")

        def solve(W):
            A = ZX.T @ W @ ZX
            if np.linalg.matrix_rank(A) < K:
                raise EstimationError("coefficients not identified by the instrument set")
            A_inv = np.linalg.inv(A)
            return A_inv @ (ZX.T @ W @ Zy), A_inv

        b1, A1_inv = solve(W1)
        e1 = ys - xs @ b1
        Ze1_i = np.einsum("nrl,nr->nl", z, e1)
        S1 = Ze1_i.T @ Ze1_i
        V1 = A1_inv @ ZX.T @ W1 @ S1 @ W1 @ ZX @ A1_inv

        if self.steps == "one":
            beta, V, W, A_inv, e = b1, V1, W1, A1_inv, e1
            Ze = Ze1_i.sum(axis=0)
            J = float(Ze @ sym_inverse(S1, "moment covariance") @ Ze) if L > K else 0.0
        else:
            W2 = sym_inverse(S1, "two-step weight matrix")
            b2, A2_inv = solve(W2)
            e2 = ys - xs @ b2
            Ze2 = np.einsum("nrl,nr->l", z, e2)
            V = A2_inv
            if self.windmeijer:
                D = _windmeijer(ZX_i, Ze1_i, W2, A2_inv, ZX.T, Ze2)
                V = A2_inv + D @ A2_inv + A2_inv @ D.T + D @ V1 @ D.T
            beta, W, A_inv, e = b2, W2, A2_inv, e2
            J = float(Ze2 @ W2 @ Ze2) if L > K else 0.0
        V = (V + V.T) / 2.0
        J = max(J, 0.0)

        state = GMMState(
            Z=z, X=xs, y=ys, n_periods=tq, diff_valid=diff_valid, resid=e, W=W, A_inv=A_inv,
            cov=V, hansen=J, hansen_df=L - K, instrument_names=znames,
        )
        lev_index = pd.MultiIndex.from_product([entities, est_periods], names=X.index.names)
        lev_mask = lev_valid.ravel()
        resid = pd.Series(e[:, tq:].ravel()[lev_mask], index=lev_index[lev_mask])
        params = pd.Series(beta, index=names)
        result = RegressionResult(
            estimator="system_gmm",
            dependent=self.dependent_name,
            params=params,
            cov=pd.DataFrame(V, index=names, columns=names),
            n_obs=int(lev_valid.sum()),
            n_entities=int(lev_valid.any(axis=1).sum()),
            df_resid=None,
            resid=resid,
            cov_type="windmeijer" if (self.steps == "two" and self.windmeijer) else "robust",
            extras={"gmm_state": state},
        )
        result.diagnostics.update(_gmm_diagnostics(result))
        self.result_ = result
        self.state_ = state
        self.coef_ = params.drop(CONST).to_numpy()
        self.intercept_ = float(params[CONST])
        self.feature_names_in_ = np.asarray(list(X.columns), dtype=object)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        """Levels-equation prediction; ``X`` must hold the regressors and ``L1.<dependent>``."""
        check_is_fitted(self, "result_")
        params = self.result_.params
        X, _ = check_panel_xy(X, missing="raise")
        out = np.full(len(X), params[CONST])
        periods = X.index.get_level_values(1)
        for name, b in params.items():
            if name == CONST:
                continue
            if name.startswith(YEAR_PREFIX):
                out += b * (periods.astype(str) == name[len(YEAR_PREFIX):])
            else:
                if name not in X.columns:
                    raise ValidationError(f"column {name!r} required for prediction")
                out += b * X[name].to_numpy()
        return out


def _state(result):
    state = result.extras.get("gmm_state")
    if state is None:
        raise ValidationError("result does not come from system GMM")
    return state


def hansen_j(result):
    """Hansen overidentification statistic; zero when just identified."""
    st = _state(result)
    if st.hansen_df <= 0:
        return TestResult(0.0, 1.0, 0)
    return TestResult(st.hansen, float(stats.chi2.sf(st.hansen, st.hansen_df)), st.hansen_df)


def arellano_bond_ar(result, order):
    """Arellano-Bond test for order-``order`` autocorrelation in differenced residuals.

    The statistic is standard normal under the null; it is returned in
    ``TestResult.statistic``.

    Raises
    ------
    EstimationError
        If no entity has two differenced residuals ``order`` periods apart.
    """
    if order < 1:
        raise ValidationError("order must be at least 1")
    st = _state(result)
    tq = st.n_periods
    valid = st.diff_valid
    if order >= tq or not (valid[:, order:] & valid[:, :-order]).any():
        raise EstimationError(f"too few periods for an order-{order} test")
    ed = st.resid[:, :tq]
    xd = st.X[:, :tq]
    w = np.zeros_like(ed)
    both = valid[:, order:] & valid[:, :-order]
    w[:, order:] = np.where(both, ed[:, :-order], 0.0)
    a = (w * ed).sum(axis=1)
    d0 = a.sum()
    wx = np.einsum("nt,ntk->k", w, xd)
    Ze_i = np.einsum("nrl,nr->nl", st.Z, st.resid)
    ZX = np.einsum("nrl,nrk->lk", st.Z, st.X)
    d1 = float(a @ a)
    d2 = -2.0 * float(wx @ st.A_inv @ ZX.T @ st.W @ (Ze_i.T @ a))
    d3 = float(wx @ st.cov @ wx)
    var = d1 + d2 + d3
    if not var > 0:
        return TestResult(np.nan, np.nan, None, ("non_positive_variance",))
    zstat = d0 / np.sqrt(var)
    return TestResult(float(zstat), float(2 * stats.norm.sf(abs(zstat))))


def _gmm_diagnostics(result):
    st = _state(result)
    h = hansen_j(result)
    out = {
        "hansen": h.statistic,
        "hansen_df": h.df,
        "hansen_p": h.pvalue,
        "instrument_count": st.Z.shape[2],
        "n_obs": result.n_obs,
    }
    for m in (1, 2):
        try:
            ar = arellano_bond_ar(result, m)
        except EstimationError:
            ar = TestResult(np.nan, np.nan)
        out[f"ar{m}_z"], out[f"ar{m}_p"] = ar.statistic, ar.pvalue
    if slope_names(list(result.params.index)):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            w = wald_joint(result)
        out["wald"], out["wald_p"] = w.statistic, w.pvalue
    return out
