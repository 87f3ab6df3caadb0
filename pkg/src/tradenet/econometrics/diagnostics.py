"""Specification tests for the panel estimators."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import stats

from ..exceptions import SingularMatrixWarning, ValidationError
from ._base import CONST, build_design, check_panel_xy, ols_cov, ols_fit, slope_names


@dataclass(frozen=True)
class TestResult:
    """Outcome of a hypothesis test.

    Attributes
    ----------
    statistic : float
    pvalue : float
    df : int or None
        Degrees of freedom of the reference chi-square distribution, ``None``
        for standard-normal statistics.
    flags : tuple of str
        Warnings attached to the result, e.g. ``"non_psd"`` or ``"weak_instruments"``.
    details : dict
    """

    __test__ = False  # keep pytest from collecting this class

    statistic: float
    pvalue: float
    df: int | None = None
    flags: tuple = ()
    details: dict = field(default_factory=dict)


def _chi2(statistic, df, flags=(), **details):
    statistic = float(statistic)
    return TestResult(statistic, float(stats.chi2.sf(statistic, df)), int(df), tuple(flags), details)


def _pinv_quadratic(v, b, what):
    """``b' v^+ b`` with the pseudo-inverse; warns when ``v`` is singular."""
    v = (v + v.T) / 2.0
    eig = np.linalg.eigvalsh(v)
    scale = max(np.abs(eig).max(), np.finfo(float).tiny)
    if eig.min() <= 1e-12 * scale:
        warnings.warn(f"singular {what}; using generalized inverse", SingularMatrixWarning, stacklevel=3)
    return float(b @ np.linalg.pinv(v, hermitian=True) @ b), eig, scale


def wald_joint(result, names=None):
    """Wald test that the listed coefficients are jointly zero.

    By default every coefficient except the constant and year dummies is tested.
    """
    names = slope_names(list(result.params.index)) if names is None else list(names)
    if not names:
        raise ValidationError("no slope coefficients to test")
    b = result.params[names].to_numpy()
    v = result.cov.loc[names, names].to_numpy()
    w, _, _ = _pinv_quadratic(v, b, "coefficient covariance")
    return _chi2(w, len(names))


def hausman_test(fe, re):
    """Hausman test of fixed against random effects on the common slopes.

    A variance difference that is not positive semi-definite is inverted with
    the pseudo-inverse and the result carries the ``"non_psd"`` flag; the
    statistic is reported as computed, even if negative. Use unadjusted
    covariances for both models to obtain the classical form.
    """
    common = [n for n in slope_names(list(fe.params.index)) if n in re.params.index]
    if not common:
        raise ValidationError("no common regressors between the two models")
    d = fe.params[common].to_numpy() - re.params[common].to_numpy()
    v = fe.cov.loc[common, common].to_numpy() - re.cov.loc[common, common].to_numpy()
    if not np.any(d):
        return TestResult(0.0, 1.0, len(common))
    h, eig, scale = _pinv_quadratic(v, d, "variance difference")
    flags = ("non_psd",) if eig.min() < -1e-10 * scale else ()
    return _chi2(h, len(common), flags)


def _resid_frame(result):
    if result.resid is None:
        raise ValidationError("result carries no residuals")
    e = result.resid
    if not isinstance(e.index, pd.MultiIndex) or e.index.nlevels != 2:
        raise ValidationError("residuals need an (entity, time) index")
    return e.sort_index()


def breusch_pagan_lm(pooled, panel=None):
    """Breusch-Pagan Lagrange multiplier test for entity random effects.

    Uses pooled residuals; the unbalanced form reduces to
    ``NT / (2(T-1)) * (sum_i (sum_t e)^2 / sum e^2 - 1)^2`` when balanced.
    """
    e = _resid_frame(pooled)
    groups = e.index.get_level_values(0)
    sizes = e.groupby(level=0).size().to_numpy()
    if e.index.get_level_values(1).nunique() < 2 or not (sizes > 1).any():
        raise ValidationError("Breusch-Pagan LM needs more than one time period")
    n = len(e)
    sums = e.groupby(groups).sum().to_numpy()
    ratio = (sums @ sums) / float(e @ e)
    lm = n * n / (2.0 * float((sizes * (sizes - 1)).sum())) * (ratio - 1.0) ** 2
    return _chi2(lm, 1)


def _aux_nr2(target, x):
    """``n R^2`` of ``target`` regressed on ``x`` (which includes a constant)."""
    beta, _ = ols_fit(x, target)
    u = target - x @ beta
    tss = ((target - target.mean()) ** 2).sum()
    if tss <= 0:
        return 0.0
    return len(target) * (1.0 - (u @ u) / tss)


def heteroskedasticity_test(result, panel=None):
    """Koenker's studentized Breusch-Pagan test: ``n R^2`` of ``e^2`` on the regressors."""
    if result.design is None:
        raise ValidationError("result carries no design matrix")
    d = result.design
    cols = [c for c in d.columns if c != CONST]
    if not cols:
        raise ValidationError("constant-only model has no regressors to test against")
    e = result.resid.reindex(d.index).to_numpy()
    x = np.column_stack([np.ones(len(d)), d[cols].to_numpy()])
    return _chi2(_aux_nr2(e * e, x), len(cols))


def breusch_godfrey(result, panel=None, order=1):
    """Breusch-Godfrey LM test for serial correlation up to ``order``.

    Residuals are regressed on the original regressors and their own lags
    taken within each entity; lags before an entity's first period are zero.
    """
    if order < 1:
        raise ValidationError("order must be at least 1")
    if result.design is None:
        raise ValidationError("result carries no design matrix")
    d = result.design
    e = result.resid.reindex(d.index)
    n_periods = d.index.get_level_values(1).nunique()
    if order >= n_periods:
        raise ValidationError(f"order {order} must be smaller than the number of periods {n_periods}")
    groups = d.index.get_level_values(0)
    lags = [e.groupby(groups).shift(j).fillna(0.0).to_numpy() for j in range(1, order + 1)]
    cols = [c for c in d.columns if c != CONST]
    x = np.column_stack([np.ones(len(d)), d[cols].to_numpy()] + lags)
    return _chi2(_aux_nr2(e.to_numpy(), x), order)


def durbin_wu_hausman(panel, spec, suspect, instruments):
    """Control-function Durbin-Wu-Hausman test of regressor exogeneity.

    The first stage regresses ``suspect`` on the other regressors and the
    excluded ``instruments``; its residual is added to the structural
    equation and the squared t-statistic on that residual is the statistic.
    A first-stage F on the excluded instruments below 1 flags
    ``"weak_instruments"``.
    """
    instruments = list(instruments)
    if not instruments:
        raise ValidationError("at least one excluded instrument is required")
    if suspect in instruments:
        raise ValidationError(f"suspect {suspect!r} cannot instrument itself")
    if suspect not in spec.regressors:
        raise ValidationError(f"suspect {suspect!r} is not a regressor")
    frame = panel.indexed() if hasattr(panel, "indexed") else panel
    regs = list(spec.regressors)
    X, y = check_panel_xy(frame[regs + [c for c in instruments if c not in regs]], frame[spec.dependent])
    groups = X.index.get_level_values(0)
    others = [c for c in regs if c != suspect]
    z_full = build_design(X[others + instruments], add_const=True, year_dummies=spec.year_dummies)
    z_restr = build_design(X[others], add_const=True, year_dummies=spec.year_dummies)
    s = X[suspect].to_numpy()
    bf, _ = ols_fit(z_full.to_numpy(), s)
    v = s - z_full.to_numpy() @ bf
    br, _ = ols_fit(z_restr.to_numpy(), s)
    vr = s - z_restr.to_numpy() @ br
    q = len(instruments)
    dof1 = len(s) - z_full.shape[1]
    f_stat = ((vr @ vr - v @ v) / q) / ((v @ v) / dof1) if v @ v > 0 else np.inf
    flags = ("weak_instruments",) if f_stat < 1 else ()

    d = build_design(X[regs], add_const=True, year_dummies=spec.year_dummies)
    d["_fs_resid"] = v
    x = d.to_numpy()
    beta, xtx_inv = ols_fit(x, y.to_numpy())
    e = y.to_numpy() - x @ beta
    cov = ols_cov(x, e, xtx_inv, spec.cov_type, groups)
    t = beta[-1] / np.sqrt(cov[-1, -1])
    return _chi2(t * t, 1, flags, first_stage_f=float(f_stat))


__all__ = [
    "TestResult",
    "wald_joint",
    "hausman_test",
    "breusch_pagan_lm",
    "heteroskedasticity_test",
    "breusch_godfrey",
    "durbin_wu_hausman",
]
