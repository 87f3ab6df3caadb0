import warnings

import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_allclose
from scipy import stats

from dgps import bp_lm_dgp, dwh_dgp, hausman_dgp, hetero_dgp, serial_dgp
from tradenet.econometrics import (
    FixedEffects,
    PooledOLS,
    RandomEffects,
    RegressionSpec,
    breusch_godfrey,
    breusch_pagan_lm,
    durbin_wu_hausman,
    hausman_test,
    heteroskedasticity_test,
    wald_joint,
)
from tradenet.exceptions import SingularMatrixWarning, ValidationError


def pvalues(fn, seeds):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return np.array([fn(np.random.default_rng(s)) for s in seeds])


def hausman_p(correlated):
    def f(rng):
        X, y, _ = hausman_dgp(rng, correlated)
        fe = FixedEffects(cov_type="unadjusted").fit(X, y).result_
        re = RandomEffects(cov_type="unadjusted").fit(X, y).result_
        return hausman_test(fe, re).pvalue
    return f


def bp_lm_p(effects):
    return lambda rng: breusch_pagan_lm(PooledOLS().fit(*bp_lm_dgp(rng, effects)[:2]).result_).pvalue


def hetero_p(hetero):
    return lambda rng: heteroskedasticity_test(PooledOLS().fit(*hetero_dgp(rng, hetero)[:2]).result_).pvalue


def bg_p(rho):
    return lambda rng: breusch_godfrey(PooledOLS().fit(*serial_dgp(rng, rho)[:2]).result_, order=1).pvalue


def dwh_p(endogenous):
    def f(rng):
        X, y, extra = dwh_dgp(rng, endogenous)
        frame = X.join(extra).assign(y=y)
        return durbin_wu_hausman(frame, RegressionSpec("y", ("x0", "x1"), cov_type="robust"), "x0", ["z"]).pvalue
    return f


@pytest.mark.parametrize(
    "null, alternative",
    [
        (hausman_p(False), hausman_p(True)),
        (bp_lm_p(False), bp_lm_p(True)),
        (hetero_p(False), hetero_p(True)),
        (bg_p(0.0), bg_p(0.8)),
        (dwh_p(False), dwh_p(True)),
    ],
    ids=["hausman", "breusch_pagan_lm", "heteroskedasticity", "breusch_godfrey", "durbin_wu_hausman"],
)
def test_power(null, alternative):
    # size over 200 seeds is checked in the acceptance suite
    seeds = range(50)
    assert (pvalues(alternative, seeds) < 0.05).mean() >= 0.9
    assert (pvalues(null, seeds) < 0.05).mean() < (pvalues(alternative, seeds) < 0.05).mean()


@pytest.mark.slow
def test_hausman_size_1000_seeds():
    p = pvalues(hausman_p(False), range(1000))
    assert 0.03 <= (p < 0.05).mean() <= 0.09


def test_bp_lm_null_pvalues_uniform():
    p = pvalues(bp_lm_p(False), range(200))
    assert stats.kstest(p, "uniform").pvalue > 0.01


def test_bp_lm_strong_effects():
    assert bp_lm_p(True)(np.random.default_rng(0)) < 0.01


@pytest.mark.slow
def test_heteroskedasticity_500_seeds():
    assert (pvalues(hetero_p(False), range(500)) < 0.05).mean() <= 0.08
    assert (pvalues(hetero_p(True), range(500)) < 0.05).mean() >= 0.9


def test_hausman_identical_estimates():
    X, y, _ = hausman_dgp(np.random.default_rng(1), False)
    fe = FixedEffects(cov_type="unadjusted").fit(X, y).result_
    h = hausman_test(fe, fe)
    assert (h.statistic, h.pvalue) == (0.0, 1.0)


def test_hausman_non_psd_is_flagged_not_clamped():
    X, y, _ = hausman_dgp(np.random.default_rng(2), False)
    fe = FixedEffects(cov_type="unadjusted").fit(X, y).result_
    re = RandomEffects(cov_type="unadjusted").fit(X, y).result_
    # swap the roles so the variance difference is negative definite
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SingularMatrixWarning)
        h = hausman_test(re, fe)
    assert "non_psd" in h.flags
    assert h.statistic < 0


def test_hausman_matches_direct_formula():
    X, y, _ = hausman_dgp(np.random.default_rng(3), True)
    fe = FixedEffects(cov_type="unadjusted").fit(X, y).result_
    re = RandomEffects(cov_type="unadjusted").fit(X, y).result_
    names = ["x0", "x1"]
    d = (fe.params[names] - re.params[names]).to_numpy()
    v = (fe.cov.loc[names, names] - re.cov.loc[names, names]).to_numpy()
    h = hausman_test(fe, re)
    assert_allclose(h.statistic, d @ np.linalg.solve(v, d), rtol=1e-10)
    assert h.df == 2 and h.flags == ()


def test_bp_lm_balanced_formula():
    X, y, _ = bp_lm_dgp(np.random.default_rng(4), True)
    res = PooledOLS().fit(X, y).result_
    e = res.resid.to_numpy().reshape(50, 5)
    n, t = e.shape
    lm = n * t / (2 * (t - 1)) * ((e.sum(axis=1) ** 2).sum() / (e**2).sum() - 1) ** 2
    assert_allclose(breusch_pagan_lm(res).statistic, lm, rtol=1e-12)


def test_bp_lm_single_period_raises():
    X, y, _ = bp_lm_dgp(np.random.default_rng(5), False, t_n=1)
    with pytest.raises(ValidationError):
        breusch_pagan_lm(PooledOLS().fit(X, y).result_)


def test_heteroskedasticity_constant_only_raises():
    X, y, _ = hetero_dgp(np.random.default_rng(6), False)
    res = PooledOLS().fit(X[[]], y).result_
    with pytest.raises(ValidationError):
        heteroskedasticity_test(res)


def test_heteroskedasticity_matches_auxiliary_regression():
    X, y, _ = hetero_dgp(np.random.default_rng(7), True)
    res = PooledOLS().fit(X, y).result_
    e2 = res.resid.to_numpy() ** 2
    x = np.column_stack([np.ones(len(X)), X.to_numpy()])
    fitted = x @ np.linalg.lstsq(x, e2, rcond=None)[0]
    r2 = 1 - ((e2 - fitted) ** 2).sum() / ((e2 - e2.mean()) ** 2).sum()
    assert_allclose(heteroskedasticity_test(res).statistic, len(e2) * r2, rtol=1e-10)


def test_breusch_godfrey_errors():
    X, y, _ = serial_dgp(np.random.default_rng(8), 0.0)
    res = PooledOLS().fit(X, y).result_
    with pytest.raises(ValidationError):
        breusch_godfrey(res, order=0)
    with pytest.raises(ValidationError):
        breusch_godfrey(res, order=6)
    assert breusch_godfrey(res, order=2).df == 2


def test_dwh_errors_and_weak_flag():
    X, y, extra = dwh_dgp(np.random.default_rng(9), False)
    frame = X.join(extra).assign(y=y)
    spec = RegressionSpec("y", ("x0", "x1"))
    with pytest.raises(ValidationError):
        durbin_wu_hausman(frame, spec, "x0", ["x0"])
    with pytest.raises(ValidationError):
        durbin_wu_hausman(frame, spec, "x0", [])
    # an instrument orthogonal to the suspect has first-stage F of zero
    rng = np.random.default_rng(10)
    noise = rng.normal(size=len(frame))
    basis = np.column_stack([np.ones(len(frame)), frame["x0"], frame["x1"]])
    frame["noise"] = noise - basis @ np.linalg.lstsq(basis, noise, rcond=None)[0]
    weak = durbin_wu_hausman(frame, spec, "x0", ["noise"])
    assert weak.details["first_stage_f"] < 1e-10 and "weak_instruments" in weak.flags
    strong = durbin_wu_hausman(frame, spec, "x0", ["z"])
    assert strong.details["first_stage_f"] > 10 and "weak_instruments" not in strong.flags


def test_wald_scalar_identity_and_power():
    X, y, _ = bp_lm_dgp(np.random.default_rng(11), False)
    res = PooledOLS(cov_type="robust").fit(X, y).result_
    w = wald_joint(res)
    assert_allclose(w.statistic, (res.params["x0"] / res.std_errors["x0"]) ** 2, rtol=1e-12)
    assert w.pvalue < 1e-3


def test_wald_null_rejection_rate():
    def f(rng):
        x = rng.normal(size=(200, 2))
        idx = pd.MultiIndex.from_product([range(40), range(5)])
        X = pd.DataFrame(x, index=idx, columns=["a", "b"])
        y = pd.Series(1.0 + rng.normal(size=200), index=idx)
        return wald_joint(PooledOLS(cov_type="robust").fit(X, y).result_).pvalue
    assert (pvalues(f, range(200)) < 0.05).mean() <= 0.1


def test_wald_singular_covariance_warns():
    X, y, _ = hetero_dgp(np.random.default_rng(12), False)
    res = PooledOLS().fit(X, y).result_
    res.cov.loc[:, :] = 0.0
    res.cov.loc["x0", "x0"] = 1.0
    res.params["x1"] = 0.0
    with pytest.warns(SingularMatrixWarning):
        w = wald_joint(res, ["x0", "x1"])
    assert_allclose(w.statistic, res.params["x0"] ** 2)
