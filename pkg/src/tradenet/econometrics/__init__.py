"""Panel estimators and specification tests."""

from ._base import CONST, GMMOptions, RegressionResult, RegressionSpec
from .api import fixed_effects_within, pooled_ols, random_effects_gls, system_gmm
from .diagnostics import (
    TestResult,
    breusch_godfrey,
    breusch_pagan_lm,
    durbin_wu_hausman,
    hausman_test,
    heteroskedasticity_test,
    wald_joint,
)
from .gmm import SystemGMM, arellano_bond_ar, hansen_j
from .instruments import build_external_instrument, export_intensity
from .static import FixedEffects, PooledOLS, RandomEffects

__all__ = [
    "CONST",
    "GMMOptions",
    "RegressionResult",
    "RegressionSpec",
    "PooledOLS",
    "FixedEffects",
    "RandomEffects",
    "SystemGMM",
    "pooled_ols",
    "fixed_effects_within",
    "random_effects_gls",
    "system_gmm",
    "TestResult",
    "wald_joint",
    "hausman_test",
    "breusch_pagan_lm",
    "heteroskedasticity_test",
    "breusch_godfrey",
    "durbin_wu_hausman",
    "hansen_j",
    "arellano_bond_ar",
    "export_intensity",
    "build_external_instrument",
]
