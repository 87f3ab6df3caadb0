"""End-to-end pipeline: ingest, graphs, centralities, indices, panel, estimators, reports.

Every stage consumes only the outputs of earlier stages. Outputs are written
to a scratch directory and moved into place only after every stage has
succeeded, so a failed run leaves no partial artifacts behind.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import logging
import os
import platform
import shutil
import tempfile
import warnings
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import pandas as pd

from . import __version__
from .centrality import CentralityTransformer
from .countries import CountryUniverse
from .econometrics import (
    GMMOptions,
    RegressionSpec,
    breusch_godfrey,
    breusch_pagan_lm,
    build_external_instrument,
    durbin_wu_hausman,
    fixed_effects_within,
    hausman_test,
    heteroskedasticity_test,
    pooled_ols,
    random_effects_gls,
    system_gmm,
    wald_joint,
)
from .exceptions import DataWarning, EstimationError, TradeNetError, ValidationError
from .macro import LogTransformer, MembershipMatrix, build_covariates, read_macro_csv, read_tariffs_csv
from .panel import KEYS, PanelDataset, add_lags, assemble, correlation_matrix, descriptive_stats, rankings_frame
from .trade_graph import TradeGraphBuilder, evolution_series, read_flows_csv, stats_frame

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.12g"
MEASURES = ("s_in", "s_out", "pagerank", "betweenness", "rwb", "closeness", "clustering", "kcore")
ESTIMATORS = ("pooled_ols", "fixed_effects", "random_effects", "system_gmm", "system_gmm_iv")
DEFAULT_ESTIMATORS = ("pooled_ols", "fixed_effects", "random_effects", "system_gmm")
DEFAULT_REGRESSORS = ("rgdpc", "hc", "pop", "tc", "infra", "iqi", "rta", "fdi", "ofr", "crisis")
DEFAULT_ENDOGENOUS = {
    "s_in": ("rgdpc", "hc"),
    "s_out": ("rgdpc", "hc"),
    "pagerank": ("rgdpc",),
    "betweenness": ("rgdpc", "hc"),
    "rwb": ("rgdpc", "hc", "iqi"),
    "closeness": ("rgdpc", "hc", "infra"),
    "clustering": ("rgdpc", "iqi"),
    "kcore": ("rgdpc", "hc"),
}
STAGES = ("ingest", "graphs", "centralities", "indices", "panel", "estimators", "reports")

_KNOWN = {
    "data": {"flows", "macro", "memberships", "tariffs", "countries"},
    "network": {"filter", "quartile_mode", "pagerank_mode", "damping"},
    "panel": {"year_range", "lag_history", "min_coverage", "epsilon", "tc_mode", "ofr_mode"},
    "estimation": {
        "estimators", "measures", "regressors", "cov_type", "year_dummies", "lag_min", "lag_max",
        "collapse", "steps", "windmeijer", "diagnostics",
    },
    "output": {"dir", "rankings_k", "figure_countries", "figure_measures"},
    "run": {"seed"},
}
_MODEL_KEYS = {"endogenous", "predetermined", "instruments", "regressors"}


class StageError(TradeNetError):
    """A pipeline stage failed; ``cause`` holds the original exception."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage!r} failed: {cause}")


@dataclass(frozen=True)
class ModelBlock:
    endogenous: tuple = ()
    predetermined: tuple = ()
    instruments: tuple = ()
    regressors: tuple | None = None


@dataclass(frozen=True)
class PipelineConfig:
    """Validated pipeline settings. Relative paths resolve against the config file."""

    flows: str
    macro: str
    memberships: str
    tariffs: str
    year_range: tuple
    countries: str | None = None
    lag_history: int = 2
    filter: bool = True
    quartile_mode: str = "per_year"
    pagerank_mode: str = "weighted"
    damping: float = 0.85
    epsilon: float = 1e-6
    min_coverage: str = "full"
    tc_mode: str = "count"
    ofr_mode: str = "overlap"
    estimators: tuple = DEFAULT_ESTIMATORS
    measures: tuple = MEASURES
    regressors: tuple = DEFAULT_REGRESSORS
    cov_type: str = "clustered"
    year_dummies: bool = False
    gmm: GMMOptions = field(default_factory=GMMOptions)
    diagnostics: bool = True
    models: dict = field(default_factory=dict)
    out_dir: str = "out"
    rankings_k: int = 10
    figure_countries: tuple = ()
    figure_measures: tuple = MEASURES
    seed: int = 0

    @classmethod
    def from_ini(cls, path, **overrides):
        """Read an INI file. ``overrides`` replace fields after parsing."""
        parser = configparser.ConfigParser(interpolation=None)
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except FileNotFoundError as exc:
            raise ValidationError(f"config file not found: {path}") from exc
        except configparser.Error as exc:
            raise ValidationError(f"cannot parse config {path}: {exc}") from exc
        base = os.path.dirname(os.path.abspath(path))
        return cls.from_mapping({s: dict(parser[s]) for s in parser.sections()}, base, **overrides)

    @classmethod
    def from_mapping(cls, sections, base_dir=".", **overrides):
        for name, keys in sections.items():
            if name.startswith("model."):
                measure = name[len("model."):]
                if measure not in MEASURES:
                    raise ValidationError(f"unknown measure in section [{name}]")
                allowed = _MODEL_KEYS
            elif name in _KNOWN:
                allowed = _KNOWN[name]
            else:
                raise ValidationError(f"unknown config section [{name}]")
            unknown = set(keys) - allowed
            if unknown:
                raise ValidationError(f"unknown key(s) in [{name}]: {sorted(unknown)}")

        def get(section, key, default=None):
            return sections.get(section, {}).get(key, default)

        def path(key, required=True):
            value = get("data", key)
            if value is None:
                if required:
                    raise ValidationError(f"[data] {key} is required")
                return None
            return os.path.normpath(os.path.join(base_dir, value))

        kw = {
            "flows": path("flows"),
            "macro": path("macro"),
            "memberships": path("memberships"),
            "tariffs": path("tariffs"),
            "countries": path("countries", required=False),
        }
        yr = get("panel", "year_range")
        if yr is None:
            raise ValidationError("[panel] year_range is required")
        kw["year_range"] = _parse_range(yr)
        conv = {
            ("network", "filter"): ("filter", _parse_bool),
            ("network", "quartile_mode"): ("quartile_mode", str),
            ("network", "pagerank_mode"): ("pagerank_mode", str),
            ("network", "damping"): ("damping", float),
            ("panel", "lag_history"): ("lag_history", int),
            ("panel", "min_coverage"): ("min_coverage", str),
            ("panel", "epsilon"): ("epsilon", float),
            ("panel", "tc_mode"): ("tc_mode", str),
            ("panel", "ofr_mode"): ("ofr_mode", str),
            ("estimation", "estimators"): ("estimators", _parse_list),
            ("estimation", "measures"): ("measures", _parse_list),
            ("estimation", "regressors"): ("regressors", _parse_list),
            ("estimation", "cov_type"): ("cov_type", str),
            ("estimation", "year_dummies"): ("year_dummies", _parse_bool),
            ("estimation", "diagnostics"): ("diagnostics", _parse_bool),
            ("output", "rankings_k"): ("rankings_k", int),
            ("output", "figure_countries"): ("figure_countries", _parse_list),
            ("output", "figure_measures"): ("figure_measures", _parse_list),
            ("run", "seed"): ("seed", int),
        }
        try:
            for (section, key), (name, fn) in conv.items():
                value = get(section, key)
                if value is not None:
                    kw[name] = fn(value)
            out = get("output", "dir")
            kw["out_dir"] = os.path.normpath(os.path.join(base_dir, out if out is not None else "out"))
            gmm_kw = {}
            for key, fn in (("lag_min", int), ("lag_max", int), ("collapse", _parse_bool), ("steps", str), ("windmeijer", _parse_bool)):
                value = get("estimation", key)
                if value is not None:
                    gmm_kw[key] = fn(value)
            kw["gmm"] = GMMOptions(**gmm_kw)
        except ValueError as exc:
            raise ValidationError(f"invalid config value: {exc}") from exc
        models = {}
        for name, keys in sections.items():
            if name.startswith("model."):
                block = {k: _parse_list(v) for k, v in keys.items()}
                models[name[len("model."):]] = ModelBlock(**block)
        kw["models"] = models
        kw.update(overrides)
        return cls(**kw)

    def validate(self):
        """Check settings and that every referenced file exists."""
        first, last = self.year_range
        if last < first:
            raise ValidationError("year_range is empty")
        if not 0 < self.damping < 1:
            raise ValidationError("damping must lie in (0, 1)")
        if self.lag_history < 0:
            raise ValidationError("lag_history must be non-negative")
        if self.epsilon <= 0:
            raise ValidationError("epsilon must be positive")
        choices = {
            "quartile_mode": ("per_year", "pooled"),
            "pagerank_mode": ("weighted", "binary"),
            "min_coverage": ("full", "none"),
            "tc_mode": ("count", "share"),
            "ofr_mode": ("overlap", "share"),
            "cov_type": ("unadjusted", "robust", "clustered"),
        }
        for name, allowed in choices.items():
            if getattr(self, name) not in allowed:
                raise ValidationError(f"{name} must be one of {allowed}, got {getattr(self, name)!r}")
        for est in self.estimators:
            if est not in ESTIMATORS:
                raise ValidationError(f"unknown estimator {est!r}")
        for m in tuple(self.measures) + tuple(self.figure_measures):
            if m not in MEASURES:
                raise ValidationError(f"unknown measure {m!r}")
        if self.rankings_k < 1:
            raise ValidationError("rankings_k must be positive")
        for key in ("flows", "macro", "memberships", "tariffs", "countries"):
            p = getattr(self, key)
            if p is not None and not os.path.isfile(p):
                raise ValidationError(f"{key} file not found: {p}")
        for m in self.measures:
            self.spec_for(m, "system_gmm")
        return self

    def spec_for(self, measure, estimator):
        block = self.models.get(measure, ModelBlock())
        regressors = tuple(block.regressors) if block.regressors is not None else tuple(self.regressors)
        endogenous = tuple(block.endogenous) or tuple(e for e in DEFAULT_ENDOGENOUS[measure] if e in regressors)
        dynamic = estimator.startswith("system_gmm")
        instruments = tuple(block.instruments)
        if estimator == "system_gmm_iv":
            instruments += tuple(f"iv_{e}" for e in endogenous)
        return RegressionSpec(
            dependent=measure,
            regressors=regressors,
            include_lagged_dependent=dynamic,
            endogenous=endogenous if dynamic else (),
            predetermined=tuple(block.predetermined) if dynamic else (),
            instruments=instruments if dynamic else (),
            year_dummies=self.year_dummies,
            gmm_options=self.gmm,
            cov_type=self.cov_type,
        )

    def hash_payload(self):
        """Config contents with input paths replaced by file digests; output location excluded."""
        d = asdict(self)
        d.pop("out_dir")
        for key in ("flows", "macro", "memberships", "tariffs", "countries"):
            if d[key] is not None:
                d[key] = _file_digest(d[key])
        d["models"] = {k: asdict(v) for k, v in sorted(self.models.items())}
        return d


def _parse_bool(value):
    v = str(value).strip().lower()
    if v in ("1", "on", "true", "yes"):
        return True
    if v in ("0", "off", "false", "no"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def _parse_list(value):
    return tuple(p.strip() for p in str(value).replace(";", ",").split(",") if p.strip())


def _parse_range(value):
    text = str(value).strip()
    sep = "-" if "-" in text[1:] else ","
    parts = [p.strip() for p in text.split(sep)]
    try:
        if len(parts) == 1:
            return int(parts[0]), int(parts[0])
        if len(parts) == 2:
            return int(parts[0]), int(parts[1])
    except ValueError:
        pass
    raise ValidationError(f"invalid year_range {value!r}; expected FIRST-LAST")


def _file_digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_csv(frame, path):
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "" if not np.isfinite(value) else FLOAT_FORMAT % value
    if isinstance(value, (tuple, list)):
        return ";".join(str(v) for v in value)
    return str(value)


def results_text(result, footer):
    """Coefficient table, a blank line, then ``diagnostic,value`` rows."""
    table = result.summary_frame()
    lines = ["term,coef,std_err,stat,pvalue"]
    for term, row in table.iterrows():
        lines.append(",".join([str(term)] + [_fmt(row[c]) for c in ("coef", "std_err", "stat", "pvalue")]))
    lines.append("")
    lines.append("diagnostic,value")
    for key, value in footer.items():
        lines.append(f"{key},{_fmt(value)}")
    return "\n".join(lines) + "\n"


def read_results_csv(path):
    """Parse a results file into ``(coefficients DataFrame, diagnostics dict of str)``."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    head, _, tail = text.partition("\n\n")
    from io import StringIO

    coefs = pd.read_csv(StringIO(head), index_col=0)
    diag = {}
    for line in tail.strip().splitlines()[1:]:
        key, _, value = line.partition(",")
        diag[key] = value
    return coefs, diag


# ---------------------------------------------------------------------------
# Stages


@dataclass
class Inputs:
    flows: pd.DataFrame
    macro: pd.DataFrame
    memberships: MembershipMatrix
    tariffs: pd.DataFrame
    universe: CountryUniverse


def stage_ingest(cfg):
    flows = read_flows_csv(cfg.flows)
    universe = CountryUniverse.from_file(cfg.countries) if cfg.countries else CountryUniverse.default()
    first = cfg.year_range[0] - cfg.lag_history
    flows = flows[(flows["year"] >= first) & (flows["year"] <= cfg.year_range[1])]
    missing = sorted(set(range(cfg.year_range[0], cfg.year_range[1] + 1)) - set(flows["year"].unique()))
    if missing:
        raise ValidationError(f"no flows for panel year(s) {missing}")
    return Inputs(
        flows=flows.reset_index(drop=True),
        macro=read_macro_csv(cfg.macro),
        memberships=MembershipMatrix.from_csv(cfg.memberships),
        tariffs=read_tariffs_csv(cfg.tariffs),
        universe=universe,
    )


def stage_graphs(cfg, inputs):
    builder = TradeGraphBuilder(filter=cfg.filter, quartile_mode=cfg.quartile_mode, universe=inputs.universe)
    return builder.fit(inputs.flows).transform(inputs.flows)


def stage_centralities(cfg, graphs):
    return CentralityTransformer(damping=cfg.damping, pagerank_mode=cfg.pagerank_mode).fit_transform(graphs)


def stage_indices(cfg, inputs):
    return build_covariates(inputs.macro, inputs.memberships, inputs.tariffs, cfg.tc_mode, cfg.ofr_mode)


@dataclass
class PanelBundle:
    raw: PanelDataset
    transformed: PanelDataset
    history: pd.DataFrame


def stage_panel(cfg, centrality, covariates):
    first, last = cfg.year_range
    raw = assemble(centrality, covariates, (first, last), cfg.min_coverage)
    logger_ = LogTransformer(epsilon=cfg.epsilon, keys=tuple(KEYS))
    transformed = raw.replace(logger_.fit_transform(raw.frame))
    # earlier years supply lags only
    hist = centrality.merge(covariates, on=KEYS, how="inner")
    hist = hist[(hist["year"] < first) & (hist["year"] >= first - cfg.lag_history)]
    hist = hist[hist["country"].isin(raw.countries)].dropna()
    hist = logger_.transform(hist[list(raw.frame.columns)]) if len(hist) else hist
    return PanelBundle(raw=raw, transformed=transformed, history=hist.reset_index(drop=True))


def _drop_constant(spec, frame):
    """Drop regressors constant over the whole panel (collinear with the intercept)."""
    keep = tuple(r for r in spec.regressors if frame[r].max() > frame[r].min())
    dropped = tuple(r for r in spec.regressors if r not in keep)
    if not dropped:
        return spec, ()
    return (
        replace(
            spec,
            regressors=keep,
            endogenous=tuple(e for e in spec.endogenous if e in keep),
            predetermined=tuple(e for e in spec.predetermined if e in keep),
        ),
        dropped,
    )


def _fe_spec(spec, frame):
    """Drop regressors without within-country variation (absorbed by the effects)."""
    g = frame.groupby("country")
    varying = tuple(r for r in spec.regressors if (g[r].max() - g[r].min()).max() > 0)
    dropped = tuple(r for r in spec.regressors if r not in varying)
    return replace(spec, regressors=varying), dropped


def _static_footer(result, spec, dropped=()):
    footer = {
        "estimator": result.estimator,
        "cov_type": result.cov_type,
        "r2_adjusted": result.r2_adjusted,
        "wald_p": wald_joint(result).pvalue,
        "n_countries": result.n_entities,
        "obs": result.n_obs,
    }
    if dropped:
        footer["dropped"] = dropped
    return footer


def _gmm_footer(result, spec, dropped=()):
    d = result.diagnostics
    footer = {
        "estimator": result.estimator,
        "cov_type": result.cov_type,
        "hansen_p": d["hansen_p"],
        "ar1_p": d["ar1_p"],
        "ar2_p": d["ar2_p"],
        "endogenous": spec.endogenous,
        "instrument_count": d["instrument_count"],
        "wald_p": d.get("wald_p", np.nan),
        "n_countries": result.n_entities,
        "obs": result.n_obs,
    }
    if dropped:
        footer["dropped"] = dropped
    return footer


def _with_external_instruments(inputs, frame, endogenous):
    out = frame.copy()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DataWarning)
        for e in endogenous:
            out[f"iv_{e}"] = build_external_instrument(inputs.flows, out, e).to_numpy()
    return out


@dataclass
class EstimationOutput:
    results: dict  # (measure, estimator) -> text
    diagnostics: pd.DataFrame
    endogeneity: pd.DataFrame


def stage_estimators(cfg, bundle, inputs):
    panel = bundle.transformed
    frame = panel.frame
    results = {}
    diag_rows, endo_rows = [], []
    for measure in cfg.measures:
        for est in cfg.estimators:
            spec, dropped = _drop_constant(cfg.spec_for(measure, est), frame)
            if est == "pooled_ols":
                res = pooled_ols(panel, spec)
                footer = _static_footer(res, spec, dropped)
            elif est == "fixed_effects":
                fe_spec, absorbed = _fe_spec(spec, frame)
                res = fixed_effects_within(panel, fe_spec)
                footer = _static_footer(res, fe_spec, dropped + absorbed)
            elif est == "random_effects":
                res = random_effects_gls(panel, spec)
                footer = _static_footer(res, spec, dropped)
            else:
                data, hist = frame, bundle.history
                if est == "system_gmm_iv":
                    data = _with_external_instruments(inputs, frame, spec.endogenous)
                    hist = _with_external_instruments(inputs, hist, spec.endogenous) if len(hist) else hist
                res = system_gmm(data, spec, history=hist if len(hist) else None)
                footer = _gmm_footer(res, spec, dropped)
            results[(measure, est)] = results_text(res, footer)
        if cfg.diagnostics:
            d_rows, e_rows = _diagnostic_battery(cfg, bundle, measure)
            diag_rows.extend(d_rows)
            endo_rows.extend(e_rows)
    diagnostics = pd.DataFrame(diag_rows, columns=["measure", "test", "statistic", "df", "pvalue", "flags"])
    endogeneity = pd.DataFrame(
        endo_rows, columns=["measure", "variable", "statistic", "pvalue", "first_stage_f", "flags"]
    )
    return EstimationOutput(results, diagnostics, endogeneity)


def _test_row(measure, name, t):
    return {
        "measure": measure,
        "test": name,
        "statistic": t.statistic,
        "df": t.df,
        "pvalue": t.pvalue,
        "flags": ";".join(t.flags),
    }


def _diagnostic_battery(cfg, bundle, measure):
    panel = bundle.transformed
    spec, _ = _drop_constant(replace(cfg.spec_for(measure, "pooled_ols"), cov_type="unadjusted"), panel.frame)
    pooled = pooled_ols(panel, spec)
    fe_spec, _ = _fe_spec(spec, panel.frame)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        fe = fixed_effects_within(panel, fe_spec)
        re = random_effects_gls(panel, replace(spec, regressors=fe_spec.regressors))
        rows = [
            _test_row(measure, "hausman", hausman_test(fe, re)),
            _test_row(measure, "breusch_pagan_lm", breusch_pagan_lm(pooled)),
            _test_row(measure, "heteroskedasticity", heteroskedasticity_test(pooled)),
        ]
        if panel.n_years > 1:
            rows.append(_test_row(measure, "breusch_godfrey", breusch_godfrey(pooled, order=1)))

    # endogeneity of each time-varying regressor, instrumented by its second lag
    lagged = add_lags(panel, list(fe_spec.regressors), 2, history=bundle.history) if panel.n_years > 2 else None
    endo = []
    if lagged is not None:
        for var in fe_spec.regressors:
            if var == "crisis":
                continue
            inst = f"L2.{var}"
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                try:
                    t = durbin_wu_hausman(lagged, replace(spec, cov_type=cfg.cov_type), var, [inst])
                except (EstimationError, ValidationError, np.linalg.LinAlgError) as exc:
                    logger.info("endogeneity test for %s/%s skipped: %s", measure, var, exc)
                    continue
            endo.append(
                {
                    "measure": measure,
                    "variable": var,
                    "statistic": t.statistic,
                    "pvalue": t.pvalue,
                    "first_stage_f": t.details.get("first_stage_f", np.nan),
                    "flags": ";".join(t.flags),
                }
            )
    return rows, endo


def emit_figure_series(records, measures=MEASURES, countries=()):
    """Long ``measure,country,year,value`` table for plotting.

    An empty ``countries`` selects every country; unknown codes are skipped
    with a warning.
    """
    frame = records if isinstance(records, pd.DataFrame) else pd.DataFrame([asdict(r) for r in records])
    known = set(frame["country"])
    selected = list(countries)
    unknown = [c for c in selected if c not in known]
    if unknown:
        warnings.warn(f"unknown country code(s) skipped: {', '.join(unknown)}", DataWarning, stacklevel=2)
    keep = [c for c in selected if c in known]
    if selected:
        frame = frame[frame["country"].isin(keep)]
    parts = []
    for m in measures:
        part = frame[["country", "year", m]].rename(columns={m: "value"})
        part.insert(0, "measure", m)
        parts.append(part)
    if not parts:
        return pd.DataFrame(columns=["measure", "country", "year", "value"])
    out = pd.concat(parts, ignore_index=True)
    out["value"] = out["value"].astype(float)
    return out.sort_values(["measure", "country", "year"], kind="mergesort").reset_index(drop=True)


def stage_reports(cfg, graphs, centrality, bundle, estimation, tmp):
    written = []

    def put_csv(name, frame):
        write_csv(frame, os.path.join(tmp, name))
        written.append(name)

    def put_text(name, text):
        with open(os.path.join(tmp, name), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        written.append(name)

    lagged = add_lags(bundle.transformed, list(MEASURES), 1, history=bundle.history) if bundle.transformed.n_years > 1 else bundle.transformed
    put_csv("panel.csv", lagged.frame)
    for yr in sorted(centrality["year"].unique()):
        put_csv(f"centrality_{int(yr)}.csv", centrality[centrality["year"] == yr])
    put_csv("evolution.csv", stats_frame(evolution_series(graphs)))
    for m in MEASURES:
        put_csv(f"rankings_{m}.csv", rankings_frame(centrality, m, cfg.rankings_k))
    raw = bundle.raw.frame
    corr = correlation_matrix(raw, list(MEASURES))
    corr.insert(0, "variable", corr.index)
    put_csv("corr.csv", corr)
    desc_vars = [c for c in raw.columns if c not in KEYS]
    put_csv("descriptives.csv", descriptive_stats(raw, desc_vars))
    with warnings.catch_warnings():
        warnings.simplefilter("always", DataWarning)
        series = emit_figure_series(centrality, cfg.figure_measures, cfg.figure_countries)
    put_csv("figure_series.csv", series)
    for (measure, est), text in sorted(estimation.results.items()):
        put_text(f"results_{measure}_{est}.csv", text)
    if cfg.diagnostics:
        put_csv("diagnostics.csv", estimation.diagnostics)
        put_csv("endogeneity.csv", estimation.endogeneity)
    return written


def _manifest(cfg, tmp, written):
    payload = cfg.hash_payload()
    canonical = json.dumps(payload, sort_keys=True, default=list).encode("utf-8")
    import scipy
    import sklearn

    manifest = {
        "config_sha256": hashlib.sha256(canonical).hexdigest(),
        "inputs": {k: payload[k] for k in ("flows", "macro", "memberships", "tariffs", "countries")},
        "versions": {
            "tradenet": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "pandas": pd.__version__,
            "scipy": scipy.__version__,
            "scikit-learn": sklearn.__version__,
        },
        "outputs": {name: _file_digest(os.path.join(tmp, name)) for name in sorted(written)},
    }
    return json.dumps(manifest, sort_keys=True, indent=2) + "\n"


def run_pipeline(cfg, out_dir=None):
    """Run every stage and write the artifact set.

    Returns
    -------
    list of str
        Names of the written files, ``manifest.json`` last.

    Raises
    ------
    StageError
        Wrapping the first failure, with the stage name.
    """
    out_dir = os.path.abspath(out_dir or cfg.out_dir)
    stage = "ingest"
    try:
        cfg.validate()
    except TradeNetError as exc:
        raise StageError("validate", exc) from exc
    parent = os.path.dirname(out_dir)
    os.makedirs(parent, exist_ok=True)
    tmp = tempfile.mkdtemp(prefix=".tradenet-", dir=parent)
    try:
        inputs = stage_ingest(cfg)
        stage = "graphs"
        graphs = stage_graphs(cfg, inputs)
        stage = "centralities"
        centrality = stage_centralities(cfg, graphs)
        stage = "indices"
        covariates = stage_indices(cfg, inputs)
        stage = "panel"
        bundle = stage_panel(cfg, centrality, covariates)
        stage = "estimators"
        estimation = stage_estimators(cfg, bundle, inputs)
        stage = "reports"
        written = stage_reports(cfg, graphs, centrality, bundle, estimation, tmp)
        with open(os.path.join(tmp, "manifest.json"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(_manifest(cfg, tmp, written))
        written.append("manifest.json")
        os.makedirs(out_dir, exist_ok=True)
        for name in written:
            os.replace(os.path.join(tmp, name), os.path.join(out_dir, name))
    except Exception as exc:
        if isinstance(exc, StageError):
            raise
        raise StageError(stage, exc) from exc
    finally:
        shutil.rmtree(tmp, ignore_errors=True)
    logger.info("wrote %d files to %s", len(written), out_dir)
    return written
