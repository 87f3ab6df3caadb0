"""Command-line interface.

Exit codes: 0 success, 2 validation failure, 3 computation failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
import warnings

import pandas as pd

from . import __version__
from .exceptions import TradeNetError, ValidationError

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_COMPUTATION = 3

logger = logging.getLogger("tradenet")


def _add_common(p):
    p.add_argument("--seed", type=int, default=None, help="seed for any randomness (recorded in the manifest)")
    p.add_argument("--out-dir", default=None, help="output directory")
    p.add_argument("--filter", choices=("on", "off"), default=None, help="first-quartile edge filter")


def build_parser():
    parser = argparse.ArgumentParser(prog="tradenet", description="Trade-network indicators and panel estimation")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a config file and its inputs without computing")
    p.add_argument("config")
    _add_common(p)

    p = sub.add_parser("run", help="run the full pipeline")
    p.add_argument("config")
    _add_common(p)

    p = sub.add_parser("synth", help="generate a synthetic input dataset with a config file")
    _add_common(p)
    p.add_argument("--countries", type=int, default=20, help="number of countries (>= 4)")
    p.add_argument("--years", default="2000-2007", help="FIRST-LAST")
    p.add_argument("--hub", default=None, help="country code with the highest out-strength")
    p.add_argument("--incomplete", type=int, default=0, help="countries given a missing macro cell")
    p.add_argument("--panel-start", type=int, default=None, help="first panel year in the written config")

    p = sub.add_parser("centrality", help="centrality table for a single year")
    p.add_argument("--flows", required=True)
    p.add_argument("--year", type=int, required=True)
    p.add_argument("--countries", default=None, help="country universe file (CODE[,FIRST_YEAR] per line)")
    p.add_argument("--damping", type=float, default=0.85)
    p.add_argument("--pagerank-mode", choices=("weighted", "binary"), default="weighted")
    p.add_argument("--output", default="-", help="CSV path, '-' for stdout")
    _add_common(p)

    p = sub.add_parser("estimate", help="estimate one model on an existing panel CSV")
    p.add_argument("--panel", required=True, help="panel CSV with country and year columns")
    p.add_argument("--dependent", required=True)
    p.add_argument("--regressors", required=True, help="comma-separated")
    p.add_argument(
        "--estimator",
        choices=("pooled_ols", "fixed_effects", "random_effects", "system_gmm"),
        default="system_gmm",
    )
    p.add_argument("--endogenous", default="", help="comma-separated (system GMM)")
    p.add_argument("--predetermined", default="", help="comma-separated (system GMM)")
    p.add_argument("--cov-type", choices=("unadjusted", "robust", "clustered"), default="clustered")
    p.add_argument("--year-dummies", action="store_true")
    p.add_argument("--lag-min", type=int, default=2)
    p.add_argument("--lag-max", type=int, default=4)
    p.add_argument("--no-collapse", action="store_true", help="one instrument column per period and lag")
    p.add_argument("--steps", choices=("one", "two"), default="two")
    p.add_argument("--output", default="-", help="results path, '-' for stdout")
    _add_common(p)
    return parser


def _split(text):
    return tuple(p.strip() for p in text.split(",") if p.strip())


def _overrides(args):
    out = {}
    if args.out_dir is not None:
        out["out_dir"] = args.out_dir
    if args.seed is not None:
        out["seed"] = args.seed
    if args.filter is not None:
        out["filter"] = args.filter == "on"
    return out


def _emit(text, path):
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def cmd_validate(args):
    from .pipeline import PipelineConfig, stage_ingest

    cfg = PipelineConfig.from_ini(args.config, **_overrides(args)).validate()
    stage_ingest(cfg)
    print(f"ok: {args.config}")
    return EXIT_OK


def cmd_run(args):
    from .pipeline import PipelineConfig, run_pipeline

    cfg = PipelineConfig.from_ini(args.config, **_overrides(args))
    written = run_pipeline(cfg)
    print(f"wrote {len(written)} files to {cfg.out_dir}")
    return EXIT_OK


def cmd_synth(args):
    from .pipeline import _parse_range
    from .synthetic import SyntheticSpec, write_dataset

    first, last = _parse_range(args.years)
    spec = SyntheticSpec(
        n_countries=args.countries,
        first_year=first,
        last_year=last,
        seed=42 if args.seed is None else args.seed,
        hub=args.hub,
        n_incomplete=args.incomplete,
    )
    out = args.out_dir or "synthetic"
    paths = write_dataset(spec, out, panel_start=args.panel_start)
    print(f"wrote synthetic dataset to {out} (config: {paths['config']})")
    return EXIT_OK


def cmd_centrality(args):
    from .centrality import compute_all, records_frame
    from .countries import CountryUniverse
    from .pipeline import FLOAT_FORMAT
    from .trade_graph import build_yearly_graph, read_flows_csv

    if not 0 < args.damping < 1:
        raise ValidationError("damping must lie in (0, 1)")
    flows = read_flows_csv(args.flows)
    universe = CountryUniverse.from_file(args.countries) if args.countries else CountryUniverse.default()
    flows = flows[flows["year"] == args.year]
    graph = build_yearly_graph(flows, args.year, filter=args.filter != "off", universe=universe)
    frame = records_frame(compute_all(graph, args.damping, args.pagerank_mode))
    _emit(frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n"), args.output)
    return EXIT_OK


def cmd_estimate(args):
    from .econometrics import (
        GMMOptions,
        RegressionSpec,
        fixed_effects_within,
        pooled_ols,
        random_effects_gls,
        system_gmm,
    )
    from .pipeline import _gmm_footer, _static_footer, results_text

    try:
        frame = pd.read_csv(args.panel, dtype={"country": str})
    except (FileNotFoundError, pd.errors.ParserError) as exc:
        raise ValidationError(f"cannot read panel {args.panel}: {exc}") from exc
    if not {"country", "year"} <= set(frame.columns):
        raise ValidationError("panel needs country and year columns")
    dynamic = args.estimator == "system_gmm"
    spec = RegressionSpec(
        dependent=args.dependent,
        regressors=_split(args.regressors),
        include_lagged_dependent=dynamic,
        endogenous=_split(args.endogenous) if dynamic else (),
        predetermined=_split(args.predetermined) if dynamic else (),
        year_dummies=args.year_dummies,
        gmm_options=GMMOptions(
            lag_min=args.lag_min, lag_max=args.lag_max, collapse=not args.no_collapse, steps=args.steps
        ),
        cov_type=args.cov_type,
    )
    fn = {
        "pooled_ols": pooled_ols,
        "fixed_effects": fixed_effects_within,
        "random_effects": random_effects_gls,
        "system_gmm": system_gmm,
    }[args.estimator]
    result = fn(frame, spec)
    footer = _gmm_footer(result, spec) if dynamic else _static_footer(result, spec)
    _emit(results_text(result, footer), args.output)
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "run": cmd_run,
    "synth": cmd_synth,
    "centrality": cmd_centrality,
    "estimate": cmd_estimate,
}


def exit_code(exc):
    """Map an exception to the documented exit code."""
    cause = getattr(exc, "cause", exc)
    if isinstance(cause, ValidationError):
        return EXIT_VALIDATION
    return EXIT_COMPUTATION


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    with warnings.catch_warnings():
        if not args.verbose:
            warnings.simplefilter("ignore")
        try:
            return COMMANDS[args.command](args)
        except TradeNetError as exc:
            code = exit_code(exc)
            print(f"error: {exc}", file=sys.stderr)
            return code
        except (ValueError, ArithmeticError, RuntimeError, OSError) as exc:
            print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
            return EXIT_COMPUTATION


if __name__ == "__main__":
    sys.exit(main())
