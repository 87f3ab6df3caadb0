"""Seeded generator of a complete synthetic input dataset.

Flows follow a gravity pattern, value proportional to the product of the two
GDPs over distance with lognormal noise, on a link structure that is mostly
persistent across years. One designated hub country exports more than any
other country to every partner, so it has the highest out-strength in every
year whether or not the quartile filter is applied.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .countries import AFRICAN_COUNTRIES, FIRST_YEAR, RECS
from .exceptions import ValidationError
from .macro import INFRA_COLUMNS, MACRO_COLUMNS, WGI_COLUMNS

FLOAT_FORMAT = "%.12g"


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of the synthetic dataset.

    Parameters
    ----------
    n_countries : int
        At least 4. Up to 54 the African country codes are used in sorted
        order; beyond that generated codes are appended.
    first_year, last_year : int
    seed : int
    hub : str, optional
        Country with the highest out-strength. Defaults to the first code.
    link_rate : float
        Approximate share of ordered country pairs that trade.
    churn : float
        Yearly probability that a pair's trade status is redrawn.
    noise_sd : float
        Standard deviation of the lognormal flow noise.
    growth_mean, growth_sd : float
        Drift and volatility of log real GDP per capita.
    n_incomplete : int
        Countries given one missing macro cell, so they drop out of a
        fully-covered panel.
    respect_first_year : bool
        Keep countries absent before their first year (South Sudan before 2012).
    """

    n_countries: int = 20
    first_year: int = 2000
    last_year: int = 2007
    seed: int = 42
    hub: str | None = None
    link_rate: float = 0.55
    churn: float = 0.05
    noise_sd: float = 0.5
    growth_mean: float = 0.02
    growth_sd: float = 0.03
    n_incomplete: int = 0
    respect_first_year: bool = True

    def __post_init__(self):
        if self.n_countries < 4:
            raise ValidationError("n_countries must be at least 4")
        if self.last_year < self.first_year:
            raise ValidationError("last_year must not precede first_year")
        if not 0 < self.link_rate <= 1:
            raise ValidationError("link_rate must lie in (0, 1]")
        if not 0 <= self.churn <= 1:
            raise ValidationError("churn must lie in [0, 1]")
        if not 0 <= self.n_incomplete < self.n_countries:
            raise ValidationError("n_incomplete must lie in [0, n_countries)")
        if self.hub is not None and self.hub not in self.codes():
            raise ValidationError(f"hub {self.hub!r} is not among the generated countries")

    def codes(self):
        base = sorted(AFRICAN_COUNTRIES)
        if self.n_countries <= len(base):
            return base[: self.n_countries]
        extra = []
        for a in "XYZ":
            for b in "ABCDEFGHIJKLMNOPQRSTUVWXYZ":
                for c in "ABCDEFGHIJKLMNOPQRSTUVWXYZ":
                    extra.append(a + b + c)
        return sorted(base + extra[: self.n_countries - len(base)])

    @property
    def years(self):
        return list(range(self.first_year, self.last_year + 1))


def _first_years(spec, codes):
    if not spec.respect_first_year:
        return {}
    return {c: y for c, y in FIRST_YEAR.items() if c in codes and y > spec.first_year}


def generate_synthetic(spec):
    """Generate flows, macro, membership and tariff tables.

    Returns
    -------
    dict of DataFrame
        Keys ``flows``, ``macro``, ``memberships``, ``tariffs`` and
        ``countries`` (the universe: ``code`` and optional ``first_year``).
    """
    rng = np.random.default_rng(spec.seed)
    codes = spec.codes()
    n, years = len(codes), spec.years
    hub = codes.index(spec.hub) if spec.hub is not None else 0
    first = _first_years(spec, codes)
    active = np.array([[first.get(c, years[0]) <= y for c in codes] for y in years])

    # country fundamentals
    log_rgdpc0 = rng.normal(7.5, 0.9, n)
    log_pop0 = rng.normal(16.0, 1.2, n)
    pop_growth = rng.normal(0.025, 0.008, n)
    hc0 = rng.uniform(1.2, 2.8, n)
    wgi0 = rng.uniform(-1.8, 1.0, (n, len(WGI_COLUMNS)))
    quality = rng.normal(0.0, 1.0, n)
    pos = rng.uniform(0.0, 1.0, (n, 2))
    dist = np.sqrt(((pos[:, None, :] - pos[None, :, :]) ** 2).sum(axis=2)) + 0.05

    t_n = len(years)
    shocks = rng.normal(spec.growth_mean, spec.growth_sd, (n, t_n))
    shocks[:, 0] = 0.0
    log_rgdpc = log_rgdpc0[:, None] + np.cumsum(shocks, axis=1)
    log_pop = log_pop0[:, None] + pop_growth[:, None] * np.arange(t_n)
    rgdpc = np.exp(log_rgdpc)
    pop = np.exp(log_pop)
    gdp = rgdpc * pop

    # persistent link structure with yearly churn
    z = (log_rgdpc0 - log_rgdpc0.mean()) / log_rgdpc0.std()
    rate = min(spec.link_rate, 1 - 1e-6)
    logit = np.log(rate / (1 - rate)) + 0.8 * (z[:, None] + z[None, :]) - 1.5 * (dist - dist.mean())
    p_link = 1.0 / (1.0 + np.exp(-logit))
    draws = rng.uniform(size=(n, n))
    flow_rows = []
    for k, yr in enumerate(years):
        redraw = rng.uniform(size=(n, n)) < spec.churn
        draws = np.where(redraw, rng.uniform(size=(n, n)), draws)
        link = (draws < p_link) & active[k][:, None] & active[k][None, :]
        np.fill_diagonal(link, False)
        g = gdp[:, k] / 1e9
        mass = g[:, None] * g[None, :] / dist
        noise = np.exp(rng.normal(0.0, spec.noise_sd, (n, n)))
        value = np.maximum(np.rint(200.0 * mass * noise), 1.0)
        value = np.where(link, value, 0.0)
        value[hub, :] = 0.0
        top = value.max() if value.any() else 1.0
        hub_row = np.rint(top * (1.5 + rng.uniform(size=n)))
        for j in range(n):
            if j != hub and active[k][j] and active[k][hub]:
                value[hub, j] = hub_row[j]
        ii, jj = np.nonzero(value)
        for i, j in zip(ii, jj):
            flow_rows.append((codes[i], codes[j], yr, int(value[i, j])))
    flows = pd.DataFrame(flow_rows, columns=["origin", "destination", "year", "value_kusd"])
    flows = flows.sort_values(["year", "origin", "destination"], kind="mergesort").reset_index(drop=True)

    # macro series
    macro_rows = []
    for i, c in enumerate(codes):
        for k, yr in enumerate(years):
            if not active[k][i]:
                continue
            wgi = np.clip(wgi0[i] + 0.15 * quality[i] * k / max(t_n, 1) + rng.normal(0, 0.08, len(WGI_COLUMNS)), -2.5, 2.5)
            infra_base = np.exp(0.7 * (log_rgdpc[i, k] - 7.5) + rng.normal(0, 0.1, len(INFRA_COLUMNS)))
            infra = infra_base * np.array([2.0, 50.0, 400.0, 600.0])
            row = {
                "country": c,
                "year": yr,
                "rgdpc": rgdpc[i, k],
                "gdp": gdp[i, k],
                "hc": hc0[i] + 0.01 * k + rng.normal(0, 0.005),
                "pop": pop[i, k],
                "fdi": gdp[i, k] * np.exp(rng.normal(-3.5, 0.6)),
            }
            row.update(dict(zip(WGI_COLUMNS, wgi)))
            row.update(dict(zip(INFRA_COLUMNS, infra)))
            macro_rows.append(row)
    macro = pd.DataFrame(macro_rows, columns=list(MACRO_COLUMNS))
    if spec.n_incomplete:
        candidates = [c for j, c in enumerate(codes) if j != hub and c not in first]
        chosen = rng.choice(len(candidates), size=min(spec.n_incomplete, len(candidates)), replace=False)
        for idx in sorted(chosen):
            rows = macro.index[macro["country"] == candidates[idx]]
            macro.loc[rows[int(rng.integers(len(rows)))], "hc"] = np.nan

    # regional memberships: one to three RECs each
    member = np.zeros((n, len(RECS)), dtype=np.int64)
    for i in range(n):
        m = int(rng.integers(1, 4))
        member[i, rng.choice(len(RECS), size=m, replace=False)] = 1
    memberships = pd.DataFrame(member, columns=list(RECS))
    memberships.insert(0, "country", codes)

    tariff_base = rng.uniform(4.0, 20.0, n)
    tariff_rows = [
        {"country": c, "year": yr, "tariff": max(tariff_base[i] - 0.2 * k + rng.normal(0, 0.5), 0.0)}
        for i, c in enumerate(codes)
        for k, yr in enumerate(years)
        if active[k][i]
    ]
    tariffs = pd.DataFrame(tariff_rows, columns=["country", "year", "tariff"])
    countries = pd.DataFrame({"code": codes, "first_year": [first.get(c) for c in codes]})
    return {"flows": flows, "macro": macro, "memberships": memberships, "tariffs": tariffs, "countries": countries}


def write_csv(frame, path):
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def _universe_text(countries):
    lines = ["# country universe: CODE[,FIRST_YEAR]"]
    for code, fy in zip(countries["code"], countries["first_year"]):
        lines.append(code if fy is None or pd.isna(fy) else f"{code},{int(fy)}")
    return "\n".join(lines) + "\n"


CONFIG_TEMPLATE = """\
[data]
flows = flows.csv
macro = macro.csv
memberships = memberships.csv
tariffs = tariffs.csv
countries = countries.txt

[network]
filter = on
quartile_mode = per_year
pagerank_mode = weighted
damping = 0.85

[panel]
year_range = {first}-{last}
lag_history = {history}
min_coverage = full
epsilon = 1e-6

[run]
seed = {seed}
"""


def write_dataset(spec, out_dir, panel_start=None):
    """Generate and write ``flows.csv``, ``macro.csv``, ``memberships.csv``,
    ``tariffs.csv``, ``countries.txt`` and a ready-to-run ``config.ini``.

    ``panel_start`` is the first panel year in the config; earlier years only
    supply lags. It defaults to two years after ``spec.first_year`` when the
    span allows it.

    Returns
    -------
    dict
        Paths of the written files by key.
    """
    data = generate_synthetic(spec)
    os.makedirs(out_dir, exist_ok=True)
    paths = {}
    for key in ("flows", "macro", "memberships", "tariffs"):
        paths[key] = os.path.join(out_dir, f"{key}.csv")
        write_csv(data[key], paths[key])
    paths["countries"] = os.path.join(out_dir, "countries.txt")
    with open(paths["countries"], "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_universe_text(data["countries"]))
    if panel_start is None:
        panel_start = spec.first_year + 2 if spec.last_year - spec.first_year >= 5 else spec.first_year
    history = panel_start - spec.first_year
    paths["config"] = os.path.join(out_dir, "config.ini")
    with open(paths["config"], "w", encoding="utf-8", newline="\n") as fh:
        fh.write(CONFIG_TEMPLATE.format(first=panel_start, last=spec.last_year, history=history, seed=spec.seed))
    return paths
