"""Balanced country-year panel assembly and descriptive outputs."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, is_dataclass

import numpy as np
import pandas as pd

from .exceptions import ValidationError

logger = logging.getLogger(__name__)

KEYS = ["country", "year"]


@dataclass(frozen=True)
class PanelDataset:
    """Country-year panel stored as a frame sorted by ``(country, year)``.

    Attributes
    ----------
    frame : DataFrame
        One row per country-year with ``country`` and ``year`` columns.
    balanced : bool
        Whether every country covers every year.
    """

    frame: pd.DataFrame
    balanced: bool = True

    def __post_init__(self):
        f = self.frame
        missing = set(KEYS) - set(f.columns)
        if missing:
            raise ValidationError(f"panel frame missing key columns {sorted(missing)}")
        if f.duplicated(KEYS).any():
            raise ValidationError("duplicate (country, year) rows in panel")
        f = f.sort_values(KEYS, kind="mergesort").reset_index(drop=True)
        object.__setattr__(self, "frame", f)
        if self.balanced:
            n, t = self.n_countries, self.n_years
            if len(f) != n * t:
                raise ValidationError(f"panel is not balanced: {len(f)} rows for {n} x {t}")
            years = self.years
            if years and years != list(range(years[0], years[-1] + 1)):
                raise ValidationError("panel years are not contiguous")

    @property
    def countries(self):
        return sorted(self.frame["country"].unique())

    @property
    def years(self):
        return sorted(int(y) for y in self.frame["year"].unique())

    @property
    def n_countries(self):
        return self.frame["country"].nunique()

    @property
    def n_years(self):
        return self.frame["year"].nunique()

    def __len__(self):
        return len(self.frame)

    def indexed(self):
        """Frame indexed by ``(country, year)``, the layout estimators expect."""
        return self.frame.set_index(KEYS)

    def replace(self, frame):
        return PanelDataset(frame, self.balanced)


def _records_frame(records):
    if isinstance(records, pd.DataFrame):
        return records.copy()
    records = list(records)
    if records and is_dataclass(records[0]):
        return pd.DataFrame([asdict(r) for r in records])
    return pd.DataFrame(records)


def assemble(centrality, covariates, year_range, min_coverage="full"):
    """Inner-join network indicators and covariates into a panel.

    Parameters
    ----------
    centrality, covariates : DataFrame or sequence of records
        Both keyed by ``country`` and ``year``.
    year_range : tuple of int
        Inclusive ``(first, last)`` year.
    min_coverage : {"full", "none"}
        ``"full"`` keeps only countries observed in every year of the range.
        ``"none"`` keeps everything and returns an unbalanced panel.

    Raises
    ------
    ValidationError
        If no country survives balancing.
    """
    first, last = (int(y) for y in year_range)
    if last < first:
        raise ValidationError("empty year range")
    left = _records_frame(centrality)
    right = _records_frame(covariates)
    overlap = (set(left.columns) & set(right.columns)) - set(KEYS)
    if overlap:
        raise ValidationError(f"column name clash between inputs: {sorted(overlap)}")
    merged = left.merge(right, on=KEYS, how="inner", validate="one_to_one")
    merged = merged[(merged["year"] >= first) & (merged["year"] <= last)]
    merged = merged.dropna()
    if min_coverage == "full":
        n_years = last - first + 1
        counts = merged.groupby("country")["year"].nunique()
        keep = counts.index[counts == n_years]
        dropped = sorted(set(counts.index) - set(keep))
        if dropped:
            logger.info("dropping %d incompletely covered countr(ies): %s", len(dropped), ", ".join(dropped))
        merged = merged[merged["country"].isin(keep)]
        if merged.empty:
            raise ValidationError("no fully-covered countries")
        return PanelDataset(merged, balanced=True)
    if min_coverage != "none":
        raise ValidationError(f"unknown coverage rule {min_coverage!r}")
    if merged.empty:
        raise ValidationError("no fully-covered countries")
    return PanelDataset(merged, balanced=False)


def lag_name(variable, lag):
    return f"L{lag}.{variable}"


def add_lags(panel, variables, max_lag, history=None):
    """Add ``L1.x`` ... ``L<max_lag>.x`` columns, filled within each country.

    Lags that fall before a country's first panel year are left missing,
    unless ``history`` (a frame with ``country``, ``year`` and the
    variables) supplies the earlier values.
    """
    if max_lag < 1:
        raise ValidationError("max_lag must be at least 1")
    if max_lag >= panel.n_years:
        raise ValidationError(f"max_lag {max_lag} must be smaller than the number of years {panel.n_years}")
    frame = panel.frame.copy()
    source = frame[KEYS + list(variables)]
    if history is not None:
        hist = history[KEYS + list(variables)]
        hist = hist[~hist.set_index(KEYS).index.isin(source.set_index(KEYS).index)]
        source = pd.concat([source, hist], ignore_index=True)
    source = source.set_index(KEYS)
    for lag in range(1, max_lag + 1):
        shifted = source.copy()
        shifted.index = pd.MultiIndex.from_arrays(
            [shifted.index.get_level_values(0), shifted.index.get_level_values(1) + lag], names=KEYS
        )
        key = pd.MultiIndex.from_frame(frame[KEYS])
        for var in variables:
            frame[lag_name(var, lag)] = shifted[var].reindex(key).to_numpy()
    return panel.replace(frame)


def correlation_matrix(panel, variables):
    """Pairwise Pearson correlations over all panel rows."""
    frame = panel.frame if isinstance(panel, PanelDataset) else panel
    if len(frame) < 3:
        raise ValidationError("correlation needs at least 3 rows")
    x = frame[list(variables)].to_numpy(dtype=float)
    sd = x.std(axis=0)
    for j, s in enumerate(sd):
        if not s > 0:
            raise ValidationError(f"zero-variance variable {variables[j]!r}")
    c = np.corrcoef(x, rowvar=False)
    c = np.clip((c + c.T) / 2.0, -1.0, 1.0)
    np.fill_diagonal(c, 1.0)
    return pd.DataFrame(c, index=list(variables), columns=list(variables))


def descriptive_stats(panel, variables):
    frame = panel.frame if isinstance(panel, PanelDataset) else panel
    if frame.empty:
        raise ValidationError("empty panel")
    rows = []
    for var in variables:
        v = frame[var].dropna().to_numpy(dtype=float)
        rows.append(
            {
                "variable": var,
                "obs": int(v.size),
                "mean": float(v.mean()),
                "sd": float(v.std(ddof=1)) if v.size > 1 else 0.0,
                "min": float(v.min()),
                "max": float(v.max()),
            }
        )
    return pd.DataFrame(rows, columns=["variable", "obs", "mean", "sd", "min", "max"])


def top_k_ranking(records, measure, year, k):
    """Countries ordered by ``measure`` in ``year``, descending; ties by code."""
    frame = _records_frame(records)
    sub = frame[frame["year"] == year]
    if sub.empty:
        raise ValidationError(f"no records for year {year}")
    sub = sub.sort_values(["country"], kind="mergesort")
    sub = sub.sort_values([measure], ascending=False, kind="mergesort")
    return list(sub["country"].iloc[: min(k, len(sub))])


def rankings_frame(records, measure, k=10):
    """Long-format ranking table: ``year, rank, country, value``."""
    frame = _records_frame(records)
    rows = []
    for yr in sorted(frame["year"].unique()):
        order = top_k_ranking(frame, measure, yr, k)
        sub = frame[frame["year"] == yr].set_index("country")[measure]
        for rank, code in enumerate(order, start=1):
            rows.append({"year": int(yr), "rank": rank, "country": code, "value": float(sub[code])})
    return pd.DataFrame(rows, columns=["year", "rank", "country", "value"])
