"""Yearly weighted directed trade networks built from bilateral flow records."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .countries import CountryUniverse, check_country_code
from .exceptions import DegenerateGraphError, ValidationError

logger = logging.getLogger(__name__)

FLOW_COLUMNS = ("origin", "destination", "year", "value_kusd")


@dataclass(frozen=True)
class FlowRecord:
    """One bilateral trade observation, value in thousands of USD."""

    origin: str
    destination: str
    year: int
    value: float

    def __post_init__(self):
        check_country_code(self.origin)
        check_country_code(self.destination)
        if self.origin == self.destination:
            raise ValidationError(f"self-flow for {self.origin} in {self.year}")
        if not np.isfinite(self.value) or self.value < 0:
            raise ValidationError(f"negative or non-finite value {self.value!r}")


@dataclass(frozen=True, eq=False)
class YearlyTradeGraph:
    """Immutable weighted directed trade graph for a single year.

    ``weights[i, j]`` is the export value from ``nodes[i]`` to ``nodes[j]``
    after filtering; the binary adjacency is derived from it.
    """

    year: int
    nodes: tuple
    weights: np.ndarray
    threshold: float = 0.0
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        n = len(self.nodes)
        if w.shape != (n, n):
            raise ValidationError(f"weight matrix shape {w.shape} does not match {n} nodes")
        if list(self.nodes) != sorted(self.nodes) or len(set(self.nodes)) != n:
            raise ValidationError("nodes must be unique and sorted")
        if np.any(np.diag(w) != 0) or np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValidationError("weights must be finite, non-negative with zero diagonal")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "_index", {c: i for i, c in enumerate(self.nodes)})

    @property
    def adjacency(self):
        a = (self.weights > 0).astype(np.int64)
        a.setflags(write=False)
        return a

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_edges(self):
        return int(np.count_nonzero(self.weights))

    def index(self, code):
        return self._index[code]

    def undirected(self):
        """Binary symmetric adjacency of the undirected projection."""
        a = self.weights > 0
        return (a | a.T).astype(np.int64)

    def edges(self):
        """List of ``(origin, destination, weight)`` in node order."""
        rows, cols = np.nonzero(self.weights)
        return [(self.nodes[i], self.nodes[j], float(self.weights[i, j])) for i, j in zip(rows, cols)]

    def scaled(self, factor):
        return YearlyTradeGraph(self.year, self.nodes, self.weights * factor, self.threshold * factor)

    def __eq__(self, other):
        if not isinstance(other, YearlyTradeGraph):
            return NotImplemented
        return (
            self.year == other.year
            and self.nodes == other.nodes
            and np.array_equal(self.weights, other.weights)
        )

    __hash__ = None


@dataclass(frozen=True)
class NetworkStats:
    year: int
    n_nodes: int
    edge_count: int
    average_degree: float
    mean_total_degree: float
    density: float
    average_clustering: float


def read_flows_csv(path, skip_malformed=False):
    """Read a flow CSV with header ``origin,destination,year,value_kusd``.

    The returned frame is indexed by the 1-based line number of each record
    in the file, so later validation errors can point back at the source.

    Raises
    ------
    ValidationError
        On a bad header, or on the first malformed row unless
        ``skip_malformed`` is set (malformed rows are then logged and dropped).
    """
    raw = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    if tuple(raw.columns) != FLOW_COLUMNS:
        raise ValidationError(f"{path}: expected header {','.join(FLOW_COLUMNS)}, got {','.join(raw.columns)}")
    raw.index = pd.RangeIndex(2, len(raw) + 2, name="line")
    year = pd.to_numeric(raw["year"], errors="coerce")
    value = pd.to_numeric(raw["value_kusd"], errors="coerce")
    origin = raw["origin"].str.strip()
    dest = raw["destination"].str.strip()
    code_ok = origin.str.fullmatch(r"[A-Z]{3}") & dest.str.fullmatch(r"[A-Z]{3}")
    ok = (
        code_ok
        & (origin != dest)
        & year.notna()
        & (year == year.round())
        & value.notna()
        & np.isfinite(value)
        & (value >= 0)
    )
    bad = raw.index[~ok.to_numpy()]
    if len(bad):
        lines = ", ".join(str(i) for i in bad[:10])
        if not skip_malformed:
            raise ValidationError(f"{path}: malformed rows at line(s) {lines}")
        logger.warning("%s: skipping %d malformed row(s) at line(s) %s", path, len(bad), lines)
    out = pd.DataFrame(
        {"origin": origin, "destination": dest, "year": year, "value_kusd": value}
    )[ok.to_numpy()]
    out["year"] = out["year"].astype(np.int64)
    out["value_kusd"] = out["value_kusd"].astype(float)
    return out


def flows_to_frame(flows):
    """Coerce a flow frame or an iterable of :class:`FlowRecord` to a frame."""
    if isinstance(flows, pd.DataFrame):
        missing = set(FLOW_COLUMNS) - set(flows.columns)
        if missing:
            raise ValidationError(f"flow frame missing columns {sorted(missing)}")
        return flows
    records = list(flows)
    return pd.DataFrame(
        {
            "origin": [r.origin for r in records],
            "destination": [r.destination for r in records],
            "year": np.array([r.year for r in records], dtype=np.int64),
            "value_kusd": np.array([r.value for r in records], dtype=float),
        }
    )


def quartile_threshold(values):
    """First quartile of positive flow values, linear interpolation between closest ranks.

    Examples
    --------
    >>> quartile_threshold([1, 2, 3, 4])
    1.75
    """
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ValidationError("no flows for year")
    if np.any(v <= 0) or not np.all(np.isfinite(v)):
        raise ValidationError("quartile threshold requires positive finite values")
    return float(np.percentile(v, 25, method="linear"))


def _summed_matrix(frame, nodes):
    index = {c: i for i, c in enumerate(nodes)}
    unknown = ~frame["origin"].isin(index) | ~frame["destination"].isin(index)
    if unknown.any():
        loc = frame.index[unknown.to_numpy()][0]
        loc = loc.item() if hasattr(loc, "item") else loc
        row = frame.loc[loc]
        raise ValidationError(
            f"unknown country code in flow record at {loc!r}: "
            f"{row['origin']}->{row['destination']} ({row['year']})"
        )
    n = len(nodes)
    w = np.zeros((n, n))
    oi = frame["origin"].map(index).to_numpy(dtype=np.int64)
    di = frame["destination"].map(index).to_numpy(dtype=np.int64)
    if np.any(oi == di):
        raise ValidationError("flow records must have origin != destination")
    # sort keys first so duplicate summation order does not depend on input order
    vals = frame["value_kusd"].to_numpy(dtype=float)
    order = np.lexsort((vals, di, oi))
    np.add.at(w, (oi[order], di[order]), vals[order])
    return w


def build_yearly_graph(flows, year, filter=True, universe=None, threshold=None):
    """Build the trade graph of one year.

    Parameters
    ----------
    flows : DataFrame or iterable of FlowRecord
        Flow records; only rows of ``year`` are used.
    year : int
    filter : bool, default True
        Keep an edge only if its summed value strictly exceeds the threshold.
    universe : CountryUniverse, optional
        Node registry. Defaults to the 54 African countries.
    threshold : float, optional
        Override the per-year first-quartile threshold (used for pooled mode).

    Returns
    -------
    YearlyTradeGraph
    """
    universe = universe or CountryUniverse.default()
    frame = flows_to_frame(flows)
    frame = frame[frame["year"] == year]
    nodes = universe.nodes(year)
    w = _summed_matrix(frame, nodes)
    thr = 0.0
    if filter:
        if threshold is None:
            positive = w[w > 0]
            thr = quartile_threshold(positive) if positive.size else 0.0
        else:
            thr = float(threshold)
        w = np.where(w > thr, w, 0.0)
    return YearlyTradeGraph(int(year), nodes, w, thr)


class TradeGraphBuilder(TransformerMixin, BaseEstimator):
    """Turn a flow table into a list of yearly trade graphs.

    ``fit`` learns the edge-filter thresholds, either per year or pooled over
    all fitted years; ``transform`` builds one graph per requested year.

    Parameters
    ----------
    filter : bool, default True
    quartile_mode : {"per_year", "pooled"}, default "per_year"
    universe : CountryUniverse, optional
    years : sequence of int, optional
        Years to build. Defaults to every year present in the flows.
    """

    def __init__(self, filter=True, quartile_mode="per_year", universe=None, years=None):
        self.filter = filter
        self.quartile_mode = quartile_mode
        self.universe = universe
        self.years = years

    def _years(self, frame):
        if self.years is not None:
            return sorted(int(y) for y in self.years)
        return sorted(int(y) for y in frame["year"].unique())

    def fit(self, X, y=None):
        if self.quartile_mode not in ("per_year", "pooled"):
            raise ValidationError(f"quartile_mode must be 'per_year' or 'pooled', got {self.quartile_mode!r}")
        frame = flows_to_frame(X)
        universe = self.universe or CountryUniverse.default()
        years = self._years(frame)
        self.years_ = years
        self.thresholds_ = {}
        if not self.filter:
            self.thresholds_ = {yr: 0.0 for yr in years}
            return self
        per_year = {}
        for yr in years:
            w = _summed_matrix(frame[frame["year"] == yr], universe.nodes(yr))
            per_year[yr] = w[w > 0]
        if self.quartile_mode == "pooled":
            pooled = np.concatenate([per_year[yr] for yr in years]) if years else np.array([])
            thr = quartile_threshold(pooled)
            self.thresholds_ = {yr: thr for yr in years}
        else:
            for yr in years:
                self.thresholds_[yr] = quartile_threshold(per_year[yr]) if per_year[yr].size else 0.0
        return self

    def transform(self, X):
        check_is_fitted(self, "thresholds_")
        frame = flows_to_frame(X)
        universe = self.universe or CountryUniverse.default()
        graphs = []
        for yr in self.years_:
            graphs.append(
                build_yearly_graph(
                    frame, yr, filter=self.filter, universe=universe, threshold=self.thresholds_[yr]
                )
            )
        return graphs


def _undirected_clustering(u):
    deg = u.sum(axis=1)
    tri = np.einsum("ij,jk,ki->i", u, u, u) / 2.0
    possible = deg * (deg - 1) / 2.0
    with np.errstate(divide="ignore", invalid="ignore"):
        cc = np.where(deg >= 2, tri / np.where(possible > 0, possible, 1), 0.0)
    return cc


def network_stats(graph):
    """Whole-network statistics of one yearly graph.

    ``average_degree`` counts undirected neighbours; ``mean_total_degree``
    is the directed in+out degree average, ``2E/N``.
    """
    n = graph.n_nodes
    if n < 2:
        raise DegenerateGraphError("degenerate graph")
    a = graph.adjacency
    edges = int(a.sum())
    u = graph.undirected()
    return NetworkStats(
        year=graph.year,
        n_nodes=n,
        edge_count=edges,
        average_degree=float(u.sum(axis=1).mean()),
        mean_total_degree=2.0 * edges / n,
        density=edges / (n * (n - 1)),
        average_clustering=float(_undirected_clustering(u).mean()),
    )


def evolution_series(graphs: Sequence[YearlyTradeGraph]) -> list:
    years = [g.year for g in graphs]
    if len(set(years)) != len(years):
        raise ValidationError("duplicate year in graph sequence")
    if years != sorted(years):
        raise ValidationError("graphs must be sorted by year")
    return [network_stats(g) for g in graphs]


def stats_frame(stats: Iterable[NetworkStats]) -> pd.DataFrame:
    rows = [s.__dict__ for s in stats]
    return pd.DataFrame(rows, columns=list(NetworkStats.__dataclass_fields__))
