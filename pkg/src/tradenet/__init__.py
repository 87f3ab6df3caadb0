"""Trade-network integration indicators and dynamic panel estimation."""

__version__ = "0.1.0"

from .countries import CountryUniverse
from .trade_graph import FlowRecord, TradeGraphBuilder, YearlyTradeGraph, build_yearly_graph, network_stats
from .centrality import CentralityTransformer, compute_all

__all__ = [
    "__version__",
    "CountryUniverse",
    "FlowRecord",
    "YearlyTradeGraph",
    "TradeGraphBuilder",
    "build_yearly_graph",
    "network_stats",
    "CentralityTransformer",
    "compute_all",
]
