"""External instrument built from the concentration of a country's exports."""

from __future__ import annotations

import warnings

import numpy as np
import pandas as pd

from ..exceptions import DataWarning, ValidationError
from ..trade_graph import flows_to_frame


def export_intensity(flows, top=5):
    """Share of each exporter's total exports going to its ``top`` largest destinations.

    Parameters
    ----------
    flows : DataFrame or iterable of FlowRecord
    top : int, default 5

    Returns
    -------
    DataFrame
        Columns ``country``, ``year``, ``intensity``; one row per exporter-year
        present in ``flows``.

    Examples
    --------
    >>> import pandas as pd
    >>> f = pd.DataFrame({"origin": ["AAA"] * 7, "destination": list("BCDEFGH"),
    ...                   "year": 2000, "value_kusd": [10, 5, 1, 1, 1, 1, 1]})
    >>> float(export_intensity(f)["intensity"].iloc[0])
    0.9
    """
    if top < 1:
        raise ValidationError("top must be at least 1")
    frame = flows_to_frame(flows)
    frame = frame[frame["origin"] != frame["destination"]]
    pair = frame.groupby(["origin", "year", "destination"], sort=True)["value_kusd"].sum().reset_index()
    rows = []
    for (origin, year), grp in pair.groupby(["origin", "year"], sort=True):
        v = np.sort(grp["value_kusd"].to_numpy(dtype=float))[::-1]
        total = v.sum()
        if total > 0:
            share = v[:top].sum() / total
        else:
            warnings.warn(f"{origin} has zero exports in {year}; intensity set to 0", DataWarning, stacklevel=2)
            share = 0.0
        rows.append({"country": origin, "year": int(year), "intensity": float(share)})
    return pd.DataFrame(rows, columns=["country", "year", "intensity"])


def build_external_instrument(flows, panel, endogenous, top=5):
    """Instrument column ``intensity_it * endogenous_it`` aligned with ``panel``.

    Panel rows with no recorded exports get intensity 0 with a warning.

    Returns
    -------
    Series
        Named ``"iv_<endogenous>"`` and indexed like ``panel.frame``.
    """
    frame = panel.frame if hasattr(panel, "frame") else panel
    if endogenous not in frame.columns:
        raise ValidationError(f"endogenous variable {endogenous!r} not in panel")
    years = set(int(y) for y in frame["year"].unique())
    flow_years = set(int(y) for y in flows_to_frame(flows)["year"].unique())
    if not years <= flow_years:
        raise ValidationError(f"flow data missing panel years {sorted(years - flow_years)}")
    intensity = export_intensity(flows, top=top)
    merged = frame[["country", "year"]].merge(intensity, on=["country", "year"], how="left")
    absent = merged["intensity"].isna()
    if absent.any():
        warnings.warn(
            f"{int(absent.sum())} panel row(s) without exports; intensity set to 0", DataWarning, stacklevel=2
        )
    values = merged["intensity"].fillna(0.0).to_numpy() * frame[endogenous].to_numpy(dtype=float)
    return pd.Series(values, index=frame.index, name=f"iv_{endogenous}")
