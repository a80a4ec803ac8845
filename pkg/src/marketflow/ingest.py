"""Loading price CSVs, log-returns and per-column preprocessing."""

import datetime as dt
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd

from .exceptions import (DegenerateSeries, DroppedRowsWarning, EmptyPanel, ParseError,
                         UnknownLabel)

DROP_WARN_FRACTION = 0.05


@dataclass(frozen=True)
class Preprocessing:
    demeaned: bool = False
    detrended: bool = False
    standardized: bool = False

    def as_dict(self):
        return {"demeaned": self.demeaned, "detrended": self.detrended,
                "standardized": self.standardized}


@dataclass
class PricePanel:
    """Aligned prices, one row per date and one column per instrument."""

    timestamps: list
    labels: list
    values: np.ndarray

    def __post_init__(self):
        self.labels = [str(x) for x in self.labels]
        self.values = np.ascontiguousarray(self.values, dtype=float)
        _check_shape(self.timestamps, self.labels, self.values)
        if self.values.size and not np.all(self.values > 0):
            raise ValueError("prices must be strictly positive")
        _check_increasing(self.timestamps)

    @property
    def n_series(self):
        return len(self.labels)

    def to_frame(self):
        return pd.DataFrame(self.values, index=pd.Index(self.timestamps, name="date"),
                            columns=self.labels)


@dataclass
class ReturnPanel:
    """Log-returns aligned on the later date of each price pair.

    ``base_timestamp`` is the date of the first price the returns were taken
    from, kept so prices can be rebuilt with their original dates.
    """

    timestamps: list
    labels: list
    values: np.ndarray
    preprocessing: Preprocessing = field(default_factory=Preprocessing)
    base_timestamp: object = None

    def __post_init__(self):
        self.labels = [str(x) for x in self.labels]
        self.values = np.ascontiguousarray(self.values, dtype=float)
        if self.values.ndim == 1 and len(self.labels) == 1:
            self.values = self.values.reshape(-1, 1)
        _check_shape(self.timestamps, self.labels, self.values)
        _check_increasing(self.timestamps)

    @property
    def n_samples(self):
        return self.values.shape[0]

    @property
    def n_series(self):
        return len(self.labels)

    def column(self, label):
        try:
            return self.values[:, self.labels.index(label)]
        except ValueError:
            raise UnknownLabel(label) from None

    def select(self, labels):
        idx = [self.labels.index(lab) for lab in labels]
        return replace(self, labels=list(labels), values=self.values[:, idx].copy())

    def to_frame(self):
        return pd.DataFrame(self.values, index=pd.Index(self.timestamps, name="date"),
                            columns=self.labels)


def _check_shape(timestamps, labels, values):
    if values.ndim != 2:
        raise ValueError(f"values must be 2-D, got shape {values.shape}")
    if values.shape != (len(timestamps), len(labels)):
        raise ValueError(
            f"values shape {values.shape} does not match "
            f"{len(timestamps)} timestamps x {len(labels)} labels")
    if len(set(labels)) != len(labels):
        raise ValueError("labels must be unique")


def _check_increasing(timestamps):
    if len(timestamps) < 2:
        return
    ts = np.empty(len(timestamps), dtype=object)
    ts[:] = list(timestamps)
    bad = np.flatnonzero(~(ts[1:] > ts[:-1]).astype(bool))
    if bad.size:
        raise ValueError(f"timestamps not strictly increasing at position {bad[0] + 1}")


def load_price_csv(path, date_column="date"):
    """Read a ``date,<label1>,...`` CSV of prices into a :class:`PricePanel`.

    Rows with any missing, unparseable or non-positive price are dropped and a
    :class:`DroppedRowsWarning` is issued when more than 5% of rows go.
    Unparseable and duplicate dates raise :class:`ParseError`.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"FileNotFound: {path}")
    raw = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    if date_column not in raw.columns:
        raise ParseError(1, date_column, "date column missing from header")
    labels = [c for c in raw.columns if c != date_column]
    if not labels:
        raise EmptyPanel("EmptyPanel: no price columns")

    dates = []
    for k, text in enumerate(raw[date_column]):
        try:
            dates.append(dt.date.fromisoformat(text.strip()))
        except ValueError:
            # file row k + 2: header is row 1
            raise ParseError(k + 2, date_column, f"unparseable date {text!r}") from None

    prices = raw[labels].apply(lambda s: pd.to_numeric(s.str.strip(), errors="coerce"))
    values = prices.to_numpy(dtype=float)
    keep = np.all(np.isfinite(values) & (values > 0), axis=1)

    seen = {}
    for k, d in enumerate(dates):
        if d in seen:
            raise ParseError(k + 2, date_column, f"duplicate date {d.isoformat()}")
        seen[d] = k

    n_rows = len(dates)
    n_dropped = int(n_rows - keep.sum())
    if n_rows and n_dropped / n_rows > DROP_WARN_FRACTION:
        warnings.warn(f"dropped {n_dropped} of {n_rows} rows with missing or invalid prices",
                      DroppedRowsWarning, stacklevel=2)

    kept_dates = [d for d, ok in zip(dates, keep) if ok]
    kept_values = values[keep]
    if len(kept_dates) < 2:
        raise EmptyPanel(f"EmptyPanel: only {len(kept_dates)} usable rows in {path}")
    order = np.argsort(np.array(kept_dates, dtype="datetime64[D]"), kind="stable")
    return PricePanel([kept_dates[i] for i in order], labels, kept_values[order])


def write_panel_csv(panel, path, date_column="date"):
    """Write a price or return panel in the ingest CSV schema."""
    frame = panel.to_frame()
    frame.index = [_iso(t) for t in frame.index]
    frame.index.name = date_column
    frame.to_csv(path, float_format="%.17g", lineterminator="\n")


def _iso(t):
    return t.isoformat() if hasattr(t, "isoformat") else str(t)


def compute_returns(panel):
    """Log-returns ``ln p(t) - ln p(t-1)`` for every column."""
    if len(panel.timestamps) < 2:
        raise EmptyPanel("EmptyPanel: need at least 2 prices to form a return")
    logp = np.log(panel.values)
    return ReturnPanel(
        timestamps=list(panel.timestamps[1:]),
        labels=list(panel.labels),
        values=logp[1:] - logp[:-1],
        preprocessing=Preprocessing(),
        base_timestamp=panel.timestamps[0],
    )


def detrend_columns(values):
    """Remove the least-squares line in time from each column."""
    t_len = values.shape[0]
    if t_len < 2:
        return values - values.mean(axis=0)
    t = np.arange(t_len, dtype=float)
    t -= t.mean()
    centered = values - values.mean(axis=0)
    slope = (t @ centered) / (t @ t)
    return centered - np.outer(t, slope)


def preprocess(panel, demean=True, detrend=False, standardize=False):
    """Apply, in order: linear detrend, mean removal, unit sample variance."""
    if panel.n_samples == 0:
        raise EmptyPanel("EmptyPanel: no returns to preprocess")
    values = panel.values.astype(float, copy=True)
    if detrend:
        values = detrend_columns(values)
    if demean:
        values = values - values.mean(axis=0)
    if standardize:
        if panel.n_samples < 2:
            raise EmptyPanel("EmptyPanel: standardizing needs at least 2 samples")
        sd = values.std(axis=0, ddof=1)
        scale = np.maximum(np.abs(panel.values).max(axis=0), np.finfo(float).tiny)
        for k, lab in enumerate(panel.labels):
            if not sd[k] > 1e-13 * scale[k]:
                raise DegenerateSeries(lab)
        values = values / sd
    flags = Preprocessing(
        demeaned=panel.preprocessing.demeaned or demean,
        detrended=panel.preprocessing.detrended or detrend,
        standardized=panel.preprocessing.standardized or standardize,
    )
    return replace(panel, values=values, preprocessing=flags)
