"""Input coercion shared by the estimator wrappers."""

import numpy as np
import pandas as pd
from sklearn.utils.validation import check_array

from .ingest import PricePanel, ReturnPanel
from .synthetic import default_labels, synthetic_dates


def _labels_for(X, n):
    if isinstance(X, pd.DataFrame):
        return [str(c) for c in X.columns]
    return default_labels(n)


def _timestamps_for(X, n_rows):
    if isinstance(X, pd.DataFrame):
        idx = list(X.index)
        if all(a < b for a, b in zip(idx, idx[1:])):
            return idx
    return synthetic_dates(n_rows + 1)[1:]


def as_return_panel(X, min_series=1, min_samples=3):
    """Coerce a ReturnPanel, DataFrame or 2-D array into a ReturnPanel."""
    if isinstance(X, ReturnPanel):
        panel = X
    else:
        values = check_array(X, dtype=np.float64, ensure_min_samples=min_samples)
        panel = ReturnPanel(_timestamps_for(X, values.shape[0]),
                            _labels_for(X, values.shape[1]), values)
    if panel.n_series < min_series:
        raise ValueError(f"need at least {min_series} series, got {panel.n_series}")
    if panel.n_samples < min_samples:
        raise ValueError(f"need at least {min_samples} samples, got {panel.n_samples}")
    return panel


def as_price_panel(X):
    if isinstance(X, PricePanel):
        return X
    values = check_array(X, dtype=np.float64, ensure_min_samples=2)
    if not np.all(values > 0):
        raise ValueError("prices must be strictly positive")
    return PricePanel(_timestamps_for(X, values.shape[0]), _labels_for(X, values.shape[1]),
                      values)
