"""scikit-learn compatible wrappers around the pipeline stages.

Inputs may be a :class:`~marketflow.ingest.ReturnPanel`, a DataFrame (columns
become labels) or a plain ``(n_samples, n_series)`` array.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import as_price_panel, as_return_panel
from .causal_graph import extract_causal_tree, threshold_adjacency
from .infotheory import discrete_transfer_entropy, discretize
from .ingest import compute_returns, preprocess
from .ultrametric import correlation_matrix, kruskal_mst, subdominant_distance, to_distance
from .var_granger import causality_matrix


class LogReturns(TransformerMixin, BaseEstimator):
    """Prices to log-returns; output has one row fewer than the input."""

    def fit(self, X, y=None):
        panel = as_price_panel(X)
        self.n_features_in_ = panel.n_series
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        return compute_returns(as_price_panel(X)).values


class ReturnPreprocessor(TransformerMixin, BaseEstimator):
    """Column-wise linear detrend, demean and standardize, applied in that order.

    Each call to :meth:`transform` uses the statistics of the data it is
    given; nothing learned in :meth:`fit` carries over.
    """

    def __init__(self, demean=True, detrend=True, standardize=False):
        self.demean = demean
        self.detrend = detrend
        self.standardize = standardize

    def fit(self, X, y=None):
        self.n_features_in_ = as_return_panel(X, min_samples=2).n_series
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        panel = as_return_panel(X, min_samples=2)
        return preprocess(panel, self.demean, self.detrend, self.standardize).values


class GrangerCausalityNetwork(BaseEstimator):
    """Conditional Granger causality among all series, pruned to a graph and tree.

    Parameters
    ----------
    lag : int or "auto", default="auto"
        Regression lag order; "auto" takes the largest per-target BIC order
        up to ``p_max``.
    p_max : int, default=10
    method : {"f_test", "surrogate"}, default="f_test"
        How pair p-values are obtained.
    n_surrogates : int, default=100
        Circular-shift surrogates per pair when ``method="surrogate"``.
    alpha : float, default=0.01
        Significance level for keeping an arc.
    weight : {"te", "gc"}, default="te"
        Quantity used as arc weight.
    seed : int, default=42

    Attributes
    ----------
    causality_matrix_ : CausalityMatrix
    gc_, te_, p_values_ : ndarray of shape (n_series, n_series)
        Entry ``[i, j]`` refers to the flow from series i to series j.
    lag_ : int
    graph_ : DirectedGraph
    tree_ : CausalTree
    """

    def __init__(self, lag="auto", p_max=10, method="f_test", n_surrogates=100, alpha=0.01,
                 weight="te", seed=42):
        self.lag = lag
        self.p_max = p_max
        self.method = method
        self.n_surrogates = n_surrogates
        self.alpha = alpha
        self.weight = weight
        self.seed = seed

    def fit(self, X, y=None, flags=None):
        panel = as_return_panel(X, min_series=2)
        m = causality_matrix(panel, p=self.lag, method=self.method,
                             n_surrogates=self.n_surrogates, seed=self.seed, p_max=self.p_max)
        self.causality_matrix_ = m
        self.labels_ = list(m.labels)
        self.n_features_in_ = panel.n_series
        self.lag_ = m.lag
        self.gc_ = m.gc
        self.te_ = m.te
        self.p_values_ = m.p_values
        self.graph_ = threshold_adjacency(m, self.alpha, weight=self.weight, flags=flags)
        self.tree_ = extract_causal_tree(self.graph_)
        return self


class CorrelationMST(BaseEstimator):
    """Correlation distances ``sqrt(2(1 - c))``, their Kruskal MST and ultrametric.

    Attributes
    ----------
    correlation_ : CorrMatrix
    distances_ : DistanceMatrix
    mst_ : Mst
    ultrametric_ : DistanceMatrix
        Subdominant ultrametric (largest MST edge on each path).
    """

    def fit(self, X, y=None):
        panel = as_return_panel(X, min_series=2)
        self.labels_ = list(panel.labels)
        self.n_features_in_ = panel.n_series
        self.correlation_ = correlation_matrix(panel)
        self.distances_ = to_distance(self.correlation_)
        self.mst_ = kruskal_mst(self.distances_)
        self.ultrametric_ = subdominant_distance(self.mst_)
        return self


class DiscreteTransferEntropy(BaseEstimator):
    """Binned transfer entropy for every ordered pair of series.

    With ``conditional=True`` every other series enters the conditioning
    set, which grows the joint state space as ``n_bins ** (1 + lag * n)``.
    """

    def __init__(self, n_bins=3, scheme="equiquantile", lag=1, conditional=False):
        self.n_bins = n_bins
        self.scheme = scheme
        self.lag = lag
        self.conditional = conditional

    def fit(self, X, y=None):
        panel = as_return_panel(X, min_series=2)
        symbols = [discretize(panel.values[:, k], self.n_bins, self.scheme)
                   for k in range(panel.n_series)]
        n = panel.n_series
        te = np.zeros((n, n))
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                cond = [symbols[k] for k in range(n) if k not in (i, j)] if self.conditional else []
                te[i, j] = discrete_transfer_entropy(symbols[i], symbols[j], cond, self.lag).value
        self.labels_ = list(panel.labels)
        self.n_features_in_ = n
        self.te_ = te
        return self
