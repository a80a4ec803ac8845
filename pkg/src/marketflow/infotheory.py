"""Plug-in entropy estimators over binned series, in nats.

Probabilities are raw relative frequencies (no smoothing).  The Gaussian
closed form covers the continuous case used by the regression estimators.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import (DegenerateSeries, NonPositiveVariance, SmallSampleWarning,
                         StateSpaceTooLarge)

DEFAULT_MAX_CELLS = 10 ** 6
# samples per joint cell below which an estimate is flagged
SAMPLES_PER_CELL = 10


@dataclass
class SymbolSeries:
    symbols: np.ndarray
    n_bins: int

    def __post_init__(self):
        self.symbols = np.asarray(self.symbols, dtype=np.int64)
        self.n_bins = int(self.n_bins)
        if self.n_bins < 2:
            raise ValueError("n_bins must be >= 2")
        if self.symbols.ndim != 1:
            raise ValueError("symbols must be 1-D")
        if self.symbols.size and (self.symbols.min() < 0 or self.symbols.max() >= self.n_bins):
            raise ValueError(f"symbols must lie in [0, {self.n_bins})")

    def __len__(self):
        return self.symbols.size


@dataclass
class JointDistribution:
    """Dense contingency table of joint symbol counts."""

    counts: np.ndarray

    def __post_init__(self):
        self.counts = np.asarray(self.counts)
        if np.any(self.counts < 0):
            raise ValueError("counts must be nonnegative")
        if self.total < 1:
            raise ValueError("distribution needs at least one sample")

    @property
    def total(self):
        return self.counts.sum()

    @property
    def dims(self):
        return list(self.counts.shape)

    @classmethod
    def from_symbols(cls, *series, max_cells=DEFAULT_MAX_CELLS):
        """Count co-occurrences of equally long symbol series, one axis each."""
        if not series:
            raise ValueError("need at least one series")
        length = len(series[0])
        if any(len(s) != length for s in series):
            raise ValueError("all series must have equal length")
        dims = [s.n_bins for s in series]
        cells = math.prod(dims)
        if cells > max_cells:
            raise StateSpaceTooLarge(
                f"StateSpaceTooLarge: {cells} cells exceeds cap {max_cells}")
        flat = np.ravel_multi_index([s.symbols for s in series], dims)
        counts = np.bincount(flat, minlength=cells).reshape(dims)
        return cls(counts)

    def marginal(self, axes):
        """Sum out every axis not in ``axes``; result axes follow ``axes`` order."""
        axes = tuple(axes)
        drop = tuple(a for a in range(self.counts.ndim) if a not in axes)
        m = self.counts.sum(axis=drop)
        kept = sorted(axes)
        return JointDistribution(np.transpose(m, [kept.index(a) for a in axes]))

    def probabilities(self):
        return self.counts / self.total


def _plugin_entropy(counts):
    c = np.asarray(counts, dtype=float).ravel()
    c = c[c > 0]
    n = c.sum()
    p = c / n
    return float(-(p * np.log(p)).sum())


def entropy(dist, axis=None):
    """Shannon entropy of one axis; a 1-D table needs no ``axis``."""
    if axis is not None:
        dist = dist.marginal([axis])
    elif dist.counts.ndim != 1:
        raise ValueError("entropy takes a 1-D distribution; pass axis= to marginalize")
    return _plugin_entropy(dist.counts)


def joint_entropy(dist):
    return _plugin_entropy(dist.counts)


def conditional_entropy(dist, target_axes, given_axes):
    """H(target | given) = H(target, given) - H(given)."""
    target_axes, given_axes = _axes(target_axes), _axes(given_axes)
    if set(target_axes) & set(given_axes):
        raise ValueError("target and given axes must be disjoint")
    both = dist.marginal(target_axes + given_axes)
    if not given_axes:
        return _plugin_entropy(both.counts)
    return _plugin_entropy(both.counts) - _plugin_entropy(dist.marginal(given_axes).counts)


def conditional_entropy_direct(dist, target_axes, given_axes):
    """Double-sum form: -sum p(t, g) ln p(t | g)."""
    target_axes, given_axes = _axes(target_axes), _axes(given_axes)
    both = dist.marginal(target_axes + given_axes).counts.astype(float)
    if not given_axes:
        return _plugin_entropy(both)
    n = both.sum()
    given = both.sum(axis=tuple(range(len(target_axes))), keepdims=True)
    mask = both > 0
    cond = both / np.where(given > 0, given, 1.0)
    return float(-(both[mask] / n * np.log(cond[mask])).sum())


def _axes(a):
    if isinstance(a, (int, np.integer)):
        return (int(a),)
    return tuple(int(x) for x in a)


def discretize(series, n_bins=3, scheme="equiquantile"):
    """Map a real series onto bin indices ``0 .. n_bins-1``.

    Values equal to an interior bin edge go to the lower bin.  For
    ``equiquantile`` the edges are the empirical k/B quantiles (numpy's linear
    interpolation); for ``equiwidth`` they split [min, max] evenly, so the
    maximum lands in the top bin.
    """
    x = np.asarray(series, dtype=float).ravel()
    n_bins = int(n_bins)
    if n_bins < 2:
        raise ValueError("n_bins must be >= 2")
    if x.size < n_bins:
        raise ValueError(f"series length {x.size} is shorter than n_bins={n_bins}")
    lo, hi = x.min(), x.max()
    if lo == hi:
        raise DegenerateSeries("series")
    if scheme == "equiquantile":
        edges = np.quantile(x, np.arange(1, n_bins) / n_bins)
    elif scheme == "equiwidth":
        edges = lo + (hi - lo) * np.arange(1, n_bins) / n_bins
    else:
        raise ValueError(f"unknown discretization scheme {scheme!r}")
    return SymbolSeries(np.searchsorted(edges, x, side="left"), n_bins)


@dataclass
class TransferEntropyResult:
    """Discrete transfer entropy estimate and its sampling diagnostics."""

    value: float
    ratio_form: float
    n_samples: int
    state_space: int
    small_sample: bool
    lag: int

    def __float__(self):
        return self.value


def _lagged(series, lag):
    """Present values and lags 1..lag, all trimmed to the common window."""
    s = series.symbols
    t_len = s.size
    present = SymbolSeries(s[lag:], series.n_bins)
    past = [SymbolSeries(s[lag - k:t_len - k], series.n_bins) for k in range(1, lag + 1)]
    return present, past


def transfer_entropy_tables(source, target, conditioning=(), lag=1,
                            max_cells=DEFAULT_MAX_CELLS):
    """Joint table with axes [X(t), X-, Y-, Z-] and the axis groups."""
    if lag < 1:
        raise ValueError("lag must be >= 1")
    series = [target, source, *conditioning]
    length = len(target)
    if any(len(s) != length for s in series):
        raise ValueError("all series must have equal length")
    if length <= lag:
        raise ValueError(f"series length {length} too short for lag {lag}")
    present, x_past = _lagged(target, lag)
    _, y_past = _lagged(source, lag)
    z_past = [ax for z in conditioning for ax in _lagged(z, lag)[1]]
    axes = [present, *x_past, *y_past, *z_past]
    cells = math.prod(a.n_bins for a in axes)
    if cells > max_cells:
        raise StateSpaceTooLarge(
            f"StateSpaceTooLarge: joint state space {cells} exceeds cap {max_cells}")
    dist = JointDistribution.from_symbols(*axes, max_cells=max_cells)
    groups = {
        "x": (0,),
        "x_past": tuple(range(1, 1 + lag)),
        "y_past": tuple(range(1 + lag, 1 + 2 * lag)),
        "z_past": tuple(range(1 + 2 * lag, len(axes))),
    }
    return dist, groups


def _te_entropy_difference(dist, g):
    without_y = g["x_past"] + g["z_past"]
    with_y = g["x_past"] + g["y_past"] + g["z_past"]
    return (conditional_entropy(dist, g["x"], without_y)
            - conditional_entropy(dist, g["x"], with_y))


def _te_log_ratio_sum(dist, g):
    """sum p(x, x-, y-, z-) ln [p(x | x-, y-, z-) / p(x | x-, z-)]."""
    c = dist.counts.astype(float)
    n = c.sum()
    c_given_full = c.sum(axis=g["x"], keepdims=True)
    c_x_xz = c.sum(axis=g["y_past"], keepdims=True) if g["y_past"] else c
    c_xz = c_x_xz.sum(axis=g["x"], keepdims=True)
    mask = c > 0
    num = c / np.where(c_given_full > 0, c_given_full, 1.0)
    den = np.broadcast_to(c_x_xz / np.where(c_xz > 0, c_xz, 1.0), c.shape)
    return float((c[mask] / n * np.log(num[mask] / den[mask])).sum())


def discrete_transfer_entropy(source, target, conditioning=(), lag=1,
                              max_cells=DEFAULT_MAX_CELLS, check_tol=1e-12):
    """Transfer entropy from ``source`` to ``target`` given ``conditioning``.

    Computed as H(X | X-, Z-) - H(X | X-, Y-, Z-) and cross-checked against the
    log-ratio sum over the joint distribution; disagreement beyond
    ``check_tol`` raises ``ArithmeticError``.  A :class:`SmallSampleWarning` is
    issued (and ``small_sample`` set) when there are fewer than 10 samples per
    joint cell.
    """
    dist, groups = transfer_entropy_tables(source, target, conditioning, lag, max_cells)
    te = _te_entropy_difference(dist, groups)
    alt = _te_log_ratio_sum(dist, groups)
    if abs(te - alt) > check_tol:
        raise ArithmeticError(f"transfer entropy paths disagree: {te!r} vs {alt!r}")
    n = int(dist.total)
    cells = math.prod(dist.dims)
    small = n < SAMPLES_PER_CELL * cells
    if small:
        warnings.warn(f"{n} samples for a {cells}-cell joint state space",
                      SmallSampleWarning, stacklevel=2)
    return TransferEntropyResult(value=te, ratio_form=alt, n_samples=n, state_space=cells,
                                 small_sample=small, lag=lag)


def gaussian_conditional_entropy(residual_variance):
    """Differential entropy 0.5 * ln(2 pi e s2) of a Gaussian with variance s2."""
    s2 = float(residual_variance)
    if not s2 > 0:
        raise NonPositiveVariance(f"NonPositiveVariance: {s2!r}")
    return 0.5 * math.log(2.0 * math.pi * math.e * s2)
