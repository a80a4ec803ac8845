"""Lagged regressions and conditional Granger causality.

For an ordered pair (source Y, target X) with the remaining series Z, two
nested least-squares models of X(t) are fit on the same sample window:

    restricted:  X(t) ~ 1 + X(t-1..t-p) + Z(t-1..t-p)
    full:        X(t) ~ 1 + X(t-1..t-p) + Y(t-1..t-p) + Z(t-1..t-p)

and the causality is ``gc = ln(s2_restricted / s2_full)`` with the residual
variances ``s2 = rss / n_obs``.  Under Gaussian residuals the transfer entropy
is exactly half of it.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, stats

from . import rng
from .exceptions import InsufficientSamples, MarketflowError, RankDeficient, UnknownLabel

logger = logging.getLogger(__name__)

RANK_TOL = 1e-10
# rss at or below this fraction of the target's sum of squares is rounding noise
ZERO_RSS_REL = 1e-24
DEFAULT_P_MAX = 10


@dataclass
class LagDesign:
    target: np.ndarray
    predictors: np.ndarray
    p: int
    included_sources: list
    target_label: str = ""
    start: int = 0

    @property
    def n_obs(self):
        return self.target.shape[0]

    @property
    def n_params(self):
        return self.predictors.shape[1]

    @property
    def column_names(self):
        return ["intercept"] + [f"{s}.L{k}" for s in self.included_sources
                                for k in range(1, self.p + 1)]


@dataclass
class OlsFit:
    coefficients: np.ndarray
    residuals: np.ndarray
    rss: float
    residual_variance: float
    dof: int


@dataclass
class GcResult:
    source: str
    target: str
    gc: float
    te: float
    p_value: float
    lag: int
    method: str
    conditioned_on: list = field(default_factory=list)
    f_statistic: float = float("nan")


@dataclass
class CausalityMatrix:
    """Ordered-pair causality; entry ``[i, j]`` is the flow from i to j."""

    labels: list
    gc: np.ndarray
    p_values: np.ndarray
    lag: int
    method: str = "f_test"
    seed: int = 42
    n_surrogates: int = 0
    fallback: np.ndarray = None
    failures: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.labels)
        self.gc = np.asarray(self.gc, dtype=float)
        self.p_values = np.asarray(self.p_values, dtype=float)
        if self.fallback is None:
            self.fallback = np.zeros((n, n), dtype=bool)

    @property
    def te(self):
        return self.gc / 2.0

    @property
    def n_series(self):
        return len(self.labels)

    def to_dict(self):
        return {
            "labels": list(self.labels),
            "gc": [[_num(v) for v in row] for row in self.gc],
            "te": [[_num(v) for v in row] for row in self.te],
            "p_values": [[_num(v) for v in row] for row in self.p_values],
            "lag": int(self.lag),
            "method": self.method,
            "seed": int(self.seed),
            "n_surrogates": int(self.n_surrogates),
            "fallback": [[bool(v) for v in row] for row in self.fallback],
            "failures": [{"from": s, "to": t, "reason": r}
                         for (s, t), r in sorted(self.failures.items())],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            labels=list(d["labels"]),
            gc=[[_unnum(v) for v in row] for row in d["gc"]],
            p_values=[[_unnum(v) for v in row] for row in d["p_values"]],
            lag=d["lag"], method=d["method"], seed=d["seed"],
            n_surrogates=d["n_surrogates"],
            fallback=np.array(d["fallback"], dtype=bool).reshape(len(d["labels"]), -1),
            failures={(f["from"], f["to"]): f["reason"] for f in d["failures"]},
        )


def _num(v):
    """JSON-safe float: non-finite values become the strings "inf", "-inf", "nan"."""
    v = float(v)
    if math.isfinite(v):
        return v
    return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")


def _unnum(v):
    return float(v)


def _label_index(panel, label):
    try:
        return panel.labels.index(label)
    except ValueError:
        raise UnknownLabel(label) from None


def build_lag_design(panel, target, sources, p, start=None):
    """Regress ``target`` at rows ``start..T-1`` on lags 1..p of ``sources``.

    ``start`` defaults to ``p``; a larger value trims the window so designs of
    different lag orders share the same rows.
    """
    t_idx = _label_index(panel, target)
    s_idx = [_label_index(panel, s) for s in sources]
    return _design(panel.values, panel.labels, t_idx, s_idx, p, start)


def _design(values, labels, t_idx, s_idx, p, start=None):
    p = int(p)
    if p < 1:
        raise ValueError(f"lag order must be >= 1, got {p}")
    start = p if start is None else int(start)
    if start < p:
        raise ValueError("start must be >= p")
    t_len = values.shape[0]
    n_rows = t_len - start
    k = 1 + p * len(s_idx)
    if n_rows < k:
        raise InsufficientSamples(
            f"InsufficientSamples: {n_rows} observations for {k} parameters "
            f"(T={t_len}, p={p}, {len(s_idx)} series)")
    X = np.empty((n_rows, k))
    X[:, 0] = 1.0
    col = 1
    for j in s_idx:
        for lag in range(1, p + 1):
            X[:, col] = values[start - lag:t_len - lag, j]
            col += 1
    return LagDesign(
        target=values[start:, t_idx].copy(),
        predictors=X,
        p=p,
        included_sources=[labels[j] for j in s_idx],
        target_label=labels[t_idx],
        start=start,
    )


def ols_fit(design, rank_tol=RANK_TOL):
    """Least squares by column-pivoted QR.

    Columns are scaled to unit norm before the rank check so the condition
    test does not depend on the units of the series.  Raises
    :class:`RankDeficient` when the smallest/largest singular value ratio of
    the scaled design is at or below ``rank_tol``.  An rss below
    ``ZERO_RSS_REL * |y|^2`` is reported as exactly 0.
    """
    X = design.predictors
    y = design.target
    n, k = X.shape
    names = design.column_names
    norms = np.linalg.norm(X, axis=0)
    zero = [names[j] for j in range(k) if norms[j] == 0]
    if zero:
        raise RankDeficient(zero)
    Xs = X / norms
    Q, R, piv = linalg.qr(Xs, mode="economic", pivoting=True)
    sv = linalg.svdvals(R)
    if not sv[-1] > rank_tol * sv[0]:
        rank = int(np.sum(sv > rank_tol * sv[0]))
        raise RankDeficient(sorted(names[j] for j in piv[rank:]))
    z = linalg.solve_triangular(R, Q.T @ y)
    beta = np.empty(k)
    beta[piv] = z
    beta /= norms
    resid = y - X @ beta
    rss = float(resid @ resid)
    if rss <= ZERO_RSS_REL * float(y @ y):
        rss = 0.0
    return OlsFit(coefficients=beta, residuals=resid, rss=rss,
                  residual_variance=rss / n, dof=n - k)


def _pair_designs(panel, source, target, p, conditioning):
    """Restricted and full designs sharing one sample window."""
    if source == target:
        raise ValueError("source and target must differ")
    restricted_sources = [target] + list(conditioning)
    full_sources = [target, source] + list(conditioning)
    full = build_lag_design(panel, target, full_sources, p)
    restricted = build_lag_design(panel, target, restricted_sources, p)
    return restricted, full


def _gc_from_rss(rss1, rss2):
    if rss2 == 0.0:
        return 0.0 if rss1 == 0.0 else math.inf
    return math.log(rss1 / rss2)


def f_test_pvalue(rss1, rss2, p, dof2):
    """Return (p_value, F) with F = ((rss1 - rss2)/p) / (rss2/dof2) on F(p, dof2)."""
    if rss2 == 0.0:
        return (1.0 if rss1 == 0.0 else 0.0), (0.0 if rss1 == 0.0 else math.inf)
    f = max(rss1 - rss2, 0.0) / p / (rss2 / dof2)
    return float(stats.f.sf(f, p, dof2)), f


def _default_conditioning(panel, source, target):
    return [lab for lab in panel.labels if lab not in (source, target)]


def _surrogate_pvalue(panel, source, target, p, conditioning, observed, rss1,
                      n_surrogates, seed):
    """Rank of ``observed`` among gc values with the source circularly shifted.

    Offsets are distinct integers in [p, T - p] drawn from the (seed, i, j)
    stream; the p-value is ``(1 + #{surrogate >= observed}) / (1 + n)``.
    """
    i = _label_index(panel, source)
    j = _label_index(panel, target)
    t_len = panel.n_samples
    n_offsets = t_len - 2 * p + 1
    if n_surrogates > n_offsets:
        raise InsufficientSamples(
            f"InsufficientSamples: only {n_offsets} distinct shifts for "
            f"{n_surrogates} surrogates")
    offsets = rng.distinct_integers(rng.stream(seed, i, j), p, t_len - p, n_surrogates)
    values = panel.values.copy()
    original = values[:, i].copy()
    s_idx = [j, i] + [_label_index(panel, z) for z in conditioning]
    exceed = 0
    for off in offsets:
        values[:, i] = np.roll(original, off)
        full = _design(values, panel.labels, j, s_idx, p)
        if _gc_from_rss(rss1, ols_fit(full).rss) >= observed:
            exceed += 1
    return (1 + exceed) / (1 + n_surrogates)


def _evaluate_pair(panel, source, target, p, conditioning, method, n_surrogates, seed):
    restricted, full = _pair_designs(panel, source, target, p, conditioning)
    fit1 = ols_fit(restricted)
    fit2 = ols_fit(full)
    if fit2.dof < 1:
        raise InsufficientSamples(
            f"InsufficientSamples: no residual degrees of freedom for {source} -> {target}")
    gc = _gc_from_rss(fit1.rss, fit2.rss)
    p_f, f_stat = f_test_pvalue(fit1.rss, fit2.rss, p, fit2.dof)
    if method == "f_test":
        p_value = p_f
    elif method == "surrogate":
        if math.isinf(gc):
            p_value = 0.0
        else:
            p_value = _surrogate_pvalue(panel, source, target, p, conditioning, gc,
                                        fit1.rss, n_surrogates, seed)
    else:
        raise ValueError(f"unknown significance method {method!r}")
    return GcResult(source=source, target=target, gc=gc, te=gc / 2.0, p_value=p_value,
                    lag=p, method=method, conditioned_on=list(conditioning),
                    f_statistic=f_stat)


def conditional_gc(panel, source, target, p, method="f_test", n_surrogates=100, seed=42,
                   conditioning=None):
    """Granger causality from ``source`` to ``target`` given all other series.

    ``conditioning`` overrides the default set (every series except the
    pair); pass ``[]`` for plain pairwise causality.
    """
    _label_index(panel, source)
    _label_index(panel, target)
    if panel.n_series < 2:
        raise ValueError("need at least 2 series")
    if conditioning is None:
        conditioning = _default_conditioning(panel, source, target)
    return _evaluate_pair(panel, source, target, p, conditioning, method, n_surrogates, seed)


def gc_significance(panel, source, target, p, method="f_test", n_surrogates=100, seed=42,
                    conditioning=None):
    return conditional_gc(panel, source, target, p, method, n_surrogates, seed,
                          conditioning).p_value


def select_lag_bic(panel, target, p_max=DEFAULT_P_MAX, sources=None):
    """Lag order in 1..p_max minimizing the Schwarz criterion.

    Every candidate regresses ``target`` on lags of ``sources`` (default: the
    target followed by every other series) over the common window starting
    at row ``p_max``::

        BIC(p) = N ln(rss/N) + k ln N,   N = T - p_max,  k = 1 + p * len(sources)

    Ties go to the smaller order.
    """
    p_max = int(p_max)
    if p_max < 1:
        raise ValueError("p_max must be >= 1")
    if sources is None:
        sources = [target] + [lab for lab in panel.labels if lab != target]
    best_p, best_bic = None, math.inf
    for p in range(1, p_max + 1):
        design = build_lag_design(panel, target, sources, p, start=p_max)
        fit = ols_fit(design)
        n = design.n_obs
        if fit.rss == 0.0:
            bic = -math.inf
        else:
            bic = n * math.log(fit.rss / n) + design.n_params * math.log(n)
        if best_p is None or bic < best_bic:
            best_p, best_bic = p, bic
    return best_p


def feasible_p_max(n_samples, n_series, p_max=DEFAULT_P_MAX):
    """Largest order <= p_max leaving more rows than parameters for a full VAR row."""
    p = min(int(p_max), (n_samples - 2) // (n_series + 1))
    if p < 1:
        raise InsufficientSamples(
            f"InsufficientSamples: T={n_samples} is too short for {n_series} series")
    return p


def select_common_lag(panel, p_max=DEFAULT_P_MAX):
    """Maximum over targets of the per-target BIC order."""
    p_max = feasible_p_max(panel.n_samples, panel.n_series, p_max)
    return max(select_lag_bic(panel, lab, p_max) for lab in panel.labels)


def causality_matrix(panel, p="auto", method="f_test", n_surrogates=100, seed=42,
                     p_max=DEFAULT_P_MAX):
    """Conditional causality for every ordered pair of series.

    A pair whose conditional designs are rank deficient is recomputed without
    conditioning and flagged in ``fallback``; a pair that still fails gets
    NaN entries and a reason in ``failures``.
    """
    if panel.n_series < 2:
        raise ValueError("causality matrix needs at least 2 series")
    lag = select_common_lag(panel, p_max) if p == "auto" else int(p)
    n = panel.n_series
    gc = np.zeros((n, n))
    pv = np.ones((n, n))
    fallback = np.zeros((n, n), dtype=bool)
    failures = {}
    labels = panel.labels
    for i, src in enumerate(labels):
        for j, tgt in enumerate(labels):
            if i == j:
                continue
            try:
                try:
                    res = conditional_gc(panel, src, tgt, lag, method, n_surrogates, seed)
                except RankDeficient as exc:
                    logger.info("pair %s -> %s rank deficient (%s); pairwise fallback",
                                src, tgt, exc)
                    res = conditional_gc(panel, src, tgt, lag, method, n_surrogates, seed,
                                         conditioning=[])
                    fallback[i, j] = True
            except MarketflowError as exc:
                gc[i, j] = pv[i, j] = math.nan
                failures[(src, tgt)] = str(exc)
                continue
            gc[i, j] = res.gc
            pv[i, j] = res.p_value
    return CausalityMatrix(labels=list(labels), gc=gc, p_values=pv, lag=lag, method=method,
                           seed=seed, n_surrogates=n_surrogates if method == "surrogate" else 0,
                           fallback=fallback, failures=failures)
