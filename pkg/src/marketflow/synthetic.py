"""Processes with known causal structure, used as ground truth."""

import datetime as dt
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .exceptions import NonStationary
from .infotheory import SymbolSeries
from .ingest import Preprocessing, PricePanel, ReturnPanel

EPOCH = dt.date(2000, 1, 1)
BURN_IN_PER_LAG = 10


@dataclass
class VarSpec:
    """Gaussian VAR(p): ``X(t) = sum_k coupling[k] @ X(t-k) + noise_sd * e(t)``.

    ``coupling[k][i][j]`` is the effect of series j at lag k+1 on series i.
    """

    n: int
    p: int
    coupling: list
    noise_sd: list = None
    T: int = 1000
    seed: int = 42
    labels: list = field(default=None)

    def __post_init__(self):
        self.coupling = np.asarray(self.coupling, dtype=float).reshape(self.p, self.n, self.n)
        if self.noise_sd is None:
            self.noise_sd = np.ones(self.n)
        self.noise_sd = np.broadcast_to(np.asarray(self.noise_sd, dtype=float), (self.n,)).copy()
        if np.any(self.noise_sd <= 0):
            raise ValueError("noise_sd must be positive")
        if self.labels is None:
            self.labels = default_labels(self.n)

    def companion(self):
        n, p = self.n, self.p
        C = np.zeros((n * p, n * p))
        C[:n, :] = np.hstack(list(self.coupling))
        if p > 1:
            C[n:, :-n] = np.eye(n * (p - 1))
        return C

    def spectral_radius(self):
        return float(np.max(np.abs(np.linalg.eigvals(self.companion()))))


def default_labels(n):
    """A, B, ..., Z, then S26, S27, ..."""
    return [chr(ord("A") + k) if k < 26 else f"S{k}" for k in range(n)]


def synthetic_dates(n):
    return [EPOCH + dt.timedelta(days=k) for k in range(n)]


def chain_spec(n=3, coupling=0.4, self_coupling=0.3, p=2, T=2000, seed=42):
    """Chain S0 -> S1 -> ... with the cross effect at lag 1.

    Each series has autoregression ``self_coupling`` at lag 1 and
    ``-self_coupling / 3`` at lag 2 when ``p >= 2``.
    """
    A = np.zeros((p, n, n))
    A[0] += self_coupling * np.eye(n)
    if p >= 2:
        A[1] += -self_coupling / 3.0 * np.eye(n)
    for k in range(1, n):
        A[0, k, k - 1] = coupling
    return VarSpec(n=n, p=p, coupling=A, T=T, seed=seed)


def generate_var(spec):
    """Simulate ``spec`` into a :class:`ReturnPanel` of length ``spec.T``.

    Starts from zeros, discards ``10 * p`` burn-in steps; noise is the
    Box-Muller normal stream of ``rng.stream(seed)`` in row-major order.
    """
    radius = spec.spectral_radius()
    if not radius < 1.0 - 1e-10:
        raise NonStationary(radius)
    n, p, T = spec.n, spec.p, int(spec.T)
    burn = BURN_IN_PER_LAG * p
    total = T + burn
    noise = rng.standard_normals(rng.stream(spec.seed), total * n).reshape(total, n)
    noise *= spec.noise_sd
    # state [X(t), X(t-1), ..., X(t-p+1)] advanced by the companion matrix
    C = spec.companion()
    state = np.zeros(n * p)
    out = np.empty((total, n))
    shock = np.zeros(n * p)
    for t in range(total):
        shock[:n] = noise[t]
        state = C @ state + shock
        out[t] = state[:n]
    samples = out[burn:]
    return ReturnPanel(timestamps=synthetic_dates(T + 1)[1:], labels=list(spec.labels),
                       values=samples, preprocessing=Preprocessing(), base_timestamp=EPOCH)


def generate_copy_chain(T, seed=42):
    """X iid uniform on {0, 1} and Y(t) = X(t-1); returns (X, Y)."""
    T = int(T)
    if T < 2:
        raise ValueError("T must be >= 2")
    bits = (rng.uniforms(rng.stream(seed), T + 1) < 0.5).astype(np.int64)
    return SymbolSeries(bits[1:], 2), SymbolSeries(bits[:-1], 2)


def price_panel_from_returns(panel, initial_price=100.0):
    """Invert log-returns: ``p(t) = initial * exp(cumsum(r))``."""
    if not initial_price > 0:
        raise ValueError("initial_price must be positive")
    n = panel.n_series
    logp = np.vstack([np.zeros((1, n)), np.cumsum(panel.values, axis=0)])
    base = panel.base_timestamp
    if base is None:
        first = panel.timestamps[0] if panel.timestamps else EPOCH + dt.timedelta(days=1)
        base = first - dt.timedelta(days=1)
    return PricePanel(timestamps=[base] + list(panel.timestamps), labels=list(panel.labels),
                      values=initial_price * np.exp(logp))
