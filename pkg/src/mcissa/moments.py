"""Lagged cross-covariances and the block circulant / block Toeplitz second-moment matrices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .panel import TimeSeriesPanel

__all__ = [
    "AutocovSequence",
    "CirculantBlocks",
    "check_window",
    "estimate_autocov",
    "build_circulant_blocks",
    "build_toeplitz_matrix",
    "circulant_toeplitz_distance",
]


def check_window(L, T) -> int:
    """Validate ``1 < L <= T/2`` and return `L` as an int."""
    if isinstance(L, bool) or int(L) != L:
        raise ParameterError(f"window length must be an integer, got {L!r}")
    L = int(L)
    if L < 2 or 2 * L > T:
        raise ParameterError(f"window length L={L} outside 1 < L <= T/2 for T={T}")
    return L


def _as_array(panel) -> np.ndarray:
    if isinstance(panel, TimeSeriesPanel):
        return panel.values
    x = np.asarray(panel, dtype=float)
    return x[None, :] if x.ndim == 1 else x


@dataclass(frozen=True, eq=False)
class AutocovSequence:
    """Lag-0..L-1 cross-covariance matrices ``gammas[k][r, s] = cov(x_{t+k}^r, x_t^s)``.

    Negative lags are implicit: ``Gamma_{-k} = Gamma_k.T``.
    """

    gammas: np.ndarray  # (L, M, M)
    T: int | None = None

    @property
    def L(self) -> int:
        return self.gammas.shape[0]

    @property
    def M(self) -> int:
        return self.gammas.shape[1]

    def lag(self, k: int) -> np.ndarray:
        """Gamma_k for ``-L < k < L``."""
        return self.gammas[k] if k >= 0 else self.gammas[-k].T


@dataclass(frozen=True, eq=False)
class CirculantBlocks:
    """First block row ``omegas[0..L-1]`` of a symmetric block circulant matrix."""

    omegas: np.ndarray  # (L, M, M)

    @property
    def L(self) -> int:
        return self.omegas.shape[0]

    @property
    def M(self) -> int:
        return self.omegas.shape[1]

    def full(self) -> np.ndarray:
        """Materialize the ``LM x LM`` matrix; block (r, c) is ``omegas[(c - r) % L]``."""
        L, M = self.L, self.M
        idx = (np.arange(L)[None, :] - np.arange(L)[:, None]) % L
        return self.omegas[idx].transpose(0, 2, 1, 3).reshape(L * M, L * M)


def estimate_autocov(panel, L: int) -> AutocovSequence:
    """Biased (divisor ``T``) sample cross-covariances at lags ``0..L-1``.

    The panel is assumed demeaned; no centring is done here.
    """
    x = _as_array(panel)
    M, T = x.shape
    L = check_window(L, T)
    gammas = np.empty((L, M, M))
    for k in range(L):
        gammas[k] = x[:, k:] @ x[:, : T - k].T / T
    return AutocovSequence(gammas, T)


def build_circulant_blocks(autocov: AutocovSequence) -> CirculantBlocks:
    """Blend lags ``L-k`` and ``-k`` into the circulant first block row.

    ``Omega_k = (k/L) Gamma_{L-k} + ((L-k)/L) Gamma_k.T`` and ``Omega_0 = Gamma_0``.
    """
    g = autocov.gammas
    L = autocov.L
    omegas = np.empty_like(g)
    omegas[0] = g[0]
    for k in range(1, L):
        omegas[k] = (k / L) * g[L - k] + ((L - k) / L) * g[k].T
    return CirculantBlocks(omegas)


def build_toeplitz_matrix(autocov: AutocovSequence) -> np.ndarray:
    """Block Toeplitz matrix with block (i, j) equal to ``Gamma_{i-j}``."""
    L, M = autocov.L, autocov.M
    out = np.empty((L * M, L * M))
    for i in range(L):
        for j in range(L):
            out[i * M : (i + 1) * M, j * M : (j + 1) * M] = autocov.lag(i - j)
    return out


def circulant_toeplitz_distance(autocov: AutocovSequence) -> float:
    """``||S_T - S_C||_F / sqrt(L)`` computed lag by lag.

    Block (i, j) of the difference depends only on ``d = j - i`` and occurs
    ``L - |d|`` times, so the full matrices are never formed.
    """
    L = autocov.L
    omegas = build_circulant_blocks(autocov).omegas
    total = 0.0
    for d in range(-(L - 1), L):
        diff = autocov.lag(-d) - omegas[d % L]
        total += (L - abs(d)) * float(np.sum(diff * diff))
    return float(np.sqrt(total / L))
