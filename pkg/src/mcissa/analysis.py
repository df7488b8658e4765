"""Contribution tables, eigenvector weights, participation indices and denoising."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .decomposition import Decomposition
from .errors import NumericalError, ParameterError
from .spectral import RealEigenbasis, SpectralBlockSet

__all__ = [
    "ContributionTable",
    "frequency_contributions",
    "subcomponent_contributions",
    "eigenvector_weights",
    "participation",
    "series_subcomponent_contributions",
    "denoise",
]


@dataclass(frozen=True, eq=False)
class ContributionTable:
    """Percentage share of total variability per frequency pair.

    Row ``j`` is frequency ``k = j + 1`` with the conjugate frequency
    ``L + 2 - k`` merged into it; `period` is ``L / (k - 1)``.
    """

    k: np.ndarray
    period: np.ndarray
    share: np.ndarray

    def rows(self):
        return list(zip(self.k.tolist(), self.period.tolist(), self.share.tolist()))

    def __getitem__(self, k: int) -> float:
        return float(self.share[k - 1])


def _periods(L: int) -> np.ndarray:
    return np.array([math.inf] + [L / (k - 1) for k in range(2, L // 2 + 2)])


def frequency_contributions(blocks: SpectralBlockSet) -> ContributionTable:
    """Share of each frequency pair in the total trace of the spectral blocks."""
    L = blocks.L
    tr = np.clip(blocks.traces(), 0.0, None)
    total = tr.sum()
    if total <= 0:
        raise NumericalError("total spectral trace is zero; the panel has no variability")
    K = L // 2 + 1
    merged = np.empty(K)
    for k in range(1, K + 1):
        self_paired = k == 1 or 2 * (k - 1) == L
        merged[k - 1] = tr[k - 1] if self_paired else tr[k - 1] + tr[L + 1 - k]
    return ContributionTable(np.arange(1, K + 1), _periods(L), 100.0 * merged / total)


def subcomponent_contributions(blocks: SpectralBlockSet, k: int) -> np.ndarray:
    """Cumulative percentage of the block-k eigenvalues, ``m = 1..M``."""
    blocks.require_eigen()
    k = blocks.check_k(k)
    lam = blocks.eigenvalues[k - 1]
    total = lam.sum()
    if total <= 0:
        raise NumericalError(f"block k={k} has zero trace")
    return 100.0 * np.cumsum(lam) / total


def eigenvector_weights(blocks: SpectralBlockSet, k: int, m: int) -> np.ndarray:
    """Per-series weight ``100 |e_{k,m}[i]|^2`` of a unit eigenvector."""
    blocks.require_eigen()
    k, m = blocks.check_k(k), blocks.check_m(m)
    return 100.0 * np.abs(blocks.eigenvectors[k - 1][:, m - 1]) ** 2


def participation(basis: RealEigenbasis, blocks: SpectralBlockSet) -> np.ndarray:
    """Participation index ``pi[k-1, m-1, i] = lambda_{k,m} ||v_{k,m}^{(i)}||^2``."""
    blocks.require_eigen()
    L, M = basis.L, basis.M
    seg_sq = (basis.vectors.reshape(L, M, L * M) ** 2).sum(axis=0)  # (series, flat)
    pi = basis.eigenvalues[None, :] * seg_sq
    return pi.T.reshape(L, M, M)


def _fit(source, L) -> Decomposition:
    if isinstance(source, Decomposition):
        return source
    if L is None:
        raise ParameterError("window length L is required when passing a panel")
    return Decomposition(source, L)


def series_subcomponent_contributions(panel, L, k: int) -> np.ndarray:
    """Cumulative variance share of the first m subcomponents in each series' frequency-k component.

    Returns an ``(M_series, M)`` array of percentages; rows of series whose
    frequency-k component has zero variance are ``nan``.  `panel` may also
    be a fitted :class:`Decomposition`, in which case `L` is ignored.
    """
    fit = _fit(panel, L)
    if not 1 <= k <= fit.n_frequencies:
        raise ParameterError(f"frequency index k={k} outside 1..{fit.n_frequencies}")
    subs = fit.subcomponents(k)  # (m, series, T)
    partial = np.cumsum(subs, axis=0)
    full_var = partial[-1].var(axis=1)
    out = np.full((fit.M, fit.M), np.nan)
    scale = max(float(np.abs(fit.panel.values).max()), 1.0)
    for i in range(fit.M):
        if full_var[i] <= (1e-14 * scale) ** 2:
            continue
        out[i] = 100.0 * partial[:, i, :].var(axis=1) / full_var[i]
    return out


def denoise(panel, L, k: int, top_m: int) -> np.ndarray:
    """Sum of the `top_m` leading subcomponents at frequency k, shape (M, T)."""
    fit = _fit(panel, L)
    if not 1 <= top_m <= fit.M:
        raise ParameterError(f"top_m={top_m} outside 1..{fit.M}")
    if not 1 <= k <= fit.n_frequencies:
        raise ParameterError(f"frequency index k={k} outside 1..{fit.n_frequencies}")
    return fit.subcomponents(k)[:top_m].sum(axis=0)
