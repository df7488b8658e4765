"""Per-frequency cross-spectral blocks, their eigen-structure and the real eigenbasis.

Frequency indices ``k`` are 1-based (``k = 1`` is frequency zero, the
trend) and so are subcomponent indices ``m`` (``m = 1`` is the largest
eigenvalue of a block).  Series indices ``i`` are 0-based positions, as
in ``panel.values[i]``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .errors import NumericalError, ParameterError
from .moments import CirculantBlocks

__all__ = [
    "SpectralBlockSet",
    "RealEigenbasis",
    "PhaseSegments",
    "spectral_blocks",
    "eigendecompose_blocks",
    "real_eigenbasis",
    "phase_segments",
    "eigen_residuals",
    "orthonormality_error",
]

log = logging.getLogger(__name__)

CLAMP_TOL = 1e-8
ERROR_TOL = 1e-6
ORTHO_TOL = 1e-8
TIE_RTOL = 1e-8


@dataclass(frozen=True, eq=False)
class SpectralBlockSet:
    """Hermitian ``M x M`` blocks ``F_1..F_L`` and, once computed, their eigenpairs.

    ``eigenvalues[k-1]`` is sorted in descending order and
    ``eigenvectors[k-1][:, m-1]`` is the unit eigenvector for
    ``eigenvalues[k-1, m-1]``.
    """

    blocks: np.ndarray  # (L, M, M) complex
    eigenvalues: np.ndarray | None = None  # (L, M)
    eigenvectors: np.ndarray | None = None  # (L, M, M) complex, columns

    @property
    def L(self) -> int:
        return self.blocks.shape[0]

    @property
    def M(self) -> int:
        return self.blocks.shape[1]

    @property
    def n_frequencies(self) -> int:
        """Number of distinct frequency pairs, ``floor(L/2) + 1``."""
        return self.L // 2 + 1

    def traces(self) -> np.ndarray:
        return np.einsum("kii->k", self.blocks).real

    def require_eigen(self):
        if self.eigenvalues is None:
            raise ParameterError("spectral blocks have not been eigendecomposed")

    def check_k(self, k) -> int:
        if not 1 <= k <= self.L:
            raise ParameterError(f"frequency index k={k} outside 1..{self.L}")
        return int(k)

    def check_m(self, m) -> int:
        if not 1 <= m <= self.M:
            raise ParameterError(f"subcomponent index m={m} outside 1..{self.M}")
        return int(m)


@dataclass(frozen=True, eq=False)
class RealEigenbasis:
    """The ``LM`` real orthonormal eigenvectors of the block circulant matrix.

    Column ``(k-1)*M + (m-1)`` of `vectors` is the vector for frequency
    ``k`` and subcomponent ``m``; `eigenvalues` follows the same flat order.
    """

    vectors: np.ndarray  # (LM, LM)
    eigenvalues: np.ndarray  # (LM,)
    L: int
    M: int

    @property
    def frequencies(self) -> np.ndarray:
        """Frequency in cycles per sample of each k, ``(k-1)/L``."""
        return np.arange(self.L) / self.L

    def index(self, k: int, m: int) -> int:
        if not 1 <= k <= self.L:
            raise ParameterError(f"frequency index k={k} outside 1..{self.L}")
        if not 1 <= m <= self.M:
            raise ParameterError(f"subcomponent index m={m} outside 1..{self.M}")
        return (k - 1) * self.M + (m - 1)

    def vector(self, k: int, m: int) -> np.ndarray:
        return self.vectors[:, self.index(k, m)]

    def segment(self, k: int, m: int, i: int) -> np.ndarray:
        """Entries of the (k, m) vector belonging to series `i` (length L)."""
        if not 0 <= i < self.M:
            raise ParameterError(f"series index i={i} outside 0..{self.M - 1}")
        return self.vectors[i :: self.M, self.index(k, m)]

    def segments(self, k: int, m: int) -> np.ndarray:
        """All per-series segments of the (k, m) vector, shape (M, L)."""
        return self.vector(k, m).reshape(self.L, self.M).T


def spectral_blocks(circ: CirculantBlocks) -> SpectralBlockSet:
    """Cross-spectral blocks ``F_k = sum_j Omega_j exp(-2 pi i j (k-1) / L)``.

    Blocks are symmetrized to be exactly Hermitian, blocks ``k`` and
    ``L+2-k`` are made exact conjugates and the self-conjugate blocks
    (``k = 1`` and ``k = L/2 + 1``) exactly real.
    """
    L = circ.L
    F = np.fft.fft(circ.omegas, axis=0)
    F = 0.5 * (F + np.conj(np.swapaxes(F, 1, 2)))
    for kk in range(1, (L + 1) // 2):
        F[L - kk] = np.conj(F[kk])
    F[0] = F[0].real
    if L % 2 == 0:
        F[L // 2] = F[L // 2].real
    return SpectralBlockSet(F)


def _reference_index(vec: np.ndarray) -> int:
    mod = np.abs(vec)
    return int(np.flatnonzero(mod >= mod.max() * (1 - TIE_RTOL))[0])


def _conventional_eigh(F: np.ndarray, scale: float, k: int):
    """Descending eigenpairs of one Hermitian block with sign/phase conventions."""
    if np.iscomplexobj(F) and np.any(F.imag):
        lam, E = np.linalg.eigh(F)
    else:
        lam, E = np.linalg.eigh(F.real)
    lam, E = lam[::-1].copy(), E[:, ::-1].copy()

    low = lam.min()
    if low < -ERROR_TOL * scale:
        raise NumericalError(
            f"block k={k} has eigenvalue {low:.3e} below -{ERROR_TOL:g} x scale ({scale:.3e}); "
            "the covariance input is not positive semidefinite"
        )
    if low < -CLAMP_TOL * scale:
        log.warning("block k=%d: clamping eigenvalue %.3e (scale %.3e)", k, low, scale)
    lam = np.maximum(lam, 0.0)

    refs = np.empty(E.shape[1], dtype=int)
    for m in range(E.shape[1]):
        r = _reference_index(E[:, m])
        refs[m] = r
        pivot = E[r, m]
        E[:, m] *= np.conj(pivot) / abs(pivot)
        E[r, m] = abs(E[r, m])

    # Numerically equal eigenvalues: order the cluster by reference index.
    tol = 1e-10 * max(scale, np.finfo(float).tiny)
    order = list(range(len(lam)))
    start = 0
    while start < len(lam):
        stop = start + 1
        while stop < len(lam) and lam[stop - 1] - lam[stop] <= tol:
            stop += 1
        if stop - start > 1:
            order[start:stop] = sorted(order[start:stop], key=lambda j: refs[j])
        start = stop
    return lam[order], E[:, order]


def eigendecompose_blocks(blocks: SpectralBlockSet) -> SpectralBlockSet:
    """Attach descending eigenvalues and conventionally phased unit eigenvectors.

    Only blocks ``k = 1..floor(L/2)+1`` are decomposed; the remaining ones
    are filled in by conjugation so the pairing ``lambda_k = lambda_{L+2-k}``,
    ``e_k = conj(e_{L+2-k})`` holds exactly.  Eigenvalues slightly below
    zero are clamped to zero; values below ``-1e-6 * scale`` raise
    :class:`NumericalError`, where scale is the block trace floored at the
    average block trace.
    """
    L, M = blocks.L, blocks.M
    traces = blocks.traces()
    floor = max(float(traces.mean()), 0.0)
    lam = np.empty((L, M))
    vecs = np.empty((L, M, M), dtype=complex)
    for kk in range(L // 2 + 1):
        F = blocks.blocks[kk]
        if kk == 0 or 2 * kk == L:
            F = F.real
        lam[kk], vecs[kk] = _conventional_eigh(F, max(float(traces[kk]), floor), kk + 1)
    for kk in range(L // 2 + 1, L):
        lam[kk] = lam[L - kk]
        vecs[kk] = np.conj(vecs[L - kk])
    return replace(blocks, eigenvalues=lam, eigenvectors=vecs)


def orthonormality_error(vectors: np.ndarray) -> float:
    """``max |V'V - I|``."""
    gram = vectors.T @ vectors
    return float(np.max(np.abs(gram - np.eye(gram.shape[0]))))


def real_eigenbasis(blocks: SpectralBlockSet, L: int | None = None, M: int | None = None,
                    *, check: bool = True) -> RealEigenbasis:
    """Real orthonormal eigenbasis built from ``v_{k,m} = u_k (x) e_{k,m}``.

    ``u_k`` is column k of the unitary Fourier matrix,
    ``exp(-2 pi i (j-1)(k-1) / L) / sqrt(L)``.  Frequencies k = 1 and
    (L even) k = L/2 + 1 keep ``v`` itself, which is real; for
    ``2 <= k <= floor((L+1)/2)`` the vector is ``sqrt(2) Re v_{k,m}`` and for
    the mirrored half ``sqrt(2) Im v_{L+2-k,m}``.

    Raises
    ------
    NumericalError
        If `check` is set and ``max |V'V - I|`` exceeds 1e-8.
    """
    blocks.require_eigen()
    L = blocks.L if L is None else L
    M = blocks.M if M is None else M
    if (L, M) != (blocks.L, blocks.M):
        raise ParameterError(f"block set has L={blocks.L}, M={blocks.M}; got L={L}, M={M}")
    G = (L + 1) // 2
    j = np.arange(L)
    V = np.empty((L * M, L * M))
    for k in range(1, L + 1):
        cols = slice((k - 1) * M, k * M)
        if k == 1:
            V[:, cols] = np.kron(np.full((L, 1), 1 / np.sqrt(L)), blocks.eigenvectors[0].real)
        elif 2 * (k - 1) == L:
            u = np.where(j % 2 == 0, 1.0, -1.0)[:, None] / np.sqrt(L)
            V[:, cols] = np.kron(u, blocks.eigenvectors[k - 1].real)
        elif k <= G:
            u = np.exp(-2j * np.pi * j * (k - 1) / L)[:, None] / np.sqrt(L)
            V[:, cols] = np.sqrt(2) * np.kron(u, blocks.eigenvectors[k - 1]).real
        else:
            kp = L + 2 - k
            u = np.exp(-2j * np.pi * j * (kp - 1) / L)[:, None] / np.sqrt(L)
            V[:, cols] = np.sqrt(2) * np.kron(u, blocks.eigenvectors[kp - 1]).imag
    if check:
        err = orthonormality_error(V)
        if err > ORTHO_TOL:
            raise NumericalError(f"real eigenbasis is not orthonormal: max |V'V - I| = {err:.3e}")
    return RealEigenbasis(V, blocks.eigenvalues.reshape(-1).copy(), L, M)


def eigen_residuals(circ: CirculantBlocks, basis: RealEigenbasis) -> np.ndarray:
    """``||S_C v - lambda v|| / (1 + lambda)`` for every basis vector (materializes S_C)."""
    S = circ.full()
    R = S @ basis.vectors - basis.vectors * basis.eigenvalues[None, :]
    return np.linalg.norm(R, axis=0) / (1 + basis.eigenvalues)


class PhaseSegments(NamedTuple):
    segments: np.ndarray  # (M, L)
    phases: np.ndarray  # (M,), nan where undefined
    reference: int


def phase_segments(basis: RealEigenbasis, blocks: SpectralBlockSet, k: int, m: int) -> PhaseSegments:
    """Per-series segments of the (k, m) basis vector and relative phases.

    Phases are ``arg e[i] - arg e[ref]`` wrapped to ``(-pi, pi]``, with
    ``ref`` the largest-modulus entry of the complex eigenvector.  Entries
    with modulus below 1e-12 get ``nan``.
    """
    blocks.require_eigen()
    blocks.check_k(k)
    blocks.check_m(m)
    e = blocks.eigenvectors[k - 1][:, m - 1]
    ref = _reference_index(e)
    phases = np.angle(e) - np.angle(e[ref])
    phases = np.mod(phases + np.pi, 2 * np.pi) - np.pi
    phases[np.isclose(phases, -np.pi, rtol=0, atol=1e-15)] = np.pi
    phases[ref] = 0.0
    phases[np.abs(e) < 1e-12] = np.nan
    return PhaseSegments(basis.segments(k, m), phases, ref)
