"""Embedding, projection, grouping and diagonal averaging.

The workhorse is :class:`Decomposition`, which embeds a panel, estimates
the circulant second moments, builds the real eigenbasis and then hands
out reconstructed components for any set of (frequency, subcomponent)
pairs on demand.  Frequencies ``k`` and subcomponents ``m`` are 1-based,
series positions ``i`` are 0-based.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple

import numpy as np

from .errors import GroupingError, ParameterError
from .moments import build_circulant_blocks, check_window, estimate_autocov
from .panel import TimeSeriesPanel
from .spectral import eigendecompose_blocks, real_eigenbasis, spectral_blocks

__all__ = [
    "TrajectoryMatrix",
    "Selector",
    "GroupingSpec",
    "ResolvedGrouping",
    "Decomposition",
    "ReconstructedSet",
    "UniquenessReport",
    "RESIDUAL",
    "embed",
    "elementary_projection",
    "pair_columns",
    "group_matrices",
    "hankelize",
    "decompose",
    "decompose_univariate",
    "uniqueness_check",
    "period_to_frequency",
]

RESIDUAL = "residual"


def _as_panel(panel) -> TimeSeriesPanel:
    if isinstance(panel, TimeSeriesPanel):
        return panel
    x = np.asarray(panel, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    return TimeSeriesPanel(x, [f"x{i + 1}" for i in range(x.shape[0])])


@dataclass(frozen=True, eq=False)
class TrajectoryMatrix:
    """Block Hankel matrix of lagged panel snapshots.

    Row ``r*M + i`` holds series ``i`` at times ``r .. r+N-1``, so column
    ``c`` stacks ``x_c, x_{c+1}, ..., x_{c+L-1}`` (each an M-vector).
    """

    data: np.ndarray  # (LM, N)
    L: int
    M: int

    @property
    def N(self) -> int:
        return self.data.shape[1]

    def block(self, r: int, c: int) -> np.ndarray:
        return self.data[r * self.M : (r + 1) * self.M, c]

    def series(self, i: int) -> np.ndarray:
        """The ordinary L x N trajectory matrix of series `i`."""
        return self.data[i :: self.M]


def embed(panel, L: int) -> TrajectoryMatrix:
    """Build the ``LM x N`` trajectory matrix, ``N = T - L + 1``."""
    x = _as_panel(panel).values
    M, T = x.shape
    L = check_window(L, T)
    N = T - L + 1
    windows = np.lib.stride_tricks.sliding_window_view(x, N, axis=1)  # (M, L, N)
    return TrajectoryMatrix(np.ascontiguousarray(windows.transpose(1, 0, 2)).reshape(L * M, N), L, M)


def _diag_average(A: np.ndarray) -> np.ndarray:
    """Anti-diagonal means over the last two axes: (..., L, N) -> (..., L+N-1)."""
    L, N = A.shape[-2:]
    T = L + N - 1
    out = np.zeros(A.shape[:-2] + (T,))
    for r in range(L):
        out[..., r : r + N] += A[..., r, :]
    t = np.arange(T)
    counts = np.minimum.reduce([t + 1, np.full(T, L), T - t])
    return out / counts


def hankelize(matrix) -> np.ndarray:
    """Diagonal averaging of an ``L x N`` matrix into a series of length ``L + N - 1``.

    A trailing third axis is treated as vector-valued entries, giving a
    ``(T, d)`` result.
    """
    A = np.asarray(matrix, dtype=float)
    if A.ndim not in (2, 3):
        raise ParameterError(f"expected an L x N (or L x N x d) array, got shape {A.shape}")
    L, N = A.shape[:2]
    if L > N:
        raise ParameterError(f"cannot hankelize: L={L} exceeds N={N}")
    if A.ndim == 2:
        return _diag_average(A)
    return _diag_average(np.moveaxis(A, 2, 0)).T


def period_to_frequency(period: float, L: int) -> int:
    """Frequency index closest to `period` samples: ``floor(L / period + 0.5) + 1``."""
    if period <= 0:
        raise GroupingError(f"period must be positive, got {period}")
    if math.isinf(period):
        return 1
    return int(math.floor(L / period + 0.5)) + 1


def _index_list(text: str, what: str) -> tuple:
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            raise GroupingError(f"empty entry in {what} list {text!r}")
        m = re.fullmatch(r"(\d+)\s*-\s*(\d+)", part)
        try:
            if m:
                lo, hi = int(m.group(1)), int(m.group(2))
                if hi < lo:
                    raise GroupingError(f"descending range {part!r} in {what} list")
                out.extend(range(lo, hi + 1))
            else:
                out.append(int(part))
        except ValueError:
            raise GroupingError(f"bad {what} index {part!r}") from None
    return tuple(out)


@dataclass(frozen=True)
class Selector:
    """One clause of a group: a set of frequencies, optionally restricted to some subcomponents.

    Frequencies come either from explicit indices `k` or from a period
    condition ``(op, value)`` / range ``("range", lo, hi)`` in samples.
    """

    k: tuple = ()
    period: tuple | None = None
    m: tuple | None = None

    def frequencies(self, L: int) -> list:
        K = L // 2 + 1
        if self.period is None:
            ks = list(self.k)
        else:
            op, *vals = self.period
            if op == "=":
                ks = [period_to_frequency(vals[0], L)]
            else:
                periods = [math.inf] + [L / (j - 1) for j in range(2, K + 1)]
                tol = 1e-9
                tests = {
                    ">=": lambda p: p >= vals[0] * (1 - tol),
                    ">": lambda p: p > vals[0] * (1 + tol),
                    "<=": lambda p: p <= vals[0] * (1 + tol),
                    "<": lambda p: p < vals[0] * (1 - tol),
                    "range": lambda p: vals[0] * (1 - tol) <= p <= vals[1] * (1 + tol),
                }
                ks = [j + 1 for j, p in enumerate(periods) if tests[op](p)]
                if not ks:
                    raise GroupingError(f"period condition {self.text()!r} matches no frequency for L={L}")
        for k in ks:
            if not 1 <= k <= K:
                raise GroupingError(f"frequency index k={k} from {self.text()!r} outside 1..{K} for L={L}")
        return ks

    def text(self) -> str:
        if self.period is None:
            s = "k=" + ",".join(str(k) for k in self.k)
        else:
            op, *vals = self.period
            if op == "range":
                s = f"period={vals[0]:g}-{vals[1]:g}"
            else:
                s = f"period{op}{vals[0]:g}"
        if self.m is not None:
            s += " m=" + ",".join(str(m) for m in self.m)
        return s

    @classmethod
    def parse(cls, text: str) -> "Selector":
        k, period, m = (), None, None
        terms = text.split()
        if not terms:
            raise GroupingError("empty group clause")
        for term in terms:
            mt = re.fullmatch(r"(k|m|period)\s*(>=|<=|=|>|<)\s*(.+)", term)
            if not mt:
                raise GroupingError(f"cannot parse group term {term!r}")
            key, op, val = mt.groups()
            if key in ("k", "m") and op != "=":
                raise GroupingError(f"{key} only supports '=' (got {term!r})")
            if key == "k":
                k = _index_list(val, "frequency")
            elif key == "m":
                m = _index_list(val, "subcomponent")
            else:
                rng = re.fullmatch(r"([\d.eE+]+)\s*-\s*([\d.eE+]+|inf)", val)
                try:
                    if op == "=" and rng:
                        lo, hi = float(rng.group(1)), float(rng.group(2))
                        if hi < lo:
                            raise GroupingError(f"descending period range {val!r}")
                        period = ("range", lo, hi)
                    else:
                        period = (op, float(val))
                except ValueError:
                    raise GroupingError(f"bad period value {val!r}") from None
        if period is not None and k:
            raise GroupingError(f"clause {text!r} gives both k and period")
        if period is None and not k:
            raise GroupingError(f"clause {text!r} selects no frequency (need k= or period)")
        return cls(k=k, period=period, m=m)


class ResolvedGrouping(dict):
    """Ordered mapping group name -> sorted tuple of (k, m) pairs, a partition of all pairs."""

    def __init__(self, items, L: int, M: int):
        super().__init__(items)
        self.L = L
        self.M = M

    def frequencies(self, name: str) -> list:
        return sorted({k for k, _ in self[name]})

    def to_json(self) -> dict:
        return {name: [list(p) for p in pairs] for name, pairs in self.items()}


@dataclass(frozen=True)
class GroupingSpec:
    """Named groups of (frequency, subcomponent) pairs.

    Build one with :meth:`parse` (``"trend:k=1; cycle:period=96"``), with
    :meth:`from_frequencies` or by passing a mapping of group name to a
    sequence of :class:`Selector`.  Pairs no group claims go to the
    ``residual`` group.
    """

    groups: Mapping[str, tuple] = field(default_factory=dict)

    @classmethod
    def parse(cls, text: str) -> "GroupingSpec":
        """Parse ``name: clause [| clause ...]`` entries separated by ``;``.

        A clause is whitespace-separated terms: ``k=1,3-5``,
        ``period=12``, ``period>=96``, ``period=24-96`` and optionally
        ``m=1-2``.
        """
        groups = {}
        for entry in text.split(";"):
            entry = entry.strip()
            if not entry:
                continue
            if ":" not in entry:
                raise GroupingError(f"group entry {entry!r} lacks 'name:'")
            name, body = (s.strip() for s in entry.split(":", 1))
            if not re.fullmatch(r"[A-Za-z0-9_.\-]+", name):
                raise GroupingError(f"invalid group name {name!r}")
            if name in groups:
                raise GroupingError(f"group {name!r} defined twice")
            groups[name] = tuple(Selector.parse(c) for c in body.split("|"))
        if not groups:
            raise GroupingError("grouping specification defines no groups")
        return cls(groups)

    @classmethod
    def from_frequencies(cls, mapping: Mapping[str, Iterable[int]]) -> "GroupingSpec":
        return cls({name: (Selector(k=tuple(ks)),) for name, ks in mapping.items()})

    @classmethod
    def everything(cls, name: str = "all") -> "GroupingSpec":
        return cls({name: (Selector(period=(">=", 0.0)),)})

    def text(self) -> str:
        return "; ".join(f"{n}:" + " | ".join(s.text() for s in sel) for n, sel in self.groups.items())

    def resolve(self, L: int, M: int) -> ResolvedGrouping:
        """Expand to explicit (k, m) pairs over ``k = 1..floor(L/2)+1``.

        Raises
        ------
        GroupingError
            On out-of-range indices, a reserved or duplicated name, or
            pairs claimed by more than one group (all listed).
        """
        K = L // 2 + 1
        owner = {}
        clashes = []
        items = []
        for name, selectors in self.groups.items():
            if name == RESIDUAL:
                raise GroupingError(f"group name {RESIDUAL!r} is reserved")
            pairs = set()
            for sel in selectors:
                ms = range(1, M + 1) if sel.m is None else sel.m
                for m in ms:
                    if not 1 <= m <= M:
                        raise GroupingError(f"subcomponent m={m} in group {name!r} outside 1..{M}")
                for k in sel.frequencies(L):
                    for m in ms:
                        pairs.add((k, m))
            for p in sorted(pairs):
                if p in owner:
                    clashes.append(f"(k={p[0]}, m={p[1]}) in {owner[p]!r} and {name!r}")
                else:
                    owner[p] = name
            items.append((name, tuple(sorted(pairs))))
        if clashes:
            raise GroupingError("overlapping groups: " + "; ".join(clashes))
        rest = tuple((k, m) for k in range(1, K + 1) for m in range(1, M + 1) if (k, m) not in owner)
        if rest:
            items.append((RESIDUAL, rest))
        return ResolvedGrouping(items, L, M)


def pair_columns(L: int, M: int, k: int, m: int | None = None) -> list:
    """Flat basis columns of the pair ``B_{k,m}`` (all m when `m` is None).

    ``B_{k,m} = {(k, m), (L+2-k, m)}`` except for the self-paired
    frequencies k = 1 and (L even) k = L/2 + 1.
    """
    if not 1 <= k <= L // 2 + 1:
        raise ParameterError(f"frequency index k={k} outside 1..{L // 2 + 1}")
    ks = [k] if k == 1 or 2 * (k - 1) == L else [k, L + 2 - k]
    ms = range(1, M + 1) if m is None else [m]
    return [(kk - 1) * M + (mm - 1) for kk in ks for mm in ms]


def _resolve(spec, L, M) -> ResolvedGrouping:
    if isinstance(spec, ResolvedGrouping):
        return spec
    if isinstance(spec, str):
        spec = GroupingSpec.parse(spec)
    return spec.resolve(L, M)


def elementary_projection(X: TrajectoryMatrix, basis, k: int, m: int, i: int | None = None) -> np.ndarray:
    """Rank-one piece ``v (v' X)`` of the trajectory matrix along basis vector (k, m).

    With a series index `i` only that series' rows are returned (``L x N``).
    """
    v = basis.vector(k, m)
    w = v @ X.data
    if i is None:
        return np.outer(v, w)
    return np.outer(basis.segment(k, m, i), w)


def group_matrices(X: TrajectoryMatrix, basis, spec, i: int) -> dict:
    """Per-group ``L x N`` matrices of series `i`: sums of pair matrices ``X_{B_{k,m}}``."""
    if not 0 <= i < X.M:
        raise ParameterError(f"series index i={i} outside 0..{X.M - 1}")
    grouping = _resolve(spec, X.L, X.M)
    V = basis.vectors
    out = {}
    for name, pairs in grouping.items():
        cols = [c for k, m in pairs for c in pair_columns(X.L, X.M, k, m)]
        out[name] = V[i :: X.M, cols] @ (V[:, cols].T @ X.data)
    return out


class Decomposition:
    """Fitted pipeline for one panel and window length.

    Attributes
    ----------
    panel : TimeSeriesPanel
        The input, used as given (demean beforehand).
    trajectory : TrajectoryMatrix
    autocov : AutocovSequence
    circulant : CirculantBlocks
    spectrum : SpectralBlockSet
        Blocks with eigenpairs.
    basis : RealEigenbasis
    scores : ndarray, shape (LM, N)
        ``V' X``, the projections of the trajectory matrix on every basis vector.
    """

    def __init__(self, panel, L: int, *, check: bool = True):
        self.panel = _as_panel(panel)
        self.L = check_window(L, self.panel.T)
        self.trajectory = embed(self.panel, self.L)
        self.autocov = estimate_autocov(self.panel, self.L)
        self.circulant = build_circulant_blocks(self.autocov)
        self.spectrum = eigendecompose_blocks(spectral_blocks(self.circulant))
        self.basis = real_eigenbasis(self.spectrum, check=check)
        self.scores = self.basis.vectors.T @ self.trajectory.data
        self._sub_cache = {}

    @property
    def M(self) -> int:
        return self.panel.M

    @property
    def T(self) -> int:
        return self.panel.T

    @property
    def n_frequencies(self) -> int:
        return self.L // 2 + 1

    def period(self, k: int) -> float:
        return math.inf if k == 1 else self.L / (k - 1)

    def reconstruct_columns(self, cols) -> np.ndarray:
        """Diagonal-averaged reconstruction of the given basis columns, shape (M, T)."""
        cols = list(cols)
        if not cols:
            return np.zeros((self.M, self.T))
        Xg = self.basis.vectors[:, cols] @ self.scores[cols]
        Xg = Xg.reshape(self.L, self.M, -1).transpose(1, 0, 2)
        return _diag_average(Xg)

    def pair_component(self, k: int, m: int) -> np.ndarray:
        """Elementary reconstructed panel of pair ``B_{k,m}``, shape (M, T)."""
        self.spectrum.check_m(m)
        return self.subcomponents(k)[m - 1]

    def subcomponents(self, k: int) -> np.ndarray:
        """All M elementary reconstructed panels at frequency k, shape (M_sub, M, T)."""
        if k not in self._sub_cache:
            L, M = self.L, self.M
            cols = np.array(pair_columns(L, M, k)).reshape(-1, M)  # (1 or 2, M)
            V = self.basis.vectors
            Xs = np.einsum("pam,pmn->man", V[:, cols].transpose(1, 0, 2), self.scores[cols])
            Xs = Xs.reshape(M, L, M, -1).transpose(0, 2, 1, 3)
            self._sub_cache[k] = _diag_average(Xs)
        return self._sub_cache[k]

    def frequency_component(self, k: int) -> np.ndarray:
        """Oscillatory component ``B_k`` (sum over all subcomponents), shape (M, T)."""
        return self.subcomponents(k).sum(axis=0)

    def group_components(self, spec) -> dict:
        """Reconstructed (M, T) arrays per group of a spec or resolved grouping."""
        grouping = _resolve(spec, self.L, self.M)
        return {
            name: self.reconstruct_columns(c for k, m in pairs for c in pair_columns(self.L, self.M, k, m))
            for name, pairs in grouping.items()
        }


@dataclass(eq=False)
class ReconstructedSet:
    """Result of :func:`decompose`.

    `components` maps group name to an M x T panel; `elementary` maps
    ``(k, m)`` to the elementary reconstructed panel of ``B_{k,m}`` when
    requested, else is None.
    """

    components: dict
    grouping: ResolvedGrouping
    fit: Decomposition
    elementary: dict | None = None

    def total(self) -> np.ndarray:
        return sum(p.values for p in self.components.values())


def decompose(panel, L: int, spec, *, elementary: bool = False) -> ReconstructedSet:
    """Run the full pipeline and reconstruct every group of `spec`.

    `spec` may be a :class:`GroupingSpec`, its text form or a
    :class:`ResolvedGrouping`.
    """
    fit = panel if isinstance(panel, Decomposition) else Decomposition(panel, L)
    base = fit.panel
    grouping = _resolve(spec, fit.L, fit.M)
    arrays = fit.group_components(grouping)
    components = {name: base.with_values(a) for name, a in arrays.items()}
    elem = None
    if elementary:
        elem = {}
        for k in range(1, fit.n_frequencies + 1):
            subs = fit.subcomponents(k)
            for m in range(1, fit.M + 1):
                elem[(k, m)] = base.with_values(subs[m - 1])
    return ReconstructedSet(components, grouping, fit, elem)


def decompose_univariate(series, L: int, spec) -> dict:
    """Univariate CiSSA: the pipeline on a single series; returns name -> length-T array."""
    x = series.values if isinstance(series, TimeSeriesPanel) else np.asarray(series, dtype=float)
    x = np.atleast_2d(x)
    if x.shape[0] != 1:
        raise ParameterError(f"expected a single series, got {x.shape[0]}")
    result = decompose(TimeSeriesPanel(x, ["x"]), L, spec)
    return {name: p.values[0] for name, p in result.components.items()}


class UniquenessReport(NamedTuple):
    discrepancy: np.ndarray  # (M, floor(L/2)+1), max |univariate - sum of subcomponents|
    tolerance: np.ndarray  # (M,), 1e-8 * (1 + max |x_i|)

    @property
    def ok(self) -> bool:
        return bool(np.all(self.discrepancy <= self.tolerance[:, None]))

    @property
    def worst(self) -> float:
        return float(self.discrepancy.max())


def uniqueness_check(panel, L: int, *, fit: Decomposition | None = None) -> UniquenessReport:
    """Compare univariate frequency components with summed multivariate subcomponents.

    For each series and each frequency pair ``B_k`` the univariate
    component (the pipeline on that series alone) is compared with the
    sum over m of the multivariate elementary components of that series.
    Discrepancies are reported, never raised.
    """
    panel = _as_panel(panel)
    fit = fit or Decomposition(panel, L)
    K = fit.n_frequencies
    disc = np.empty((fit.M, K))
    for i in range(fit.M):
        uni = Decomposition(panel.take([i]), fit.L)
        for k in range(1, K + 1):
            a = uni.subcomponents(k).sum(axis=0)[0]
            b = fit.subcomponents(k)[:, i, :].sum(axis=0)
            disc[i, k - 1] = np.max(np.abs(a - b))
    tol = 1e-8 * (1 + np.abs(panel.values).max(axis=1))
    return UniquenessReport(disc, tol)
