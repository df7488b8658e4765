"""Synthetic panels with known ground truth.

Recipe files are YAML::

    seed: 42
    phase_offsets: [0.0, 0.3, 0.6]   # radians, one per series (optional)
    components:
      - type: harmonic
        name: cycle
        amplitude: 1.0
        frequency: 0.0833333333      # cycles per sample, in [0, 0.5]
        phase: 0.0
      - type: amfm
        amplitude: 0.5
        frequency: 0.02
        envelope_rate: 0.002
        envelope_depth: 0.5
        fm_depth: 0.005
        fm_rate: 0.001
      - type: ar1
        phi: 0.7
        std: 0.2
      - type: noise
        std: 0.1
      - type: trend
        slope: 0.01

Time runs over ``t = 0 .. T-1``.  Per-series phase offsets shift the
harmonic and AM-FM primitives only.  Random primitives draw from a PCG64
stream seeded with ``seed + i`` for series ``i``, consumed in recipe
order, so every series is reproducible on its own.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import yaml

from .errors import RecipeError
from .moments import AutocovSequence
from .panel import TimeSeriesPanel

__all__ = [
    "Harmonic",
    "AMFMHarmonic",
    "AR1",
    "WhiteNoise",
    "LinearTrend",
    "SignalRecipe",
    "generate",
    "population_autocov_ar1",
    "load_recipe",
    "parse_recipe",
]


def _check_frequency(name, f):
    if not 0.0 <= f <= 0.5:
        raise RecipeError(f"{name} must lie in [0, 0.5] cycles per sample, got {f}")


@dataclass(frozen=True)
class Harmonic:
    amplitude: float
    frequency: float
    phase: float = 0.0
    name: str | None = None
    kind = "harmonic"

    def __post_init__(self):
        _check_frequency("frequency", self.frequency)

    def sample(self, t, offset, rng):
        return self.amplitude * np.cos(2 * np.pi * self.frequency * t + self.phase + offset)


@dataclass(frozen=True)
class AMFMHarmonic:
    """``A (1 + d cos 2pi a t) cos(2pi f t + (b/c) sin 2pi c t + phase)``.

    ``a`` is the envelope rate, ``d`` its depth, ``b`` the peak frequency
    deviation and ``c`` the modulation rate.
    """

    amplitude: float
    frequency: float
    envelope_rate: float = 0.0
    envelope_depth: float = 0.0
    fm_depth: float = 0.0
    fm_rate: float = 0.0
    phase: float = 0.0
    name: str | None = None
    kind = "amfm"

    def __post_init__(self):
        _check_frequency("frequency", self.frequency)
        _check_frequency("envelope_rate", self.envelope_rate)
        _check_frequency("fm_rate", self.fm_rate)
        if not 0.0 <= self.frequency + abs(self.fm_depth) <= 0.5:
            raise RecipeError("frequency + fm_depth must stay within [0, 0.5]")

    def sample(self, t, offset, rng):
        env = 1.0 + self.envelope_depth * np.cos(2 * np.pi * self.envelope_rate * t)
        fm = 0.0 if self.fm_rate == 0 else (self.fm_depth / self.fm_rate) * np.sin(2 * np.pi * self.fm_rate * t)
        return self.amplitude * env * np.cos(2 * np.pi * self.frequency * t + fm + self.phase + offset)


@dataclass(frozen=True)
class AR1:
    phi: float
    std: float
    name: str | None = None
    kind = "ar1"

    def __post_init__(self):
        if not -1.0 < self.phi < 1.0:
            raise RecipeError(f"AR(1) coefficient must lie in (-1, 1), got {self.phi}")
        if self.std < 0:
            raise RecipeError(f"innovation std must be nonnegative, got {self.std}")

    def sample(self, t, offset, rng):
        e = rng.standard_normal(len(t)) * self.std
        x = np.empty(len(t))
        x[0] = e[0] / math.sqrt(1 - self.phi**2)
        for s in range(1, len(t)):
            x[s] = self.phi * x[s - 1] + e[s]
        return x


@dataclass(frozen=True)
class WhiteNoise:
    std: float
    name: str | None = None
    kind = "noise"

    def __post_init__(self):
        if self.std < 0:
            raise RecipeError(f"noise std must be nonnegative, got {self.std}")

    def sample(self, t, offset, rng):
        return rng.standard_normal(len(t)) * self.std


@dataclass(frozen=True)
class LinearTrend:
    slope: float
    name: str | None = None
    kind = "trend"

    def sample(self, t, offset, rng):
        return self.slope * t.astype(float)


PRIMITIVES = {cls.kind: cls for cls in (Harmonic, AMFMHarmonic, AR1, WhiteNoise, LinearTrend)}


@dataclass(frozen=True)
class SignalRecipe:
    components: tuple = ()
    phase_offsets: tuple | None = None
    seed: int = 0

    def names(self) -> list:
        out = []
        for j, c in enumerate(self.components):
            name = c.name or f"{c.kind}{j + 1}"
            if name in out:
                raise RecipeError(f"duplicate component name {name!r}")
            out.append(name)
        return out


def generate(recipe: SignalRecipe, M: int, T: int):
    """Mixed panel plus one ground-truth panel per primitive.

    Returns
    -------
    panel : TimeSeriesPanel
    truths : dict
        component name -> TimeSeriesPanel; these sum to `panel` exactly
        (they are accumulated in recipe order to form it).
    """
    if M < 1 or T < 4:
        raise RecipeError(f"need M >= 1 and T >= 4, got M={M}, T={T}")
    offsets = np.zeros(M) if recipe.phase_offsets is None else np.asarray(recipe.phase_offsets, float)
    if offsets.shape != (M,):
        raise RecipeError(f"phase_offsets has {offsets.size} entries, expected M={M}")
    names = recipe.names()
    series_names = [f"s{i + 1}" for i in range(M)]
    t = np.arange(T)
    parts = np.zeros((len(recipe.components), M, T))
    for i in range(M):
        rng = np.random.Generator(np.random.PCG64(recipe.seed + i))
        for j, comp in enumerate(recipe.components):
            parts[j, i] = comp.sample(t, offsets[i], rng)
    mixed = np.zeros((M, T))
    for p in parts:
        mixed += p
    truths = {n: TimeSeriesPanel(p, series_names) for n, p in zip(names, parts)}
    return TimeSeriesPanel(mixed, series_names), truths


def population_autocov_ar1(phi: float, sigma: float, M: int, L: int) -> AutocovSequence:
    """Exact autocovariances of M independent AR(1) series, lags 0..L-1."""
    if not -1.0 < phi < 1.0:
        raise RecipeError(f"AR(1) coefficient must lie in (-1, 1), got {phi}")
    if sigma <= 0:
        raise RecipeError(f"sigma must be positive, got {sigma}")
    if M < 1 or L < 1:
        raise RecipeError(f"need M >= 1 and L >= 1, got M={M}, L={L}")
    var = sigma**2 / (1 - phi**2)
    gammas = np.array([var * phi**k * np.eye(M) for k in range(L)])
    return AutocovSequence(gammas)


def _line(node) -> int:
    return node.start_mark.line + 1


def _number(node, key, source):
    value = yaml.safe_load(yaml.serialize(node))
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise RecipeError(f"{source}:{_line(node)}: {key} must be a number, got {value!r}")
    return float(value)


def parse_recipe(text: str, source: str = "<recipe>") -> SignalRecipe:
    """Parse recipe YAML; schema errors carry ``source:line`` prefixes."""
    try:
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        raise RecipeError(f"{source}: invalid YAML: {exc}") from None
    if root is None:
        return SignalRecipe()
    if not isinstance(root, yaml.MappingNode):
        raise RecipeError(f"{source}:{_line(root)}: recipe must be a mapping")

    seed, offsets, comps = 0, None, []
    for key_node, val in root.value:
        key = key_node.value
        where = f"{source}:{_line(key_node)}"
        if key == "seed":
            s = yaml.safe_load(yaml.serialize(val))
            if isinstance(s, bool) or not isinstance(s, int) or s < 0:
                raise RecipeError(f"{where}: seed must be a nonnegative integer, got {s!r}")
            seed = s
        elif key == "phase_offsets":
            if not isinstance(val, yaml.SequenceNode):
                raise RecipeError(f"{where}: phase_offsets must be a list")
            offsets = tuple(_number(v, "phase offset", source) for v in val.value)
        elif key == "components":
            if not isinstance(val, yaml.SequenceNode):
                raise RecipeError(f"{where}: components must be a list")
            for item in val.value:
                comps.append(_parse_component(item, source))
        else:
            raise RecipeError(f"{where}: unknown key {key!r}")
    recipe = SignalRecipe(tuple(comps), offsets, seed)
    recipe.names()
    return recipe


def _parse_component(node, source):
    if not isinstance(node, yaml.MappingNode):
        raise RecipeError(f"{source}:{_line(node)}: each component must be a mapping")
    fields_ = {k.value: (k, v) for k, v in node.value}
    if "type" not in fields_:
        raise RecipeError(f"{source}:{_line(node)}: component lacks 'type'")
    kind = fields_.pop("type")[1].value
    cls = PRIMITIVES.get(kind)
    if cls is None:
        raise RecipeError(
            f"{source}:{_line(node)}: unknown component type {kind!r} (expected one of {', '.join(PRIMITIVES)})"
        )
    allowed = {f for f in cls.__dataclass_fields__}
    kwargs = {}
    for key, (knode, vnode) in fields_.items():
        if key not in allowed:
            raise RecipeError(f"{source}:{_line(knode)}: unknown field {key!r} for {kind}")
        if key == "name":
            kwargs[key] = str(vnode.value)
        else:
            kwargs[key] = _number(vnode, key, source)
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise RecipeError(f"{source}:{_line(node)}: {kind}: {exc}") from None
    except RecipeError as exc:
        raise RecipeError(f"{source}:{_line(node)}: {kind}: {exc}") from None


def load_recipe(path) -> SignalRecipe:
    with open(path, encoding="utf-8") as fh:
        return parse_recipe(fh.read(), str(path))
