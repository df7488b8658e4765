"""Multivariate circulant singular spectrum analysis.

Decompose a panel of time series into components indexed by frequency
and, within each frequency, by the eigen-directions of the cross-spectral
matrix.  Typical use::

    from mcissa import load_panel, demean, decompose, GroupingSpec

    panel = demean(load_panel("prices.csv"))
    result = decompose(panel, 96, GroupingSpec.parse("trend:k=1; cycle:k=2"))
    trend = result.components["trend"].values
"""

__version__ = "0.1.0"

from .analysis import (
    ContributionTable,
    denoise,
    eigenvector_weights,
    frequency_contributions,
    participation,
    series_subcomponent_contributions,
    subcomponent_contributions,
)
from .decomposition import (
    Decomposition,
    GroupingSpec,
    ReconstructedSet,
    Selector,
    TrajectoryMatrix,
    decompose,
    decompose_univariate,
    elementary_projection,
    embed,
    group_matrices,
    hankelize,
    uniqueness_check,
)
from .errors import (
    GroupingError,
    MCissaError,
    NumericalError,
    PanelFormatError,
    ParameterError,
    RecipeError,
)
from .moments import (
    AutocovSequence,
    CirculantBlocks,
    build_circulant_blocks,
    build_toeplitz_matrix,
    circulant_toeplitz_distance,
    estimate_autocov,
)
from .panel import TimeSeriesPanel, demean, load_panel, rebase_index, write_panel
from .spectral import (
    RealEigenbasis,
    SpectralBlockSet,
    eigendecompose_blocks,
    phase_segments,
    real_eigenbasis,
    spectral_blocks,
)
from .synth import SignalRecipe, generate, population_autocov_ar1
