"""revlab: a spectral laboratory for compact surfaces of revolution.

Given a positive periodic generating curve A(x), the package builds the
separated radial operators (hD)^2 + V(x) with V = A^{-2} + h^2 V1, classifies
the critical elements of the principal potential V0 = A^{-2}, measures the
h-scaling of microlocally restricted smallest singular values near each
element, and runs band-mass experiments for joint eigenmodes on rotationally
invariant neighbourhoods (a,b) x S^1.
"""

__version__ = "0.1.0"

from .profiles import GeneratingCurve, catalog_profile, construct_from_v0
from .geometry import EffectivePotential, PhasePoint, effective_potential, moment_map_rank
from .classify import CriticalElement, CriticalValueSet, classify_curve, predicted_exponent
from .spectral import Grid, DiscreteOperator, SurfaceMode, discretize, eigen_window, surface_spectrum
from .microlocal import (
    PhaseSpaceWindow,
    CompressionOperator,
    RateFit,
    build_compression,
    restricted_sigma_min,
    gap_rate_fit,
    psi_partition_class,
    fourier_spread,
)
from .experiments import (
    BandRegion,
    ModeFamily,
    DichotomyReport,
    band_mass,
    mass_rate_fit,
    uniform_mass_check,
    dichotomy_report,
)

__all__ = [
    "GeneratingCurve", "catalog_profile", "construct_from_v0",
    "EffectivePotential", "PhasePoint", "effective_potential", "moment_map_rank",
    "CriticalElement", "CriticalValueSet", "classify_curve", "predicted_exponent",
    "Grid", "DiscreteOperator", "SurfaceMode", "discretize", "eigen_window", "surface_spectrum",
    "PhaseSpaceWindow", "CompressionOperator", "RateFit", "build_compression",
    "restricted_sigma_min", "gap_rate_fit", "psi_partition_class", "fourier_spread",
    "BandRegion", "ModeFamily", "DichotomyReport", "band_mass", "mass_rate_fit",
    "uniform_mass_check", "dichotomy_report",
]
