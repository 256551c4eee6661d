"""glnls: a spectral Galerkin Monte Carlo laboratory for the 1D stochastic
complex Ginzburg-Landau equation and its inviscid Schrodinger limit.

Subpackages: spectral (sine-basis transforms), functionals (energies and
distances), noise (diagonal forcing and exact convolution sampling), models
(exponential integrators), coupling (Foias-Prodi pinning and Girsanov
weights), stats (Wasserstein estimation and experiment drivers), config /
outputs / cli (run orchestration).
"""

__version__ = "0.1.0"

from . import spectral, functionals, noise, models, coupling, stats  # noqa: F401
