"""momext: atomic-measure extraction from truncated moment data.

A single hyponormality-based algorithm serves two jobs: pulling global
minimizers out of the complex moment/SOS hierarchy for polynomial
optimization, and recovering multivariate complex-exponential interpolants
from gridded samples via the Autonne-Takagi factorization.
"""

from . import errors, extraction, hierarchy, interp, linalg, moment, sdp

__all__ = ["errors", "extraction", "hierarchy", "interp", "linalg", "moment", "sdp"]

__version__ = "1.0.0"
