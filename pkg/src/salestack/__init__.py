"""Home-sale price-direction classification with from-scratch tree ensembles,
out-of-fold target encoding, four-layer stacking and classifier diagnostics."""
from ._kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
