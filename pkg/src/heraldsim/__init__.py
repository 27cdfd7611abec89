"""Monte Carlo simulator of heralded-photon Hong-Ou-Mandel interference
between two independent group-velocity-matched PPKTP sources."""

from .kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
