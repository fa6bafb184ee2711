"""Level-set percolation of smooth planar Gaussian fields driven by white noise."""
from .grid import GridSpec
from .kernel import CutoffSpec, KernelSpec

__all__ = ["GridSpec", "KernelSpec", "CutoffSpec"]
__version__ = "0.1.0"
