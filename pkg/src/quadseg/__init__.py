"""quadseg: slice-wise U-Net + corrective learning quadriceps segmenter.

Hot kernels (warp sampling, exact distance transform, joint label fusion)
live in a compiled Cython extension with pure-numpy fallbacks; see
:mod:`quadseg._backend` for how one is selected at import.
"""

from quadseg._backend import backend_name, using_extension

__version__ = "0.1.0"

__all__ = ["backend_name", "using_extension", "__version__"]
