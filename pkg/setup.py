"""Build script: compiles the optional Cython kernel extension.

The package works without the extension (pure-numpy fallbacks are selected
at import time), so the extension is marked optional and a failed compile
only degrades performance.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize

    ext = Extension(
        "quadseg._kernels",
        sources=["src/quadseg/_kernels.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    ext.optional = True
    ext_modules = cythonize([ext], language_level=3)
except ImportError:
    pass

setup(ext_modules=ext_modules)
