"""Build script for the compiled convolution kernel.

The package works without the extension (a numpy fallback is selected at
import time), but the hot lattice-convolution loop is ~10-100x faster
compiled.
"""

import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # build without the compiled kernel
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "qpkdv._kernels._convolve",
                ["src/qpkdv/_kernels/_convolve.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
