"""Build the optional compiled slot-loop kernel.

The package works without the extension (a pure-Python kernel is selected
at import time), so a failed compile only costs speed.
"""

import os

import numpy
from setuptools import Extension, setup

try:
    if not os.path.exists("src/gora/_simcore.pyx"):
        raise ImportError
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "gora._simcore",
                ["src/gora/_simcore.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
