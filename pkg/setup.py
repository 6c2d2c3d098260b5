"""Build script for the optional compiled kernels.

The package works without the extension (a numpy fallback is selected at
import time), so failures here are tolerated: we build the Cython module
when Cython and a C compiler are available and otherwise ship pure Python.
"""

from setuptools import setup

try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/pasim/_kernels/_core.pyx"],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
    include_dirs = [numpy.get_include()]
except ImportError:
    ext_modules = []
    include_dirs = []

setup(ext_modules=ext_modules, include_dirs=include_dirs)
