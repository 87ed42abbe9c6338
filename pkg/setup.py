"""Build script: compiles the coordinate-descent kernel when Cython and a C
compiler are available.  The package works without the extension (a numpy
fallback is selected at import time), so build failures are non-fatal."""

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        "src/unilasso/_cd_fast.pyx",
        compiler_directives={
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "language_level": "3",
        },
    )
    include_dirs = [numpy.get_include()]
except ImportError:
    include_dirs = []

setup(ext_modules=ext_modules, include_dirs=include_dirs)
