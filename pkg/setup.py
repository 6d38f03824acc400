import os

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

if cythonize is not None and os.path.exists("src/gatenav/_speedups.pyx"):
    ext_modules = cythonize(
        [Extension("gatenav._speedups", ["src/gatenav/_speedups.pyx"])],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
else:
    # No Cython: the package still works through the pure-Python kernels.
    ext_modules = []

setup(ext_modules=ext_modules)
