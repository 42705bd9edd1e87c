import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install; hough falls back at import
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("SKETCH2NETLIST_NO_EXT"):
    ext_modules = cythonize(
        [
            Extension(
                "sketch2netlist._ppht",
                ["src/sketch2netlist/_ppht.pyx"],
                include_dirs=[np.get_include()],
                # identical float rounding to the Python fallback
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
