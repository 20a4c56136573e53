"""Build script for the optional compiled ray-tracing kernel.

The package works without the extension (a numpy fallback is selected at
import time); building it makes transmission-loss evaluation roughly an
order of magnitude faster, which matters for the Monte-Carlo experiments.
"""

import numpy as np
from setuptools import setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        "src/sspest/_ray_kernel.pyx",
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules, include_dirs=[np.get_include()])
