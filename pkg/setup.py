"""Build script: compiles the optional Cython core for Polya-Gamma sampling.

The package works without the extension (a vectorized numpy fallback is
selected at import time), so failures here only cost speed.
"""

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "crxo_sace._pgcore",
                ["src/crxo_sace/_pgcore.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        language_level=3,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
