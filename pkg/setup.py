import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python fallback is used at import time
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("SPECTRAL_REG_NO_EXT"):
    ext_modules = cythonize(
        [
            Extension(
                "spectral_reg.sde._kernels",
                ["src/spectral_reg/sde/_kernels.pyx"],
                include_dirs=[np.get_include()],
                # no FMA contraction: the compiled kernel must match the
                # pure-Python fallback bit for bit
                extra_compile_args=["-O2", "-ffp-contract=off"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
