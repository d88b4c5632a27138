import os

import numpy
from setuptools import Extension, setup

extensions = []
pyx = os.path.join("src", "copolem", "_kernels_cy.pyx")
if not os.environ.get("COPOLEM_PURE") and os.path.exists(pyx):
    try:
        from Cython.Build import cythonize

        extensions = cythonize(
            [
                Extension(
                    "copolem._kernels_cy",
                    [pyx],
                    include_dirs=[numpy.get_include()],
                    # no FMA contraction: keeps the compiled kernels
                    # rounding-identical to the pure NumPy fallback
                    extra_compile_args=["-O3", "-ffp-contract=off"],
                )
            ],
            language_level=3,
        )
    except ImportError:
        extensions = []

setup(ext_modules=extensions)
