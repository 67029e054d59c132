import os

import numpy as np
from setuptools import Extension, setup

# PDPART_NO_EXT=1 skips the compiled core; the package then runs on its
# pure-Python kernels.
ext_modules = []
if not os.environ.get("PDPART_NO_EXT"):
    from Cython.Build import cythonize

    extensions = [
        Extension(
            "pdpart._kernels",
            ["src/pdpart/_kernels.pyx"],
            include_dirs=[np.get_include()],
            extra_compile_args=["-O3"],
        )
    ]
    ext_modules = cythonize(
        extensions,
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )

setup(ext_modules=ext_modules)
