"""Build script for the compiled kernel extension.

The extension is optional: when Cython or a compiler is missing the package
installs without it and falls back to the numpy kernels at import time.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("IRSHO_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "irsho._kernels",
                    ["src/irsho/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
