"""Build the optional Cython physics kernel.

If Cython or a C compiler is missing the package still installs and the
pure-Python kernel is used at import time.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("COORDPRIOR_NO_EXT"):
    try:
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "coordprior._kernels",
                    ["src/coordprior/_kernels.pyx"],
                    extra_compile_args=["-O3", "-ffp-contract=off"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
