"""Build the optional compiled stencil kernel.

The package works without it: ``upwindfilter._kernels`` falls back to the
numpy implementation when the extension cannot be imported.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("UPWINDFILTER_NO_EXT", "") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "upwindfilter._kernel_ext",
                    ["src/upwindfilter/_kernel_ext.pyx"],
                    include_dirs=[np.get_include()],
                    # no FMA contraction: the compiled and numpy paths must agree bit for bit
                    extra_compile_args=["-O3", "-ffp-contract=off"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
