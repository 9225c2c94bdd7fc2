"""Build the optional compiled change-point core.

The package works without it: ``hazardscope.changepoint`` falls back to the
numpy implementation when ``_cpd_core`` cannot be imported.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("HAZARDSCOPE_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "hazardscope._cpd_core",
                    ["src/hazardscope/_cpd_core.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={
                "language_level": 3,
                "boundscheck": False,
                "wraparound": False,
                "initializedcheck": False,
                "cdivision": True,
            },
        )

setup(ext_modules=ext_modules)
