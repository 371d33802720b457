"""Build script for the optional compiled scanning kernels.

The package works without the extension; ``ssmcert.lp.kernels`` falls back
to the pure-Python implementation when ``ssmcert.lp._ckernels`` is missing.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("SSMCERT_NO_EXT"):
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
                    "ssmcert.lp._ckernels",
                    ["src/ssmcert/lp/_ckernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
