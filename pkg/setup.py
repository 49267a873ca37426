"""Build script for the optional compiled kernels.

    pip install -e . --no-build-isolation

If Cython or a C compiler is missing the package installs without the
extension and falls back to the numpy kernels at import time.
"""

import os
import warnings

from setuptools import setup

ext_modules = []
if os.environ.get("DIALOGACT_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "dialogact.diffcore._conv_cy",
                    ["src/dialogact/diffcore/_conv_cy.pyx"],
                    include_dirs=[np.get_include(), "src/dialogact/diffcore"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        warnings.warn("Cython not available; building without compiled kernels")

setup(ext_modules=ext_modules)
