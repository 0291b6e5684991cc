"""Build script. Compiles the optional Cython kernel extension when a C
toolchain and Cython are available; otherwise the package installs with the
pure NumPy kernels only (picopipe._kernels selects the backend at import).

    python setup.py build_ext --inplace     # build the fast kernels in-tree
"""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("PICOPIPE_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
        from setuptools import Extension
        import numpy

        ext_modules = cythonize(
            [
                Extension(
                    "picopipe._kernels._ckernels",
                    ["src/picopipe/_kernels/_ckernels.pyx"],
                    include_dirs=[numpy.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
