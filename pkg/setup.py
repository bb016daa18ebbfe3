"""Build script for the optional compiled kernel extension.

The package is fully functional without the extension (a pure-NumPy
fallback is selected at import time), so a failed compile downgrades to a
warning instead of aborting the install.
"""

import sys

from setuptools import Extension, setup


def extension_modules():
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError as exc:
        print(f"milcal: skipping compiled kernels ({exc})", file=sys.stderr)
        return []
    ext = Extension(
        "milcal.kernels._ckern",
        sources=["src/milcal/kernels/_ckern.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], language_level="3")


setup(ext_modules=extension_modules())
