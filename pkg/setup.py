"""Build script: compiles the optional Cython kernel module.

The package works without the extension (a NumPy fallback is selected at
import time), so a failed compile downgrades to a pure-Python install
instead of aborting.
"""

import sys

from setuptools import setup

try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools.extension import Extension

    extensions = cythonize(
        [
            Extension(
                "topostudio._kernels._core",
                ["src/topostudio/_kernels/_core.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
except Exception as exc:  # pragma: no cover - build environment dependent
    print(f"topostudio: skipping compiled kernels ({exc})", file=sys.stderr)
    extensions = []

setup(ext_modules=extensions)
