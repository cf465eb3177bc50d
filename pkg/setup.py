"""Build script: compiles the optional Cython kernel core.

The package works without the extension (numpy fallback in
npsl._kernels); the build is therefore allowed to fail soft.
"""

import sys

from setuptools import setup

try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "npsl._kernels._core",
                ["src/npsl/_kernels/_core.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - build environment dependent
    print(f"npsl: skipping Cython extension ({exc})", file=sys.stderr)
    ext_modules = []

setup(ext_modules=ext_modules)
