import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "sdsolve._core",
                ["src/sdsolve/_core.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_9_API_VERSION")],
            )
        ],
        language_level="3",
    )
except ImportError:
    # Pure-Python fallback kernels are selected at import time, so the
    # package still works without Cython or a C compiler.
    ext_modules = []

setup(ext_modules=ext_modules)
