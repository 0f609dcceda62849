import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install; the package falls back to NumPy
    cythonize = None

ext_modules = []
if cythonize is not None and os.environ.get("IPMBOOT_NO_EXT", "") in ("", "0"):
    ext_modules = cythonize(
        [
            Extension(
                "ipmboot._kernels",
                [os.path.join("src", "ipmboot", "_kernels.pyx")],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3", "-fopenmp"],
                extra_link_args=["-fopenmp"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
