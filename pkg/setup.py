"""Build the compiled distance-transform kernel.

The package works without the extension (a pure-Python kernel is picked
at import time), so build failures here are non-fatal for development:

    pip install -e . --no-build-isolation
"""

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "segguard._edt_kernel",
        ["src/segguard/_edt_kernel.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    ),
]

setup(ext_modules=cythonize(extensions, language_level="3"))
