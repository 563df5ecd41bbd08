import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

# The compiled kernels are optional: without Cython the package installs with
# the pure-NumPy backend only (selected automatically at import).
ext_modules = []
if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "sparsecd.backends._cdcore",
                sources=["src/sparsecd/backends/_cdcore.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
