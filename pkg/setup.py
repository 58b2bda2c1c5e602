"""Build script: compiles the optional local-search extension.

If Cython or a C compiler is unavailable the package still installs; the
pure-Python kernel in carweave._kernels_py is selected at import time.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext_modules = []
if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "carweave._kernels",
                ["src/carweave/_kernels.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
