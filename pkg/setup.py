"""Build script for the optional compiled kernels.

The package is fully functional without the extension (a pure-numpy
fallback is selected at import time); the Cython core is built here when
a toolchain is available.
"""

import numpy
from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Build the extension if possible, warn and continue otherwise."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # toolchain missing: fall back to pure python
            print(f"WARNING: compiled kernels not built ({exc}); "
                  "qnopt will use the pure-python backend")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"WARNING: building {ext.name} failed ({exc}); "
                  "qnopt will use the pure-python backend")


extensions = [
    Extension(
        "qnopt.kernels._core_cy",
        ["src/qnopt/kernels/_core_cy.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        # no fused multiply-add: keeps results bitwise equal to the
        # pure-numpy backend
        extra_compile_args=["-O3", "-ffp-contract=off"],
    )
]

try:
    from Cython.Build import cythonize
    ext_modules = cythonize(extensions, language_level=3)
except ImportError:
    ext_modules = []

setup(
    ext_modules=ext_modules,
    cmdclass={"build_ext": optional_build_ext},
)
