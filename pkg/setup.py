"""Build script for the optional compiled CSR kernel.

The extension is a speedup only: if Cython or a C compiler is missing the
install still succeeds and ktrace falls back to the numpy kernel at import.
Set KTRACE_NO_EXTENSION=1 to skip the build entirely.
"""

import os

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            print(f"ktrace: skipping compiled kernel ({exc!r}); "
                  "the numpy fallback will be used")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"ktrace: failed to build {ext.name} ({exc!r}); "
                  "the numpy fallback will be used")


def extensions():
    if os.environ.get("KTRACE_NO_EXTENSION") == "1":
        return []
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "ktrace.kernels._csr",
        sources=["src/ktrace/kernels/_csr.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], language_level=3)


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
