"""Build the optional compiled kinetics core.

If Cython or a C compiler is missing the package still installs and the
numpy fallback in ``qhdlab.kinetics._core_py`` is used at import time.
"""
import os
import sys

from setuptools import setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # no compiler, no OpenMP, ...
            print(f"warning: compiled core not built ({exc}); using the numpy fallback",
                  file=sys.stderr)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"warning: failed to build {ext.name} ({exc}); using the numpy fallback",
                  file=sys.stderr)


def extensions():
    if os.environ.get("QHD_NO_EXTENSION"):
        return []
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        return []
    flags = ["-O3", "-ffp-contract=off", "-fopenmp"]
    ext = Extension(
        "qhdlab.kinetics._core",
        ["src/qhdlab/kinetics/_core.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=flags,
        extra_link_args=["-fopenmp"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], language_level=3, quiet=True)


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
