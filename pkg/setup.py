"""Builds the optional compiled kernels; the package works without them."""

import os

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing etc.
            print(f"warning: compiled kernels not built ({exc}); using pure-Python fallback")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"warning: failed to build {ext.name} ({exc}); using pure-Python fallback")


def ext_modules():
    if os.environ.get("IIRSIM_NO_EXT"):
        return []
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension("iirsim.codecs._ckernels", ["src/iirsim/codecs/_ckernels.pyx"])
    return cythonize([ext], language_level=3, quiet=True)


setup(ext_modules=ext_modules(), cmdclass={"build_ext": OptionalBuildExt})
