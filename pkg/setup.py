"""Build script: compiles the optional kernel extension.

The extension is a speedup only. If Cython or a C compiler is missing the
install still succeeds and the package falls back to the numpy kernels at
import time.
"""

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            print(f"warning: kernel extension build skipped ({exc}); "
                  "numpy fallback will be used")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"warning: building {ext.name} failed ({exc}); "
                  "numpy fallback will be used")


def _extensions():
    try:
        from Cython.Build import cythonize
    except ImportError:
        print("warning: Cython not available; numpy fallback will be used")
        return []
    ext = Extension(
        "aspuavn._kernels._core",
        sources=["src/aspuavn/_kernels/_core.pyx"],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], language_level=3)


setup(ext_modules=_extensions(), cmdclass={"build_ext": OptionalBuildExt})
