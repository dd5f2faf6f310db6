"""Build hook for the optional compiled rule builders.

The package is fully functional without them (pure-Python fallback), so a
missing Cython or compiler only skips the extension.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("FRL_NO_EXT", "") != "1":
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        ext = Extension(
            "frl._kernels",
            ["src/frl/_kernels.pyx"],
            include_dirs=[numpy.get_include()],
            language="c++",
            # no fused multiply-add: keeps results bit-identical to the Python builders
            extra_compile_args=["-O2", "-ffp-contract=off"],
        )
        ext_modules = cythonize([ext], compiler_directives={"language_level": 3})
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
