"""Build script for the optional compiled chain kernel.

The extension links against numpy's random C library so that it draws
from the same bit generators as ``numpy.random.Generator``.  If it cannot
be built, the package still installs and runs on the pure-Python engine.
"""
import os

from setuptools import Extension, setup


def extensions():
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError:
        return []
    root = os.path.dirname(numpy.__file__)
    ext = Extension(
        "smh._core",
        ["src/smh/_core.pyx"],
        include_dirs=[numpy.get_include()],
        library_dirs=[os.path.join(root, "random", "lib"), os.path.join(root, "_core", "lib")],
        libraries=["npyrandom", "npymath"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], compiler_directives={"language_level": 3})


setup(ext_modules=extensions())
