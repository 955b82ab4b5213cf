from setuptools import setup
from setuptools.extension import Extension

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [Extension("gridscout._kernel", ["src/gridscout/_kernel.pyx"],
                   language="c++", extra_compile_args=["-O3"])],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    # pure-python fallback still works without the compiled core
    ext_modules = []

setup(ext_modules=ext_modules)
