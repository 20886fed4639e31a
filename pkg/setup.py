"""Build the optional compiled kernels.

The package works without the extension (a pure numpy fallback is selected
at import time), so the extension is marked optional: a failed compile
degrades the install instead of breaking it.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "qcocycle._kernels",
                ["src/qcocycle/_kernels.pyx"],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
