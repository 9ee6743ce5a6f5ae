"""Build the optional compiled digest kernel.

The package works without it (a pure-Python fallback is selected at
import time); set AIDCHAIN_PURE=1 to skip compilation entirely.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("AIDCHAIN_PURE"):
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "aidchain._keccak_c",
                ["src/aidchain/_keccak_c.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
