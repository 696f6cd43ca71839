import os
import sys

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("DEADTIME_QKD_NO_EXT"):
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "deadtime_qkd._kernel",
                    ["src/deadtime_qkd/_kernel.pyx"],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        print("Cython not available; installing pure-Python kernel only", file=sys.stderr)

setup(ext_modules=ext_modules)
