import os
import platform

import numpy as np
from setuptools import Extension, setup

ext_modules = []
compile_args = ["-O3", "-ffp-contract=off"]
if platform.machine() in ("x86_64", "AMD64"):
    # hardware rounding for ceil(); lets the loops vectorize
    compile_args.append("-msse4.1")
if os.environ.get("DIRTYMAC_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "dirtymac._ckernels",
                    ["src/dirtymac/_ckernels.pyx"],
                    include_dirs=[np.get_include()],
                    # no FMA contraction: keeps results bit-identical to numpy
                    extra_compile_args=compile_args,
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
