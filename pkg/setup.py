import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

# The compiled kernels are an optional speedup: if Cython or a C compiler is
# missing the build still succeeds and normalis.kernels falls back to the
# numpy implementation at import time.
extensions = [
    Extension(
        "normalis._cykernels",
        ["src/normalis/_cykernels.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3", "-ffp-contract=off", "-fno-math-errno"],
        optional=True,
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={"language_level": "3"},
    )
    if cythonize
    else [],
)
