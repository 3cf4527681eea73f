import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "motionseed._kernels",
        ["src/motionseed/_kernels.pyx"],
        include_dirs=[np.get_include()],
        # -ffast-math lets gcc call the vectorised exp from libmvec; NaN checks
        # happen in Python after each kernel call
        extra_compile_args=["-O3", "-fopenmp", "-ffast-math"],
        extra_link_args=["-fopenmp"],
        libraries=["mvec", "m"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        # a failed compile leaves the pure-Python kernels in charge
        optional=True,
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={"language_level": "3"},
    )
)
