import numpy
from setuptools import Extension, setup
from Cython.Build import cythonize

setup(
    ext_modules=cythonize(
        [
            Extension(
                "rakikit._kernels",
                ["src/rakikit/_kernels.pyx"],
                extra_compile_args=[
                    "-O3",
                    "-march=native",
                    # allow if-conversion of FP selects (no FP traps/errno in use)
                    "-fno-trapping-math",
                    "-fno-math-errno",
                ],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    ),
)
