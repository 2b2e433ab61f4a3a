import numpy
from Cython.Build import cythonize
from setuptools import Extension, setup

# The compiled kernels are an optimization, not a requirement: stagelink.kernels
# falls back to the pure-Python implementations if this extension is absent.
setup(
    ext_modules=cythonize(
        [
            Extension(
                "stagelink._kern_c",
                ["src/stagelink/_kern_c.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
)
