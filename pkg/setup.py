# Cython extensions need a setup.py alongside pyproject.toml.
import numpy as np
from setuptools import Extension, setup
from Cython.Build import cythonize

setup(
    ext_modules=cythonize(
        [
            Extension(
                "soilmap.forest._kernels",
                ["src/soilmap/forest/_kernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
)
