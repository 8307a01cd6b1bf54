"""Build script for the optional compiled kernel extension.

python -m pip install -e .        # builds regexplain._kernels._ckern if a
                                  # compiler is available; falls back to the
                                  # pure numpy kernels otherwise
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
    import numpy

    extensions = cythonize(
        [
            Extension(
                "regexplain._kernels._ckern",
                ["src/regexplain/_kernels/_ckern.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
    for ext in extensions:
        ext.optional = True
except ImportError:
    extensions = []

setup(ext_modules=extensions)
