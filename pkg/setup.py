"""Build script for the optional compiled kernel extension.

The package works without the extension (a pure-numpy fallback is selected at
import time), so a failed compile must not break installation.
"""

import sys

from setuptools import Extension, setup


def _extensions():
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "cdsp._kernels._core",
        ["src/cdsp/_kernels/_core.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        # the kernels promise bit-identical arithmetic against the
        # pure-python reference: no fused multiply-add, and no fusing of
        # sin/cos pairs into glibc sincos (it rounds differently)
        extra_compile_args=["-O3", "-ffp-contract=off",
                            "-fno-builtin-sin", "-fno-builtin-cos"],
    )
    return cythonize([ext], language_level=3)


try:
    setup(ext_modules=_extensions())
except SystemExit:
    raise
except Exception as exc:  # noqa: BLE001 - fall back to pure python install
    print(f"warning: compiled kernels skipped ({exc}); pure-python fallback will be used",
          file=sys.stderr)
    setup(ext_modules=[])
