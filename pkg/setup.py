"""Build script for the optional compiled counting kernel.

The package works without the extension: a NumPy implementation with the
same contract is selected at import time when ``cmnlearn._kernels`` is
missing.  Set ``CMNLEARN_SKIP_EXT=1`` to force a pure build.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("CMNLEARN_SKIP_EXT") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [Extension("cmnlearn._kernels", ["src/cmnlearn/_kernels.pyx"])],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
