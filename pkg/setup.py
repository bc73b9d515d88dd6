import os

import numpy as np
from setuptools import Extension, setup

# The extension is optional: without Cython or a compiler the package
# installs with the pure-Python kernel only.
ext_modules = []
if not os.environ.get("SRBM_NO_EXTENSION"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "srbm.simulator._kernel",
                    ["src/srbm/simulator/_kernel.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
