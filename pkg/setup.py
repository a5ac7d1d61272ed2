"""Build script: compiles the optional Cython stepping kernel.

The package is fully functional without the extension (a pure-Python
kernel with identical numerics is selected at import time), so a failed
compile only costs speed. -ffp-contract=off keeps the compiled kernel
bit-identical to the pure backend: both must produce the same IEEE-754
double sequence for the determinism contract to hold across backends.
"""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        "src/hexcpg/_kernel/_speedups.pyx",
        language_level=3,
    )
    for ext in ext_modules:
        ext.extra_compile_args = ["-O2", "-ffp-contract=off"]
except Exception as exc:  # pragma: no cover - build environment dependent
    print(f"hexcpg: skipping compiled kernel ({exc}); pure-Python backend will be used")

setup(ext_modules=ext_modules)
