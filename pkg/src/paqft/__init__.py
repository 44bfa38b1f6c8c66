"""Perturbative algebraic field theory on exactly solvable model spacetimes.

Modules: ``model`` (grids, propagators, field operators), ``functional``
(polynomial functionals and truncated series), ``algebra`` (deformed
products and brackets), ``weyl`` (exact Weyl-algebra computations),
``graphs`` (graph expansion of time-ordered products), ``renorm``
(extension of homogeneous distributions), ``microlocal`` (numerical
wave-front directions and symbol flows), ``smatrix`` (formal S-matrices and
renormalization maps) and ``cli``.
"""
import os as _os

# PAQFT_THREADS caps BLAS threads; it must be seen before numpy loads
_threads = _os.environ.get("PAQFT_THREADS")
if _threads and _threads.isdigit() and int(_threads) > 0:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

__version__ = "0.1.0"
