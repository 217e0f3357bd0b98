"""Assembly kernel backend selection.

Prefers the compiled extension; falls back to the NumPy implementation when
the extension is unavailable or ``STRIPCTL_PURE_PYTHON`` is set.  Both
backends expose the same five functions with identical semantics.
"""

import os

if os.environ.get("STRIPCTL_PURE_PYTHON"):
    from . import _fallback as impl

    BACKEND = "python"
else:
    try:
        from . import _core as impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        from . import _fallback as impl

        BACKEND = "python"

energy_terms = impl.energy_terms
gradient = impl.gradient
hessian_band = impl.hessian_band
curvature_measures = impl.curvature_measures
curvature_measures_with_gradients = impl.curvature_measures_with_gradients
