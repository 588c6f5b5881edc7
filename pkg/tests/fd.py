"""Central finite-difference gradient oracle shared by the test modules.

Central differences at step 1e-5 in 64-bit resolve gradients to roughly
1e-10 absolute, which comfortably supports the 1e-4 relative tolerance
used across the suite. 32-bit inputs are rejected because the oracle
would be meaningless there.
"""

import numpy as np

STEP = 1e-5
REL_TOL = 1e-4


def central_difference(f, x: np.ndarray, step: float = STEP) -> np.ndarray:
    """Numerical d f / d x for scalar-valued f, nudging x in place."""
    if x.dtype != np.float64:
        raise TypeError(f"finite differences need float64 inputs, got {x.dtype}")
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + step
        hi = f()
        flat[i] = keep - step
        lo = f()
        flat[i] = keep
        out[i] = (hi - lo) / (2.0 * step)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Max elementwise |a-n| / max(|a|, |n|, tiny floor)."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-6)
    return float(np.max(np.abs(analytic - numeric) / denom))


def worst_gradient_error(loss_fn, analytic: dict, params: dict,
                         step: float = STEP) -> float:
    """Max relative error over every entry of every named parameter.

    loss_fn() recomputes the scalar loss from the live arrays in
    `params`; `analytic` maps the same names to precomputed gradients.
    """
    worst = 0.0
    for name, x in params.items():
        numeric = central_difference(loss_fn, x, step)
        worst = max(worst, relative_error(analytic[name], numeric))
    return worst
