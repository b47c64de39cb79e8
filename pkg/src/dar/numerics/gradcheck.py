"""Central finite-difference checks of reverse-mode gradients."""

from __future__ import annotations

from typing import Callable

import numpy as np

from dar.numerics.tensor import NonFiniteError, Tensor


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-6) -> float:
    """Normwise error ``max|a - n| / max(max|a|, max|n|, floor)`` over one tensor.

    Elementwise ratios are dominated by difference roundoff (about 1e-10
    absolute) on entries whose true gradient is near zero.
    """
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    if a.size == 0:
        return 0.0
    denom = max(float(np.abs(a).max()), float(np.abs(n).max()), floor)
    return float(np.abs(a - n).max()) / denom


def numeric_grad(f: Callable[[], float], x: np.ndarray, eps: float) -> np.ndarray:
    """Central differences of scalar ``f`` w.r.t. every entry of ``x`` (mutated and restored)."""
    g = np.zeros(x.shape, dtype=np.float64)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        fp = f()
        flat[i] = orig - eps
        fm = f()
        flat[i] = orig
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NonFiniteError(f"non-finite loss while perturbing entry {i}")
        gflat[i] = (fp - fm) / (2 * eps)
    return g


def grad_check(
    f: Callable[[dict[str, Tensor]], Tensor],
    inputs: dict[str, Tensor],
    eps: float = 1e-6,
    floor: float = 1e-6,
) -> dict[str, float]:
    """Compare ``backward`` gradients of ``f(inputs)`` with central differences.

    ``inputs`` must hold float64 tensors; those with ``requires_grad`` are
    checked.  Returns the max relative error per input name.  Inputs that
    do not require gradients must come back from backward with no gradient.
    """
    for name, t in inputs.items():
        if t.data.dtype != np.float64:
            raise TypeError(f"grad_check needs float64 inputs; {name!r} is {t.data.dtype}")
        t.grad = None
    out = f(inputs)
    if not np.isfinite(out.data).all():
        raise NonFiniteError("non-finite function value at the check point")
    out.backward()
    errors: dict[str, float] = {}
    for name, t in inputs.items():
        if not t.requires_grad:
            if t.grad is not None and np.any(t.grad):
                raise AssertionError(f"frozen input {name!r} received a gradient")
            continue
        analytic = t.grad if t.grad is not None else np.zeros_like(t.data)
        numeric = numeric_grad(lambda: float(f(inputs).data), t.data, eps)
        errors[name] = relative_error(analytic, numeric, floor)
    return errors


def max_relative_error(errors: dict[str, float]) -> float:
    return max(errors.values(), default=0.0)
