"""Shared test utilities: finite-difference gradient checking."""

import numpy as np

from pathfusion import autodiff as ad


def central_difference(build, param, h=1e-5):
    """Numeric gradient of build()'s scalar loss w.r.t. one parameter.

    build must construct a fresh tape and return the loss tensor; it is
    re-run twice per parameter entry.
    """
    num = np.zeros_like(param.value)
    it = np.nditer(param.value, flags=["multi_index"])
    for _ in it:
        ix = it.multi_index
        orig = param.value[ix]
        param.value[ix] = orig + h
        up = build().data[0, 0]
        param.value[ix] = orig - h
        down = build().data[0, 0]
        param.value[ix] = orig
        num[ix] = (up - down) / (2.0 * h)
    return num


def max_rel_err(analytic, numeric, floor=1e-4):
    """Elementwise relative error with a denominator floor.

    The floor absorbs finite-difference noise (~1e-9 absolute) on entries
    whose true gradient is near zero.
    """
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


def check_gradients(build, params, h=1e-5, floor=1e-4):
    """Backward gradients of build() vs central differences; worst rel err."""
    loss = build()
    for p in params:
        p.zero_grad()
    loss.tape.backward(loss)
    worst = 0.0
    for p in params:
        analytic = p.grad.copy()
        numeric = central_difference(build, p, h=h)
        worst = max(worst, max_rel_err(analytic, numeric, floor=floor))
    return worst
