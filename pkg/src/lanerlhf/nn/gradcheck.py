"""Central finite-difference verification of analytic gradients."""
from __future__ import annotations

from typing import Callable

import numpy as np

from .params import ParamSet


def grad_check(
    loss_and_grad: Callable[[], float],
    params: ParamSet,
    h: float = 1e-5,
    skip_frozen: bool = True,
) -> dict:
    """Compare analytic gradients against central differences.

    loss_and_grad must zero the grads, run forward + backward with the
    current parameter values, and return the scalar loss.  Relative error
    uses a scale floor of 1 so near-zero gradient entries are compared
    absolutely:  err = |a - n| / max(|a|, |n|, 1).

    Returns {"max_rel_err": float, "per_param": {name: float}}.
    """
    loss_and_grad()
    analytic = {n: p.grad.copy() for n, p in params.items()}
    report: dict[str, float] = {}
    worst = 0.0
    for name, p in params.items():
        if skip_frozen and p.frozen:
            continue
        a = analytic[name]
        err = 0.0
        flat = p.value.reshape(-1)
        aflat = a.reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + h
            lp = loss_and_grad()
            flat[idx] = orig - h
            lm = loss_and_grad()
            flat[idx] = orig
            num = (lp - lm) / (2.0 * h)
            an = aflat[idx]
            err = max(err, abs(an - num) / max(abs(an), abs(num), 1.0))
        report[name] = err
        worst = max(worst, err)
    # Restore grads to the analytic values for the unperturbed point.
    loss_and_grad()
    return {"max_rel_err": worst, "per_param": report}
