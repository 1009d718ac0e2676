"""Small helpers for evaluating user-supplied scalar callables on arrays."""
from __future__ import annotations

from typing import Callable

import numpy as np


def call_on_columns(func: Callable[..., object], *cols: np.ndarray) -> np.ndarray:
    """Evaluate ``func`` elementwise over equally shaped columns.

    A numpy-aware callable is invoked once on the full arrays; anything that
    fails or returns the wrong shape is evaluated point by point instead.
    """
    shape = np.shape(cols[0]) if cols else ()
    with np.errstate(all="ignore"):
        try:
            out = np.asarray(func(*cols), dtype=float)
        except (TypeError, ValueError):
            out = None
        if out is not None:
            if out.shape == shape:
                return out
            if out.ndim == 0:
                return np.full(shape, float(out))
        flat = [np.ravel(c) for c in cols]
        size = flat[0].size if flat else 1
        vals = np.empty(size)
        for k in range(size):
            vals[k] = float(func(*(float(c[k]) for c in flat)))
        return vals.reshape(shape)


def frobenius(a: np.ndarray) -> float:
    return float(np.linalg.norm(a, "fro"))
