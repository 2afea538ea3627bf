"""Confluent hypergeometric function 1F1 for the displacement-moment kernel.

Only the regime the moment engine needs is covered: integer-like positive
parameters and moderate real arguments. Negative arguments go through the
Kummer transformation so the power series has positive terms only.
"""
from __future__ import annotations

import math

import numpy as np

_MAX_TERMS = 20000
_REL_TOL = 1e-17


class ConvergenceError(ArithmeticError):
    """A series did not settle within its term budget."""


def _series(a: np.ndarray, b: np.ndarray, z: float) -> np.ndarray:
    # Plain Maclaurin series; callers guarantee z >= 0 or a terminating `a`.
    term = np.ones(np.broadcast(a, b).shape)
    total = term.copy()
    for j in range(_MAX_TERMS):
        term = term * (a + j) / (b + j) * z / (j + 1)
        total = total + term
        if np.all(np.abs(term) <= _REL_TOL * np.abs(total)):
            return total
    raise ConvergenceError(f"1F1 series did not converge for z={z!r}")


def hyp1f1(a, b, z: float):
    """Kummer's function 1F1(a; b; z).

    ``a`` and ``b`` may be scalars or arrays (broadcast together); ``z`` is a
    real scalar shared by every element, which is how the moment engine calls
    it. Parameters must be positive.
    """
    if not math.isfinite(z):
        raise ValueError(f"1F1 argument must be finite, got {z!r}")
    a_arr = np.asarray(a, dtype=float)
    b_arr = np.asarray(b, dtype=float)
    if np.any(a_arr <= 0) or np.any(b_arr <= 0):
        raise ValueError("1F1 parameters must be positive")
    scalar = a_arr.ndim == 0 and b_arr.ndim == 0
    if z >= 0.0:
        out = _series(a_arr, b_arr, z)
    else:
        # 1F1(a; b; z) = e^z 1F1(b - a; b; -z)
        out = math.exp(z) * _series(b_arr - a_arr, b_arr, -z)
    return float(out) if scalar else out
