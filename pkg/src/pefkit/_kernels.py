"""Hot numeric kernels with optional numba acceleration.

The greedy coupling fill and the entropy sums sit inside the Bayesian
optimization objective and the oracle sweeps, so they get @njit kernels.
Set ``PEFKIT_DISABLE_NUMBA=1`` (or install without numba) to force the
pure-numpy fallback; both paths agree to the last few ulps (summation
order differs) and the benchmark in ``benchmarks/bench_kernels.py``
compares them.
"""

from __future__ import annotations

import os

import numpy as np

_LOG2E = 1.0 / np.log(2.0)

# Residuals below this are treated as exhausted in the greedy loop.
RESIDUAL_EPS = 1e-12


def _entropy_bits_np(probs: np.ndarray) -> float:
    p = probs[probs > 0.0]
    return float(-np.sum(p * np.log2(p)))


def _joint_entropy_bits_np(mass: np.ndarray) -> float:
    flat = mass.ravel()
    m = flat[flat > 0.0]
    return float(-np.sum(m * np.log2(m)))


def _greedy_fill_np(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Greedy coupling: repeatedly pair the largest residuals.

    Ties resolve to the lowest index, which is the lowest symbol id
    because supports are kept in ascending-id order.
    """
    rp = p.copy()
    rq = q.copy()
    mass = np.zeros((p.size, q.size))
    for _ in range(p.size + q.size):
        i = int(np.argmax(rp))
        j = int(np.argmax(rq))
        m = min(rp[i], rq[j])
        if m <= RESIDUAL_EPS:
            break
        mass[i, j] += m
        rp[i] -= m
        rq[j] -= m
    return mass


_USE_NUMBA = os.environ.get("PEFKIT_DISABLE_NUMBA", "0") not in ("1", "true", "yes")

if _USE_NUMBA:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover
        _USE_NUMBA = False

if _USE_NUMBA:
    entropy_bits = njit(cache=True)(_entropy_bits_np)
    joint_entropy_bits = njit(cache=True)(_joint_entropy_bits_np)
    greedy_fill = njit(cache=True)(_greedy_fill_np)
else:
    entropy_bits = _entropy_bits_np
    joint_entropy_bits = _joint_entropy_bits_np
    greedy_fill = _greedy_fill_np

USING_NUMBA = _USE_NUMBA
