"""Finite-length probabilistic lower bounds on the stopping distance.

For a given ensemble and block length, the chance that a random member
has stopping distance below hBar is at most the partial sum of the
ensemble-average stopping-set size counts up to hBar - 1.  Inverting
that bound at a target probability epsilon gives the largest hBar the
ensemble certifies for a fraction 1 - epsilon of its members.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .enumerators import EnsembleEnumerator, EnsembleSpec, iossef, ssef

DEFAULT_EPSILON = 0.5
SWEEP_H_START = 32


class TruncatedTableError(RuntimeError):
    """The enumerator table was cut below the size the query needs."""


@dataclass(frozen=True)
class BoundPoint:
    n: int
    epsilon: float
    h_bar: int
    tail_value: object  # Fraction in exact mode, float probability otherwise
    flag: bool = False  # even the size-1 term exceeded epsilon

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must be in (0, 1)")


def _sizes_available(enum: EnsembleEnumerator) -> int:
    """Largest h for which the table still holds the exact coefficient."""
    if enum.h_cap is not None:
        return min(enum.h_cap, enum.out_len)
    return enum.out_len


def failure_bound(enum: EnsembleEnumerator, h_bar: int):
    """Partial sum of the average counts over sizes 1..h_bar - 1.

    Exact enumerators give a Fraction, log-domain enumerators a float.
    """
    if not 1 <= h_bar <= enum.out_len + 1:
        raise ValueError("h_bar must be in 1..out_len + 1")
    if h_bar - 1 > _sizes_available(enum):
        raise TruncatedTableError(
            f"table truncated at size {_sizes_available(enum)}, "
            f"need {h_bar - 1}")
    coeffs = ssef(enum)
    if enum.exact:
        return sum(coeffs[1:h_bar], Fraction(0))
    vals = np.asarray(coeffs[1:h_bar], dtype=float)
    vals = vals[np.isfinite(vals)]
    if vals.size == 0:
        return 0.0
    m = vals.max()
    return float(math.exp(m) * np.sum(np.exp(vals - m)))


def hmin_quantile(enum: EnsembleEnumerator,
                  epsilon: float = DEFAULT_EPSILON) -> BoundPoint:
    """Maximal h_bar whose failure bound stays within epsilon.

    Scans the monotone partial sums once.  When even the size-1 count
    exceeds epsilon the point degenerates to h_bar = 1 and is flagged.
    """
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must be in (0, 1)")
    coeffs = ssef(enum)
    avail = _sizes_available(enum)
    if enum.exact:
        eps = Fraction(epsilon)
        cum = Fraction(0)
        tail = Fraction(0)
    else:
        eps = float(epsilon)
        cum = 0.0
        tail = 0.0
    h_bar = None
    for h in range(1, avail + 1):
        term = coeffs[h] if enum.exact else math.exp(coeffs[h]) \
            if np.isfinite(coeffs[h]) else 0.0
        new = cum + term
        if new > eps:
            h_bar = h
            tail = cum
            break
        cum = new
    if h_bar is None:
        if avail < enum.out_len:
            raise TruncatedTableError(
                "partial sums stayed below epsilon through the truncated "
                "table; rebuild with a larger size cap")
        h_bar, tail = enum.out_len, cum
    return BoundPoint(n=enum.block_len, epsilon=float(epsilon), h_bar=h_bar,
                      tail_value=tail, flag=h_bar == 1)


def bound_sweep(spec: EnsembleSpec, n_list, epsilon: float = DEFAULT_EPSILON,
                h_start: int = SWEEP_H_START) -> list:
    """One quantile point per block length, regrowing truncated tables.

    Unpunctured tables start capped at h_start sizes and double the cap
    whenever the scan runs off the end; punctured tables are always
    built in full, so they never retry.
    """
    points = []
    for n in n_list:
        h_max = h_start
        while True:
            enum = iossef(spec, n, h_max=h_max)
            try:
                points.append(hmin_quantile(enum, epsilon))
                break
            except TruncatedTableError:
                if h_max >= enum.out_len:
                    raise
                h_max = min(2 * h_max, enum.out_len)
    return points
