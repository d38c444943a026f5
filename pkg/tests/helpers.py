"""Independent brute-force routes used as oracles by the test-suite.

Nothing here calls into the enumeration or closed-form code of the
package; values are obtained by direct enumeration over boxes, sorting and
explicit sums.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np


def box(d: int, radius: int) -> Iterable[tuple[int, ...]]:
    return itertools.product(range(-radius, radius + 1), repeat=d)


def brute_lattice_count(d: int, r: float, m: int) -> int:
    """Points of Z^d with |k|_r <= m by enumeration over the cube [-m, m]^d."""
    count = 0
    for k in box(d, m):
        if r == math.inf:
            inside = max((abs(x) for x in k), default=0) <= m
        elif r == 1:
            inside = sum(abs(x) for x in k) <= m
        else:
            inside = sum(abs(x) ** r for x in k) <= m ** r * (1 + 1e-12)
        count += inside
    return count


def brute_levels(moduli: Sequence[float | Fraction]) -> tuple[list, list[int]]:
    """Distinct values in decreasing order and cumulative counts ``delta``."""
    values = sorted(moduli, reverse=True)
    eps: list = []
    delta = [0]
    for v in values:
        if not eps or v != eps[-1]:
            eps.append(v)
            delta.append(delta[-1])
        delta[-1] += 1
    return eps, delta


def hyperbolic_moduli(r: float, radius: int) -> list[Fraction]:
    """Exact ``(k'_1 k'_2)^{-r}`` for integer ``r`` over a box, ``k' = max(|k|, 1)``."""
    out = []
    for k1, k2 in box(2, radius):
        prod = max(abs(k1), 1) * max(abs(k2), 1)
        out.append(Fraction(1, prod ** int(r)))
    return out


def brute_tail_power(coeffs: dict, keep_out: Callable, p: float) -> float:
    """``sum |c|^p`` over indices outside a region given by a predicate."""
    return math.fsum(abs(c) ** p for k, c in coeffs.items() if not keep_out(k))


def nterm_equal_exponent(moduli: Sequence[float], n: int, p: float) -> float:
    """Explicit ``max_{s>n} (s-n)^{1/p} (sum_{k<=s} m_k^{-p})^{-1/p}`` over the sorted moduli.

    Derived from Hoelder's inequality for ``q = p``: among all coefficient
    vectors supported on ``s`` entries the best n-term error is extremal
    when ``|psi_k c_k|`` is constant on the support.
    """
    m = sorted(moduli, reverse=True)
    best = 0.0
    acc = 0.0
    for s in range(1, len(m) + 1):
        acc += m[s - 1] ** -p
        if s > n:
            best = max(best, ((s - n) / acc) ** (1 / p))
    return best


def diagonal_modulus_bruteforce(coeffs: dict, alpha: float, t: float, p: float,
                                samples: int = 4001) -> float:
    """Sup over ``h in [-t, t]`` of the p-norm of ``|2 sin(h sum(k)/2)|^alpha c_k`` on a dense grid."""
    best = 0.0
    for h in np.linspace(-t, t, samples):
        total = math.fsum(abs(2 * math.sin(h * (k if isinstance(k, int) else sum(k)) / 2)) ** (alpha * p)
                          * abs(c) ** p for k, c in coeffs.items())
        best = max(best, total)
    return best ** (1 / p)
