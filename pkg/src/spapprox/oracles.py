"""Brute-force numerical oracles for diagonal-ellipsoid extremal problems.

These routines never use the closed forms of :mod:`spapprox.extremal`;
they search over coefficient vectors directly and return the best value
found, which is a lower bound on the true supremum.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import linprog, minimize_scalar
from scipy.special import logsumexp

from .errors import DescriptorError

GAMMA_MAX_DIM = 10_000
NTERM_MAX_DIM = 64


def _raw_gamma(weights: np.ndarray, x: np.ndarray, beta: float, p: float) -> np.ndarray:
    """``(sum_k w_k x_k**beta)**(1/p)`` row-wise, with ``x`` on the simplex."""
    return np.power(np.sum(weights * np.power(x, beta), axis=-1), 1.0 / p)


def _gamma_error(mods: np.ndarray, p: float, q: float, restarts: int,
                 rng: np.random.Generator, max_iter: int = 20_000) -> float:
    # x_k = |c_k|**q on the simplex, objective sum_k |psi_k|**p x_k**(p/q)
    mods = mods[mods > 0]
    if mods.size == 0:
        return 0.0
    beta = p / q
    if beta == 1:
        # linear objective on the simplex: the multiplicative iteration degenerates
        # into a slow power iteration, so solve the linear programme instead
        weights = np.power(mods, p)
        res = linprog(-weights, A_eq=np.ones((1, mods.size)), b_eq=[1.0], bounds=(0, None), method="highs")
        return float(-res.fun) ** (1.0 / p)
    log_w = p * np.log(mods)
    dim = mods.size
    starts = np.log(rng.dirichlet(np.ones(dim), size=restarts - 1)) if restarts > 1 else np.empty((0, dim))
    logs = np.vstack([np.full((1, dim), -math.log(dim)), starts])
    for _ in range(max_iter):
        new = beta * logs + log_w
        new -= logsumexp(new, axis=1, keepdims=True)
        step = np.max(np.abs(new - logs))
        logs = new
        if step < 1e-14:
            break
        if beta > 1:
            # concentrated enough: every row has a dominant coordinate
            top2 = np.sort(logs, axis=1)[:, -2:]
            if np.all(top2[:, 1] - top2[:, 0] > 60):
                break
    x = np.exp(logs)
    weights = np.exp(log_w)
    values = _raw_gamma(weights, x, beta, p)
    best = float(np.max(values))
    if beta >= 1:
        # round each restart to the vertex it concentrates on
        vertex = np.argmax(logs, axis=1)
        best = max(best, float(np.max(mods[vertex])))
    return best


def _nterm_raw(mods: np.ndarray, coeffs: np.ndarray, n: int, p: float, q: float) -> float:
    norm = np.sum(np.abs(coeffs) ** q) ** (1.0 / q)
    if norm == 0:
        return 0.0
    prod = np.sort(np.abs(mods * coeffs / norm))[::-1]
    return float(np.sum(prod[n:] ** p) ** (1.0 / p))


def _nterm(mods: np.ndarray, n: int, p: float, q: float, restarts: int,
           rng: np.random.Generator) -> float:
    order = np.argsort(-mods, kind="stable")
    mods = mods[order]
    mods = mods[mods > 0]
    dim = mods.size
    if dim <= n:
        return 0.0
    best = 0.0
    for s in range(n + 1, dim + 1):
        # equal mass: |psi_k c_k| constant on the s largest moduli
        c = np.zeros(dim)
        c[:s] = 1.0 / mods[:s]
        best = max(best, _nterm_raw(mods, c, n, p, q))
        if p < q and s < dim:
            best = max(best, _two_level(mods, n, p, q, s))
    # random restarts followed by multiplicative hill-climbing
    for _ in range(restarts):
        c = rng.dirichlet(np.ones(dim) * 0.5) ** (1.0 / q) / np.maximum(mods, 1e-300) ** rng.uniform(0, 1)
        val = _nterm_raw(mods, c, n, p, q)
        scale = 0.5
        for _ in range(200):
            trial = c * np.exp(scale * rng.standard_normal(dim))
            tv = _nterm_raw(mods, trial, n, p, q)
            if tv > val:
                c, val = trial, tv
            else:
                scale *= 0.97
        best = max(best, val)
    return best


def _two_level(mods: np.ndarray, n: int, p: float, q: float, s: int) -> float:
    """Top ``s`` entries at a common level, the rest proportional to ``psi**(q/(q-p))``."""
    head_mass = float(np.sum(mods[:s] ** -q))
    tail = mods[s:]
    tail_mass = float(np.sum(tail ** (p * q / (q - p))))
    if tail_mass == 0:
        return 0.0
    t_max = tail_mass ** (-1.0 / q)

    def evaluate(t: float) -> float:
        rest = max(1.0 - t ** q * tail_mass, 0.0)
        level = (rest / head_mass) ** (1.0 / q)
        c = np.concatenate([level / mods[:s], t * tail ** (p / (q - p))])
        return _nterm_raw(mods, c, n, p, q)

    res = minimize_scalar(lambda t: -evaluate(t), bounds=(0.0, t_max), method="bounded",
                          options={"xatol": 1e-13 * max(t_max, 1e-300)})
    return max(evaluate(float(res.x)), evaluate(0.0))


def diagonal_norm_oracle(moduli: Sequence[float], n: int, p: float, q: float, task: str,
                         gamma: Iterable[int] | None = None, restarts: int = 64,
                         seed: int = 0) -> float:
    """Lower bound on a diagonal-ellipsoid characteristic by direct search.

    Parameters
    ----------
    moduli : sequence of float
        ``|psi_k|`` for a finite system, in any order.
    n : int
        Size of the excluded set (``gamma-error``) or number of free terms
        (``nterm``).
    task : {"gamma-error", "nterm"}
        ``gamma-error`` maximises ``(sum_{k not in gamma} |psi_k c_k|**p)**(1/p)``
        over the unit q-ball; ``gamma`` defaults to the first ``n`` positions.
        ``nterm`` maximises the l_p norm left after removing the ``n`` largest
        products ``|psi_k c_k|``.
    restarts : int
        Random restarts (the uniform start is always included for gamma-error).
    """
    mods = np.abs(np.asarray(moduli, dtype=float))
    rng = np.random.default_rng(seed)
    if task == "gamma-error":
        if mods.size > GAMMA_MAX_DIM:
            raise DescriptorError(f"gamma-error oracle accepts at most {GAMMA_MAX_DIM} moduli")
        excluded = set(range(n)) if gamma is None else set(gamma)
        keep = np.array([i not in excluded for i in range(mods.size)], dtype=bool)
        return _gamma_error(mods[keep], p, q, restarts, rng)
    if task == "nterm":
        if mods.size > NTERM_MAX_DIM:
            raise DescriptorError(f"nterm oracle accepts at most {NTERM_MAX_DIM} moduli")
        return _nterm(mods, n, p, q, restarts, rng)
    raise DescriptorError("task must be 'gamma-error' or 'nterm'")
