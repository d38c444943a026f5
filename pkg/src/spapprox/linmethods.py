"""Triangular linear summation methods acting blockwise on ``|k|_1 = nu``.

A method is a multiplier sequence ``nu -> lambda_nu`` applied to every
coefficient of the block ``nu``; errors, generalized derivatives and
Poisson-kernel norms all reduce to coefficientwise products.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

from .errors import ParameterOutOfRange
from .identities import Majorant, block_degree
from .sp_space import SpElement, sp_norm

#: multiplier of the nu = 0 block for the generalized Abel-Poisson means
ABEL_POISSON_ZERO_BLOCK = 1.0
#: above this block degree binomials are evaluated in log space
LOG_BINOMIAL_FROM = 60

@dataclass(frozen=True)
class MultiplierMethod:
    """Blockwise multiplier ``nu -> lambda_nu``."""

    tag: str
    params: dict[str, Any]
    rule: Callable[[int], float] = field(repr=False, compare=False)

    def __call__(self, nu: int) -> float:
        return self.rule(nu)

def _check_rho(rho: float) -> float:
    rho = float(rho)
    if not 0 <= rho < 1:
        raise ParameterOutOfRange(f"rho must lie in [0, 1), got {rho}")
    return rho

def tap_multiplier(nu: int, r: int, rho: float) -> float:
    """``lambda_{nu,r}(rho) = sum_{k<r} C(nu,k) (1-rho)**k rho**(nu-k)``; one for ``nu < r``."""
    if nu < r:
        return 1.0
    if rho == 0.0:
        return 0.0
    if nu <= LOG_BINOMIAL_FROM:
        return math.fsum(math.comb(nu, k) * (1 - rho) ** k * rho ** (nu - k) for k in range(r))
    log_rho, log_co = math.log(rho), math.log1p(-rho) if rho < 1 else -math.inf
    terms = []
    for k in range(r):
        log_binom = math.lgamma(nu + 1) - math.lgamma(k + 1) - math.lgamma(nu - k + 1)
        terms.append(math.exp(log_binom + k * log_co + (nu - k) * log_rho))
    return math.fsum(terms)

def tap_multiplier_derivative_form(nu: int, r: int, rho: float) -> float:
    """``sum_{k<r} (1-rho)**k / k! * d^k/drho^k rho**nu`` with exact falling factorials."""
    if nu < r:
        return 1.0
    # d^k/drho^k rho**nu = nu (nu-1) ... (nu-k+1) rho**(nu-k)
    return math.fsum((1 - rho) ** k / math.factorial(k) * math.perm(nu, k) * rho ** (nu - k)
                     for k in range(r))

def method_multipliers(tag: str, n: int | None = None, rho: float | None = None,
                       s: float = 1.0, r: int = 1) -> MultiplierMethod:
    """Build ``partial``, ``fejer``, ``abel_poisson`` or ``tap`` multipliers.

    Raises
    ------
    ParameterOutOfRange
        On a negative ``n``, ``rho`` outside ``[0, 1)``, ``s <= 0`` or ``r < 1``.
    """
    if tag in ("partial", "fejer"):
        if n is None or n < 0:
            raise ParameterOutOfRange("n must be a non-negative integer")
        n = int(n)
        if tag == "partial":
            return MultiplierMethod(tag, {"n": n}, lambda nu: 1.0 if nu <= n else 0.0)
        return MultiplierMethod(tag, {"n": n}, lambda nu: 1.0 - nu / (n + 1) if nu <= n else 0.0)
    if tag == "abel_poisson":
        rho = _check_rho(rho if rho is not None else -1)
        if not s > 0:
            raise ParameterOutOfRange("s must be positive")
        return MultiplierMethod(tag, {"rho": rho, "s": s},
                                lambda nu: ABEL_POISSON_ZERO_BLOCK if nu == 0 else rho ** (nu ** s))
    if tag == "tap":
        rho = _check_rho(rho if rho is not None else -1)
        if int(r) != r or r < 1:
            raise ParameterOutOfRange("r must be a positive integer")
        r = int(r)
        return MultiplierMethod(tag, {"rho": rho, "r": r}, lambda nu: tap_multiplier(nu, r, rho))
    raise ParameterOutOfRange(f"unknown method {tag!r}")

def apply_method(f: SpElement, method: MultiplierMethod) -> SpElement:
    return f.map_coefficients(lambda k: method(block_degree(k)))

def method_error(f: SpElement, method: MultiplierMethod, p: float) -> float:
    """``||f - A(f)||`` in the l_p coefficient norm."""
    return sp_norm(f.map_coefficients(lambda k: 1.0 - method(block_degree(k))), p)

def generalized_derivative(f: SpElement, r: int, kind: str) -> SpElement:
    """``f^{(r)}`` (``kind="round"``) or ``f^{[r]}`` (``kind="bracket"``).

    ``round`` multiplies block ``nu >= 1`` by ``nu**r``; ``bracket``
    multiplies block ``nu >= r`` by ``nu!/(nu-r)!``.  Blocks where the
    multiplier system vanishes (``nu = 0`` for round with ``r > 0``,
    ``nu < r`` for bracket) do not enter the derivative.
    """
    if r < 0:
        raise ParameterOutOfRange("r must be non-negative")
    if r == 0:
        return f
    if kind == "round":
        kept = f.restrict(lambda k: block_degree(k) >= 1)
        return kept.map_coefficients(lambda k: float(block_degree(k)) ** r)
    if kind == "bracket":
        if int(r) != r:
            raise ParameterOutOfRange("bracket derivatives need integer r")
        r = int(r)
        kept = f.restrict(lambda k: block_degree(k) >= r)
        return kept.map_coefficients(lambda k: float(math.perm(block_degree(k), r)))
    raise ParameterOutOfRange("kind must be 'round' or 'bracket'")

def poisson_norm(f: SpElement, rho: float, p: float) -> float:
    """Norm of the Poisson integral with equal radii: ``rho**|k|_1`` times ``f_hat(k)``."""
    rho = _check_rho(rho)
    return sp_norm(f.map_coefficients(lambda k: rho ** block_degree(k)), p)

# ---------------------------------------------------------------------------
# rate reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RateReport:
    """Paired quantities over a sweep and the extremes of their ratios."""

    family: str
    parameter: str
    sweep: list[float]
    columns: dict[str, list[float]]
    ratio_range: dict[str, tuple[float, float]]

def _ratio_range(num: Sequence[float], den: Sequence[float]) -> tuple[float, float]:
    ratios = [a / b for a, b in zip(num, den) if b > 0]
    if not ratios:
        return (math.nan, math.nan)
    return (min(ratios), max(ratios))

def method_rate_report(f: SpElement, family: str, omega: Majorant, sweep: Sequence[float],
                       p: float = 1.0, r: int = 1, s: int = 1) -> RateReport:
    """Tabulate the quantities paired by the direct and inverse theorems.

    ``family="fejer"`` sweeps ``n`` and pairs ``||f - sigma_n(f)||`` and
    ``||S_n(f^{[1]})||/n`` with ``omega(1/n)``.  ``family="tap"`` sweeps
    ``rho`` and pairs ``||f - A_{rho,r}(f)||`` with ``(1-rho)**(r-1) omega(1-rho)``
    and ``||P(f^{[r]})(rho)||`` with ``omega(1-rho)/(1-rho)``.
    ``family="abel_poisson"`` does the same with ``P_{rho,s}`` and ``f^{(s)}``.
    """
    sweep = [float(x) for x in sweep]
    cols: dict[str, list[float]] = {}
    ranges: dict[str, tuple[float, float]] = {}
    if family == "fejer":
        n_values = [int(x) for x in sweep]
        if any(n < 1 for n in n_values):
            raise ParameterOutOfRange("Fejer sweep needs n >= 1")
        deriv = generalized_derivative(f, 1, "bracket")
        cols["error"] = [method_error(f, method_multipliers("fejer", n=n), p) for n in n_values]
        cols["partial_derivative_over_n"] = [
            sp_norm(apply_method(deriv, method_multipliers("partial", n=n)), p) / n for n in n_values]
        cols["omega"] = [float(omega(1.0 / n)) for n in n_values]
        ranges["error/omega"] = _ratio_range(cols["error"], cols["omega"])
        ranges["partial_derivative_over_n/omega"] = _ratio_range(cols["partial_derivative_over_n"], cols["omega"])
        return RateReport(family, "n", sweep, cols, ranges)
    if family not in ("tap", "abel_poisson"):
        raise ParameterOutOfRange("family must be 'fejer', 'tap' or 'abel_poisson'")
    for rho in sweep:
        _check_rho(rho)
    if family == "tap":
        deriv = generalized_derivative(f, r, "bracket")
        cols["error"] = [method_error(f, method_multipliers("tap", rho=x, r=r), p) for x in sweep]
        cols["error_scale"] = [(1 - x) ** (r - 1) * float(omega(1 - x)) for x in sweep]
    else:
        deriv = generalized_derivative(f, s, "round")
        cols["error"] = [method_error(f, method_multipliers("abel_poisson", rho=x, s=s), p) for x in sweep]
        cols["error_scale"] = [float(omega(1 - x)) for x in sweep]
    cols["poisson_derivative"] = [poisson_norm(deriv, x, p) for x in sweep]
    cols["poisson_scale"] = [float(omega(1 - x)) / (1 - x) for x in sweep]
    ranges["error/error_scale"] = _ratio_range(cols["error"], cols["error_scale"])
    ranges["poisson_derivative/poisson_scale"] = _ratio_range(cols["poisson_derivative"], cols["poisson_scale"])
    return RateReport(family, "rho", sweep, cols, ranges)
