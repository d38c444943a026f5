"""Classification of convex decay functions and order-estimate expressions.

Every quantity is computed in log space: ``log psi`` and its derivative
are exact for the shipped families, so fast-decaying functions such as
``exp(-t**2)`` are classified without underflow.  Class membership is
asymptotic; :func:`classify` reports the evidence window it used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
from scipy import stats
from scipy.optimize import brentq

from .errors import (
    BranchPreconditionFailed,
    DescriptorError,
    RegimeMismatch,
    RootBracketFailure,
)
from .psi_system import RadialSystem, ball_count, lattice_count
from .rules import DecayRule, ExpRule, make_rule

#: mu bounded above by this over the grid counts as bounded (class M_0 evidence)
MU_UPPER = 1e3
#: mu bounded below by this over the grid counts as M_inf evidence
MU_LOWER = 1e-3
#: Kendall tau giving 95% concordant pairs
TREND_TAU = 0.9
#: log-log slope of mu over the upper half of the grid that counts as unbounded growth
GROWTH_SLOPE = 0.05
#: relative spread below which a sampled quantity counts as constant
FLAT_SPREAD = 1e-6
#: allowed growth of log(psi(t)/psi(2t)) from the lower to the upper half of the grid
DELTA2_GROWTH = math.log(2.0)
#: default ratio band [1/C, C] for order-estimate validation
RATIO_BAND = 10.0

LABELS = ("M_0", "M_C", "M'_inf", "M^c_inf", "M''_inf", "B-only", "indeterminate")


class ConvexDecayFunction:
    """Positive decreasing function on ``t >= 1`` given by its logarithm.

    Parameters
    ----------
    log_value : callable
        ``t -> log psi(t)`` (vectorised).
    log_derivative : callable or None
        ``t -> psi'(t+)/psi(t)``; a forward difference of ``log_value`` is
        used when omitted.
    family : str
        Tag reported in outputs.
    rule : DecayRule or None
        Underlying rule, when the function comes from one; needed to build
        lattice systems for exact values.
    """

    def __init__(self, log_value: Callable[[np.ndarray], np.ndarray],
                 log_derivative: Callable[[np.ndarray], np.ndarray] | None = None,
                 family: str = "custom", rule: DecayRule | None = None,
                 params: dict[str, Any] | None = None) -> None:
        self._log_value = log_value
        self._log_derivative = log_derivative
        self.family = family
        self.rule = rule
        self.params = dict(params or {})

    # -- constructors -------------------------------------------------------
    @classmethod
    def from_rule(cls, rule: DecayRule | dict[str, Any]) -> "ConvexDecayFunction":
        rule = make_rule(rule)
        if isinstance(rule, ExpRule):
            lam, s, a = rule.lam, rule.s, rule.a
            return cls(lambda t: -lam * np.power(np.asarray(t, float) + a, s),
                       lambda t: -lam * s * np.power(np.asarray(t, float) + a, s - 1),
                       family="exp", rule=rule, params=rule.params())
        return cls(lambda t: np.log(np.asarray(rule.value(np.asarray(t, float)), float)),
                   lambda t: np.asarray(rule.derivative(np.asarray(t, float)), float)
                   / np.asarray(rule.value(np.asarray(t, float)), float),
                   family=rule.family, rule=rule, params=rule.params())

    @classmethod
    def from_table(cls, values: Sequence[float]) -> "ConvexDecayFunction":
        """Piecewise-linear interpolation of ``psi(1), psi(2), ...``; constant extrapolation is refused."""
        vals = np.asarray(values, dtype=float)
        if vals.size < 2 or np.any(vals <= 0) or np.any(np.diff(vals) > 0):
            raise DescriptorError("table needs at least two positive non-increasing values")
        knots = np.arange(1, vals.size + 1, dtype=float)
        slopes = np.diff(vals)

        def value(t: np.ndarray) -> np.ndarray:
            t = np.asarray(t, float)
            if np.any(t > knots[-1]) or np.any(t < 1):
                raise DescriptorError(f"table function defined on [1, {vals.size}] only")
            return np.interp(t, knots, vals)

        def deriv(t: np.ndarray) -> np.ndarray:
            t = np.asarray(t, float)
            i = np.clip(np.floor(t).astype(int) - 1, 0, slopes.size - 1)
            return slopes[i] / value(t)

        return cls(lambda t: np.log(value(t)), deriv, family="table", params={"size": int(vals.size)})

    def power(self, p: float) -> "ConvexDecayFunction":
        """``psi**p``."""
        return ConvexDecayFunction(lambda t: p * self._log_value(t),
                                   lambda t: p * self.log_derivative(t),
                                   family=f"{self.family}^p", rule=None,
                                   params={**self.params, "power": p})

    # -- evaluation ---------------------------------------------------------
    def log_value(self, t: Any) -> Any:
        return self._log_value(t)

    def __call__(self, t: Any) -> Any:
        return np.exp(self._log_value(t))

    def log_derivative(self, t: Any) -> Any:
        """``psi'(t+)/psi(t)``."""
        if self._log_derivative is not None:
            return self._log_derivative(t)
        t = np.asarray(t, float)
        h = 1e-6 * np.maximum(t, 1.0)
        return (self._log_value(t + h) - self._log_value(t)) / h

    def describe(self) -> dict[str, Any]:
        return {"family": self.family, **self.params}


def as_decay_function(obj: ConvexDecayFunction | DecayRule | dict[str, Any]) -> ConvexDecayFunction:
    if isinstance(obj, ConvexDecayFunction):
        return obj
    return ConvexDecayFunction.from_rule(obj)


# ---------------------------------------------------------------------------
# characteristics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Characteristics:
    t: float
    eta: float
    mu: float
    alpha: float
    psi_over_derivative: float


def eta(psi: ConvexDecayFunction, t: float) -> float:
    """Solve ``psi(eta) = psi(t)/2`` by bracketing on the log scale.

    Raises
    ------
    RootBracketFailure
        If ``psi`` does not halve on the search range.
    """
    target = float(psi.log_value(t)) - math.log(2.0)
    lo, hi = float(t), 2.0 * float(t) + 1.0
    while float(psi.log_value(hi)) > target:
        lo, hi = hi, 2.0 * hi
        if hi > 1e300:
            raise RootBracketFailure(f"psi does not halve beyond t={t:g}")
    if not float(psi.log_value(lo)) > target:
        raise RootBracketFailure(f"psi is not strictly decreasing near t={t:g}")
    try:
        return float(brentq(lambda x: float(psi.log_value(x)) - target, lo, hi, rtol=1e-13, xtol=1e-300,
                            maxiter=500))
    except (ValueError, RuntimeError) as exc:
        raise RootBracketFailure(str(exc)) from None


def characteristics(psi: ConvexDecayFunction | DecayRule | dict, t: float) -> Characteristics:
    """``eta``, ``mu = t/(eta - t)``, ``alpha = psi/(t |psi'|)`` and ``psi/|psi'|`` at ``t``."""
    psi = as_decay_function(psi)
    if t < 1:
        raise DescriptorError("characteristics are defined for t >= 1")
    e = eta(psi, t)
    slope = abs(float(psi.log_derivative(t)))
    if slope == 0:
        raise RootBracketFailure(f"psi is flat at t={t:g}")
    return Characteristics(float(t), e, t / (e - t), 1.0 / (t * slope), 1.0 / slope)


# ---------------------------------------------------------------------------
# classification
# ---------------------------------------------------------------------------


def trend(values: Sequence[float]) -> str:
    """``up``, ``down``, ``flat`` or ``mixed`` from Kendall's tau against the grid order."""
    v = np.asarray(values, dtype=float)
    scale = max(float(np.max(np.abs(v))), 1e-300)
    if (float(np.max(v)) - float(np.min(v))) <= FLAT_SPREAD * scale:
        return "flat"
    tau = stats.kendalltau(np.arange(v.size), v).statistic
    if tau >= TREND_TAU:
        return "up"
    if tau <= -TREND_TAU:
        return "down"
    return "mixed"


@dataclass(frozen=True)
class ClassLabel:
    label: str
    evidence: dict[str, Any] = field(default_factory=dict)


def default_grid(t_max: float = 1e4, points: int = 200) -> np.ndarray:
    return np.geomspace(1.0, t_max, points)


def delta2_constant(psi: ConvexDecayFunction, grid: np.ndarray) -> float:
    """``max psi(t)/psi(2t)`` over the grid (``inf`` on overflow)."""
    g = np.asarray(grid, float)
    log_k = float(np.max(psi.log_value(g) - psi.log_value(2 * g)))
    return math.exp(log_k) if log_k < 700 else math.inf


def is_convex_on(psi: ConvexDecayFunction, grid: np.ndarray) -> bool:
    """Midpoint convexity of ``psi`` on consecutive grid pairs, relative to ``psi`` at the left end."""
    g = np.asarray(grid, float)
    lo, hi = g[:-1], g[1:]
    mid = (lo + hi) / 2
    base = psi.log_value(lo)
    # (psi(lo) - 2 psi(mid) + psi(hi)) / psi(lo); both ratios are at most one
    second = 1.0 - 2 * np.exp(psi.log_value(mid) - base) + np.exp(psi.log_value(hi) - base)
    return bool(np.all(second >= -1e-9))


def classify(psi: ConvexDecayFunction | DecayRule | dict, grid: Sequence[float] | None = None) -> ClassLabel:
    """Stepanets class label from grid evidence.

    ``mu`` increasing (Kendall) with log-log slope at least
    ``GROWTH_SLOPE`` on the upper half of the grid counts as unbounded
    growth; the subclass then follows the trends of ``alpha`` and of
    ``psi/|psi'|``.  Otherwise ``mu <= MU_UPPER`` gives ``M_0`` and
    additionally ``mu >= MU_LOWER`` gives ``M_C``.  Non-convex functions
    satisfying the Delta_2 condition are labelled ``B-only``.
    """
    psi = as_decay_function(psi)
    g = default_grid() if grid is None else np.asarray(grid, dtype=float)
    if g.size < 4 or g[0] < 1 or g[-1] < 1e3:
        raise DescriptorError("classification grid must span [1, T] with T >= 1e3")
    half = g[g <= g[-1] / 2]
    k2 = delta2_constant(psi, half)
    split = math.sqrt(half[0] * half[-1])
    k_low = delta2_constant(psi, half[half <= split])
    # Delta_2 evidence: the doubling ratio stops growing across the window
    delta2 = math.isfinite(k2) and math.log(k2) - math.log(k_low) <= DELTA2_GROWTH
    convex = is_convex_on(psi, g)
    chars = [characteristics(psi, float(t)) for t in g]
    mu = np.array([c.mu for c in chars])
    al = np.array([c.alpha for c in chars])
    ratio = np.array([c.psi_over_derivative for c in chars])
    upper = g >= math.sqrt(g[0] * g[-1])
    slope = float(np.polyfit(np.log(g[upper]), np.log(mu[upper]), 1)[0])
    evidence = {
        "grid": [float(g[0]), float(g[-1]), int(g.size)],
        "mu_range": [float(mu.min()), float(mu.max())],
        "mu_trend": trend(mu),
        "mu_slope": slope,
        "alpha_trend": trend(al),
        "ratio_trend": trend(ratio),
        "ratio_range": [float(ratio.min()), float(ratio.max())],
        "delta2_constant": k2,
        "delta2": delta2,
        "convex": convex,
    }
    if not convex:
        return ClassLabel("B-only" if delta2 else "indeterminate", evidence)
    if evidence["mu_trend"] == "up" and slope >= GROWTH_SLOPE:
        rt, at = evidence["ratio_trend"], evidence["alpha_trend"]
        if rt == "down":
            return ClassLabel("M''_inf", evidence)
        if at == "down" and rt == "up":
            return ClassLabel("M'_inf", evidence)
        if at == "down" and rt == "flat":
            return ClassLabel("M^c_inf", evidence)
        return ClassLabel("indeterminate", evidence)
    if mu.max() <= MU_UPPER:
        return ClassLabel("M_C" if mu.min() >= MU_LOWER else "M_0", evidence)
    return ClassLabel("indeterminate", evidence)


def in_B(label: ClassLabel) -> bool:
    """Delta_2 evidence on a function whose ``mu`` stays bounded."""
    return bool(label.evidence.get("delta2", False)) and label.label in ("M_0", "M_C", "B-only")


# ---------------------------------------------------------------------------
# order expressions
# ---------------------------------------------------------------------------


def volume_constant(d: int, r: float) -> float:
    """``M_r`` with ``V_m ~ M_r m**d``: exact for ``r`` in ``{1, inf}``, estimated otherwise."""
    if math.isinf(r):
        return 2.0 ** d
    if r == 1:
        return 2.0 ** d / math.factorial(d)
    m = {1: 100000, 2: 2000, 3: 200}.get(d, 40)
    return lattice_count(d, r, m) / m ** d


def _count(d: int, r: float, m: int) -> int:
    if math.isinf(r) or r == 1:
        return ball_count(d, r, m)
    return lattice_count(d, r, m)


def locate_shell(n: int, d: int, r: float) -> tuple[int, int, int]:
    """``(m, V_{m-1}, V_m)`` with ``n`` in ``[V_{m-1}, V_m)``, by binary search."""
    if n < 1:
        raise DescriptorError("n must be positive")
    lo, hi = 1, 1
    while _count(d, r, hi) <= n:
        hi *= 2
    while lo < hi:
        mid = (lo + hi) // 2
        if _count(d, r, mid) > n:
            hi = mid
        else:
            lo = mid + 1
    return lo, _count(d, r, lo - 1), _count(d, r, lo)


@dataclass(frozen=True)
class OrderValue:
    value: float
    statement: str
    tag: str  # "order" or "exact"
    preconditions: dict[str, Any] = field(default_factory=dict)


def _decay_condition(psi: ConvexDecayFunction, beta: float, grid: np.ndarray) -> tuple[bool, float]:
    """``t |psi'(t)|/psi(t) >= K_0 > beta`` on the upper half of the grid."""
    tail = grid[grid >= math.sqrt(grid[0] * grid[-1])]
    k0 = float(np.min(tail * np.abs(psi.log_derivative(tail))))
    return k0 > beta, k0


def _ratio_condition(psi: ConvexDecayFunction, d: int, alpha: float) -> tuple[bool, float]:
    """``k**((d-1)/alpha) psi(k+1)/psi(k) -> 0``: decreasing and small at the grid end."""
    ks = np.arange(10.0, 2000.0)
    vals = np.exp((d - 1) / alpha * np.log(ks) + psi.log_value(ks + 1) - psi.log_value(ks))
    return bool(vals[-1] < 1e-3 and trend(vals) == "down"), float(vals[-1])


def order_formula(kind: str, p: float, q: float, psi: ConvexDecayFunction | DecayRule | dict, n: int,
                  d: int | None = None, r: float = math.inf, grid: Sequence[float] | None = None,
                  label: ClassLabel | None = None, argument: str = "volume") -> OrderValue:
    """Right-hand side of the order estimate for ``e_n`` (``kind="e_n"``) or widths (``"width"``).

    ``d=None`` selects ellipsoids with ``psi`` the rearranged sequence;
    an integer ``d`` selects the lattice classes with ``psi(|k|_r)``.
    The branch follows the class of ``psi**p``.

    For the Delta_2 branch of the lattice classes ``argument="volume"``
    evaluates ``psi`` at ``m_n = (n/M_r)**(1/d)`` and ``argument="literal"``
    at ``n**(1/d)``; the two are of the same order under Delta_2.

    Raises
    ------
    BranchPreconditionFailed
        When no branch applies or a branch condition fails numerically.
    """
    psi = as_decay_function(psi)
    if kind not in ("e_n", "width"):
        raise DescriptorError("kind must be 'e_n' or 'width'")
    if not (p > 0 and q > 0 and n >= 1):
        raise DescriptorError("need p, q > 0 and n >= 1")
    g = default_grid() if grid is None else np.asarray(grid, float)
    lab = label or classify(psi.power(p), g)
    gap = 1 / p - 1 / q
    pre: dict[str, Any] = {"class": lab.label}
    B = in_B(lab)
    t_value = lambda t: float(psi(t))  # noqa: E731

    if d is None:
        if kind == "width" and q <= p:
            return OrderValue(t_value(n + 1), "rearranged term", "exact", pre)
        if B:
            if p < q:
                ok, k0 = _decay_condition(psi, gap, g)
                pre["decay_condition"] = k0
                if not ok:
                    raise BranchPreconditionFailed(f"decay condition fails: K0={k0:.4g} <= {gap:.4g}")
            return OrderValue(t_value(n + 1) * n ** gap, "B branch", "order", pre)
        if lab.label == "M'_inf":
            return OrderValue(t_value(n + 1) * (eta(psi, n) - n) ** gap, "M' branch", "order", pre)
        if lab.label in ("M^c_inf", "M''_inf"):
            return OrderValue(t_value(n + 1), "fast branch", "order", pre)
        raise BranchPreconditionFailed(f"no branch for class {lab.label}")

    beta = d * gap
    m, v_prev, v_m = locate_shell(n, d, r)
    pre.update({"m": m, "V_prev": v_prev, "V_m": v_m})
    if kind == "width" and q <= p:
        return OrderValue(t_value(m), "shell value", "exact", pre)
    if B:
        if p < q:
            ok, k0 = _decay_condition(psi.power(p), beta, g)
            pre["decay_condition"] = k0
            if not ok:
                raise BranchPreconditionFailed(f"decay condition fails: K0={k0:.4g} <= {beta:.4g}")
        if argument not in ("volume", "literal"):
            raise DescriptorError("argument must be 'volume' or 'literal'")
        point = (n / volume_constant(d, r)) ** (1 / d) if argument == "volume" else n ** (1 / d)
        pre["argument"] = argument
        return OrderValue(t_value(max(point, 1.0)) * n ** gap, "B branch", "order", pre)
    if lab.label in ("M'_inf", "M^c_inf"):
        m_n = max((n / volume_constant(d, r)) ** (1 / d), 1.0)
        al = 1.0 / (m_n * abs(float(psi.log_derivative(m_n))))
        return OrderValue(t_value(m_n) * (n * al) ** gap, "M'/M^c branch", "order", pre)
    if lab.label == "M''_inf":
        if kind == "width":
            ok, last = _ratio_condition(psi, d, p * q / (q - p))
            pre["ratio_condition"] = last
            if not ok:
                raise BranchPreconditionFailed("ratio condition fails")
            return OrderValue(t_value(m) * (v_m - n) ** gap, "M'' shell branch", "order", pre)
        ok, last = _ratio_condition(psi, d, min(p, q))
        pre["ratio_condition"] = last
        if not ok:
            raise BranchPreconditionFailed("ratio condition fails")
        if p < q:
            return OrderValue(t_value(m) * (v_m - n) ** (1 / p) * n ** ((1 - d) / (d * q)),
                              "M'' shell branch", "order", pre)
        if n == v_prev:
            return OrderValue(t_value(m), "M'' shell start", "order", pre)
        if q * (v_m - v_prev) >= p * (v_m - n):
            return OrderValue(t_value(m) * (v_m - n) ** (1 / p) * n ** ((1 - d) / (d * q)),
                              "M'' shell branch", "order", pre)
        return OrderValue(t_value(m) * (n - v_prev) ** gap, "M'' shell interior", "order", pre)
    raise BranchPreconditionFailed(f"no branch for class {lab.label}")


# ---------------------------------------------------------------------------
# validation against exact values
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RatioReport:
    n_values: list[int]
    ratios: list[float]
    min_ratio: float
    max_ratio: float
    band: float

    @property
    def passes(self) -> bool:
        return 1 / self.band <= self.min_ratio and self.max_ratio <= self.band


def ratio_validation(exact: Sequence[float], order: Sequence[float], n_range: Sequence[int],
                     band: float = RATIO_BAND) -> RatioReport:
    """Extremes of ``exact/order`` over ``n_range``.

    Raises
    ------
    RegimeMismatch
        If the inputs have different lengths or an order value is zero.
    """
    if not (len(exact) == len(order) == len(n_range)) or not n_range:
        raise RegimeMismatch("exact values, order values and n_range must align")
    if any(float(o) == 0 or not math.isfinite(float(o)) for o in order):
        raise RegimeMismatch("order values must be finite and non-zero (underflow?)")
    ratios = [float(e) / float(o) for e, o in zip(exact, order)]
    return RatioReport(list(n_range), ratios, min(ratios), max(ratios), band)


def exact_class_values(kind: str, p: float, q: float, rule: DecayRule | dict, n_values: Sequence[int],
                       d: int = 1, r: float = math.inf) -> list[float]:
    """Exact ``e_n`` or widths for the radial lattice system ``psi(|k|_r)``."""
    from .extremal import nterm, widths

    system = RadialSystem(make_rule(rule), d, r)
    out = []
    for n in n_values:
        if kind == "e_n":
            out.append(nterm(system, n, p, q).value)
        elif kind == "width":
            out.append(widths(system, n, p, q).value)
        else:
            raise DescriptorError("kind must be 'e_n' or 'width'")
    return out
