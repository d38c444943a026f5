"""Direct and inverse identities, smoothness moduli and related inequalities.

Best approximations come in two flavours here:

* level approximations ``E_n(f)``: the tail of ``f`` outside the superlevel
  set ``g_{n-1}(psi)``;
* triangular approximations ``E^T_n(f)``: the tail outside ``|k|_1 <= n - 1``.

The smoothness modulus acts on coefficients through the multiplier
``|2 sin((k, h)/2)|**alpha``, so its p-th power is a finite trigonometric
sum maximised over shifts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence

import numpy as np
from scipy import integrate
from scipy.optimize import minimize_scalar

from .errors import DescriptorError, InvalidMajorant, SupportViolation, ZeroDivisor
from .psi_system import (
    Index,
    PsiSystem,
    SuperlevelRegion,
    TriangularRegion,
    char_sequences,
    l1_norm,
    l1_shell,
    locate_levels,
)
from .sp_space import SpElement, psi_derivative, sp_norm, tail_error, tail_power

#: grid points per half-period of the fastest oscillation in shift searches
POINTS_PER_HALF_PERIOD = 16
#: local maxima of the shift grid that are refined
REFINED_CANDIDATES = 8


def block_degree(index: Index) -> int:
    """``|k|_1`` for lattice indices and ``k`` itself over the naturals."""
    return index if isinstance(index, int) else l1_norm(index)


def triangular_error(f: SpElement, n: int, p: float) -> float:
    """``E^T_n(f)``: distance to polynomials of degree at most ``n - 1``."""
    if n < 0:
        raise DescriptorError("n must be non-negative")
    d = f.dimension or 1
    return tail_error(f, TriangularRegion(d, n - 1), p) if n >= 1 else sp_norm(f, p)


def triangular_error_profile(f: SpElement, n_max: int, p: float) -> list[float]:
    """``[E^T_1(f)**p, ..., E^T_{n_max}(f)**p]`` from one pass over the blocks."""
    mass = {}
    for k, c in f.items():
        nu = block_degree(k)
        mass.setdefault(nu, []).append(abs(c) ** p)
    blocks = sorted(mass)
    out = []
    for n in range(1, n_max + 1):
        out.append(math.fsum(v for nu in blocks if nu >= n for v in mass[nu]))
    return out


# ---------------------------------------------------------------------------
# direct and inverse identities
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IdentityReport:
    lhs: float
    rhs: float
    residual: float
    relative_residual: float
    details: dict[str, Any] = field(default_factory=dict)


def _level_regions(psi: PsiSystem, depth: int) -> tuple[list[float], list[SuperlevelRegion]]:
    """Moduli ``epsilon_1..epsilon_depth`` and regions ``g_0..g_depth``."""
    seq = char_sequences(psi, depth)
    eps = [float(e) for e in seq.epsilon]
    regions = [SuperlevelRegion(psi, 0, math.inf, 0)]
    regions += [SuperlevelRegion(psi, j, seq.epsilon[j - 1], seq.delta[j]) for j in range(1, seq.levels + 1)]
    return eps, regions


def _derivative_strict(f: SpElement, psi: PsiSystem) -> SpElement:
    result = psi_derivative(f, psi)
    if not result.free_term.is_zero():
        raise ZeroDivisor("the identities need psi non-zero on the support of f")
    return result.derivative


def direct_identity_residual(f: SpElement, psi: PsiSystem, p: float, n: int) -> IdentityReport:
    """Residual of the level identity linking ``E_n(f)`` with ``E_k(f^psi)``.

    ``E_n^p(f) = eps_n^p E_n^p(f^psi) + sum_{k>n} (eps_k^p - eps_{k-1}^p) E_k^p(f^psi)``,
    with ``f^psi`` the ψ-derivative of ``f``.  The series is finite because
    the support is.  The report also carries the triangular inequality
    ``E^T_n(f) <= eps'_n E^T_n(f^psi)`` where ``eps'_n`` is the largest
    ``|psi(k)|`` with ``|k|_1 >= n``.
    """
    if n < 1:
        raise DescriptorError("n must be a positive integer")
    g = _derivative_strict(f, psi)
    levels, _ = locate_levels(psi, f.support)
    depth = max([n, *levels.values()])
    eps, regions = _level_regions(psi, depth)
    lhs = tail_power(f, regions[n - 1], p)
    terms = [eps[n - 1] ** p * tail_power(g, regions[n - 1], p)]
    for k in range(n + 1, depth + 1):
        terms.append((eps[k - 1] ** p - eps[k - 2] ** p) * tail_power(g, regions[k - 1], p))
    rhs = math.fsum(terms)
    scale = max(lhs, math.fsum(abs(t) for t in terms), np.finfo(float).tiny)
    residual = abs(lhs - rhs)
    eps_tri = largest_modulus_beyond(psi, n)
    left = triangular_error(f, n, p)
    right = eps_tri * triangular_error(g, n, p)
    tri = {"lhs": left, "rhs": right, "epsilon": eps_tri,
           "holds": left <= right * (1 + 1e-12) + 1e-300}
    return IdentityReport(lhs, rhs, residual, residual / scale, {"depth": depth, "triangular": tri})


def largest_modulus_beyond(psi: PsiSystem, n: int) -> float:
    """``max_{|k|_1 >= n} |psi(k)|``: the first enumerated index of degree at least ``n``."""
    for lvl in psi.levels():
        if any(block_degree(k) >= n for k in lvl.indices):
            return float(lvl.modulus)
    return 0.0


def inverse_identity_check(f: SpElement, psi: PsiSystem, p: float, n: int) -> tuple[float, IdentityReport]:
    """Series value and residual of the inverse level identity.

    The identity checked is
    ``E_n^p(f^psi) = eps_n^-p E_n^p(f) + sum_{k>n} (eps_k^-p - eps_{k-1}^-p) E_k^p(f)``
    and the series is ``sum_{k>=2} (eps_k^-p - eps_{k-1}^-p) E_k^p(f)``.
    """
    if n < 1:
        raise DescriptorError("n must be a positive integer")
    g = _derivative_strict(f, psi)
    levels, _ = locate_levels(psi, f.support)
    depth = max([n, *levels.values()])
    eps, regions = _level_regions(psi, depth)
    inv = [e ** -p for e in eps]
    series = math.fsum((inv[k - 1] - inv[k - 2]) * tail_power(f, regions[k - 1], p)
                       for k in range(2, depth + 1))
    lhs = tail_power(g, regions[n - 1], p)
    terms = [inv[n - 1] * tail_power(f, regions[n - 1], p)]
    for k in range(n + 1, depth + 1):
        terms.append((inv[k - 1] - inv[k - 2]) * tail_power(f, regions[k - 1], p))
    rhs = math.fsum(terms)
    scale = max(lhs, math.fsum(abs(t) for t in terms), np.finfo(float).tiny)
    residual = abs(lhs - rhs)
    return series, IdentityReport(lhs, rhs, residual, residual / scale, {"depth": depth})


# ---------------------------------------------------------------------------
# smoothness modulus
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModulusQuery:
    """Order, radius, exponent and grid resolution of a modulus evaluation."""

    alpha: float
    t: float
    p: float
    resolution: int = POINTS_PER_HALF_PERIOD
    shift: str = "diagonal"

    def __post_init__(self) -> None:
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise DescriptorError("order alpha must be positive and finite")
        if not (self.t >= 0 and math.isfinite(self.t)):
            raise DescriptorError("radius t must be non-negative and finite")
        if not self.p > 0:
            raise DescriptorError("exponent p must be positive")
        if self.resolution < 8:
            raise DescriptorError("resolution must be at least 8 points")
        if self.shift not in ("diagonal", "euclidean"):
            raise DescriptorError("shift must be 'diagonal' or 'euclidean'")


def _diagonal_weights(f: SpElement, p: float) -> tuple[np.ndarray, np.ndarray]:
    """Distinct ``|sum_j k_j|`` frequencies and their ``|f_hat|**p`` masses."""
    mass: dict[int, list[float]] = {}
    for k, c in f.items():
        m = abs(k if isinstance(k, int) else sum(k))
        if m:
            mass.setdefault(m, []).append(abs(c) ** p)
    freqs = np.array(sorted(mass), dtype=float)
    weights = np.array([math.fsum(mass[int(m)]) for m in freqs], dtype=float)
    return freqs, weights


def _diag_objective(freqs: np.ndarray, weights: np.ndarray, power: float, s: np.ndarray) -> np.ndarray:
    phase = np.abs(2.0 * np.sin(np.multiply.outer(s, freqs) / 2.0))
    return np.power(phase, power) @ weights


def diagonal_profile(f: SpElement, alpha: float, p: float, t_max: float,
                     resolution: int = POINTS_PER_HALF_PERIOD) -> tuple[np.ndarray, np.ndarray]:
    """Shift grid on ``[0, t_max]`` and the multiplier sums at each node.

    The grid is anchored at zero with a fixed step, so profiles for
    different ``t_max`` share nodes.
    """
    freqs, weights = _diagonal_weights(f, p)
    if freqs.size == 0 or t_max == 0:
        return np.array([0.0, t_max]), np.zeros(2)
    step = math.pi / (resolution * freqs.max())
    count = int(math.floor(t_max / step))
    grid = np.concatenate([np.arange(count + 1) * step, [t_max]])
    grid = np.unique(grid)
    return grid, _diag_objective(freqs, weights, alpha * p, grid)


def _diagonal_modulus_power(f: SpElement, q: ModulusQuery) -> float:
    freqs, weights = _diagonal_weights(f, q.p)
    if freqs.size == 0 or q.t == 0:
        return 0.0
    grid, vals = diagonal_profile(f, q.alpha, q.p, q.t, q.resolution)
    best = float(vals.max())
    step = math.pi / (q.resolution * freqs.max())
    interior = np.nonzero((vals[1:-1] >= vals[:-2]) & (vals[1:-1] >= vals[2:]))[0] + 1
    cands = list(interior) + [len(vals) - 1]
    cands = sorted(cands, key=lambda i: -vals[i])[:REFINED_CANDIDATES]
    power = q.alpha * q.p
    for i in cands:
        lo, hi = max(0.0, grid[i] - step), min(q.t, grid[i] + step)
        if hi <= lo:
            continue
        res = minimize_scalar(lambda s: -float(_diag_objective(freqs, weights, power, np.array([s]))[0]),
                              bounds=(lo, hi), method="bounded", options={"xatol": 1e-14})
        best = max(best, -float(res.fun))
    return best


def _kronecker_ball(d: int, count: int, radius: float, center: np.ndarray | None = None) -> np.ndarray:
    """Low-discrepancy points of the ball via a Kronecker sequence with rejection."""
    # generalised golden ratio: root of x**(d+1) = x + 1
    phi = 2.0
    for _ in range(60):
        phi = (1 + phi) ** (1.0 / (d + 1))
    alpha = np.array([(1 / phi) ** (j + 1) for j in range(d)]) % 1
    raw = (0.5 + np.outer(np.arange(1, 4 * count * 2 ** d + 1), alpha)) % 1
    pts = 2 * raw - 1
    pts = pts[np.sum(pts * pts, axis=1) <= 1][:count] * radius
    if center is not None:
        pts = pts + center
    return np.vstack([np.zeros((1, d)) if center is None else center[None, :], pts])


def _euclidean_modulus_power(f: SpElement, q: ModulusQuery) -> float:
    if f.is_zero() or q.t == 0:
        return 0.0
    d = f.dimension or 1
    ks = np.array([[k] if isinstance(k, int) else list(k) for k, _ in f.items()], dtype=float)
    w = np.array([abs(c) ** q.p for _, c in f.items()])
    power = q.alpha * q.p

    def objective(h: np.ndarray) -> np.ndarray:
        return np.power(np.abs(2 * np.sin((h @ ks.T) / 2)), power) @ w

    kmax = float(np.max(np.linalg.norm(ks, axis=1))) or 1.0
    count = int(min(20000, max(500, (q.resolution * q.t * kmax / math.pi + 1) ** d)))
    pts = _kronecker_ball(d, count, q.t)
    vals = objective(pts)
    best_i = int(np.argmax(vals))
    best_h, best = pts[best_i], float(vals[best_i])
    radius = q.t / max(count ** (1.0 / d), 1.0) * 2
    for _ in range(4):
        local = _kronecker_ball(d, 400, radius, best_h)
        local = local[np.linalg.norm(local, axis=1) <= q.t]
        lv = objective(local)
        i = int(np.argmax(lv))
        if lv[i] > best:
            best, best_h = float(lv[i]), local[i]
        radius /= 4
    return best


def smoothness_modulus(f: SpElement, query: ModulusQuery) -> float:
    """``sup_{|h| <= t} ||Delta_h^alpha f||`` for finitely supported ``f``.

    With ``shift="diagonal"`` (default) the shift moves every coordinate
    by the same amount ``h`` in ``[0, t]``, so ``(k, h) = h * sum_j k_j``;
    ``shift="euclidean"`` searches the Euclidean ball of radius ``t``.
    """
    if query.shift == "diagonal":
        value = _diagonal_modulus_power(f, query)
    else:
        value = _euclidean_modulus_power(f, query)
    return value ** (1.0 / query.p)


def fractional_difference_norm(f: SpElement, alpha: float, h: float, p: float, terms: int = 200) -> float:
    """``||Delta_h^alpha f||`` from the truncated binomial difference series (diagonal shift).

    Used only to validate the closed multiplier form.
    """
    from scipy.special import binom

    j = np.arange(terms)
    coef = (-1.0) ** j * binom(alpha, j)
    vals = []
    for k, c in f.items():
        m = k if isinstance(k, int) else sum(k)
        mult = np.sum(coef * np.exp(-1j * j * m * h))
        vals.append(abs(c * mult) ** p)
    return math.fsum(vals) ** (1.0 / p)


# ---------------------------------------------------------------------------
# Bernstein and inverse inequalities
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InequalityReport:
    lhs: float
    rhs: float
    holds: bool
    details: dict[str, Any] = field(default_factory=dict)


def smallest_modulus_in_triangle(psi: PsiSystem, n: int) -> float:
    """``min_{0 < |k|_1 <= n} |psi(k)|``."""
    if psi.dimension is None:
        return min(float(psi.modulus(k)) for k in range(1, n + 1))
    return min(float(psi.modulus(k)) for nu in range(1, n + 1) for k in l1_shell(psi.dimension, nu))


def bernstein_check(tau: SpElement, psi: PsiSystem, p: float, n: int) -> InequalityReport:
    """``||tau^psi|| <= ||tau|| / min_{0<|k|_1<=n} |psi(k)|`` for a polynomial of degree ``n``.

    Raises
    ------
    SupportViolation
        If ``tau`` has a coefficient with ``|k|_1 > n``.
    """
    if any(block_degree(k) > n for k in tau.support):
        raise SupportViolation(f"polynomial has frequencies beyond degree {n}")
    eps = smallest_modulus_in_triangle(psi, n)
    deriv = psi_derivative(tau, psi).derivative
    lhs = sp_norm(deriv, p)
    rhs = sp_norm(tau, p) / eps
    return InequalityReport(lhs, rhs, lhs <= rhs * (1 + 1e-12) + 1e-12, {"epsilon": eps})


@dataclass(frozen=True)
class InverseBoundReport:
    lhs: float
    rhs_exact: float
    rhs_relaxed: float
    holds: bool
    relaxation_valid: bool


def inverse_bound_check(f: SpElement, alpha: float, p: float, n: int,
                        shift: str = "diagonal") -> InverseBoundReport:
    """Modulus at ``pi/n`` against weighted sums of triangular best approximations.

    ``rhs_exact = (pi/n)**alpha (sum_{nu<=n} (nu**(alpha p) - (nu-1)**(alpha p)) E^T_nu**p)**(1/p)``
    and ``rhs_relaxed`` replaces the bracket by ``alpha p nu**(alpha p - 1)``.
    The relaxation dominates termwise only when ``alpha p >= 1``; below that
    ``relaxation_valid`` is false and ``holds`` checks the exact bound only.
    """
    if n < 1:
        raise DescriptorError("n must be a positive integer")
    lhs = smoothness_modulus(f, ModulusQuery(alpha, math.pi / n, p, shift=shift))
    prof = triangular_error_profile(f, n, p)
    ap = alpha * p
    exact = math.fsum((nu ** ap - (nu - 1) ** ap) * prof[nu - 1] for nu in range(1, n + 1))
    relaxed = math.fsum(ap * nu ** (ap - 1) * prof[nu - 1] for nu in range(1, n + 1))
    scale = (math.pi / n) ** alpha
    rhs_exact = scale * exact ** (1.0 / p)
    rhs_relaxed = scale * relaxed ** (1.0 / p)
    valid = ap >= 1
    tol = 1e-12 * max(rhs_exact, 1e-300)
    holds = lhs <= rhs_exact + tol and (not valid or rhs_exact <= rhs_relaxed + tol)
    return InverseBoundReport(lhs, rhs_exact, rhs_relaxed, holds, valid)


# ---------------------------------------------------------------------------
# majorants and Bari-type conditions
# ---------------------------------------------------------------------------


class Majorant:
    """A continuous non-decreasing function on ``[0, 1]`` vanishing at ``0+`` only.

    The four defining properties are checked on a grid at construction.

    Raises
    ------
    InvalidMajorant
    """

    def __init__(self, func: Callable[[float], float], name: str = "omega") -> None:
        self.func = func
        self.name = name
        grid = np.concatenate([np.geomspace(1e-300, 1e-3, 200), np.linspace(1e-3, 1.0, 2000)])
        vals = np.array([float(func(x)) for x in grid])
        flags = {
            "continuous": bool(np.all(np.isfinite(vals)) and
                               np.max(np.abs(np.diff(vals[200:]))) <= 0.05 * max(vals[-1], 1e-300)),
            "non_decreasing": bool(np.all(np.diff(vals) >= -1e-14 * np.abs(vals[1:]))),
            "positive": bool(np.all(vals > 0)),
            "vanishes_at_zero": bool(vals[0] < 1e-2 * vals[-1] and vals[0] < vals[199]),
        }
        self.flags = flags
        failed = [k for k, ok in flags.items() if not ok]
        if failed:
            raise InvalidMajorant(f"majorant {name!r} fails: {', '.join(failed)}")

    def __call__(self, x: float) -> float:
        return float(self.func(x))


def power_majorant(r: float) -> Majorant:
    return Majorant(lambda x: x ** r, name=f"t^{r:g}")


@dataclass(frozen=True)
class BariReport:
    """Ratio evidence for the two Bari conditions and the decay profile."""

    b_alpha_ratios: list[float]
    b_ratios: list[float]
    b_alpha_verdict: str
    b_verdict: str
    profile_ratios: list[float] | None
    profile_verdict: str | None


def _trend_verdict(ratios: Sequence[float]) -> str:
    """``holds`` if the last decade is flat, ``borderline`` for log-type growth, else ``fails``."""
    r = np.asarray(ratios, dtype=float)
    n = r.size
    if n < 20:
        return "indeterminate"
    last, earlier = float(r[-1]), float(r[max(n // 10 - 1, 0)])
    if not math.isfinite(last):
        return "fails"
    growth = (last - earlier) / max(abs(last), 1e-300)
    if growth < 0.05:
        return "holds"
    if last / max(earlier, 1e-300) < math.sqrt(10):
        return "borderline"
    return "fails"


def bari_and_class_check(omega: Majorant, alpha: float, profile: Sequence[float] | SpElement | None = None,
                         n_grid: int = 1000, p: float = 1.0) -> BariReport:
    """Finite-range evidence for the Bari conditions and ``E_n = O(omega(1/n))``.

    ``profile`` is a list ``[E_1, E_2, ...]`` or an element whose
    triangular best approximations are used.
    """
    v = np.arange(1, n_grid + 1, dtype=float)
    om = np.array([omega(1.0 / x) for x in v])
    head = np.cumsum(v ** (alpha - 1) * om)
    b_alpha = head / (v ** alpha * om)
    # tail sums: explicit up to 100 n_grid, integral remainder beyond
    far = 100 * n_grid
    w = np.arange(1, far + 1, dtype=float)
    terms = np.array([omega(1.0 / x) for x in w]) / w
    rest, _ = integrate.quad(lambda u: omega(u) / u, 0.0, 1.0 / (far + 0.5), limit=200)
    suffix = np.cumsum(terms[::-1])[::-1]
    b_tail = np.array([suffix[int(n)] if n < far else 0.0 for n in v]) + rest
    b = b_tail / om
    prof_ratios = verdict = None
    if profile is not None:
        if isinstance(profile, SpElement):
            values = [e ** (1.0 / p) for e in triangular_error_profile(profile, n_grid, p)]
        else:
            values = list(profile)[:n_grid]
        prof_ratios = [values[i] / om[i] for i in range(len(values))]
        verdict = "consistent" if _trend_verdict(prof_ratios) in ("holds",) or \
            max(prof_ratios[len(prof_ratios) // 2:] or [0]) <= 1.5 * max(prof_ratios[: max(len(prof_ratios) // 2, 1)]) \
            else "inconsistent"
    return BariReport(b_alpha.tolist(), b.tolist(), _trend_verdict(b_alpha), _trend_verdict(b),
                      prof_ratios, verdict)
