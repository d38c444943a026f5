"""Sharp Jackson-type constants in the coefficient spaces.

Central objects:

* ``I_n(lambda)``: the infimum over ``nu >= n`` of
  ``int_0^pi (1 - cos(nu t / n))**lambda sin t dt``, by Gauss-Jacobi
  quadrature over folded periods plus the ``nu -> inf`` limit candidate;
* ``sigma(lambda)``: a certified lower bound for ``I_n(lambda) - 2**(lambda+1)/(lambda+1)``
  built from the cosine series of ``(1 - cos x)**lambda``;
* upper bounds for the sharp constant over measures made of sine bumps,
  whose cosine moments are known in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Sequence

import numpy as np
from scipy import special
from scipy.optimize import linprog, minimize_scalar

from .errors import (
    DescriptorError,
    QuadratureFailure,
    SlowConvergence,
    SupportViolation,
)
from .identities import (
    ModulusQuery,
    _diag_objective,
    _diagonal_weights,
    diagonal_profile,
    smoothness_modulus,
    triangular_error,
)
from .sp_space import SpElement

#: the nu-scan runs over [n, NU_SCAN_FACTOR * n]
NU_SCAN_FACTOR = 64
QUAD_TOL = 1e-10
SIGMA_TOL = 1e-10
SIGMA_TERM_BUDGET = 10_000_000


# ---------------------------------------------------------------------------
# cosine series of (1 - cos x)**lambda
# ---------------------------------------------------------------------------


def cosine_coefficients(lam: float, count: int) -> np.ndarray:
    """``a_0..a_count`` with ``(1 - cos x)**lam = a_0 + sum_k a_k cos(k x)``."""
    k = np.arange(count + 1, dtype=float)
    second = lam - k + 1
    # log-space: 1/Gamma(lam - k + 1) grows factorially while 1/Gamma(lam + k + 1) decays
    pole = (second <= 0) & (second == np.floor(second))
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        log_mag = (special.gammaln(2 * lam + 1) + (1 - lam) * math.log(2.0)
                   - special.gammaln(lam + k + 1) - special.gammaln(second))
        sign = (-1.0) ** k * special.gammasgn(second)
        a = np.where(pole, 0.0, sign * np.exp(log_mag))
    a[0] = math.exp(special.gammaln(2 * lam + 1) - lam * math.log(2.0) - 2 * special.gammaln(lam + 1))
    return a


def mean_value(lam: float) -> float:
    """``a_0``: average of ``(1 - cos x)**lam`` over a period."""
    return math.exp(lam * math.log(2.0) + special.gammaln(lam + 0.5) - 0.5 * math.log(math.pi)
                    - special.gammaln(lam + 1))


def closed_form_In(lam: float) -> float:
    """``2**(lam+1)/(lam+1)``: the value at ``nu = n``, which is the infimum for integer ``lam``."""
    return 2.0 ** (lam + 1) / (lam + 1)


@lru_cache(maxsize=1)
def first_harmonic_bound() -> float:
    """``sup_{c >= 1} (1 + cos(pi c)) / (c**2 - 1)``."""
    c = np.linspace(1.0, 20.0, 2_000_001)[1:]
    vals = (1 + np.cos(np.pi * c)) / (c * c - 1)
    i = int(np.argmax(vals))
    res = minimize_scalar(lambda x: -(1 + math.cos(math.pi * x)) / (x * x - 1),
                          bounds=(c[max(i - 1, 0)], c[min(i + 1, c.size - 1)]), method="bounded",
                          options={"xatol": 1e-14})
    return max(float(vals[i]), -float(res.fun))


def sigma_series(lam: float, tol: float = SIGMA_TOL) -> float:
    """Certified lower bound of ``I_n(lam) - 2**(lam+1)/(lam+1)``, uniform in ``n``.

    With ``a_k`` the cosine coefficients of ``(1 - cos x)**lam`` the value
    is ``2 a_0 - 2**(lam+1)/(lam+1) - sum_{a_k > 0} a_k B_k`` where
    ``B_k = 2/(k**2 - 1)`` for ``k >= 2`` and ``B_1`` is the supremum of
    ``(1 + cos(pi c))/(c**2 - 1)`` over ``c >= 1``.  Integer ``lam`` gives 0.

    Raises
    ------
    SlowConvergence
        If the remainder bound is not below ``tol`` within the term budget.
    """
    if not lam > 0:
        raise DescriptorError("lambda must be positive")
    if float(lam).is_integer():
        return 0.0
    head = 2 * mean_value(lam) - closed_form_In(lam)
    count = 4096
    while True:
        a = cosine_coefficients(lam, count)[1:]
        k = np.arange(1, count + 1, dtype=float)
        bk = np.where(k == 1, first_harmonic_bound(), 2.0 / np.maximum(k * k - 1.0, 1.0))
        terms = np.where(a > 0, a * bk, 0.0)
        total = math.fsum(terms.tolist())
        # |a_k| decreases beyond lam + 1, so the remainder is below |a_K| * sum_{k>K} 2/(k^2-1)
        remainder = abs(a[-1]) * 2.0 / count
        value = head - total
        if remainder <= tol * max(abs(value), 1e-300):
            return value - remainder if a[-1] > 0 else value
        if count >= SIGMA_TERM_BUDGET:
            raise SlowConvergence(f"sigma({lam}) remainder {remainder:.3g} above tolerance")
        count *= 4


# ---------------------------------------------------------------------------
# the I_n integrals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finitely many atoms ``(position, weight)`` in ``[0, tau]``."""

    positions: tuple[float, ...]
    weights: tuple[float, ...]
    tau: float = math.pi

    def __post_init__(self) -> None:
        if len(self.positions) != len(self.weights) or not self.positions:
            raise DescriptorError("measure needs matching non-empty positions and weights")
        if any(w <= 0 for w in self.weights):
            raise DescriptorError("atom weights must be positive")
        if any(not 0 <= t <= self.tau for t in self.positions):
            raise DescriptorError("atom positions must lie in [0, tau]")
        if list(self.positions) != sorted(self.positions):
            raise DescriptorError("atom positions must be sorted")
        if not any(t > 0 for t in self.positions):
            raise DescriptorError("measure needs an atom in (0, tau]")

    @property
    def mass(self) -> float:
        return math.fsum(self.weights)


@lru_cache(maxsize=64)
def _jacobi_nodes(count: int, alpha: float, beta: float) -> tuple[np.ndarray, np.ndarray]:
    x, w = special.roots_jacobi(count, alpha, beta)
    return x, w


def _sine_integral(lam: float, c: np.ndarray, nodes: int) -> np.ndarray:
    """``int_0^pi (1 - cos(c t))**lam sin t dt`` for ``c >= 1`` by period folding.

    With ``t = 2 pi (k + u)/c`` the factor ``(1 - cos 2 pi u)**lam`` is the
    same on every period, and the sines of the full-period copies sum in
    closed form.  Full periods use the Jacobi weight ``(u (1 - u))**(2 lam)``.
    The last partial period ``[0, u_end]`` uses the weight ``u**(2 lam)`` when
    ``u_end <= 1/2``; otherwise it is a whole period minus ``[u_end, 1]``,
    which carries the weight ``(1 - u)**(2 lam)``.
    """
    c = np.asarray(c, dtype=float)
    theta = (2 * np.pi / c)[:, None]
    periods = np.floor(c / 2)
    u_end = c / 2 - periods
    p_col = periods[:, None]
    scale = 2.0 ** lam

    x, w = _jacobi_nodes(nodes, 2 * lam, 2 * lam)
    u = (x + 1) / 2
    # (1 - cos 2 pi u)^lam = 2^lam sin(pi u)^(2 lam) = weight * smooth factor
    smooth = scale * np.power(np.sin(np.pi * u) / (u * (1 - u)), 2 * lam)
    jac = 0.5 ** (4 * lam + 1)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(p_col > 0, np.sin(p_col * theta / 2) / np.sin(theta / 2), 0.0)
    full = (np.sin(theta * (u[None, :] + (p_col - 1) / 2)) * ratio * smooth[None, :]) @ w * jac
    last_whole = (np.sin(theta * (p_col + u[None, :])) * smooth[None, :]) @ w * jac

    xp, wp = _jacobi_nodes(nodes, 0.0, 2 * lam)
    v = (xp + 1) / 2
    low = u_end <= 0.5
    # near end: u = u_end v, weight u^(2 lam)
    uu = u_end[:, None] * v[None, :]
    with np.errstate(invalid="ignore", divide="ignore"):
        near = scale * np.power(np.where(uu > 0, np.sin(np.pi * uu) / uu, np.pi), 2 * lam)
    head = (near * np.sin(theta * (p_col + uu))) @ wp * np.power(u_end / 2, 2 * lam + 1)
    # far end: u = 1 - (1 - u_end) v, weight (1 - u)^(2 lam)
    gap = 1 - u_end
    uf = 1 - gap[:, None] * v[None, :]
    one_minus = gap[:, None] * v[None, :]
    with np.errstate(invalid="ignore", divide="ignore"):
        far = scale * np.power(np.where(one_minus > 0, np.sin(np.pi * uf) / one_minus, np.pi), 2 * lam)
    rest = (far * np.sin(theta * (p_col + uf))) @ wp * np.power(gap / 2, 2 * lam + 1)
    part = np.where(low, head, last_whole - rest)
    return (2 * np.pi / c) * (full + part)


def sine_integral(lam: float, c: Sequence[float] | np.ndarray) -> np.ndarray:
    """Folded-period quadrature with an error check between 24 and 48 nodes.

    Raises
    ------
    QuadratureFailure
        If the two rules differ by more than ``1e-10`` anywhere.
    """
    c = np.atleast_1d(np.asarray(c, dtype=float))
    if np.any(c < 1):
        raise DescriptorError("frequency ratio must be at least 1")
    coarse = _sine_integral(lam, c, 24)
    fine = _sine_integral(lam, c, 48)
    err = np.max(np.abs(fine - coarse)) if c.size else 0.0
    if not err <= QUAD_TOL:
        raise QuadratureFailure(f"quadrature error estimate {err:.3g} exceeds {QUAD_TOL:g}")
    return fine


@dataclass(frozen=True)
class InResult:
    value: float
    argmin_nu: int | None
    limit_candidate: float
    details: dict[str, Any] = field(default_factory=dict)


def In_integral(n: int, lam: float, tau: float = math.pi, mu: str | DiscreteMeasure = "sin",
                nu_max: int | None = None) -> InResult:
    """``inf_{nu >= n} int_0^tau (1 - cos(nu t / n))**lam dmu(t)``.

    ``mu="sin"`` (with ``tau = pi``) uses the sine density; the infimum is the
    smaller of the scan minimum over ``nu in [n, 64 n]`` and the limit
    ``a_0 * mass``.  For a :class:`DiscreteMeasure` the atom sums are exact
    but only the scanned ``nu`` range is covered (``details["scan_only"]``).
    """
    if n < 1:
        raise DescriptorError("n must be a positive integer")
    if not lam > 0:
        raise DescriptorError("lambda must be positive")
    top = nu_max or NU_SCAN_FACTOR * n
    nus = np.arange(n, top + 1)
    if isinstance(mu, DiscreteMeasure):
        pos = np.array(mu.positions)
        wts = np.array(mu.weights)
        vals = np.power(1 - np.cos(np.outer(nus / n, pos)), lam) @ wts
        i = int(np.argmin(vals))
        return InResult(float(vals[i]), int(nus[i]), mean_value(lam) * mu.mass,
                        {"scan_only": True, "mass": mu.mass})
    if mu != "sin":
        raise DescriptorError("mu must be 'sin' or a DiscreteMeasure")
    if abs(tau - math.pi) > 1e-15:
        raise DescriptorError("the sine measure is defined on [0, pi]")
    vals = sine_integral(lam, nus / n)
    # ties (integer lam) resolve to the smallest nu
    i = int(np.argmax(vals <= vals.min() + 1e-12))
    limit = 2.0 * mean_value(lam)
    if limit < vals[i]:
        return InResult(limit, None, limit, {"scan_min": float(vals[i])})
    return InResult(float(vals[i]), int(nus[i]), limit, {"scan_min": float(vals[i])})


@lru_cache(maxsize=4096)
def _In_cached(n: int, lam: float) -> float:
    return In_integral(n, lam).value


# ---------------------------------------------------------------------------
# Jackson inequality checks
# ---------------------------------------------------------------------------


def in_Y(index: Any) -> bool:
    """Whether all coordinates share a sign (non-negative or non-positive)."""
    if isinstance(index, int):
        return True
    return all(x >= 0 for x in index) or all(x <= 0 for x in index)


@dataclass(frozen=True)
class JacksonReport:
    """Quantities and verdicts of the Jackson-type inequalities (p-th powers)."""

    best_approximation_p: float
    modulus_at_pi_over_n: float
    integral_bound: float
    integral_error_bar: float
    In: float
    sigma: float
    checks: dict[str, bool]
    data: dict[str, float]

    @property
    def all_hold(self) -> bool:
        return all(self.checks.values())


def modulus_integral(f: SpElement, alpha: float, p: float, n: int, points: int = 8192) -> tuple[float, float]:
    """``int_0^pi omega(f, t/n)**p sin t dt`` and a bracket half-width.

    The modulus is the running maximum of the multiplier sum on a fixed
    grid; the integral of that non-decreasing function is bracketed by
    the left and right step rules and estimated by their mean.
    """
    t_max = math.pi / n
    grid, vals = diagonal_profile(f, alpha, p, t_max)
    # densify to at least `points` nodes for the bracket
    if grid.size < points:
        fine = np.linspace(0.0, t_max, points)
        freqs, weights = _diagonal_weights(f, p)
        if freqs.size:
            grid = np.unique(np.concatenate([grid, fine]))
            vals = _diag_objective(freqs, weights, alpha * p, grid)
    envelope = np.maximum.accumulate(vals)
    dcos = np.cos(n * grid[:-1]) - np.cos(n * grid[1:])
    lower = float(np.sum(envelope[:-1] * dcos))
    upper = float(np.sum(envelope[1:] * dcos))
    return 0.5 * (lower + upper), 0.5 * (upper - lower)


def jackson_checks(f: SpElement, alpha: float, p: float, n: int) -> JacksonReport:
    """Evaluate the Jackson-type inequalities for ``f`` supported in ``Y``.

    Checks (all on p-th powers, ``lam = alpha p / 2``):

    * ``integral``: ``E^p <= int_0^pi omega(t/n)^p sin t dt / (2**lam I_n)``;
    * ``uniform``: ``E^p <= omega(pi/n)^p / (2**(lam-1) I_n)``;
    * ``integer``: for integer ``lam``, ``E^p <= (lam+1)/2**(2 lam) omega(pi/n)^p``;
    * ``strict``: ``E < 4/(3 * 2**(alpha/2)) omega(pi/n)``;
    * ``sigma``: ``I_n >= 2**(lam+1)/(lam+1) + sigma(lam)``.

    Raises
    ------
    SupportViolation
        If a coefficient lies outside ``Y``.
    """
    if any(not in_Y(k) for k in f.support):
        raise SupportViolation("coefficients outside the sign-coherent set Y")
    if n < 1:
        raise DescriptorError("n must be a positive integer")
    if not 1 <= p < math.inf:
        raise DescriptorError("Jackson checks need 1 <= p < inf")
    nonconst = [k for k in f.support if (k if isinstance(k, int) else any(k))]
    if not nonconst:
        raise DescriptorError("f is constant")
    lam = alpha * p / 2
    e_p = triangular_error(f, n, p) ** p
    omega = smoothness_modulus(f, ModulusQuery(alpha, math.pi / n, p))
    omega_p = omega ** p
    In = _In_cached(n, lam)
    sig = sigma_series(lam)
    integral, bar = modulus_integral(f, alpha, p, n)
    integral_rhs = integral / (2 ** lam * In)
    uniform_rhs = omega_p / (2 ** (lam - 1) * In)
    rel = 1e-9
    checks = {
        "integral": e_p <= integral_rhs * (1 + rel) + (bar / (2 ** lam * In)),
        "uniform": e_p <= uniform_rhs * (1 + rel),
        "strict": e_p ** (1 / p) < 4 / (3 * 2 ** (alpha / 2)) * omega,
        "sigma": In >= closed_form_In(lam) + sig - 1e-9,
    }
    data = {"integral_rhs": integral_rhs, "uniform_rhs": uniform_rhs,
            "sigma_bound_constant": (lam + 1) / (2 ** (2 * lam) + 2 ** (lam - 1) * (lam + 1) * sig)}
    if float(lam).is_integer():
        int_rhs = (lam + 1) / 2 ** (2 * lam) * omega_p
        checks["integer"] = e_p <= int_rhs * (1 + rel)
        data["integer_rhs"] = int_rhs
    return JacksonReport(e_p, omega, integral, bar, In, sig, checks, data)


# ---------------------------------------------------------------------------
# upper bounds for the sharp constant
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BumpMeasure:
    """Density ``sum_i w_i sin(pi (t - a_i)/(b_i - a_i))`` on ``[a_i, b_i]``."""

    left: tuple[float, ...]
    right: tuple[float, ...]
    weights: tuple[float, ...]

    @property
    def mass(self) -> float:
        return math.fsum(w * 2 * (b - a) / math.pi for a, b, w in zip(self.left, self.right, self.weights))


def bump_moment(omega: np.ndarray, a: float, length: float) -> np.ndarray:
    """``int_a^{a+L} cos(omega t) sin(pi (t - a)/L) dt``, stable near ``omega = pi/L``."""
    beta = math.pi / length
    eps = omega - beta
    return -beta * length * np.sin(omega * a + eps * length / 2) * np.sinc(eps * length / (2 * math.pi)) / (2 * beta + eps)


def _bump_rows(lam: float, cs: np.ndarray, a: float, length: float, c_tail: float,
               terms: int) -> tuple[np.ndarray, float]:
    """Certified lower values of the bump integral at ``cs`` and for all ``c >= c_tail``."""
    coef = cosine_coefficients(lam, terms)
    a0, ak = coef[0], coef[1:]
    k = np.arange(1, terms + 1, dtype=float)
    if float(lam).is_integer():
        keep = k <= lam
        ak, k = ak[keep], k[keep]
        tail_coeff = 0.0
    else:
        # |a_j| is decreasing past lam + 1: sum_{j>K} |a_j| / j^2 <= |a_{K+1}| / K
        tail_coeff = abs(cosine_coefficients(lam, terms + 1)[-1]) / terms
    beta = math.pi / length
    mass = 2 * length / math.pi
    moments = bump_moment(np.outer(cs, k), a, length)
    vals = a0 * mass + moments @ ak
    # remainder beyond the truncation: |moment(omega)| <= 2 beta / (omega^2 - beta^2)
    min_c = float(np.min(cs)) if cs.size else c_tail
    kk = max(terms, 1)
    if tail_coeff:
        denom = (kk * min_c) ** 2 - beta ** 2
        vals = vals - (2 * beta * kk ** 2 / denom * tail_coeff if denom > 0 else math.inf)
    # every c >= c_tail: bound each harmonic by the sign range of its moment
    om = k * c_tail
    mag = 2 * beta / (om ** 2 - beta ** 2)
    if np.any(om <= beta):
        return vals, -math.inf
    if a == 0.0:
        # cos(0) + cos(omega b) is in [0, 2], so the moment lies in [-mag, 0]
        low = np.where(ak > 0, -ak * mag, 0.0)
    else:
        low = -np.abs(ak) * mag
    tail_val = a0 * mass + float(np.sum(low))
    if tail_coeff:
        tail_val -= 2 * beta * kk ** 2 / ((kk * c_tail) ** 2 - beta ** 2) * tail_coeff
    return vals, tail_val


@dataclass(frozen=True)
class CnapResult:
    """Certified upper bound on the p-th power of the sharp Jackson constant."""

    bound: float
    measure: BumpMeasure
    lower_In: float
    atoms_used: int
    details: dict[str, Any] = field(default_factory=dict)


def _solve_lp(rows: np.ndarray, masses: np.ndarray, cols: list[int]) -> tuple[float, np.ndarray]:
    sub = rows[:, cols]
    m = len(cols)
    c = np.zeros(m + 1)
    c[-1] = -1.0
    a_ub = np.hstack([-sub, np.ones((sub.shape[0], 1))])
    b_ub = np.zeros(sub.shape[0])
    a_eq = np.concatenate([masses[cols], [0.0]])[None, :]
    bounds = [(0, None)] * m + [(None, None)]
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=[1.0], bounds=bounds, method="highs")
    if res.status != 0:
        return -math.inf, np.zeros(m)
    w = np.maximum(res.x[:m], 0.0)
    w = w / float(masses[cols] @ w)
    # re-evaluate the certified minimum with the cleaned weights
    return float(np.min(sub @ w)), w


def cnap_upper_bound(n: int, alpha: float, p: float, tau: float = math.pi, atom_budget: int = 4,
                     grid: int = 8, terms: int = 2000) -> CnapResult:
    """Upper bound on ``C^p = inf_mu mass(mu) / (2**lam I_n(tau, mu))`` over sine-bump measures.

    The dictionary holds bumps on ``[tau i/grid, tau j/grid]``.  Row values are
    certified lower bounds of each bump's integral at every scanned ``nu`` and
    for all ``nu`` beyond the scan, so the linear programme's optimum is a
    certified lower bound on ``I_n`` for the chosen measure.  At most
    ``atom_budget`` bumps are used, chosen greedily with exchange passes; a
    larger budget never gives a larger bound.
    """
    if not tau > 0:
        raise DescriptorError("tau must be positive")
    if atom_budget < 2:
        raise DescriptorError("atom_budget must be at least 2")
    if n < 1:
        raise DescriptorError("n must be a positive integer")
    lam = alpha * p / 2
    edges = [tau * j / grid for j in range(grid + 1)]
    bumps = [(edges[i], edges[j]) for i in range(grid) for j in range(i + 1, grid + 1)]
    beta_max = math.pi * grid / tau
    nu_top = n * max(NU_SCAN_FACTOR, math.ceil(2 * beta_max) + 1)
    cs = np.arange(n, nu_top + 1) / n
    c_tail = (nu_top + 1) / n
    cols_rows = []
    masses = []
    for a, b in bumps:
        vals, tail = _bump_rows(lam, cs, a, b - a, c_tail, terms)
        cols_rows.append(np.concatenate([vals, [tail]]))
        masses.append(2 * (b - a) / math.pi)
    rows = np.array(cols_rows).T
    masses = np.array(masses)

    # greedy growth with exchange passes; each budget starts from the previous set
    single = [float(np.min(rows[:, j]) / masses[j]) for j in range(len(bumps))]
    chosen = [int(np.argmax(single))]
    best, weights = _solve_lp(rows, masses, chosen)
    history = [best]
    for _size in range(2, atom_budget + 1):
        cand = [(j, _solve_lp(rows, masses, chosen + [j])) for j in range(len(bumps)) if j not in chosen]
        if not cand:
            break
        j, (val, w) = max(cand, key=lambda item: item[1][0])
        if val > best:
            chosen, best, weights = chosen + [j], val, w
        improved = True
        while improved:
            improved = False
            for pos in range(len(chosen)):
                for j in range(len(bumps)):
                    if j in chosen:
                        continue
                    trial = chosen[:pos] + [j] + chosen[pos + 1:]
                    val, w = _solve_lp(rows, masses, trial)
                    if val > best * (1 + 1e-12):
                        chosen, best, weights, improved = trial, val, w, True
        history.append(best)
    measure = BumpMeasure(tuple(bumps[j][0] for j in chosen), tuple(bumps[j][1] for j in chosen),
                          tuple(float(x) for x in weights))
    bound = 1.0 / (2 ** lam * best) if best > 0 else math.inf
    return CnapResult(bound, measure, best, int(np.count_nonzero(weights)),
                      {"history": history, "nu_scan": [n, nu_top]})
