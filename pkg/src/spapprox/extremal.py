"""Best approximations, widths and n-term approximations of q-ellipsoids.

The ellipsoid is the image of the unit ball of the q-space under the
diagonal multiplier ``psi``; all characteristics are measured in the
p-space.  Everything reduces to the decreasing rearrangement of ``|psi|``:

* best approximation outside a set ``gamma``: the largest remaining modulus
  when ``q <= p``, an ``l_a`` tail norm with ``a = pq/(q - p)`` otherwise;
* basis and projection widths: the same quantities for the ``n`` largest
  moduli;
* best n-term approximation: a supremum over a cut-off ``s``, found by a
  certified scan (``q <= p``) or the first index satisfying a sandwich
  condition (``p < q``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Iterable, Iterator

import numpy as np

from .errors import (
    BudgetExceeded,
    DescriptorError,
    NoFiniteSup,
    NonMonotoneSystem,
    UnsupportedFamily,
)
from .psi_system import CharSequences, Index, IndexSet, PsiSystem, char_sequences

#: window after the sandwich index over which uniqueness is re-checked
UNIQUENESS_WINDOW = 64


@dataclass(frozen=True)
class ExtremalResult:
    """A characteristic value with its witness and the formula branch used."""

    value: float
    formula: str
    witness: Any = None
    details: dict[str, Any] = field(default_factory=dict)


def _check_exponents(p: float, q: float) -> None:
    if not (p > 0 and q > 0 and math.isfinite(p) and math.isfinite(q)):
        raise DescriptorError("exponents p and q must be positive and finite")


def tail_exponent(p: float, q: float) -> float:
    """``pq/(q - p)`` for ``p < q``."""
    return p * q / (q - p)


def _float(x: float | Fraction) -> float:
    return float(x)


def rearranged_moduli(psi: PsiSystem) -> Iterator[float]:
    """Lazily yield the decreasing rearrangement of ``|psi|`` as floats.

    Finite systems stop after their support.
    """
    for lvl in psi.levels():
        value = _float(lvl.modulus)
        for _ in range(len(lvl.indices)):
            yield value


# ---------------------------------------------------------------------------
# best approximation outside a fixed set, and widths
# ---------------------------------------------------------------------------


def _gamma_members(gamma: IndexSet | Iterable[Index]) -> frozenset:
    if isinstance(gamma, IndexSet):
        return frozenset(gamma.members())
    return frozenset(gamma)


def ellipsoid_gamma_error(psi: PsiSystem, gamma: IndexSet | Iterable[Index], p: float,
                          q: float) -> ExtremalResult:
    """Best approximation of the ellipsoid by polynomials with spectrum in ``gamma``.

    For ``q <= p`` the value is the largest ``|psi_k|`` with ``k`` outside
    ``gamma``; for ``p < q`` it is ``(sum_{k not in gamma} |psi_k|**a)**(1/a)``
    with ``a = pq/(q - p)``.  Both the best-approximation and the Fourier-sum
    errors take this value.

    Raises
    ------
    DivergentTail
        If ``p < q`` and the tail sum cannot be certified finite.
    """
    _check_exponents(p, q)
    members = _gamma_members(gamma)
    if q <= p:
        position = 0
        for lvl in psi.levels():
            for k in lvl.indices:
                position += 1
                if k not in members:
                    return ExtremalResult(_float(lvl.modulus), "largest-outside",
                                          witness=k, details={"position": position})
        return ExtremalResult(0.0, "largest-outside", witness=None)
    a = tail_exponent(p, q)
    # walk the enumeration until every member of gamma has been passed
    waiting = {k for k in members if psi.modulus(k) != 0}
    outside: list[float] = []
    count = 0
    if waiting:
        for lvl in psi.levels():
            m = _float(lvl.modulus)
            for k in lvl.indices:
                count += 1
                if k in waiting:
                    waiting.discard(k)
                else:
                    outside.append(m ** a)
            if not waiting:
                break
        if waiting:
            raise BudgetExceeded("gamma is not covered by the enumerated support")
    total = math.fsum([*outside, psi.power_tail(count, a)])
    return ExtremalResult(total ** (1.0 / a), "tail-norm", witness=None,
                          details={"exponent": a, "prefix": count})


def widths(psi: PsiSystem, n: int, p: float, q: float) -> ExtremalResult:
    """Basis and projection widths; the witness is the set of the ``n`` largest moduli."""
    _check_exponents(p, q)
    if n < 0:
        raise DescriptorError("n must be non-negative")
    gamma, mods = psi.prefix(n + 1)
    witness = frozenset(gamma[:n])
    if q <= p:
        value = _float(mods[n]) if len(mods) > n else 0.0
        return ExtremalResult(value, "rearranged-term", witness=witness)
    a = tail_exponent(p, q)
    value = psi.power_tail(min(n, len(gamma)), a) ** (1.0 / a)
    return ExtremalResult(value, "tail-norm", witness=witness, details={"exponent": a})


@dataclass(frozen=True)
class WidthStep:
    """Kolmogorov widths equal ``value`` for every ``m`` in ``[m_low, m_high]``."""

    level: int
    m_low: int
    m_high: int
    value: float
    best_approximation: float
    region_value: float | None = None


def kolmogorov_width_table(psi: PsiSystem, p: float, levels: int,
                           q: float | None = None) -> list[WidthStep]:
    """Step table of Kolmogorov widths of the unit ellipsoid.

    Level ``n`` contributes the constant ``epsilon_n`` on
    ``[delta_{n-1}, delta_n - 1]``.  When ``q > p`` is given, each row also
    carries the tail norm starting at ``delta_{n-1} + 1``.
    """
    if not p >= 1:
        raise DescriptorError("Kolmogorov widths need p >= 1")
    seq = char_sequences(psi, levels)
    rows = []
    for n in range(1, seq.levels + 1):
        eps = _float(seq.epsilon[n - 1])
        region_value = None
        if q is not None and p < q:
            a = tail_exponent(p, q)
            region_value = psi.power_tail(seq.delta[n - 1], a) ** (1.0 / a)
        rows.append(WidthStep(n, seq.delta[n - 1], seq.delta[n] - 1, eps, eps, region_value))
    return rows


# ---------------------------------------------------------------------------
# n-term approximation
# ---------------------------------------------------------------------------


def _scan_le(moduli: Iterator[float], n: int, p: float, q: float) -> tuple[float, int | None, int]:
    """Certified maximisation of ``(s-n) * (sum_{k<=s} m_k**-q)**(-p/q)`` over ``s > n``.

    Works with ``T_s = S_s * m_s**q``, updated as ``T_s = T_{s-1} (m_s/m_{s-1})**q + 1``.
    For every checkpoint ``n <= c <= s`` and every ``s' > s``,
    ``F(s') <= (s'-n) (s'-c)**(-p/q) m_c**p``, and the right side decreases in
    ``s'``; the scan stops once that bound at ``s' = s + 1`` is no larger than
    the incumbent.

    Returns ``(value**p, s_star, scanned)``; ``s_star`` is ``None`` when
    fewer than ``n + 1`` moduli are positive.
    """
    ratio_pq = p / q
    logs: list[float] = []
    t_prev = 0.0
    best = -math.inf
    best_s = None
    s = 0
    for m in moduli:
        if m <= 0.0:
            break
        s += 1
        lm = math.log(m)
        t_prev = 1.0 if s == 1 else t_prev * math.exp(q * (lm - logs[-1])) + 1.0
        logs.append(lm)
        if s <= n:
            continue
        log_f = math.log(s - n) + p * lm - ratio_pq * math.log(t_prev)
        if log_f > best:
            best, best_s = log_f, s
        bound = math.inf
        for c in {s, n + (s - n) // 2, n + (s - n) // 4, n + (s - n) // 8}:
            if c < max(n, 1):
                continue
            cand = math.log(s + 1 - n) - ratio_pq * math.log(s + 1 - c) + p * logs[c - 1]
            bound = min(bound, cand)
        if bound <= best:
            return math.exp(best), best_s, s
    # exhausted: finite support, later F vanish
    if best_s is None:
        return 0.0, None, s
    return math.exp(best), best_s, s


def _sandwich(moduli: Iterator[float], n: int, p: float, q: float,
              tail_power: Callable[[int], float]) -> tuple[float, int | None, dict[str, Any]]:
    """First ``s > n`` with ``m_s**-q <= S_s/(s-n) < m_{s+1}**-q``; value of the closed form."""
    a = tail_exponent(p, q)
    logs: list[float] = []
    t_vals: list[float] = []
    s_star = None
    s = 0
    it = iter(moduli)
    nxt = next(it, 0.0)
    while True:
        m = nxt
        if m <= 0.0:
            break
        s += 1
        lm = math.log(m)
        t = 1.0 if s == 1 else t_vals[-1] * math.exp(q * (lm - logs[-1])) + 1.0
        logs.append(lm)
        t_vals.append(t)
        nxt = next(it, 0.0)
        if s <= n:
            continue
        left = t >= (s - n) * (1 - 1e-13)
        right = nxt <= 0.0 or t * math.exp(q * (math.log(nxt) - lm)) < (s - n)
        if left and right and s_star is None:
            s_star = s
            window_end = s + UNIQUENESS_WINDOW
        if s_star is not None and (s >= window_end or nxt <= 0.0):
            break
        if s_star is not None and s > s_star and left and right:
            raise NoFiniteSup(f"sandwich condition holds at both s={s_star} and s={s}")
    if s_star is None:
        return 0.0, None, {}
    t_star = t_vals[s_star - 1]
    # (s-n)^{q/(q-p)} S^{-p/(q-p)} with S = T m_s^{-q}
    head = math.exp(q / (q - p) * math.log(s_star - n) - p / (q - p) * math.log(t_star)
                    + a * logs[s_star - 1])
    tail = tail_power(s_star)
    value = math.fsum([head, tail]) ** (1.0 / a)
    return value, s_star, {"head": head, "tail": tail, "exponent": a}


def nterm_unit(n: int, p: float, q: float) -> ExtremalResult:
    """n-term approximation for the system identically equal to one (``q <= p``).

    ``value**p = sup_{s > n} (s - n) / s**(p/q)``.  For ``p == q`` the
    supremum equals one and is not attained.  For ``q < p`` the scan stops at
    the first decrease (the sequence is unimodal); the witness is compared
    with the exact ``floor(n / (1 - q/p))``.
    """
    _check_exponents(p, q)
    if q > p:
        raise UnsupportedFamily("the unit system is not bounded for p < q")
    if n < 1:
        raise DescriptorError("n must be a positive integer")
    if p == q:
        return ExtremalResult(1.0, "unit-equal", witness=None, details={"attained": False})
    beta = p / q
    best_s, best = n + 1, -math.inf
    start = n + 1
    chunk = 256
    while True:
        s = np.arange(start, start + chunk, dtype=float)
        vals = np.log(s - n) - beta * np.log(s)
        drops = np.nonzero(np.diff(np.concatenate([[best], vals])) < 0)[0]
        if drops.size:
            j = int(drops[0])
            if j > 0:
                best, best_s = float(vals[j - 1]), start + j - 1
            break
        best, best_s = float(vals[-1]), start + chunk - 1
        start += chunk
        chunk *= 2
    pf, qf = Fraction(p).limit_denominator(10**9), Fraction(q).limit_denominator(10**9)
    floor_point = math.floor(Fraction(n) * pf / (pf - qf))
    return ExtremalResult(math.exp(best / p), "unit-scan", witness=best_s,
                          details={"floor_point": floor_point})


def nterm(psi: PsiSystem | str, n: int, p: float, q: float) -> ExtremalResult:
    """Best n-term approximation of the ellipsoid.

    ``psi == "unit"`` selects the system identically equal to one.

    Raises
    ------
    DivergentTail
        For ``p < q`` when the ``l_a`` tail is not certified finite.
    NoFiniteSup
        When the certified scan does not close within the enumeration budget.
    """
    _check_exponents(p, q)
    if isinstance(psi, str):
        if psi != "unit":
            raise DescriptorError(f"unknown named system {psi!r}")
        return nterm_unit(n, p, q)
    if n < 0:
        raise DescriptorError("n must be non-negative")
    if q <= p:
        try:
            value_p, s_star, scanned = _scan_le(rearranged_moduli(psi), n, p, q)
        except BudgetExceeded as exc:
            raise NoFiniteSup(f"certified bound did not close within budget: {exc}") from None
        value = value_p ** (1.0 / p)
        witness_vec = None
        if s_star is not None and s_star <= 4096:
            witness_vec = extremal_coefficients(psi, s_star, q)
        return ExtremalResult(value, "certified-scan", witness=s_star,
                              details={"scanned": scanned, "coefficients": witness_vec})
    a = tail_exponent(p, q)
    psi.power_tail(0, a)  # certify the tail condition up front
    try:
        value, s_star, info = _sandwich(rearranged_moduli(psi), n, p, q,
                                        lambda s: psi.power_tail(s, a))
    except BudgetExceeded as exc:
        raise NoFiniteSup(f"sandwich index not reached within budget: {exc}") from None
    return ExtremalResult(value, "sandwich", witness=s_star, details=info)


def extremal_coefficients(psi: PsiSystem, s: int, q: float) -> list[float]:
    """Unit-q-norm coefficients making ``|psi_k c_k|`` constant on the top ``s`` indices."""
    _, mods = psi.prefix(s)
    inv = [float(m) ** -q for m in mods]
    total = math.fsum(inv)
    return [(v / total) ** (1.0 / q) for v in inv]


def nterm_functional(moduli: Iterable[float], coefficients: Iterable[float], n: int, p: float) -> float:
    """``l_p`` norm of ``|psi_k c_k|`` after dropping its ``n`` largest entries."""
    prod = sorted((abs(m * c) for m, c in zip(moduli, coefficients)), reverse=True)
    return math.fsum(v ** p for v in prod[n:]) ** (1.0 / p)


def nterm_at(psi: PsiSystem, n: int, p: float, q: float, s: int) -> float:
    """Raw objective of the n-term formula evaluated at the cut-off ``s``."""
    _, mods = psi.prefix(s)
    inv = math.fsum(float(m) ** -q for m in mods)
    if q <= p:
        return ((s - n) * inv ** (-p / q)) ** (1.0 / p)
    a = tail_exponent(p, q)
    head = (s - n) ** (q / (q - p)) * inv ** (-p / (q - p))
    return math.fsum([head, psi.power_tail(s, a)]) ** (1.0 / a)


# ---------------------------------------------------------------------------
# constrained n-term approximation
# ---------------------------------------------------------------------------


def _monotone_moduli(psi: PsiSystem, limit: int | None = None) -> Iterator[float]:
    """Moduli in natural order, failing if they are not non-increasing."""
    if psi.dimension is not None:
        raise NonMonotoneSystem("constrained approximation needs a system over the naturals")
    expected = 1
    for lvl in psi.levels():
        for k in lvl.indices:
            if k != expected:
                raise NonMonotoneSystem(f"|psi_k| is not non-increasing near k={expected}")
            expected += 1
            yield _float(lvl.modulus)


def _block_moduli(psi: PsiSystem, n: int, stride_only: bool, a: float | None = None) -> Iterator[float]:
    buf: list[float] = []
    for m in _monotone_moduli(psi):
        buf.append(m)
        if len(buf) == n:
            if stride_only:
                yield buf[0]
            else:
                yield math.fsum(v ** a for v in buf) ** (1.0 / a)
            buf = []
    if buf:
        yield buf[0] if stride_only else math.fsum(v ** a for v in buf) ** (1.0 / a)


def constrained_nterm(psi: PsiSystem, n: int, p: float, q: float, family: str = "G1",
                      strict: bool = False) -> ExtremalResult:
    """n-term approximation restricted to consecutive blocks of length ``n``.

    ``family`` is ``"G1"`` (aligned blocks) or ``"G2"`` (any window).  For
    ``q <= p`` both families share the value
    ``max_{s>1} (s-1)**(1/p) (sum_{k<=s} |psi_{(k-1)n+1}|**-q)**(-1/q)``.
    For ``p < q`` the aligned value uses block norms; for windows it is only
    an upper bound, flagged in ``details`` (or an error with ``strict``).

    Raises
    ------
    NonMonotoneSystem, UnsupportedFamily, DivergentTail
    """
    _check_exponents(p, q)
    if family not in ("G1", "G2"):
        raise DescriptorError("family must be 'G1' or 'G2'")
    if n < 1:
        raise DescriptorError("n must be a positive integer")
    if q <= p:
        value_p, s_star, scanned = _scan_le(_block_moduli(psi, n, True), 1, p, q)
        return ExtremalResult(value_p ** (1.0 / p), "blocks-scan", witness=s_star,
                              details={"scanned": scanned, "family": family})
    if family == "G2" and strict:
        raise UnsupportedFamily("window-constrained value for p < q is only bounded above")
    a = tail_exponent(p, q)
    psi.power_tail(0, a)
    value, s_star, info = _sandwich(_block_moduli(psi, n, False, a), 1, p, q,
                                    lambda s: psi.power_tail(s * n, a))
    info = dict(info, family=family, upper_bound=(family == "G2"))
    return ExtremalResult(value, "blocks-sandwich", witness=s_star, details=info)
