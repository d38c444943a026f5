"""Scalar decay rules t -> psi(t) used to generate systems and classes.

Each rule is positive and non-increasing on t >= 1 and exposes its value,
its right derivative and certified power sums of its integer samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy import special

from .errors import DescriptorError, DivergentTail

#: relative tolerance for tail sums of rule samples
TAIL_RTOL = 1e-12
#: number of samples summed directly before a tail sum gives up
TAIL_TERM_BUDGET = 10_000_000


def _positive(name: str, value: float) -> float:
    value = float(value)
    if not value > 0 or not math.isfinite(value):
        raise DescriptorError(f"rule parameter {name!r} must be positive, got {value}")
    return value


class DecayRule:
    """Base class for positive non-increasing rules on ``t >= 1``."""

    family: str = "rule"

    def __call__(self, t: Any) -> Any:
        return self.value(t)

    def value(self, t: Any) -> Any:
        raise NotImplementedError

    def derivative(self, t: Any) -> Any:
        """Right derivative psi'(t+)."""
        raise NotImplementedError

    def params(self) -> dict[str, float]:
        raise NotImplementedError

    def describe(self) -> dict[str, Any]:
        return {"family": self.family, **self.params()}

    def integral_tail(self, x: float, a: float) -> float:
        """Integral of psi(t)**a over [x, inf); ``inf`` when divergent."""
        raise NotImplementedError

    def tail_sum(self, start: int, a: float, rtol: float = TAIL_RTOL) -> float:
        """Sum of ``psi(k)**a`` over integers ``k >= start``.

        The generic route sums samples directly until the next sample is
        negligible, then closes the remainder with the midpoint of the
        monotone integral bracket ``[I(K), psi(K)**a + I(K)]``.

        Raises
        ------
        DivergentTail
            If the series diverges or no bound is reached within budget.
        """
        start = max(int(start), 1)
        a = float(a)
        if not math.isfinite(self.integral_tail(float(start), a)):
            raise DivergentTail(f"{self.family} rule: sum of psi(k)^{a:g} diverges")
        total = 0.0
        chunk = 4096
        k0 = start
        while k0 - start < TAIL_TERM_BUDGET:
            ks = np.arange(k0, k0 + chunk, dtype=float)
            vals = np.asarray(self.value(ks), dtype=float) ** a
            csum = total + np.cumsum(vals)
            # first position K whose sample is negligible against the running sum
            small = np.nonzero(vals <= 2.0 * rtol * np.maximum(csum, np.finfo(float).tiny))[0]
            if small.size:
                j = int(small[0])
                head = math.fsum([total, *vals[:j].tolist()])
                big_k = k0 + j
                fk = float(vals[j])
                return head + self.integral_tail(float(big_k), a) + 0.5 * fk
            total = math.fsum([total, *vals.tolist()])
            k0 += chunk
            chunk = min(chunk * 2, 1 << 20)
        raise DivergentTail(f"{self.family} rule: tail of psi^{a:g} not bounded within budget")


@dataclass(frozen=True)
class PowerRule(DecayRule):
    """``t**(-r)``."""

    r: float
    family = "power"

    def __post_init__(self) -> None:
        _positive("r", self.r)

    def value(self, t: Any) -> Any:
        return np.power(t, -self.r) if isinstance(t, np.ndarray) else float(t) ** -self.r

    def derivative(self, t: Any) -> Any:
        return -self.r * np.power(t, -self.r - 1.0)

    def params(self) -> dict[str, float]:
        return {"r": self.r}

    def integral_tail(self, x: float, a: float) -> float:
        e = self.r * a
        return math.inf if e <= 1 else x ** (1 - e) / (e - 1)

    def tail_sum(self, start: int, a: float, rtol: float = TAIL_RTOL) -> float:
        e = self.r * a
        if e <= 1:
            raise DivergentTail(f"power rule: sum of k^-{e:g} diverges")
        return float(special.zeta(e, max(int(start), 1)))


@dataclass(frozen=True)
class GeometricRule(DecayRule):
    """``ratio**t`` with ``0 < ratio < 1``; exact at integers for dyadic ratios."""

    ratio: float
    family = "geometric"

    def __post_init__(self) -> None:
        if not 0 < self.ratio < 1:
            raise DescriptorError("geometric ratio must lie in (0, 1)")

    def value(self, t: Any) -> Any:
        return np.power(self.ratio, t) if isinstance(t, np.ndarray) else self.ratio ** float(t)

    def derivative(self, t: Any) -> Any:
        return math.log(self.ratio) * np.power(self.ratio, t)

    def params(self) -> dict[str, float]:
        return {"ratio": self.ratio}

    def integral_tail(self, x: float, a: float) -> float:
        c = -a * math.log(self.ratio)
        return math.exp(-c * x) / c

    def tail_sum(self, start: int, a: float, rtol: float = TAIL_RTOL) -> float:
        q = self.ratio ** a
        return q ** max(int(start), 1) / (1.0 - q)


@dataclass(frozen=True)
class ExpRule(DecayRule):
    """``exp(-lam * (t + a)**s)``."""

    lam: float
    s: float = 1.0
    a: float = 0.0
    family = "exp"

    def __post_init__(self) -> None:
        _positive("lam", self.lam)
        _positive("s", self.s)
        if self.a < 0:
            raise DescriptorError("exp shift a must be non-negative")

    def value(self, t: Any) -> Any:
        return np.exp(-self.lam * np.power(np.asarray(t, dtype=float) + self.a, self.s)) \
            if isinstance(t, np.ndarray) else math.exp(-self.lam * (float(t) + self.a) ** self.s)

    def derivative(self, t: Any) -> Any:
        u = np.asarray(t, dtype=float) + self.a
        return -self.lam * self.s * np.power(u, self.s - 1) * np.exp(-self.lam * np.power(u, self.s))

    def params(self) -> dict[str, float]:
        return {"lam": self.lam, "s": self.s, "a": self.a}

    def integral_tail(self, x: float, a: float) -> float:
        c = a * self.lam
        z = c * (x + self.a) ** self.s
        inv = 1.0 / self.s
        return inv * c ** (-inv) * special.gamma(inv) * special.gammaincc(inv, z)


@dataclass(frozen=True)
class LogRule(DecayRule):
    """``log(t + a)**(-r)``; never power-summable."""

    r: float
    a: float = math.e
    family = "log"

    def __post_init__(self) -> None:
        _positive("r", self.r)
        if math.log(1 + self.a) <= 0:
            raise DescriptorError("log rule needs log(1 + a) > 0")

    def value(self, t: Any) -> Any:
        return np.power(np.log(np.asarray(t, dtype=float) + self.a), -self.r) \
            if isinstance(t, np.ndarray) else math.log(float(t) + self.a) ** -self.r

    def derivative(self, t: Any) -> Any:
        u = np.asarray(t, dtype=float) + self.a
        return -self.r * np.power(np.log(u), -self.r - 1) / u

    def params(self) -> dict[str, float]:
        return {"r": self.r, "a": self.a}

    def integral_tail(self, x: float, a: float) -> float:
        return math.inf


@dataclass(frozen=True)
class PowerLogRule(DecayRule):
    """``t**(-r) * log(t + a)**eps``."""

    r: float
    eps: float
    a: float = math.e
    family = "powerlog"

    def __post_init__(self) -> None:
        _positive("r", self.r)
        if math.log(1 + self.a) <= 0:
            raise DescriptorError("powerlog rule needs log(1 + a) > 0")

    def value(self, t: Any) -> Any:
        u = np.asarray(t, dtype=float)
        out = np.power(u, -self.r) * np.power(np.log(u + self.a), self.eps)
        return out if isinstance(t, np.ndarray) else float(out)

    def derivative(self, t: Any) -> Any:
        u = np.asarray(t, dtype=float)
        lg = np.log(u + self.a)
        return self.value(u) * (-self.r / u + self.eps / ((u + self.a) * lg))

    def params(self) -> dict[str, float]:
        return {"r": self.r, "eps": self.eps, "a": self.a}

    def integral_tail(self, x: float, a: float) -> float:
        e = self.r * a
        if e < 1 or (e == 1 and self.eps * a >= -1):
            return math.inf
        from scipy.integrate import quad

        val, _ = quad(lambda t: self.value(t) ** a, x, math.inf, limit=200)
        return float(val)


_FAMILIES = {
    "power": PowerRule,
    "geometric": GeometricRule,
    "exp": ExpRule,
    "log": LogRule,
    "powerlog": PowerLogRule,
}


def make_rule(spec: dict[str, Any] | DecayRule) -> DecayRule:
    """Build a rule from ``{"family": name, **params}``."""
    if isinstance(spec, DecayRule):
        return spec
    if not isinstance(spec, dict) or "family" not in spec:
        raise DescriptorError("rule must be a mapping with a 'family' key")
    params = dict(spec)
    family = params.pop("family")
    cls = _FAMILIES.get(family)
    if cls is None:
        raise DescriptorError(f"unknown rule family {family!r}; known: {sorted(_FAMILIES)}")
    try:
        return cls(**{k: float(v) for k, v in params.items()})
    except TypeError as exc:
        raise DescriptorError(f"bad parameters for {family} rule: {exc}") from None


def check_non_increasing(rule: DecayRule, upto: float = 1e6) -> None:
    """Verify the rule is non-increasing on a sample grid of ``[1, upto]``."""
    grid = np.unique(np.concatenate([np.arange(1.0, 1001.0), np.geomspace(1000.0, upto, 400)]))
    vals = np.asarray(rule.value(grid), dtype=float)
    if np.any(~np.isfinite(vals)) or np.any(vals < 0):
        raise DescriptorError(f"{rule.family} rule is not positive and finite on [1, {upto:g}]")
    if np.any(np.diff(vals) > 1e-15 * vals[:-1]):
        bad = float(grid[1:][np.diff(vals) > 1e-15 * vals[:-1]][0])
        raise DescriptorError(f"{rule.family} rule increases near t={bad:g}")
