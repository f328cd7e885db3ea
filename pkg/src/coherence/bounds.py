"""Closed-form token-cost calculators.

Ratios are computed with exact rationals and converted to float once, so
e.g. ``savings_lower_bound(4, 40, 2) == 0.85`` holds exactly. Float inputs
are read as the decimal they print as (0.9 is 9/10, not the nearest double).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence


def _exact(x) -> Fraction:
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(x)


def broadcast_cost(n: int, S: int, sizes: Sequence[int]) -> int:
    """Full rebroadcast: every agent receives every artifact at every step."""
    return n * S * sum(sizes)


def coherent_upper_bound(n: int, sizes: Sequence[int], writes: Sequence[int]) -> int:
    """Worst-case lazy-invalidation cost, sum over artifacts of n(n + W_i)|d_i|.

    Uses the n(n + W) fetch count; the tighter n(1 + W) count is available
    as :func:`coherent_upper_bound_tight`.
    """
    if len(sizes) != len(writes):
        raise ValueError("sizes and writes must have one entry per artifact")
    return sum(n * (n + w) * d for d, w in zip(sizes, writes))


def coherent_upper_bound_tight(n: int, sizes: Sequence[int], writes: Sequence[int]) -> int:
    if len(sizes) != len(writes):
        raise ValueError("sizes and writes must have one entry per artifact")
    return sum(n * (1 + w) * d for d, w in zip(sizes, writes))


def savings_lower_bound(n: int, S: int, W: float) -> float:
    """1 - (n + W) / S for uniform artifact sizes. Negative values are kept."""
    if S < 1:
        raise ValueError("S must be >= 1")
    return float(1 - (Fraction(n) + _exact(W)) / S)


def savings_lower_bound_general(n: int, S: int, sizes: Sequence[int],
                                writes: Sequence[int]) -> float:
    upper = coherent_upper_bound(n, sizes, writes)
    return float(1 - Fraction(upper, broadcast_cost(n, S, sizes)))


def savings_lower_bound_volatility(n: int, S: int, V: float) -> float:
    """Same bound with W = V * S substituted: 1 - n/S - V."""
    if S < 1:
        raise ValueError("S must be >= 1")
    return float(1 - Fraction(n, S) - _exact(V))


def volatility(writes: float, S: int) -> float:
    return float(_exact(writes) / S)


def volatility_cliff(n: int, S: int) -> float:
    """Volatility above which the savings lower bound is negative."""
    if S < 1:
        raise ValueError("S must be >= 1")
    return float(1 - Fraction(n, S))


def writes_from_volatility(V: float, S: int) -> int:
    """W = V * S rounded half-up to a natural number."""
    return math.floor(_exact(V) * S + Fraction(1, 2))


def prompt_cache_hit_estimate(V: float, regime: str = "broadcast") -> float:
    """Expected provider prompt-cache hit rate.

    Broadcast re-embeds changed artifacts, so the prefix survives only on steps
    without a write (1 - V). Coherent prompts carry references only and keep
    the structural prefix stable.
    """
    if not 0 <= V <= 1:
        raise ValueError("V must be in [0, 1]")
    if regime == "broadcast":
        return float(1 - _exact(V))
    if regime == "coherent":
        return 1.0
    raise ValueError(f"unknown regime {regime!r}")


def crr(coherent_tokens: float, broadcast_tokens: float) -> float:
    return coherent_tokens / broadcast_tokens


@dataclass
class WorkloadShape:
    n: int
    S: int
    d_sizes: list
    W: Optional[list] = None
    V: Optional[float] = None
    K: int = 0
    p: float = 0.75
    m: int = field(init=False)

    def __post_init__(self):
        self.m = len(self.d_sizes)
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.S < 0:
            raise ValueError("S must be >= 0")
        if any(d < 1 for d in self.d_sizes):
            raise ValueError("artifact sizes must be >= 1 token")
        if self.V is not None and not 0 <= self.V <= 1:
            raise ValueError("V must be in [0, 1]")
        if self.W is None:
            w = writes_from_volatility(self.V or 0.0, self.S)
            self.W = [w] * self.m
        elif len(self.W) != self.m:
            raise ValueError("one write count per artifact")

    @classmethod
    def uniform(cls, n: int, S: int, m: int, size: int, V: float = 0.0, **kw) -> "WorkloadShape":
        return cls(n=n, S=S, d_sizes=[size] * m, V=V, **kw)

    def broadcast_cost(self) -> int:
        return broadcast_cost(self.n, self.S, self.d_sizes)

    def coherent_upper_bound(self) -> int:
        return coherent_upper_bound(self.n, self.d_sizes, self.W)

    def savings_lower_bound(self) -> float:
        return savings_lower_bound_general(self.n, self.S, self.d_sizes, self.W)
