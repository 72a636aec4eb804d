"""Exact combinatorics of multi-indices.

Multi-indices are plain tuples of non-negative ints.  Everything here is
exact (Python ints / Fractions); nothing is converted to float.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import product as _cartesian
from math import factorial, prod
from typing import Iterator, Sequence

MultiIndex = tuple[int, ...]


class EmptyDomainError(ValueError):
    """Raised when a partition set is requested outside 1 <= |lam| <= |nu|."""


def order(nu: Sequence[int]) -> int:
    return sum(nu)


def mfactorial(nu: Sequence[int]) -> int:
    return prod(factorial(k) for k in nu)


def order_and_factorial(nu: Sequence[int]) -> tuple[int, int]:
    return order(nu), mfactorial(nu)


def _check_same_length(a: Sequence[int], b: Sequence[int]) -> None:
    if len(a) != len(b):
        raise ValueError(f"multi-index length mismatch: {len(a)} vs {len(b)}")


def precedes(l1: Sequence[int], l2: Sequence[int]) -> bool:
    """Graded-lexicographic strict order used by the Faa di Bruno index sets."""
    _check_same_length(l1, l2)
    o1, o2 = sum(l1), sum(l2)
    if o1 != o2:
        return o1 < o2
    # lexicographically first means larger leading entries: (1,0) before (0,1)
    return tuple(l1) > tuple(l2)


def _compositions(total: int, parts: int) -> Iterator[MultiIndex]:
    """Tuples of `parts` naturals summing to `total`, lex-descending."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


@lru_cache(maxsize=None)
def enumerate_up_to(d: int, r: int) -> tuple[MultiIndex, ...]:
    """All multi-indices of length d and order <= r, sorted by `precedes`."""
    if d < 1:
        raise ValueError("arity must be >= 1")
    if r < 0:
        raise ValueError("order must be >= 0")
    out: list[MultiIndex] = []
    for k in range(r + 1):
        out.extend(_compositions(k, d))
    return tuple(out)


def multinomial(nu: Sequence[int], parts: Sequence[Sequence[int]]) -> int:
    return mfactorial(nu) // prod(mfactorial(p) for p in parts)


def _bounded_by(nu: Sequence[int]) -> Iterator[MultiIndex]:
    return _cartesian(*(range(k + 1) for k in nu))


def decompositions(nu: Sequence[int], l: int) -> list[tuple[tuple[MultiIndex, ...], int]]:
    """Ordered l-tuples summing to nu, each with its Leibniz coefficient."""
    if l < 1:
        raise ValueError("need at least one factor")
    nu = tuple(nu)
    if l == 1:
        return [((nu,), 1)]
    out = []
    for first in sorted(_bounded_by(nu), key=lambda m: (sum(m), tuple(-x for x in m))):
        rest = tuple(a - b for a, b in zip(nu, first))
        for tail, _ in decompositions(rest, l - 1):
            parts = (first,) + tail
            out.append((parts, multinomial(nu, parts)))
    return out


@lru_cache(maxsize=None)
def _small_below(bound: MultiIndex, wmax: int) -> tuple[MultiIndex, ...]:
    """Nonzero multi-indices k <= bound componentwise with |k| <= wmax."""
    return tuple(k for k in _bounded_by(bound) if 0 < sum(k) <= wmax)


@dataclass(frozen=True)
class FaaPartition:
    """One element (k_1..k_s, l_1..l_s) of the index set p_s(nu, lam)."""

    k: tuple[MultiIndex, ...]
    l: tuple[MultiIndex, ...]

    @property
    def s(self) -> int:
        return len(self.k)


@lru_cache(maxsize=None)
def faa_partitions(nu: MultiIndex, lam: MultiIndex) -> tuple[FaaPartition, ...]:
    """Union over s of p_s(nu, lam); deterministic order.

    ``nu`` lives over the inner arity e, ``lam`` over the outer arity d.
    """
    nu, lam = tuple(nu), tuple(lam)
    n = sum(nu)
    if not 1 <= sum(lam) <= n:
        raise EmptyDomainError(f"need 1 <= |lam| <= |nu|, got |lam|={sum(lam)}, |nu|={n}")
    e = len(nu)
    # candidate l's: nonzero, bounded by nu, in increasing precedes-order
    cands = [m for m in enumerate_up_to(e, n) if sum(m) > 0 and all(a <= b for a, b in zip(m, nu))]
    out: list[FaaPartition] = []

    def rec(start: int, lam_left: MultiIndex, nu_left: MultiIndex, ks: list, ls: list) -> None:
        n_lam, n_nu = sum(lam_left), sum(nu_left)
        if n_lam == 0:
            if n_nu == 0:
                out.append(FaaPartition(tuple(ks), tuple(ls)))
            return
        for ci in range(start, len(cands)):
            lj = cands[ci]
            o = sum(lj)
            # every remaining unit of |lam| consumes at least |lj| of |nu|
            if n_lam * o > n_nu:
                break
            if any(a > b for a, b in zip(lj, nu_left)):
                continue
            wmax = min(b // a for a, b in zip(lj, nu_left) if a)
            for kj in _small_below(lam_left, wmax):
                w = sum(kj)
                ks.append(kj)
                ls.append(lj)
                rec(ci + 1,
                    tuple(a - b for a, b in zip(lam_left, kj)),
                    tuple(b - w * a for a, b in zip(lj, nu_left)),
                    ks, ls)
                ks.pop()
                ls.pop()

    rec(0, lam, nu, [], [])
    return tuple(out)
