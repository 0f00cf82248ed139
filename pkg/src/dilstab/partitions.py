"""Set partitions and the moment expansions built on them.

For an even p, E X**p is the sum over set partitions of {1..p} of the product
of block cumulants.  With zero mean only singleton-free partitions survive,
and under dilative stability the partition with |Pi| blocks picks up the time
factor h**(delta*|Pi|).  The two functions below that evaluate these sums
group partitions by block-size profile; ``enumerate_partitions`` walks them
one by one and is what the tests use as the brute-force cross-check.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator

from .model import CumulantVector, DilativeParams, UnsupportedCase, holder_case

MAX_ORDER = 12


class SizeLimitError(ValueError):
    pass


@dataclass(frozen=True)
class SetPartition:
    """Blocks of {1..p}, each sorted, ordered by smallest element."""

    blocks: tuple[tuple[int, ...], ...]
    p: int

    @classmethod
    def from_rgs(cls, rgs) -> "SetPartition":
        blocks: list[list[int]] = []
        for i, b in enumerate(rgs, start=1):
            if b == len(blocks):
                blocks.append([i])
            else:
                blocks[b].append(i)
        return cls(tuple(tuple(b) for b in blocks), len(rgs))

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(b) for b in self.blocks)

    def __len__(self) -> int:
        return len(self.blocks)

    def is_canonical(self) -> bool:
        seen = sorted(i for b in self.blocks for i in b)
        if seen != list(range(1, self.p + 1)) or any(not b for b in self.blocks):
            return False
        if any(list(b) != sorted(b) for b in self.blocks):
            return False
        firsts = [b[0] for b in self.blocks]
        return firsts == sorted(firsts)


def _check_order(p: int) -> None:
    if not 1 <= p <= MAX_ORDER:
        raise SizeLimitError(f"p must lie in [1, {MAX_ORDER}] (got {p})")


def restricted_growth_strings(p: int, skip_singletons: bool = False) -> Iterator[tuple[int, ...]]:
    """Restricted growth strings of length p in lexicographic order.

    a[0] = 0 and a[i] <= 1 + max(a[:i]); element i+1 goes to block a[i].
    With ``skip_singletons`` branches that can no longer fill every open
    singleton block are pruned.
    """
    _check_order(p)
    a = [0] * p
    sizes = [1]

    def rec(i: int) -> Iterator[tuple[int, ...]]:
        if skip_singletons and sizes.count(1) > p - i:
            return
        if i == p:
            yield tuple(a)
            return
        m = len(sizes)
        for b in range(m + 1):
            a[i] = b
            if b == m:
                sizes.append(1)
            else:
                sizes[b] += 1
            yield from rec(i + 1)
            if b == m:
                sizes.pop()
            else:
                sizes[b] -= 1

    yield from rec(1)


def enumerate_partitions(p: int, skip_singletons: bool = False) -> Iterator[SetPartition]:
    """Every partition of {1..p} once, in canonical (RGS-lexicographic) order."""
    for rgs in restricted_growth_strings(p, skip_singletons):
        yield SetPartition.from_rgs(rgs)


def bell(p: int) -> int:
    """Bell number via the Bell triangle (independent of the enumerator)."""
    row = [1]
    for _ in range(p - 1):
        nxt = [row[-1]]
        for x in row:
            nxt.append(nxt[-1] + x)
        row = nxt
    return row[-1] if p > 0 else 1


def _integer_partitions(n: int, largest: int | None = None, smallest: int = 1) -> Iterator[tuple[int, ...]]:
    largest = n if largest is None else largest
    if n == 0:
        yield ()
        return
    for k in range(min(n, largest), smallest - 1, -1):
        for rest in _integer_partitions(n - k, k, smallest):
            yield (k,) + rest


@lru_cache(maxsize=None)
def block_profiles(p: int, skip_singletons: bool = True) -> tuple[tuple[tuple[int, ...], int], ...]:
    """(block sizes, number of set partitions with exactly those sizes)."""
    _check_order(p)
    out = []
    for sizes in _integer_partitions(p, smallest=2 if skip_singletons else 1):
        count = math.factorial(p)
        for k, m in Counter(sizes).items():
            count //= math.factorial(k) ** m * math.factorial(m)
        out.append((sizes, count))
    return tuple(out)


def _even_order(c: CumulantVector, p: int) -> None:
    _check_order(p)
    if p % 2:
        raise UnsupportedCase(f"only even orders are expanded (got p={p})")
    if p > c.p_max:
        raise SizeLimitError(f"p={p} exceeds p_max={c.p_max}")


def moment_from_cumulants(c: CumulantVector, p: int) -> float:
    """p-th raw moment of a zero-mean law with the given cumulants."""
    _even_order(c, p)
    total = 0.0
    for sizes, count in block_profiles(p, True):
        total += count * math.prod(c[k] for k in sizes)
    return total


def scaled_increment_moment(params: DilativeParams, c: CumulantVector, p: int, h: float) -> float:
    """E|X(t) - X(s)|**p for |t - s| = h under stationary increments."""
    if not params.stationary_increments:
        raise UnsupportedCase("increment moments need stationary increments")
    _even_order(c, p)
    if not h > 0:
        raise ValueError("lag must be positive")
    H, d = params.alpha, params.delta
    inner = 0.0
    for sizes, count in block_profiles(p, True):
        inner += count * h ** (d * len(sizes)) * math.prod(c[k] for k in sizes)
    return h ** ((H - d / 2) * p) * inner


def kolmogorov_bound(params: DilativeParams, c: CumulantVector, p: int, h: float) -> float:
    """Upper bound on E|X(t)-X(s)|**p used to verify Kolmogorov's condition."""
    hc = holder_case(params)
    _even_order(c, p)
    H, d = params.alpha, params.delta
    if hc.case == "III":
        if p != 2:
            raise UnsupportedCase("the delta=2H case is bounded through p=2 only")
        return c[2] * h ** (2 * H)
    m = moment_from_cumulants(c, p)
    if hc.case == "I":
        return m * h ** (H * p)
    return m * h ** ((H - d / 2) * p)


def min_even_order(params: DilativeParams) -> int:
    """Smallest even p for which the bound gives a positive Kolmogorov exponent q."""
    hc = holder_case(params)
    if hc.case == "III":
        return 2
    p = 2
    while hc.bound * p - 1 <= 0:
        p += 2
    return p


def kolmogorov_exponent(params: DilativeParams, p: int) -> float:
    """q in E|X(t)-X(s)|**p <= c |t-s|**(1+q)."""
    hc = holder_case(params)
    if hc.case == "III":
        return 2 * params.alpha - 1
    return hc.bound * p - 1
