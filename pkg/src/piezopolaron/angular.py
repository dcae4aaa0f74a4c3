"""Exact isotropic averages of products of dot products of unit vectors.

Each integrated label is an independent unit vector uniformly distributed on
the sphere.  Averaging over one vector ``u`` uses the isotropic moment tensor

    <u_i1 ... u_iN> = (1 / (N+1)!!) * sum over perfect matchings of deltas,

so that ``<prod_j (u . v_j)>`` becomes a sum over matchings of the partner
vectors ``v_j`` paired among themselves.  Repeating this label by label
reduces any monomial to an exact rational.  A fixed external direction
(the total-momentum direction) is carried as an extra, never-integrated unit
vector.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Hashable, Mapping

__all__ = ["DotMonomial", "angular_average", "EXTERNAL"]

#: Name of the fixed external unit vector (momentum direction).
EXTERNAL = "P"


@dataclass(frozen=True)
class DotMonomial:
    """Product of ``(u.v)`` factors between unit vectors.

    Parameters
    ----------
    labels : set of hashable
        Integrated unit-vector labels.
    pair_powers : mapping
        ``{(a, b): n}`` meaning a factor ``(a.b)**n``.  Pairs are unordered.
    external_powers : mapping
        ``{a: n}`` meaning ``(a.P)**n`` with ``P`` the fixed direction.
    """

    labels: frozenset = field(default_factory=frozenset)
    pair_powers: Mapping = field(default_factory=dict)
    external_powers: Mapping = field(default_factory=dict)

    def __post_init__(self):
        labels = frozenset(self.labels)
        object.__setattr__(self, "labels", labels)
        for pair, n in self.pair_powers.items():
            a, b = pair
            if a not in labels or b not in labels:
                raise ValueError(f"pair {pair} references an undeclared label")
            if n < 0:
                raise ValueError("exponents must be non-negative")
        for a, n in self.external_powers.items():
            if a not in labels:
                raise ValueError(f"external factor references undeclared label {a!r}")
            if n < 0:
                raise ValueError("exponents must be non-negative")


def _canonical(edges: Mapping[tuple, int]) -> tuple:
    """Relabel integrated labels 0..n-1 in a degree-sorted order."""
    if not edges:
        return ()
    degree: dict = defaultdict(int)
    for (a, b), n in edges.items():
        degree[a] += n
        degree[b] += n
    names = sorted((x for x in degree if x != EXTERNAL), key=lambda x: (degree[x], repr(x)))
    index = {x: i for i, x in enumerate(names)}
    index[EXTERNAL] = -1
    out = []
    for (a, b), n in edges.items():
        ia, ib = sorted((index[a], index[b]))
        out.append((ia, ib, n))
    return tuple(sorted(out))


@lru_cache(maxsize=None)
def _matchings(counts: tuple) -> dict:
    """Perfect matchings of a multiset of slots.

    ``counts[i]`` slots carry partner type ``i``.  Returns
    ``{sorted tuple of (i, j) pairs: number of matchings}``.
    """
    total = sum(counts)
    if total == 0:
        return {(): 1}
    i = next(t for t, c in enumerate(counts) if c)
    out: dict = defaultdict(int)
    base = list(counts)
    base[i] -= 1
    for j, c in enumerate(base):
        if c == 0:
            continue
        rest = base.copy()
        rest[j] -= 1
        for pairs, mult in _matchings(tuple(rest)).items():
            out[tuple(sorted(pairs + ((i, j),)))] += mult * c
    return dict(out)


def _double_factorial(n: int) -> int:
    out = 1
    while n > 1:
        out *= n
        n -= 2
    return out


@lru_cache(maxsize=None)
def _average(canon: tuple) -> Fraction:
    if not canon:
        return Fraction(1)
    degree: dict = defaultdict(int)
    for a, b, n in canon:
        degree[a] += n
        degree[b] += n
    integrable = [x for x in degree if x >= 0]
    if not integrable:
        return Fraction(1)  # only (P.P) factors remain
    if any(degree[x] % 2 for x in integrable):
        return Fraction(0)
    # eliminate the lowest-degree label first (ties broken by index)
    u = min(integrable, key=lambda x: (degree[x], x))
    partners: dict = defaultdict(int)
    rest: dict = defaultdict(int)
    for a, b, n in canon:
        if a == u and b == u:
            continue  # (u.u) = 1
        if a == u:
            partners[b] += n
        elif b == u:
            partners[a] += n
        else:
            rest[(a, b)] += n
    names = sorted(partners)
    counts = tuple(partners[x] for x in names)
    N = sum(counts)
    norm = Fraction(1, _double_factorial(N + 1))
    total = Fraction(0)
    for pairs, mult in _matchings(counts).items():
        new = dict(rest)
        for i, j in pairs:
            a, b = names[i], names[j]
            if a == b:
                continue  # (v.v) = 1
            key = (min(a, b), max(a, b))
            new[key] = new.get(key, 0) + 1
        total += mult * _average(_canonical(new))
    return norm * total


def edge_average(edges: Mapping[tuple[Hashable, Hashable], int]) -> Fraction:
    """Average of ``prod (a.b)**n`` over ``edges``; ``EXTERNAL`` is fixed."""
    clean: dict = defaultdict(int)
    for (a, b), n in edges.items():
        if n == 0:
            continue
        if a == b:
            continue
        key = (a, b) if repr(a) <= repr(b) else (b, a)
        clean[key] += n
    return _average(_canonical(clean))


def angular_average(mono: DotMonomial) -> Fraction:
    """Exact average of a dot-product monomial over independent unit vectors.

    Examples
    --------
    >>> angular_average(DotMonomial({'u', 'v'}, {('u', 'v'): 2}))
    Fraction(1, 3)
    >>> angular_average(DotMonomial({'u', 'v'}, {('u', 'v'): 4}))
    Fraction(1, 5)
    """
    edges = dict(mono.pair_powers)
    for a, n in mono.external_powers.items():
        key = (a, EXTERNAL)
        edges[key] = edges.get(key, 0) + n
    return edge_average(edges)
