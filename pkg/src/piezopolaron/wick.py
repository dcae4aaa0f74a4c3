r"""Vacuum moments ``<0|H^m|0>`` by exhaustive Wick pairing.

The product ``T_1 T_2 ... T_m`` of normal-ordered terms is scanned from the
right.  Every annihilator of a factor must contract with a creator of some
factor to its right; each contraction identifies two wave-vector labels.
After all pairings, labels fall into *clusters*, one summed wave vector per
cluster, and the contribution is a product of per-cluster mode sums coupled
only through dot products.

Contributions are grouped by a *pattern signature* (per-cluster exponents,
dot-product edges, momentum factors) and the combinatorial weights summed
exactly as fractions, so the result does not depend on the order in which
patterns were produced.  Each signature is then evaluated under the measure:

* ``Continuum(k0)``: exact angular average times closed-form radial
  integrals, ``(4pi)^(c+1)/(2pi)^3 * alpha^c * J(2 - c + a, b)`` per cluster
  carrying ``2c`` coupling factors, ``a`` powers of ``k`` and ``b`` of
  ``1/(k + k^2)``;
* ``Discrete(modes)``: explicit sums over a finite mode list.
"""
from __future__ import annotations

import math
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import permutations
from fractions import Fraction
from typing import Sequence, TextIO

import mpmath
import numpy as np

from .angular import EXTERNAL, edge_average
from .errors import DomainError, ResourceError
from .model import FChoice, TermList
from .radint import radial_integral_mp

__all__ = [
    "Mode",
    "Measure",
    "AlphaPolynomial",
    "MomentVector",
    "vacuum_moment",
    "central_moment",
    "moment_vector",
    "mean_energy",
    "DEFAULT_BUDGET",
]

DEFAULT_BUDGET = 10**8
_DPS = 50


# ---------------------------------------------------------------------------
# measures


@dataclass(frozen=True)
class Mode:
    """One explicit phonon mode.

    ``weight`` is the ``d^3k`` volume the mode represents; the coupling is
    ``V^2 = alpha * weight / (2 pi^2 |k|)`` so that weighted mode sums
    approximate the continuum integral.
    """

    wavevector: tuple
    weight: float = 1.0

    def __post_init__(self):
        vec = tuple(float(x) for x in self.wavevector)
        if len(vec) != 3:
            raise DomainError("wavevector must have 3 components")
        if not np.linalg.norm(vec) > 0:
            raise DomainError("wavevector must be non-zero")
        if not self.weight > 0:
            raise DomainError("mode weight must be positive")
        object.__setattr__(self, "wavevector", vec)

    @classmethod
    def with_coupling(cls, wavevector, coupling: float) -> "Mode":
        """Mode whose ``V`` equals ``sqrt(alpha) * coupling``."""
        k = float(np.linalg.norm(wavevector))
        return cls(wavevector, 2.0 * math.pi**2 * k * coupling**2)


@dataclass(frozen=True)
class Measure:
    """Either the isotropic continuum up to ``k0`` or a finite mode list."""

    kind: str
    k0: float | None = None
    modes: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.kind == "continuum":
            if not (self.k0 is not None and self.k0 > 0):
                raise DomainError("Continuum measure requires k0 > 0")
        elif self.kind == "discrete":
            modes = tuple(m if isinstance(m, Mode) else Mode(*m) for m in self.modes)
            if not modes:
                raise DomainError("Discrete measure requires at least one mode")
            if len({m.wavevector for m in modes}) != len(modes):
                raise DomainError("Discrete modes must have distinct wavevectors")
            object.__setattr__(self, "modes", modes)
        else:
            raise DomainError(f"unknown measure kind {self.kind!r}")

    @classmethod
    def continuum(cls, k0: float) -> "Measure":
        return cls("continuum", k0=float(k0))

    @classmethod
    def discrete(cls, modes: Sequence) -> "Measure":
        return cls("discrete", modes=tuple(modes))

    @property
    def is_continuum(self) -> bool:
        return self.kind == "continuum"


# ---------------------------------------------------------------------------
# results


def _power_key(power):
    twice = Fraction(power) * 2
    if twice.denominator != 1 or twice < 0:
        raise DomainError("alpha exponents must be non-negative multiples of 1/2")
    return int(power) if twice.numerator % 2 == 0 else Fraction(power)


class AlphaPolynomial:
    """Polynomial in ``alpha`` (half-integer powers allowed) with extended-precision coefficients.

    Half-integer powers arise only when a term is linear in ``V_k``, as in the
    linear-eliminating displacement.
    """

    __slots__ = ("_c",)

    def __init__(self, coefficients=None):
        self._c = {}
        for power, value in (coefficients or {}).items():
            key = _power_key(power)
            self._c[key] = self._c.get(key, mpmath.mpf(0)) + mpmath.mpf(value)

    @property
    def coefficients(self) -> dict:
        """``{power: float coefficient}`` in ascending power order."""
        return {p: float(self._c[p]) for p in sorted(self._c)}

    @property
    def exact(self) -> dict:
        return {p: self._c[p] for p in sorted(self._c)}

    @property
    def degree(self) -> int:
        nonzero = [p for p, v in self._c.items() if v != 0]
        return max(nonzero) if nonzero else 0

    def evaluate_mp(self, alpha):
        with mpmath.workdps(_DPS):
            a = mpmath.mpf(alpha)
            return mpmath.fsum(
                v * (a**p if isinstance(p, int) else a ** (mpmath.mpf(p.numerator) / p.denominator))
                for p, v in sorted(self._c.items())
            )

    def __call__(self, alpha) -> float:
        return float(self.evaluate_mp(alpha))

    def __add__(self, other):
        other = other if isinstance(other, AlphaPolynomial) else AlphaPolynomial({0: other})
        out = dict(self._c)
        with mpmath.workdps(_DPS):
            for p, v in other._c.items():
                out[p] = out.get(p, mpmath.mpf(0)) + v  # keys are already canonical
        return AlphaPolynomial(out)

    __radd__ = __add__

    def __mul__(self, other):
        if not isinstance(other, AlphaPolynomial):
            with mpmath.workdps(_DPS):
                return AlphaPolynomial({p: v * mpmath.mpf(other) for p, v in self._c.items()})
        out: dict = {}
        with mpmath.workdps(_DPS):
            for p, v in self._c.items():
                for q, w in other._c.items():
                    key = _power_key(Fraction(p) + Fraction(q))
                    out[key] = out.get(key, mpmath.mpf(0)) + v * w
        return AlphaPolynomial(out)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        out = AlphaPolynomial({0: 1})
        for _ in range(n):
            out = out * self
        return out

    def __repr__(self):
        inner = ", ".join(f"{p}: {float(v):.12g}" for p, v in sorted(self._c.items()))
        return f"AlphaPolynomial({{{inner}}})"


@dataclass(frozen=True)
class MomentVector:
    """Moments ``M_0 .. M_2n`` as polynomials in ``alpha``."""

    order: int
    moments: tuple
    centered: bool = False

    def __post_init__(self):
        if len(self.moments) != 2 * self.order + 1:
            raise ValueError("MomentVector needs 2n+1 moments")

    def at(self, alpha) -> list:
        """Moments evaluated at ``alpha`` as extended-precision numbers."""
        return [m.evaluate_mp(alpha) for m in self.moments]


# ---------------------------------------------------------------------------
# compiled terms and pairing enumeration


@dataclass(frozen=True)
class _Compiled:
    coefficient: Fraction
    radial: tuple  # per local label: (k_power, profile_power, coupling_power)
    dots: tuple  # local index pairs
    pdots: tuple  # local indices
    creators: tuple  # local indices
    annihilators: tuple
    n_labels: int


def _compile(terms) -> list:
    out = []
    for t in terms:
        idx = {l: i for i, l in enumerate(t.labels)}
        out.append(
            _Compiled(
                Fraction(t.coefficient),
                tuple((r.k_power, r.profile_power, r.coupling_power) for r in t.radial),
                tuple((idx[a], idx[b]) for a, b in t.dots),
                tuple(idx[a] for a in t.momentum_dots),
                tuple(idx[l] for l, c in t.ladder if c),
                tuple(idx[l] for l, c in t.ladder if not c),
                len(t.labels),
            )
        )
    return out


class _Budget:
    def __init__(self, limit):
        self.limit = limit
        self.count = 0

    def tick(self):
        self.count += 1
        if self.count > self.limit:
            raise ResourceError(
                f"Wick enumeration exceeded the budget of {self.limit} branches",
                attempted=self.count,
            )


def _signature(seq, compiled, contractions, stride):
    """Cluster the labels of one fully contracted product.

    Label ``i`` of the factor at position ``pos`` has global id
    ``pos * stride + i``.
    """
    parent = {}

    def find(x):
        parent.setdefault(x, x)
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in contractions:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    roots: dict = {}
    radial: list = []
    pdots: list = []

    def cluster(g):
        r = find(g)
        if r not in roots:
            roots[r] = len(roots)
            radial.append([0, 0, 0])
            pdots.append(0)
        return roots[r]

    edges: dict = defaultdict(int)
    coef = Fraction(1)
    for pos, t in enumerate(seq):
        c = compiled[t]
        coef *= c.coefficient
        off = pos * stride
        for i, (kp, gp, vp) in enumerate(c.radial):
            acc = radial[cluster(off + i)]
            acc[0] += kp
            acc[1] += gp
            acc[2] += vp
        for a, b in c.dots:
            ca, cb = cluster(off + a), cluster(off + b)
            edges[(min(ca, cb), max(ca, cb))] += 1
        for a in c.pdots:
            pdots[cluster(off + a)] += 1
    key = (
        tuple(tuple(r) for r in radial),
        tuple(sorted(edges.items())),
        tuple(pdots),
    )
    return key, coef


def _injections(n, r):
    """Ordered choices of ``r`` distinct slots out of ``n``."""
    if r == 0:
        return ((),)
    return permutations(range(n), r)


def _enumerate(compiled, m, prefix=(), budget=None, trace=None):
    """Accumulate ``{signature: exact weight}`` over all complete pairings.

    ``prefix`` fixes the term indices of the rightmost ``len(prefix)``
    factors (used to split the work between processes).
    """
    budget = budget or _Budget(DEFAULT_BUDGET)
    if m == 0:
        return {((), (), ()): Fraction(1)}
    acc: dict = defaultdict(Fraction)
    stride = max((c.n_labels for c in compiled), default=1) or 1
    max_ann = max((len(c.annihilators) for c in compiled), default=0)
    seq = [0] * m

    def place(pos, open_creators, contractions):
        # factors are placed from position m-1 (rightmost) down to 0
        if pos < 0:
            if open_creators:
                return
            order = tuple(seq)
            key, coef = _signature(order, compiled, contractions, stride)
            acc[key] += coef
            if trace is not None:
                trace.write(f"terms={order} pairs={tuple(contractions)} weight={coef} sig={key}\n")
            return
        fixed = m - 1 - pos
        choices = (prefix[fixed],) if fixed < len(prefix) else range(len(compiled))
        n_open = len(open_creators)
        for t in choices:
            c = compiled[t]
            r = len(c.annihilators)
            if r > n_open:
                continue
            after = n_open - r + len(c.creators)
            if after > pos * max_ann:
                continue
            budget.tick()
            seq[pos] = t
            base = pos * stride
            fresh = [base + cl for cl in c.creators]
            for chosen in _injections(n_open, r):
                pairs = contractions + [
                    (base + a, open_creators[slot]) for a, slot in zip(c.annihilators, chosen)
                ]
                if r:
                    used = set(chosen)
                    remaining = [g for i, g in enumerate(open_creators) if i not in used]
                else:
                    remaining = list(open_creators)
                place(pos - 1, remaining + fresh, pairs)

    place(m - 1, [], [])
    return dict(acc)


# ---------------------------------------------------------------------------
# evaluation of pattern signatures


def _alpha_power(twice):
    return twice // 2 if twice % 2 == 0 else Fraction(twice, 2)


def _continuum_prefactor(c):
    # (2 pi)^-3 * 4 pi * (4 pi)^c: measure, solid angle, c factors of V^2 k
    return (4 * mpmath.pi) ** (c + 1) / (2 * mpmath.pi) ** 3


def _evaluate_continuum(sigs: dict, profile, k0: float) -> dict:
    Pmag = Fraction(float(np.linalg.norm(profile.P)))
    grouped: dict = defaultdict(Fraction)
    for (radial, edges, pdots), weight in sigs.items():
        if weight == 0:
            continue
        kp = [r[0] for r in radial]
        ang: dict = {}
        for (a, b), n in edges:
            kp[a] += n
            kp[b] += n
            if a != b:
                ang[(a, b)] = n
        ppow = 0
        for c, n in enumerate(pdots):
            if n:
                kp[c] += n
                ang[(c, EXTERNAL)] = n
                ppow += n
        if ppow and Pmag == 0:
            continue
        avg = edge_average(ang)
        if avg == 0:
            continue
        keys = []
        for c, (k_power, g_power, v_power) in zip(range(len(radial)), radial):
            if g_power and profile.f_choice is not FChoice.SIMPLE:
                raise DomainError(
                    "continuum moments need the simple profile 1/(k+k^2); "
                    f"got {profile.f_choice.value}"
                )
            if v_power % 2:
                raise DomainError("odd power of V_k on a summed wave vector")
            half = v_power // 2
            p, q = 2 - half + kp[c], g_power
            if p - q <= -1:
                raise DomainError(f"infrared-divergent mode sum J({p},{q})")
            keys.append((half, p, q))
        keys.sort()
        grouped[(sum(h for h, _, _ in keys), tuple(keys))] += weight * avg * Pmag**ppow
    out: dict = defaultdict(lambda: mpmath.mpf(0))
    with mpmath.workdps(_DPS):
        for (apow, keys), weight in sorted(grouped.items()):
            if weight == 0:
                continue
            val = mpmath.mpf(weight.numerator) / weight.denominator
            for half, p, q in keys:
                val *= _continuum_prefactor(half) * radial_integral_mp(p, q, k0, dps=_DPS)
            out[apow] += val
    return dict(out)


def _evaluate_discrete(sigs: dict, profile, modes) -> dict:
    K = np.array([m.wavevector for m in modes])
    kmag = np.linalg.norm(K, axis=1)
    weight = np.array([m.weight for m in modes])
    coupling = np.sqrt(weight / (2.0 * np.pi**2 * kmag))
    G = profile.G(K)
    kP = K @ np.asarray(profile.P)
    gram = K @ K.T
    letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
    out: dict = defaultdict(float)
    terms_by_power: dict = defaultdict(list)
    for (radial, edges, pdots), w in sorted(sigs.items()):
        if w == 0:
            continue
        if len(radial) > len(letters):
            raise ResourceError("too many independent mode sums for explicit evaluation")
        vecs = []
        vcount = 0
        for c, (kp, gp, vp) in enumerate(radial):
            v = kmag**kp * G**gp * coupling**vp * kP ** pdots[c]
            vcount += vp
            vecs.append(v)
        operands, subs = [], []
        for (a, b), n in edges:
            if a == b:
                vecs[a] = vecs[a] * kmag ** (2 * n)
            else:
                operands.append(gram**n)
                subs.append(letters[a] + letters[b])
        for c, v in enumerate(vecs):
            operands.append(v)
            subs.append(letters[c])
        if operands:
            val = np.einsum(",".join(subs) + "->", *operands)
        else:
            val = 1.0
        terms_by_power[_alpha_power(vcount)].append(float(w) * float(val))
    for p, vals in terms_by_power.items():
        out[p] = math.fsum(vals)
    return dict(out)


def _evaluate(sigs, profile, measure) -> AlphaPolynomial:
    if measure.is_continuum:
        return AlphaPolynomial(_evaluate_continuum(sigs, profile, measure.k0))
    return AlphaPolynomial(_evaluate_discrete(sigs, profile, measure.modes))


# ---------------------------------------------------------------------------
# public entry points


def _task(args):
    compiled, m, prefix, limit = args
    return _enumerate(compiled, m, prefix, _Budget(limit))


def _signatures(compiled, m, budget, workers, trace=None) -> dict:
    if workers <= 1 or m < 3 or trace is not None:
        return _enumerate(compiled, m, (), _Budget(budget), trace)
    # the rightmost factor must be creation-only; split on the two rightmost
    starts = [t for t, c in enumerate(compiled) if not c.annihilators]
    prefixes = [(a, b) for a in starts for b in range(len(compiled))]
    total: dict = defaultdict(Fraction)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for part in pool.map(_task, [(compiled, m, p, budget) for p in prefixes]):
            for key, w in part.items():
                total[key] += w
    return dict(total)


def central_moment(
    terms: TermList,
    measure: Measure,
    m: int,
    *,
    budget: int = DEFAULT_BUDGET,
    workers: int = 1,
    trace: TextIO | None = None,
) -> AlphaPolynomial:
    """``<0|(H - <0|H|0>)^m|0>`` from the ladder terms only."""
    if m < 0:
        raise DomainError("moment order must be non-negative")
    compiled = _compile(terms.ladder_terms)
    return _evaluate(_signatures(compiled, m, budget, workers, trace), terms.profile, measure)


def _mean_polynomial(terms: TermList, measure: Measure) -> AlphaPolynomial:
    compiled = _compile(terms.scalar_terms)
    sigs = _enumerate(compiled, 1) if compiled else {}
    return _evaluate(sigs, terms.profile, measure) + terms.constant_offset


def _raw_from_central(mean: AlphaPolynomial, central: list, m: int) -> AlphaPolynomial:
    out = AlphaPolynomial({})
    for j in range(m + 1):
        out = out + math.comb(m, j) * (mean ** (m - j)) * central[j]
    return out


def vacuum_moment(
    terms: TermList,
    measure: Measure,
    m: int,
    *,
    budget: int = DEFAULT_BUDGET,
    workers: int = 1,
    trace: TextIO | None = None,
) -> AlphaPolynomial:
    """Raw vacuum moment ``M_m = <0|H^m|0>`` as a polynomial in ``alpha``.

    Scalar terms commute with everything, so ``M_m`` is assembled from the
    central moments of the ladder part and the mean by the binomial formula.

    Parameters
    ----------
    terms : TermList
        Normal-ordered Hamiltonian.
    measure : Measure
        Continuum (isotropic, cutoff ``k0``) or explicit modes.
    m : int
        Moment order.
    budget : int
        Maximum number of enumeration branches before :class:`ResourceError`.
    workers : int
        Process count for the enumeration; results are identical for any value.
    trace : file-like, optional
        Receives one line per complete pairing (serial enumeration only).
    """
    if m < 0:
        raise DomainError("moment order must be non-negative")
    if m == 0:
        return AlphaPolynomial({0: 1})
    mean = _mean_polynomial(terms, measure)
    compiled = _compile(terms.ladder_terms)
    central = [AlphaPolynomial({0: 1}), AlphaPolynomial({})]
    for j in range(2, m + 1):
        sigs = _signatures(compiled, j, budget, workers, trace)
        central.append(_evaluate(sigs, terms.profile, measure))
    return _raw_from_central(mean, central, m)


def moment_vector(
    terms: TermList,
    measure: Measure,
    n: int,
    *,
    centered: bool = False,
    budget: int = DEFAULT_BUDGET,
    workers: int = 1,
) -> MomentVector:
    """Moments ``0 .. 2n`` (raw by default, central with ``centered=True``)."""
    if n < 1:
        raise DomainError("order n must be >= 1")
    compiled = _compile(terms.ladder_terms)
    central = [AlphaPolynomial({0: 1}), AlphaPolynomial({})]
    for j in range(2, 2 * n + 1):
        sigs = _signatures(compiled, j, budget, workers)
        central.append(_evaluate(sigs, terms.profile, measure))
    if centered:
        return MomentVector(n, tuple(central), centered=True)
    mean = _mean_polynomial(terms, measure)
    raw = [_raw_from_central(mean, central, j) for j in range(2 * n + 1)]
    return MomentVector(n, tuple(raw))


def mean_energy(terms: TermList, measure: Measure) -> AlphaPolynomial:
    """First moment ``<0|H|0>``."""
    return _mean_polynomial(terms, measure)
