r"""Model parameters and the displaced, momentum-frame polaron Hamiltonian.

In dimensionless units (energy ``2ms^2``, wave vector ``2ms/hbar``) the
Hamiltonian at total momentum ``P`` after displacing every phonon mode by
``f_k`` is a polynomial in ladder operators.  :func:`build_hamiltonian`
returns it as a :class:`TermList` of normal-ordered monomials whose
wave-vector labels are summed independently.

Sums over phonon modes use the continuum convention

.. math:: \sum_k \to \int \frac{d^3k}{(2\pi)^3}, \qquad V_k^2 = 4\pi\alpha/k,

(unit dimensionless volume).  Every physical contribution pairs two factors
of ``V_k`` per summed wave vector, so results are volume independent.

Per-label factors are kept symbolic: ``k**p`` (wave-vector magnitude),
``V_k**v`` and ``G_k**q`` where ``G_k`` is the displacement profile,

* ``simple``:              ``G = 1/(k + k^2)``, ``f = -V G``
* ``pshifted``:            ``G = 1/(k + k^2 - 2(1-eta) k.P)``, ``f = -V G``
* ``linear-eliminating``:  ``G = 1/(k + k^2 - 2 k.P)``, ``f = -(V + 2 eta k.P) G``

The drag vector ``sum_m m f_m^2`` is replaced by ``eta * P`` unless
``explicit_drag=True``; in the latter form the term list is the exact
operator for any mode set.
"""
from __future__ import annotations

import enum
import math
from dataclasses import astuple, dataclass, field
from fractions import Fraction
from itertools import permutations
from numbers import Real
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError

__all__ = [
    "FChoice",
    "MaterialConstants",
    "ModelParams",
    "RadialFactor",
    "OperatorTerm",
    "Profile",
    "TermList",
    "coupling_from_material",
    "build_hamiltonian",
    "as_vector",
]


class FChoice(str, enum.Enum):
    """Which displacement amplitude ``f_k`` the Hamiltonian is built with."""

    SIMPLE = "simple"
    PSHIFTED = "pshifted"
    LINEAR_ELIMINATING = "linear-eliminating"

    @classmethod
    def parse(cls, value) -> "FChoice":
        if isinstance(value, cls):
            return value
        text = str(value).strip().lower().replace("_", "-")
        aliases = {"p-shifted": "pshifted", "lineareliminating": "linear-eliminating"}
        text = aliases.get(text, text)
        try:
            return cls(text)
        except ValueError:
            raise DomainError(f"unknown f choice {value!r}") from None


def as_vector(P) -> tuple[float, float, float]:
    """Coerce a scalar (taken along z) or a 3-sequence to a float triple."""
    if isinstance(P, Real):
        return (0.0, 0.0, float(P))
    vec = tuple(float(x) for x in P)
    if len(vec) != 3:
        raise DomainError(f"momentum must be a 3-vector, got {P!r}")
    return vec


@dataclass(frozen=True)
class MaterialConstants:
    """Material constants entering the coupling (any consistent unit set)."""

    electron_charge: float
    piezo_tensor_avg: float
    dielectric: float
    elastic_avg: float
    sound_speed: float
    electron_mass: float = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not (value > 0 and math.isfinite(value)):
                raise DomainError(f"{name} must be strictly positive, got {value}")


def coupling_from_material(mc: MaterialConstants) -> float:
    """Dimensionless coupling ``alpha = e^2 <e_ijk^2> / (2 eps C s hbar)``."""
    return (
        mc.electron_charge**2
        * mc.piezo_tensor_avg
        / (2.0 * mc.dielectric * mc.elastic_avg * mc.sound_speed * mc.hbar)
    )


@dataclass(frozen=True)
class ModelParams:
    """Coupling, cutoff, total momentum and displacement choice."""

    alpha: float
    k0: float
    P: tuple = (0.0, 0.0, 0.0)
    f_choice: FChoice = FChoice.SIMPLE

    def __post_init__(self):
        if not (self.alpha >= 0 and math.isfinite(self.alpha)):
            raise DomainError(f"alpha must be >= 0, got {self.alpha}")
        if not (self.k0 > 0 and math.isfinite(self.k0)):
            raise DomainError(f"k0 must be > 0, got {self.k0}")
        object.__setattr__(self, "P", as_vector(self.P))
        object.__setattr__(self, "f_choice", FChoice.parse(self.f_choice))

    @property
    def P_magnitude(self) -> float:
        return float(np.linalg.norm(self.P))


@dataclass(frozen=True)
class RadialFactor:
    """Exponents of ``k``, of the profile ``G_k`` and of ``V_k`` on one label."""

    k_power: int = 0
    profile_power: int = 0
    coupling_power: int = 0

    def __mul__(self, other: "RadialFactor") -> "RadialFactor":
        return RadialFactor(
            self.k_power + other.k_power,
            self.profile_power + other.profile_power,
            self.coupling_power + other.coupling_power,
        )

    @property
    def trivial(self) -> bool:
        return self == _ONE


_ONE = RadialFactor()


def _number(x):
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    return float(x)


@dataclass(frozen=True)
class OperatorTerm:
    """One normal-ordered monomial ``c * sum_labels (factors) * ladder``.

    ``ladder`` is a tuple of ``(label, is_creation)``; all creations precede
    all annihilations.  Labels are local to the term.
    """

    coefficient: Real
    labels: tuple
    radial: tuple
    dots: tuple = ()
    momentum_dots: tuple = ()
    ladder: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "coefficient", _number(self.coefficient))
        labels = tuple(self.labels)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "radial", tuple(self.radial))
        object.__setattr__(self, "dots", tuple(tuple(d) for d in self.dots))
        object.__setattr__(self, "momentum_dots", tuple(self.momentum_dots))
        object.__setattr__(self, "ladder", tuple((l, bool(c)) for l, c in self.ladder))
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate labels in {labels}")
        if len(self.radial) != len(labels):
            raise ValueError("one RadialFactor per label required")
        declared = set(labels)
        used = {l for l, _ in self.ladder} | set(self.momentum_dots)
        used |= {x for d in self.dots for x in d}
        if not used <= declared:
            raise ValueError(f"undeclared labels {used - declared}")
        seen_annihilator = False
        for _, creation in self.ladder:
            if creation and seen_annihilator:
                raise ValueError("ladder string is not normal ordered")
            seen_annihilator |= not creation

    @property
    def n_create(self) -> int:
        return sum(1 for _, c in self.ladder if c)

    @property
    def n_annihilate(self) -> int:
        return len(self.ladder) - self.n_create

    def factor(self, label) -> RadialFactor:
        return self.radial[self.labels.index(label)]

    def adjoint(self) -> "OperatorTerm":
        creators = [l for l, c in self.ladder if c]
        annihilators = [l for l, c in self.ladder if not c]
        ladder = [(l, True) for l in reversed(annihilators)]
        ladder += [(l, False) for l in reversed(creators)]
        return OperatorTerm(
            self.coefficient, self.labels, self.radial, self.dots, self.momentum_dots, ladder
        )

    def signature(self) -> tuple:
        """Label-renaming invariant key (smallest over label permutations)."""
        best = None
        for perm in permutations(range(len(self.labels))):
            name = {self.labels[i]: j for j, i in enumerate(perm)}
            key = (
                tuple(astuple(self.radial[i]) for i in perm),
                tuple(sorted(tuple(sorted((name[a], name[b]))) for a, b in self.dots)),
                tuple(sorted(name[a] for a in self.momentum_dots)),
                _sorted_ladder(self.ladder, name),
            )
            if best is None or key < best:
                best = key
        return best


def _sorted_ladder(ladder, name) -> tuple:
    # creators commute among themselves, as do annihilators
    creators = sorted(name[l] for l, c in ladder if c)
    annihilators = sorted(name[l] for l, c in ladder if not c)
    return tuple(creators), tuple(annihilators)


@dataclass(frozen=True)
class Profile:
    """Data needed to evaluate ``G_k`` numerically on explicit modes."""

    f_choice: FChoice = FChoice.SIMPLE
    P: tuple = (0.0, 0.0, 0.0)
    eta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "f_choice", FChoice.parse(self.f_choice))
        object.__setattr__(self, "P", as_vector(self.P))

    def G(self, kvecs: np.ndarray) -> np.ndarray:
        """Profile values for an ``(n, 3)`` array of wave vectors."""
        kvecs = np.atleast_2d(np.asarray(kvecs, dtype=float))
        k = np.linalg.norm(kvecs, axis=1)
        kP = kvecs @ np.asarray(self.P)
        if self.f_choice is FChoice.SIMPLE:
            den = k + k * k
        elif self.f_choice is FChoice.PSHIFTED:
            den = k + k * k - 2.0 * (1.0 - self.eta) * kP
        else:
            den = k + k * k - 2.0 * kP
        return 1.0 / den


@dataclass(frozen=True)
class TermList:
    """Normal-ordered term list of ``H(f)``.

    ``terms`` holds every operator monomial, including the scalar ones whose
    ladder string is empty (they still carry summed labels).  Label-free
    constants live in ``constant_offset``.  ``profile`` fixes what ``G_k``
    means for the terms.
    """

    terms: tuple
    constant_offset: float = 0.0
    profile: Profile = field(default_factory=Profile)

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        object.__setattr__(self, "constant_offset", _number(self.constant_offset))

    @property
    def ladder_terms(self) -> tuple:
        return tuple(t for t in self.terms if t.ladder)

    @property
    def scalar_terms(self) -> tuple:
        return tuple(t for t in self.terms if not t.ladder)

    def centered(self) -> "TermList":
        """``H - <0|H|0>``: drop every term with a vanishing ladder string."""
        return TermList(self.ladder_terms, 0, self.profile)

    def is_hermitian(self, rtol: float = 1e-12) -> bool:
        """Check that the conjugate of every term is present likewise."""
        bucket: dict = {}
        for t in self.terms:
            bucket.setdefault(t.signature(), []).append(float(t.coefficient))
        for t in self.terms:
            key = t.adjoint().signature()
            if key not in bucket:
                return False
            mine = sorted(bucket[t.signature()])
            theirs = sorted(bucket[key])
            if len(mine) != len(theirs):
                return False
            if any(abs(a - b) > rtol * max(1.0, abs(a)) for a, b in zip(mine, theirs)):
                return False
        return True


# ---------------------------------------------------------------------------
# symbolic products of per-label factors


def _k(p):
    return RadialFactor(k_power=p)


_V = RadialFactor(coupling_power=1)
_G = RadialFactor(profile_power=1)


class _Expr:
    """Sum of monomials ``coef * prod_label RadialFactor * dots * pdots``."""

    __slots__ = ("monos",)

    def __init__(self, monos):
        self.monos = list(monos)

    @classmethod
    def one(cls, coef=1):
        return cls([(_number(coef), {}, (), ())])

    @classmethod
    def factor(cls, label, rf: RadialFactor, coef=1):
        return cls([(_number(coef), {label: rf}, (), ())])

    @classmethod
    def dot(cls, a, b):
        if a == b:
            return cls([(Fraction(1), {a: _k(2)}, (), ())])
        return cls([(Fraction(1), {}, ((a, b),), ())])

    @classmethod
    def pdot(cls, a):
        return cls([(Fraction(1), {}, (), (a,))])

    def __mul__(self, other):
        if not isinstance(other, _Expr):
            return _Expr([(c * _number(other), f, d, p) for c, f, d, p in self.monos])
        out = []
        for c1, f1, d1, p1 in self.monos:
            for c2, f2, d2, p2 in other.monos:
                f = dict(f1)
                for lab, rf in f2.items():
                    f[lab] = f[lab] * rf if lab in f else rf
                out.append((c1 * c2, f, d1 + d2, p1 + p2))
        return _Expr(out)

    __rmul__ = __mul__

    def __add__(self, other):
        return _Expr(self.monos + other.monos)

    def collected(self) -> "_Expr":
        """Merge monomials with identical factors; drop zero coefficients."""
        acc: dict = {}
        order = []
        for c, f, d, p in self.monos:
            key = (
                tuple(sorted((l, astuple(rf)) for l, rf in f.items() if not rf.trivial)),
                tuple(sorted(tuple(sorted(x)) for x in d)),
                tuple(sorted(p)),
            )
            if key not in acc:
                acc[key] = [0, f, d, p]
                order.append(key)
            acc[key][0] += c
        return _Expr([tuple(acc[k]) for k in order if acc[k][0] != 0])

    def terms(self, labels: Sequence, ladder: Iterable = ()) -> list:
        ladder = tuple(ladder)
        out = []
        on_ladder = {l for l, _ in ladder}
        for c, f, d, p in self.collected().monos:
            used = on_ladder | {x for pair in d for x in pair} | set(p)
            used |= {l for l, rf in f.items() if not rf.trivial}
            # a label with no factor at all would be a free sum over modes
            mine = tuple(l for l in labels if l in used)
            radial = tuple(f.get(l, _ONE) for l in mine)
            out.append(OperatorTerm(c, mine, radial, d, p, ladder))
        return out


def _f(label, choice: FChoice, eta) -> _Expr:
    expr = _Expr.factor(label, _V * _G, -1)
    if choice is FChoice.LINEAR_ELIMINATING and eta != 0:
        expr = expr + _Expr.factor(label, _G, -2 * _number(eta)) * _Expr.pdot(label)
    return expr


def _carries_coupling(term: OperatorTerm) -> bool:
    return any(r.coupling_power for r in term.radial)


def build_hamiltonian(params: ModelParams, eta: float | None = None, explicit_drag: bool = False) -> TermList:
    """Normal-ordered term list of the displaced Hamiltonian ``H(f)``.

    Parameters
    ----------
    params : ModelParams
        Coupling, cutoff, momentum and f choice.
    eta : float, optional
        Drag parameter for the momentum-dependent choices.  Ignored (set to
        zero) for ``simple``, whose isotropic profile carries no drag.
    explicit_drag : bool
        Keep ``sum_m (k.m) f_m^2`` as explicit summed labels instead of
        substituting ``eta * (k.P)``.

    Returns
    -------
    TermList
    """
    choice = FChoice.parse(params.f_choice)
    eta = 0.0 if (choice is FChoice.SIMPLE or eta is None) else float(eta)
    P = params.P
    moving = any(P)
    if not moving:
        eta = 0.0
    P2 = sum(x * x for x in P)
    k, m = "k", "m"
    f_k, f_m = _f(k, choice, eta), _f(m, choice, eta)
    dot = _Expr.dot(k, m)
    pk = _Expr.pdot(k)
    cre = lambda l: (l, True)  # noqa: E731
    ann = lambda l: (l, False)  # noqa: E731

    terms: list = []
    # phonon energy plus the normal-ordered (sum_k k n_k)^2
    terms += _Expr.factor(k, _k(1)).terms([k], [cre(k), ann(k)])
    terms += _Expr.factor(k, _k(2)).terms([k], [cre(k), ann(k)])
    terms += dot.terms([k, m], [cre(k), cre(m), ann(k), ann(m)])

    # -2 (P.k) n_k, with the drag contribution 2 (k . eta P) n_k folded in
    if moving:
        if explicit_drag:
            terms += (pk * -2).terms([k], [cre(k), ann(k)])
            drag_n = dot * f_m * f_m * 2
            terms += drag_n.terms([k, m], [cre(k), ann(k)])
        elif eta != 1.0:
            terms += (pk * (-2 * (1 - _number(eta)))).terms([k], [cre(k), ann(k)])
    elif explicit_drag:
        terms += (dot * f_m * f_m * 2).terms([k, m], [cre(k), ann(k)])

    # linear terms: [(k + k^2 - 2 P.k) f_k + V_k + 2 sum_m (k.m) f_m^2 f_k] (a+ + a)
    if choice is FChoice.SIMPLE:
        linear = pk * f_k * -2 if moving else _Expr([])
    elif choice is FChoice.PSHIFTED:
        linear = pk * f_k * (-2 * _number(eta)) if eta else _Expr([])
    else:
        linear = pk * (-2 * _number(eta)) if eta else _Expr([])
    if explicit_drag:
        linear = linear + dot * f_m * f_m * f_k * 2
    elif eta and moving:
        linear = linear + pk * f_k * (2 * _number(eta))
    labels_lin = [k, m] if explicit_drag else [k]
    terms += linear.terms(labels_lin, [cre(k)])
    terms += linear.terms(labels_lin, [ann(k)])

    # quadratic and cubic blocks from (sum_k k (a+ + f)(a + f))^2
    ff = dot * f_k * f_m
    terms += (ff * 2).terms([k, m], [cre(k), ann(m)])
    terms += ff.terms([k, m], [cre(k), cre(m)])
    terms += ff.terms([k, m], [ann(k), ann(m)])
    cubic = dot * f_k * 2
    terms += cubic.terms([k, m], [cre(m), ann(m), ann(k)])
    terms += cubic.terms([k, m], [cre(k), cre(m), ann(m)])

    # scalars: 2 V f + (k + k^2) f^2 - 2 (P.k) f^2 + |sum f^2 k|^2
    Vk = _Expr.factor(k, _V)
    if choice is FChoice.SIMPLE:
        # (k + k^2) G = 1 collapses 2 V f + (k + k^2) f^2 to -V^2 G
        scalar = _Expr.factor(k, _V * _V * _G, -1)
    else:
        scalar = Vk * f_k * 2 + _Expr.factor(k, _k(1)) * f_k * f_k
        scalar = scalar + _Expr.factor(k, _k(2)) * f_k * f_k
    if moving:
        scalar = scalar + pk * f_k * f_k * -2
    terms += scalar.terms([k])
    offset = _number(P2)
    if explicit_drag:
        terms += (dot * f_k * f_k * f_m * f_m).terms([k, m])
    else:
        offset += _number(eta) ** 2 * P2

    if params.alpha == 0:
        terms = [t for t in terms if not _carries_coupling(t)]
    return TermList(terms, offset, Profile(choice, P, eta))
