"""Brute-force vacuum moments on a truncated Fock space.

Independent of the pairing enumeration in :mod:`piezopolaron.wick`: every
term is expanded over explicit mode assignments, turned into a sparse
matrix on the occupation-number basis, and ``<0|H^m|0>`` is obtained by
repeated matrix-vector products starting from the vacuum.
"""
from __future__ import annotations

import itertools
import math

import numpy as np
from scipy import sparse

from .errors import DomainError, ResourceError
from .model import TermList

__all__ = ["fock_basis", "fock_matrix", "fock_oracle"]

MAX_BASIS = 200_000


def fock_basis(n_modes: int, cap: int) -> list:
    """Occupation tuples with total occupation ``<= cap``."""
    size = math.comb(cap + n_modes, n_modes)
    if size > MAX_BASIS:
        raise ResourceError(f"Fock basis of {size} states exceeds {MAX_BASIS}", attempted=size)
    out = []
    for occ in itertools.product(range(cap + 1), repeat=n_modes):
        if sum(occ) <= cap:
            out.append(occ)
    out.sort(key=lambda o: (sum(o), o))
    return out


def _mode_data(measure, profile, alpha):
    K = np.array([m.wavevector for m in measure.modes])
    kmag = np.linalg.norm(K, axis=1)
    w = np.array([m.weight for m in measure.modes])
    V = np.sqrt(alpha * w / (2.0 * np.pi**2 * kmag))
    G = profile.G(K)
    kP = K @ np.asarray(profile.P)
    return K, kmag, V, G, kP


def _apply_ladder(occ, ladder):
    """Apply a ladder string (rightmost first) to one occupation tuple."""
    state = list(occ)
    amp = 1.0
    for mode, creation in reversed(ladder):
        if creation:
            state[mode] += 1
            amp *= math.sqrt(state[mode])
        else:
            if state[mode] == 0:
                return None, 0.0
            amp *= math.sqrt(state[mode])
            state[mode] -= 1
    return tuple(state), amp


def fock_matrix(terms: TermList, measure, alpha: float, cap: int):
    """Sparse matrix of the term list on the truncated basis."""
    if measure.is_continuum:
        raise DomainError("fock_oracle needs a discrete measure")
    n_modes = len(measure.modes)
    basis = fock_basis(n_modes, cap)
    index = {occ: i for i, occ in enumerate(basis)}
    K, kmag, V, G, kP = _mode_data(measure, terms.profile, alpha)
    rows, cols, vals = [], [], []
    diag = float(terms.constant_offset)
    for term in terms.terms:
        pos = {l: i for i, l in enumerate(term.labels)}
        for assign in itertools.product(range(n_modes), repeat=len(term.labels)):
            c = float(term.coefficient)
            for label, rf in zip(term.labels, term.radial):
                i = assign[pos[label]]
                c *= kmag[i] ** rf.k_power * G[i] ** rf.profile_power * V[i] ** rf.coupling_power
            for a, b in term.dots:
                c *= float(K[assign[pos[a]]] @ K[assign[pos[b]]])
            for a in term.momentum_dots:
                c *= kP[assign[pos[a]]]
            if c == 0.0:
                continue
            if not term.ladder:
                diag += c
                continue
            ladder = [(assign[pos[l]], cr) for l, cr in term.ladder]
            for j, occ in enumerate(basis):
                new, amp = _apply_ladder(occ, ladder)
                if new is None or new not in index:
                    continue
                rows.append(index[new])
                cols.append(j)
                vals.append(c * amp)
    dim = len(basis)
    H = sparse.coo_matrix((vals, (rows, cols)), shape=(dim, dim)).tocsr()
    H = H + diag * sparse.identity(dim, format="csr")
    return H, basis


def fock_oracle(terms: TermList, measure, m: int, occupation_cap: int | None = None, alpha: float = 1.0) -> float:
    """``<0|H^m|0>`` by matrix powers on a truncated Fock space.

    ``occupation_cap`` bounds the total phonon number; ``cap >= m`` makes
    the truncation exact, since each factor changes the occupation by at
    most two and the product must return to the vacuum.
    """
    if m < 0:
        raise DomainError("moment order must be non-negative")
    if measure.is_continuum or len(measure.modes) > 4:
        raise DomainError("fock_oracle supports discrete measures with <= 4 modes")
    cap = m if occupation_cap is None else occupation_cap
    if cap < m:
        raise DomainError("occupation_cap must be >= m for an exact truncation")
    if m == 0:
        return 1.0
    H, basis = fock_matrix(terms, measure, alpha, cap)
    v = np.zeros(len(basis))
    v[0] = 1.0
    w = v
    for _ in range(m):
        w = H @ w
    return float(v @ w)
