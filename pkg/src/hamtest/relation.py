"""The relation ``phi_{i,l} ~_S phi_{i,j}`` between states of one basis.

Two states of basis ``i`` are related when some ``q`` in ``S u {I}`` maps one
onto the other up to phase, which happens exactly when ``r_l r_j q`` lies in
``G_i``.  Membership in ``G_i`` is decided by commutation with its
generators, so everything reduces to syndromes: with ``syn_i`` the vector of
commutation bits against the generators of ``G_i``, the states are related
iff ``syn_i(r_l) xor syn_i(r_j)`` equals ``syn_i(q)`` for some ``q``.
"""

from __future__ import annotations

import threading

import numpy as np

from .errors import DimensionError
from .hamiltonian import PropertySet
from .mub import MubFamily
from .pauli import PauliString, multiply_strings


def relates_under_property(family: MubFamily, i: int, j: int, l: int, s: PropertySet) -> bool:
    """Reference implementation: test ``r_l r_j q in G_i`` for each ``q`` in ``S u {I}``."""
    if s.n != family.n:
        raise DimensionError(f"property acts on {s.n} qubits, family on {family.n}")
    rr = multiply_strings(family.label(i, l), family.label(i, j))
    return any(family.contains(i, multiply_strings(rr, q)) for q in s.with_identity())


class RelationChecker:
    """Vectorised relation lookups for one (family, property) pair.

    ``allowed(i)[v]`` is true when syndrome ``v`` is the syndrome of some
    element of ``S u {I}`` with respect to ``G_i``.
    """

    def __init__(self, family: MubFamily, s: PropertySet):
        if s.n != family.n:
            raise DimensionError(f"property acts on {s.n} qubits, family on {family.n}")
        self.family = family
        self.property = s
        elems = s.with_identity()
        self._sx = np.array([p.x for p in elems], dtype=np.uint64)
        self._sz = np.array([p.z for p in elems], dtype=np.uint64)
        self._allowed: dict[int, np.ndarray] = {}
        self._lock = threading.Lock()

    def allowed(self, i: int) -> np.ndarray:
        with self._lock:
            hit = self._allowed.get(i)
        if hit is not None:
            return hit
        syn = np.zeros(self._sx.shape, dtype=np.int64)
        for k, g in enumerate(self.family.groups[i].generators):
            gx, gz = np.uint64(g.pauli.x), np.uint64(g.pauli.z)
            syn |= (np.bitwise_count((self._sx & gz) ^ (self._sz & gx)).astype(np.int64) & 1) << k
        table = np.zeros(self.family.d, dtype=bool)
        table[syn] = True
        table.setflags(write=False)
        with self._lock:
            self._allowed[i] = table
        return table

    def related(self, i: int, j: int, l: int) -> bool:
        syn = self.family.label_syndromes(i)
        return bool(self.allowed(i)[syn[j] ^ syn[l]])

    def violation_matrix(self, i: int) -> np.ndarray:
        """Boolean ``(d, d)`` array, entry ``[l, j]`` true when ``l`` and ``j`` are unrelated."""
        syn = self.family.label_syndromes(i)
        return ~self.allowed(i)[syn[:, None] ^ syn[None, :]]

    def violations(self, bases: np.ndarray, states: np.ndarray, outcomes: np.ndarray) -> np.ndarray:
        """Vectorised ``not related`` over aligned arrays of rounds."""
        bases = np.asarray(bases)
        out = np.zeros(bases.shape, dtype=bool)
        for i in np.unique(bases):
            sel = bases == i
            syn = self.family.label_syndromes(int(i))
            out[sel] = ~self.allowed(int(i))[syn[states[sel]] ^ syn[outcomes[sel]]]
        return out


def lift_pauli(p: PauliString, n_aux: int) -> PauliString:
    return p if n_aux == 0 else p.tensor(PauliString.identity(n_aux))
