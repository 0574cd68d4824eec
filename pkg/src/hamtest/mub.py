"""Stabilizer covers of the Pauli group and the mutually unbiased bases they define.

The ``d + 1`` maximal commuting classes come from a symplectic spread over
GF(2^n): for every field element ``a`` the strings ``(x, M_a x)`` form a
Lagrangian subspace, where ``M_a[p, q] = Tr(a w^{p+q})`` is the trace-form
Hankel matrix in the polynomial basis ``1, w, ..., w^{n-1}``.  Adding the
all-Z subspace gives ``d + 1`` subspaces that pairwise meet only in zero.

Group ``i`` stabilises the basis ``{|phi_{i,j}>}``; state ``j`` is
``P(r_j)|phi_{i,0}>`` where ``r_j`` is the ``j``-th coset label.
"""

from __future__ import annotations

import threading
from collections import OrderedDict
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .config import dense_cap, require_dense
from .errors import ConsistencyError, InvalidGroupError, ResourceLimitError, ValidationError
from .pauli import (
    PauliString,
    SignedPauli,
    apply_pauli,
    commutation_bit,
    index_mask,
    index_masks,
    lex_ordered_bits,
    parity,
    parse_pauli,
)

# Basis matrices kept per family, in bytes.
_BASIS_CACHE_BYTES = 256 * 2**20


# ---------------------------------------------------------------------------
# GF(2^n) arithmetic
# ---------------------------------------------------------------------------


def _poly_mod(a: int, m: int) -> int:
    dm = m.bit_length()
    while a.bit_length() >= dm:
        a ^= m << (a.bit_length() - dm)
    return a


@lru_cache(maxsize=None)
def irreducible_polynomial(n: int) -> int:
    """Smallest irreducible binary polynomial of degree ``n`` (bit k = coefficient of x^k)."""
    for cand in range((1 << n) | 1, 1 << (n + 1), 2):
        if all(
            _poly_mod(cand, f) != 0
            for deg in range(1, n // 2 + 1)
            for f in range(1 << deg, 1 << (deg + 1))
        ):
            return cand
    raise ConsistencyError(f"no irreducible polynomial of degree {n}")  # pragma: no cover


def gf_mul(a: int, b: int, poly: int) -> int:
    acc = 0
    while b:
        if b & 1:
            acc ^= a
        b >>= 1
        a <<= 1
    return _poly_mod(acc, poly)


def gf_trace(a: int, n: int, poly: int) -> int:
    """Absolute trace ``a + a^2 + a^4 + ...``; always 0 or 1."""
    acc, power = 0, a
    for _ in range(n):
        acc ^= power
        power = gf_mul(power, power, poly)
    if acc not in (0, 1):
        raise ConsistencyError("field trace left the prime field")
    return acc


def spread_generators(n: int) -> list[list[PauliString]]:
    """Generators of the ``2**n + 1`` Lagrangian subspaces of the GF(2^n) spread.

    Entry ``a < 2**n`` holds the strings ``(e_q, M_a e_q)``; the last entry is
    the all-Z subspace.  Generator ``q`` always involves qubit ``q``.
    """
    poly = irreducible_polynomial(n)
    w_pow = [1]
    for _ in range(2 * n - 2):
        w_pow.append(gf_mul(w_pow[-1], 2, poly))
    families: list[list[PauliString]] = []
    for a in range(1 << n):
        hankel = [gf_trace(gf_mul(a, w, poly), n, poly) for w in w_pow]
        gens = []
        for q in range(n):
            z = sum(hankel[p + q] << p for p in range(n))
            gens.append(PauliString(n, 1 << q, z))
        families.append(gens)
    families.append([PauliString(n, 0, 1 << q) for q in range(n)])
    return families


# ---------------------------------------------------------------------------
# Stabilizer groups
# ---------------------------------------------------------------------------


def _symplectic_vector(p: PauliString) -> int:
    return p.x | (p.z << p.n)


def _reduce(vec: int, pivots: dict[int, int]) -> int:
    for bit in sorted(pivots, reverse=True):
        if (vec >> bit) & 1:
            vec ^= pivots[bit]
    return vec


def _independent_subset(paulis: Sequence[PauliString]) -> list[PauliString]:
    """Greedy F2-basis of the span of ``paulis`` (Gaussian elimination)."""
    pivots: dict[int, int] = {}
    chosen = []
    for p in paulis:
        v = _reduce(_symplectic_vector(p), pivots)
        if v:
            pivots[v.bit_length() - 1] = v
            chosen.append(p)
    return chosen


@dataclass(eq=False)
class StabilizerGroup:
    """A signed maximal commuting subgroup described by ``n`` generators.

    The member list is generated lazily: member ``m`` is the ordered product
    of the generators selected by the bits of ``m``, with exact phases.
    """

    generators: tuple[SignedPauli, ...]
    index: int = 0
    _member_cache: tuple[np.ndarray, np.ndarray, np.ndarray] | None = field(
        default=None, init=False, repr=False
    )
    _state_cache: np.ndarray | None = field(default=None, init=False, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, init=False, repr=False)

    def __post_init__(self) -> None:
        gens = self.generators
        if not gens:
            raise InvalidGroupError("a stabilizer group needs at least one generator")
        n = gens[0].n
        if len(gens) != n or any(g.n != n for g in gens):
            raise InvalidGroupError(f"expected {n} generators on {n} qubits")
        for a in range(n):
            if gens[a].phase % 2:
                raise InvalidGroupError(f"generator {gens[a]} has an imaginary phase")
            for b in range(a + 1, n):
                if commutation_bit(gens[a].pauli, gens[b].pauli):
                    raise InvalidGroupError(f"generators {gens[a]} and {gens[b]} anticommute")
        if len(_independent_subset([g.pauli for g in gens])) != n:
            raise InvalidGroupError("generators are not independent over F2")

    @property
    def n(self) -> int:
        return self.generators[0].n

    @property
    def d(self) -> int:
        return 1 << self.n

    def contains(self, q: PauliString) -> bool:
        """Unsigned membership: ``q`` commutes with every generator."""
        return all(commutation_bit(q, g.pauli) == 0 for g in self.generators)

    def syndrome(self, q: PauliString) -> int:
        """Bit ``k`` is the commutation bit of ``q`` with generator ``k``."""
        s = 0
        for k, g in enumerate(self.generators):
            s |= commutation_bit(q, g.pauli) << k
        return s

    def member_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(x, z, phase)`` of all ``d`` signed members, indexed by generator subset."""
        with self._lock:
            if self._member_cache is None:
                x = np.zeros(1, dtype=np.int64)
                z = np.zeros(1, dtype=np.int64)
                ph = np.zeros(1, dtype=np.int64)
                for g in self.generators:
                    gx, gz, gph = g.pauli.x, g.pauli.z, g.phase
                    nx, nz = x ^ gx, z ^ gz
                    nph = (
                        ph + gph
                        + np.bitwise_count((x & z).astype(np.uint64))
                        + bin(gx & gz).count("1")
                        + 2 * np.bitwise_count((z & gx).astype(np.uint64))
                        - np.bitwise_count((nx & nz).astype(np.uint64))
                    ).astype(np.int64) % 4
                    x, z, ph = np.concatenate([x, nx]), np.concatenate([z, nz]), np.concatenate([ph, nph])
                if np.any(ph % 2):
                    raise ConsistencyError("signed members acquired an imaginary phase")
                for arr in (x, z, ph):
                    arr.setflags(write=False)
                self._member_cache = (x, z, ph)
        return self._member_cache

    @property
    def members(self) -> list[SignedPauli]:
        x, z, ph = self.member_arrays()
        n = self.n
        return [SignedPauli(PauliString(n, a, b), c) for a, b, c in zip(x.tolist(), z.tolist(), ph.tolist())]

    def sign_of(self, q: PauliString) -> int:
        """Sign ``zeta`` carried by member ``q``; raises if ``q`` is not a member."""
        if not self.contains(q):
            raise ValidationError(f"{q} is not in group {self.index}")
        x, z, ph = self.member_arrays()
        hit = np.flatnonzero((x == q.x) & (z == q.z))
        return 1 if ph[hit[0]] == 0 else -1

    def canonical_state(self) -> np.ndarray:
        """Common +1 eigenvector of all signed members, with a fixed global phase.

        Obtained by applying ``sum_p S(p)`` to a computational basis vector
        ``e_c``; every term maps ``e_c`` to a single basis vector, so the
        projection costs O(d) per attempted ``c``.
        """
        with self._lock:
            cached = self._state_cache
        if cached is not None:
            return cached
        n, d = self.n, self.d
        require_dense(n, "stabilizer state")
        x, z, ph = self.member_arrays()
        xm, zm = index_masks(x, n), index_masks(z, n)
        scalar = 1j ** ((ph + np.bitwise_count((x & z).astype(np.uint64)).astype(np.int64)) % 4)
        vec = None
        for c in range(d):
            v = np.zeros(d, dtype=complex)
            np.add.at(v, xm ^ c, scalar * (1 - 2 * parity(zm & c)))
            if np.vdot(v, v).real / d**2 >= 1.0 / d - 1e-9:
                vec = v
                break
        if vec is None:
            raise ConsistencyError(f"group {self.index}: projector has no rank-one image")
        vec /= np.linalg.norm(vec)
        pivot = int(np.argmax(np.abs(vec) > np.abs(vec).max() - 1e-12))
        vec *= np.exp(-1j * np.angle(vec[pivot]))
        for g in self.generators:
            if np.max(np.abs(apply_pauli(g, vec) - vec)) > 1e-9:
                raise ConsistencyError(f"group {self.index}: state is not stabilised by {g}")
        vec.setflags(write=False)
        with self._lock:
            self._state_cache = vec
        return vec

    @property
    def kind(self) -> str | None:
        """Structural tag enabling fast measurement: ``"graph"``, ``"z"`` or ``None``."""
        if all(g.pauli.x == 1 << q for q, g in enumerate(self.generators)):
            return "graph"
        if all(
            g.pauli.x == 0 and g.pauli.z == 1 << q and g.phase == 0
            for q, g in enumerate(self.generators)
        ):
            return "z"
        return None


def fix_signs(group: Iterable[PauliString], index: int = 0) -> StabilizerGroup:
    """Turn a maximal commuting set of unsigned strings into a signed group.

    Independent generators are extracted by elimination and given sign +1;
    every other member inherits the sign of the generator product.
    """
    paulis = list(dict.fromkeys(group))
    if not paulis:
        raise InvalidGroupError("empty Pauli set")
    n = paulis[0].n
    if any(p.n != n for p in paulis):
        raise InvalidGroupError("mixed qubit counts")
    nonid = [p for p in paulis if not p.is_identity]
    gens = _independent_subset(nonid)
    for a in range(len(gens)):
        for b in range(a + 1, len(gens)):
            if commutation_bit(gens[a], gens[b]):
                raise InvalidGroupError(f"{gens[a]} and {gens[b]} anticommute")
    if len(gens) != n:
        raise InvalidGroupError(f"rank {len(gens)} is not maximal for {n} qubits")
    pivots: dict[int, int] = {}
    for g in gens:
        v = _reduce(_symplectic_vector(g), pivots)
        pivots[v.bit_length() - 1] = v
    if any(_reduce(_symplectic_vector(p), pivots) for p in nonid):
        raise InvalidGroupError("set is not closed: an element lies outside the generated group")
    if len(set(paulis) | {PauliString.identity(n)}) != 1 << n:
        raise InvalidGroupError(f"set has {len(paulis)} elements, expected {1 << n}")
    return StabilizerGroup(tuple(SignedPauli(g, 0) for g in gens), index)


# ---------------------------------------------------------------------------
# The family
# ---------------------------------------------------------------------------


def fwht(a: np.ndarray) -> np.ndarray:
    """Unnormalised Walsh-Hadamard transform along axis 0 (Sylvester order)."""
    a = np.array(a, dtype=complex, copy=True)
    d = a.shape[0]
    rest = a.shape[1:]
    h = 1
    while h < d:
        a = a.reshape((d // (2 * h), 2, h) + rest)
        lo, hi = a[:, 0], a[:, 1]
        a = np.stack((lo + hi, lo - hi), axis=1)
        h *= 2
    return a.reshape((d,) + rest)


class MubFamily:
    """``d + 1`` stabilizer groups with their coset labels and basis states.

    Coset labels, canonical states and basis matrices are computed on first
    use and cached; the family is otherwise immutable.
    """

    def __init__(self, groups: Sequence[StabilizerGroup]):
        if not groups:
            raise InvalidGroupError("empty family")
        self.groups: tuple[StabilizerGroup, ...] = tuple(groups)
        self.n = self.groups[0].n
        self.d = 1 << self.n
        if len(self.groups) != self.d + 1:
            raise InvalidGroupError(f"expected {self.d + 1} groups, got {len(self.groups)}")
        self._labels: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
        self._bases: OrderedDict[int, np.ndarray] = OrderedDict()
        self._max_bases = max(1, _BASIS_CACHE_BYTES // (16 * self.d * self.d))
        self._lock = threading.Lock()

    @property
    def num_bases(self) -> int:
        return self.d + 1

    def _check(self, i: int, j: int | None = None) -> None:
        if not 0 <= i <= self.d:
            raise ValidationError(f"basis index {i} out of range [0, {self.d}]")
        if j is not None and not 0 <= j < self.d:
            raise ValidationError(f"state index {j} out of range [0, {self.d - 1}]")

    # -- labels -----------------------------------------------------------

    def label_table(self, i: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(x, z, syndrome)`` arrays of the ``d`` coset labels of group ``i``.

        The label of each coset is its lexicographically smallest literal
        (which is what a greedy scan in literal order selects), and labels are
        listed in that scan order, so label 0 is the identity.
        """
        self._check(i)
        with self._lock:
            hit = self._labels.get(i)
        if hit is not None:
            return hit
        if self.n > dense_cap():
            raise ResourceLimitError(f"coset enumeration on {self.n} qubits exceeds the dense cap")
        xs, zs = lex_ordered_bits(self.n)
        syn = np.zeros(xs.shape, dtype=np.int64)
        xs_u, zs_u = xs.astype(np.uint64), zs.astype(np.uint64)
        for k, g in enumerate(self.groups[i].generators):
            gx, gz = np.uint64(g.pauli.x), np.uint64(g.pauli.z)
            syn |= (np.bitwise_count((xs_u & gz) ^ (zs_u & gx)).astype(np.int64) & 1) << k
        _, first = np.unique(syn, return_index=True)
        if first.size != self.d:
            raise ConsistencyError(f"group {i}: found {first.size} cosets, expected {self.d}")
        first.sort()
        table = (xs[first].copy(), zs[first].copy(), syn[first].copy())
        for arr in table:
            arr.setflags(write=False)
        with self._lock:
            self._labels[i] = table
        return table

    def labels(self, i: int) -> list[PauliString]:
        x, z, _ = self.label_table(i)
        return [PauliString(self.n, a, b) for a, b in zip(x.tolist(), z.tolist())]

    def label(self, i: int, j: int) -> PauliString:
        self._check(i, j)
        x, z, _ = self.label_table(i)
        return PauliString(self.n, int(x[j]), int(z[j]))

    def label_syndromes(self, i: int) -> np.ndarray:
        return self.label_table(i)[2]

    # -- states -----------------------------------------------------------

    def state(self, i: int, j: int) -> np.ndarray:
        self._check(i, j)
        base = self.groups[i].canonical_state()
        if j == 0:
            return base.copy()
        return apply_pauli(self.label(i, j), base)

    def basis(self, i: int) -> np.ndarray:
        """Columns are ``|phi_{i,0}>, ..., |phi_{i,d-1}>``."""
        self._check(i)
        with self._lock:
            if i in self._bases:
                self._bases.move_to_end(i)
                return self._bases[i]
        n, d = self.n, self.d
        base = self.groups[i].canonical_state()
        x, z, _ = self.label_table(i)
        xm, zm = index_masks(x, n), index_masks(z, n)
        scalar = 1j ** (np.bitwise_count((x & z).astype(np.uint64)).astype(np.int64) % 4)
        src = np.arange(d)[:, None] ^ xm[None, :]
        mat = scalar[None, :] * (1 - 2 * parity(src & zm[None, :])) * base[src]
        mat.setflags(write=False)
        with self._lock:
            self._bases[i] = mat
            while len(self._bases) > self._max_bases:
                self._bases.popitem(last=False)
        return mat

    def outcome_probabilities(self, i: int, vectors: np.ndarray) -> np.ndarray:
        """Born probabilities of measuring ``vectors`` (a state or columns of states) in basis ``i``.

        Groups built from the spread use a Walsh-Hadamard shortcut in
        O(d log d) per state; any other group falls back to the dense basis.
        """
        self._check(i)
        w = np.asarray(vectors)
        group = self.groups[i]
        kind = group.kind
        syn_idx = index_masks(self.label_syndromes(i), self.n)
        if kind == "graph":
            base = group.canonical_state()
            weighted = base.conj()[:, None] * w if w.ndim == 2 else base.conj() * w
            amps = fwht(weighted)[syn_idx]
        elif kind == "z" and abs(group.canonical_state()[0] - 1) < 1e-12:
            amps = w[syn_idx]
        else:
            amps = self.basis(i).conj().T @ w
        return np.abs(amps) ** 2

    # -- membership -------------------------------------------------------

    def contains(self, i: int, q: PauliString) -> bool:
        self._check(i)
        return self.groups[i].contains(q)


@lru_cache(maxsize=4)
def build_mub_family(n: int) -> MubFamily:
    """The GF(2^n) spread family on ``n`` qubits (cached per ``n``)."""
    if n < 1:
        raise ValidationError(f"need at least one qubit, got {n}")
    require_dense(n, "MUB family")
    groups = [
        StabilizerGroup(tuple(SignedPauli(g, 0) for g in gens), index)
        for index, gens in enumerate(spread_generators(n))
    ]
    return MubFamily(groups)


def coset_labels(family: MubFamily, i: int) -> list[PauliString]:
    return family.labels(i)


def stabilizer_state_vector(family: MubFamily, i: int, j: int) -> np.ndarray:
    return family.state(i, j)


def group_membership(family: MubFamily, i: int, q: PauliString) -> bool:
    return family.contains(i, q)


# ---------------------------------------------------------------------------
# Exhaustive cross-check construction
# ---------------------------------------------------------------------------


def _lagrangian_subspaces(n: int) -> list[frozenset[PauliString]]:
    from .pauli import all_paulis

    nonid = list(all_paulis(n, include_identity=False))
    found: set[frozenset[PauliString]] = set()

    def grow(gens: list[PauliString], start: int) -> None:
        if len(gens) == n:
            members = {PauliString.identity(n)}
            for g in gens:
                members |= {PauliString(n, m.x ^ g.x, m.z ^ g.z) for m in members}
            found.add(frozenset(members))
            return
        for idx in range(start, len(nonid)):
            p = nonid[idx]
            if all(commutation_bit(p, g) == 0 for g in gens) and len(_independent_subset(gens + [p])) == len(gens) + 1:
                grow(gens + [p], idx + 1)

    grow([], 0)
    return sorted(found, key=lambda s: sorted(p.sort_key() for p in s))


def exhaustive_mub_family(n: int) -> MubFamily:
    """Independent construction by exact-cover search over all maximal commuting sets.

    Only practical for ``n <= 2``; used to cross-check the spread construction.
    """
    if n > 2:
        raise ResourceLimitError("exhaustive cover search is limited to n <= 2")
    subspaces = _lagrangian_subspaces(n)
    identity = PauliString.identity(n)
    targets = [p for p in sorted({p for s in subspaces for p in s}, key=PauliString.sort_key) if p != identity]

    def search(covered: frozenset[PauliString], chosen: list[frozenset[PauliString]]):
        missing = next((p for p in targets if p not in covered), None)
        if missing is None:
            return chosen
        for s in subspaces:
            if missing in s and not (s - {identity}) & covered:
                result = search(covered | (s - {identity}), chosen + [s])
                if result is not None:
                    return result
        return None

    cover = search(frozenset(), [])
    if cover is None or len(cover) != (1 << n) + 1:
        raise ConsistencyError("exhaustive search found no stabilizer cover")
    return MubFamily([fix_signs(sorted(s, key=PauliString.sort_key), index=k) for k, s in enumerate(cover)])


# ---------------------------------------------------------------------------
# Plain-text fixture format
# ---------------------------------------------------------------------------


def dump_family(family: MubFamily) -> str:
    """Serialise generators, signs and coset labels of every group."""
    lines = ["# stabilizer MUB family", f"n {family.n}"]
    for g in family.groups:
        lines.append(f"group {g.index}")
        lines.append("generators " + " ".join(s.literal for s in g.generators))
        lines.append("labels " + " ".join(p.label for p in family.labels(g.index)))
    return "\n".join(lines) + "\n"


def load_family(text: str) -> MubFamily:
    """Inverse of :func:`dump_family`; labels are recomputed and must agree."""
    n = None
    groups: list[StabilizerGroup] = []
    expected_labels: list[list[str]] = []
    index = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, _, rest = line.partition(" ")
        if key == "n":
            n = int(rest)
        elif key == "group":
            index = int(rest)
        elif key == "generators":
            if index is None:
                raise ValidationError("generators line before group header")
            groups.append(StabilizerGroup(tuple(parse_pauli(t) for t in rest.split()), index))
        elif key == "labels":
            expected_labels.append(rest.split())
        else:
            raise ValidationError(f"unrecognised fixture line: {raw!r}")
    if n is None or not groups:
        raise ValidationError("fixture is missing the qubit count or groups")
    family = MubFamily(groups)
    if family.n != n:
        raise ValidationError(f"header says n={n} but generators act on {family.n} qubits")
    for g, want in zip(family.groups, expected_labels):
        got = [p.label for p in family.labels(g.index)]
        if got != want:
            raise ConsistencyError(f"group {g.index}: stored labels disagree with recomputed labels")
    return family


__all__ = [
    "MubFamily",
    "StabilizerGroup",
    "build_mub_family",
    "coset_labels",
    "dump_family",
    "exhaustive_mub_family",
    "fix_signs",
    "fwht",
    "group_membership",
    "index_mask",
    "load_family",
    "spread_generators",
    "stabilizer_state_vector",
]
