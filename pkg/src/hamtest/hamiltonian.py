"""Hamiltonians in the Pauli basis, property sets and distances.

A :class:`PauliHamiltonian` is the sparse map ``P -> alpha_P`` with
``H = sum_P alpha_P P``; by Parseval ``(1/d)||H||_2^2 = sum_P alpha_P^2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations, product
from math import comb
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping, Union

import numpy as np

from .config import require_dense
from .errors import DimensionError, ValidationError
from .haar import haar_unitary, haar_vectors
from .mub import fwht
from .pauli import PauliString, index_mask, index_masks, parity

_DROP_TOL = 1e-13


@dataclass(frozen=True)
class PauliHamiltonian:
    """Real Pauli coefficients, identity excluded, stored in literal order."""

    n: int
    coeffs: Mapping[PauliString, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        clean: dict[PauliString, float] = {}
        for p, a in sorted(self.coeffs.items(), key=lambda kv: kv[0].sort_key()):
            if p.n != self.n:
                raise DimensionError(f"term {p} acts on {p.n} qubits, expected {self.n}")
            if p.is_identity:
                raise ValidationError("identity coefficient is not representable")
            a = float(a)
            if not np.isfinite(a):
                raise ValidationError(f"non-finite coefficient for {p}")
            if a != 0.0:
                clean[p] = a
        object.__setattr__(self, "coeffs", MappingProxyType(clean))

    @classmethod
    def from_labels(cls, terms: Mapping[str, float]) -> PauliHamiltonian:
        parsed = {PauliString.from_label(k): v for k, v in terms.items()}
        if not parsed:
            raise ValidationError("use PauliHamiltonian(n) for the zero Hamiltonian")
        return cls(next(iter(parsed)).n, parsed)

    def support(self) -> frozenset[PauliString]:
        return frozenset(self.coeffs)

    def squared_norm(self) -> float:
        """``sum_P alpha_P^2``, the squared normalised Frobenius norm."""
        return float(sum(a * a for a in self.coeffs.values()))

    def __add__(self, other: PauliHamiltonian) -> PauliHamiltonian:
        _same_n(self.n, other.n)
        out = dict(self.coeffs)
        for p, a in other.coeffs.items():
            out[p] = out.get(p, 0.0) + a
        return PauliHamiltonian(self.n, out)

    def scaled(self, factor: float) -> PauliHamiltonian:
        return PauliHamiltonian(self.n, {p: a * factor for p, a in self.coeffs.items()})

    def __sub__(self, other: PauliHamiltonian) -> PauliHamiltonian:
        return self + other.scaled(-1.0)


@dataclass(frozen=True, eq=False)
class DenseHamiltonian:
    n: int
    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=complex)
        d = 1 << self.n
        if m.shape != (d, d):
            raise DimensionError(f"matrix shape {m.shape} does not match {self.n} qubits")
        if not np.allclose(m, m.conj().T, atol=1e-12, rtol=0):
            raise ValidationError("matrix is not Hermitian")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def d(self) -> int:
        return 1 << self.n


@dataclass(frozen=True)
class PropertySet:
    """The Pauli strings ``S`` allowed in the expansion; the identity is implicit."""

    n: int
    paulis: frozenset[PauliString] = frozenset()

    def __post_init__(self) -> None:
        ps = frozenset(p for p in self.paulis if not p.is_identity)
        if any(p.n != self.n for p in ps):
            raise DimensionError(f"property elements must act on {self.n} qubits")
        object.__setattr__(self, "paulis", ps)

    @classmethod
    def from_labels(cls, labels: Iterable[str], n: int | None = None) -> PropertySet:
        ps = [PauliString.from_label(s) for s in labels]
        if n is None:
            if not ps:
                raise ValidationError("cannot infer n from an empty label list")
            n = ps[0].n
        return cls(n, frozenset(ps))

    def __len__(self) -> int:
        return len(self.paulis)

    def __contains__(self, p: object) -> bool:
        return p in self.paulis

    @property
    def size_with_identity(self) -> int:
        """``|S u {I}|``."""
        return len(self.paulis) + 1

    def sorted(self) -> list[PauliString]:
        return sorted(self.paulis, key=PauliString.sort_key)

    def with_identity(self) -> list[PauliString]:
        return [PauliString.identity(self.n)] + self.sorted()

    def lifted(self, n_aux: int) -> PropertySet:
        """``S (x) I`` on ``n + n_aux`` qubits, ancillas appended after the system."""
        if n_aux == 0:
            return self
        pad = PauliString.identity(n_aux)
        return PropertySet(self.n + n_aux, frozenset(p.tensor(pad) for p in self.paulis))


Hamiltonian = Union[PauliHamiltonian, DenseHamiltonian]


def _same_n(a: int, b: int) -> None:
    if a != b:
        raise DimensionError(f"qubit counts differ: {a} vs {b}")


# ---------------------------------------------------------------------------
# Conversions
# ---------------------------------------------------------------------------


def pauli_decompose(m: DenseHamiltonian | np.ndarray) -> PauliHamiltonian:
    """Coefficients ``alpha_P = Tr(HP)/d`` for all ``4**n`` strings at once.

    For a fixed X-part the traces over all Z-parts form one Walsh-Hadamard
    transform of a generalised diagonal of ``H``, so the cost is O(d^2 log d).
    Matrices with a nonzero identity component are rejected because that
    component cannot be represented.
    """
    dense = m if isinstance(m, DenseHamiltonian) else DenseHamiltonian(_n_of(np.asarray(m)), m)
    n, d, h = dense.n, dense.d, dense.matrix
    if abs(np.trace(h)) / d > 1e-10:
        raise ValidationError("matrix has a nonzero identity component (trace)")
    c = np.arange(d)
    masks = np.arange(d)
    diag = h[c[:, None], c[:, None] ^ masks[None, :]]  # diag[c, xm] = H[c, c ^ xm]
    traces = fwht(diag)  # traces[zm, xm] = sum_c (-1)^{zm.c} H[c, c ^ xm]
    rev = index_masks(np.arange(d), n)  # mask <-> qubit bit vector (an involution)
    xs, zs = np.meshgrid(rev, rev)  # xs[zm, xm] = x bits, zs[zm, xm] = z bits
    phase = 1j ** (np.bitwise_count((xs & zs).astype(np.uint64)).astype(np.int64) % 4)
    alpha = phase * traces / d
    if np.max(np.abs(alpha.imag)) > 1e-9:
        raise ValidationError("Pauli coefficients are not real; matrix is not Hermitian")
    coeffs = {}
    for zm, xm in zip(*np.nonzero(np.abs(alpha.real) > _DROP_TOL)):
        if zm == 0 and xm == 0:
            continue
        coeffs[PauliString(n, int(rev[xm]), int(rev[zm]))] = float(alpha.real[zm, xm])
    return PauliHamiltonian(n, coeffs)


def _n_of(m: np.ndarray) -> int:
    d = m.shape[0]
    n = d.bit_length() - 1
    if d < 2 or 1 << n != d:
        raise DimensionError(f"dimension {d} is not a power of two")
    return n


def hamiltonian_to_dense(h: Hamiltonian) -> DenseHamiltonian:
    if isinstance(h, DenseHamiltonian):
        return h
    n = h.n
    require_dense(n, "dense Hamiltonian")
    d = 1 << n
    cols = np.arange(d)
    out = np.zeros((d, d), dtype=complex)
    for p, a in h.coeffs.items():
        xm, zm = index_mask(p.x, n), index_mask(p.z, n)
        scalar = 1j ** (bin(p.x & p.z).count("1") % 4)
        out[cols ^ xm, cols] += a * scalar * (1 - 2 * parity(cols & zm))
    return DenseHamiltonian(n, out)


def as_pauli(h: Hamiltonian) -> PauliHamiltonian:
    return h if isinstance(h, PauliHamiltonian) else pauli_decompose(h)


# ---------------------------------------------------------------------------
# Properties and distances
# ---------------------------------------------------------------------------


def k_local_size(n: int, k: int) -> int:
    return sum(comb(n, s) * 3**s for s in range(1, k + 1))


def property_k_local(n: int, k: int) -> PropertySet:
    """All non-identity strings of weight at most ``k``."""
    if not 0 <= k <= n:
        raise ValidationError(f"locality k={k} outside [0, {n}]")
    out = set()
    for s in range(1, k + 1):
        for qubits in combinations(range(n), s):
            for letters in product("XYZ", repeat=s):
                x = z = 0
                for q, ch in zip(qubits, letters):
                    x |= (ch in "XY") << q
                    z |= (ch in "YZ") << q
                out.add(PauliString(n, x, z))
    return PropertySet(n, frozenset(out))


def load_property_file(path: str | Path) -> PropertySet:
    """One Pauli literal per line; ``#`` starts a comment."""
    labels = []
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            labels.append(line)
    return PropertySet.from_labels(labels)


def distance_to_property(h: Hamiltonian, s: PropertySet) -> float:
    """``min_{K in Pi_S} (1/sqrt d)||H - K||_2``; the minimiser keeps the S-coefficients."""
    hp = as_pauli(h)
    _same_n(hp.n, s.n)
    return float(np.sqrt(sum(a * a for p, a in hp.coeffs.items() if p not in s.paulis)))


def normalized_frobenius_distance(h: Hamiltonian, k: Hamiltonian) -> float:
    diff = as_pauli(h) - as_pauli(k)
    return float(np.sqrt(diff.squared_norm()))


def operator_norm(h: Hamiltonian) -> float:
    dense = hamiltonian_to_dense(h)
    ev = np.linalg.eigvalsh(dense.matrix)
    return float(max(abs(ev[0]), abs(ev[-1])))


def operator_distance(h: Hamiltonian, k: Hamiltonian) -> float:
    a, b = hamiltonian_to_dense(h), hamiltonian_to_dense(k)
    _same_n(a.n, b.n)
    ev = np.linalg.eigvalsh(a.matrix - b.matrix)
    return float(max(abs(ev[0]), abs(ev[-1])))


# ---------------------------------------------------------------------------
# Instance generators
# ---------------------------------------------------------------------------


def random_property_hamiltonian(s: PropertySet, seed: int | np.random.SeedSequence) -> PauliHamiltonian:
    """Uniform[-1, 1] coefficients on ``S``, rescaled to unit operator norm."""
    if len(s) == 0:
        raise ValidationError("property set must be nonempty")
    rng = np.random.default_rng(seed)
    terms = s.sorted()
    raw = PauliHamiltonian(s.n, dict(zip(terms, rng.uniform(-1.0, 1.0, size=len(terms)))))
    norm = operator_norm(raw)
    return raw.scaled(1.0 / norm) if norm > 0 else raw


def spiked_gadget(n: int, eta: float, seed: int | np.random.SeedSequence) -> DenseHamiltonian:
    """``eta (|v><v| - I/d)`` with ``|v>`` the first column of a Haar unitary."""
    if not 0 < eta <= 1:
        raise ValidationError(f"eta must lie in (0, 1], got {eta}")
    require_dense(n, "spiked gadget")
    d = 1 << n
    v = haar_vectors(d, 1, np.random.default_rng(seed))[0]
    return DenseHamiltonian(n, eta * (np.outer(v, v.conj()) - np.eye(d) / d))


def balanced_observable(n: int) -> np.ndarray:
    """``diag(+1, ..., +1, -1, ..., -1)`` with equal halves."""
    d = 1 << n
    return np.diag(np.repeat([1.0, -1.0], d // 2)).astype(complex)


def learning_gadget(n: int, eps: float, seed: int | np.random.SeedSequence) -> DenseHamiltonian:
    """``eps U O U^dagger`` for Haar ``U``; squares to ``eps^2 I``."""
    if not 0 < eps <= 1:
        raise ValidationError(f"eps must lie in (0, 1], got {eps}")
    if n < 1:
        raise ValidationError("need at least one qubit")
    require_dense(n, "learning gadget")
    u = haar_unitary(1 << n, np.random.default_rng(seed))
    return DenseHamiltonian(n, eps * u @ balanced_observable(n) @ u.conj().T)


# ---------------------------------------------------------------------------
# Fixture format
# ---------------------------------------------------------------------------


def dump_hamiltonian(h: PauliHamiltonian) -> str:
    """``n <count>`` header followed by ``LITERAL coefficient`` lines (shortest exact float repr)."""
    lines = ["# Pauli Hamiltonian", f"n {h.n}"]
    lines += [f"{p.label} {a!r}" for p, a in h.coeffs.items()]
    return "\n".join(lines) + "\n"


def load_hamiltonian(text: str) -> PauliHamiltonian:
    n = None
    coeffs: dict[PauliString, float] = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, _, rest = line.partition(" ")
        if head == "n":
            n = int(rest)
            continue
        p = PauliString.from_label(head)
        if p in coeffs:
            raise ValidationError(f"duplicate term {head}")
        coeffs[p] = float(rest)
    if n is None:
        raise ValidationError("fixture lacks the 'n' header")
    return PauliHamiltonian(n, coeffs)
