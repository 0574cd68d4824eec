"""Pauli strings in the symplectic (x|z) representation.

A Pauli string on ``n`` qubits is stored as two ``n``-bit integers.  Bit ``q``
of ``x`` (resp. ``z``) is set when the factor on qubit ``q`` carries an X
(resp. Z) component, and qubit 0 is the leftmost tensor factor.  The
Hermitian string attached to ``(x, z)`` is ``i^{x.z} X^x Z^z``, which makes
single-qubit ``Y = iXZ``.

Signed Paulis carry an extra power of ``i`` so that products are exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator

import numpy as np

from .config import require_dense
from .errors import DimensionError, ValidationError

_LETTERS = "IXYZ"
_LETTER_BITS = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
_PHASE_PREFIX = {"": 0, "+": 0, "i": 1, "+i": 1, "-": 2, "-i": 3}
_PREFIX_OF_PHASE = {0: "+", 1: "i", 2: "-", 3: "-i"}


def _popcount(v: int) -> int:
    return bin(v).count("1")


@dataclass(frozen=True)
class PauliString:
    """Unsigned n-qubit Pauli string; an element of the Pauli group modulo phases."""

    n: int
    x: int = 0
    z: int = 0

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValidationError(f"qubit count must be positive, got {self.n}")
        top = 1 << self.n
        if not (0 <= self.x < top and 0 <= self.z < top):
            raise ValidationError(f"bit vectors do not fit in {self.n} qubits")

    @classmethod
    def identity(cls, n: int) -> PauliString:
        return cls(n, 0, 0)

    @classmethod
    def from_label(cls, label: str) -> PauliString:
        """Parse an unsigned literal such as ``"XIZ"``."""
        if not label:
            raise ValidationError("empty Pauli literal")
        x = z = 0
        for q, ch in enumerate(label.upper()):
            if ch not in _LETTER_BITS:
                raise ValidationError(f"invalid Pauli letter {ch!r} in {label!r}")
            bx, bz = _LETTER_BITS[ch]
            x |= bx << q
            z |= bz << q
        return cls(len(label), x, z)

    @classmethod
    def single(cls, n: int, qubit: int, letter: str) -> PauliString:
        """Weight-one string acting with ``letter`` on ``qubit``."""
        bx, bz = _LETTER_BITS[letter.upper()]
        return cls(n, bx << qubit, bz << qubit)

    def letter(self, qubit: int) -> str:
        return "IXZY"[((self.x >> qubit) & 1) + 2 * ((self.z >> qubit) & 1)]

    @property
    def label(self) -> str:
        return "".join(self.letter(q) for q in range(self.n))

    @property
    def weight(self) -> int:
        return _popcount(self.x | self.z)

    @property
    def is_identity(self) -> bool:
        return self.x == 0 and self.z == 0

    def sort_key(self) -> int:
        """Lexicographic rank of the literal under the letter order I < X < Y < Z."""
        key = 0
        for q in range(self.n):
            key = 4 * key + _LETTERS.index(self.letter(q))
        return key

    def tensor(self, other: PauliString) -> PauliString:
        """``self`` on the leading qubits followed by ``other``."""
        return PauliString(
            self.n + other.n, self.x | (other.x << self.n), self.z | (other.z << self.n)
        )

    def __str__(self) -> str:
        return self.label

    def __repr__(self) -> str:
        return f"PauliString({self.label!r})"


@dataclass(frozen=True)
class SignedPauli:
    """``i**phase`` times the Hermitian string ``pauli``."""

    pauli: PauliString
    phase: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "phase", self.phase % 4)

    @property
    def n(self) -> int:
        return self.pauli.n

    @property
    def sign(self) -> int:
        """Real sign for phases 0 and 2; raises otherwise."""
        if self.phase % 2:
            raise ValidationError(f"{self} has an imaginary phase")
        return 1 if self.phase == 0 else -1

    @property
    def literal(self) -> str:
        return _PREFIX_OF_PHASE[self.phase] + self.pauli.label

    def __str__(self) -> str:
        return self.literal

    def __mul__(self, other: SignedPauli) -> SignedPauli:
        return pauli_multiply(self, other)


def parse_pauli(literal: str) -> SignedPauli:
    """Parse ``"XIZ"``, ``"+XIZ"``, ``"-XIZ"``, ``"iXIZ"`` or ``"-iXIZ"``."""
    text = literal.strip()
    for prefix in ("+i", "-i", "i", "+", "-"):
        if text.startswith(prefix) and len(text) > len(prefix):
            return SignedPauli(PauliString.from_label(text[len(prefix):]), _PHASE_PREFIX[prefix])
    return SignedPauli(PauliString.from_label(text), 0)


def _check_same_n(a: PauliString, b: PauliString) -> None:
    if a.n != b.n:
        raise DimensionError(f"qubit counts differ: {a.n} vs {b.n}")


def pauli_weight(p: PauliString) -> int:
    return p.weight


def commutation_bit(p: PauliString, q: PauliString) -> int:
    """Symplectic product: 0 when the strings commute, 1 when they anticommute."""
    _check_same_n(p, q)
    return _popcount((p.x & q.z) ^ (p.z & q.x)) & 1


def pauli_multiply(a: SignedPauli, b: SignedPauli) -> SignedPauli:
    """Exact product ``a @ b`` including the power of ``i``."""
    pa, pb = a.pauli, b.pauli
    _check_same_n(pa, pb)
    x, z = pa.x ^ pb.x, pa.z ^ pb.z
    phase = (
        a.phase
        + b.phase
        + _popcount(pa.x & pa.z)
        + _popcount(pb.x & pb.z)
        + 2 * _popcount(pa.z & pb.x)
        - _popcount(x & z)
    )
    return SignedPauli(PauliString(pa.n, x, z), phase)


def multiply_strings(a: PauliString, b: PauliString) -> PauliString:
    """Product modulo phase (XOR of the bit vectors)."""
    _check_same_n(a, b)
    return PauliString(a.n, a.x ^ b.x, a.z ^ b.z)


# ---------------------------------------------------------------------------
# Dense realisation
# ---------------------------------------------------------------------------


@lru_cache(maxsize=32)
def _reversal_table(n: int) -> np.ndarray:
    """Map from qubit-indexed bit vectors to computational-basis index masks."""
    v = np.arange(1 << n, dtype=np.int64)
    out = np.zeros_like(v)
    for q in range(n):
        out |= ((v >> q) & 1) << (n - 1 - q)
    out.setflags(write=False)
    return out


def index_mask(bits: int, n: int) -> int:
    """Qubit bit vector -> mask over computational-basis indices (qubit 0 is the MSB)."""
    return int(format(bits, f"0{n}b")[::-1], 2) if n else 0


def index_masks(bits: np.ndarray, n: int) -> np.ndarray:
    """Vectorised :func:`index_mask`."""
    return _reversal_table(n)[np.asarray(bits, dtype=np.int64)]


def parity(v: np.ndarray) -> np.ndarray:
    """Bit parity of each entry of a non-negative integer array."""
    return (np.bitwise_count(np.asarray(v, dtype=np.uint64)) & 1).astype(np.int64)


def pauli_to_matrix(p: SignedPauli | PauliString) -> np.ndarray:
    """Dense ``2**n x 2**n`` matrix, built as a phased permutation."""
    if isinstance(p, PauliString):
        p = SignedPauli(p, 0)
    n = p.n
    require_dense(n, "Pauli matrix")
    d = 1 << n
    xm, zm = index_mask(p.pauli.x, n), index_mask(p.pauli.z, n)
    cols = np.arange(d)
    signs = 1 - 2 * parity(cols & zm)
    scalar = 1j ** ((p.phase + _popcount(p.pauli.x & p.pauli.z)) % 4)
    m = np.zeros((d, d), dtype=complex)
    m[cols ^ xm, cols] = scalar * signs
    return m


def apply_pauli(p: SignedPauli | PauliString, vectors: np.ndarray) -> np.ndarray:
    """Apply a Pauli to a state vector, or to each column of a matrix, without densifying."""
    if isinstance(p, PauliString):
        p = SignedPauli(p, 0)
    n = p.n
    xm, zm = index_mask(p.pauli.x, n), index_mask(p.pauli.z, n)
    d = 1 << n
    rows = np.arange(d)
    scalar = 1j ** ((p.phase + _popcount(p.pauli.x & p.pauli.z)) % 4)
    # (P v)[c ^ xm] = scalar * (-1)^{zm.c} v[c]  <=>  (P v)[r] = scalar * (-1)^{zm.(r^xm)} v[r^xm]
    src = rows ^ xm
    signs = scalar * (1 - 2 * parity(src & zm))
    v = np.asarray(vectors)
    if v.ndim == 1:
        return signs * v[src]
    return signs[:, None] * v[src, :]


# ---------------------------------------------------------------------------
# Enumeration
# ---------------------------------------------------------------------------


def all_paulis(n: int, include_identity: bool = True) -> Iterator[PauliString]:
    """Every n-qubit string in lexicographic literal order."""
    xs, zs = lex_ordered_bits(n)
    start = 0 if include_identity else 1
    for x, z in zip(xs[start:].tolist(), zs[start:].tolist()):
        yield PauliString(n, x, z)


@lru_cache(maxsize=16)
def lex_ordered_bits(n: int) -> tuple[np.ndarray, np.ndarray]:
    """``(x, z)`` bit arrays of all ``4**n`` strings sorted by :meth:`PauliString.sort_key`."""
    keys = np.arange(4**n, dtype=np.int64)
    x = np.zeros_like(keys)
    z = np.zeros_like(keys)
    for q in range(n):
        digit = (keys >> (2 * (n - 1 - q))) & 3  # qubit 0 is the most significant digit
        x |= ((digit == 1) | (digit == 2)).astype(np.int64) << q
        z |= ((digit == 2) | (digit == 3)).astype(np.int64) << q
    x.setflags(write=False)
    z.setflags(write=False)
    return x, z


def symplectic_products(
    x: np.ndarray, z: np.ndarray, gx: np.ndarray, gz: np.ndarray
) -> np.ndarray:
    """Commutation bits between each string ``(x, z)`` and each generator ``(gx, gz)``.

    Returns an integer array of shape ``(len(x), len(gx))``.
    """
    x = np.asarray(x, dtype=np.uint64)[:, None]
    z = np.asarray(z, dtype=np.uint64)[:, None]
    gx = np.asarray(gx, dtype=np.uint64)[None, :]
    gz = np.asarray(gz, dtype=np.uint64)[None, :]
    return (np.bitwise_count((x & gz) ^ (z & gx)) & 1).astype(np.int64)
