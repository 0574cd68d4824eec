"""Black-box time evolution and measurement in the stabilizer bases.

The tester-facing object is :class:`EvolutionOracle`: it receives an input
state specification ``(family, i, j)`` and an evolution time, applies
``e^{itH}`` (times the identity on any ancilla qubits of ``family``) and
measures in basis ``i``.  The Hamiltonian itself is private to the oracle.
"""

from __future__ import annotations

import threading
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from .config import require_dense
from .errors import DimensionError, ValidationError
from .hamiltonian import DenseHamiltonian, Hamiltonian, PropertySet, hamiltonian_to_dense
from .mub import MubFamily
from .relation import RelationChecker


@dataclass(frozen=True)
class RoundRecord:
    i: int
    j: int
    l: int
    t: float
    violation: bool = False


class RoundLog:
    """Columnar storage for many rounds; iterating yields :class:`RoundRecord` objects."""

    def __init__(self, bases, states, outcomes, violations, t: float):
        self.bases = np.asarray(bases, dtype=np.int64)
        self.states = np.asarray(states, dtype=np.int64)
        self.outcomes = np.asarray(outcomes, dtype=np.int64)
        self.violations = np.asarray(violations, dtype=bool)
        self.t = float(t)

    def __len__(self) -> int:
        return int(self.bases.size)

    def __iter__(self):
        for i, j, l, v in zip(self.bases.tolist(), self.states.tolist(), self.outcomes.tolist(), self.violations.tolist()):
            yield RoundRecord(i, j, l, self.t, v)

    def __getitem__(self, k: int) -> RoundRecord:
        return RoundRecord(int(self.bases[k]), int(self.states[k]), int(self.outcomes[k]), self.t, bool(self.violations[k]))


def _spectral(h: Hamiltonian) -> tuple[np.ndarray, np.ndarray]:
    dense = hamiltonian_to_dense(h)
    return np.linalg.eigh(dense.matrix)


def evolve_unitary(h: Hamiltonian | np.ndarray, t: float) -> np.ndarray:
    """``e^{itH}`` via the Hermitian eigendecomposition."""
    if not np.isfinite(t):
        raise ValidationError(f"evolution time must be finite, got {t}")
    if isinstance(h, np.ndarray):
        h = DenseHamiltonian(int(h.shape[0]).bit_length() - 1, h)
    evals, evecs = _spectral(h)
    return (evecs * np.exp(1j * t * evals)) @ evecs.conj().T


def evolve_with_ancilla(h: Hamiltonian, t: float, n_aux: int) -> np.ndarray:
    """``e^{itH} (x) I`` on ``n + n_aux`` qubits, ancillas after the system."""
    dense = hamiltonian_to_dense(h)
    require_dense(dense.n + n_aux, "ancilla-extended evolution")
    u = evolve_unitary(dense, t)
    return u if n_aux == 0 else np.kron(u, np.eye(1 << n_aux))


def _apply_extended(u: np.ndarray, vectors: np.ndarray, n_aux: int) -> np.ndarray:
    """``(U (x) I) v`` without forming the Kronecker product; works on columns too."""
    if n_aux == 0:
        return u @ vectors
    ds, da = u.shape[0], 1 << n_aux
    if vectors.ndim == 1:
        return (u @ vectors.reshape(ds, da)).reshape(-1)
    cols = vectors.shape[1]
    return np.einsum("ab,bkc->akc", u, vectors.reshape(ds, da, cols)).reshape(ds * da, cols)


def born_distribution(u: np.ndarray, family: MubFamily, i: int, j: int) -> np.ndarray:
    """``|<phi_{i,l}| U |phi_{i,j}>|^2`` over ``l``."""
    if u.shape != (family.d, family.d):
        raise DimensionError(f"unitary of shape {u.shape} does not act on {family.n} qubits")
    probs = family.outcome_probabilities(i, u @ family.state(i, j))
    return _normalised(probs)


def _normalised(probs: np.ndarray) -> np.ndarray:
    total = probs.sum()
    if abs(total - 1.0) > 1e-8:
        raise ValidationError(f"Born probabilities sum to {total}")
    return np.clip(probs, 0.0, None) / total


class EvolutionOracle:
    """Hides a Hamiltonian behind single-shot evolve-and-measure queries.

    Every query is logged: the count and the summed evolution time.  Queries
    at ``t = 0`` are legal and counted like any other; negative times are
    refused since the access model offers no inverse evolution.
    """

    def __init__(self, hamiltonian: Hamiltonian, born_cache_size: int = 1 << 14):
        dense = hamiltonian_to_dense(hamiltonian)
        self._n = dense.n
        self._evals, self._evecs = np.linalg.eigh(dense.matrix)
        self._unitaries: dict[float, np.ndarray] = {}
        self._born: OrderedDict[tuple, np.ndarray] = OrderedDict()
        self._born_cap = born_cache_size
        self._lock = threading.Lock()
        self._queries = 0
        self._time = 0.0

    @property
    def n(self) -> int:
        """Number of system qubits the hidden Hamiltonian acts on."""
        return self._n

    @property
    def queries(self) -> int:
        return self._queries

    @property
    def total_time(self) -> float:
        return self._time

    def _record(self, count: int, t: float) -> None:
        with self._lock:
            self._queries += count
            self._time += count * t

    def _unitary(self, t: float) -> np.ndarray:
        with self._lock:
            u = self._unitaries.get(t)
        if u is None:
            u = (self._evecs * np.exp(1j * t * self._evals)) @ self._evecs.conj().T
            with self._lock:
                self._unitaries[t] = u
        return u

    def _distribution(self, family: MubFamily, i: int, j: int, t: float) -> np.ndarray:
        key = (id(family), i, j, t)
        with self._lock:
            hit = self._born.get(key)
            if hit is not None:
                self._born.move_to_end(key)
                return hit
        n_aux = family.n - self._n
        probs = _normalised(
            family.outcome_probabilities(i, _apply_extended(self._unitary(t), family.state(i, j), n_aux))
        )
        with self._lock:
            self._born[key] = probs
            if len(self._born) > self._born_cap:
                self._born.popitem(last=False)
        return probs

    def _validate(self, family: MubFamily, t: float) -> None:
        if family.n < self._n:
            raise DimensionError(f"family on {family.n} qubits cannot host a {self._n}-qubit system")
        if not np.isfinite(t) or t < 0:
            raise ValidationError(f"evolution time must be finite and non-negative, got {t}")

    def measure(self, family: MubFamily, i: int, j: int, t: float, rng: np.random.Generator) -> int:
        """Prepare ``|phi_{i,j}>``, evolve for time ``t``, measure in basis ``i``."""
        self._validate(family, t)
        probs = self._distribution(family, i, j, t)
        self._record(1, t)
        return int(rng.choice(family.d, p=probs))

    def measure_batch(
        self, family: MubFamily, bases: np.ndarray, states: np.ndarray, t: float, rng: np.random.Generator
    ) -> np.ndarray:
        """Independent single-shot queries, one per entry of ``bases``/``states``."""
        self._validate(family, t)
        bases = np.asarray(bases, dtype=np.int64)
        states = np.asarray(states, dtype=np.int64)
        if bases.shape != states.shape:
            raise DimensionError("bases and states must align")
        outcomes = np.empty(bases.shape, dtype=np.int64)
        pair = bases * family.d + states
        order = np.argsort(pair, kind="stable")
        uniq, starts, counts = np.unique(pair[order], return_index=True, return_counts=True)
        for key, start, count in zip(uniq.tolist(), starts.tolist(), counts.tolist()):
            probs = self._distribution(family, key // family.d, key % family.d, t)
            outcomes[order[start:start + count]] = rng.choice(family.d, size=count, p=probs)
        self._record(int(bases.size), t)
        return outcomes


def sample_round(
    oracle: EvolutionOracle, family: MubFamily, i: int, j: int, t: float, rng: np.random.Generator
) -> RoundRecord:
    return RoundRecord(i, j, oracle.measure(family, i, j, t, rng), t)


def exact_violation_rate(h: Hamiltonian, t: float, s: PropertySet, family: MubFamily) -> float:
    """Probability that one round of the single-property tester flags a violation.

    Averages over all ``d + 1`` bases and ``d`` input states with the outcome
    distribution computed exactly.  ``family`` may carry ancilla qubits beyond
    those of ``h``; ``s`` must then already be lifted to the family's size.
    """
    dense = hamiltonian_to_dense(h)
    n_aux = family.n - dense.n
    if n_aux < 0:
        raise DimensionError("family is smaller than the Hamiltonian")
    require_dense(family.n, "exact violation rate")
    u = evolve_unitary(dense, t)
    checker = RelationChecker(family, s)
    total = 0.0
    for i in range(family.num_bases):
        probs = family.outcome_probabilities(i, _apply_extended(u, family.basis(i), n_aux))
        total += float(np.sum(probs[checker.violation_matrix(i)]))
    return total / (family.d * family.num_bases)
