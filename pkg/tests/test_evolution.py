"""Time evolution, the query oracle and the exact one-round violation rate."""

import math

import numpy as np
import pytest
import scipy.linalg

from hamtest.errors import DimensionError, ResourceLimitError, ValidationError
from hamtest.evolution import (
    EvolutionOracle,
    RoundLog,
    RoundRecord,
    born_distribution,
    evolve_unitary,
    evolve_with_ancilla,
    exact_violation_rate,
    sample_round,
)
from hamtest.hamiltonian import PauliHamiltonian, PropertySet, hamiltonian_to_dense, property_k_local
from hamtest.mub import build_mub_family
from hamtest.oracles import dense_violation_rate
from hamtest.pauli import PauliString

XXX = PauliHamiltonian.from_labels({"XXX": 0.5})
MIXED = PauliHamiltonian.from_labels({"ZII": 0.4, "IZI": -0.3, "XXI": 0.2, "YIY": 0.5})


def _lift(h, n_aux):
    pad = PauliString.identity(n_aux)
    return PauliHamiltonian(h.n + n_aux, {p.tensor(pad): a for p, a in h.coeffs.items()})


# ═══════════════════════════════════════════════════════════════════
# Propagators
# ═══════════════════════════════════════════════════════════════════


class TestPropagator:
    @pytest.mark.parametrize("t", [0.0, 0.1, 1.3, -0.7])
    def test_matches_expm(self, t):
        m = hamiltonian_to_dense(MIXED).matrix
        np.testing.assert_allclose(evolve_unitary(MIXED, t), scipy.linalg.expm(1j * t * m), atol=1e-12)

    def test_single_pauli_closed_form(self):
        t = 0.3
        u = evolve_unitary(XXX, t)
        m = hamiltonian_to_dense(XXX).matrix / 0.5
        np.testing.assert_allclose(u, math.cos(0.5 * t) * np.eye(8) + 1j * math.sin(0.5 * t) * m, atol=1e-12)

    def test_ancilla_is_kronecker(self):
        u = evolve_with_ancilla(MIXED, 0.2, 1)
        np.testing.assert_allclose(u, np.kron(evolve_unitary(MIXED, 0.2), np.eye(2)), atol=1e-14)

    def test_non_finite_time(self):
        with pytest.raises(ValidationError):
            evolve_unitary(MIXED, float("nan"))


# ═══════════════════════════════════════════════════════════════════
# Oracle
# ═══════════════════════════════════════════════════════════════════


class TestOracle:
    def test_counts_queries_and_time(self, family, rng):
        fam = family[3]
        oracle = EvolutionOracle(MIXED)
        oracle.measure(fam, 0, 0, 0.25, rng)
        oracle.measure_batch(fam, np.array([1, 2, 3]), np.array([0, 1, 2]), 0.5, rng)
        assert oracle.queries == 4
        assert oracle.total_time == pytest.approx(1.75)

    def test_zero_time_is_counted(self, family, rng):
        oracle = EvolutionOracle(MIXED)
        assert oracle.measure(family[3], 2, 5, 0.0, rng) == 5
        assert oracle.queries == 1 and oracle.total_time == 0.0

    def test_negative_time_refused(self, family, rng):
        oracle = EvolutionOracle(MIXED)
        with pytest.raises(ValidationError):
            oracle.measure(family[3], 0, 0, -0.1, rng)
        assert oracle.queries == 0

    def test_family_too_small(self, family, rng):
        with pytest.raises(DimensionError):
            EvolutionOracle(MIXED).measure(family[2], 0, 0, 0.1, rng)

    def test_hamiltonian_is_private(self):
        oracle = EvolutionOracle(MIXED)
        assert oracle.n == 3
        assert not any(isinstance(v, PauliHamiltonian) for v in vars(oracle).values())

    def test_sampling_matches_born_rule(self, family, rng):
        fam = family[3]
        oracle = EvolutionOracle(MIXED)
        probs = born_distribution(evolve_unitary(MIXED, 1.1), fam, 4, 3)
        samples = 20_000
        outcomes = oracle.measure_batch(fam, np.full(samples, 4), np.full(samples, 3), 1.1, rng)
        freq = np.bincount(outcomes, minlength=fam.d) / samples
        sigma = np.sqrt(probs * (1 - probs) / samples)
        assert np.all(np.abs(freq - probs) <= 5 * sigma + 1e-12)

    def test_born_matches_dense_basis(self, family):
        fam = family[3]
        u = evolve_unitary(MIXED, 0.9)
        for i in range(fam.num_bases):
            b = fam.basis(i)
            np.testing.assert_allclose(born_distribution(u, fam, i, 2), np.abs(b.conj().T @ u @ b[:, 2]) ** 2, atol=1e-12)

    def test_ancilla_family(self, rng):
        fam = build_mub_family(4)
        oracle = EvolutionOracle(MIXED)
        out = oracle.measure_batch(fam, np.zeros(10, dtype=int), np.zeros(10, dtype=int), 0.1, rng)
        assert out.shape == (10,) and oracle.queries == 10

    def test_sample_round(self, family, rng):
        rec = sample_round(EvolutionOracle(MIXED), family[3], 1, 2, 0.0, rng)
        assert rec == RoundRecord(1, 2, 2, 0.0)


class TestRoundLog:
    def test_iteration_and_indexing(self):
        log = RoundLog([0, 1], [2, 3], [2, 4], [False, True], 0.1)
        assert len(log) == 2
        assert list(log) == [RoundRecord(0, 2, 2, 0.1, False), RoundRecord(1, 3, 4, 0.1, True)]
        assert log[1].violation


# ═══════════════════════════════════════════════════════════════════
# Exact violation rate
# ═══════════════════════════════════════════════════════════════════


class TestExactViolationRate:
    def test_frozen_value(self, family):
        # Cross-checked against the dense projector/expm oracle below.
        rate = exact_violation_rate(XXX, 0.1, property_k_local(3, 2), family[3])
        assert rate == pytest.approx(0.00027754637344301294, rel=1e-10)

    @pytest.mark.parametrize(
        "h, t, s",
        [
            (XXX, 0.1, property_k_local(3, 2)),
            (MIXED, 0.3, property_k_local(3, 1)),
            (MIXED, 1.0, PropertySet(3)),
            (MIXED, 0.05, PropertySet.from_labels(["ZII", "XXI"])),
        ],
    )
    def test_matches_dense_oracle(self, family, h, t, s):
        assert exact_violation_rate(h, t, s, family[3]) == pytest.approx(dense_violation_rate(h, t, s, family[3]), abs=1e-13)

    def test_ancilla_matches_lifted_dense_oracle(self):
        s = property_k_local(3, 1)
        fam = build_mub_family(4)
        got = exact_violation_rate(MIXED, 0.4, s.lifted(1), fam)
        assert got == pytest.approx(dense_violation_rate(_lift(MIXED, 1), 0.4, s.lifted(1), fam), abs=1e-13)

    def test_zero_time(self, family):
        assert exact_violation_rate(MIXED, 0.0, PropertySet(3), family[3]) == pytest.approx(0.0, abs=1e-15)

    def test_property_hamiltonian_small_rate(self, family):
        s = property_k_local(3, 1)
        h = PauliHamiltonian.from_labels({"ZII": 0.5, "IXI": -0.5})
        assert exact_violation_rate(h, 0.1, s, family[3]) <= 0.1**4

    def test_resource_cap(self, family):
        from hamtest.config import set_dense_cap

        previous = set_dense_cap(2)
        try:
            with pytest.raises(ResourceLimitError):
                exact_violation_rate(MIXED, 0.1, PropertySet(3), family[3])
        finally:
            set_dense_cap(previous)
