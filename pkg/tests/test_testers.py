"""Tester parameters, verdicts and resource accounting."""

import math

import numpy as np
import pytest

from hamtest.config import set_dense_cap
from hamtest.errors import ResourceLimitError, ValidationError
from hamtest.evolution import EvolutionOracle, exact_violation_rate
from hamtest.hamiltonian import PauliHamiltonian, PropertySet, property_k_local
from hamtest.relation import RelationChecker
from hamtest.testers import (
    H0,
    H1,
    TestConfig,
    TolerantConfig,
    ancilla_count,
    commuting_case_rate,
    multi_test_rounds,
    run_ancilla_test,
    run_multi_test,
    run_single_test,
    run_tolerant_test,
    single_test_parameters,
    size_hypothesis,
)

FAR = PauliHamiltonian.from_labels({"XYZ": 0.9})
NULL = PauliHamiltonian.from_labels({"ZII": 0.5, "IXI": -0.4})


# ═══════════════════════════════════════════════════════════════════
# Parameters
# ═══════════════════════════════════════════════════════════════════


class TestParameters:
    @pytest.mark.parametrize("eps, t, n_rounds", [(0.6, 0.1, 611), (0.9, 0.15, 121), (0.3, 0.05, 9766)])
    def test_single(self, eps, t, n_rounds):
        got_t, got_n = single_test_parameters(eps)
        assert got_t == pytest.approx(t)
        assert got_n == n_rounds == math.ceil(2 * math.log(3) / (t * t * eps * eps) - 1e-9)

    def test_multi_rounds(self):
        assert multi_test_rounds(0.9, 4, 0.1) == math.ceil(100 * math.log(40) / (0.15**2 * 0.81))

    @pytest.mark.parametrize(
        "n, size, eps, n_aux",
        [(2, 16, 0.9, 10), (9, 2, 0.9, 0), (3, 37, 0.6, 13), (8, 1, 0.95, 0)],
    )
    def test_ancilla_count(self, n, size, eps, n_aux):
        assert ancilla_count(n, size, eps) == n_aux
        total = n + n_aux
        assert size <= ((1 << total) + 1) * eps**4 / 144

    def test_size_hypothesis(self):
        assert size_hypothesis(PropertySet.from_labels(["ZIIIIIIII"]), 9, 0.9)
        assert not size_hypothesis(property_k_local(5, 1), 5, 0.99)

    @pytest.mark.parametrize("eps", [0.0, 1.0, -0.2])
    def test_eps_range(self, eps):
        with pytest.raises(ValidationError):
            TestConfig(eps)

    def test_zero_time_needs_rounds(self):
        with pytest.raises(ValidationError):
            TestConfig(0.5, t=0.0).rounds
        assert TestConfig(0.5, t=0.0, n_rounds=3).rounds == 3

    def test_tolerant_parameters(self):
        cfg = TolerantConfig(0.1, 0.6)
        assert cfg.gap == pytest.approx(0.35)
        assert cfg.time == pytest.approx(math.sqrt(0.35 / 20))
        assert cfg.threshold == pytest.approx(cfg.time**2 * (2 * 0.36 + 3 * 0.01) / 5)
        assert cfg.rounds == math.ceil(30 * math.log(3) * 0.37 / (cfg.time**2 * 0.35**2) - 1e-9)

    def test_tolerant_ordering(self):
        with pytest.raises(ValidationError):
            TolerantConfig(0.5, 0.4)


# ═══════════════════════════════════════════════════════════════════
# Single-property tester
# ═══════════════════════════════════════════════════════════════════


class TestSingle:
    def test_far_instance_stops_at_first_violation(self, family):
        oracle = EvolutionOracle(FAR)
        report = run_single_test(oracle, family[3], property_k_local(3, 1), TestConfig(0.6, seed=4))
        assert report.verdict == H1
        assert report.rounds.violations[-1] and not report.rounds.violations[:-1].any()
        assert report.queries_used == oracle.queries == len(report.rounds)
        assert report.total_evolution_time == pytest.approx(oracle.total_time)

    def test_null_instance_runs_all_rounds(self, family):
        oracle = EvolutionOracle(NULL)
        report = run_single_test(oracle, family[3], property_k_local(3, 1), TestConfig(0.6, seed=1))
        assert report.verdict == H0
        assert report.queries_used == oracle.queries == 611
        assert report.parameters["N"] == 611

    def test_reproducible(self, family):
        cfg = TestConfig(0.6, seed=11)
        a = run_single_test(EvolutionOracle(FAR), family[3], property_k_local(3, 1), cfg)
        b = run_single_test(EvolutionOracle(FAR), family[3], property_k_local(3, 1), cfg)
        np.testing.assert_array_equal(a.rounds.outcomes, b.rounds.outcomes)

    def test_round_log_agrees_with_relation(self, family):
        s = property_k_local(3, 1)
        report = run_single_test(EvolutionOracle(FAR), family[3], s, TestConfig(0.6, seed=2))
        checker = RelationChecker(family[3], s)
        for rec in report.rounds:
            assert rec.violation == (not checker.related(rec.i, rec.j, rec.l))

    def test_size_flag(self, family):
        report = run_single_test(EvolutionOracle(NULL), family[3], property_k_local(3, 1), TestConfig(0.6))
        assert report.assumption_flags == {"size_hypothesis": False}

    def test_size_mismatch(self, family):
        with pytest.raises(ValidationError):
            run_single_test(EvolutionOracle(NULL), family[2], property_k_local(3, 1), TestConfig(0.6))


# ═══════════════════════════════════════════════════════════════════
# Multi-property, ancilla and tolerant testers
# ═══════════════════════════════════════════════════════════════════


class TestMulti:
    def test_verdicts_and_accounting(self, family):
        h = PauliHamiltonian.from_labels({"ZII": 0.3, "XYZ": 0.9})
        props = [PropertySet.from_labels(s, 3) for s in (["ZII", "XYZ"], ["IZI"])]
        oracle = EvolutionOracle(h)
        report = run_multi_test(oracle, family[3], props, 0.9, 0.1, seed=3)
        assert report.verdicts == [H0, H1]
        assert report.queries_used == oracle.queries == multi_test_rounds(0.9, 2, 0.1)
        assert report.threshold == pytest.approx(3 * 0.15**2 * 0.81 / 8)

    def test_needs_properties(self, family):
        with pytest.raises(ValidationError):
            run_multi_test(EvolutionOracle(NULL), family[3], [], 0.5, 0.1)


class TestAncilla:
    def test_adds_idle_qubits(self):
        h = PauliHamiltonian.from_labels({"XX": 0.95})
        s = PropertySet.from_labels(["ZI"])
        oracle = EvolutionOracle(h)
        report = run_ancilla_test(oracle, None, s, 0.99, seed=5)
        assert report.parameters["n_aux"] == ancilla_count(2, 2, 0.99) == 7
        assert report.assumption_flags["size_hypothesis"]
        assert not report.assumption_flags["size_hypothesis_original"]
        assert report.queries_used == oracle.queries

    def test_respects_dense_cap(self):
        previous = set_dense_cap(6)
        try:
            with pytest.raises(ResourceLimitError):
                run_ancilla_test(EvolutionOracle(NULL), None, property_k_local(3, 1), 0.6)
        finally:
            set_dense_cap(previous)

    def test_wrong_family_size(self, family):
        with pytest.raises(ValidationError):
            run_ancilla_test(EvolutionOracle(PauliHamiltonian.from_labels({"XX": 0.9})), family[3],
                             PropertySet.from_labels(["ZI"]), 0.99)


class TestTolerant:
    def test_violation_rate_tracks_exact_rate(self, family):
        s = property_k_local(3, 1)
        cfg = TolerantConfig(0.1, 0.9, seed=8)
        report = run_tolerant_test(EvolutionOracle(FAR), family[3], s, cfg)
        exact = exact_violation_rate(FAR, cfg.time, s, family[3])
        sigma = math.sqrt(exact * (1 - exact) / cfg.rounds)
        assert abs(report.violation_rate - exact) <= 5 * sigma
        assert report.verdict == H1

    def test_null(self, family):
        report = run_tolerant_test(EvolutionOracle(NULL), family[3], property_k_local(3, 1), TolerantConfig(0.1, 0.9, seed=8))
        assert report.verdict == H0


# ═══════════════════════════════════════════════════════════════════
# Commuting warm-up
# ═══════════════════════════════════════════════════════════════════


class TestCommutingCase:
    @pytest.mark.parametrize("label, k, expect_rotation", [("XXX", 2, True), ("XXI", 2, False), ("XII", 0, True)])
    def test_single_term_closed_form(self, label, k, expect_rotation):
        alpha, t = 0.7, 0.3
        rate = commuting_case_rate(PauliHamiltonian.from_labels({label: alpha}), k, t)
        assert rate == pytest.approx(math.sin(alpha * t) ** 2 if expect_rotation else 0.0, abs=1e-14)

    def test_rejects_z_terms(self):
        with pytest.raises(ValidationError):
            commuting_case_rate(PauliHamiltonian.from_labels({"XZ": 0.5}), 1, 0.1)
