"""Sweeps, confidence intervals and report serialisation."""

import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from hamtest.errors import ReportError, ResourceLimitError, ValidationError
from hamtest.harness import (
    SUMMARY_FIELDS,
    TRIAL_FIELDS,
    ScenarioSpec,
    SweepReport,
    acceptance_sweep,
    emit_report,
    far_instance,
    read_jsonl,
    render_report,
    run_trial,
    trial_records_from_rows,
    wilson_interval,
)
from hamtest.hamiltonian import PropertySet, distance_to_property, property_k_local
from hamtest.oracles import CheckResult
from hamtest.rng import make_rng

SMALL = [
    ScenarioSpec(n=2, k=1, eps=0.6, hypothesis="null", trials=6, seed=3),
    ScenarioSpec(n=2, k=1, eps=0.6, hypothesis="far", trials=6, seed=3),
]


def _wilson_formula(k, n, z=1.959963984540054):
    p = k / n
    centre = (p + z * z / (2 * n)) / (1 + z * z / n)
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / (1 + z * z / n)
    return centre - half, centre + half


@pytest.fixture(scope="module")
def small_report():
    return acceptance_sweep(SMALL)


# ═══════════════════════════════════════════════════════════════════
# Confidence intervals
# ═══════════════════════════════════════════════════════════════════


class TestWilson:
    @given(st.integers(1, 400).flatmap(lambda n: st.tuples(st.integers(0, n), st.just(n))))
    def test_matches_closed_form_and_contains_frequency(self, kn):
        k, n = kn
        low, high = wilson_interval(k, n)
        want = _wilson_formula(k, n)
        assert low == pytest.approx(max(0.0, want[0]), abs=1e-9)
        assert high == pytest.approx(min(1.0, want[1]), abs=1e-9)
        assert low <= k / n <= high

    @pytest.mark.parametrize("k", [0, 1])
    def test_single_trial(self, k):
        low, high = wilson_interval(k, 1)
        assert 0.0 <= low <= k <= high <= 1.0
        assert high - low == pytest.approx(0.7934506856227626, abs=1e-12)

    def test_zero_trials(self):
        with pytest.raises(ValidationError):
            wilson_interval(0, 0)


# ═══════════════════════════════════════════════════════════════════
# Scenarios
# ═══════════════════════════════════════════════════════════════════


class TestScenarioSpec:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"trials": 0},
            {"hypothesis": "maybe"},
            {"tester": "quantum"},
            {"hypothesis": "custom"},
            {"tester": "tolerant"},
            {"tester": "tolerant", "eps1": 0.5, "eps2": 0.4},
            {"eps": 1.2},
            {"k": None},
            {"far_coefficient": 1.5},
            {"n": 11},
        ],
    )
    def test_invalid(self, kwargs):
        base = {"n": 2, "k": 1}
        base.update(kwargs)
        with pytest.raises((ValidationError, ResourceLimitError)):
            ScenarioSpec(**base)

    def test_far_scale_default(self):
        assert ScenarioSpec(n=2, eps=0.9).far_scale() == pytest.approx(0.95)
        assert ScenarioSpec(n=2, eps=0.9, far_coefficient=0.92).far_scale() == 0.92
        assert ScenarioSpec(n=2, tester="tolerant", eps1=0.1, eps2=0.5).far_scale() == pytest.approx(0.75)

    def test_property_sources(self, fixtures_dir):
        assert len(ScenarioSpec(n=3, k=2).property_set()) == 36
        assert len(ScenarioSpec(n=3, property_labels=("ZII",)).property_set()) == 1
        spec = ScenarioSpec(n=3, property_file=str(fixtures_dir / "property_n3.txt"))
        assert len(spec.property_set()) == 4


class TestFarInstance:
    @pytest.mark.parametrize("seed", range(8))
    def test_weight_and_distance(self, seed):
        s = property_k_local(4, 2)
        h = far_instance(4, s, 0.8, make_rng(seed))
        (p, a), = h.coeffs.items()
        assert p.weight == 3 and p not in s and a == 0.8
        assert distance_to_property(h, s) == pytest.approx(0.8)

    def test_full_locality_falls_back(self):
        s = PropertySet.from_labels(["ZZ", "XI"])
        h = far_instance(2, s, 0.5, make_rng(1))
        assert not set(h.coeffs) & s.paulis


# ═══════════════════════════════════════════════════════════════════
# Sweeps
# ═══════════════════════════════════════════════════════════════════


class TestSweep:
    def test_summary_fields(self, small_report):
        assert [s.spec.hypothesis for s in small_report.scenarios] == ["null", "far"]
        for s in small_report.scenarios:
            assert 0 <= s.accept_frequency <= 1
            assert s.ci_low <= s.correct_frequency <= s.ci_high
            assert s.promise_ok
            assert not s.size_hypothesis

    def test_trials_are_sorted(self, small_report):
        keys = [(r.scenario, r.trial) for r in small_report.trials]
        assert keys == sorted(keys) and len(keys) == 12

    def test_mean_queries_match_trials(self, small_report):
        s = small_report.scenarios[1]
        far = [r for r in small_report.trials if r.scenario == 1]
        assert s.mean_queries == pytest.approx(sum(r.queries for r in far) / len(far))

    def test_trial_is_reproducible(self):
        assert run_trial(SMALL[1], 1, 4) == run_trial(SMALL[1], 1, 4)

    def test_worker_count_does_not_change_bytes(self, small_report):
        again = acceptance_sweep(SMALL, workers=2)
        assert render_report(again, "jsonl") == render_report(small_report, "jsonl")
        assert render_report(again, "csv") == render_report(small_report, "csv")

    def test_custom_fixture(self, fixtures_dir):
        spec = ScenarioSpec(n=3, hypothesis="custom", hamiltonian_file=str(fixtures_dir / "hamiltonian_n3.txt"),
                            property_file=str(fixtures_dir / "property_n3.txt"), eps=0.5, trials=3)
        report = acceptance_sweep([spec])
        assert report.scenarios[0].correct_frequency is None
        assert all(r.distance == pytest.approx(0.5) for r in report.trials)

    def test_tolerant_and_ancilla_testers(self):
        grid = [
            ScenarioSpec(n=3, k=1, tester="tolerant", eps1=0.05, eps2=0.9, hypothesis="far", trials=2),
            ScenarioSpec(n=2, property_labels=("ZI",), tester="ancilla", eps=0.99, hypothesis="null", trials=1),
        ]
        report = acceptance_sweep(grid)
        assert report.scenarios[1].size_hypothesis

    def test_empty_grid(self):
        with pytest.raises(ValidationError):
            acceptance_sweep([])


# ═══════════════════════════════════════════════════════════════════
# Reports
# ═══════════════════════════════════════════════════════════════════


class TestReports:
    def test_jsonl_round_trip(self, small_report, tmp_path):
        path = tmp_path / "trials.jsonl"
        emit_report(small_report, "jsonl", path)
        rows = read_jsonl(path)
        assert trial_records_from_rows(rows) == small_report.trials
        assert list(rows[0]) == list(TRIAL_FIELDS)

    def test_csv_header_and_rows(self, small_report, tmp_path):
        path = tmp_path / "summary.csv"
        emit_report(small_report, "csv", path)
        lines = path.read_text().splitlines()
        assert lines[0].split(",") == list(SUMMARY_FIELDS)
        assert len(lines) == 3

    def test_empty_csv_is_header_only(self):
        assert render_report(SweepReport(), "csv") == ",".join(SUMMARY_FIELDS) + "\n"
        assert render_report([], "csv") == ",".join(SUMMARY_FIELDS) + "\n"
        assert render_report(SweepReport(), "jsonl") == ""

    def test_check_results(self):
        checks = [CheckResult("a", 1.0, 1.0, 0.0, 0.1, True, {"sigma": 0.02})]
        line = render_report(checks, "jsonl")
        assert json.loads(line)["details"] == {"sigma": 0.02}
        assert render_report(checks, "csv").splitlines()[1] == 'a,1.0,1.0,0.0,0.1,True,"{""sigma"": 0.02}"'

    def test_repeated_runs_are_byte_identical(self, small_report, tmp_path):
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        emit_report(small_report, "jsonl", a)
        emit_report(acceptance_sweep(SMALL), "jsonl", b)
        assert a.read_bytes() == b.read_bytes()

    def test_unwritable_path(self, small_report, tmp_path):
        target = tmp_path / "missing" / "out.csv"
        with pytest.raises(ReportError, match="missing"):
            emit_report(small_report, "csv", target)

    def test_unknown_format(self, small_report):
        with pytest.raises(ValidationError):
            render_report(small_report, "xml")
