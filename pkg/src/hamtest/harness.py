"""Acceptance sweeps over generated instances and machine-readable reports.

A :class:`ScenarioSpec` fixes the instance family (null, far or a custom
fixture), the property, the tester and the number of trials.  Each trial
draws a fresh instance and a fresh oracle from its own seed substream, so
results do not depend on how trials are spread over worker processes.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
from scipy.stats import binomtest

from .config import require_dense
from .errors import ConsistencyError, ReportError, ValidationError
from .evolution import EvolutionOracle
from .hamiltonian import (
    PauliHamiltonian,
    PropertySet,
    distance_to_property,
    load_hamiltonian,
    load_property_file,
    property_k_local,
    random_property_hamiltonian,
)
from .mub import build_mub_family
from .pauli import PauliString
from .rng import make_rng, substreams
from .testers import (
    H0,
    H1,
    TestConfig,
    TolerantConfig,
    run_ancilla_test,
    run_single_test,
    run_tolerant_test,
    size_hypothesis,
    tolerant_size_hypothesis,
)

HYPOTHESES = ("null", "far", "custom")
TESTERS = ("single", "ancilla", "tolerant")


@dataclass(frozen=True)
class ScenarioSpec:
    """One grid point of a sweep.

    The property is given by ``property_labels``, else ``property_file``,
    else the ``k``-local set.  ``t`` and ``n_rounds`` override the analysed
    values of the single tester.  ``far_coefficient`` defaults to
    ``max(eps, (1 + eps) / 2)`` (``eps2`` for the tolerant tester).
    """

    n: int
    hypothesis: str = "null"
    k: int | None = 1
    property_file: str | None = None
    property_labels: tuple[str, ...] | None = None
    hamiltonian_file: str | None = None
    eps: float = 0.5
    eps1: float | None = None
    eps2: float | None = None
    trials: int = 100
    seed: int = 0
    tester: str = "single"
    t: float | None = None
    n_rounds: int | None = None
    far_coefficient: float | None = None

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ValidationError("trials must be at least 1")
        if self.hypothesis not in HYPOTHESES:
            raise ValidationError(f"hypothesis must be one of {HYPOTHESES}, got {self.hypothesis!r}")
        if self.tester not in TESTERS:
            raise ValidationError(f"tester must be one of {TESTERS}, got {self.tester!r}")
        if self.n < 1:
            raise ValidationError("n must be positive")
        require_dense(self.n, "scenario")
        if self.hypothesis == "custom" and self.hamiltonian_file is None:
            raise ValidationError("custom scenarios need a Hamiltonian fixture")
        if self.property_labels is None and self.property_file is None and self.k is None:
            raise ValidationError("property needs labels, a file or a locality k")
        if self.tester == "tolerant":
            if self.eps1 is None or self.eps2 is None:
                raise ValidationError("the tolerant tester needs eps1 and eps2")
            TolerantConfig(self.eps1, self.eps2)
        else:
            TestConfig(self.eps, self.t, self.n_rounds)
        if self.far_coefficient is not None and not 0 < self.far_coefficient <= 1:
            raise ValidationError("far_coefficient must lie in (0, 1]")

    def property_set(self) -> PropertySet:
        if self.property_labels is not None:
            return PropertySet.from_labels(self.property_labels, self.n)
        if self.property_file is not None:
            s = load_property_file(self.property_file)
            if s.n != self.n:
                raise ValidationError(f"property file acts on {s.n} qubits, scenario on {self.n}")
            return s
        return property_k_local(self.n, self.k)

    def far_scale(self) -> float:
        if self.far_coefficient is not None:
            return self.far_coefficient
        eps = self.eps2 if self.tester == "tolerant" else self.eps
        return max(eps, (1 + eps) / 2)

    def as_dict(self) -> dict[str, Any]:
        out = asdict(self)
        if out["property_labels"] is not None:
            out["property_labels"] = list(out["property_labels"])
        return out


@dataclass(frozen=True)
class TrialRecord:
    scenario: int
    trial: int
    seed: int
    hypothesis: str
    verdict: str
    correct: bool | None
    queries: int
    total_time: float
    violation_rate: float
    distance: float
    size_hypothesis: bool


@dataclass
class ScenarioSummary:
    scenario: int
    spec: ScenarioSpec
    trials: int
    accept_frequency: float
    correct_frequency: float | None
    ci_low: float
    ci_high: float
    mean_queries: float
    mean_time: float
    size_hypothesis: bool
    promise_ok: bool

    def row(self) -> dict[str, Any]:
        return {
            "scenario": self.scenario,
            "n": self.spec.n,
            "hypothesis": self.spec.hypothesis,
            "tester": self.spec.tester,
            "eps": self.spec.eps,
            "eps1": self.spec.eps1,
            "eps2": self.spec.eps2,
            "trials": self.trials,
            "seed": self.spec.seed,
            "accept_frequency": self.accept_frequency,
            "correct_frequency": self.correct_frequency,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "mean_queries": self.mean_queries,
            "mean_time": self.mean_time,
            "size_hypothesis": self.size_hypothesis,
            "promise_ok": self.promise_ok,
        }


SUMMARY_FIELDS = (
    "scenario", "n", "hypothesis", "tester", "eps", "eps1", "eps2", "trials", "seed",
    "accept_frequency", "correct_frequency", "ci_low", "ci_high", "mean_queries", "mean_time",
    "size_hypothesis", "promise_ok",
)
TRIAL_FIELDS = tuple(TrialRecord.__dataclass_fields__)


@dataclass
class SweepReport:
    scenarios: list[ScenarioSummary] = field(default_factory=list)
    trials: list[TrialRecord] = field(default_factory=list)

    def summary_rows(self) -> list[dict[str, Any]]:
        return [s.row() for s in self.scenarios]

    def trial_rows(self) -> list[dict[str, Any]]:
        return [asdict(t) for t in self.trials]


def wilson_interval(successes: int, trials: int) -> tuple[float, float]:
    """Wilson score 95% interval for a binomial frequency."""
    if trials < 1:
        raise ValidationError("need at least one trial")
    ci = binomtest(int(successes), int(trials)).proportion_ci(confidence_level=0.95, method="wilson")
    return float(ci.low), float(ci.high)


def far_instance(n: int, s: PropertySet, coefficient: float, rng: np.random.Generator) -> PauliHamiltonian:
    """``coefficient`` times one Pauli string outside ``S``.

    The string has weight ``w + 1`` (``w`` the largest weight in ``S``) on
    qubits chosen at random, with random letters; when that weight exceeds
    ``n``, or every such string lies in ``S``, a uniformly random string
    outside ``S`` is used instead.
    """
    w = max((p.weight for p in s.paulis), default=0) + 1
    for _ in range(64):
        if w <= n:
            qubits = rng.choice(n, size=w, replace=False)
            x = z = 0
            for q in qubits.tolist():
                letter = int(rng.integers(1, 4))  # 1: X, 2: Z, 3: Y
                x |= (letter & 1) << q
                z |= (letter >> 1) << q
        else:
            x, z = int(rng.integers(1 << n)), int(rng.integers(1 << n))
        p = PauliString(n, x, z)
        if not p.is_identity and p not in s:
            return PauliHamiltonian(n, {p: float(coefficient)})
    raise ValidationError("could not find a Pauli string outside the property")


def _instance(spec: ScenarioSpec, s: PropertySet, seq: np.random.SeedSequence):
    if spec.hypothesis == "null":
        return random_property_hamiltonian(s, seq)
    if spec.hypothesis == "far":
        return far_instance(spec.n, s, spec.far_scale(), make_rng(seq))
    h = load_hamiltonian(Path(spec.hamiltonian_file).read_text())
    if h.n != spec.n:
        raise ValidationError(f"fixture acts on {h.n} qubits, scenario on {spec.n}")
    return h


def run_trial(spec: ScenarioSpec, scenario: int, trial: int) -> TrialRecord:
    """One tester execution on a freshly drawn instance and oracle."""
    s = spec.property_set()
    inst_seq, tester_seq = substreams(spec.seed, spec.trials)[trial].spawn(2)
    h = _instance(spec, s, inst_seq)
    oracle = EvolutionOracle(h)
    tester_seed = int(tester_seq.generate_state(1)[0])
    if spec.tester == "single":
        report = run_single_test(
            oracle, build_mub_family(spec.n), s, TestConfig(spec.eps, spec.t, spec.n_rounds, tester_seed)
        )
        size_ok = size_hypothesis(s, spec.n, spec.eps)
    elif spec.tester == "ancilla":
        report = run_ancilla_test(oracle, None, s, spec.eps, tester_seed)
        size_ok = True
    else:
        cfg = TolerantConfig(spec.eps1, spec.eps2, tester_seed, spec.t, spec.n_rounds)
        report = run_tolerant_test(oracle, build_mub_family(spec.n), s, cfg)
        size_ok = tolerant_size_hypothesis(s, spec.n, spec.eps1, spec.eps2)
    if report.queries_used != oracle.queries or not math.isclose(
        report.total_evolution_time, oracle.total_time, rel_tol=1e-12, abs_tol=1e-12
    ):
        raise ConsistencyError(
            f"report claims {report.queries_used} queries / {report.total_evolution_time} time, "
            f"oracle logged {oracle.queries} / {oracle.total_time}"
        )
    expected = {"null": H0, "far": H1}.get(spec.hypothesis)
    return TrialRecord(
        scenario=scenario,
        trial=trial,
        seed=spec.seed,
        hypothesis=spec.hypothesis,
        verdict=report.verdict,
        correct=None if expected is None else report.verdict == expected,
        queries=int(report.queries_used),
        total_time=float(report.total_evolution_time),
        violation_rate=float(report.violation_rate),
        distance=float(distance_to_property(h, s)),
        size_hypothesis=bool(size_ok),
    )


def _run_chunk(args: tuple[ScenarioSpec, int, Sequence[int]]) -> list[TrialRecord]:
    spec, scenario, trials = args
    return [run_trial(spec, scenario, t) for t in trials]


def summarize(scenario: int, spec: ScenarioSpec, records: Sequence[TrialRecord]) -> ScenarioSummary:
    n = len(records)
    accepts = sum(r.verdict == H0 for r in records)
    if spec.hypothesis == "custom":
        correct_freq, hits = None, accepts
    else:
        hits = sum(bool(r.correct) for r in records)
        correct_freq = hits / n
    low, high = wilson_interval(hits, n)
    eps = spec.eps1 if spec.tester == "tolerant" else spec.eps
    if spec.hypothesis == "far":
        far_eps = spec.eps2 if spec.tester == "tolerant" else spec.eps
        promise = all(r.distance >= far_eps - 1e-12 for r in records)
    elif spec.hypothesis == "null":
        promise = all(r.distance <= (eps if spec.tester == "tolerant" else 0.0) + 1e-12 for r in records)
    else:
        promise = True
    return ScenarioSummary(
        scenario=scenario,
        spec=spec,
        trials=n,
        accept_frequency=accepts / n,
        correct_frequency=correct_freq,
        ci_low=low,
        ci_high=high,
        mean_queries=float(np.mean([r.queries for r in records])),
        mean_time=float(np.mean([r.total_time for r in records])),
        size_hypothesis=all(r.size_hypothesis for r in records),
        promise_ok=promise,
    )


def acceptance_sweep(grid: Sequence[ScenarioSpec], workers: int = 1) -> SweepReport:
    """Run every scenario of ``grid``; the interval is for the correct-verdict frequency (acceptance for custom)."""
    if not grid:
        raise ValidationError("sweep grid is empty")
    jobs = []
    for idx, spec in enumerate(grid):
        build_mub_family(spec.n)  # warm the cache before forking
        chunk = max(1, spec.trials // max(1, 4 * workers))
        for start in range(0, spec.trials, chunk):
            jobs.append((spec, idx, range(start, min(spec.trials, start + chunk))))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_chunk, jobs))
    else:
        parts = [_run_chunk(job) for job in jobs]
    records = sorted((r for part in parts for r in part), key=lambda r: (r.scenario, r.trial))
    summaries = [
        summarize(idx, spec, [r for r in records if r.scenario == idx]) for idx, spec in enumerate(grid)
    ]
    return SweepReport(summaries, records)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


def _rows_for(results, aggregated: bool) -> tuple[list[dict[str, Any]], tuple[str, ...]]:
    if isinstance(results, SweepReport):
        return (results.summary_rows(), SUMMARY_FIELDS) if aggregated else (results.trial_rows(), TRIAL_FIELDS)
    rows = [r.as_dict() if hasattr(r, "as_dict") else dict(r) for r in results]
    fields = tuple(rows[0]) if rows else (SUMMARY_FIELDS if aggregated else TRIAL_FIELDS)
    return rows, fields


def render_report(results, fmt: str) -> str:
    """Serialise to JSON lines (one object per trial or check) or CSV (one row per scenario or check)."""
    if fmt == "jsonl":
        rows, fields = _rows_for(results, aggregated=False)
        return "".join(json.dumps({k: row[k] for k in fields}) + "\n" for row in rows)
    if fmt == "csv":
        rows, fields = _rows_for(results, aggregated=True)
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(fields), lineterminator="\n", extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _csv_cell(row.get(k)) for k in fields})
        return buf.getvalue()
    raise ValidationError(f"unknown report format {fmt!r}")


def _csv_cell(v):
    if isinstance(v, (dict, list)):
        return json.dumps(v, sort_keys=True)
    return "" if v is None else v


def emit_report(results, fmt: str, path: str | Path) -> None:
    text = render_report(results, fmt)
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise ReportError(f"cannot write {fmt} report to {path}: {exc.strerror or exc}") from exc


def read_jsonl(path: str | Path) -> list[dict[str, Any]]:
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ReportError(f"cannot read report {path}: {exc.strerror or exc}") from exc
    return [json.loads(line) for line in lines if line.strip()]


def trial_records_from_rows(rows: Iterable[dict[str, Any]]) -> list[TrialRecord]:
    return [TrialRecord(**row) for row in rows]
