"""Hamiltonian property testers driven only through :class:`EvolutionOracle` queries.

* :func:`run_single_test` stops at the first violation (intolerant test).
* :func:`run_multi_test` collects one data set and thresholds it per property.
* :func:`run_ancilla_test` enlarges the system with idle qubits so the size
  condition on ``S`` holds, then runs the single test.
* :func:`run_tolerant_test` thresholds the violation rate to separate
  ``eps1``-close from ``eps2``-far Hamiltonians.

Every round picks a basis uniformly among the ``d + 1`` bases and an input
state uniformly among the ``d`` states of that basis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .config import dense_cap
from .errors import ResourceLimitError, ValidationError
from .evolution import RoundLog, evolve_unitary
from .hamiltonian import Hamiltonian, PropertySet, as_pauli, hamiltonian_to_dense
from .mub import MubFamily, build_mub_family
from .relation import RelationChecker, relates_under_property
from .rng import SeedLike, make_rng

LN3 = math.log(3.0)

H0 = "H0"
H1 = "H1"


def _ceil(x: float) -> int:
    # Guard against values like 611.0000000001 produced by rounding in t = eps / 6.
    return int(math.ceil(x - 1e-9))


@dataclass(frozen=True)
class TestConfig:
    """Parameters of the single-property tester; ``t`` and ``n_rounds`` default to the analysed values."""

    __test__ = False  # not a pytest class

    eps: float
    t: float | None = None
    n_rounds: int | None = None
    seed: SeedLike = 0
    assumption_check: bool = True

    def __post_init__(self) -> None:
        if not 0 < self.eps < 1:
            raise ValidationError(f"eps must lie in (0, 1), got {self.eps}")
        if self.t is not None and not (self.t >= 0 and math.isfinite(self.t)):
            raise ValidationError(f"t must be finite and non-negative, got {self.t}")
        if self.n_rounds is not None and self.n_rounds < 1:
            raise ValidationError("n_rounds must be positive")

    @property
    def time(self) -> float:
        return self.eps / 6 if self.t is None else self.t

    @property
    def rounds(self) -> int:
        if self.n_rounds is not None:
            return self.n_rounds
        t = self.time
        if t == 0:
            raise ValidationError("t = 0 needs an explicit n_rounds")
        return _ceil(2 * LN3 / (t * t * self.eps * self.eps))


@dataclass(frozen=True)
class TolerantConfig:
    eps1: float
    eps2: float
    seed: SeedLike = 0
    t: float | None = None
    n_rounds: int | None = None

    def __post_init__(self) -> None:
        if not (0 <= self.eps1 < 1 and 0 <= self.eps2 < 1):
            raise ValidationError("eps1 and eps2 must lie in [0, 1)")
        if self.eps1 >= self.eps2:
            raise ValidationError(f"need eps1 < eps2, got {self.eps1} >= {self.eps2}")

    @property
    def gap(self) -> float:
        return self.eps2**2 - self.eps1**2

    @property
    def time(self) -> float:
        return math.sqrt(self.gap / 20) if self.t is None else self.t

    @property
    def rounds(self) -> int:
        if self.n_rounds is not None:
            return self.n_rounds
        t = self.time
        return _ceil(30 * LN3 * (self.eps2**2 + self.eps1**2) / (t * t * self.gap**2))

    @property
    def threshold(self) -> float:
        t = self.time
        return t * t * (2 * self.eps2**2 + 3 * self.eps1**2) / 5


@dataclass
class TestReport:
    __test__ = False

    verdict: str
    rounds: RoundLog
    queries_used: int
    total_evolution_time: float
    parameters: dict[str, Any] = field(default_factory=dict)
    assumption_flags: dict[str, bool] = field(default_factory=dict)

    @property
    def violation_rate(self) -> float:
        return float(self.rounds.violations.mean()) if len(self.rounds) else 0.0


@dataclass
class MultiTestReport:
    verdicts: list[str]
    violation_rates: list[float]
    threshold: float
    queries_used: int
    total_evolution_time: float
    parameters: dict[str, Any] = field(default_factory=dict)
    assumption_flags: list[dict[str, bool]] = field(default_factory=list)


def size_hypothesis(s: PropertySet, n: int, eps: float) -> bool:
    """``|S u {I}| <= (2^n + 1) eps^4 / 144``."""
    return s.size_with_identity <= ((1 << n) + 1) * eps**4 / 144


def tolerant_size_hypothesis(s: PropertySet, n: int, eps1: float, eps2: float) -> bool:
    return s.size_with_identity <= ((1 << n) + 1) * (eps2**2 - eps1**2) ** 2 / 400


def single_test_parameters(eps: float) -> tuple[float, int]:
    cfg = TestConfig(eps)
    return cfg.time, cfg.rounds


def multi_test_rounds(eps: float, num_properties: int, delta: float) -> int:
    t = eps / 6
    return _ceil(100 * math.log(num_properties / delta) / (t * t * eps * eps))


def ancilla_count(n: int, size_with_identity: int, eps: float) -> int:
    """Idle qubits needed so that ``|S u {I}|`` meets the size condition on ``n + n_aux`` qubits."""
    if size_with_identity <= ((1 << n) + 1) * eps**4 / 144:
        return 0
    return max(0, _ceil(math.log2(144 * size_with_identity / ((1 << n) * eps**4))))


# ---------------------------------------------------------------------------
# Algorithm bodies
# ---------------------------------------------------------------------------


def _single_rounds(oracle, family: MubFamily, s: PropertySet, t: float, n_rounds: int, rng) -> RoundLog:
    checker = RelationChecker(family, s)
    nb, d = family.num_bases, family.d
    bases, states, outcomes, flags = [], [], [], []
    for _ in range(n_rounds):
        i = int(rng.integers(nb))
        j = int(rng.integers(d))
        l = oracle.measure(family, i, j, t, rng)
        bad = not checker.related(i, j, l)
        bases.append(i)
        states.append(j)
        outcomes.append(l)
        flags.append(bad)
        if bad:
            break
    return RoundLog(bases, states, outcomes, flags, t)


def run_single_test(oracle, family: MubFamily, s: PropertySet, config: TestConfig) -> TestReport:
    """Intolerant test: answer H1 at the first round whose outcome is unrelated to its input."""
    if s.n != family.n:
        raise ValidationError(f"property acts on {s.n} qubits, family on {family.n}")
    t, n_rounds = config.time, config.rounds
    log = _single_rounds(oracle, family, s, t, n_rounds, make_rng(config.seed))
    verdict = H1 if log.violations.any() else H0
    flags = {"size_hypothesis": size_hypothesis(s, family.n, config.eps)} if config.assumption_check else {}
    params = {"eps": config.eps, "t": t, "N": n_rounds, "n": family.n, "property_size": len(s)}
    return TestReport(verdict, log, len(log), len(log) * t, params, flags)


def run_multi_test(
    oracle,
    family: MubFamily,
    properties: Sequence[PropertySet],
    eps: float,
    delta: float,
    seed: SeedLike = 0,
) -> MultiTestReport:
    """Measure once, then answer H0 for property ``S`` iff its violation rate is at most ``(3/8) t^2 eps^2``."""
    if not properties:
        raise ValidationError("need at least one property")
    if not 0 < eps < 1 or not 0 < delta < 1:
        raise ValidationError("eps and delta must lie in (0, 1)")
    for s in properties:
        if s.n != family.n:
            raise ValidationError(f"property acts on {s.n} qubits, family on {family.n}")
    t = eps / 6
    n_rounds = multi_test_rounds(eps, len(properties), delta)
    rng = make_rng(seed)
    bases = rng.integers(family.num_bases, size=n_rounds)
    states = rng.integers(family.d, size=n_rounds)
    outcomes = oracle.measure_batch(family, bases, states, t, rng)
    threshold = 3 * t * t * eps * eps / 8
    verdicts, rates, flags = [], [], []
    for s in properties:
        rate = float(RelationChecker(family, s).violations(bases, states, outcomes).mean())
        rates.append(rate)
        verdicts.append(H0 if rate <= threshold else H1)
        flags.append({"size_hypothesis": size_hypothesis(s, family.n, eps)})
    params = {"eps": eps, "delta": delta, "t": t, "N": n_rounds, "M": len(properties), "n": family.n}
    return MultiTestReport(verdicts, rates, threshold, n_rounds, n_rounds * t, params, flags)


def run_ancilla_test(
    oracle,
    family_ext: MubFamily | None,
    s: PropertySet,
    eps: float,
    seed: SeedLike = 0,
) -> TestReport:
    """Single test on the system plus idle ancillas, sized from ``|S u {I}|`` and ``eps``.

    ``family_ext`` may be ``None``, in which case the family on ``n + n_aux``
    qubits is built here.
    """
    n = oracle.n
    if s.n != n:
        raise ValidationError(f"property acts on {s.n} qubits, oracle on {n}")
    n_aux = ancilla_count(n, s.size_with_identity, eps)
    if n + n_aux > dense_cap():
        raise ResourceLimitError(
            f"ancilla test needs n_aux={n_aux} (total {n + n_aux} qubits), above the dense cap of {dense_cap()}"
        )
    if family_ext is None:
        family_ext = build_mub_family(n + n_aux)
    if family_ext.n != n + n_aux:
        raise ValidationError(f"extended family must act on {n + n_aux} qubits, got {family_ext.n}")
    report = run_single_test(oracle, family_ext, s.lifted(n_aux), TestConfig(eps, seed=seed))
    report.parameters.update({"n": n, "n_aux": n_aux})
    report.assumption_flags["size_hypothesis_original"] = size_hypothesis(s, n, eps)
    return report


def run_tolerant_test(oracle, family: MubFamily, s: PropertySet, config: TolerantConfig) -> TestReport:
    """H0 iff the violation rate over all ``N`` rounds is at most ``(1/5) t^2 (2 eps2^2 + 3 eps1^2)``."""
    if s.n != family.n:
        raise ValidationError(f"property acts on {s.n} qubits, family on {family.n}")
    t, n_rounds, threshold = config.time, config.rounds, config.threshold
    rng = make_rng(config.seed)
    bases = rng.integers(family.num_bases, size=n_rounds)
    states = rng.integers(family.d, size=n_rounds)
    outcomes = oracle.measure_batch(family, bases, states, t, rng)
    viol = RelationChecker(family, s).violations(bases, states, outcomes)
    log = RoundLog(bases, states, outcomes, viol, t)
    verdict = H0 if viol.mean() <= threshold else H1
    params = {
        "eps1": config.eps1,
        "eps2": config.eps2,
        "t": t,
        "N": n_rounds,
        "threshold": threshold,
        "n": family.n,
        "property_size": len(s),
    }
    flags = {"size_hypothesis": tolerant_size_hypothesis(s, family.n, config.eps1, config.eps2)}
    return TestReport(verdict, log, n_rounds, n_rounds * t, params, flags)


def commuting_case_rate(h: Hamiltonian, k: int, t: float) -> float:
    """Weight outside ``{|j| <= k}`` of ``e^{itH}|0...0>`` for an X-type Hamiltonian.

    For X-type ``H`` the amplitude on ``|j>`` is, to leading order, ``i t`` times
    the coefficient of ``X^j``, so the returned weight approaches
    ``t^2 sum_{|j|>k} alpha_j^2`` as ``t -> 0``.
    """
    hp = as_pauli(h)
    if any(p.z for p in hp.coeffs):
        raise ValidationError("commuting-case rate needs an X-type Hamiltonian")
    dense = hamiltonian_to_dense(hp)
    psi = evolve_unitary(dense, t)[:, 0]
    weights = np.bitwise_count(np.arange(dense.d, dtype=np.uint64)).astype(np.int64)
    return float(np.sum(np.abs(psi[weights > k]) ** 2))


__all__ = [
    "H0",
    "H1",
    "MultiTestReport",
    "TestConfig",
    "TestReport",
    "TolerantConfig",
    "ancilla_count",
    "commuting_case_rate",
    "multi_test_rounds",
    "relates_under_property",
    "run_ancilla_test",
    "run_multi_test",
    "run_single_test",
    "run_tolerant_test",
    "single_test_parameters",
    "size_hypothesis",
    "tolerant_size_hypothesis",
]
