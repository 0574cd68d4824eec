"""Independent checks: Weingarten values, Haar moments, gadget statistics,
short-time distance relations, MUB invariants and a dense re-derivation of
the one-round violation rate.

Monte Carlo checks pass when the estimate lies within five standard errors
of the reference; standard errors are sample standard deviations divided by
the square root of the number of independent samples.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
import scipy.linalg
from scipy.optimize import minimize_scalar

from .errors import DomainError, ValidationError
from .hamiltonian import (
    Hamiltonian,
    PropertySet,
    balanced_observable,
    hamiltonian_to_dense,
)
from .haar import haar_unitaries, haar_unitary, haar_vectors
from .mub import MubFamily
from .pauli import (
    PauliString,
    SignedPauli,
    apply_pauli,
    lex_ordered_bits,
    pauli_to_matrix,
    symplectic_products,
)

SIGMAS = 5.0
_CHUNK = 10_000

__all__ = [
    "CheckResult",
    "MomentSpec",
    "dense_violation_rate",
    "dist_inf",
    "gadget_separation_stats",
    "haar_moment_check",
    "haar_s2_closed_form",
    "haar_unitary",
    "moment_formula",
    "mub_invariant_suite",
    "norm_relation_probe",
    "spiked_concentration_probe",
    "weingarten_monte_carlo",
    "weingarten_value",
]


@dataclass
class CheckResult:
    name: str
    measured: float
    reference: float
    deviation: float
    tolerance: float
    passed: bool
    details: dict[str, Any] = field(default_factory=dict)

    def as_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "measured": self.measured,
            "reference": self.reference,
            "deviation": self.deviation,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "details": self.details,
        }


def _result(name: str, measured, reference, tolerance: float, **details) -> CheckResult:
    deviation = float(abs(measured - reference))
    return CheckResult(
        name,
        _real_or_pair(measured),
        _real_or_pair(reference),
        deviation,
        float(tolerance),
        bool(deviation <= tolerance),
        details,
    )


def _real_or_pair(v):
    v = complex(v)
    return v.real if v.imag == 0 else [v.real, v.imag]


# ---------------------------------------------------------------------------
# Weingarten function
# ---------------------------------------------------------------------------

_WG_TABLE = {
    (1,): (lambda d: 1 / d, lambda d: d),
    (2,): (lambda d: -1 / (d * (d * d - 1)), lambda d: d * (d * d - 1)),
    (1, 1): (lambda d: 1 / (d * d - 1), lambda d: d * d - 1),
    (3,): (lambda d: 2 / (d * (d * d - 1) * (d * d - 4)), lambda d: d * (d * d - 1) * (d * d - 4)),
    (2, 1): (lambda d: -1 / ((d * d - 1) * (d * d - 4)), lambda d: (d * d - 1) * (d * d - 4)),
    (1, 1, 1): (
        lambda d: (d * d - 2) / (d * (d * d - 1) * (d * d - 4)),
        lambda d: d * (d * d - 1) * (d * d - 4),
    ),
    (4,): (
        lambda d: -5 / (d**7 - 14 * d**5 + 49 * d**3 - 36 * d),
        lambda d: d**7 - 14 * d**5 + 49 * d**3 - 36 * d,
    ),
    (2, 2): (
        lambda d: (d * d + 6) / (d**8 - 14 * d**6 + 49 * d**4 - 36 * d**2),
        lambda d: d**8 - 14 * d**6 + 49 * d**4 - 36 * d**2,
    ),
    (3, 1): (
        lambda d: (2 * d * d - 3) / (d**8 - 14 * d**6 + 49 * d**4 - 36 * d**2),
        lambda d: d**8 - 14 * d**6 + 49 * d**4 - 36 * d**2,
    ),
    (2, 1, 1): (lambda d: -1 / (d**5 - 10 * d**3 + 9 * d), lambda d: d**5 - 10 * d**3 + 9 * d),
    (1, 1, 1, 1): (
        lambda d: (d**4 - 8 * d * d + 6) / (d**8 - 14 * d**6 + 49 * d**4 - 36 * d**2),
        lambda d: d**8 - 14 * d**6 + 49 * d**4 - 36 * d**2,
    ),
}

CYCLE_TYPES: tuple[tuple[int, ...], ...] = tuple(_WG_TABLE)


def parse_cycle_type(spec: str | Sequence[int]) -> tuple[int, ...]:
    """Accept ``(2, 1)``, ``[2, 1]`` or cycle notation such as ``"(12)(3)"``."""
    if isinstance(spec, str):
        cycles = [c for c in spec.replace(" ", "").strip("()").split(")(") if c]
        lengths = [len(c) for c in cycles]
    else:
        lengths = [int(v) for v in spec]
    return tuple(sorted(lengths, reverse=True))


def weingarten_value(cycle_type: str | Sequence[int], d: int) -> float:
    """Unitary Weingarten function for permutations of at most four points."""
    key = parse_cycle_type(cycle_type)
    if key not in _WG_TABLE:
        raise DomainError(f"no tabulated value for cycle type {key}")
    value, denominator = _WG_TABLE[key]
    if denominator(d) == 0:
        raise DomainError(f"cycle type {key} is singular at d={d}")
    return float(value(d))


def cycles_of(perm: Sequence[int]) -> list[list[int]]:
    seen, out = set(), []
    for start in range(len(perm)):
        if start in seen:
            continue
        cyc, k = [], start
        while k not in seen:
            seen.add(k)
            cyc.append(k)
            k = perm[k]
        out.append(cyc)
    return out


def cycle_type_of(perm: Sequence[int]) -> tuple[int, ...]:
    return tuple(sorted((len(c) for c in cycles_of(perm)), reverse=True))


def _compose(a: Sequence[int], b: Sequence[int]) -> tuple[int, ...]:
    """``(a b)(k) = a(b(k))``."""
    return tuple(a[b[k]] for k in range(len(b)))


def _inverse(a: Sequence[int]) -> tuple[int, ...]:
    inv = [0] * len(a)
    for k, v in enumerate(a):
        inv[v] = k
    return tuple(inv)


def _cycle_trace(perm: Sequence[int], mats: Sequence[np.ndarray]) -> complex:
    """Product over cycles of ``Tr(M_k M_{perm(k)} M_{perm^2(k)} ...)``."""
    out = 1.0 + 0j
    for cyc in cycles_of(perm):
        prod = mats[cyc[0]]
        for k in cyc[1:]:
            prod = prod @ mats[k]
        out *= np.trace(prod)
    return out


def moment_formula(a_mats: Sequence[np.ndarray], b_mats: Sequence[np.ndarray]) -> complex:
    """Exact ``E[Tr(U B_1 U^* A_1 ... U B_m U^* A_m)]`` over Haar ``U`` for ``m <= 4``.

    Sum over pairs of permutations ``(a, b)`` of
    ``Wg(b a^{-1}) Tr_{b^{-1}}(B) Tr_{a g}(A)`` with ``g = (1 2 ... m)``.
    """
    m = len(a_mats)
    if m != len(b_mats) or not 1 <= m <= 4:
        raise ValidationError("need 1 <= m <= 4 matching A and B matrices")
    d = a_mats[0].shape[0]
    gamma = tuple((k + 1) % m for k in range(m))
    perms = list(itertools.permutations(range(m)))
    tr_b = {beta: _cycle_trace(_inverse(beta), b_mats) for beta in perms}
    tr_a = {alpha: _cycle_trace(_compose(alpha, gamma), a_mats) for alpha in perms}
    total = 0j
    for alpha in perms:
        inv_alpha = _inverse(alpha)
        for beta in perms:
            wg = weingarten_value(cycle_type_of(_compose(beta, inv_alpha)), d)
            total += wg * tr_b[beta] * tr_a[alpha]
    return complex(total)


def weingarten_monte_carlo(
    d: int,
    samples: int,
    rng: np.random.Generator,
    cycle_types: Sequence[tuple[int, ...]] = CYCLE_TYPES,
    tuples_per_sample: int = 16,
) -> dict[tuple[int, ...], tuple[float, float]]:
    """Estimate ``Wg(pi, d) = E[prod_k U_{a_k b_k} conj(U_{a_k b_{pi(k)}})]`` with distinct rows ``a`` and columns ``b``.

    Each Haar sample is averaged over ``tuples_per_sample`` random index
    choices; returns ``{cycle_type: (mean, standard_error)}``.
    """
    reps = {ct: _representative(ct) for ct in cycle_types}
    m_max = max(len(p) for p in reps.values())
    if d < m_max:
        raise ValidationError(f"need d >= {m_max} distinct indices")
    sums = {ct: [] for ct in cycle_types}
    done = 0
    while done < samples:
        size = min(_CHUNK, samples - done)
        us = haar_unitaries(d, size, rng)
        rows = np.argsort(rng.random((size, tuples_per_sample, d)), axis=2)[:, :, :m_max]
        cols = np.argsort(rng.random((size, tuples_per_sample, d)), axis=2)[:, :, :m_max]
        idx = np.arange(size)[:, None, None]
        for ct, perm in reps.items():
            m = len(perm)
            a, b = rows[:, :, :m], cols[:, :, :m]
            left = us[idx, a, b]
            right = np.conj(us[idx, a, b[:, :, list(perm)]])
            vals = np.prod(left * right, axis=2).real.mean(axis=1)
            sums[ct].append(vals)
        done += size
    out = {}
    for ct, chunks in sums.items():
        v = np.concatenate(chunks)
        out[ct] = (float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size)))
    return out


def _representative(ct: tuple[int, ...]) -> tuple[int, ...]:
    perm, start = [], 0
    for length in ct:
        block = list(range(start, start + length))
        perm += block[1:] + block[:1]
        start += length
    return tuple(perm)


# ---------------------------------------------------------------------------
# Haar moment checks
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MomentSpec:
    """Monte Carlo target ``E[Tr(U B_1 U^* A_1 ... U B_m U^* A_m)]``.

    ``pattern`` is a free-form tag ("conjugation", "haar-s2", "power", ...)
    used only for reporting.
    """

    pattern: str
    a_mats: tuple[np.ndarray, ...]
    b_mats: tuple[np.ndarray, ...]
    samples: int = 10_000

    def __post_init__(self) -> None:
        if self.samples < 1000:
            raise ValidationError("moment checks need at least 10^3 samples")
        if len(self.a_mats) != len(self.b_mats) or not 1 <= len(self.a_mats) <= 4:
            raise ValidationError("need 1 <= m <= 4 matching A and B matrices")

    @classmethod
    def conjugation(cls, a: np.ndarray, b: np.ndarray, samples: int = 10_000) -> MomentSpec:
        return cls("conjugation", (a,), (b,), samples)

    @classmethod
    def power(cls, a: np.ndarray, b: np.ndarray, m: int, samples: int = 10_000) -> MomentSpec:
        """``E[Tr((U B U^* A)^m)]``."""
        return cls(f"power-{m}", (a,) * m, (b,) * m, samples)

    @classmethod
    def haar_s2(cls, d: int, eta_t: float, rho: np.ndarray, phi: np.ndarray, samples: int = 10_000) -> MomentSpec:
        """``E[<phi| V M V^* rho V S^* V^* |phi>]`` for the rank-one spike pattern.

        ``M = diag(1 - e^{-i eta t}, 0, ...)`` and ``S = I - M/2``.
        """
        m_mat, s_mat = spike_matrices(d, eta_t)
        proj = np.outer(phi, phi.conj())
        return cls("haar-s2", (rho, proj), (m_mat, s_mat.conj().T), samples)


def spike_matrices(d: int, eta_t: float) -> tuple[np.ndarray, np.ndarray]:
    m_mat = np.zeros((d, d), dtype=complex)
    m_mat[0, 0] = 1 - np.exp(-1j * eta_t)
    return m_mat, np.eye(d) - m_mat / 2


def haar_s2_closed_form(m_mat: np.ndarray, s_mat: np.ndarray, rho: np.ndarray, phi: np.ndarray) -> complex:
    """Two-point Weingarten evaluation of ``E[<phi| V M V^* rho V S^* V^* |phi>]`` (``Tr rho = 1``, unit ``phi``).

    With ``p = <phi|rho|phi>``:
    ``[d Tr(M S^*) + d p Tr(M) Tr(S^*) - p Tr(M S^*) - Tr(M) Tr(S^*)] / (d (d^2 - 1))``.
    """
    d = m_mat.shape[0]
    p = complex(np.vdot(phi, rho @ phi))
    s_dag = s_mat.conj().T
    tr_ms = np.trace(m_mat @ s_dag)
    tr_m_tr_s = np.trace(m_mat) * np.trace(s_dag)
    return complex((d * tr_ms + d * p * tr_m_tr_s - p * tr_ms - tr_m_tr_s) / (d * (d * d - 1)))


def haar_moment_check(spec: MomentSpec, rng: np.random.Generator) -> CheckResult:
    """Monte Carlo estimate versus :func:`moment_formula`, passing within five standard errors."""
    a_mats, b_mats = spec.a_mats, spec.b_mats
    d = a_mats[0].shape[0]
    reference = moment_formula(a_mats, b_mats)
    values = []
    done = 0
    while done < spec.samples:
        size = min(_CHUNK, spec.samples - done)
        us = haar_unitaries(d, size, rng)
        uh = np.conj(np.transpose(us, (0, 2, 1)))
        prod = np.broadcast_to(np.eye(d, dtype=complex), us.shape)
        for a, b in zip(a_mats, b_mats):
            prod = prod @ us @ b @ uh @ a
        values.append(np.trace(prod, axis1=1, axis2=2))
        done += size
    v = np.concatenate(values)
    mean = complex(v.mean())
    se = math.sqrt(v.real.var(ddof=1) + v.imag.var(ddof=1)) / math.sqrt(v.size)
    tol = max(SIGMAS * se, 1e-9 * max(1.0, abs(reference)))
    return _result(f"haar-moment:{spec.pattern}", mean, reference, tol, sigma=se, samples=spec.samples, d=d)


# ---------------------------------------------------------------------------
# Lower-bound gadgets
# ---------------------------------------------------------------------------


def gadget_separation_stats(n: int, eps: float, samples: int, rng: np.random.Generator) -> CheckResult:
    """Moments of ``X = (1/d)||H_U - H_V||_2^2`` for independent ``H_U = eps U O U^*``.

    Passes when ``E[X]`` is within five standard errors of ``2 eps^2`` and
    ``E[X^2] <= 6 eps^2`` up to five standard errors.  The exact value
    ``E[X^2] = 4 eps^4 (1 + 1/(d^2 - 1))`` is also compared (details only).
    """
    if samples < 1000:
        raise ValidationError("need at least 10^3 samples")
    d = 1 << n
    obs = balanced_observable(n)
    xs = []
    done = 0
    while done < samples:
        size = min(_CHUNK, samples - done)
        us = haar_unitaries(d, size, rng)
        vs = haar_unitaries(d, size, rng)
        hu = eps * us @ obs @ np.conj(np.transpose(us, (0, 2, 1)))
        hv = eps * vs @ obs @ np.conj(np.transpose(vs, (0, 2, 1)))
        xs.append(np.sum(np.abs(hu - hv) ** 2, axis=(1, 2)) / d)
        done += size
    x = np.concatenate(xs)
    second, se2 = float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))
    x2 = x * x
    fourth, se4 = float(x2.mean()), float(x2.std(ddof=1) / math.sqrt(x2.size))
    exact_fourth = 4 * eps**4 * (1 + 1 / (d * d - 1))
    second_ok = abs(second - 2 * eps**2) <= SIGMAS * se2
    fourth_ok = fourth <= 6 * eps**2 + SIGMAS * se4
    res = _result(
        "gadget-separation",
        second,
        2 * eps**2,
        SIGMAS * se2,
        fourth=fourth,
        fourth_sigma=se4,
        fourth_bound=6 * eps**2,
        fourth_bound_ok=bool(fourth_ok),
        fourth_exact=exact_fourth,
        fourth_exact_ok=bool(abs(fourth - exact_fourth) <= SIGMAS * se4),
        second_sigma=se2,
        samples=samples,
    )
    res.passed = bool(second_ok and fourth_ok)
    return res


def spiked_concentration_probe(
    n: int,
    eta: float,
    k_mat: np.ndarray | Hamiltonian,
    samples: int,
    rng: np.random.Generator,
    thresholds: Sequence[float] = (0.1, 0.25, 0.5),
) -> CheckResult:
    """Distribution of ``f(V) = <v|K|v>`` over Haar ``|v> = V|0>``.

    Passes when the mean is within five standard errors of ``Tr(K)/d`` (zero
    for traceless ``K``) and the empirical tail ``P[f >= s]`` is
    non-increasing over ``thresholds``.  ``Tr(H_V K) = eta f(V)`` for the
    spiked Hamiltonian is reported alongside.
    """
    k = k_mat if isinstance(k_mat, np.ndarray) else hamiltonian_to_dense(k_mat).matrix
    d = 1 << n
    if k.shape != (d, d):
        raise ValidationError("K does not act on n qubits")
    if np.max(np.abs(np.linalg.eigvalsh(k))) > 1 + 1e-12:
        raise ValidationError("K must have operator norm at most 1")
    vs = haar_vectors(d, samples, rng)
    f = np.einsum("si,ij,sj->s", vs.conj(), k, vs).real
    se = float(f.std(ddof=1) / math.sqrt(f.size)) if samples > 1 else 0.0
    tails = [float(np.mean(f >= s)) for s in thresholds]
    reference = float(np.trace(k).real / d)
    tol = max(SIGMAS * se, 1e-12)
    res = _result(
        "spiked-concentration",
        float(f.mean()),
        reference,
        tol,
        sigma=se,
        tails=dict(zip(map(str, thresholds), tails)),
        tails_monotone=all(a >= b for a, b in zip(tails, tails[1:])),
        coupling_mean=float(eta * f.mean()),
    )
    res.passed = res.passed and res.details["tails_monotone"]
    return res


# ---------------------------------------------------------------------------
# Short-time distances
# ---------------------------------------------------------------------------


def choi_state(u: np.ndarray) -> np.ndarray:
    """Normalised Choi state ``(U (x) I)|Omega><Omega|(U (x) I)^*``."""
    d = u.shape[0]
    omega = np.eye(d).reshape(-1) / math.sqrt(d)  # |Omega> = sum_i |ii> / sqrt d
    psi = np.kron(u, np.eye(d)) @ omega
    return np.outer(psi, psi.conj())


def choi_distance(u: np.ndarray, v: np.ndarray) -> float:
    """``(1/sqrt 2) ||C(U) - C(V)||_2``."""
    return float(np.linalg.norm(choi_state(u) - choi_state(v)) / math.sqrt(2))


def dist_inf(u: np.ndarray, v: np.ndarray, grid: int = 720) -> float:
    """``min_phi ||U - e^{i phi} V||_inf``: phase grid followed by bounded refinement."""
    phis = np.linspace(-np.pi, np.pi, grid, endpoint=False)

    def cost(phi: float) -> float:
        return float(np.linalg.norm(u - np.exp(1j * phi) * v, 2))

    values = [cost(p) for p in phis]
    best = phis[int(np.argmin(values))]
    step = 2 * np.pi / grid
    opt = minimize_scalar(cost, bounds=(best - step, best + step), method="bounded", options={"xatol": 1e-13})
    return float(min(opt.fun, min(values)))


def _extrapolated_slope(ts: Sequence[float], values: Sequence[float]) -> float:
    """Richardson step on ``D(t)/t = c0 + c1 t + ...`` using the two smallest times."""
    pairs = sorted(zip(ts, values))[:2]
    (ta, da), (tb, db) = pairs
    fa, fb = da / ta, db / tb
    return float((tb * fa - ta * fb) / (tb - ta))


def norm_relation_probe(h: Hamiltonian, h_tilde: Hamiltonian, t_list: Sequence[float]) -> CheckResult:
    """Leading short-time slopes of the Choi distance and of ``dist_inf``.

    The Choi slope is compared with ``(1/sqrt d)||H - H~||_2``.  Because the
    global phase absorbs the identity component of ``H - H~``, the
    ``dist_inf`` slope equals half the spectral width of ``H - H~``; it is
    compared with that value, and its placement between ``||H - H~||_inf / 2``
    and ``||H - H~||_inf`` is recorded.  All comparisons use a 5% relative
    tolerance.
    """
    a, b = hamiltonian_to_dense(h), hamiltonian_to_dense(h_tilde)
    if a.n != b.n:
        raise ValidationError("Hamiltonians act on different numbers of qubits")
    if abs(np.trace(a.matrix) - np.trace(b.matrix)) > 1e-10:
        raise ValidationError("norm relations need Tr H = Tr H~")
    ts = sorted(float(t) for t in t_list)
    if len(ts) < 2 or ts[0] <= 0:
        raise ValidationError("need at least two positive times")
    d = a.d
    diff = a.matrix - b.matrix
    ev = np.linalg.eigvalsh(diff)
    frob = float(np.linalg.norm(diff) / math.sqrt(d))
    op = float(max(abs(ev[0]), abs(ev[-1])))
    half_width = float((ev[-1] - ev[0]) / 2)
    ea, va = np.linalg.eigh(a.matrix)
    eb, vb = np.linalg.eigh(b.matrix)
    choi, dinf = [], []
    for t in ts:
        ua = (va * np.exp(-1j * t * ea)) @ va.conj().T
        ub = (vb * np.exp(-1j * t * eb)) @ vb.conj().T
        choi.append(choi_distance(ua, ub))
        dinf.append(dist_inf(ua, ub))
    choi_slope = _extrapolated_slope(ts, choi)
    dinf_slope = _extrapolated_slope(ts, dinf)
    rel = 0.05
    res = _result(
        "norm-relation",
        choi_slope,
        frob,
        rel * max(frob, 1e-15),
        dist_inf_slope=dinf_slope,
        spectral_half_width=half_width,
        operator_norm=op,
        dist_inf_ok=bool(abs(dinf_slope - half_width) <= rel * max(half_width, 1e-15)),
        dist_inf_sandwich_ok=bool(op / 2 * (1 - rel) <= dinf_slope <= op * (1 + rel)),
        times=ts,
        choi_distances=choi,
        dist_inf_values=dinf,
    )
    if frob == 0:
        res.passed = max(choi) <= 1e-12 and max(dinf) <= 1e-9
    else:
        res.passed = res.passed and res.details["dist_inf_ok"] and res.details["dist_inf_sandwich_ok"]
    return res


# ---------------------------------------------------------------------------
# MUB invariants
# ---------------------------------------------------------------------------


def _max_abs(x) -> float:
    return float(np.max(np.abs(x))) if np.size(x) else 0.0


def mub_invariant_suite(family: MubFamily, tolerance: float = 1e-9) -> list[CheckResult]:
    """Dense checks of the basis family (two-design, orthonormality, unbiasedness, sign sums, overlap dichotomy)."""
    n, d = family.n, family.d
    bases = [np.asarray(family.basis(i)) for i in range(family.num_bases)]
    results = []

    # 2-design: average of |phi><phi|^{(x)2} over all d(d+1) states.
    second = np.zeros((d * d, d * d), dtype=complex)
    for b in bases:
        psi = np.einsum("aj,bj->abj", b, b).reshape(d * d, d)
        second += psi @ psi.conj().T
    second /= d * (d + 1)
    flip = np.eye(d * d).reshape(d, d, d, d).transpose(0, 1, 3, 2).reshape(d * d, d * d)
    target = (np.eye(d * d) + flip) / (d * (d + 1))
    results.append(_residual("two-design", _max_abs(second - target), tolerance))

    results.append(
        _residual("orthonormality", max(_max_abs(b.conj().T @ b - np.eye(d)) for b in bases), tolerance)
    )

    unbiased = 0.0
    for i, k in itertools.combinations(range(len(bases)), 2):
        unbiased = max(unbiased, _max_abs(np.abs(bases[i].conj().T @ bases[k]) - 1 / math.sqrt(d)))
    results.append(_residual("unbiasedness", unbiased, tolerance))

    # Sign-sum lemma, weighted by the stabiliser expectation <phi_{i,0}|S(p)|phi_{i,0}>,
    # which equals 1 for every member exactly when the stored signs are consistent.
    xs, zs = lex_ordered_bits(n)
    sign_sum = 0.0
    for g in family.groups:
        mx, mz, mph = g.member_arrays()
        base = g.canonical_state()
        expect = np.array(
            [
                np.vdot(base, apply_pauli(SignedPauli(PauliString(n, int(a), int(c)), int(p)), base)).real
                for a, c, p in zip(mx, mz, mph)
            ]
        )
        comm = symplectic_products(xs, zs, mx, mz)
        sums = ((1 - 2 * comm) * expect[None, :]).sum(axis=1) / d
        member = np.array([g.contains(PauliString(n, int(a), int(c))) for a, c in zip(xs, zs)], dtype=float)
        sign_sum = max(sign_sum, _max_abs(sums - member))
    results.append(_residual("sign-sum", sign_sum, tolerance))

    # Overlap dichotomy: |<phi_l|P|phi_j>| is 0 or 1, and equals 1 exactly when
    # syndrome(r_l) ^ syndrome(r_j) == syndrome(P).
    dich, mismatch = 0.0, 0
    for i, b in enumerate(bases):
        syn = family.label_syndromes(i)
        group = family.groups[i]
        for x, z in zip(xs.tolist(), zs.tolist()):
            p = PauliString(n, x, z)
            mags = np.abs(b.conj().T @ apply_pauli(p, b))
            dich = max(dich, _max_abs(np.minimum(mags, np.abs(1 - mags))))
            predicted = (syn[:, None] ^ syn[None, :]) == group.syndrome(p)
            mismatch += int(np.sum((mags > 0.5) != predicted))
    res = _residual("overlap-dichotomy", dich, tolerance)
    res.details["shortcut_mismatches"] = mismatch
    res.passed = res.passed and mismatch == 0
    results.append(res)
    return results


def _residual(name: str, value: float, tolerance: float) -> CheckResult:
    return CheckResult(name, value, 0.0, value, tolerance, bool(value <= tolerance))


# ---------------------------------------------------------------------------
# Dense re-derivation of the one-round violation rate
# ---------------------------------------------------------------------------


def dense_violation_rate(h: Hamiltonian, t: float, s: PropertySet, family: MubFamily) -> float:
    """Basis-by-basis enumeration sharing no shortcut with :func:`exact_violation_rate`.

    States come from diagonalising the projector sums ``(1/d) sum_p (-1)^{p.r} S(p)``
    built from dense Pauli matrices, the propagator from ``scipy.linalg.expm``,
    and the relation from dense overlaps ``|<phi_l|q|phi_j>|``.
    """
    dense = hamiltonian_to_dense(h)
    if dense.n != family.n:
        raise ValidationError("dense oracle expects a family on the Hamiltonian's qubits")
    d = family.d
    u = scipy.linalg.expm(1j * t * dense.matrix)
    qs = [pauli_to_matrix(q) for q in s.with_identity()]
    total = 0.0
    for g in family.groups:
        members = g.members
        mats = [pauli_to_matrix(m) for m in members]
        states = []
        for r in family.labels(g.index):
            proj = sum(
                (-1) ** _comm(m.pauli, r) * mat for m, mat in zip(members, mats)
            ) / d
            w, v = np.linalg.eigh(proj)
            if abs(w[-1] - 1) > 1e-9 or (d > 1 and abs(w[-2]) > 1e-9):
                raise ValidationError("projector sum is not rank one")
            states.append(v[:, -1])
        b = np.column_stack(states)
        born = np.abs(b.conj().T @ u @ b) ** 2
        related = np.zeros((d, d), dtype=bool)
        for q in qs:
            related |= np.abs(b.conj().T @ q @ b) > 0.5
        total += float(born[~related].sum())
    return total / (d * (d + 1))


def _comm(p: PauliString, q: PauliString) -> int:
    return bin((p.x & q.z) ^ (p.z & q.x)).count("1") & 1
