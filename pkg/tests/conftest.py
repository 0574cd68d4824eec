from pathlib import Path

import numpy as np
import pytest

from hamtest.mub import build_mub_family
from hamtest.rng import make_rng

FIXTURES = Path(__file__).parent / "fixtures"

_PAULI_2x2 = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def kron_label(label: str) -> np.ndarray:
    """Independent dense Pauli: Kronecker product of the 2x2 matrices, leftmost letter first."""
    out = np.array([[1.0 + 0j]])
    for ch in label:
        out = np.kron(out, _PAULI_2x2[ch])
    return out


@pytest.fixture
def rng():
    return make_rng(20240611)


@pytest.fixture(scope="session")
def family():
    return {n: build_mub_family(n) for n in (1, 2, 3)}


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES


# Acceptance criteria record one line each; printed at the end of the run.
ACCEPTANCE: dict[int, list[tuple[bool, str]]] = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE.setdefault(number, []).append((bool(passed), detail))
    print(f"criterion {number}: {'PASS' if passed else 'FAIL'} | {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[number]
        status = "PASS" if all(ok for ok, _ in parts) else "FAIL"
        terminalreporter.write_line(f"criterion {number:>2}: {status} | " + " ; ".join(d for _, d in parts))
