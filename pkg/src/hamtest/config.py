"""Process-wide knobs: the dense qubit cap and the default seed source."""

from __future__ import annotations

import os

from .errors import ResourceLimitError

_DEFAULT_CAP = 10
_dense_cap = int(os.environ.get("HAMTEST_DENSE_CAP", _DEFAULT_CAP))

SEED_ENV_VAR = "HAMTEST_SEED"


def dense_cap() -> int:
    return _dense_cap


def set_dense_cap(cap: int) -> int:
    """Change the dense qubit cap; returns the previous value."""
    global _dense_cap
    if cap < 1:
        raise ValueError(f"dense cap must be positive, got {cap}")
    previous, _dense_cap = _dense_cap, int(cap)
    return previous


def require_dense(n: int, what: str = "dense computation") -> None:
    if n > _dense_cap:
        raise ResourceLimitError(
            f"{what} on {n} qubits exceeds the dense cap of {_dense_cap} qubits"
        )


def default_seed(fallback: int = 0) -> int:
    """Seed taken from ``HAMTEST_SEED`` when set, else ``fallback``."""
    raw = os.environ.get(SEED_ENV_VAR)
    return int(raw) if raw not in (None, "") else fallback
