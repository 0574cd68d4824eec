"""Haar-random unitaries and sphere vectors."""

from __future__ import annotations

import numpy as np

from .errors import ValidationError


def haar_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed ``d x d`` unitary (QR of a Ginibre matrix, phases fixed by R's diagonal)."""
    return haar_unitaries(d, 1, rng)[0]


def haar_unitaries(d: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """Stack of ``count`` independent Haar unitaries, shape ``(count, d, d)``."""
    if d < 2:
        raise ValidationError(f"Haar sampling needs d >= 2, got {d}")
    z = (rng.standard_normal((count, d, d)) + 1j * rng.standard_normal((count, d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r, axis1=1, axis2=2)
    return q * (diag / np.abs(diag))[:, None, :]


def haar_vectors(d: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """Rows are uniform unit vectors in C^d, distributed as ``V|0>`` for Haar ``V``."""
    z = rng.standard_normal((count, d)) + 1j * rng.standard_normal((count, d))
    return z / np.linalg.norm(z, axis=1, keepdims=True)
