"""Seeded random ensembles: Ginibre matrices, Haar unitaries, HS/Bures states.

Reproducibility contract
------------------------
Every draw comes from numpy's Philox4x64-10 counter-based generator, which is
a fixed, platform-independent algorithm. ``stream(seed, index)`` keys the
cipher with the pair ``(seed, index)``; distinct indices give statistically
independent streams. Ensembles draw state i from ``stream(seed, i)``, so the
output is bit-identical no matter how the work is split across workers.

``sub_seed(seed, *labels)`` derives further 64-bit seeds from string labels
via SHA-256 for coarser partitioning (train/validation/test roles and the
like). Both derivations are part of the on-disk dataset contract: a dataset
header records the master seed, and ``(seed, i)`` regenerate state i exactly.

A single generator must not be shared across threads; hand each worker its
own stream instead.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

MEASURE_HS = "hilbert-schmidt"
MEASURE_BURES = "bures"
MEASURES = (MEASURE_HS, MEASURE_BURES)

_MASK64 = (1 << 64) - 1

# Degenerate zero-trace draws have probability zero; retry once, then fail.
_ZERO_TRACE_TOL = 1e-300


def stream(seed: int, index: int = 0) -> np.random.Generator:
    """Independent generator for stream ``index`` of master ``seed``."""
    key = np.array([seed & _MASK64, index & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def sub_seed(seed: int, *labels: str) -> int:
    """Derive a 64-bit seed from a master seed and a label path."""
    h = hashlib.sha256()
    h.update((seed & _MASK64).to_bytes(8, "little"))
    for label in labels:
        h.update(b"/")
        h.update(label.encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "little")


def ginibre(d: int, rng: np.random.Generator) -> np.ndarray:
    """d x d matrix with entries (a + ib)/sqrt(2), a and b standard normal."""
    if d < 1:
        raise ValueError(f"dimension must be positive, got {d}")
    re = rng.standard_normal((d, d))
    im = rng.standard_normal((d, d))
    return (re + 1j * im) / np.sqrt(2.0)


def _normalized_gram_retry(a: np.ndarray, redraw) -> np.ndarray:
    w = a @ a.conj().T
    t = np.trace(w).real
    if t <= _ZERO_TRACE_TOL:
        a = redraw()
        w = a @ a.conj().T
        t = np.trace(w).real
        if t <= _ZERO_TRACE_TOL:
            raise ArithmeticError("degenerate zero-trace draw after retry")
    w = w / t
    return (w + w.conj().T) / 2


def sample_hs(m: int, rng: np.random.Generator) -> np.ndarray:
    """Random m-qubit state under the Hilbert-Schmidt measure: GG†/Tr(GG†)."""
    d = 2**m
    return _normalized_gram_retry(ginibre(d, rng), lambda: ginibre(d, rng))


def haar_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary: QR of a Ginibre draw with the phase correction.

    Column j of Q is multiplied by r_jj/|r_jj| so the distribution is exactly
    Haar rather than QR-convention dependent.
    """
    q, r = np.linalg.qr(ginibre(d, rng))
    diag = np.diagonal(r)
    return q * (diag / np.abs(diag))


def sample_bures(m: int, rng: np.random.Generator) -> np.ndarray:
    """Random m-qubit state under the Bures measure: (I+U)GG†(I+U)†, normalized."""
    d = 2**m

    def draw() -> np.ndarray:
        g = ginibre(d, rng)
        u = haar_unitary(d, rng)
        return (np.eye(d) + u) @ g

    return _normalized_gram_retry(draw(), draw)


def sample_state(m: int, measure: str, rng: np.random.Generator) -> np.ndarray:
    if measure == MEASURE_HS:
        return sample_hs(m, rng)
    if measure == MEASURE_BURES:
        return sample_bures(m, rng)
    raise ValueError(f"unknown measure {measure!r}; expected one of {MEASURES}")


@dataclass(frozen=True)
class EnsembleSpec:
    """What to sample: qubit count, measure, and how many states."""

    num_qubits: int
    measure: str
    count: int

    def __post_init__(self) -> None:
        if not 1 <= self.num_qubits <= 4:
            raise ValueError(f"num_qubits must be in 1..4, got {self.num_qubits}")
        if self.measure not in MEASURES:
            raise ValueError(f"unknown measure {self.measure!r}; expected one of {MEASURES}")
        if self.count < 1:
            raise ValueError(f"count must be >= 1, got {self.count}")


def _sample_range(spec: EnsembleSpec, seed: int, start: int, stop: int) -> np.ndarray:
    d = 2**spec.num_qubits
    out = np.empty((stop - start, d, d), dtype=complex)
    for i in range(start, stop):
        out[i - start] = sample_state(spec.num_qubits, spec.measure, stream(seed, i))
    return out


def sample_ensemble(spec: EnsembleSpec, seed: int, workers: int = 1) -> np.ndarray:
    """Stacked (count, d, d) array of states; state i comes from stream(seed, i).

    ``workers > 1`` splits the index range over processes; the per-state
    streams make the result identical to a serial run.
    """
    if workers <= 1 or spec.count < 4 * workers:
        return _sample_range(spec, seed, 0, spec.count)
    bounds = np.linspace(0, spec.count, workers + 1, dtype=int)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        chunks = list(
            pool.map(_sample_range, [spec] * workers, [seed] * workers, bounds[:-1], bounds[1:])
        )
    return np.concatenate(chunks, axis=0)
