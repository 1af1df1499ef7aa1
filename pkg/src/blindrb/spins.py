"""Linear-algebra primitives for three spin-1/2 particles.

Conventions used throughout the package:

* Hilbert space is the 8-dimensional tensor product ``dot1 (x) dot2 (x) dot3``
  with the single-spin basis ``(|up>, |down>)``; basis index ``4*b1+2*b2+b3``
  where ``b=0`` is spin-up.
* Spin operators have eigenvalues +-1/2 (hbar = 1).
* Angles are radians; magnetic fields are angular frequencies; durations are
  in whatever time unit makes ``field * duration`` a phase.
* Exchange pulses evolve under ``theta * S_i.S_j`` so a pulse is
  ``exp(-i * theta * S_i.S_j)``.

All functions are pure and return fresh arrays; nothing here mutates input.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

DIM = 8
DOTS = (1, 2, 3)

SX = np.array([[0, 1], [1, 0]], dtype=complex) / 2
SY = np.array([[0, -1j], [1j, 0]], dtype=complex) / 2
SZ = np.array([[1, 0], [0, -1]], dtype=complex) / 2
SPIN_OPS = (SX, SY, SZ)

_I2 = np.eye(2, dtype=complex)


def _check_dot(dot: int) -> None:
    if dot not in DOTS:
        raise ValueError(f"dot index must be 1, 2 or 3, got {dot}")


def embed_single_spin(op: np.ndarray, dot: int) -> np.ndarray:
    """Embed a 2x2 operator on one dot: I (x) ... (x) op (x) ... (x) I."""
    op = np.asarray(op, dtype=complex)
    if op.shape != (2, 2):
        raise ValueError(f"expected a 2x2 operator, got shape {op.shape}")
    _check_dot(dot)
    factors = [_I2, _I2, _I2]
    factors[dot - 1] = op
    return np.kron(np.kron(factors[0], factors[1]), factors[2])


@lru_cache(maxsize=8)
def _heisenberg_cached(i: int, j: int) -> np.ndarray:
    out = np.zeros((DIM, DIM), dtype=complex)
    for s in SPIN_OPS:
        out += embed_single_spin(s, i) @ embed_single_spin(s, j)
    out.setflags(write=False)
    return out


def heisenberg_coupling(i: int, j: int) -> np.ndarray:
    """S_i . S_j on the 8-dim space; eigenvalues +1/4 (triplet), -3/4 (singlet)."""
    _check_dot(i)
    _check_dot(j)
    if i == j:
        raise ValueError("exchange coupling needs two distinct dots")
    return _heisenberg_cached(i, j).copy()


def swap_matrix(i: int, j: int) -> np.ndarray:
    """Permutation unitary exchanging dots i and j: SWAP = 2 S_i.S_j + I/2."""
    return 2 * heisenberg_coupling(i, j) + np.eye(DIM) / 2


def exchange_unitary(i: int, j: int, theta: float) -> np.ndarray:
    """exp(-i * theta * S_i.S_j) via the closed form.

    Because SWAP^2 = I the exponential reduces to
    ``e^{i theta/4} (cos(theta/2) I - i sin(theta/2) SWAP_ij)``.
    Note the 8x8 matrix closes only at theta = 8 pi; at 4 pi it equals -I,
    identity up to global phase.
    """
    if not math.isfinite(theta):
        raise ValueError(f"theta must be finite, got {theta}")
    swap = swap_matrix(i, j)
    phase = np.exp(1j * theta / 4)
    return phase * (math.cos(theta / 2) * np.eye(DIM) - 1j * math.sin(theta / 2) * swap)


def _expm_hermitian(h: np.ndarray, t: float) -> np.ndarray:
    """exp(-i t H) for Hermitian H via eigendecomposition."""
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * t * w)) @ v.conj().T


def _as_fields(fields) -> np.ndarray:
    arr = np.asarray(fields, dtype=float)
    if arr.shape != (3, 3):
        raise ValueError(f"fields must be three 3-vectors (shape (3,3)), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("fields must be finite")
    return arr


@lru_cache(maxsize=1)
def _embedded_spin_stack() -> np.ndarray:
    """All nine embedded spin components, shape (dot, component, 8, 8)."""
    stack = np.empty((3, 3, DIM, DIM), dtype=complex)
    for d in DOTS:
        for a, s in enumerate(SPIN_OPS):
            stack[d - 1, a] = embed_single_spin(s, d)
    stack.setflags(write=False)
    return stack


def zeeman_hamiltonian(fields) -> np.ndarray:
    """Sum_i B_i . S_i for per-dot field 3-vectors (row d = field on dot d+1)."""
    arr = _as_fields(fields)
    return np.tensordot(arr, _embedded_spin_stack(), axes=([0, 1], [0, 1]))


def zeeman_unitary(fields, duration: float) -> np.ndarray:
    """exp(-i * duration * Sum_i B_i.S_i)."""
    if not (math.isfinite(duration) and duration >= 0):
        raise ValueError(f"duration must be finite and >= 0, got {duration}")
    if duration == 0.0:
        _as_fields(fields)
        return np.eye(DIM, dtype=complex)
    return _expm_hermitian(zeeman_hamiltonian(fields), duration)


def joint_pulse_unitary(i: int, j: int, theta: float, fields, duration: float) -> np.ndarray:
    """Exact evolution under simultaneous exchange and Zeeman terms.

    The effective Hamiltonian is ``(theta/duration) S_i.S_j + Sum B.S`` acting
    for ``duration``; the 8x8 exponential is exact, no splitting error.
    A zero-duration pulse is only meaningful for theta = 0.
    """
    if not math.isfinite(theta):
        raise ValueError(f"theta must be finite, got {theta}")
    if duration == 0.0:
        if theta != 0.0:
            raise ValueError("zero-duration pulse with nonzero theta is ill-defined")
        _as_fields(fields)
        return np.eye(DIM, dtype=complex)
    h = (theta / duration) * heisenberg_coupling(i, j) + zeeman_hamiltonian(fields)
    return _expm_hermitian(h, duration)


def is_unitary(u: np.ndarray, tol: float = 1e-12) -> bool:
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return False
    return bool(np.allclose(u.conj().T @ u, np.eye(u.shape[0]), atol=tol))


def phase_invariant_distance(u: np.ndarray, v: np.ndarray) -> float:
    """1 - |tr(U^dag V)| / dim; zero iff U = e^{i phi} V.

    Both inputs must be unitary of the same dimension.
    """
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    # looser check than construction tolerances: catches misuse, not roundoff
    if not is_unitary(u, tol=1e-9) or not is_unitary(v, tol=1e-9):
        raise ValueError("phase_invariant_distance requires unitary inputs")
    dim = u.shape[0]
    return float(max(0.0, 1.0 - abs(np.trace(u.conj().T @ v)) / dim))


def total_spin_operator() -> np.ndarray:
    """Total S^2 = (S_1+S_2+S_3)^2; eigenvalues 3/4 (doublets) and 15/4 (quartet)."""
    out = np.zeros((DIM, DIM), dtype=complex)
    for s in SPIN_OPS:
        tot = sum(embed_single_spin(s, d) for d in DOTS)
        out += tot @ tot
    return out


def total_sz_operator() -> np.ndarray:
    return sum(embed_single_spin(SZ, d) for d in DOTS)
