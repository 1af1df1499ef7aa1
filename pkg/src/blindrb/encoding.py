"""Decoherence-free-subsystem encoding of one qubit in three spins.

The total-spin-1/2 sector of three spins splits as qubit (x) gauge:

* ``|0, m>`` has dots (1,2) in the singlet; ``|0,+1/2> = |S>_12 |up>_3``.
* ``|1, m>`` is the orthogonal doublet built from (1,2) triplets,
  ``|1,+1/2> = sqrt(2/3)|T+>_12|down>_3 - sqrt(1/3)|T0>_12|up>_3``.
* The gauge label m = +-1/2 is the magnetic quantum number; m = -1/2
  partners follow by applying the total lowering operator.
* The total-spin-3/2 quartet is the leakage space.

Exchange pulses act as qubit rotation (x) gauge identity.  In the standard
axis-angle form ``U = e^{i phi} exp(-i angle/2 n.sigma)`` a pulse of angle
theta on pair (1,2) is a rotation by theta about ``n = (0,0,-1)`` and on
pair (2,3) about ``n = (sqrt(3)/2, 0, +1/2)``; the two axes meet at 120
degrees.  Equivalently, pair (1,2) implements ``exp(+i theta sigma_z / 2)``:
a pulse angle theta equals a rotation by theta about +z under the
``exp(+i angle/2 n.sigma)`` convention, which is how the Clifford compiler
labels its generators.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .spins import DIM, embed_single_spin, is_unitary

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (PAULI_X, PAULI_Y, PAULI_Z)


@dataclass(frozen=True)
class DfsBasis:
    """Orthonormal basis ordered (qubit, gauge) then leakage.

    ``qubit_states`` rows: |0,+1/2>, |0,-1/2>, |1,+1/2>, |1,-1/2>.
    ``leakage_states`` rows: |3/2, m> for m = +3/2, +1/2, -1/2, -3/2.
    ``matrix`` columns are the eight vectors in that order.
    """

    qubit_states: np.ndarray
    leakage_states: np.ndarray
    qubit_labels: tuple[str, ...]
    leakage_labels: tuple[str, ...]

    @property
    def matrix(self) -> np.ndarray:
        return np.vstack([self.qubit_states, self.leakage_states]).T

    def state(self, label: str) -> np.ndarray:
        for vec, lab in zip(self.qubit_states, self.qubit_labels):
            if lab == label:
                return vec.copy()
        for vec, lab in zip(self.leakage_states, self.leakage_labels):
            if lab == label:
                return vec.copy()
        raise KeyError(f"no basis state labelled {label!r}")


def _ket(b1: int, b2: int, b3: int) -> np.ndarray:
    v = np.zeros(DIM, dtype=complex)
    v[4 * b1 + 2 * b2 + b3] = 1.0
    return v


_LOWER = np.array([[0, 0], [1, 0]], dtype=complex)


def _lowered(vec: np.ndarray) -> np.ndarray:
    s_minus = sum(embed_single_spin(_LOWER, d) for d in (1, 2, 3))
    out = s_minus @ vec
    return out / np.linalg.norm(out)


@lru_cache(maxsize=1)
def build_dfs_basis() -> DfsBasis:
    """Construct the encoded basis; cached, callers share one immutable copy."""
    up, dn = 0, 1
    singlet_up = (_ket(up, dn, up) - _ket(dn, up, up)) / np.sqrt(2)
    t_plus_dn = _ket(up, up, dn)
    t_zero_up = (_ket(up, dn, up) + _ket(dn, up, up)) / np.sqrt(2)

    q0_up = singlet_up
    q1_up = np.sqrt(2 / 3) * t_plus_dn - np.sqrt(1 / 3) * t_zero_up
    q0_dn = _lowered(q0_up)
    q1_dn = _lowered(q1_up)

    leak = [_ket(up, up, up)]
    for _ in range(3):
        leak.append(_lowered(leak[-1]))

    qubit = np.array([q0_up, q0_dn, q1_up, q1_dn])
    leakage = np.array(leak)
    for arr in (qubit, leakage):
        arr.setflags(write=False)
    return DfsBasis(
        qubit_states=qubit,
        leakage_states=leakage,
        qubit_labels=("q0,m=+1/2", "q0,m=-1/2", "q1,m=+1/2", "q1,m=-1/2"),
        leakage_labels=("S=3/2,m=+3/2", "S=3/2,m=+1/2", "S=3/2,m=-1/2", "S=3/2,m=-3/2"),
    )


def qubit_projector(basis: DfsBasis | None = None) -> np.ndarray:
    basis = basis or build_dfs_basis()
    return basis.qubit_states.T @ basis.qubit_states.conj()


def leakage_projector(basis: DfsBasis | None = None) -> np.ndarray:
    basis = basis or build_dfs_basis()
    return basis.leakage_states.T @ basis.leakage_states.conj()


def _check_normalized(state: np.ndarray, tol: float = 1e-9) -> None:
    if state.ndim == 1:
        norm = np.linalg.norm(state)
    else:
        norm = np.trace(state).real
    if abs(norm - 1.0) > tol:
        raise ValueError(f"state is not normalized (norm/trace = {norm})")


def _expectation(operator: np.ndarray, state: np.ndarray) -> float:
    """<op> for an 8-vector or an 8x8 density matrix."""
    state = np.asarray(state, dtype=complex)
    if state.ndim == 1:
        return float(np.real(state.conj() @ operator @ state))
    return float(np.real(np.trace(operator @ state)))


def leakage_population(state, basis: DfsBasis | None = None) -> float:
    """Population outside the encoded sector: <state| P_leak |state>."""
    state = np.asarray(state, dtype=complex)
    _check_normalized(state)
    return _expectation(leakage_projector(basis), state)


def encoded_bloch(state, basis: DfsBasis | None = None) -> np.ndarray:
    """Bloch vector of the encoded qubit after tracing gauge and leakage.

    The norm is at most the qubit-sector population; a fully leaked state
    maps to the zero vector.
    """
    basis = basis or build_dfs_basis()
    state = np.asarray(state, dtype=complex)
    if state.ndim == 1:
        amps = basis.qubit_states.conj() @ state  # (q,m) amplitudes, q-major
        c = amps.reshape(2, 2)
        rho_q = c @ c.conj().T
    else:
        block = basis.qubit_states.conj() @ state @ basis.qubit_states.T
        rho_q = np.trace(block.reshape(2, 2, 2, 2), axis1=1, axis2=3)
    return np.array([np.real(np.trace(rho_q @ p)) for p in PAULIS])


@dataclass(frozen=True)
class EncodedAction:
    """Factorized action of an 8x8 unitary on the encoded sector.

    When ``subspace_preserving`` the restriction to the qubit sector equals
    ``qubit_unitary (x) gauge_unitary`` (each defined up to a phase, split so
    both factors are unitary).  Otherwise both factors are None and
    ``residual`` reports how badly the input fails to preserve/factorize.
    """

    qubit_unitary: np.ndarray | None
    gauge_unitary: np.ndarray | None
    subspace_preserving: bool
    residual: float


def encoded_action_of(u: np.ndarray, basis: DfsBasis | None = None,
                      tol: float = 1e-10) -> EncodedAction:
    """Extract the qubit (x) gauge factors of a unitary, if they exist."""
    basis = basis or build_dfs_basis()
    u = np.asarray(u, dtype=complex)
    if u.shape != (DIM, DIM):
        raise ValueError(f"expected an {DIM}x{DIM} unitary, got shape {u.shape}")
    if not is_unitary(u, tol=1e-9):
        raise ValueError("encoded_action_of requires a unitary input")

    w = basis.matrix.conj().T @ u @ basis.matrix
    leak_coupling = max(np.abs(w[4:, :4]).max(), np.abs(w[:4, 4:]).max())
    block = w[:4, :4]

    # nearest Kronecker factorization via the rank-1 test on the rearranged block
    m = block.reshape(2, 2, 2, 2).transpose(0, 2, 1, 3).reshape(4, 4)
    svals_u, svals, svals_vh = np.linalg.svd(m)
    residual = float(max(leak_coupling, svals[1]))

    if residual > tol:
        return EncodedAction(None, None, False, residual)

    q = (svals_u[:, 0] * np.sqrt(svals[0])).reshape(2, 2)
    g = (svals_vh[0, :] * np.sqrt(svals[0])).reshape(2, 2)
    scale = np.sqrt(np.real((q.conj().T @ q)[0, 0]))
    q, g = q / scale, g * scale
    q = _canonical_phase(q)
    g = _canonical_phase(g)
    return EncodedAction(q, g, True, residual)


def _canonical_phase(u: np.ndarray) -> np.ndarray:
    """Rotate the global phase so the largest entry is real positive."""
    idx = np.unravel_index(np.argmax(np.abs(u)), u.shape)
    ph = u[idx] / abs(u[idx])
    return u / ph


def rotation_axis_angle(u: np.ndarray) -> tuple[np.ndarray, float]:
    """Canonical (axis, angle) of a 2x2 unitary modulo phase.

    Writes ``U = e^{i phi} exp(-i angle/2 n.sigma)`` with angle in [0, pi];
    at angle = 0 the axis is (0,0,1) by convention, at angle = pi the sign
    ambiguity is fixed by making the first nonzero component positive.
    """
    u = np.asarray(u, dtype=complex)
    if u.shape != (2, 2) or not is_unitary(u, tol=1e-9):
        raise ValueError("expected a 2x2 unitary")
    su = u / np.sqrt(complex(np.linalg.det(u)))
    c = np.trace(su).real / 2
    if c < 0:
        su, c = -su, -c
    angle = 2 * np.arccos(np.clip(c, -1.0, 1.0))
    if angle < 1e-12:
        return np.array([0.0, 0.0, 1.0]), 0.0
    n = np.array([np.trace(su @ p).imag for p in PAULIS]) / (-2 * np.sin(angle / 2))
    n /= np.linalg.norm(n)
    if abs(angle - np.pi) < 1e-12:
        for comp in n:
            if abs(comp) > 1e-9:
                if comp < 0:
                    n = -n
                break
    return n, float(angle)
