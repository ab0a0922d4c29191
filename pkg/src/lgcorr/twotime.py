"""Two-time operator algebra: the correlator operator C, the commutator operator D
and the coarse-grained ``same``/``diff`` history states.

With Q(t) the Heisenberg-picture observable::

    C = {Q(t1), Q(t2)} / 2
    D = (i/2) [Q(t2), Q(t1)]

Both are hermitian, C commutes with Q(t1) and Q(t2), D anticommutes with both,
[C, D] = 0 and C^2 + D^2 = I.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, UndefinedMappingError
from .qcore import (
    ATOL,
    anticommutator,
    as_ket,
    as_state,
    commutator,
    heisenberg,
    require_dichotomic,
    require_hermitian,
    unitary,
)


@dataclass(frozen=True)
class TwoTimeFrame:
    Q: np.ndarray
    H: np.ndarray
    t1: float
    t2: float
    Q_t1: np.ndarray
    Q_t2: np.ndarray
    C_op: np.ndarray
    D_op: np.ndarray

    @property
    def dim(self) -> int:
        return self.Q.shape[0]

    def identity_residuals(self) -> dict[str, float]:
        """Max-entry residuals of the four algebraic identities."""
        eye = np.eye(self.dim)
        return {
            "comm_Q1_C": float(np.abs(commutator(self.Q_t1, self.C_op)).max()),
            "anticomm_Q1_D": float(np.abs(anticommutator(self.Q_t1, self.D_op)).max()),
            "comm_C_D": float(np.abs(commutator(self.C_op, self.D_op)).max()),
            "C2_plus_D2": float(np.abs(self.C_op @ self.C_op + self.D_op @ self.D_op - eye).max()),
        }


def build_frame(Q, H, t1: float, t2: float) -> TwoTimeFrame:
    q = require_dichotomic(Q)
    h = require_hermitian(H)
    if q.shape != h.shape:
        raise InvalidInputError(f"Q is {q.shape} but H is {h.shape}")
    if t2 < t1:
        raise InvalidInputError(f"t2 ({t2}) must not precede t1 ({t1})")
    q1 = heisenberg(q, h, t1)
    q2 = heisenberg(q, h, t2)
    c_op = 0.5 * anticommutator(q1, q2)
    d_op = 0.5j * commutator(q2, q1)
    return TwoTimeFrame(q, h, float(t1), float(t2), q1, q2, c_op, d_op)


@dataclass(frozen=True)
class HistoryPair:
    """Unnormalized kets |same>, |diff> in the Schrodinger picture at t2."""

    same: np.ndarray
    diff: np.ndarray
    p_same: float
    p_diff: float

    @property
    def overlap(self) -> complex:
        """<same|diff>."""
        return complex(np.vdot(self.same, self.diff))


def history_pair(frame: TwoTimeFrame, psi) -> HistoryPair:
    ket = as_ket(psi)
    if len(ket) != frame.dim:
        raise InvalidInputError(f"state has dimension {len(ket)}, frame has {frame.dim}")
    u2 = unitary(frame.H, frame.t2)
    qq = frame.Q_t2 @ frame.Q_t1 @ ket
    same = 0.5 * u2 @ (ket + qq)
    diff = 0.5 * u2 @ (ket - qq)
    return HistoryPair(same, diff, float(np.vdot(same, same).real), float(np.vdot(diff, diff).real))


def p_same(frame: TwoTimeFrame, state) -> float:
    """p(same) for a pure or mixed state; mixtures are convex-combined over the eigenbasis of rho."""
    return sum(w * history_pair(frame, k).p_same for w, k in as_state(state).components())


def correlator_expectation(frame: TwoTimeFrame, state) -> float:
    s = as_state(state)
    return float(np.real(np.trace(frame.C_op @ s.density())))


def plus_eigenbasis(frame: TwoTimeFrame, sign: int = 1) -> list[np.ndarray]:
    """Eigenvectors of Q(t1) with eigenvalue ``sign`` that also diagonalize C.

    Within a degenerate Q(t1) eigenspace C acts as a hermitian block, so
    diagonalizing that block gives a common eigenbasis. These are the natural
    inputs for :func:`pm_basis`.
    """
    w, v = np.linalg.eigh(frame.Q_t1)
    sub = v[:, np.abs(w - sign) < 1e-6]
    if sub.shape[1] == 0:
        return []
    block = sub.conj().T @ frame.C_op @ sub
    _, c = np.linalg.eigh(0.5 * (block + block.conj().T))
    basis = sub @ c
    return [basis[:, i] for i in range(basis.shape[1])]


def pm_basis(frame: TwoTimeFrame, plus_states, tol: float = ATOL) -> list[np.ndarray]:
    """Map +1 eigenstates of Q(t1) to partner -1 eigenstates, |-> = D|+> / <D^2>^(1/2)."""
    out = []
    d2_op = frame.D_op @ frame.D_op
    for k, psi in enumerate(plus_states):
        ket = as_ket(psi)
        if np.abs(frame.Q_t1 @ ket - ket).max() > 1e-8:
            raise InvalidInputError(f"input {k} is not a +1 eigenstate of Q(t1)")
        d2 = float(np.vdot(ket, d2_op @ ket).real)
        if d2 <= tol:
            raise UndefinedMappingError(f"<D^2> = {d2:.3g} in input {k}; no partner state exists")
        out.append(frame.D_op @ ket / np.sqrt(d2))
    return out


def superposition_correlator(frame: TwoTimeFrame, plus_ket, minus_ket, a1: complex, a2: complex) -> float:
    if abs(abs(a1) ** 2 + abs(a2) ** 2 - 1) > ATOL:
        raise InvalidInputError("coefficients must satisfy |a1|^2 + |a2|^2 = 1")
    psi = a1 * np.asarray(plus_ket, dtype=complex) + a2 * np.asarray(minus_ket, dtype=complex)
    return float(np.vdot(psi, frame.C_op @ psi).real)


def frame_summary(frame: TwoTimeFrame, psi) -> dict:
    hp = history_pair(frame, psi)
    ket = as_ket(psi)
    return {
        "C12": float(np.vdot(ket, frame.C_op @ ket).real),
        "D_expectation": float(np.vdot(ket, frame.D_op @ ket).real),
        "p_same": hp.p_same,
        "p_diff": hp.p_diff,
        "identity_residuals": frame.identity_residuals(),
    }
