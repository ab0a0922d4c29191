"""Dense linear algebra for small Hilbert spaces and the two-level spin model.

Everything here works on plain ``numpy`` complex arrays. :class:`Operator` and
:class:`QuantumState` are thin validated wrappers used at I/O boundaries
(configs, JSON); the numerical functions accept either the wrappers or raw
arrays and return arrays.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidInputError

# max-entry deviation allowed for analytic constructions (hermiticity, Q^2 = I, ...)
ATOL = 1e-10

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (SIGMA_X, SIGMA_Y, SIGMA_Z)

ROLES = ("general", "hermitian", "unitary", "projector")


def as_matrix(a) -> np.ndarray:
    """Return ``a`` as a square complex matrix."""
    m = np.asarray(a.matrix if isinstance(a, Operator) else a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got shape {m.shape}")
    return m


def _maxdev(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a - b))) if a.size else 0.0


def is_hermitian(a, tol: float = ATOL) -> bool:
    m = as_matrix(a)
    return _maxdev(m, m.conj().T) <= tol


def is_unitary(a, tol: float = ATOL) -> bool:
    m = as_matrix(a)
    return _maxdev(m.conj().T @ m, np.eye(len(m))) <= tol


def is_projector(a, tol: float = ATOL) -> bool:
    m = as_matrix(a)
    return is_hermitian(m, tol) and _maxdev(m @ m, m) <= tol


def is_dichotomic(a, tol: float = ATOL) -> bool:
    m = as_matrix(a)
    return is_hermitian(m, tol) and _maxdev(m @ m, np.eye(len(m))) <= tol


def require_hermitian(a, name: str = "H") -> np.ndarray:
    m = as_matrix(a)
    if not is_hermitian(m):
        raise InvalidInputError(f"{name} is not hermitian (max |A - A^dag| = {_maxdev(m, m.conj().T):.3g})")
    return m


def require_dichotomic(a, name: str = "Q") -> np.ndarray:
    m = as_matrix(a)
    if not is_hermitian(m):
        raise InvalidInputError(f"{name} is not hermitian")
    dev = _maxdev(m @ m, np.eye(len(m)))
    if dev > ATOL:
        raise InvalidInputError(f"{name}^2 != I (max deviation {dev:.3g}); dichotomy violated")
    return m


def dagger(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def anticommutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b + b @ a


@dataclass(frozen=True)
class Operator:
    """A square complex matrix carrying a role tag that is checked on construction."""

    matrix: np.ndarray
    role: str = "general"

    def __post_init__(self):
        m = as_matrix(self.matrix)
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        if self.role not in ROLES:
            raise InvalidInputError(f"unknown operator role {self.role!r}")
        check = {"hermitian": is_hermitian, "unitary": is_unitary, "projector": is_projector}.get(self.role)
        if check is not None and not check(m):
            raise InvalidInputError(f"matrix does not satisfy the {self.role} invariant")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)

    def to_json(self) -> dict:
        return {"dim": self.dim, "entries": matrix_to_pairs(self.matrix), "role": self.role}

    @classmethod
    def from_json(cls, obj: dict) -> "Operator":
        return cls(pairs_to_matrix(obj["entries"], obj.get("dim")), obj.get("role", "general"))


def matrix_to_pairs(m: np.ndarray) -> list[list[float]]:
    """Row-major list of ``[re, im]`` pairs."""
    flat = np.asarray(m, dtype=complex).ravel()
    return [[float(z.real), float(z.imag)] for z in flat]


def pairs_to_array(entries: Sequence) -> np.ndarray:
    """Inverse of :func:`matrix_to_pairs` for a flat vector. Bare reals are accepted."""
    out = []
    for e in entries:
        if isinstance(e, (int, float)):
            out.append(complex(e))
        elif len(e) == 2:
            out.append(complex(float(e[0]), float(e[1])))
        else:
            raise InvalidInputError(f"entry {e!r} is not a [re, im] pair")
    return np.array(out, dtype=complex)


def pairs_to_matrix(entries: Sequence, dim: int | None = None) -> np.ndarray:
    flat = pairs_to_array(entries)
    if dim is None:
        dim = int(round(np.sqrt(len(flat))))
    if dim * dim != len(flat):
        raise InvalidInputError(f"{len(flat)} entries do not fill a {dim}x{dim} matrix")
    return flat.reshape(dim, dim)


def pauli_operator(coeffs: Sequence[float]) -> np.ndarray:
    """cx*sx + cy*sy + cz*sz for a real coefficient triple."""
    if len(coeffs) != 3:
        raise InvalidInputError("Pauli specification needs exactly three coefficients")
    return sum(float(c) * s for c, s in zip(coeffs, PAULIS))


# ---------------------------------------------------------------------------
# states
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuantumState:
    """Pure ket or density matrix. Exactly one of ``ket`` / ``rho`` is set."""

    ket: np.ndarray | None = None
    rho: np.ndarray | None = None

    def __post_init__(self):
        if (self.ket is None) == (self.rho is None):
            raise InvalidInputError("QuantumState needs exactly one of ket or rho")
        if self.ket is not None:
            k = np.asarray(self.ket, dtype=complex).ravel().copy()
            n = np.linalg.norm(k)
            if abs(n - 1) > ATOL:
                raise InvalidInputError(f"ket is not normalized (norm {n:.12g})")
            k.setflags(write=False)
            object.__setattr__(self, "ket", k)
        else:
            r = as_matrix(self.rho).copy()
            if not is_hermitian(r):
                raise InvalidInputError("density matrix is not hermitian")
            if abs(np.trace(r).real - 1) > ATOL:
                raise InvalidInputError("density matrix does not have unit trace")
            if np.linalg.eigvalsh(r).min() < -ATOL:
                raise InvalidInputError("density matrix is not positive semidefinite")
            r.setflags(write=False)
            object.__setattr__(self, "rho", r)

    @property
    def dim(self) -> int:
        return len(self.ket) if self.ket is not None else self.rho.shape[0]

    @property
    def is_pure(self) -> bool:
        return self.ket is not None

    def density(self) -> np.ndarray:
        if self.ket is not None:
            return np.outer(self.ket, self.ket.conj())
        return np.array(self.rho)

    def components(self, cutoff: float = 1e-14) -> list[tuple[float, np.ndarray]]:
        """Convex decomposition into (weight, ket) pairs; a ket gives one component."""
        if self.ket is not None:
            return [(1.0, np.array(self.ket))]
        w, v = np.linalg.eigh(self.rho)
        return [(float(w[i]), v[:, i]) for i in range(len(w)) if w[i] > cutoff]

    def to_json(self) -> dict:
        if self.ket is not None:
            return {"kind": "ket", "dim": self.dim, "entries": matrix_to_pairs(self.ket)}
        return {"kind": "rho", "dim": self.dim, "entries": matrix_to_pairs(self.rho)}

    @classmethod
    def from_json(cls, obj: dict) -> "QuantumState":
        if obj.get("kind", "ket") == "ket":
            return cls(ket=pairs_to_array(obj["entries"]))
        return cls(rho=pairs_to_matrix(obj["entries"], obj.get("dim")))


def as_state(x) -> QuantumState:
    """Coerce a QuantumState, a 1-d ket or a 2-d density matrix."""
    if isinstance(x, QuantumState):
        return x
    a = np.asarray(x, dtype=complex)
    if a.ndim == 1:
        return QuantumState(ket=a)
    return QuantumState(rho=a)


def as_ket(x) -> np.ndarray:
    s = as_state(x)
    if not s.is_pure:
        raise InvalidInputError("a pure state is required here")
    return np.array(s.ket)


_S = 1 / np.sqrt(2)
NAMED_STATES = {
    "up_z": np.array([1, 0], dtype=complex),
    "down_z": np.array([0, 1], dtype=complex),
    "plus_x": np.array([_S, _S], dtype=complex),
    "minus_x": np.array([_S, -_S], dtype=complex),
    "plus_y": np.array([_S, 1j * _S], dtype=complex),
    "minus_y": np.array([_S, -1j * _S], dtype=complex),
}


def named_state(name: str) -> np.ndarray:
    try:
        return NAMED_STATES[name].copy()
    except KeyError:
        raise InvalidInputError(f"unknown named state {name!r}; known: {sorted(NAMED_STATES)}") from None


def expectation(op: np.ndarray, state) -> complex:
    s = as_state(state)
    if s.is_pure:
        return complex(np.vdot(s.ket, op @ s.ket))
    return complex(np.trace(op @ s.rho))


def purity(rho: np.ndarray) -> float:
    return float(np.real(np.trace(rho @ rho)))


def partial_trace_last(rho: np.ndarray, d_keep: int, d_drop: int) -> np.ndarray:
    """Trace out the trailing tensor factor of a (d_keep*d_drop)-dimensional operator."""
    return np.einsum("iaja->ij", rho.reshape(d_keep, d_drop, d_keep, d_drop))


def reduced_from_ket(psi: np.ndarray, d_keep: int, d_drop: int) -> np.ndarray:
    m = psi.reshape(d_keep, d_drop)
    return m @ m.conj().T


# ---------------------------------------------------------------------------
# dynamics
# ---------------------------------------------------------------------------

def unitary(H, t: float) -> np.ndarray:
    """exp(-iHt) by hermitian eigendecomposition."""
    h = require_hermitian(H)
    if t == 0:
        return np.eye(len(h), dtype=complex)
    # symmetrize so eigh sees an exactly hermitian matrix
    w, v = np.linalg.eigh(0.5 * (h + h.conj().T))
    return (v * np.exp(-1j * w * t)) @ v.conj().T


def heisenberg(A, H, t: float) -> np.ndarray:
    """e^{iHt} A e^{-iHt}."""
    a = as_matrix(A)
    h = as_matrix(H)
    if a.shape != h.shape:
        raise InvalidInputError(f"dimension mismatch: A is {a.shape}, H is {h.shape}")
    u = unitary(h, t)
    return u.conj().T @ a @ u


def projector(Q, s: int) -> np.ndarray:
    """P_s = (I + sQ)/2 for a dichotomic Q."""
    if s not in (1, -1):
        raise InvalidInputError(f"sign must be +1 or -1, got {s!r}")
    q = require_dichotomic(Q)
    return 0.5 * (np.eye(len(q)) + s * q)


def evolve(state, H, t: float):
    """Schrodinger evolution of a ket (1-d) or density matrix (2-d)."""
    u = unitary(H, t)
    if isinstance(state, QuantumState):
        state = state.ket if state.is_pure else state.rho
    a = np.asarray(state, dtype=complex)
    if a.ndim == 1:
        return u @ a
    return u @ a @ u.conj().T


# ---------------------------------------------------------------------------
# built-in model and random instances
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpinModel:
    """H = (omega/2) sigma_x with dichotomic Q = n . sigma."""

    omega: float = 1.0
    q_direction: tuple[float, float, float] = field(default=(0.0, 0.0, 1.0))

    def __post_init__(self):
        n = np.asarray(self.q_direction, dtype=float)
        if n.shape != (3,) or abs(np.linalg.norm(n) - 1) > ATOL:
            raise InvalidInputError(f"q_direction must be a real unit 3-vector, got {self.q_direction!r}")
        object.__setattr__(self, "q_direction", tuple(float(x) for x in n))

    @property
    def hamiltonian(self) -> np.ndarray:
        return 0.5 * self.omega * SIGMA_X

    @property
    def Q(self) -> np.ndarray:
        return pauli_operator(self.q_direction)


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_hermitian(d: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    z = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return scale * 0.5 * (z + z.conj().T)


def random_dichotomic(d: int, rng: np.random.Generator, n_plus: int | None = None) -> np.ndarray:
    """Random Q with Q^2 = I; both eigenvalues present unless n_plus says otherwise."""
    if n_plus is None:
        n_plus = int(rng.integers(1, d)) if d > 1 else 1
    signs = np.array([1.0] * n_plus + [-1.0] * (d - n_plus))
    u = random_unitary(d, rng)
    q = (u * signs) @ u.conj().T
    return 0.5 * (q + q.conj().T)


def random_ket(d: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return z / np.linalg.norm(z)
