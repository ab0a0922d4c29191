"""Decoherent-histories engine: class operators, decoherence functional,
consistency/decoherence predicates and record projectors.

Class operators are Heisenberg-picture strings, latest time leftmost::

    C_alpha = P_{a_n}(t_n) ... P_{a_1}(t_1),     |alpha> = C_alpha |psi>

History labels are tuples of per-time alternative indices. For grids built by
:func:`dichotomic_grid`, index 0 is Q = +1 and index 1 is Q = -1.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Hashable, Mapping, Sequence

import numpy as np

from .errors import InvalidInputError, NotDecoherentError
from .qcore import ATOL, as_ket, as_matrix, heisenberg, is_projector, matrix_to_pairs, projector, require_hermitian

DECOHERENCE_TOL = 1e-8


@dataclass(frozen=True)
class ProjectiveGrid:
    times: tuple[float, ...]
    alternatives: tuple[tuple[np.ndarray, ...], ...]

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        if len(times) == 0:
            raise InvalidInputError("a grid needs at least one time")
        if len(times) != len(self.alternatives):
            raise InvalidInputError("one set of alternatives is needed per time")
        if any(b < a for a, b in zip(times, times[1:])):
            raise InvalidInputError("grid times must be non-decreasing")
        alts = []
        for k, projs in enumerate(self.alternatives):
            ps = tuple(as_matrix(p) for p in projs)
            d = ps[0].shape[0]
            for i, p in enumerate(ps):
                if p.shape != (d, d) or not is_projector(p):
                    raise InvalidInputError(f"alternative {i} at time index {k} is not a projector")
                for j in range(i):
                    if np.abs(p @ ps[j]).max() > ATOL:
                        raise InvalidInputError(f"alternatives {j} and {i} at time index {k} are not orthogonal")
            if np.abs(sum(ps) - np.eye(d)).max() > ATOL:
                raise InvalidInputError(f"alternatives at time index {k} do not sum to the identity")
            alts.append(ps)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "alternatives", tuple(alts))

    @property
    def dim(self) -> int:
        return self.alternatives[0][0].shape[0]


def dichotomic_grid(Q, times: Sequence[float]) -> ProjectiveGrid:
    """Grid with alternatives (P_+, P_-) of the same dichotomic Q at every time."""
    pp, pm = projector(Q, 1), projector(Q, -1)
    return ProjectiveGrid(tuple(times), tuple((pp, pm) for _ in times))


@dataclass(frozen=True)
class HistorySet:
    labels: tuple[Hashable, ...]
    class_ops: np.ndarray        # (n, d, d)
    history_states: np.ndarray   # (n, d)
    dfunc: np.ndarray            # (n, n), D[a, b] = <a|b>
    probs: np.ndarray            # (n,)
    psi: np.ndarray

    def index(self, label) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"no history labelled {label!r}") from None

    def prob(self, label) -> float:
        return float(self.probs[self.index(label)])

    def state(self, label) -> np.ndarray:
        return self.history_states[self.index(label)]

    def class_op(self, label) -> np.ndarray:
        return self.class_ops[self.index(label)]


def _assemble(labels, class_ops: np.ndarray, psi: np.ndarray) -> HistorySet:
    states = class_ops @ psi
    dfunc = states.conj() @ states.T
    probs = np.real(np.diag(dfunc)).copy()
    return HistorySet(tuple(labels), class_ops, states, dfunc, probs, psi)


def build_histories(grid: ProjectiveGrid, H, psi) -> HistorySet:
    h = require_hermitian(H)
    ket = as_ket(psi)
    if h.shape[0] != grid.dim or len(ket) != grid.dim:
        raise InvalidInputError("grid, Hamiltonian and state dimensions differ")
    evolved = [[heisenberg(p, h, t) for p in projs] for t, projs in zip(grid.times, grid.alternatives)]
    labels, ops = [], []
    for label in itertools.product(*(range(len(a)) for a in grid.alternatives)):
        c = np.eye(grid.dim, dtype=complex)
        for k, a in enumerate(label):
            c = evolved[k][a] @ c
        labels.append(label)
        ops.append(c)
    return _assemble(labels, np.array(ops), ket)


def coarse_grain(hs: HistorySet, groups: Mapping[Hashable, Sequence] | Sequence[Sequence]) -> HistorySet:
    """Merge histories by summing class operators over each block of a partition.

    ``groups`` maps new labels to lists of old labels (or is a plain list of
    blocks, labelled 0, 1, ...). The blocks must partition the existing labels.
    """
    if not isinstance(groups, Mapping):
        groups = dict(enumerate(groups))
    seen = [lab for block in groups.values() for lab in block]
    if sorted(map(repr, seen)) != sorted(map(repr, hs.labels)) or len(set(seen)) != len(seen):
        raise InvalidInputError("coarse-graining blocks must partition the history labels")
    ops = np.array([sum(hs.class_op(lab) for lab in block) for block in groups.values()])
    return _assemble(list(groups), ops, hs.psi)


def decoherence_functional(hs: HistorySet) -> np.ndarray:
    return hs.dfunc.copy()


def _offdiag(m: np.ndarray) -> np.ndarray:
    return m[~np.eye(len(m), dtype=bool)]


def is_consistent(hs: HistorySet, tol: float = DECOHERENCE_TOL) -> bool:
    off = _offdiag(hs.dfunc)
    return bool(off.size == 0 or np.abs(off.real).max() <= tol)


def is_decoherent(hs: HistorySet, tol: float = DECOHERENCE_TOL) -> bool:
    off = _offdiag(hs.dfunc)
    return bool(off.size == 0 or np.abs(off).max() <= tol)


def record_projector(hs: HistorySet, label, tol: float = DECOHERENCE_TOL) -> np.ndarray:
    """R_alpha = C_alpha|psi><psi|C_alpha^dag / p(alpha).

    Records exist only when the history states are mutually orthogonal; other
    record projectors may exist, this is the canonical one built from the
    history state itself.
    """
    if not is_decoherent(hs, tol):
        raise NotDecoherentError("history states are not orthogonal; no perfectly correlated record exists")
    p = hs.prob(label)
    if p <= tol:
        raise NotDecoherentError(f"history {label!r} has probability {p:.3g}; record undefined")
    k = hs.state(label)
    return np.outer(k, k.conj()) / p


def dfunc_to_json(hs: HistorySet) -> dict:
    return {
        "labels": [list(lab) if isinstance(lab, tuple) else lab for lab in hs.labels],
        "dfunc": [matrix_to_pairs(row) for row in hs.dfunc],
    }
