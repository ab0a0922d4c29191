"""Measurement protocols for the two-time correlator C12 of a dichotomic Q.

* ``sequential_two_time`` -- projective measurements at t1 and t2.
* ``quasi_probability``   -- Re Tr(P(t2) P(t1) rho), NSIT-respecting, may be negative.
* ``ancilla_simple`` / ``ancilla_general`` -- two CNOT couplings to a qubit
  ancilla that records only whether Q had the same sign at both times.
* ``record_protocol``     -- single projective measurement of the record
  projector for the ``same`` history, available when <D> = 0.

The ancilla is appended as the last tensor factor (system (x) ancilla). With
coupling sign s*, the t1 gate flips the ancilla iff Q = s* and the t2 gate
flips it iff Q = -s*, so the ancilla ends in |1> exactly for ``same`` histories.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from . import histories
from .errors import InvalidInputError
from .qcore import (
    ATOL,
    SIGMA_X,
    as_ket,
    as_state,
    heisenberg,
    projector,
    purity,
    reduced_from_ket,
    require_dichotomic,
    require_hermitian,
    unitary,
)
from .twotime import build_frame

SIGNS = (1, -1)
PAIRS = ((1, 1), (1, -1), (-1, 1), (-1, -1))
KET0 = np.array([1, 0], dtype=complex)
KET1 = np.array([0, 1], dtype=complex)


@dataclass(frozen=True)
class JointDistribution:
    """p(s1, s2) over {+1, -1}^2. ``quasi`` distributions may have negative entries."""

    p: dict
    quasi: bool = False

    def __post_init__(self):
        if set(self.p) != set(PAIRS):
            raise InvalidInputError("joint distribution needs all four (s1, s2) sign pairs")
        total = sum(self.p.values())
        if abs(total - 1) > 1e-9:
            raise InvalidInputError(f"entries sum to {total!r}, not 1")
        if not self.quasi and min(self.p.values()) < -1e-12:
            raise InvalidInputError("negative probability in a non-quasi distribution")

    def correlator(self) -> float:
        return float(sum(s1 * s2 * v for (s1, s2), v in self.p.items()))

    def marginal(self, which: int) -> dict[int, float]:
        """Marginal over the first (which=1) or second (which=2) time."""
        k = which - 1
        return {s: float(sum(v for pair, v in self.p.items() if pair[k] == s)) for s in SIGNS}

    def mean(self, which: int) -> float:
        m = self.marginal(which)
        return m[1] - m[-1]

    @property
    def p_same(self) -> float:
        return self.p[(1, 1)] + self.p[(-1, -1)]

    @property
    def p_diff(self) -> float:
        return self.p[(1, -1)] + self.p[(-1, 1)]

    def table(self) -> dict[str, float]:
        return {f"{'+' if a > 0 else '-'}{'+' if b > 0 else '-'}": float(self.p[(a, b)]) for a, b in PAIRS}


def _setup(Q, H, t1, t2):
    q = require_dichotomic(Q)
    h = require_hermitian(H)
    if q.shape != h.shape:
        raise InvalidInputError(f"Q is {q.shape} but H is {h.shape}")
    if t2 < t1:
        raise InvalidInputError(f"t2 ({t2}) must not precede t1 ({t1})")
    return q, h


def _state_for(state, d):
    s = as_state(state)
    if s.dim != d:
        raise InvalidInputError(f"state has dimension {s.dim}, operators have {d}")
    return s


def single_time_distribution(state, Q, H, t: float) -> dict[int, float]:
    """p(s) for a single projective measurement of Q at time t."""
    q, h = _setup(Q, H, t, t)
    rho = _state_for(state, len(q)).density()
    return {s: float(np.real(np.trace(heisenberg(projector(q, s), h, t) @ rho))) for s in SIGNS}


def sequential_two_time(state, Q, H, t1: float, t2: float) -> JointDistribution:
    """p(s1,s2) = Tr(P_s2(t2) P_s1(t1) rho P_s1(t1))."""
    q, h = _setup(Q, H, t1, t2)
    rho = _state_for(state, len(q)).density()
    p1 = {s: heisenberg(projector(q, s), h, t1) for s in SIGNS}
    p2 = {s: heisenberg(projector(q, s), h, t2) for s in SIGNS}
    table = {(a, b): float(np.real(np.trace(p2[b] @ p1[a] @ rho @ p1[a]))) for a, b in PAIRS}
    return JointDistribution(table)


def quasi_probability(state, Q, H, t1: float, t2: float) -> JointDistribution:
    """q(s1,s2) = Re Tr(P_s2(t2) P_s1(t1) rho)."""
    q, h = _setup(Q, H, t1, t2)
    rho = _state_for(state, len(q)).density()
    p1 = {s: heisenberg(projector(q, s), h, t1) for s in SIGNS}
    p2 = {s: heisenberg(projector(q, s), h, t2) for s in SIGNS}
    table = {(a, b): float(np.real(np.trace(p2[b] @ p1[a] @ rho))) for a, b in PAIRS}
    return JointDistribution(table, quasi=True)


def nsit_deviation(state, Q, H, t1: float, t2: float, protocol: str = "sequential") -> float:
    """max_s2 |sum_s1 p12(s1, s2) - p2(s2)| for the sequential or quasi distribution."""
    if protocol == "sequential":
        jd = sequential_two_time(state, Q, H, t1, t2)
    elif protocol == "quasi":
        jd = quasi_probability(state, Q, H, t1, t2)
    else:
        raise InvalidInputError(f"nsit_deviation supports 'sequential' or 'quasi', not {protocol!r}")
    p2 = single_time_distribution(state, Q, H, t2)
    m = jd.marginal(2)
    return max(abs(m[s] - p2[s]) for s in SIGNS)


# ---------------------------------------------------------------------------
# ancilla protocols
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AncillaOutcome:
    p0: float
    p1: float
    inferred_C12: float
    reduced_system_purity: float
    intermediate_purity: float
    disturbance: float
    joint_state: np.ndarray | None = None
    fidelity_free: float | None = None
    factor_a: complex | None = None
    factor_b: complex | None = None
    means: dict | None = None
    flags: tuple[str, ...] = field(default=())


def _gate(q: np.ndarray, flip_on: int) -> np.ndarray:
    """CNOT on a qubit ancilla (factor after the system), flipping iff Q = flip_on."""
    return np.kron(projector(q, flip_on), SIGMA_X) + np.kron(projector(q, -flip_on), np.eye(2))


def _run_pure(ket, q, h, t1, t2, anc0, coupling):
    d = len(q)
    u1 = np.kron(unitary(h, t1), np.eye(2))
    u12 = np.kron(unitary(h, t2 - t1), np.eye(2))
    psi0 = np.kron(ket, anc0)
    free1 = np.kron(unitary(h, t1) @ ket, anc0)
    psi1 = _gate(q, coupling) @ (u1 @ psi0)
    psi2 = _gate(q, -coupling) @ (u12 @ psi1)
    amp = psi2.reshape(d, 2)
    return {
        "psi1": psi1,
        "psi2": psi2,
        "p1": float(np.vdot(amp[:, 1], amp[:, 1]).real),
        "p0": float(np.vdot(amp[:, 0], amp[:, 0]).real),
        "disturbance": float(np.linalg.norm(psi1 - free1)),
        "rho1": reduced_from_ket(psi1, d, 2),
        "rho2": reduced_from_ket(psi2, d, 2),
        "amp": amp,
    }


def _two_ancilla_means(ket, q, h, t1, t2, anc0, coupling):
    """Means of Q at the pair endpoints read from a second ancilla added at t2.

    The second ancilla flips iff Q(t2) = +1. For anc0 = |0> the two ancillas
    jointly fix (s1, s2); otherwise the first-time mean is the undisturbed
    <Q(t1)>, since later couplings cannot reach back.
    """
    d = len(q)
    u1 = np.kron(unitary(h, t1), np.eye(4))
    u12 = np.kron(unitary(h, t2 - t1), np.eye(4))
    psi = np.kron(np.kron(ket, anc0), KET0)
    # first ancilla is the middle factor; build gates on system (x) anc1 and pad anc2
    g1 = np.kron(_gate(q, coupling), np.eye(2))
    g2 = np.kron(_gate(q, -coupling), np.eye(2))
    g2b = np.kron(projector(q, 1), np.kron(np.eye(2), SIGMA_X)) + np.kron(projector(q, -1), np.eye(4))
    psi = g2b @ g2 @ u12 @ g1 @ u1 @ psi
    probs = (np.abs(psi.reshape(d, 2, 2)) ** 2).sum(axis=0)  # [a1, a2]
    s2 = np.array([-1, 1])  # a2 = 1 <=> Q(t2) = +1
    mean_second = float((probs * s2[None, :]).sum())
    if abs(anc0[1]) < ATOL:
        same = np.array([-1, 1])  # a1 = 1 <=> same sign
        mean_first = float((probs * same[:, None] * s2[None, :]).sum())
    else:
        mean_first = float(np.vdot(ket, heisenberg(q, h, t1) @ ket).real)
    return {"first": mean_first, "second": mean_second}


def _ancilla(state, Q, H, t1, t2, alpha, beta, coupling, two_ancilla):
    q, h = _setup(Q, H, t1, t2)
    if coupling not in SIGNS:
        raise InvalidInputError("coupling must be +1 or -1")
    s = _state_for(state, len(q))
    d = len(q)
    anc0 = alpha * KET0 + beta * KET1
    bias = abs(alpha) ** 2 - abs(beta) ** 2
    flags = []

    comps = [(w, _run_pure(k, q, h, t1, t2, anc0, coupling)) for w, k in s.components()]
    p1 = sum(w * r["p1"] for w, r in comps)
    p0 = sum(w * r["p0"] for w, r in comps)
    rho1 = sum(w * r["rho1"] for w, r in comps)
    rho2 = sum(w * r["rho2"] for w, r in comps)
    disturbance = sum(w * r["disturbance"] for w, r in comps)

    if abs(bias) < 1e-12:
        inferred = math.nan
        flags.append("zero-information point: |alpha|^2 = |beta|^2, C12 undefined")
    else:
        inferred = (p1 - p0) / bias

    extra = {}
    if s.is_pure:
        r = comps[0][1]
        free2 = unitary(h, t2) @ s.ket
        extra["joint_state"] = r["psi2"]
        extra["fidelity_free"] = float(np.vdot(free2, rho2 @ free2).real)
        # overlaps of the ancilla-resolved system kets with the freely evolved state
        extra["factor_a"] = complex(np.vdot(free2, r["amp"][:, 1]))
        extra["factor_b"] = complex(np.vdot(free2, r["amp"][:, 0]))
    if two_ancilla:
        ms = [(w, _two_ancilla_means(k, q, h, t1, t2, anc0, coupling)) for w, k in s.components()]
        extra["means"] = {key: sum(w * m[key] for w, m in ms) for key in ("first", "second")}

    return AncillaOutcome(
        p0=float(p0), p1=float(p1), inferred_C12=float(inferred),
        reduced_system_purity=purity(rho2), intermediate_purity=purity(rho1),
        disturbance=float(disturbance), flags=tuple(flags), **extra,
    )


def ancilla_simple(state, Q, H, t1: float, t2: float, *, coupling: int = 1,
                   two_ancilla: bool = False) -> AncillaOutcome:
    """Ancilla starts in |0>; p1 = p(same), p0 = p(diff), C12 = p1 - p0."""
    return _ancilla(state, Q, H, t1, t2, 1.0, 0.0, coupling, two_ancilla)


def ancilla_general(state, Q, H, t1: float, t2: float, alpha: complex, beta: complex, *,
                    coupling: int = 1, two_ancilla: bool = False) -> AncillaOutcome:
    """Ancilla starts in alpha|0> + beta|1>, alpha and beta sharing a phase.

    p1 = (1 + (|alpha|^2 - |beta|^2) C12)/2, so C12 is recovered from the bias.
    ``disturbance`` is || |Psi_1> - |psi_t1> (x) |ancilla> ||, which is
    sqrt(2) |alpha - beta| ||P_{s*} psi_t1||.
    """
    alpha, beta = complex(alpha), complex(beta)
    if abs(abs(alpha) ** 2 + abs(beta) ** 2 - 1) > ATOL:
        raise InvalidInputError("ancilla amplitudes must satisfy |alpha|^2 + |beta|^2 = 1")
    if abs(alpha) > ATOL and abs(beta) > ATOL:
        dphi = cmath.phase(alpha / beta)
        if abs(dphi) > 1e-9:
            raise InvalidInputError(f"alpha and beta must share a phase (relative phase {dphi:.3g} rad)")
    return _ancilla(state, Q, H, t1, t2, alpha, beta, coupling, two_ancilla)


def ancilla_averaged(state, Q, H, t1: float, t2: float) -> AncillaOutcome:
    """Average of the two opposite-coupling ancilla protocols.

    Each coupling is non-invasive at t1 for one sign of Q(t1). Averaging them
    is offered for general initial states, but it mixes two different
    measurement schemes and is not certified non-invasive.
    """
    a = ancilla_simple(state, Q, H, t1, t2, coupling=1)
    b = ancilla_simple(state, Q, H, t1, t2, coupling=-1)
    return AncillaOutcome(
        p0=0.5 * (a.p0 + b.p0), p1=0.5 * (a.p1 + b.p1),
        inferred_C12=0.5 * (a.inferred_C12 + b.inferred_C12),
        reduced_system_purity=0.5 * (a.reduced_system_purity + b.reduced_system_purity),
        intermediate_purity=0.5 * (a.intermediate_purity + b.intermediate_purity),
        disturbance=0.5 * (a.disturbance + b.disturbance),
        flags=("averaged opposite couplings; not certified non-invasive",),
    )


# ---------------------------------------------------------------------------
# record protocol
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RecordOutcome:
    decoherent: bool
    p_same: float | None
    d_expectation: float
    naive_overlap: float
    h_squared_scalar: bool
    decay_agrees: bool | None
    flags: tuple[str, ...] = field(default=())

    @property
    def inferred_C12(self) -> float:
        return math.nan if self.p_same is None else 2 * self.p_same - 1


SAME_DIFF = {"same": [(0, 0), (1, 1)], "diff": [(0, 1), (1, 0)]}


def record_protocol(psi, Q, H, t1: float, t2: float, tol: float = histories.DECOHERENCE_TOL) -> RecordOutcome:
    """p(same) from one projective measurement of the record projector R_same.

    Applies only when |same> and |diff> are orthogonal, i.e. <D> = 0. An
    inapplicable input is reported through ``decoherent=False``, not raised.
    ``naive_overlap`` is |<psi_t2|psi_t1>|^2, which equals p(same) when
    additionally H^2 is proportional to the identity.
    """
    q, h = _setup(Q, H, t1, t2)
    ket = as_ket(psi)
    if len(ket) != len(q):
        raise InvalidInputError("state and operator dimensions differ")
    frame = build_frame(q, h, t1, t2)
    d_exp = float(np.vdot(ket, frame.D_op @ ket).real)
    naive = float(abs(np.vdot(unitary(h, t2) @ ket, unitary(h, t1) @ ket)) ** 2)
    h2 = h @ h
    scalar = bool(np.abs(h2 - np.trace(h2) / len(h) * np.eye(len(h))).max() <= ATOL)

    hs = histories.coarse_grain(histories.build_histories(histories.dichotomic_grid(q, (t1, t2)), h, ket), SAME_DIFF)
    if not histories.is_decoherent(hs, tol):
        return RecordOutcome(False, None, d_exp, naive, scalar, None, ("decoherence condition failed",))
    p_same_hist = hs.prob("same")
    if p_same_hist <= tol:
        # R_same undefined; the same history simply never happens
        return RecordOutcome(True, 0.0, d_exp, naive, scalar, abs(naive) <= 1e-9 if scalar else None,
                             ("p(same) = 0: record projector undefined",))
    r_same = histories.record_projector(hs, "same", tol)
    p = float(np.vdot(ket, r_same @ ket).real)
    agrees = abs(p - naive) <= 1e-9 if scalar else None
    return RecordOutcome(True, p, d_exp, naive, scalar, agrees)


# ---------------------------------------------------------------------------
# dispatch and serialization
# ---------------------------------------------------------------------------

PROTOCOLS = ("sequential", "quasi", "ancilla_simple", "ancilla_general", "record")


@dataclass(frozen=True)
class PairResult:
    """Uniform view of one protocol run: correlator, table, optional flag."""

    protocol: str
    C12: float
    p_table: dict
    flag: str = ""
    diagnostics: dict = field(default_factory=dict)


def run_protocol(name: str, state, Q, H, t1: float, t2: float, **params) -> PairResult:
    if name == "sequential":
        jd = sequential_two_time(state, Q, H, t1, t2)
        return PairResult(name, jd.correlator(), jd.table())
    if name == "quasi":
        jd = quasi_probability(state, Q, H, t1, t2)
        return PairResult(name, jd.correlator(), jd.table(), diagnostics={"min_q": min(jd.p.values())})
    if name in ("ancilla_simple", "ancilla_general"):
        if name == "ancilla_simple":
            out = ancilla_simple(state, Q, H, t1, t2)
        else:
            out = ancilla_general(state, Q, H, t1, t2, params["alpha"], params["beta"])
        diag = {"reduced_system_purity": out.reduced_system_purity,
                "intermediate_purity": out.intermediate_purity, "disturbance": out.disturbance}
        return PairResult(name, out.inferred_C12, {"0": out.p0, "1": out.p1}, "; ".join(out.flags), diag)
    if name == "record":
        rec = record_protocol(state, Q, H, t1, t2)
        table = {} if rec.p_same is None else {"same": rec.p_same, "diff": 1 - rec.p_same}
        diag = {"D_expectation": rec.d_expectation, "naive_overlap": rec.naive_overlap}
        return PairResult(name, rec.inferred_C12, table, "; ".join(rec.flags), diag)
    raise InvalidInputError(f"unknown protocol {name!r}; expected one of {PROTOCOLS}")


def result_record(result: PairResult, params: dict) -> dict:
    """JSON record {protocol, params, p_table, C12, diagnostics}."""
    c = None if math.isnan(result.C12) else result.C12
    diag = dict(result.diagnostics)
    if result.flag:
        diag["flag"] = result.flag
    return {"protocol": result.protocol, "params": params, "p_table": result.p_table, "C12": c, "diagnostics": diag}
