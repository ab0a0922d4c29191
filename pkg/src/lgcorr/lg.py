"""Three-time Leggett-Garg assembly: correlators, the standard and the
invasiveness-corrected inequalities, and equal-spacing violation scans.

Standard form, for S = C12 + C23 + C13::

    -1 <= S <= 1 + 2 min(C12, C23, C13)

Invasiveness-corrected form, with Delta0 built from the shift of the means of
Q2 and Q3 between their two measurement contexts::

    -1 - 2 Delta0 <= S <= 1 + 2 Delta0 + 2 min(C12, C23, C13)

Margins are bound-minus-value on the side where satisfaction means positive;
a negative margin is a violation of that size.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import protocols
from .errors import InvalidInputError
from .qcore import as_state, heisenberg


def correlator(jd: protocols.JointDistribution) -> float:
    """sum_{s1,s2} s1 s2 p(s1, s2)."""
    return float(sum(s1 * s2 * v for (s1, s2), v in jd.p.items()))


@dataclass(frozen=True)
class Margins:
    lower_margin: float
    upper_margin: float

    @property
    def violation(self) -> float:
        """Size of the larger violated margin, 0 when both bounds hold."""
        return max(0.0, -self.lower_margin, -self.upper_margin)

    @property
    def violated(self) -> bool:
        return self.violation > 0


def lg_check(C12: float, C23: float, C13: float) -> Margins:
    s = C12 + C23 + C13
    return Margins(s + 1.0, 1.0 + 2.0 * min(C12, C23, C13) - s)


@dataclass(frozen=True)
class ContextualMeans:
    """<Q2> measured with t1 / with t3, and <Q3> measured with t1 / with t2."""

    q2_12: float
    q2_23: float
    q3_13: float
    q3_23: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.q2_12, self.q2_23, self.q3_13, self.q3_23)


def delta0(means) -> float:
    m = means.as_tuple() if isinstance(means, ContextualMeans) else tuple(means)
    if len(m) != 4:
        raise InvalidInputError("delta0 needs four contextual means (Q2^12, Q2^23, Q3^13, Q3^23)")
    return 0.5 * (abs(m[0] - m[1]) + abs(m[2] - m[3]))


def modified_lg_check(C12: float, C23: float, C13: float, delta0: float) -> Margins:
    base = lg_check(C12, C23, C13)
    return Margins(base.lower_margin + 2.0 * delta0, base.upper_margin + 2.0 * delta0)


@dataclass(frozen=True)
class LGReport:
    C12: float
    C23: float
    C13: float
    means: ContextualMeans
    delta0: float
    standard: Margins
    modified: Margins
    tau: float | None = None
    flags: tuple[str, ...] = ()
    stderr: dict | None = None

    @property
    def lg_sum(self) -> float:
        return self.C12 + self.C23 + self.C13

    @classmethod
    def assemble(cls, C12, C23, C13, means: ContextualMeans, tau=None, flags=(), stderr=None) -> "LGReport":
        d0 = delta0(means)
        return cls(C12, C23, C13, means, d0, lg_check(C12, C23, C13), modified_lg_check(C12, C23, C13, d0),
                   tau, tuple(flags), stderr)


@dataclass(frozen=True)
class LGScenario:
    """Three-time scenario; ``protocol`` is one name or a map {"12": .., "23": .., "13": ..}."""

    Q: np.ndarray
    H: np.ndarray
    t1: float
    t2: float
    t3: float
    state: object
    protocol: str | dict = "sequential"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (self.t1 < self.t2 < self.t3):
            raise InvalidInputError(f"need t1 < t2 < t3, got {self.t1}, {self.t2}, {self.t3}")

    def protocol_for(self, pair: str) -> str:
        return self.protocol if isinstance(self.protocol, str) else self.protocol[pair]


def quantum_contextual_means(state, Q, H, t1, t2, t3, alpha=1.0, beta=0.0) -> ContextualMeans:
    """Contextual means from the two-ancilla variant of the ancilla protocol.

    Q2 in pair (2,3) is the first time of that pair, so it is the undisturbed
    <Q(t2)>; the other three come from the second ancilla.
    """
    def pair(ti, tj):
        return protocols.ancilla_general(state, Q, H, ti, tj, alpha, beta, two_ancilla=True).means

    m12, m23, m13 = pair(t1, t2), pair(t2, t3), pair(t1, t3)
    return ContextualMeans(m12["second"], m23["first"], m13["second"], m23["second"])


def evaluate(sc: LGScenario, tau: float | None = None) -> LGReport:
    times = {"12": (sc.t1, sc.t2), "23": (sc.t2, sc.t3), "13": (sc.t1, sc.t3)}
    cs, flags = {}, []
    for key, (ti, tj) in times.items():
        res = protocols.run_protocol(sc.protocol_for(key), sc.state, sc.Q, sc.H, ti, tj, **sc.params)
        cs[key] = res.C12
        if res.flag:
            flags.append(f"C{key}: {res.flag}")
    alpha, beta = 1.0, 0.0
    if "ancilla_general" in {sc.protocol_for(k) for k in times}:
        alpha, beta = sc.params["alpha"], sc.params["beta"]
    means = quantum_contextual_means(sc.state, sc.Q, sc.H, sc.t1, sc.t2, sc.t3, alpha, beta)
    return LGReport.assemble(cs["12"], cs["23"], cs["13"], means, tau=tau, flags=flags)


# ---------------------------------------------------------------------------
# scans
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScanResult:
    reports: list[LGReport]
    max_lower_violation: float
    argmax_lower_tau: float | None
    max_upper_violation: float
    argmax_upper_tau: float | None

    @property
    def max_violation(self) -> float:
        return max(self.max_lower_violation, self.max_upper_violation)

    @property
    def argmax_tau(self) -> float | None:
        if self.max_violation <= 0:
            return None
        if self.max_lower_violation >= self.max_upper_violation:
            return self.argmax_lower_tau
        return self.argmax_upper_tau


def summarize(reports: Sequence[LGReport], modified: bool = False) -> ScanResult:
    def best(side):
        top, arg = 0.0, None
        for r in reports:
            m = r.modified if modified else r.standard
            v = -getattr(m, side)
            if not math.isnan(v) and v > top:
                top, arg = v, r.tau
        return top, arg

    lo, lo_arg = best("lower_margin")
    up, up_arg = best("upper_margin")
    return ScanResult(list(reports), lo, lo_arg, up, up_arg)


def violation_scan(Q, H, psi, protocol, tau_grid: Iterable[float], t1: float = 0.0,
                   params: dict | None = None, threads: int = 1) -> ScanResult:
    """Equal spacing t2 - t1 = t3 - t2 = tau over a grid; one report per tau, in grid order."""
    taus = [float(t) for t in tau_grid]
    if not taus:
        raise InvalidInputError("tau grid is empty")
    state = as_state(psi)

    def point(tau):
        return equal_spacing_report(state, Q, H, t1, tau, protocol, params)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            reports = list(ex.map(point, taus))
    else:
        reports = [point(t) for t in taus]
    return summarize(reports)


def equal_spacing_report(state, Q, H, t1: float, tau: float, protocol, params: dict | None = None) -> LGReport:
    if tau == 0:
        return zero_spacing_report(state, Q, H, t1)
    return evaluate(LGScenario(Q, H, t1, t1 + tau, t1 + 2 * tau, state, protocol, params or {}), tau=tau)


def zero_spacing_report(state, Q, H, t1: float, tau: float | None = 0.0) -> LGReport:
    """All three times coincide: repeated measurement gives C = 1 and no context shifts."""
    m = float(np.real(np.trace(heisenberg(Q, H, t1) @ as_state(state).density())))
    return LGReport.assemble(1.0, 1.0, 1.0, ContextualMeans(m, m, m, m), tau=tau)


def refine_violation(Q, H, psi, protocol, lo: float, hi: float, side: str = "lower", points: int = 21,
                     levels: int = 4, t1: float = 0.0, params: dict | None = None) -> tuple[float, float]:
    """Locate the maximal violation on one side by repeated grid zooming.

    Each level re-grids the two cells around the current best point; the last
    level is finished with a parabolic vertex through the best point and its
    neighbours. Returns (tau, violation).
    """
    if side not in ("lower", "upper"):
        raise InvalidInputError("side must be 'lower' or 'upper'")
    attr = f"{side}_margin"
    state = as_state(psi)

    def viol(tau):
        r = equal_spacing_report(state, Q, H, t1, tau, protocol, params)
        return -getattr(r.standard, attr)

    a, b = lo, hi
    for _ in range(levels + 1):
        grid = np.linspace(a, b, points)
        vals = np.array([viol(t) for t in grid])
        i = int(np.clip(np.argmax(vals), 1, points - 2))
        a, b = grid[i - 1], grid[i + 1]
    h = 0.5 * (b - a)
    x1, x2, x3 = a, a + h, b
    f1, f2, f3 = viol(x1), viol(x2), viol(x3)
    den = f1 - 2 * f2 + f3
    x = x2 if den >= 0 else x2 - 0.5 * h * (f3 - f1) / den
    return float(x), float(viol(x))


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

CSV_COLUMNS = ["tau", "C12", "C23", "C13", "delta0", "lower_margin", "upper_margin",
               "mod_lower_margin", "mod_upper_margin"]
STDERR_COLUMNS = [f"{c}_stderr" for c in CSV_COLUMNS[1:]]


def fmt(x) -> str:
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return "nan"
    return f"{x:.12g}"


def report_row(r: LGReport) -> dict:
    row = {
        "tau": r.tau, "C12": r.C12, "C23": r.C23, "C13": r.C13, "delta0": r.delta0,
        "lower_margin": r.standard.lower_margin, "upper_margin": r.standard.upper_margin,
        "mod_lower_margin": r.modified.lower_margin, "mod_upper_margin": r.modified.upper_margin,
    }
    if r.stderr is not None:
        for c in CSV_COLUMNS[1:]:
            row[f"{c}_stderr"] = r.stderr.get(c)
    return row


def to_csv(reports: Sequence[LGReport]) -> str:
    with_err = any(r.stderr is not None for r in reports)
    cols = CSV_COLUMNS + (STDERR_COLUMNS if with_err else []) + ["flag"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in reports:
        row = report_row(r)
        w.writerow([fmt(row.get(c)) for c in cols[:-1]] + ["; ".join(r.flags)])
    return buf.getvalue()
