"""Classical macrorealist baselines: dichotomic hidden-variable trajectories
measured pairwise, optionally with invasive kicks.

Two dynamics families:

``square_wave``
    Q(t) = sign cos(omega t + phi), phase phi uniform (conditioned on the
    initial sign when ``p_plus`` != 1/2). Unkicked correlator is the triangle
    wave 1 - 2 omega tau / pi on [0, pi].
``telegraph``
    Two-state Markov jump process, flip rate ``rate``; correlator exp(-2 rate tau).

Kick model: the detector couples to the value ``coupling`` (s*). When Q(ti)
equals s*, with probability ``eta`` the trajectory is rerandomized (fresh
uniform phase, or a fresh state drawn from the stationary (1/2, 1/2)
distribution). Absence of detection (Q != s*) leaves the trajectory alone.

Random streams: run batches of fixed size ``BATCH``; batch b of stream k uses a
Philox generator keyed on (seed, k, b). Results therefore do not depend on how
batches are spread over threads.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .errors import InvalidInputError
from .lg import ContextualMeans, LGReport

BATCH = 1 << 15
DYNAMICS = ("square_wave", "telegraph")
CONTEXTS = ("measured", "unmeasured")

# stream ids, so the three pair experiments of one suite never share random numbers
_STREAMS = {"12": 1, "23": 2, "13": 3}


@dataclass(frozen=True)
class HiddenModel:
    dynamics: str = "square_wave"
    omega: float = 1.0
    rate: float = 0.0
    coupling: int = 1
    eta: float = 0.0
    p_plus: float = 0.5

    def __post_init__(self):
        if self.dynamics not in DYNAMICS:
            raise InvalidInputError(f"dynamics must be one of {DYNAMICS}, got {self.dynamics!r}")
        if not 0.0 <= self.eta <= 1.0:
            raise InvalidInputError(f"kick strength eta must lie in [0, 1], got {self.eta}")
        if self.rate < 0:
            raise InvalidInputError(f"flip rate must be >= 0, got {self.rate}")
        if self.coupling not in (1, -1):
            raise InvalidInputError("coupling sign must be +1 or -1")
        if not 0.0 <= self.p_plus <= 1.0:
            raise InvalidInputError("p_plus must lie in [0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class MCEstimate:
    value: float
    stderr: float
    n_runs: int
    seed: int

    @classmethod
    def of(cls, samples: np.ndarray, seed: int) -> "MCEstimate":
        n = len(samples)
        sd = float(np.std(samples, ddof=1)) if n > 1 else 0.0
        return cls(float(np.mean(samples)), sd / math.sqrt(n), n, seed)


@dataclass(frozen=True)
class PairSample:
    counts: dict            # (s1, s2) -> int
    p: dict                 # (s1, s2) -> float
    correlator: MCEstimate
    mean_i: MCEstimate
    mean_j: MCEstimate
    context: str


def _rng(seed: int, stream: int, batch: int) -> np.random.Generator:
    if not 0 <= seed < 2**64:
        raise InvalidInputError("seed must be a non-negative 64-bit integer")
    return np.random.Generator(np.random.Philox(key=(seed << 64) | (stream << 32) | batch))


def _sq(phase: np.ndarray, t: float, omega: float) -> np.ndarray:
    return np.where(np.cos(omega * t + phase) >= 0, 1, -1).astype(np.int8)


def _batch(model: HiddenModel, ti: float, tj: float, n: int, rng: np.random.Generator, kick: bool):
    # draw order is fixed so both contexts share the pre-kick randomness
    q0 = np.where(rng.random(n) < model.p_plus, 1, -1).astype(np.int8)
    kick_u = rng.random(n)
    if model.dynamics == "square_wave":
        u = rng.uniform(-0.5 * np.pi, 0.5 * np.pi, n)
        phase = np.where(q0 > 0, u, u + np.pi)
        fresh = rng.uniform(0.0, 2 * np.pi, n)
        qi = _sq(phase, ti, model.omega)
        if kick:
            hit = (qi == model.coupling) & (kick_u < model.eta)
            phase = np.where(hit, fresh, phase)
        qj = _sq(phase, tj, model.omega)
    else:
        flip_i = rng.random(n) < 0.5 * (1 - math.exp(-2 * model.rate * ti))
        fresh = np.where(rng.random(n) < 0.5, 1, -1).astype(np.int8)
        flip_j = rng.random(n) < 0.5 * (1 - math.exp(-2 * model.rate * (tj - ti)))
        qi = np.where(flip_i, -q0, q0).astype(np.int8)
        q = qi
        if kick:
            hit = (qi == model.coupling) & (kick_u < model.eta)
            q = np.where(hit, fresh, qi).astype(np.int8)
        qj = np.where(flip_j, -q, q).astype(np.int8)
    return qi, qj


def _sample(model, ti, tj, n_runs, seed, kick, stream, threads):
    sizes = [BATCH] * (n_runs // BATCH) + ([n_runs % BATCH] if n_runs % BATCH else [])

    def run(b):
        return _batch(model, ti, tj, sizes[b], _rng(seed, stream, b), kick)

    if threads > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(run, range(len(sizes))))
    else:
        parts = [run(b) for b in range(len(sizes))]
    qi = np.concatenate([p[0] for p in parts])
    qj = np.concatenate([p[1] for p in parts])
    return qi, qj


def simulate_pair(model: HiddenModel, ti: float, tj: float, n_runs: int, seed: int,
                  context: str = "measured", *, stream: int = 0, threads: int = 1) -> PairSample:
    """Sample (Q(ti), Q(tj)) with the ti coupling applied (``measured``) or absent (``unmeasured``)."""
    if not ti < tj:
        raise InvalidInputError(f"need ti < tj, got {ti}, {tj}")
    if n_runs < 1:
        raise InvalidInputError("n_runs must be >= 1")
    if context not in CONTEXTS:
        raise InvalidInputError(f"context must be one of {CONTEXTS}")
    if model.dynamics == "telegraph" and ti < 0:
        raise InvalidInputError("telegraph trajectories start at t = 0; ti must be >= 0")
    qi, qj = _sample(model, ti, tj, n_runs, seed, context == "measured", stream, threads)
    counts = {(a, b): int(np.count_nonzero((qi == a) & (qj == b))) for a in (1, -1) for b in (1, -1)}
    p = {k: v / n_runs for k, v in counts.items()}
    prod = qi.astype(float) * qj
    return PairSample(counts, p, MCEstimate.of(prod, seed), MCEstimate.of(qi.astype(float), seed),
                      MCEstimate.of(qj.astype(float), seed), context)


def lg_suite(model: HiddenModel, t1: float, t2: float, t3: float, n_runs: int, seed: int,
             *, threads: int = 1, tau: float | None = None) -> LGReport:
    """Run the pair experiments (1,2), (2,3), (1,3), each measured at both of its times.

    The stderr map holds Monte Carlo standard errors for the correlators and,
    by independent-error propagation across the three runs, for delta0 and
    every margin.
    """
    if not t1 < t2 < t3:
        raise InvalidInputError(f"need t1 < t2 < t3, got {t1}, {t2}, {t3}")
    s12 = simulate_pair(model, t1, t2, n_runs, seed, stream=_STREAMS["12"], threads=threads)
    s23 = simulate_pair(model, t2, t3, n_runs, seed, stream=_STREAMS["23"], threads=threads)
    s13 = simulate_pair(model, t1, t3, n_runs, seed, stream=_STREAMS["13"], threads=threads)
    means = ContextualMeans(s12.mean_j.value, s23.mean_i.value, s13.mean_j.value, s23.mean_j.value)

    se_sum = math.sqrt(s12.correlator.stderr ** 2 + s23.correlator.stderr ** 2 + s13.correlator.stderr ** 2)
    se_d0 = 0.5 * math.sqrt(s12.mean_j.stderr ** 2 + s23.mean_i.stderr ** 2
                            + s13.mean_j.stderr ** 2 + s23.mean_j.stderr ** 2)
    se_mod = math.sqrt(se_sum ** 2 + 4 * se_d0 ** 2)
    stderr = {
        "C12": s12.correlator.stderr, "C23": s23.correlator.stderr, "C13": s13.correlator.stderr,
        "sum": se_sum, "delta0": se_d0,
        "lower_margin": se_sum, "upper_margin": se_sum,
        "mod_lower_margin": se_mod, "mod_upper_margin": se_mod,
        "means": [s12.mean_j.stderr, s23.mean_i.stderr, s13.mean_j.stderr, s23.mean_j.stderr],
    }
    return LGReport.assemble(s12.correlator.value, s23.correlator.value, s13.correlator.value, means,
                             tau=tau, stderr=stderr)

