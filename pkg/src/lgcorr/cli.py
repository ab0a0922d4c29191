"""Scenario runner.

    lgcorr run scenario.json [--out DIR] [--seed N] [--format csv|json|both] [--threads N]
    lgcorr template

Exit status: 0 ok, 1 configuration error, 2 runtime error.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import lg, macroreal, protocols
from .errors import ConfigError, InvalidInputError
from .qcore import (
    NAMED_STATES,
    QuantumState,
    SpinModel,
    is_dichotomic,
    is_hermitian,
    pairs_to_array,
    pairs_to_matrix,
    pauli_operator,
)

FORMATS = ("csv", "json", "both")
UNITS = ("omega_t", "absolute")
CSV_NAME = "lg_report.csv"
JSON_NAME = "lg_summary.json"


def _num(x, where: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ConfigError(where, f"expected a number, got {x!r}")
    if not math.isfinite(x):
        raise ConfigError(where, "must be finite")
    return float(x)


def _complex(x, where: str) -> complex:
    if isinstance(x, (int, float)) and not isinstance(x, bool):
        return complex(x)
    if isinstance(x, list) and len(x) == 2:
        return complex(_num(x[0], where), _num(x[1], where))
    raise ConfigError(where, f"expected a number or [re, im], got {x!r}")


def _require(d: dict, key: str, where: str):
    if not isinstance(d, dict) or key not in d:
        raise ConfigError(f"{where}.{key}" if where else key, "missing")
    return d[key]


def _matrix_spec(spec, where: str, dim: int) -> np.ndarray:
    if isinstance(spec, dict) and "pauli" in spec:
        if dim != 2:
            raise ConfigError(where, "Pauli coefficient triples need dimension 2")
        c = spec["pauli"]
        if not isinstance(c, list) or len(c) != 3:
            raise ConfigError(f"{where}.pauli", "expected three coefficients [cx, cy, cz]")
        return pauli_operator([_num(v, f"{where}.pauli") for v in c])
    if isinstance(spec, dict) and "entries" in spec:
        try:
            m = pairs_to_matrix(spec["entries"], spec.get("dim", dim))
        except (InvalidInputError, TypeError, ValueError) as e:
            raise ConfigError(f"{where}.entries", str(e)) from None
        if m.shape[0] != dim:
            raise ConfigError(f"{where}.dim", f"matrix dimension {m.shape[0]} != system dimension {dim}")
        return m
    raise ConfigError(where, "expected {'pauli': [cx, cy, cz]} or {'dim': d, 'entries': [[re, im], ...]}")


@dataclass
class ScenarioConfig:
    """Validated scenario. ``raw`` keeps the canonical dict form used by :meth:`to_dict`."""

    raw: dict
    Q: np.ndarray | None = None
    H: np.ndarray | None = None
    state: QuantumState | None = None
    omega: float | None = None
    t1: float = 0.0
    taus: list[float] | None = None
    times3: tuple[float, float, float] | None = None
    protocol: str = "sequential"
    protocol_params: dict = field(default_factory=dict)
    model: macroreal.HiddenModel | None = None
    n_runs: int = 100_000
    seed: int = 0
    out: str = "."
    fmt: str = "csv"
    threads: int = 1

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        if not isinstance(d, dict):
            raise ConfigError("<root>", "config must be a JSON object")
        known = {"system", "times", "protocol", "runs", "seed", "output", "threads"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown top-level field")
        canon: dict = {}
        cfg = cls(raw=canon)

        proto = _require(d, "protocol", "")
        if isinstance(proto, str):
            proto = {"name": proto}
        name = _require(proto, "name", "protocol")
        allowed = protocols.PROTOCOLS + ("classical",)
        if name not in allowed:
            raise ConfigError("protocol.name", f"{name!r} is not one of {allowed}")
        cfg.protocol = name
        canon["protocol"] = {"name": name}
        if name == "ancilla_general":
            a = _complex(_require(proto, "alpha", "protocol"), "protocol.alpha")
            b = _complex(_require(proto, "beta", "protocol"), "protocol.beta")
            cfg.protocol_params = {"alpha": a, "beta": b}
            canon["protocol"].update(alpha=[a.real, a.imag], beta=[b.real, b.imag])
        if name == "classical":
            m = _require(proto, "model", "protocol")
            if not isinstance(m, dict):
                raise ConfigError("protocol.model", "expected an object")
            bad = set(m) - set(macroreal.HiddenModel.__dataclass_fields__)
            if bad:
                raise ConfigError(f"protocol.model.{sorted(bad)[0]}", "unknown model field")
            try:
                cfg.model = macroreal.HiddenModel(**m)
            except (InvalidInputError, TypeError) as e:
                raise ConfigError("protocol.model", str(e)) from None
            canon["protocol"]["model"] = cfg.model.to_dict()

        if name != "classical":
            cfg._parse_system(_require(d, "system", ""), canon)
        cfg._parse_times(_require(d, "times", ""), canon)

        runs = d.get("runs", 100_000)
        if isinstance(runs, bool) or not isinstance(runs, int) or runs < 1:
            raise ConfigError("runs", "must be a positive integer")
        seed = d.get("seed", 0)
        if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
            raise ConfigError("seed", "must be a non-negative 64-bit integer")
        threads = d.get("threads", 1)
        if isinstance(threads, bool) or not isinstance(threads, int) or threads < 1:
            raise ConfigError("threads", "must be a positive integer")
        out = d.get("output", {})
        if not isinstance(out, dict):
            raise ConfigError("output", "expected an object")
        fmt = out.get("format", "csv")
        if fmt not in FORMATS:
            raise ConfigError("output.format", f"must be one of {FORMATS}")
        path = out.get("path", ".")
        if not isinstance(path, str):
            raise ConfigError("output.path", "must be a string")
        cfg.n_runs, cfg.seed, cfg.threads, cfg.fmt, cfg.out = runs, seed, threads, fmt, path
        canon.update(runs=runs, seed=seed, threads=threads, output={"path": path, "format": fmt})
        return cfg

    def _parse_system(self, s, canon):
        if not isinstance(s, dict):
            raise ConfigError("system", "expected an object")
        sys_c: dict = {}
        if "spin_model" in s:
            sm = s["spin_model"] or {}
            try:
                model = SpinModel(omega=_num(sm.get("omega", 1.0), "system.spin_model.omega"),
                                  q_direction=tuple(sm.get("q_direction", (0.0, 0.0, 1.0))))
            except (InvalidInputError, TypeError) as e:
                raise ConfigError("system.spin_model", str(e)) from None
            dim = 2
            self.H, self.Q, self.omega = model.hamiltonian, model.Q, model.omega
            sys_c["spin_model"] = {"omega": model.omega, "q_direction": list(model.q_direction)}
        else:
            dim = _require(s, "dimension", "system")
            if isinstance(dim, bool) or not isinstance(dim, int) or dim < 2:
                raise ConfigError("system.dimension", "must be an integer >= 2")
            self.H = _matrix_spec(_require(s, "hamiltonian", "system"), "system.hamiltonian", dim)
            self.Q = _matrix_spec(_require(s, "Q", "system"), "system.Q", dim)
            if not is_hermitian(self.H):
                raise ConfigError("system.hamiltonian", "matrix is not hermitian")
            if not is_dichotomic(self.Q):
                raise ConfigError("system.Q", "Q must be hermitian with Q^2 = I")
            sys_c.update(dimension=dim, hamiltonian=s["hamiltonian"], Q=s["Q"])
            if "omega" in s:
                self.omega = _num(s["omega"], "system.omega")
                sys_c["omega"] = self.omega
        init = _require(s, "initial_state", "system")
        try:
            if isinstance(init, str):
                if init not in NAMED_STATES:
                    raise ConfigError("system.initial_state", f"unknown named state {init!r}; known: {sorted(NAMED_STATES)}")
                if dim != 2:
                    raise ConfigError("system.initial_state", "named states are two-level states")
                self.state = QuantumState(ket=NAMED_STATES[init])
            elif isinstance(init, dict) and "ket" in init:
                self.state = QuantumState(ket=pairs_to_array(init["ket"]))
            elif isinstance(init, dict) and "rho" in init:
                self.state = QuantumState(rho=pairs_to_matrix(init["rho"], dim))
            else:
                raise ConfigError("system.initial_state", "expected a name, {'ket': [...]} or {'rho': [...]}")
        except InvalidInputError as e:
            raise ConfigError("system.initial_state", str(e)) from None
        if self.state.dim != dim:
            raise ConfigError("system.initial_state", f"state dimension {self.state.dim} != {dim}")
        sys_c["initial_state"] = init
        canon["system"] = sys_c

    def _parse_times(self, t, canon):
        if not isinstance(t, dict):
            raise ConfigError("times", "expected an object")
        units = t.get("units", "absolute")
        if units not in UNITS:
            raise ConfigError("times.units", f"must be one of {UNITS}")
        scale = 1.0
        if units == "omega_t":
            omega = self.omega
            if self.model is not None:
                if self.model.dynamics != "square_wave":
                    raise ConfigError("times.units", "omega_t units need an oscillation frequency; use absolute for telegraph")
                omega = self.model.omega
            if not omega:
                raise ConfigError("times.units", "omega_t units need a spin model or system.omega")
            scale = 1.0 / omega
        tc: dict = {"units": units}
        if "tau_grid" in t:
            g = t["tau_grid"]
            if isinstance(g, dict):
                try:
                    g = np.linspace(_num(g["start"], "times.tau_grid.start"), _num(g["stop"], "times.tau_grid.stop"),
                                    int(g["num"])).tolist()
                except KeyError as e:
                    raise ConfigError(f"times.tau_grid.{e.args[0]}", "missing") from None
            if not isinstance(g, list) or not g:
                raise ConfigError("times.tau_grid", "must be a non-empty list or {start, stop, num}")
            g = [_num(x, "times.tau_grid") for x in g]
            if any(b <= a for a, b in zip(g, g[1:])):
                raise ConfigError("times.tau_grid", "grid must be strictly increasing")
            if g[0] < 0:
                raise ConfigError("times.tau_grid", "spacings must be non-negative")
            if self.model is not None and g[0] <= 0:
                raise ConfigError("times.tau_grid", "classical runs need strictly positive spacings")
            t1 = _num(t.get("t1", 0.0), "times.t1")
            self.t1 = t1 * scale
            self.taus = [x * scale for x in g]
            tc.update(t1=t1, tau_grid=g)
        elif all(k in t for k in ("t1", "t2", "t3")):
            ts = tuple(_num(t[k], f"times.{k}") for k in ("t1", "t2", "t3"))
            if not ts[0] < ts[1] < ts[2]:
                raise ConfigError("times", "need t1 < t2 < t3")
            self.times3 = tuple(x * scale for x in ts)
            tc.update(t1=ts[0], t2=ts[1], t3=ts[2])
        else:
            raise ConfigError("times", "give either tau_grid or all of t1, t2, t3")
        canon["times"] = tc

    def to_dict(self) -> dict:
        return json.loads(json.dumps(self.raw))


def load_config(path: str | Path) -> ScenarioConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError("<path>", f"cannot read {path}: {e.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError("<json>", f"line {e.lineno}: {e.msg}") from None
    return ScenarioConfig.from_dict(data)


def _points(cfg: ScenarioConfig) -> list[tuple[float | None, tuple[float, float, float] | None]]:
    """(tau in config units, absolute times) per output row; times None marks tau = 0."""
    if cfg.taus is not None:
        unit_taus = cfg.raw["times"]["tau_grid"]
        return [(u, None if tau == 0 else (cfg.t1, cfg.t1 + tau, cfg.t1 + 2 * tau))
                for u, tau in zip(unit_taus, cfg.taus)]
    t = cfg.times3
    return [(None, t)]


def compute(cfg: ScenarioConfig) -> list[lg.LGReport]:
    pts = _points(cfg)

    def one(pt):
        tau, times = pt
        if cfg.protocol == "classical":
            return macroreal.lg_suite(cfg.model, *times, cfg.n_runs, cfg.seed, tau=tau)
        if times is None:
            return lg.zero_spacing_report(cfg.state, cfg.Q, cfg.H, cfg.t1, tau=tau)
        sc = lg.LGScenario(cfg.Q, cfg.H, *times, cfg.state, cfg.protocol, cfg.protocol_params)
        return lg.evaluate(sc, tau=tau)

    if cfg.threads > 1 and len(pts) > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as ex:
            return list(ex.map(one, pts))
    return [one(p) for p in pts]


def _clean(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def summary(cfg: ScenarioConfig, reports: list[lg.LGReport]) -> dict:
    scan = lg.summarize(reports)
    mod = lg.summarize(reports, modified=True)
    d0 = [r.delta0 for r in reports if math.isfinite(r.delta0)]
    out = {
        "protocol": cfg.protocol,
        "max_violation": scan.max_violation,
        "argmax_tau": scan.argmax_tau,
        "max_lower_violation": scan.max_lower_violation,
        "argmax_lower_tau": scan.argmax_lower_tau,
        "max_upper_violation": scan.max_upper_violation,
        "argmax_upper_tau": scan.argmax_upper_tau,
        "max_modified_violation": mod.max_violation,
        "delta0": {"min": min(d0), "max": max(d0), "mean": sum(d0) / len(d0)} if d0 else None,
        "flagged_rows": sum(1 for r in reports if r.flags),
        "n_rows": len(reports),
        "config": cfg.to_dict(),
    }
    if cfg.protocol == "classical":
        out["min_margin_in_stderr"] = _min_margin_z(reports)
    return {k: _clean(v) for k, v in out.items()}


def _min_margin_z(reports) -> float | None:
    zs = []
    for r in reports:
        for key, m in (("lower_margin", r.standard.lower_margin), ("upper_margin", r.standard.upper_margin),
                       ("mod_lower_margin", r.modified.lower_margin), ("mod_upper_margin", r.modified.upper_margin)):
            se = r.stderr.get(key, 0.0)
            if se > 0:
                zs.append(m / se)
    return min(zs) if zs else None


def run(cfg: ScenarioConfig, out_dir: str | Path | None = None) -> list[Path]:
    out = Path(out_dir if out_dir is not None else cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    reports = compute(cfg)
    written = []
    if cfg.fmt in ("csv", "both"):
        p = out / CSV_NAME
        p.write_text(lg.to_csv(reports), encoding="utf-8")
        written.append(p)
    summ = summary(cfg, reports)
    if cfg.fmt in ("json", "both"):
        summ["rows"] = [{k: _clean(v) for k, v in lg.report_row(r).items()} | {"flag": "; ".join(r.flags)}
                        for r in reports]
    p = out / JSON_NAME
    p.write_text(json.dumps(summ, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    written.append(p)
    return written


TEMPLATE = {
    "system": {"spin_model": {"omega": 1.0, "q_direction": [0.0, 0.0, 1.0]}, "initial_state": "up_z"},
    "times": {"units": "omega_t", "t1": 0.0, "tau_grid": {"start": 0.0, "stop": 3.141592653589793, "num": 181}},
    "protocol": {"name": "sequential"},
    "seed": 12345,
    "output": {"path": "out", "format": "both"},
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lgcorr", description="Leggett-Garg correlator scenarios")
    sub = ap.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="run a scenario config")
    r.add_argument("config")
    r.add_argument("--out", default=None, help="output directory (overrides output.path)")
    r.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    r.add_argument("--format", choices=FORMATS, default=None)
    r.add_argument("--threads", type=int, default=None)
    sub.add_parser("template", help="print an example config")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.cmd == "template":
        print(json.dumps(TEMPLATE, indent=2))
        return 0
    try:
        cfg = load_config(args.config)
        if args.seed is not None or args.format is not None or args.threads is not None:
            d = cfg.to_dict()
            if args.seed is not None:
                d["seed"] = args.seed
            if args.format is not None:
                d["output"]["format"] = args.format
            if args.threads is not None:
                d["threads"] = args.threads
            cfg = ScenarioConfig.from_dict(d)
    except ConfigError as e:
        print(f"lgcorr: config error: {e}", file=sys.stderr)
        return 1
    try:
        paths = run(cfg, args.out)
    except Exception as e:  # noqa: BLE001 -- report any failure as a runtime error
        print(f"lgcorr: runtime error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
