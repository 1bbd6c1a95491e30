"""Experiment configuration, runs, sweeps and report emission.

A config is flat sectioned text::

    # comment
    [problem]
    spec = ls:2,1
    [algorithm]
    name = trigs
    delta = 2
    [schedule]
    spec = rational:M=0.2,C=0
    [run]
    t_end = 1000
    x0 = 1, 1
    [assert]
    f_gap_slope = <= -1.8
    tail_min_dist = < 0.05

Assertion values are ``<op> <number>`` with op one of ``< <= > >= ==``, or
``in [lo, hi]``.
"""
from __future__ import annotations

import json
import logging
import math
import os
import re
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from . import diagnostics as dg
from .continuous import AVD, TRIGS, HeavyBall, Trajectory, energy_W, integrate
from .discrete import IpatreParams, IterateLog, ipatre_ns_run, ipatre_run
from .objectives import Objective, resolve_problem
from .schedules import Certificate, PowerSchedule, cd_check, parse_schedule, rate_bound, select_K

log = logging.getLogger(__name__)

THREADS_ENV = "TRIGS_SWEEP_THREADS"
CONTINUOUS = ("trigs", "avd", "heavy_ball")
DISCRETE = ("ipatre", "ipatre-ns")

SCHEMA: dict[str, dict[str, Any]] = {
    "problem": {"spec": None},
    "algorithm": {"name": None, "delta": None, "alpha": None, "mu": None, "c": None, "lambda": None, "anchor": None},
    "schedule": {"spec": None},
    "run": {"t0": 1.0, "t_end": None, "iters": None, "x0": None, "v0": None, "x1": None,
            "rtol": 1e-8, "atol": 1e-10, "samples": 200, "max_step": None},
    "analysis": {"K": None, "window": 0.5, "s": 0.9, "jitter": 0.05},
    "output": {"dir": None, "formats": "csv,json", "every": None},
}

CONTINUOUS_QUANTITIES = {
    "f_gap_slope", "f_gap_slope_logcorr", "exp_rate", "final_dist", "tail_min_dist", "max_norm",
    "t_speed_growth", "W_violation", "gronwall_residual", "rate_bound_ok", "cd_satisfied",
}
DISCRETE_QUANTITIES = {
    "gap_envelope_ok", "step_sum_growth", "resid_sum_growth", "resid_envelope_ok",
    "final_dist", "tail_min_dist", "energy_sup",
}
# discrete rate quantities; their guarantees assume alpha > 3
DISCRETE_RATE_QUANTITIES = {"gap_envelope_ok", "step_sum_growth", "resid_sum_growth", "resid_envelope_ok", "energy_sup"}
CONTINUOUS_RATE_QUANTITIES = {"f_gap_slope", "f_gap_slope_logcorr"}

_ASSERT_RE = re.compile(r"^(<=|>=|==|<|>)\s*(\S+)$")
_RANGE_RE = re.compile(r"^in\s*\[\s*([^,\]]+)\s*,\s*([^\]]+)\]$")


class ConfigError(ValueError):
    def __init__(self, msg: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {msg}" if line is not None else msg)


@dataclass(frozen=True)
class Assertion:
    quantity: str
    op: str
    target: Any

    def check(self, value: float) -> tuple[bool, float]:
        """(passed, margin); a positive margin means room to spare."""
        if value is None or (isinstance(value, float) and math.isnan(value)):
            return False, float("nan")
        if self.op == "in":
            lo, hi = self.target
            return lo <= value <= hi, min(value - lo, hi - value)
        t = self.target
        margin = {"<": t - value, "<=": t - value, ">": value - t, ">=": value - t, "==": 0.0 - abs(value - t)}[self.op]
        ok = {"<": value < t, "<=": value <= t, ">": value > t, ">=": value >= t, "==": value == t}[self.op]
        return bool(ok), float(margin)

    def describe(self) -> str:
        if self.op == "in":
            return f"{self.quantity} in [{self.target[0]!r}, {self.target[1]!r}]"
        return f"{self.quantity} {self.op} {self.target!r}"


@dataclass
class ExperimentConfig:
    name: str
    problem: str
    algorithm: str
    params: dict
    schedule: Optional[str]
    run: dict
    analysis: dict
    output: dict
    assertions: list[Assertion] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    base_dir: Optional[str] = None

    def echo(self) -> dict:
        return {
            "name": self.name,
            "problem": self.problem,
            "algorithm": {"name": self.algorithm, **self.params},
            "schedule": self.schedule,
            "run": self.run,
            "analysis": self.analysis,
            "assertions": [a.describe() for a in self.assertions],
        }


def _num(text: str, line: int, key: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {text!r}", line) from None


def _vec(text: str, line: int, key: str) -> list[float]:
    return [_num(v.strip(), line, key) for v in text.split(",") if v.strip()]


def _parse_assertion(key: str, val: str, line: int) -> Assertion:
    m = _RANGE_RE.match(val)
    if m:
        lo, hi = _num(m.group(1), line, key), _num(m.group(2), line, key)
        if lo > hi:
            raise ConfigError(f"{key}: empty range [{lo}, {hi}]", line)
        return Assertion(key, "in", (lo, hi))
    m = _ASSERT_RE.match(val)
    if not m:
        raise ConfigError(f"{key}: assertion must look like '<= 0.5' or 'in [a, b]', got {val!r}", line)
    return Assertion(key, m.group(1), _num(m.group(2), line, key))


def parse_config(text: str, name: str = "run", base_dir=None) -> ExperimentConfig:
    """Parse and validate config text; defaults are filled in."""
    raw: dict[str, dict[str, tuple[str, int]]] = {s: {} for s in SCHEMA}
    asserts: list[tuple[str, str, int]] = []
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in SCHEMA and section != "assert":
                raise ConfigError(f"unknown section [{section}]", lineno)
            continue
        key, eq, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if not eq or not key:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno)
        if section is None:
            raise ConfigError(f"key {key!r} outside any section", lineno)
        if section == "assert":
            asserts.append((key, val, lineno))
            continue
        if key not in SCHEMA[section]:
            raise ConfigError(f"unknown key {key!r} in [{section}]", lineno)
        if key in raw[section]:
            raise ConfigError(f"duplicate key {key!r} in [{section}]", lineno)
        raw[section][key] = (val, lineno)

    def get(sec, key):
        return raw[sec].get(key, (None, None))

    problem, pline = get("problem", "spec")
    if problem is None:
        raise ConfigError("missing [problem] spec")
    try:
        obj = _resolve_problem(problem, base_dir)
    except (ValueError, OSError) as exc:
        raise ConfigError(str(exc), pline) from None

    algo, aline = get("algorithm", "name")
    if algo is None:
        raise ConfigError("missing [algorithm] name")
    if algo not in CONTINUOUS + DISCRETE:
        raise ConfigError(f"unknown algorithm {algo!r}; expected one of {', '.join(CONTINUOUS + DISCRETE)}", aline)

    params: dict[str, Any] = {}
    for key, default in SCHEMA["algorithm"].items():
        if key == "name":
            continue
        val, ln = get("algorithm", key)
        if val is None:
            if default is not None:
                params[key] = default
            continue
        params[key] = _vec(val, ln, key) if key == "anchor" else _num(val, ln, key)

    if algo == "ipatre-ns":
        params.setdefault("lambda", 1.0)
    required = {"trigs": ("delta",), "avd": ("alpha",), "heavy_ball": (), "ipatre": ("alpha", "c"), "ipatre-ns": ("alpha", "c")}
    for key in required[algo]:
        if key not in params:
            raise ConfigError(f"algorithm {algo} needs '{key}'", aline)
    for key in ("delta", "c", "lambda", "mu"):
        if key in params and not params[key] > 0:
            raise ConfigError(f"{key} must be positive", get("algorithm", key)[1])
    if algo == "heavy_ball":
        params.setdefault("mu", obj.strong_convexity)
        if not params["mu"] > 0:
            raise ConfigError("heavy_ball needs a strongly convex problem", pline)
    if algo in DISCRETE and obj.prox is None:
        raise ConfigError(f"problem {problem!r} has no proximal map", pline)
    if algo in CONTINUOUS and obj.grad is None:
        raise ConfigError(f"problem {problem!r} has no gradient", pline)

    run: dict[str, Any] = {}
    for key, default in SCHEMA["run"].items():
        val, ln = get("run", key)
        if val is None:
            run[key] = default
        elif key in ("x0", "v0", "x1"):
            run[key] = _vec(val, ln, key)
            if len(run[key]) != obj.dim:
                raise ConfigError(f"{key} needs {obj.dim} entries", ln)
        else:
            run[key] = _num(val, ln, key)
    if run["x0"] is None:
        raise ConfigError("missing [run] x0")
    if run["t0"] <= 0:
        raise ConfigError("t0 must be positive", get("run", "t0")[1])
    if algo in CONTINUOUS:
        if run["t_end"] is None:
            raise ConfigError("continuous runs need [run] t_end")
        if run["t_end"] <= run["t0"]:
            raise ConfigError("t_end must exceed t0", get("run", "t_end")[1])
        run["samples"] = int(run["samples"])
        if run["samples"] < 10:
            raise ConfigError("samples must be at least 10", get("run", "samples")[1])
    else:
        if run["iters"] is None:
            raise ConfigError("discrete runs need [run] iters")
        run["iters"] = int(run["iters"])
        if run["iters"] < 2:
            raise ConfigError("iters must be at least 2", get("run", "iters")[1])

    sched, sline = get("schedule", "spec")
    if algo == "trigs" and sched is None:
        raise ConfigError("trigs needs a [schedule] spec")
    if sched is not None:
        try:
            sch = parse_schedule(sched, run["t0"])
        except ValueError as exc:
            raise ConfigError(str(exc), sline) from None

    analysis: dict[str, Any] = {}
    for key, default in SCHEMA["analysis"].items():
        val, ln = get("analysis", key)
        analysis[key] = default if val is None else _num(val, ln, key)
    if not 0 < analysis["window"] <= 1:
        raise ConfigError("window must lie in (0, 1]", get("analysis", "window")[1])
    if not 0.5 <= analysis["s"] < 1:
        raise ConfigError("s must lie in [1/2, 1)", get("analysis", "s")[1])

    output: dict[str, Any] = {}
    for key, default in SCHEMA["output"].items():
        val, ln = get("output", key)
        output[key] = default if val is None else val
    output["formats"] = [f.strip() for f in str(output["formats"]).split(",") if f.strip()]
    bad = set(output["formats"]) - {"csv", "json"}
    if bad:
        raise ConfigError(f"unknown output format(s) {sorted(bad)}", get("output", "formats")[1])
    if output["every"] is not None:
        output["every"] = int(_num(output["every"], get("output", "every")[1], "every"))

    produced = CONTINUOUS_QUANTITIES if algo in CONTINUOUS else DISCRETE_QUANTITIES
    assertions = []
    cfg_warnings = []
    for key, val, ln in asserts:
        if key not in produced:
            raise ConfigError(f"assertion on {key!r}, which a {algo} run does not produce", ln)
        assertions.append(_parse_assertion(key, val, ln))
    keys = {a.quantity for a in assertions}
    if algo in DISCRETE and params["alpha"] <= 3 and keys & DISCRETE_RATE_QUANTITIES:
        cfg_warnings.append(f"asserted rates require alpha > 3 (alpha = {params['alpha']})")
    if algo == "avd" and params["alpha"] < 3 and keys & CONTINUOUS_RATE_QUANTITIES:
        cfg_warnings.append(f"asserted rates require alpha >= 3 (alpha = {params['alpha']})")
    if algo == "trigs" and isinstance(sch, PowerSchedule) and sch.r <= 2 / 3 and keys & CONTINUOUS_RATE_QUANTITIES:
        cfg_warnings.append(f"asserted rates require r in (2/3, 2] (r = {sch.r})")
    for w in cfg_warnings:
        warnings.warn(f"{name}: {w}", stacklevel=2)

    return ExperimentConfig(name, problem, algo, params, sched, run, analysis, output, assertions, cfg_warnings,
                            None if base_dir is None else str(base_dir))


def _resolve_problem(spec: str, base_dir) -> Objective:
    if spec.startswith("matrix:") and base_dir is not None:
        path = Path(spec[len("matrix:"):])
        if not path.is_absolute():
            spec = f"matrix:{Path(base_dir) / path}"
    return resolve_problem(spec)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    return parse_config(path.read_text(), name=path.stem, base_dir=path.parent)


@dataclass
class AssertionResult:
    quantity: str
    assertion: str
    measured: Optional[float]
    margin: Optional[float]
    passed: bool


@dataclass
class RunReport:
    config: ExperimentConfig
    summary: dict = field(default_factory=dict)
    rates: list = field(default_factory=list)
    certificate: Optional[dict] = None
    assertions: list = field(default_factory=list)
    error: Optional[str] = None
    wall_time: float = 0.0
    data: Any = None

    @property
    def passed(self) -> bool:
        return self.error is None and all(a.passed for a in self.assertions)

    def to_json(self) -> dict:
        """JSON-ready dict; wall time is left out so reruns are byte-identical."""
        return _clean({
            "config": self.config.echo(),
            "summary": self.summary,
            "rate_reports": [r.to_json() for r in self.rates],
            "certificate": self.certificate,
            "assertions": [a.__dict__ for a in self.assertions],
            "warnings": self.config.warnings,
            "error": self.error,
            "pass": self.passed,
        })


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _decade_growth(t, y) -> float:
    """sup of y over the last decade of t divided by its sup over the decade before."""
    t_end = t[-1]
    last = y[t >= t_end / 10]
    prev = y[(t >= t_end / 100) & (t < t_end / 10)]
    if prev.size == 0 or prev.max() == 0:
        return float("nan")
    return float(last.max() / prev.max())


def _continuous(cfg: ExperimentConfig, obj: Objective, report: RunReport) -> None:
    p, run, an = cfg.params, cfg.run, cfg.analysis
    sch = parse_schedule(cfg.schedule, run["t0"]) if cfg.schedule else None
    if cfg.algorithm == "trigs":
        anchor = None if p.get("anchor") is None else np.asarray(p["anchor"])
        spec = TRIGS(obj, p["delta"], sch, anchor)
    elif cfg.algorithm == "avd":
        spec = AVD(obj, p["alpha"], sch, run["t0"])
    else:
        spec = HeavyBall(obj, p["mu"], run["t0"])
    traj = integrate(spec, run["x0"], run["v0"], t_end=run["t_end"], t0=run["t0"], rtol=run["rtol"],
                     atol=run["atol"], samples=run["samples"], max_step=run["max_step"])
    report.data = traj
    s = report.summary
    s["steps"] = traj.stats.steps
    s["rejected_steps"] = traj.stats.rejected
    gap = traj.f_gap()
    t = traj.t
    window = an["window"]
    if not np.all(np.isnan(gap)):
        for key, label, corr in (("f_gap_slope", "f_gap", False), ("f_gap_slope_logcorr", "f_gap/ln t", True)):
            try:
                rep = dg.rate_fit(t, gap, window, corr, quantity=label)
                report.rates.append(rep)
                s[key] = rep.slope
            except ValueError as exc:
                s[key] = float("nan")
                log.info("%s: %s", key, exc)
        try:
            rep = dg.exp_rate(t, gap, window, quantity="f_gap (semilog)")
            report.rates.append(rep)
            s["exp_rate"] = rep.slope
        except ValueError:
            s["exp_rate"] = float("nan")
        s["final_gap"] = float(gap[-1])
    xstar = obj.known_min_norm_solution
    if xstar is not None:
        s["final_dist"], s["tail_min_dist"] = dg.min_norm_gap(traj.x, xstar)
        s["ball_regime"] = dg.ball_regime(traj.x, xstar)
    s["max_norm"] = float(np.max(np.linalg.norm(traj.x, axis=1)))
    s["t_speed_growth"] = _decade_growth(t, t * traj.speed())
    W = energy_W(spec, traj)
    s["W_violation"] = float(W.max_increase / (1 + abs(W.W[0])))

    if cfg.algorithm == "trigs" and spec.anchor is None and obj.known_min_value is not None and xstar is not None:
        K = an["K"] if an["K"] is not None else _auto_K(sch, p["delta"], run["t_end"])
        if K is None:
            report.certificate = {"K": None, "satisfied": False, "note": "no admissible K passes the controlled-decay check"}
            return
        cert = Certificate(p["delta"], K, run["t0"])
        verdict = cd_check(sch, cert, run["t_end"])
        report.certificate = {"delta": p["delta"], "K": K, "t1": run["t0"], "satisfied": verdict.satisfied,
                              "margin": verdict.margin}
        s["cd_satisfied"] = 1.0 if verdict.satisfied else 0.0
        if verdict.satisfied:
            ly = dg.lyapunov_general(traj, obj, sch, cert, xstar)
            s["gronwall_residual"] = float(ly.max_gronwall / (1 + abs(ly.energy[0])))
            bound = rate_bound(sch, cert, float(np.linalg.norm(xstar)), float(ly.energy[0]), t)
            s["rate_bound_ok"] = 1.0 if np.all(bound >= gap) else 0.0
            s["rate_bound_min_slack"] = float(np.min(bound - gap))


def _auto_K(sch, delta, horizon):
    try:
        return select_K(sch, delta, horizon)
    except ValueError:
        return None


def _discrete(cfg: ExperimentConfig, obj: Objective, report: RunReport) -> None:
    p, run, an = cfg.params, cfg.run, cfg.analysis
    params = IpatreParams(p["alpha"], p["c"], run["iters"], run["x0"], run["x1"])
    lg: IterateLog = ipatre_run(obj, params) if cfg.algorithm == "ipatre" else ipatre_ns_run(obj, p["lambda"], params)
    report.data = lg
    s, k = report.summary, lg.k.astype(float)
    sv, jit = an["s"], an["jitter"]
    tail = k >= k[-1] / 10
    start = int(np.argmax(tail))
    if not np.all(np.isnan(lg.f_gap)):
        # gaps at round-off level carry no rate information; treat them as exact zeros
        floor = (64 * np.finfo(float).eps) ** 2 * (1 + abs(lg.f_gap[0]))
        gap = np.where(lg.f_gap <= floor, 0.0, lg.f_gap)
        s["gap_envelope_ok"] = 1.0 if dg.envelope_nonincreasing((k ** (2 * sv) * gap)[tail], jitter=jit) else 0.0
        s["final_gap"] = float(lg.f_gap[-1])
    s["step_sum_growth"] = dg.partial_sum_growth(k ** (2 * sv - 1) * lg.step_norm**2, start)
    resid = np.nan_to_num(lg.resid_norm, nan=0.0)
    s["resid_sum_growth"] = dg.partial_sum_growth(k ** (2 * sv) * resid**2, start)
    s["resid_envelope_ok"] = 1.0 if dg.envelope_nonincreasing((k**sv * resid)[tail], jitter=jit) else 0.0
    if obj.known_min_norm_solution is not None:
        s["final_dist"], s["tail_min_dist"] = dg.min_norm_gap(lg.x, obj.known_min_norm_solution, k, k[-1] / 10)
        s["ball_regime"] = dg.ball_regime(lg.x, obj.known_min_norm_solution)
    if cfg.algorithm == "ipatre" and obj.grad is not None and obj.known_min_norm_solution is not None and p["alpha"] > 3:
        a = (2 + p["alpha"] - 1) / 2
        E = dg.discrete_energy(lg, obj, a, sv, p["alpha"], p["c"])
        s["energy_sup"] = float(np.max(E))


def run(cfg: ExperimentConfig) -> RunReport:
    """Execute one config; module errors are recorded on the report."""
    report = RunReport(cfg)
    start = time.perf_counter()
    try:
        obj = _resolve_problem(cfg.problem, cfg.base_dir)
        if cfg.algorithm in CONTINUOUS:
            _continuous(cfg, obj, report)
        else:
            _discrete(cfg, obj, report)
    except Exception as exc:  # recorded, not raised: a sweep must not abort
        report.error = f"{type(exc).__name__}: {exc}"
        log.warning("run %s failed: %s", cfg.name, report.error)
    report.summary = {k: (float(v) if isinstance(v, (np.floating, np.integer)) else v) for k, v in report.summary.items()}
    report.wall_time = time.perf_counter() - start
    for a in cfg.assertions:
        val = report.summary.get(a.quantity)
        ok, margin = a.check(val)
        report.assertions.append(AssertionResult(a.quantity, a.describe(), val, margin, ok))
    return report


def sweep(configs, workers: Optional[int] = None) -> list[RunReport]:
    """Run configs independently; results keep the input order."""
    configs = list(configs)
    if workers is None:
        workers = int(os.environ.get(THREADS_ENV, "1"))
    if workers <= 1 or len(configs) <= 1:
        return [run(c) for c in configs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, configs))


def report_json(report: RunReport) -> str:
    return json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n"


def emit(report: RunReport, out_dir, formats=("csv", "json")) -> list[Path]:
    """Write the sample/iterate CSV and the JSON report; returns written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    name = report.config.name
    if "csv" in formats and report.data is not None:
        if isinstance(report.data, Trajectory):
            path = out / f"{name}.trajectory.csv"
            report.data.to_csv(path)
        else:
            path = out / f"{name}.iterates.csv"
            report.data.to_csv(path, report.config.output.get("every"))
        written.append(path)
    if "json" in formats:
        path = out / f"{name}.json"
        path.write_text(report_json(report))
        written.append(path)
    return written
