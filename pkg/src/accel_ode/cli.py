"""Command-line runner: list catalogs, run configured experiments, certify suites,
sweep step sizes and integrate reference flows.

Exit codes: 0 ok, 1 usage or config error, 2 certification failure,
3 divergence, 4 implicit-solver failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import analysis, lyapunov, suites
from .integrators import CLASSICAL_METHODS, SchemeRule, SchemeSpec, SolverFailure, admissible, run
from .objectives import (balanced_start, make_log_sum_exp, make_logistic, make_problem,
                         make_quadratic, make_scalar_quadratic)
from .phase_dynamics import OdeFamily
from .reference_flow import integrate, max_step

EXIT_OK, EXIT_USAGE, EXIT_CERT, EXIT_DIVERGED, EXIT_SOLVER = 0, 1, 2, 3, 4
TRACE_HEADER = ["k", "t", "f_gap", "grad_norm_sq", "lyapunov", "bound_envelope", "x_norm"]
SWEEP_HEADER = ["s", "terminated", "rho_hat", "max_bound_ratio"]
FLOW_HEADER = ["t", "f_gap", "grad_norm_sq", "lyapunov"]
GAP_HEADER = ["k", "t", "gap"]
OUT_ENV = "ACCEL_ODE_OUT"


class UsageError(Exception):
    pass


# -- configuration -----------------------------------------------------------------


@dataclass
class ExperimentConfig:
    name: str
    objective: dict
    scheme: dict
    run: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)

    @property
    def iterations(self) -> int:
        return int(self.run.get("iterations", 1000))

    @property
    def record_every(self) -> int:
        return int(self.run.get("record_every", 1))


_SECTIONS = {
    "objective": {"kind", "dim", "mu", "L", "seed", "samples", "reg", "sharpness", "curvature", "centered", "x0",
                  "start"},
    "scheme": {"family", "rule", "step_size"},
    "run": {"iterations", "record_every"},
    "checks": {"lyapunov", "bounds", "flow_compare", "horizon", "h"},
}


def parse_config(text: str, default_name: str = "experiment") -> ExperimentConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"config is not valid TOML: {exc}") from None
    unknown = set(raw) - set(_SECTIONS) - {"name"}
    if unknown:
        raise UsageError(f"unknown config sections: {', '.join(sorted(unknown))}")
    for sec, keys in _SECTIONS.items():
        body = raw.get(sec, {})
        if not isinstance(body, dict):
            raise UsageError(f"[{sec}] must be a table")
        extra = set(body) - keys
        if extra:
            raise UsageError(f"unknown keys in [{sec}]: {', '.join(sorted(extra))}")
    if "objective" not in raw:
        raise UsageError("config needs an [objective] section")
    if "scheme" not in raw or "family" not in raw["scheme"]:
        raise UsageError("config needs a [scheme] section with a family")
    cfg = ExperimentConfig(
        name=str(raw.get("name", default_name)), objective=dict(raw["objective"]), scheme=dict(raw["scheme"]),
        run=dict(raw.get("run", {})), checks=dict(raw.get("checks", {})),
    )
    if cfg.iterations < 0 or cfg.record_every < 1:
        raise UsageError("[run] needs iterations >= 0 and record_every >= 1")
    if not cfg.name or any(c in cfg.name for c in "/\\"):
        raise UsageError("name must be a plain file stem")
    return cfg


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, default_name=p.stem)


def build_problem(cfg: ExperimentConfig):
    o = cfg.objective
    kind = o.get("kind", "quadratic")
    seed = int(o.get("seed", 0))
    try:
        if kind == "quadratic":
            obj = make_quadratic(int(o.get("dim", 10)), float(o["mu"]), float(o.get("L", 1.0)), seed,
                                 centered=bool(o.get("centered", False)))
        elif kind == "scalar":
            obj = make_scalar_quadratic(float(o.get("curvature", o.get("L", 1.0))))
        elif kind == "logistic":
            obj = make_logistic(int(o.get("samples", 50)), int(o.get("dim", 5)), float(o.get("reg", 0.01)), seed)
        elif kind == "log_sum_exp":
            obj = make_log_sum_exp(int(o.get("dim", 5)), float(o.get("sharpness", 1.0)), seed)
        else:
            raise UsageError(f"unknown objective kind {kind!r}")
    except KeyError as exc:
        raise UsageError(f"[objective] is missing {exc}") from None
    except ValueError as exc:
        raise UsageError(f"bad [objective]: {exc}") from None
    x0 = None
    if "x0" in o:
        x0 = o["x0"]
        if x0 == "minimizer":
            x0 = obj.minimizer
        elif not isinstance(x0, list) or len(x0) != obj.dimension:
            raise UsageError(f"x0 must be 'minimizer' or a list of {obj.dimension} numbers")
    elif o.get("start") == "balanced":
        try:
            x0 = balanced_start(obj)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    elif o.get("start", "default") != "default":
        raise UsageError("start must be 'default' or 'balanced'")
    return make_problem(obj, x0)


def _family(cfg: ExperimentConfig) -> OdeFamily:
    try:
        return OdeFamily(str(cfg.scheme["family"]).upper())
    except ValueError:
        raise UsageError(f"unknown family {cfg.scheme['family']!r}") from None


def _rule(cfg: ExperimentConfig) -> SchemeRule:
    try:
        return SchemeRule(str(cfg.scheme.get("rule", "")).upper())
    except ValueError:
        raise UsageError(f"unknown rule {cfg.scheme.get('rule')!r}") from None


def resolve_step(cfg: ExperimentConfig, family: OdeFamily, rule: SchemeRule, problem) -> tuple[float, str]:
    raw = cfg.scheme.get("step_size", "theorem")
    if raw == "theorem":
        obj = problem.objective
        try:
            return analysis.theorem_step_size(family, rule, obj.mu, obj.lipschitz), "theorem"
        except (KeyError, ValueError) as exc:
            raise UsageError(f"step_size='theorem' is not resolvable: {exc}") from None
    try:
        s = float(raw)
    except (TypeError, ValueError):
        raise UsageError(f"step_size must be a number or 'theorem', got {raw!r}") from None
    if not s > 0:
        raise UsageError("step_size must be positive")
    return s, "config"


def build_spec(cfg: ExperimentConfig, problem) -> tuple[SchemeSpec, str]:
    family, rule = _family(cfg), _rule(cfg)
    if not admissible(family, rule):
        raise UsageError(f"{rule.value} is not defined for {family.value}")
    if family.needs_mu and problem.objective.mu <= 0:
        raise UsageError(f"{family.value} needs a strongly convex objective")
    s, source = resolve_step(cfg, family, rule, problem)
    return SchemeSpec(family, rule, s), source


# -- serialization -------------------------------------------------------------------


def fmt(value) -> str:
    """17 significant digits; empty for missing or non-finite entries."""
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    if isinstance(value, str):
        return value
    v = float(value)
    if not math.isfinite(v):
        return ""
    return format(v, ".17g")


def write_csv(path: Path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(c) for c in row])
    path.write_bytes(buf.getvalue().encode("utf-8"))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def write_json(path: Path, payload):
    text = json.dumps(_jsonable(payload), sort_keys=True, indent=2, allow_nan=False)
    path.write_bytes((text + "\n").encode("utf-8"))


def output_dir(arg: Optional[str]) -> Path:
    out = Path(arg or os.environ.get(OUT_ENV) or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- shared evaluation ---------------------------------------------------------------


def _objective_summary(problem) -> dict:
    obj = problem.objective
    return {"name": obj.name, "dimension": obj.dimension, "mu": obj.mu, "L": obj.lipschitz,
            "dist_sq": problem.dist_sq, "f_gap0": obj.gap(problem.x0)}


def column_sources(trace):
    """(Lyapunov functional, F-gap bound) used for the trace CSV columns, or None."""
    spec = trace.spec
    obj = trace.problem.objective
    fn = next((f for f in lyapunov.applicable(spec.family, spec.rule, proved=True)
               if (obj.mu > 0 or not f.strongly_convex) and f.condition(obj.mu, obj.lipschitz, spec.step_size)),
              None)
    bounds = [b for b in analysis.bounds_for(spec.family, spec.rule) if not analysis.applicability(b, trace)]
    bounds.sort(key=lambda b: b.quantity is not analysis.Quantity.F_GAP)
    return fn, (bounds[0] if bounds else None)


def trace_rows(trace):
    fn, bound = column_sources(trace)
    n = len(trace.k)
    lyap = np.full(n, np.nan)
    if fn is not None:
        idx, vals = lyapunov.lyapunov_series(fn, trace.problem.objective, trace.spec.step_size, trace)
        pos = {int(k): v for k, v in zip(idx, vals)}
        lyap = np.array([pos.get(int(k), np.nan) for k in trace.k])
    env = analysis.envelope_series(bound, trace) if bound is not None else np.full(n, np.nan)
    xn = np.linalg.norm(trace.x, axis=1)
    rows = [[int(trace.k[i]), trace.t[i], trace.f_gap[i], trace.grad_norm_sq[i], lyap[i], env[i], xn[i]]
            for i in range(n)]
    return rows, fn, bound


def certify(trace, bounds: bool = True, lyapunov_checks: bool = True) -> dict:
    """Bound and functional reports for ``trace``; uncertified trial functionals go under diagnostics."""
    spec = trace.spec
    obj = trace.problem.objective
    out = {"bounds": [], "lyapunov": [], "diagnostics": []}
    if bounds:
        out["bounds"] = [r.as_dict() for r in analysis.check_all_bounds(trace)]
    if lyapunov_checks:
        for fn in lyapunov.applicable(spec.family, spec.rule, proved=None):
            rep = lyapunov.check_contraction(fn, obj, trace).as_dict()
            (out["lyapunov"] if fn.proved else out["diagnostics"]).append(rep)
    certified = [r for r in out["bounds"] + out["lyapunov"] if r["status"] != "inapplicable"]
    if not certified:
        out["certification"] = suites.NO_THEOREM
    elif any(r["status"] == "fail" for r in certified):
        out["certification"] = "fail"
    else:
        out["certification"] = "pass"
    return out


def _first_violation(reports: dict):
    for r in reports["bounds"]:
        if r["status"] == "fail":
            return r["id"], r["first_violation"], r["first_violation_ratio"]
    for r in reports["lyapunov"]:
        if r["status"] == "fail":
            return r["id"], r["first_violation"], r["max_violation"]
    return None


def _spectral(spec: SchemeSpec, problem) -> Optional[dict]:
    obj = problem.objective
    if not obj.is_quadratic:
        return None
    radius, real = analysis.max_spectral_radius(spec, obj)
    return {"max_radius": radius, "real_dominant": real, "stable": radius < 1.0,
            "asymptotic": spec.family.time_dependent}


def default_flow_step(family: OdeFamily, lipschitz: float, s: float) -> float:
    h = max_step(family, lipschitz, s)
    if family is OdeFamily.LOW_C:
        h = min(h, suites.LOW_C_H)
    return h


def _flow_compare(trace, checks: dict) -> dict:
    spec = trace.spec
    problem = trace.problem
    family = spec.family
    s = spec.step_size if family.needs_s else 0.0
    t_last = float(trace.t[-1])
    horizon = float(checks.get("horizon", t_last))
    h = float(checks.get("h", default_flow_step(family, problem.objective.lipschitz, s)))
    start = float(trace.t[0]) + (1e-3 if family is OdeFamily.LOW_C else 0.0)
    if horizon <= start:
        return {"status": "skipped", "reason": "horizon does not extend past the start time"}
    flow = integrate(family, problem, s, horizon, h)
    if flow.diverged:
        return {"status": "diverged", "horizon": horizon, "h": h}
    gaps = []
    for k, t, x in zip(trace.k, trace.t, trace.x):
        if t <= flow.t[-1]:
            gaps.append((int(k), float(np.linalg.norm(x - flow.position_at(float(t))))))
    if not gaps:
        return {"status": "skipped", "reason": "no iterate inside the flow horizon"}
    return {"status": "ok", "horizon": horizon, "h": h, "compared": len(gaps),
            "max_gap": max(g for _, g in gaps), "final_gap": gaps[-1][1], "final_k": gaps[-1][0]}


def _exit_for(termination: str) -> int:
    if termination == "diverged":
        return EXIT_DIVERGED
    if termination == "solver_failure":
        return EXIT_SOLVER
    return EXIT_OK


# -- commands ------------------------------------------------------------------------


def cmd_list(args) -> int:
    show_all = not any([args.families, args.schemes, args.objectives, args.lyapunov, args.bounds])
    out = []
    if show_all or args.families:
        out.append("families:")
        for fam in OdeFamily:
            needs = [n for n, flag in (("mu>0", fam.needs_mu), ("s", fam.needs_s)) if flag]
            out.append(f"  {fam.value:<10} needs {', '.join(needs) or '-'}")
    if show_all or args.schemes:
        rules = (SchemeRule.SYMPLECTIC, SchemeRule.EXPLICIT, SchemeRule.IMPLICIT)
        out.append("schemes (family x rule admissibility):")
        out.append("  " + f"{'':<10}" + "".join(f"{r.value:>12}" for r in rules))
        for fam in OdeFamily:
            out.append("  " + f"{fam.value:<10}" + "".join(f"{'yes' if admissible(fam, r) else '-':>12}" for r in rules))
        out.append("classical methods (rule CLASSICAL):")
        for fam, name in CLASSICAL_METHODS.items():
            out.append(f"  {fam.value:<10} {name}")
    if show_all or args.objectives:
        out.append("objectives:")
        out.append("  quadratic     keys dim, mu, L, seed, centered")
        out.append("  scalar        keys curvature")
        out.append("  logistic      keys samples, dim, reg, seed")
        out.append("  log_sum_exp   keys dim, sharpness, seed")
    if show_all or args.lyapunov:
        out.append("lyapunov functionals:")
        for fn in lyapunov.catalog():
            where = fn.family.value + ("" if fn.continuous else "/" + ",".join(sorted(r.value for r in fn.rules)))
            tag = fn.contraction.value if fn.proved else "trial (uncertified)"
            out.append(f"  {fn.id:<30} {where:<32} {fn.condition_text:<18} {tag}  {fn.summary}")
    if show_all or args.bounds:
        out.append("rate bounds:")
        for b in analysis.bound_catalog():
            where = b.family.value + ("" if b.continuous else "/" + ",".join(sorted(r.value for r in b.rules)))
            cond = b.fixed_step_text or b.condition_text
            out.append(f"  {b.id:<28} {where:<32} {b.quantity.value:<12} {cond:<18} {b.summary}")
    print("\n".join(out))
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    problem = build_problem(cfg)
    spec, source = build_spec(cfg, problem)
    out = output_dir(args.out)
    trace = run(spec, problem, cfg.iterations, cfg.record_every)
    rows, fn, bound = trace_rows(trace)
    write_csv(out / f"{cfg.name}.trace.csv", TRACE_HEADER, rows)

    checks = cfg.checks
    reports = certify(trace, bounds=bool(checks.get("bounds", True)),
                      lyapunov_checks=bool(checks.get("lyapunov", True)))
    fit = analysis.fit_rate(trace) if len(trace.k) >= 2 else None
    report = {
        "name": cfg.name,
        "objective": _objective_summary(problem),
        "scheme": {"family": spec.family.value, "rule": spec.rule.value, "step_size": spec.step_size,
                   "step_size_source": source},
        "run": {"iterations": cfg.iterations, "record_every": cfg.record_every, "recorded": len(trace.k),
                "dense": trace.dense},
        "termination": trace.termination,
        "message": trace.message,
        "final": {"k": int(trace.k[-1]), "f_gap": float(trace.f_gap[-1]),
                  "grad_norm_sq": float(trace.grad_norm_sq[-1])},
        "fitted_rate": None if fit is None else {"rho_hat": fit.rho_hat, "window": list(fit.window),
                                                  "residual": fit.residual, "degenerate": fit.degenerate,
                                                  "reason": fit.reason},
        "spectral_radius": _spectral(spec, problem),
        "columns": {"lyapunov": fn.id if fn else None, "bound_envelope": bound.id if bound else None},
        **reports,
    }
    if checks.get("flow_compare", False):
        report["flow_compare"] = _flow_compare(trace, checks)
    write_json(out / f"{cfg.name}.report.json", report)

    code = _exit_for(trace.termination)
    if code:
        print(f"{spec.label} s={spec.step_size:.6g}: {trace.termination} ({trace.message})", file=sys.stderr)
        return code
    print(f"{cfg.name}: {spec.label} s={spec.step_size:.6g} {trace.termination}, "
          f"final f_gap={trace.f_gap[-1]:.3e}, certification {reports['certification']}")
    if reports["certification"] == "fail":
        check_id, k, ratio = _first_violation(reports)
        print(f"violation: {spec.label} {check_id} at k={k} ratio={ratio}", file=sys.stderr)
        return EXIT_CERT
    return EXIT_OK


def _verify_config(args) -> int:
    cfg = load_config(args.config)
    problem = build_problem(cfg)
    spec, _ = build_spec(cfg, problem)
    trace = run(spec, problem, cfg.iterations, 1)
    if args.inject_fault:
        trace = suites.corrupt(trace)
    reports = certify(trace)
    print(f"{cfg.name}: {spec.label} s={spec.step_size:.6g} termination={trace.termination} "
          f"certification={reports['certification']}")
    hit = _first_violation(reports)
    if hit is not None:
        check_id, k, ratio = hit
        print(f"FIRST VIOLATION: scheme={spec.label} check={check_id} k={k} ratio={ratio}")
        return EXIT_CERT
    return _exit_for(trace.termination)


def cmd_verify(args) -> int:
    if bool(args.config) == bool(args.suite):
        raise UsageError("verify needs exactly one of --config or --suite")
    if args.config:
        return _verify_config(args)
    if args.suite not in suites.SUITES:
        raise UsageError(f"unknown suite {args.suite!r}; choose from {', '.join(suites.SUITES)}")
    result = suites.run_suite(args.suite, inject_fault=args.inject_fault)
    counts = result.counts()
    print(f"suite {result.name}: " + ", ".join(f"{v} {k}" for k, v in counts.items()))
    for o in result.outcomes:
        if o.violation:
            print(f"  FAIL {o.scheme} [{o.instance}] {o.check} first={o.first_violation} ratio={o.ratio}")
    if args.out or os.environ.get(OUT_ENV):
        write_json(output_dir(args.out) / f"{result.name}.verify.json",
                   {"suite": result.name, "passed": result.passed, "counts": counts,
                    "outcomes": [o.as_dict() for o in result.outcomes]})
    first = result.first_failure
    if first is not None:
        print(f"FIRST VIOLATION: scheme={first.scheme} instance={first.instance} check={first.check} "
              f"k={first.first_violation} ratio={first.ratio}")
        return EXIT_CERT
    print("all checks pass or are inapplicable")
    return EXIT_OK


def parse_grid(values) -> list[float]:
    grid = []
    for item in values:
        for part in str(item).split(","):
            part = part.strip()
            if not part:
                continue
            try:
                grid.append(float(part))
            except ValueError:
                raise UsageError(f"grid value {part!r} is not a number") from None
    if not grid:
        raise UsageError("--grid needs at least one value")
    if any(not v > 0 for v in grid):
        raise UsageError("grid values must be positive")
    return grid


def sweep_row(cfg: ExperimentConfig, problem, s: float) -> list:
    try:
        spec = SchemeSpec(_family(cfg), _rule(cfg), s)
        trace = run(spec, problem, cfg.iterations, 1)
    except (ValueError, SolverFailure, np.linalg.LinAlgError) as exc:
        return [s, f"error: {exc}", None, None]
    rho = None
    if trace.termination == "completed":
        fit = analysis.fit_rate(trace)
        rho = None if fit.degenerate else fit.rho_hat
    ratios = [r.max_ratio for r in analysis.check_all_bounds(trace) if r.status != "inapplicable"]
    return [s, trace.termination, rho, max(ratios) if ratios else None]


def cmd_sweep(args) -> int:
    if args.param != "step_size":
        raise UsageError("only --param step_size is supported")
    grid = parse_grid(args.grid)
    cfg = load_config(args.config)
    problem = build_problem(cfg)
    family, rule = _family(cfg), _rule(cfg)
    if not admissible(family, rule):
        raise UsageError(f"{rule.value} is not defined for {family.value}")
    if family.needs_mu and problem.objective.mu <= 0:
        raise UsageError(f"{family.value} needs a strongly convex objective")
    rows = [sweep_row(cfg, problem, s) for s in grid]
    path = output_dir(args.out) / f"{cfg.name}.sweep.csv"
    write_csv(path, SWEEP_HEADER, rows)
    first = next((r[0] for r in rows if r[1] != "completed"), None)
    msg = "no row diverged" if first is None else f"first non-completed row at s={first:.6g}"
    print(f"{cfg.name}: {len(rows)} rows written to {path}; {msg}")
    return EXIT_OK


def cmd_flow(args) -> int:
    cfg = load_config(args.config)
    problem = build_problem(cfg)
    family = _family(cfg)
    obj = problem.objective
    if family.needs_mu and obj.mu <= 0:
        raise UsageError(f"{family.value} needs a strongly convex objective")
    rule = cfg.scheme.get("rule")
    spec = None
    if rule:
        spec, _ = build_spec(cfg, problem)
        s = spec.step_size
    else:
        raw = cfg.scheme.get("step_size", 0.0)
        try:
            s = float(raw)
        except (TypeError, ValueError):
            raise UsageError("a flow without a rule needs a numeric step_size (or none)") from None
    if not family.needs_s:
        s = 0.0
    elif not s > 0:
        raise UsageError(f"{family.value} flow needs s > 0")
    checks = cfg.checks
    horizon = float(checks.get("horizon", 10.0))
    h = float(checks.get("h", default_flow_step(family, obj.lipschitz, s)))
    try:
        flow = integrate(family, problem, s, horizon, h)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = output_dir(args.out)
    fns = lyapunov.applicable(family, None, proved=True)
    lyap = (lyapunov.lyapunov_series(fns[0], obj, s, flow)[1] if fns else np.full(len(flow.t), np.nan))
    write_csv(out / f"{cfg.name}.flow.csv", FLOW_HEADER,
              [[flow.t[i], flow.f_gap[i], flow.grad_norm_sq[i], lyap[i]] for i in range(len(flow.t))])
    report = {"name": cfg.name, "family": family.value, "s": s, "h": h, "horizon": horizon,
              "objective": _objective_summary(problem), "diverged": flow.diverged, "samples": len(flow.t),
              "lyapunov_column": fns[0].id if fns else None,
              "bounds": [r.as_dict() for r in analysis.check_all_bounds(flow)],
              "lyapunov": [lyapunov.check_contraction(fn, obj, flow).as_dict() for fn in fns]}
    if spec is not None and not flow.diverged:
        trace = run(spec, problem, cfg.iterations, cfg.record_every)
        rows = [[int(k), t, float(np.linalg.norm(x - flow.position_at(float(t))))]
                for k, t, x in zip(trace.k, trace.t, trace.x) if t <= flow.t[-1]]
        write_csv(out / f"{cfg.name}.gap.csv", GAP_HEADER, rows)
        report["scheme"] = {"family": spec.family.value, "rule": spec.rule.value, "step_size": spec.step_size,
                            "termination": trace.termination, "compared": len(rows)}
    write_json(out / f"{cfg.name}.flow.json", report)
    if flow.diverged:
        print(f"{family.value} flow produced non-finite values before t={horizon}", file=sys.stderr)
        return EXIT_DIVERGED
    failed = [r for r in report["bounds"] + report["lyapunov"] if r["status"] == "fail"]
    print(f"{cfg.name}: {family.value} flow to t={flow.t[-1]:.6g} ({len(flow.t)} samples), "
          f"{len(failed)} failed checks")
    return EXIT_CERT if failed else EXIT_OK


# -- entry point ---------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="accel-ode", description=" ".join(__doc__.split("\n\n")[0].split()))
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    ls = sub.add_parser("list", help="print catalogs")
    for flag in ("families", "schemes", "objectives", "lyapunov", "bounds"):
        ls.add_argument(f"--{flag}", action="store_true")
    ls.set_defaults(func=cmd_list)

    r = sub.add_parser("run", help="run one configured experiment")
    r.add_argument("--config", required=True)
    r.add_argument("--out")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="certify a config or a named suite")
    v.add_argument("--config")
    v.add_argument("--suite")
    v.add_argument("--out")
    v.add_argument("--inject-fault", action="store_true", help="corrupt one trace (negative control)")
    v.set_defaults(func=cmd_verify)

    sw = sub.add_parser("sweep", help="run a config over a grid of step sizes")
    sw.add_argument("--config", required=True)
    sw.add_argument("--param", default="step_size")
    sw.add_argument("--grid", nargs="+", required=True)
    sw.add_argument("--out")
    sw.set_defaults(func=cmd_sweep)

    fl = sub.add_parser("flow", help="integrate the configured family's ODE")
    fl.add_argument("--config", required=True)
    fl.add_argument("--out")
    fl.set_defaults(func=cmd_flow)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
