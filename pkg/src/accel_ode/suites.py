"""Named certification batches: runs on canonical instances checked against
every applicable rate bound and Lyapunov functional."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from . import analysis, lyapunov
from .integrators import SchemeRule, SchemeSpec, Trace, admissible, iterations_to_reach, run
from .objectives import (ProblemInstance, make_log_sum_exp, make_logistic, make_problem,
                         make_quadratic)
from .phase_dynamics import OdeFamily
from .reference_flow import integrate, max_step

S, E, I, C = SchemeRule.SYMPLECTIC, SchemeRule.EXPLICIT, SchemeRule.IMPLICIT, SchemeRule.CLASSICAL
NO_THEOREM = "no theorem applicable"

DISCRETE_STEPS = 2000
CONVEX_STEPS = 5000
LYAPUNOV_STEPS = 500
STEP_FRACTIONS = (1.0, 0.5, 0.1)
FLOW_HORIZON = 50.0
LOW_C_H = 1e-3  # RK4 needs h * 3/t small near the start time 1e-3
DIAGNOSTIC_STEP = 0.25  # times 1/L
ACCELERATION_KAPPA = 1e4
ACCELERATION_TARGET = 1e-6
ACCELERATION_FACTOR = 50.0


@dataclass
class CheckOutcome:
    scheme: str
    instance: str
    check: str
    kind: str  # bound | lyapunov | run | comparison
    status: str  # pass | fail | inapplicable
    ratio: Optional[float] = None  # max quantity/envelope, or max excess for functionals
    first_violation: Optional[float] = None
    detail: str = ""
    certified: bool = True

    @property
    def violation(self) -> bool:
        return self.certified and self.status == "fail"

    @property
    def label(self) -> str:
        return self.status if self.certified else NO_THEOREM

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["label"] = self.label
        return d


@dataclass
class SuiteResult:
    name: str
    outcomes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not any(o.violation for o in self.outcomes)

    @property
    def first_failure(self) -> Optional[CheckOutcome]:
        return next((o for o in self.outcomes if o.violation), None)

    def counts(self) -> dict:
        out = {"pass": 0, "fail": 0, "inapplicable": 0, NO_THEOREM: 0}
        for o in self.outcomes:
            out[o.label] = out.get(o.label, 0) + 1
        return out


# -- canonical instances ---------------------------------------------------------


@lru_cache(maxsize=None)
def _instance(name: str) -> ProblemInstance:
    if name == "quadratic(mu=0.01)":
        return make_problem(make_quadratic(10, 0.01, 1.0, seed=0))
    if name == "quadratic(mu=1e-4)":
        return make_problem(make_quadratic(10, 1e-4, 1.0, seed=0))
    if name == "centered-quadratic(mu=0.01)":
        return make_problem(make_quadratic(10, 0.01, 1.0, seed=0, centered=True))
    if name == "centered-quadratic(mu=1e-4)":
        return make_problem(make_quadratic(10, 1e-4, 1.0, seed=0, centered=True))
    if name == "logistic":
        return make_problem(make_logistic(50, 5, 0.01, seed=0))
    if name == "log_sum_exp":
        return make_problem(make_log_sum_exp(5, 1.0, seed=0))
    raise KeyError(f"unknown instance {name!r}")


STRONGLY_CONVEX = ("quadratic(mu=0.01)", "quadratic(mu=1e-4)", "logistic")
LYAPUNOV_INSTANCES = ("quadratic(mu=0.01)", "logistic")


def canonical_instance(name: str) -> ProblemInstance:
    return _instance(name)


# -- checking helpers ------------------------------------------------------------


def corrupt(trace):
    """Copy of ``trace`` whose f-gap at the middle sample is inflated a millionfold."""
    gaps = np.array(trace.f_gap, dtype=float)
    i = len(gaps) // 2
    gaps[i] = gaps[i] * 1e6 + 1.0
    return dataclasses.replace(trace, f_gap=gaps)


class _Collector:
    def __init__(self, name: str, inject_fault: bool):
        self.result = SuiteResult(name)
        self.pending_fault = inject_fault

    def add(self, outcome: CheckOutcome):
        self.result.outcomes.append(outcome)

    def _maybe_corrupt(self, trace):
        if self.pending_fault:
            self.pending_fault = False
            return corrupt(trace)
        return trace

    def check_discrete(self, trace: Trace, instance: str, lyapunov_checks: bool = True,
                       bounds: bool = True, certified: bool = True):
        spec = trace.spec
        scheme = f"{spec.label} s={spec.step_size:.6g}"
        obj = trace.problem.objective
        finished = trace.termination == "completed"
        self.add(CheckOutcome(scheme, instance, "termination", "run",
                              "pass" if finished or not certified else "fail",
                              detail=trace.termination + (f": {trace.message}" if trace.message else ""),
                              certified=certified))
        if certified:
            trace = self._maybe_corrupt(trace)
        if bounds:
            for bound in analysis.bounds_for(spec.family, spec.rule):
                rep = analysis.check_bound(bound, trace)
                self.add(CheckOutcome(scheme, instance, bound.id, "bound", rep.status, rep.max_ratio,
                                      rep.first_violation, rep.reason, certified))
        if lyapunov_checks:
            proved = True if certified else False
            for fn in lyapunov.applicable(spec.family, spec.rule, proved=proved):
                rep = lyapunov.check_contraction(fn, obj, trace)
                self.add(CheckOutcome(scheme, instance, fn.id, "lyapunov", rep.status, rep.max_violation,
                                      rep.first_violation, rep.reason, rep.certified and certified))

    def check_flow(self, flow, instance: str):
        scheme = f"{flow.family.value} flow s={flow.s:.6g} h={flow.h:.3g}"
        self.add(CheckOutcome(scheme, instance, "termination", "run", "fail" if flow.diverged else "pass",
                              detail="diverged" if flow.diverged else "completed"))
        flow = self._maybe_corrupt(flow)
        for rep in analysis.check_all_bounds(flow):
            self.add(CheckOutcome(scheme, instance, rep.bound_id, "bound", rep.status, rep.max_ratio,
                                  rep.first_violation, rep.reason))
        for fn in lyapunov.applicable(flow.family, None, proved=True):
            rep = lyapunov.check_contraction(fn, flow.problem.objective, flow)
            self.add(CheckOutcome(scheme, instance, fn.id, "lyapunov", rep.status, rep.max_violation,
                                  rep.first_violation, rep.reason))


def _theorem_runs(col: _Collector, families, rules, instances, fractions=STEP_FRACTIONS,
                  steps=DISCRETE_STEPS):
    for name in instances:
        pb = _instance(name)
        obj = pb.objective
        for fam in families:
            for rule in rules:
                if not admissible(fam, rule):
                    continue
                s0 = analysis.theorem_step_size(fam, rule, obj.mu, obj.lipschitz)
                fracs = (1.0,) if rule is C else fractions
                for frac in fracs:
                    trace = run(SchemeSpec(fam, rule, frac * s0), pb, steps)
                    col.check_discrete(trace, name, lyapunov_checks=False)


def _lyapunov_runs(col: _Collector, families, rules, instances, steps=LYAPUNOV_STEPS):
    for name in instances:
        pb = _instance(name)
        obj = pb.objective
        for fam in families:
            for rule in rules:
                if not lyapunov.applicable(fam, rule):
                    continue
                s0 = analysis.theorem_step_size(fam, rule, obj.mu, obj.lipschitz)
                trace = run(SchemeSpec(fam, rule, s0), pb, steps)
                col.check_discrete(trace, name, bounds=False)


def _diagnostic_runs(col: _Collector, families, instances, steps=DISCRETE_STEPS):
    """Schemes without a convergence theorem: run and evaluate trial functionals, never certify."""
    for name in instances:
        pb = _instance(name)
        for fam, rule in families:
            s = DIAGNOSTIC_STEP / pb.objective.lipschitz
            trace = run(SchemeSpec(fam, rule, s), pb, steps)
            col.check_discrete(trace, name, bounds=False, certified=False)


# -- suites ----------------------------------------------------------------------


def strongly_convex(inject_fault: bool = False) -> SuiteResult:
    col = _Collector("strongly-convex", inject_fault)
    fams = (OdeFamily.SC_HR, OdeFamily.HB_HR)
    _theorem_runs(col, fams, (S, E, I, C), STRONGLY_CONVEX)
    _lyapunov_runs(col, fams, (S, E, I), LYAPUNOV_INSTANCES)
    return col.result


def convex(inject_fault: bool = False) -> SuiteResult:
    col = _Collector("convex", inject_fault)
    name = "log_sum_exp"
    pb = _instance(name)
    L = pb.objective.lipschitz
    for rule in (S, C, I):
        s = analysis.theorem_step_size(OdeFamily.C_HR_MOD, rule, 0.0, L)
        col.check_discrete(run(SchemeSpec(OdeFamily.C_HR_MOD, rule, s), pb, CONVEX_STEPS), name)
    for rule in (E, C, I):
        s = analysis.theorem_step_size(OdeFamily.GRAD_FLOW, rule, 0.0, L)
        col.check_discrete(run(SchemeSpec(OdeFamily.GRAD_FLOW, rule, s), pb, DISCRETE_STEPS), name)
    diag = [(OdeFamily.C_HR, r) for r in (S, E, I)] + [(OdeFamily.C_HR_MOD, E)]
    _diagnostic_runs(col, diag, ("quadratic(mu=0.01)", name))
    return col.result


def _acceleration_gap(col: _Collector):
    obj = make_quadratic(10, 1.0 / ACCELERATION_KAPPA, 1.0, seed=0)
    pb = make_problem(obj)
    name = f"quadratic(kappa={ACCELERATION_KAPPA:g})"
    counts = {}
    for fam in (OdeFamily.SC_HR, OdeFamily.LOW_SC):
        s = analysis.theorem_step_size(fam, S, obj.mu, obj.lipschitz)
        counts[fam] = iterations_to_reach(SchemeSpec(fam, S, s), pb, ACCELERATION_TARGET, max_iterations=2_000_000)
    fast, slow = counts[OdeFamily.SC_HR], counts[OdeFamily.LOW_SC]
    ratio = float(slow) / max(fast, 1) if fast is not None and slow is not None else float("nan")
    ok = np.isfinite(ratio) and ratio >= ACCELERATION_FACTOR
    col.add(CheckOutcome("SC_HR/SYMPLECTIC vs LOW_SC/SYMPLECTIC", name, "acceleration_gap", "comparison",
                         "pass" if ok else "fail", ratio,
                         detail=f"iterations to f_gap <= {ACCELERATION_TARGET:g}: high-resolution {fast}, "
                                f"low-resolution {slow}; need ratio >= {ACCELERATION_FACTOR:g}"))
    return fast, slow


def low_resolution(inject_fault: bool = False) -> SuiteResult:
    col = _Collector("low-resolution", inject_fault)
    _theorem_runs(col, (OdeFamily.LOW_SC,), (S, E, I), STRONGLY_CONVEX)
    _lyapunov_runs(col, (OdeFamily.LOW_SC,), (S, E, I), LYAPUNOV_INSTANCES)
    _acceleration_gap(col)
    _diagnostic_runs(col, [(OdeFamily.LOW_C, r) for r in (S, E, I)], ("quadratic(mu=0.01)", "log_sum_exp"))
    return col.result


def gradient_descent(inject_fault: bool = False) -> SuiteResult:
    col = _Collector("gradient-descent", inject_fault)
    fam = OdeFamily.GRAD_FLOW
    for name in ("centered-quadratic(mu=0.01)", "centered-quadratic(mu=1e-4)", "log_sum_exp"):
        pb = _instance(name)
        mu, L = pb.objective.mu, pb.objective.lipschitz
        steps = [(E, 1.0 / L), (C, 1.0 / L), (I, 1.0 / L)]
        if mu > 0:
            steps += [(E, 2.0 / (mu + L)), (I, 0.5 / mu)]
        for rule, s in steps:
            col.check_discrete(run(SchemeSpec(fam, rule, s), pb, DISCRETE_STEPS), name)
    return col.result


def continuous(inject_fault: bool = False) -> SuiteResult:
    col = _Collector("continuous", inject_fault)
    plan = {
        "quadratic(mu=0.01)": [OdeFamily.GRAD_FLOW, OdeFamily.LOW_SC, OdeFamily.SC_HR, OdeFamily.HB_HR,
                               OdeFamily.C_HR, OdeFamily.LOW_C],
        "logistic": [OdeFamily.GRAD_FLOW, OdeFamily.LOW_SC, OdeFamily.SC_HR, OdeFamily.HB_HR, OdeFamily.C_HR],
        "log_sum_exp": [OdeFamily.GRAD_FLOW, OdeFamily.C_HR, OdeFamily.LOW_C],
    }
    for name, fams in plan.items():
        pb = _instance(name)
        L = pb.objective.lipschitz
        for fam in fams:
            s = 1.0 / L if fam.needs_s else 0.0
            h = LOW_C_H if fam is OdeFamily.LOW_C else max_step(fam, L, s)
            col.check_flow(integrate(fam, pb, s, FLOW_HORIZON, h), name)
    return col.result


SUITES: dict[str, Callable[..., SuiteResult]] = {
    "strongly-convex": strongly_convex,
    "convex": convex,
    "low-resolution": low_resolution,
    "gradient-descent": gradient_descent,
    "continuous": continuous,
}


def run_suite(name: str, inject_fault: bool = False) -> SuiteResult:
    try:
        fn = SUITES[name]
    except KeyError:
        raise KeyError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}") from None
    return fn(inject_fault=inject_fault)
