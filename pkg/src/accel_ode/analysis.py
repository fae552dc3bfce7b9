"""Closed-form rate bounds, bound checks, rate fits and the quadratic linear-map oracle.

Bound envelopes take the index (k for iterates, t for continuous samples)
and a :class:`BoundContext` holding the problem constants.  Entries with a
``fixed_step`` apply only at that step size; the others apply to every step
size satisfying ``condition``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .integrators import SchemeRule, SchemeSpec, Trace, _coefficients, effective_rule
from .objectives import Objective, ProblemInstance
from .phase_dynamics import OdeFamily

S, E, I, C = SchemeRule.SYMPLECTIC, SchemeRule.EXPLICIT, SchemeRule.IMPLICIT, SchemeRule.CLASSICAL

BOUND_RTOL = 1e-9
FLOW_SLACK = 1e-6  # absolute slack on continuous traces (integrator error budget)
FIXED_STEP_RTOL = 1e-12
UNDERFLOW = 1e-280
TINY = np.finfo(float).tiny


class Quantity(str, Enum):
    F_GAP = "F_GAP"
    DIST_SQ = "DIST_SQ"
    MIN_GRAD_SQ = "MIN_GRAD_SQ"


@dataclass(frozen=True)
class BoundContext:
    mu: float
    L: float
    D: float  # ||x0 - x*||^2
    s: float
    F0: float  # f(x0) - f(x*)
    t0: float = 0.0


@dataclass(frozen=True)
class RateBound:
    id: str
    summary: str
    family: OdeFamily
    rules: frozenset  # empty for continuous bounds
    continuous: bool
    strongly_convex: bool
    quantity: Quantity
    envelope: Callable  # (k or t array, BoundContext) -> array
    condition: Callable[[float, float, float], bool] = lambda mu, L, s: True
    condition_text: str = "any s > 0"
    fixed_step: Optional[Callable[[float, float], float]] = None
    fixed_step_text: str = ""

    def applies_to(self, family, rule=None) -> bool:
        if OdeFamily(family) is not self.family:
            return False
        if self.continuous:
            return rule is None
        return rule is not None and SchemeRule(rule) in self.rules

    def evaluate(self, index, ctx: BoundContext):
        index = np.asarray(index, dtype=float)
        if ctx.D == 0:
            # x0 = x*: every envelope is proportional to D (avoids 0/0 in the F0 forms)
            return np.zeros_like(index)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return self.envelope(index, ctx)


def _le(a, b):
    return a <= b * (1 + 1e-12)


def _m(c: BoundContext):
    return np.sqrt(c.mu * c.s)


# general-step constant factors, kept in their displayed form

def _sc_hr_symplectic_factor(c):
    m, sL = _m(c), c.s * c.L
    return (sL * (2 + (1 + 3 * m) ** 2) / (1 + m) ** 2 + 2 * c.mu / c.L + (1 + m) / 2
            - sL * (1 + m) ** 2 / (2 * (1 + 2 * m)))


def _sc_hr_factor(c):
    m, sL = _m(c), c.s * c.L
    return (3 - 2 * m + m * m) / (2 + 4 * m + 2 * m * m) * sL + 2 * c.mu / c.L + (1 + m) / 2


def _hb_hr_symplectic_factor(c):
    m, sL = _m(c), c.s * c.L
    return (3 + 8 * m + 8 * m * m) * sL / (1 + m) ** 2 + 2 * c.mu / c.L + (1 + m) / 2


def _hb_hr_factor(c):
    m, sL = _m(c), c.s * c.L
    return 3 * sL / (1 + m) ** 2 + 2 * c.mu / c.L + (1 + m) / 2


def _decay(k, base):
    return base ** (-k)


def bound_catalog() -> list[RateBound]:
    """Every closed-form rate bound, discrete ones first."""
    F = frozenset
    gap, dist, mgrad = Quantity.F_GAP, Quantity.DIST_SQ, Quantity.MIN_GRAD_SQ
    sqk = lambda c: np.sqrt(c.mu / c.L)  # noqa: E731
    B = RateBound
    gd_rules = F({E, C})
    out = [
        # gradient descent
        B("gd.distance", "GD squared distance, geometric", OdeFamily.GRAD_FLOW, gd_rules, False, True, dist,
          lambda k, c: c.D * (1 - 2 * c.mu * c.L * c.s / (c.mu + c.L)) ** k,
          lambda mu, L, s: _le(s, 2 / (mu + L)), "s <= 2/(mu+L)"),
        B("gd.fgap", "GD f-gap, O(1/k) with initial gap", OdeFamily.GRAD_FLOW, gd_rules, False, False, gap,
          lambda k, c: 2 * c.F0 * c.D / (2 * c.D + k * c.s * (2 - c.L * c.s) * c.F0),
          lambda mu, L, s: s < 2 / L, "s < 2/L"),
        B("gd.fgap.unit_step", "GD f-gap at s = 1/L", OdeFamily.GRAD_FLOW, gd_rules, False, False, gap,
          lambda k, c: 2 * c.L * c.D / (k + 4), fixed_step=lambda mu, L: 1 / L, fixed_step_text="s = 1/L"),
        B("gd.lyapunov.fgap", "GD f-gap from the weighted functional", OdeFamily.GRAD_FLOW, gd_rules, False, False,
          gap, lambda k, c: c.D / (2 * k * c.s), lambda mu, L, s: _le(s, 1 / L), "s <= 1/L"),
        B("gd.lyapunov.min_grad", "GD smallest squared gradient so far", OdeFamily.GRAD_FLOW, gd_rules, False, False,
          mgrad, lambda k, c: 2 * c.D / (c.s ** 2 * (k + 1) * (k + 2)), lambda mu, L, s: _le(s, 1 / L), "s <= 1/L"),
        # implicit gradient descent
        B("igd.distance", "implicit GD squared distance", OdeFamily.GRAD_FLOW, F({I}), False, True, dist,
          lambda k, c: c.D / (1 + c.mu * c.s) ** (2 * k)),
        B("igd.fgap", "implicit GD f-gap with initial gap", OdeFamily.GRAD_FLOW, F({I}), False, False, gap,
          lambda k, c: ((1 + c.L * c.s) ** 2 * c.F0 * c.D) / ((1 + c.L * c.s) ** 2 * c.D + k * c.s * c.F0)),
        B("igd.fgap.theta", "implicit GD f-gap in terms of theta = sL", OdeFamily.GRAD_FLOW, F({I}), False, False, gap,
          lambda k, c: c.L * c.D / (2 + k / (c.s * c.L + 1 / (c.s * c.L) + 2))),
        B("igd.lyapunov.fgap", "implicit GD f-gap from the weighted functional", OdeFamily.GRAD_FLOW, F({I}), False,
          False, gap, lambda k, c: c.D / (2 * k * c.s)),
        B("igd.lyapunov.min_grad", "implicit GD smallest squared gradient so far", OdeFamily.GRAD_FLOW, F({I}),
          False, False, mgrad, lambda k, c: 2 * c.D / (c.s ** 2 * (k + 1) * (k + 2))),
        # NAG-SC ODE
        B("sc_hr.symplectic.fixed", "NAG-SC ODE symplectic at s = 4/(9L)", OdeFamily.SC_HR, F({S}), False, True, gap,
          lambda k, c: 5 * c.L * c.D * _decay(k, 1 + sqk(c) / 9),
          fixed_step=lambda mu, L: 4 / (9 * L), fixed_step_text="s = 4/(9L)"),
        B("sc_hr.explicit.fixed", "NAG-SC ODE explicit at s = mu/(100L^2)", OdeFamily.SC_HR, F({E}), False, True, gap,
          lambda k, c: 3 * c.L * c.D * (1 - c.mu / (80 * c.L)) ** k,
          fixed_step=lambda mu, L: mu / (100 * L * L), fixed_step_text="s = mu/(100L^2)"),
        B("sc_hr.implicit.fixed", "NAG-SC ODE implicit at s = 1/L (constant carries no L)", OdeFamily.SC_HR, F({I}),
          False, True, gap, lambda k, c: 13 * c.D / 4 * _decay(k, 1 + sqk(c) / 4),
          fixed_step=lambda mu, L: 1 / L, fixed_step_text="s = 1/L"),
        B("sc_hr.symplectic.general", "NAG-SC ODE symplectic, general s", OdeFamily.SC_HR, F({S}), False, True, gap,
          lambda k, c: _sc_hr_symplectic_factor(c) * c.L * c.D * _decay(k, 1 + _m(c) / 6),
          lambda mu, L, s: _le(s, 4 / (9 * L)), "s <= 4/(9L)"),
        B("sc_hr.explicit.general", "NAG-SC ODE explicit, general s", OdeFamily.SC_HR, F({E}), False, True, gap,
          lambda k, c: _sc_hr_factor(c) * c.L * c.D * (1 - _m(c) / 8) ** k,
          lambda mu, L, s: _le(s, mu / (100 * L * L)), "s <= mu/(100L^2)"),
        B("sc_hr.implicit.general", "NAG-SC ODE implicit, general s", OdeFamily.SC_HR, F({I}), False, True, gap,
          lambda k, c: _sc_hr_factor(c) * c.L * c.D * _decay(k, 1 + _m(c) / 4),
          lambda mu, L, s: _le(s, 1 / L), "s <= 1/L"),
        B("nag_sc.fixed", "NAG-SC method at s = 1/(4L)", OdeFamily.SC_HR, F({C}), False, True, gap,
          lambda k, c: 5 * c.L * c.D * _decay(k, 1 + sqk(c) / 12),
          fixed_step=lambda mu, L: 1 / (4 * L), fixed_step_text="s = 1/(4L)"),
        # heavy-ball
        B("heavy_ball.fixed", "heavy-ball method at s = mu/(16L^2)", OdeFamily.HB_HR, F({C}), False, True, gap,
          lambda k, c: 5 * c.L * c.D * _decay(k, 1 + c.mu / (16 * c.L)),
          fixed_step=lambda mu, L: mu / (16 * L * L), fixed_step_text="s = mu/(16L^2)"),
        B("hb_hr.symplectic.fixed", "heavy-ball ODE symplectic at s = mu/(16L^2)", OdeFamily.HB_HR, F({S}), False,
          True, gap, lambda k, c: 3 * c.L * c.D * _decay(k, 1 + c.mu / (16 * c.L)),
          fixed_step=lambda mu, L: mu / (16 * L * L), fixed_step_text="s = mu/(16L^2)"),
        B("hb_hr.explicit.fixed", "heavy-ball ODE explicit at s = mu/(36L^2)", OdeFamily.HB_HR, F({E}), False, True,
          gap, lambda k, c: 3 * c.L * c.D * (1 - c.mu / (48 * c.L)) ** k,
          fixed_step=lambda mu, L: mu / (36 * L * L), fixed_step_text="s = mu/(36L^2)"),
        B("hb_hr.implicit.fixed", "heavy-ball ODE implicit at s = 1/L", OdeFamily.HB_HR, F({I}), False, True, gap,
          lambda k, c: 15 * c.L * c.D / 4 * _decay(k, 1 + sqk(c) / 4),
          fixed_step=lambda mu, L: 1 / L, fixed_step_text="s = 1/L"),
        B("hb_hr.symplectic.general", "heavy-ball ODE symplectic, general s", OdeFamily.HB_HR, F({S}), False, True,
          gap, lambda k, c: _hb_hr_symplectic_factor(c) * c.L * c.D * _decay(k, 1 + _m(c) / 4),
          lambda mu, L, s: _le(s, mu / (16 * L * L)), "s <= mu/(16L^2)"),
        B("hb_hr.explicit.general", "heavy-ball ODE explicit, general s", OdeFamily.HB_HR, F({E}), False, True, gap,
          lambda k, c: _hb_hr_factor(c) * c.L * c.D * (1 - _m(c) / 8) ** k,
          lambda mu, L, s: _le(s, mu / (36 * L * L)), "s <= mu/(36L^2)"),
        B("hb_hr.implicit.general", "heavy-ball ODE implicit, general s", OdeFamily.HB_HR, F({I}), False, True, gap,
          lambda k, c: _hb_hr_factor(c) * c.L * c.D * _decay(k, 1 + _m(c) / 4),
          lambda mu, L, s: _le(s, 1 / L), "s <= 1/L"),
        # modified NAG-C ODE
        B("c_hr_mod.symplectic.fgap", "NAG-C (symplectic, modified ODE) f-gap", OdeFamily.C_HR_MOD, F({S, C}), False,
          False, gap, lambda k, c: 119 * c.D / (c.s * (k + 1) ** 2),
          lambda mu, L, s: _le(s, 1 / (3 * L)), "s <= 1/(3L)"),
        B("c_hr_mod.symplectic.min_grad", "NAG-C (symplectic, modified ODE) smallest squared gradient",
          OdeFamily.C_HR_MOD, F({S, C}), False, False, mgrad, lambda k, c: 8568 * c.D / (c.s ** 2 * (k + 1) ** 3),
          lambda mu, L, s: _le(s, 1 / (3 * L)), "s <= 1/(3L)"),
        B("c_hr_mod.implicit.fgap", "modified NAG-C ODE implicit f-gap", OdeFamily.C_HR_MOD, F({I}), False, False, gap,
          lambda k, c: (3 * c.s * c.L + 2) * c.D / (c.s * (k + 2) * (k + 3)),
          lambda mu, L, s: _le(s, 1 / L), "s <= 1/L"),
        B("c_hr_mod.implicit.min_grad", "modified NAG-C ODE implicit smallest squared gradient", OdeFamily.C_HR_MOD,
          F({I}), False, False, mgrad, lambda k, c: (3 * c.s * c.L + 2) * c.D / (c.s ** 2 * (k + 1) ** 3),
          lambda mu, L, s: _le(s, 1 / L), "s <= 1/L"),
        # low-resolution strongly convex ODE
        B("low_sc.symplectic.general", "low-resolution ODE symplectic, general s", OdeFamily.LOW_SC, F({S}), False,
          True, gap, lambda k, c: 1.5 * c.L * c.D * _decay(k, 1 + _m(c) / 4),
          lambda mu, L, s: _le(s, mu / (16 * L * L)), "s <= mu/(16L^2)"),
        B("low_sc.explicit.general", "low-resolution ODE explicit, general s", OdeFamily.LOW_SC, F({E}), False, True,
          gap, lambda k, c: 1.5 * c.L * c.D * (1 - _m(c) / 8) ** k,
          lambda mu, L, s: _le(s, mu / (25 * L * L)), "s <= mu/(25L^2)"),
        B("low_sc.implicit.general", "low-resolution ODE implicit, general s", OdeFamily.LOW_SC, F({I}), False, True,
          gap, lambda k, c: 1.5 * c.L * c.D * _decay(k, 1 + _m(c) / 4),
          lambda mu, L, s: _le(s, 1 / L), "s <= 1/L"),
        B("low_sc.symplectic.fixed", "low-resolution ODE symplectic at s = mu/(16L^2)", OdeFamily.LOW_SC, F({S}),
          False, True, gap, lambda k, c: 1.5 * c.L * c.D * _decay(k, 1 + c.mu / (16 * c.L)),
          fixed_step=lambda mu, L: mu / (16 * L * L), fixed_step_text="s = mu/(16L^2)"),
        B("low_sc.explicit.fixed", "low-resolution ODE explicit at s = mu/(25L^2)", OdeFamily.LOW_SC, F({E}), False,
          True, gap, lambda k, c: 1.5 * c.L * c.D * (1 - c.mu / (40 * c.L)) ** k,
          fixed_step=lambda mu, L: mu / (25 * L * L), fixed_step_text="s = mu/(25L^2)"),
        B("low_sc.implicit.fixed", "low-resolution ODE implicit at s = 1/L", OdeFamily.LOW_SC, F({I}), False, True,
          gap, lambda k, c: 1.5 * c.L * c.D * _decay(k, 1 + sqk(c) / 4),
          fixed_step=lambda mu, L: 1 / L, fixed_step_text="s = 1/L"),
        # continuous trajectories (index is t)
        B("flow.grad.distance", "gradient flow squared distance", OdeFamily.GRAD_FLOW, F(), True, True, dist,
          lambda t, c: c.D * np.exp(-2 * c.mu * t)),
        B("flow.grad.fgap", "gradient flow f-gap with initial gap", OdeFamily.GRAD_FLOW, F(), True, False, gap,
          lambda t, c: c.F0 * c.D / (t * c.F0 + c.D)),
        B("flow.grad.lyapunov.fgap", "gradient flow f-gap from the weighted functional", OdeFamily.GRAD_FLOW, F(),
          True, False, gap, lambda t, c: c.D / (2 * t)),
        B("flow.grad.lyapunov.min_grad", "gradient flow smallest squared gradient so far", OdeFamily.GRAD_FLOW, F(),
          True, False, mgrad, lambda t, c: c.D / t ** 2),
        B("flow.sc_hr.fgap", "NAG-SC ODE trajectory f-gap", OdeFamily.SC_HR, F(), True, True, gap,
          lambda t, c: 2 * c.D / c.s * np.exp(-np.sqrt(c.mu) * t / 4), lambda mu, L, s: _le(s, 1 / L), "s <= 1/L"),
        B("flow.hb_hr.fgap", "heavy-ball ODE trajectory f-gap", OdeFamily.HB_HR, F(), True, True, gap,
          lambda t, c: 7 * c.D / (2 * c.s) * np.exp(-np.sqrt(c.mu) * t / 4),
          lambda mu, L, s: _le(s, 1 / L), "s <= 1/L"),
        B("flow.c_hr.fgap", "NAG-C ODE trajectory f-gap", OdeFamily.C_HR, F(), True, False, gap,
          lambda t, c: (4 + 3 * c.s * c.L) * c.D / (t * (2 * t + np.sqrt(c.s))),
          lambda mu, L, s: _le(s, 1 / L), "s <= 1/L"),
        B("flow.c_hr.min_grad", "NAG-C ODE trajectory smallest squared gradient", OdeFamily.C_HR, F(), True, False,
          mgrad, lambda t, c: (12 + 9 * c.s * c.L) * c.D / (2 * np.sqrt(c.s) * (t ** 3 - c.t0 ** 3)),
          lambda mu, L, s: _le(s, 1 / L), "s <= 1/L"),
        B("flow.low_sc.fgap", "low-resolution strongly convex ODE trajectory f-gap", OdeFamily.LOW_SC, F(), True,
          True, gap, lambda t, c: 1.5 * c.L * c.D * np.exp(-np.sqrt(c.mu) * t / 4)),
        B("flow.low_c.fgap", "low-resolution NAG-C ODE trajectory f-gap", OdeFamily.LOW_C, F(), True, False, gap,
          lambda t, c: 2 * c.D / t ** 2),
        B("flow.low_c.min_grad", "low-resolution NAG-C ODE smallest squared gradient", OdeFamily.LOW_C, F(), True,
          False, mgrad, lambda t, c: 4 * c.L * c.D / t ** 2),
    ]
    return out


def get_bound(bound_id: str) -> RateBound:
    for b in bound_catalog():
        if b.id == bound_id:
            return b
    raise KeyError(f"unknown rate bound {bound_id!r}")


def bounds_for(family, rule=None) -> list[RateBound]:
    return [b for b in bound_catalog() if b.applies_to(family, rule)]


# step sizes at which the fixed-step results are stated, per (family, rule)
_THEOREM_STEPS = {
    (OdeFamily.SC_HR, S): lambda mu, L: 4 / (9 * L),
    (OdeFamily.SC_HR, E): lambda mu, L: mu / (100 * L * L),
    (OdeFamily.SC_HR, I): lambda mu, L: 1 / L,
    (OdeFamily.SC_HR, C): lambda mu, L: 1 / (4 * L),
    (OdeFamily.HB_HR, S): lambda mu, L: mu / (16 * L * L),
    (OdeFamily.HB_HR, E): lambda mu, L: mu / (36 * L * L),
    (OdeFamily.HB_HR, I): lambda mu, L: 1 / L,
    (OdeFamily.HB_HR, C): lambda mu, L: mu / (16 * L * L),
    (OdeFamily.LOW_SC, S): lambda mu, L: mu / (16 * L * L),
    (OdeFamily.LOW_SC, E): lambda mu, L: mu / (25 * L * L),
    (OdeFamily.LOW_SC, I): lambda mu, L: 1 / L,
    (OdeFamily.C_HR_MOD, S): lambda mu, L: 1 / (3 * L),
    (OdeFamily.C_HR_MOD, C): lambda mu, L: 1 / (3 * L),
    (OdeFamily.C_HR_MOD, I): lambda mu, L: 1 / L,
    (OdeFamily.GRAD_FLOW, E): lambda mu, L: 1 / L,
    (OdeFamily.GRAD_FLOW, C): lambda mu, L: 1 / L,
    (OdeFamily.GRAD_FLOW, I): lambda mu, L: 1 / L,
}


def theorem_step_size(family, rule, mu: float, L: float) -> float:
    """Step size at which a convergence guarantee is stated for (family, rule)."""
    key = (OdeFamily(family), SchemeRule(rule))
    if key not in _THEOREM_STEPS:
        raise KeyError(f"no convergence guarantee is stated for {key[0].value}/{key[1].value}")
    s = _THEOREM_STEPS[key](mu, L)
    if not s > 0:
        raise ValueError(f"theorem step for {key[0].value}/{key[1].value} needs mu > 0")
    return float(s)


# -- checking ------------------------------------------------------------------


@dataclass
class BoundReport:
    bound_id: str
    status: str  # pass | fail | inapplicable
    checked: int = 0
    max_ratio: float = 0.0
    first_violation: Optional[float] = None  # k, or t for continuous traces
    first_violation_ratio: Optional[float] = None
    reason: str = ""

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def as_dict(self) -> dict:
        return {
            "id": self.bound_id, "status": self.status, "checked": self.checked, "max_ratio": self.max_ratio,
            "first_violation": self.first_violation, "first_violation_ratio": self.first_violation_ratio,
            "reason": self.reason,
        }


def _is_flow(trace) -> bool:
    return not isinstance(trace, Trace)


def _origin(trace) -> float:
    """Nominal time origin of a continuous trace (0 for iterates)."""
    if _is_flow(trace):
        return float(trace.t[0]) - trace.t_offset
    return 0.0


def context_for(problem: ProblemInstance, s: float, t0: float = 0.0) -> BoundContext:
    obj = problem.objective
    return BoundContext(mu=obj.mu, L=obj.lipschitz, D=problem.dist_sq, s=float(s),
                        F0=obj.gap(problem.x0), t0=float(t0))


def applicability(bound: RateBound, trace, problem: ProblemInstance | None = None) -> str:
    """Empty string when ``bound`` covers ``trace``, otherwise the reason it does not."""
    problem = problem or trace.problem
    obj = problem.objective
    if _is_flow(trace):
        if not bound.applies_to(trace.family):
            return f"bound is not for {trace.family.value} trajectories"
        s = trace.s
    else:
        if not bound.applies_to(trace.spec.family, trace.spec.rule):
            return f"bound does not cover {trace.spec.label}"
        s = trace.spec.step_size
    if bound.strongly_convex and obj.mu <= 0:
        return "needs mu > 0"
    if bound.fixed_step is not None:
        target = bound.fixed_step(obj.mu, obj.lipschitz)
        if not np.isclose(s, target, rtol=FIXED_STEP_RTOL, atol=0.0):
            return f"stated only for {bound.fixed_step_text} (= {target:.6g}), run uses s = {s:.6g}"
    if not bound.condition(obj.mu, obj.lipschitz, s):
        return f"step-size condition {bound.condition_text} fails"
    if bound.quantity is Quantity.MIN_GRAD_SQ and not _is_flow(trace) and not trace.dense:
        return "running minimum needs a dense trace (record_every=1)"
    return ""


def quantity_series(bound: RateBound, trace, problem: ProblemInstance) -> np.ndarray:
    obj = problem.objective
    if bound.quantity is Quantity.F_GAP:
        return np.asarray(trace.f_gap, dtype=float)
    if bound.quantity is Quantity.DIST_SQ:
        d = np.asarray(trace.x) - obj.minimizer
        return np.einsum("ij,ij->i", d, d)
    return np.minimum.accumulate(np.asarray(trace.grad_norm_sq, dtype=float))


def check_bound(bound: RateBound, trace, problem: ProblemInstance | None = None,
                slack_abs: float | None = None) -> BoundReport:
    """Compare the bounded quantity with the envelope at every recorded index.

    Passes iff quantity <= envelope * (1 + 1e-9) + slack_abs everywhere the
    envelope is finite.  ``slack_abs`` defaults to 0 for iterates and 1e-6
    for continuous trajectories.
    """
    problem = problem or trace.problem
    reason = applicability(bound, trace, problem)
    if reason:
        return BoundReport(bound.id, "inapplicable", reason=reason)
    flow = _is_flow(trace)
    if slack_abs is None:
        slack_abs = FLOW_SLACK if flow else 0.0
    s = trace.s if flow else trace.spec.step_size
    index = np.asarray(trace.t if flow else trace.k, dtype=float)
    ctx = context_for(problem, s, t0=_origin(trace))
    env = np.asarray(bound.evaluate(index, ctx), dtype=float)
    env = np.broadcast_to(env, index.shape)
    q = quantity_series(bound, trace, problem)
    # below the smallest normal double a 1e-9 relative comparison is meaningless
    usable = np.isfinite(env) & ((env >= TINY) | (q <= env))
    if not np.any(usable):
        return BoundReport(bound.id, "inapplicable", reason="envelope is not finite at any recorded index")
    allowed = env * (1 + BOUND_RTOL) + slack_abs
    bad = usable & ~(q <= allowed)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(env > 0, q / env, np.where(q > 0, np.inf, 0.0))
    ratio = np.where(np.isnan(q), np.inf, ratio)
    max_ratio = float(np.max(ratio[usable]))
    rep = BoundReport(bound.id, "pass", checked=int(np.count_nonzero(usable)), max_ratio=max_ratio)
    if np.any(bad):
        i = int(np.argmax(bad))
        rep.status = "fail"
        rep.first_violation = float(index[i]) if flow else int(index[i])
        rep.first_violation_ratio = float(ratio[i])
    return rep


def check_all_bounds(trace, problem: ProblemInstance | None = None) -> list[BoundReport]:
    """Reports for every catalog bound that covers the trace's family (and rule)."""
    problem = problem or trace.problem
    if _is_flow(trace):
        bounds = bounds_for(trace.family)
    else:
        bounds = bounds_for(trace.spec.family, trace.spec.rule)
    return [check_bound(b, trace, problem) for b in bounds]


def envelope_series(bound: RateBound, trace, problem: ProblemInstance | None = None) -> np.ndarray:
    """Envelope values at the trace's indices (NaN where the bound does not apply)."""
    problem = problem or trace.problem
    flow = _is_flow(trace)
    index = np.asarray(trace.t if flow else trace.k, dtype=float)
    if applicability(bound, trace, problem):
        return np.full(index.shape, np.nan)
    s = trace.s if flow else trace.spec.step_size
    ctx = context_for(problem, s, t0=_origin(trace))
    env = np.broadcast_to(np.asarray(bound.evaluate(index, ctx), dtype=float), index.shape)
    return np.where(np.isfinite(env), env, np.nan)


# -- empirical rates -----------------------------------------------------------


@dataclass(frozen=True)
class RateFit:
    rho_hat: float
    window: tuple  # (k_lo, k_hi)
    residual: float
    degenerate: bool = False
    reason: str = ""


def rounding_floor(problem: ProblemInstance, margin: float = 1e6) -> float:
    """F-gap level below which rounding of x near x* dominates: margin * L/2 * (eps ||x*||)^2."""
    obj = problem.objective
    xs = float(np.linalg.norm(obj.minimizer))
    return margin * 0.5 * obj.lipschitz * (np.finfo(float).eps * xs) ** 2


def fit_rate(trace: Trace, tail_fraction: float = 0.5, floor: float = UNDERFLOW) -> RateFit:
    """Least-squares slope of log f_gap against k over the tail of the trace.

    The usable part ends at the first f_gap at or below ``floor`` (raised to
    the rounding floor of the instance when that is higher); the fit
    uses its last ``tail_fraction``.  rho_hat = exp(slope) is the per-step
    contraction factor of the f-gap.
    """
    if not 0 < tail_fraction <= 1:
        raise ValueError("tail_fraction must lie in (0, 1]")
    k = np.asarray(trace.k, dtype=float)
    g = np.asarray(trace.f_gap, dtype=float)
    floor = max(floor, rounding_floor(trace.problem))
    low = np.flatnonzero(~(g > floor))
    end = int(low[0]) if low.size else len(g)
    if end < 2:
        return RateFit(float("nan"), (int(k[0]), int(k[0])), float("nan"), True,
                       "f_gap vanishes or underflows from the start")
    span = k[end - 1] - k[0]
    start_k = k[end - 1] - tail_fraction * span
    sel = np.flatnonzero(k[:end] >= start_k)
    if sel.size < 2:
        sel = np.arange(end - 2, end)
    kk, yy = k[sel], np.log(g[sel])
    A = np.column_stack([kk, np.ones_like(kk)])
    coef, *_ = np.linalg.lstsq(A, yy, rcond=None)
    resid = float(np.sum((A @ coef - yy) ** 2))
    reason = "" if not low.size else f"window truncated at k={int(k[end - 1])} (f_gap <= {floor:g})"
    return RateFit(float(np.exp(coef[0])), (int(kk[0]), int(kk[-1])), resid, False, reason)


# -- quadratic linear-map oracle ------------------------------------------------


def iteration_matrix(spec: SchemeSpec, eigenvalue: float, mu: float, k: int | None = None):
    """One-step matrix of ``spec`` on the Hessian eigenmode ``eigenvalue``.

    Acts on (x - x*, v) for second-order schemes and on x - x* (1x1) for
    gradient descent.  Convex families have k-dependent coefficients; with
    k=None the k -> infinity limit (damping 0, gradient weight 1) is used.
    Returns (matrix, asymptotic flag).
    """
    lam = float(eigenvalue)
    s = spec.step_size
    fam = spec.family
    if fam is OdeFamily.GRAD_FLOW:
        m = 1.0 / (1.0 + s * lam) if spec.rule is I else 1.0 - s * lam
        return np.array([[m]]), False
    r = np.sqrt(s)
    asymptotic = fam.time_dependent and k is None
    if asymptotic:
        rule = SchemeRule.SYMPLECTIC if (fam is OdeFamily.C_HR_MOD and spec.rule is C) else spec.rule
        a, c = 0.0, 1.0
        corr = fam.has_hessian_term
    else:
        kk = 0 if k is None else int(k)
        rule = effective_rule(spec, kk)
        a, c, corr = _coefficients(fam, rule, mu, s, kk)
    h = 1.0 if corr else 0.0
    if rule is E:
        P = np.array([[1.0, 0.0], [h * r * lam, 1.0]])
        Q = np.array([[1.0, r], [(h - c) * r * lam, 1.0 - a]])
    elif rule is I:
        P = np.array([[1.0, -r], [r * (c + h) * lam, 1.0 + a]])
        Q = np.array([[1.0, 0.0], [h * r * lam, 1.0]])
    else:  # symplectic and classical
        P = np.array([[1.0, 0.0], [r * lam * (c + h), 1.0 + a]])
        Q = np.array([[1.0, r], [h * r * lam, 1.0]])
    return np.linalg.solve(P, Q), asymptotic


def dominant_eigenvalue(spec: SchemeSpec, eigenvalue: float, mu: float, k: int | None = None) -> complex:
    M, _ = iteration_matrix(spec, eigenvalue, mu, k)
    ev = np.linalg.eigvals(M)
    return complex(ev[int(np.argmax(np.abs(ev)))])


def spectral_radius(spec: SchemeSpec, eigenvalue: float, mu: float, s: float | None = None,
                    lipschitz: float | None = None, k: int | None = None) -> float:
    """Spectral radius of the one-step matrix on one eigenmode.

    ``s`` overrides the scheme's step size.  An eigenvalue outside [mu, L]
    only triggers a warning.
    """
    if s is not None:
        spec = SchemeSpec(spec.family, spec.rule, s)
    if eigenvalue < mu or (lipschitz is not None and eigenvalue > lipschitz):
        warnings.warn(f"eigenvalue {eigenvalue} lies outside [mu, L]", stacklevel=2)
    M, _ = iteration_matrix(spec, eigenvalue, mu, k)
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def max_spectral_radius(spec: SchemeSpec, obj: Objective, k: int | None = None) -> tuple[float, bool]:
    """Largest per-mode radius over the quadratic's Hessian spectrum, and whether it is a real eigenvalue."""
    if not obj.is_quadratic:
        raise ValueError("the linear-map oracle needs a quadratic objective")
    best, real = -1.0, True
    for lam in np.linalg.eigvalsh(obj.matrix):
        z = dominant_eigenvalue(spec, lam, obj.mu, k)
        if abs(z) > best:
            best, real = abs(z), abs(z.imag) <= 1e-12 * max(1.0, abs(z))
    return float(best), bool(real)


def oracle_iterates(spec: SchemeSpec, problem: ProblemInstance, iterations: int) -> np.ndarray:
    """x_k, k = 0..iterations, from the per-mode matrices (quadratics only)."""
    obj = problem.objective
    if not obj.is_quadratic:
        raise ValueError("the linear-map oracle needs a quadratic objective")
    from .phase_dynamics import initial_state

    w, U = np.linalg.eigh(obj.matrix)
    state, _ = initial_state(spec.family, obj, problem.x0, spec.step_size)
    y = U.T @ (state.x - obj.minimizer)
    u = U.T @ state.v
    out = [state.x.copy()]
    first_order = spec.family is OdeFamily.GRAD_FLOW
    for k in range(iterations):
        for i, lam in enumerate(w):
            M, _ = iteration_matrix(spec, lam, obj.mu, k)
            if first_order:
                y[i] = M[0, 0] * y[i]
            else:
                y[i], u[i] = M[0, 0] * y[i] + M[0, 1] * u[i], M[1, 0] * y[i] + M[1, 1] * u[i]
        out.append(obj.minimizer + U @ y)
    return np.asarray(out)
