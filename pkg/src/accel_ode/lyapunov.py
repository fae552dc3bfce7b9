"""Discrete and continuous Lyapunov functionals and their decrease checks.

Each entry states which scheme it certifies, the step-size condition under
which the decrease inequality was proved, and the inequality itself:

* DIFFERENCE_NEXT   E(k+1) - E(k) <= -c E(k+1)
* DIFFERENCE_CURR   E(k+1) - E(k) <= -c E(k)
* MONOTONE          E(k+1) - E(k) <= -surplus(k)   (surplus 0 unless declared)
* EXPONENTIAL       E(t') <= E(t) exp(-c (t' - t))  (continuous functionals)

Entries with ``proved=False`` are trial functionals for which the decrease
argument breaks down.  They are evaluated for diagnostics only and never
certify a run.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .integrators import SchemeRule, Trace
from .objectives import Objective
from .phase_dynamics import OdeFamily

S, E, I, C = SchemeRule.SYMPLECTIC, SchemeRule.EXPLICIT, SchemeRule.IMPLICIT, SchemeRule.CLASSICAL


class Contraction(str, Enum):
    DIFFERENCE_NEXT = "DIFFERENCE_NEXT"
    DIFFERENCE_CURR = "DIFFERENCE_CURR"
    MONOTONE = "MONOTONE"
    EXPONENTIAL = "EXPONENTIAL"


class MissingIndexError(KeyError):
    pass


@dataclass(frozen=True)
class Point:
    """Everything a functional may need at one index or time."""

    k: int
    t: float
    x: np.ndarray
    v: np.ndarray
    g: np.ndarray
    gap: float
    d: np.ndarray  # x - x*


@dataclass(frozen=True)
class LyapunovSpec:
    id: str
    summary: str
    family: OdeFamily
    rules: frozenset
    continuous: bool
    strongly_convex: bool
    condition: Callable[[float, float, float], bool]
    condition_text: str
    formula: Callable  # (P, P_next, mu, s) -> float
    contraction: Contraction
    rate: Optional[Callable[[float, float, float], float]] = None
    surplus: Optional[Callable] = None  # (P, P_next, s) -> nonnegative required extra decrease
    window: int = 0  # 1 when E(k) reads x_{k+1}
    proved: bool = True
    k_min: int = 0

    def applies_to(self, family, rule=None) -> bool:
        if OdeFamily(family) is not self.family:
            return False
        if self.continuous:
            return rule is None
        return rule is not None and SchemeRule(rule) in self.rules


def _sq(a) -> float:
    return float(a @ a)


def _le(a, b):
    return a <= b * (1 + 1e-12)


# -- strongly convex, high and low resolution ----------------------------------


def _sc_hr_symplectic(P, Q, mu, s):
    m = np.sqrt(mu * s)
    w = 2 * np.sqrt(mu) * (Q.x - P.x + P.d) + P.v + np.sqrt(s) * P.g
    return (0.25 * _sq(P.v) + 0.25 * _sq(w) + (1 + m) * P.gap
            - ((1 + m) ** 2 / (1 + 2 * m)) * (s / 2) * _sq(P.g))


def _sc_hr_current(P, Q, mu, s):
    m = np.sqrt(mu * s)
    w = 2 * np.sqrt(mu) * P.d + P.v + np.sqrt(s) * P.g
    return 0.25 * _sq(P.v) + (1 + m) * P.gap + 0.25 * _sq(w)


def _momentum_functional(weighted: bool, next_x: bool):
    def formula(P, Q, mu, s):
        d = (Q.x - P.x + P.d) if next_x else P.d
        fac = 1 + np.sqrt(mu * s) if weighted else 1.0
        return 0.25 * _sq(P.v) + 0.25 * _sq(2 * np.sqrt(mu) * d + P.v) + fac * P.gap
    return formula


# -- convex families ----------------------------------------------------------


def _nesterov_convex(coef: Callable[[int], float], shift: int, next_x: bool, grad_in_velocity: bool):
    """coef(k) s gap + 1/2 || 2 (x - x*) + (k + shift) sqrt(s) (v + sqrt(s) g) ||^2."""

    def formula(P, Q, mu, s):
        r = np.sqrt(s)
        d = (Q.x - P.x + P.d) if next_x else P.d
        vel = P.v + r * P.g if grad_in_velocity else P.v
        return coef(P.k) * s * P.gap + 0.5 * _sq(2 * d + (P.k + shift) * r * vel)
    return formula


# -- gradient descent ---------------------------------------------------------


def _distance(P, Q, mu, s):
    return _sq(P.d)


def _gap_only(P, Q, mu, s):
    return P.gap


def _weighted_gap(P, Q, mu, s):
    return P.k * s * P.gap + 0.5 * _sq(P.d)


# -- continuous ---------------------------------------------------------------


def _flow_weighted(P, Q, mu, s):
    return P.t * P.gap + 0.5 * _sq(P.d)


def _flow_low_sc(P, Q, mu, s):
    return 0.25 * _sq(P.v) + 0.25 * _sq(2 * np.sqrt(mu) * P.d + P.v) + P.gap


def _flow_low_c(P, Q, mu, s):
    return P.t ** 2 * P.gap + 0.5 * _sq(2 * P.d + P.t * P.v)


def _any(mu, L, s):
    return True


def catalog() -> list[LyapunovSpec]:
    """All functionals, certified ones first."""
    sc = lambda mu, L, s: np.sqrt(mu * s)  # noqa: E731
    F = frozenset
    entries = [
        LyapunovSpec("sc_hr.symplectic", "NAG-SC ODE, symplectic: discrete energy read at x_{k+1}, minus an s||grad||^2 term",
                     OdeFamily.SC_HR, F({S}), False, True, lambda mu, L, s: _le(s, 4 / (9 * L)), "s <= 4/(9L)",
                     _sc_hr_symplectic, Contraction.DIFFERENCE_NEXT, lambda mu, L, s: sc(mu, L, s) / 6, window=1),
        LyapunovSpec("sc_hr.explicit", "NAG-SC ODE, explicit", OdeFamily.SC_HR, F({E}), False, True,
                     lambda mu, L, s: _le(s, mu / (100 * L * L)), "s <= mu/(100 L^2)",
                     _sc_hr_current, Contraction.DIFFERENCE_CURR, lambda mu, L, s: sc(mu, L, s) / 8),
        LyapunovSpec("sc_hr.implicit", "NAG-SC ODE, implicit", OdeFamily.SC_HR, F({I}), False, True,
                     lambda mu, L, s: _le(s, 1 / L), "s <= 1/L",
                     _sc_hr_current, Contraction.DIFFERENCE_NEXT, lambda mu, L, s: sc(mu, L, s) / 4),
        LyapunovSpec("hb_hr.symplectic", "heavy-ball ODE, symplectic, energy read at x_{k+1}", OdeFamily.HB_HR,
                     F({S}), False, True, lambda mu, L, s: _le(s, mu / (16 * L * L)), "s <= mu/(16 L^2)",
                     _momentum_functional(True, True), Contraction.DIFFERENCE_NEXT,
                     lambda mu, L, s: sc(mu, L, s) / 4, window=1),
        LyapunovSpec("hb_hr.symplectic.current_x", "heavy-ball ODE, symplectic, energy read at x_k", OdeFamily.HB_HR,
                     F({S}), False, True, lambda mu, L, s: _le(s, mu / (16 * L * L)), "s <= mu/(16 L^2)",
                     _momentum_functional(True, False), Contraction.DIFFERENCE_NEXT,
                     lambda mu, L, s: sc(mu, L, s) / 4),
        LyapunovSpec("hb_hr.explicit", "heavy-ball ODE, explicit", OdeFamily.HB_HR, F({E}), False, True,
                     lambda mu, L, s: _le(s, mu / (36 * L * L)), "s <= mu/(36 L^2)",
                     _momentum_functional(True, False), Contraction.DIFFERENCE_CURR,
                     lambda mu, L, s: sc(mu, L, s) / 8),
        LyapunovSpec("hb_hr.implicit", "heavy-ball ODE, implicit", OdeFamily.HB_HR, F({I}), False, True,
                     lambda mu, L, s: _le(s, 1 / L), "s <= 1/L",
                     _momentum_functional(True, False), Contraction.DIFFERENCE_NEXT,
                     lambda mu, L, s: sc(mu, L, s) / 4),
        LyapunovSpec("low_sc.symplectic", "low-resolution strongly convex ODE, symplectic, energy read at x_{k+1}",
                     OdeFamily.LOW_SC, F({S}), False, True, lambda mu, L, s: _le(s, mu / (16 * L * L)),
                     "s <= mu/(16 L^2)", _momentum_functional(False, True), Contraction.DIFFERENCE_NEXT,
                     lambda mu, L, s: sc(mu, L, s) / 4, window=1),
        LyapunovSpec("low_sc.symplectic.current_x", "low-resolution strongly convex ODE, symplectic, energy read at x_k",
                     OdeFamily.LOW_SC, F({S}), False, True, lambda mu, L, s: _le(s, mu / (16 * L * L)),
                     "s <= mu/(16 L^2)", _momentum_functional(False, False), Contraction.DIFFERENCE_NEXT,
                     lambda mu, L, s: sc(mu, L, s) / 4),
        LyapunovSpec("low_sc.explicit", "low-resolution strongly convex ODE, explicit", OdeFamily.LOW_SC, F({E}),
                     False, True, lambda mu, L, s: _le(s, mu / (25 * L * L)), "s <= mu/(25 L^2)",
                     _momentum_functional(False, False), Contraction.DIFFERENCE_CURR,
                     lambda mu, L, s: sc(mu, L, s) / 8),
        LyapunovSpec("low_sc.implicit", "low-resolution strongly convex ODE, implicit", OdeFamily.LOW_SC, F({I}),
                     False, True, lambda mu, L, s: _le(s, 1 / L), "s <= 1/L",
                     _momentum_functional(False, False), Contraction.DIFFERENCE_NEXT,
                     lambda mu, L, s: sc(mu, L, s) / 4),
        LyapunovSpec("c_hr_mod.implicit", "modified NAG-C ODE, implicit: s(k+2)(k+3) gap + mixed distance term",
                     OdeFamily.C_HR_MOD, F({I}), False, False, lambda mu, L, s: _le(s, 1 / L), "s <= 1/L",
                     _nesterov_convex(lambda k: (k + 2) * (k + 3), 1, False, True), Contraction.MONOTONE,
                     surplus=lambda P, Q, s: 0.5 * s * s * (P.k + 3) * (3 * P.k + 7) * _sq(Q.g)),
        LyapunovSpec("gd.distance", "gradient descent, squared distance", OdeFamily.GRAD_FLOW, F({E, C}), False, True,
                     lambda mu, L, s: _le(s, 2 / (mu + L)), "s <= 2/(mu+L)", _distance,
                     Contraction.DIFFERENCE_CURR, lambda mu, L, s: 2 * mu * L * s / (mu + L)),
        LyapunovSpec("gd.gap", "gradient descent, objective gap", OdeFamily.GRAD_FLOW, F({E, C}), False, False,
                     lambda mu, L, s: s < 2 / L, "s < 2/L", _gap_only, Contraction.MONOTONE),
        LyapunovSpec("gd.weighted", "gradient descent, ks gap + half squared distance", OdeFamily.GRAD_FLOW, F({E, C}),
                     False, False, lambda mu, L, s: _le(s, 1 / L), "s <= 1/L", _weighted_gap, Contraction.MONOTONE,
                     surplus=lambda P, Q, s: 0.5 * s * s * (P.k + 1) * _sq(P.g)),
        LyapunovSpec("igd.distance", "implicit gradient descent, squared distance", OdeFamily.GRAD_FLOW, F({I}),
                     False, True, _any, "any s > 0", _distance, Contraction.DIFFERENCE_NEXT,
                     lambda mu, L, s: 2 * mu * s + (mu * s) ** 2),
        LyapunovSpec("igd.gap", "implicit gradient descent, objective gap", OdeFamily.GRAD_FLOW, F({I}), False, False,
                     _any, "any s > 0", _gap_only, Contraction.MONOTONE,
                     surplus=lambda P, Q, s: s * _sq(Q.g)),
        LyapunovSpec("igd.weighted", "implicit gradient descent, ks gap + half squared distance", OdeFamily.GRAD_FLOW,
                     F({I}), False, False, _any, "any s > 0", _weighted_gap, Contraction.MONOTONE,
                     surplus=lambda P, Q, s: 0.5 * s * s * (P.k + 1) * _sq(Q.g)),
        # continuous
        LyapunovSpec("flow.grad.distance", "gradient flow, squared distance", OdeFamily.GRAD_FLOW, F(), True, True,
                     _any, "-", _distance, Contraction.EXPONENTIAL, lambda mu, L, s: 2 * mu),
        LyapunovSpec("flow.grad.gap", "gradient flow, objective gap", OdeFamily.GRAD_FLOW, F(), True, False,
                     _any, "-", _gap_only, Contraction.MONOTONE),
        LyapunovSpec("flow.grad.weighted", "gradient flow, t gap + half squared distance", OdeFamily.GRAD_FLOW, F(),
                     True, False, _any, "-", _flow_weighted, Contraction.MONOTONE),
        LyapunovSpec("flow.low_sc", "low-resolution strongly convex ODE, kinetic + mixed + gap", OdeFamily.LOW_SC, F(),
                     True, True, _any, "-", _flow_low_sc, Contraction.EXPONENTIAL,
                     lambda mu, L, s: np.sqrt(mu) / 4),
        LyapunovSpec("flow.low_c", "low-resolution NAG-C ODE, t^2 gap + mixed distance term", OdeFamily.LOW_C, F(),
                     True, False, _any, "-", _flow_low_c, Contraction.MONOTONE),
        # trial functionals whose decrease argument fails (diagnostics only)
        LyapunovSpec("c_hr_mod.explicit.trial", "modified NAG-C ODE, explicit trial functional", OdeFamily.C_HR_MOD,
                     F({E}), False, False, _any, "-", _nesterov_convex(lambda k: (k - 2) * (k + 1), -1, False, True),
                     Contraction.MONOTONE, proved=False, k_min=2),
        LyapunovSpec("c_hr.symplectic.trial", "NAG-C ODE, symplectic trial functional", OdeFamily.C_HR, F({S}), False,
                     False, _any, "-", _nesterov_convex(lambda k: (k + 1) * (k + 1.5), 1, True, True),
                     Contraction.MONOTONE, window=1, proved=False),
        LyapunovSpec("c_hr.explicit.trial", "NAG-C ODE, explicit trial functional", OdeFamily.C_HR, F({E}), False,
                     False, _any, "-", _nesterov_convex(lambda k: (k - 2) * (k - 0.5), -1, False, True),
                     Contraction.MONOTONE, proved=False, k_min=2),
        LyapunovSpec("c_hr.implicit.trial", "NAG-C ODE, implicit trial functional", OdeFamily.C_HR, F({I}), False,
                     False, _any, "-", _nesterov_convex(lambda k: (k + 2) * (k + 1.5), 1, False, True),
                     Contraction.MONOTONE, proved=False),
        LyapunovSpec("low_c.symplectic.trial", "low-resolution NAG-C ODE, symplectic trial functional", OdeFamily.LOW_C,
                     F({S}), False, False, _any, "-", _nesterov_convex(lambda k: (k + 1) ** 2, 1, True, False),
                     Contraction.MONOTONE, window=1, proved=False),
        LyapunovSpec("low_c.explicit.trial", "low-resolution NAG-C ODE, explicit trial functional", OdeFamily.LOW_C,
                     F({E}), False, False, _any, "-", _nesterov_convex(lambda k: (k - 2) * (k - 1), -1, False, False),
                     Contraction.MONOTONE, proved=False, k_min=2),
        LyapunovSpec("low_c.implicit.trial", "low-resolution NAG-C ODE, implicit trial functional", OdeFamily.LOW_C,
                     F({I}), False, False, _any, "-", _nesterov_convex(lambda k: (k + 1) * (k + 2), 1, False, False),
                     Contraction.MONOTONE, proved=False),
    ]
    return entries


def get(spec_id: str) -> LyapunovSpec:
    for entry in catalog():
        if entry.id == spec_id:
            return entry
    raise KeyError(f"unknown Lyapunov functional {spec_id!r}")


def applicable(family, rule=None, proved: bool | None = True) -> list[LyapunovSpec]:
    out = [e for e in catalog() if e.applies_to(family, rule)]
    if proved is not None:
        out = [e for e in out if e.proved == proved]
    return out


# -- evaluation ---------------------------------------------------------------


def _point(obj: Objective, trace, i: int) -> Point:
    x = trace.x[i]
    k = int(trace.k[i]) if hasattr(trace, "k") else i
    return Point(k=k, t=float(trace.t[i]), x=x, v=trace.v[i], g=obj.gradient(x),
                 gap=float(trace.f_gap[i]), d=x - obj.minimizer)


def _is_flow(trace) -> bool:
    return not isinstance(trace, Trace)


def eval_lyapunov(spec: LyapunovSpec, obj: Objective, s: float, trace, k: int) -> float:
    """Value of the functional at iterate k (or sample index k for a flow)."""
    if _is_flow(trace):
        if not 0 <= k < len(trace.t):
            raise MissingIndexError(f"sample {k} outside the flow")
        return float(spec.formula(_point(obj, trace, k), None, obj.mu, s))
    try:
        i = trace.position(k)
        j = trace.position(k + 1) if spec.window else None
    except KeyError as exc:
        raise MissingIndexError(str(exc)) from None
    P = _point(obj, trace, i)
    Q = _point(obj, trace, j) if j is not None else None
    return float(spec.formula(P, Q, obj.mu, s))


def lyapunov_series(spec: LyapunovSpec, obj: Objective, s: float, trace) -> tuple[np.ndarray, np.ndarray]:
    """(index, E) for every index the trace supports (k of a trace, or sample index of a flow)."""
    n = len(trace.t)
    pts = [_point(obj, trace, i) for i in range(n)]
    if _is_flow(trace):
        vals = [spec.formula(P, None, obj.mu, s) for P in pts]
        return np.arange(n), np.asarray(vals, dtype=float)
    idx, vals = [], []
    for i, P in enumerate(pts):
        Q = None
        if spec.window:
            if i + 1 >= n or trace.k[i + 1] != P.k + 1:
                continue
            Q = pts[i + 1]
        idx.append(P.k)
        vals.append(spec.formula(P, Q, obj.mu, s))
    return np.asarray(idx, dtype=int), np.asarray(vals, dtype=float)


@dataclass
class ContractionReport:
    spec_id: str
    status: str  # pass | fail | inapplicable
    checked_pairs: int = 0
    max_violation: float = 0.0
    first_violation: Optional[float] = None  # k (discrete) or t (continuous)
    reason: str = ""
    certified: bool = True

    @property
    def label(self) -> str:
        if not self.certified:
            return "no theorem applicable"
        return self.status

    def as_dict(self) -> dict:
        return {
            "id": self.spec_id, "status": self.status, "checked_pairs": self.checked_pairs,
            "max_violation": self.max_violation, "first_violation": self.first_violation,
            "reason": self.reason, "label": self.label,
        }


def _step_size_of(trace) -> float:
    return float(trace.s) if _is_flow(trace) else float(trace.spec.step_size)


def _rk4_budget(flow, obj: Objective, s: float) -> float:
    """Relative one-step RK4 error allowance (h Lambda)^5 / 24, Lambda the stiffest rate of the field."""
    scale = obj.lipschitz
    if s > 0:
        scale = max(scale, 1.0 / np.sqrt(s))
    return (flow.h * scale) ** 5 / 24.0


def check_contraction(spec: LyapunovSpec, obj: Objective, trace, slack_abs: float | None = None) -> ContractionReport:
    """Test the declared decrease inequality on every consecutive recorded pair.

    A pair violates when lhs - rhs > slack, with slack = 1e-9 (1 + |E|) on
    discrete traces.  Continuous traces add ``slack_abs`` (default 1e-7)
    and the RK4 local error allowance |E| (h Lambda)^5 / 24.
    """
    s = _step_size_of(trace)
    certified = spec.proved
    if _is_flow(trace):
        if not spec.applies_to(trace.family):
            return ContractionReport(spec.id, "inapplicable", reason=f"functional is for {spec.family.value} flows", certified=certified)
        slack_abs = 1e-7 if slack_abs is None else slack_abs
    else:
        if not spec.applies_to(trace.spec.family, trace.spec.rule):
            return ContractionReport(spec.id, "inapplicable", reason=f"functional does not cover {trace.spec.label}", certified=certified)
        slack_abs = 0.0 if slack_abs is None else slack_abs
    if spec.strongly_convex and obj.mu <= 0:
        return ContractionReport(spec.id, "inapplicable", reason="needs mu > 0", certified=certified)
    if not spec.condition(obj.mu, obj.lipschitz, s):
        return ContractionReport(spec.id, "inapplicable", reason=f"step-size condition {spec.condition_text} fails", certified=certified)

    budget = _rk4_budget(trace, obj, s) if _is_flow(trace) else 0.0
    n = len(trace.t)
    pts = [_point(obj, trace, i) for i in range(n)]
    rate = spec.rate(obj.mu, obj.lipschitz, s) if spec.rate is not None else 0.0
    vals: dict[int, float] = {}

    def value(i):
        if i not in vals:
            Q = pts[i + 1] if spec.window else None
            vals[i] = float(spec.formula(pts[i], Q, obj.mu, s))
        return vals[i]

    worst, first, checked = 0.0, None, 0
    last = n - 1 - spec.window
    for i in range(last):
        if not _is_flow(trace):
            if trace.k[i + 1] != trace.k[i] + 1 or (spec.window and trace.k[i + 2] != trace.k[i] + 2):
                continue
            if pts[i].k < spec.k_min:
                continue
        e0, e1 = value(i), value(i + 1)
        if spec.contraction is Contraction.DIFFERENCE_NEXT:
            excess = (e1 - e0) + rate * e1
        elif spec.contraction is Contraction.DIFFERENCE_CURR:
            excess = (e1 - e0) + rate * e0
        elif spec.contraction is Contraction.EXPONENTIAL:
            excess = e1 - e0 * np.exp(-rate * (pts[i + 1].t - pts[i].t))
        else:
            req = spec.surplus(pts[i], pts[i + 1], s) if spec.surplus is not None else 0.0
            excess = (e1 - e0) + req
        tol = 1e-9 * (1.0 + abs(e0)) + slack_abs + budget * abs(e0)
        checked += 1
        if not np.isfinite(excess) or excess > tol:
            amount = float(excess - tol) if np.isfinite(excess) else float("inf")
            if first is None:
                first = pts[i].t if _is_flow(trace) else pts[i].k
            worst = max(worst, amount)
    if checked == 0:
        return ContractionReport(spec.id, "inapplicable", reason="no consecutive recorded pairs (trace too sparse)", certified=certified)
    status = "pass" if first is None else "fail"
    return ContractionReport(spec.id, status, checked, worst, first, "", certified)
