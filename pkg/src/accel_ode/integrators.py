"""Discrete update maps and the trace runner.

Every second-order scheme has the shape

    x_{k+1} - x_k = sqrt(s) * v_(k or k+1)
    v_{k+1} - v_k = -a * v_(k or k+1) - sqrt(s) * [grad f(x_{k+1}) - grad f(x_k)]
                    - sqrt(s) * c * grad f(x_(k or k+1))

where the bracketed gradient-difference term is present only for families
with a Hessian-driven damping term.  The damping ``a`` and gradient weight
``c`` depend on the family and, for the convex families, on k.  Symplectic
and classical rules use (v_k, v_{k+1}, x_{k+1}) in the three slots, explicit
uses (v_k, v_k, x_k), implicit uses (v_{k+1}, v_{k+1}, x_{k+1}).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .objectives import Objective, ProblemInstance
from .phase_dynamics import OdeFamily, PhaseState, initial_state

DIVERGENCE_GAP = 1e12


class SchemeRule(str, Enum):
    SYMPLECTIC = "SYMPLECTIC"
    EXPLICIT = "EXPLICIT"
    IMPLICIT = "IMPLICIT"
    CLASSICAL = "CLASSICAL"


# name of the method each CLASSICAL pair reproduces
CLASSICAL_METHODS = {
    OdeFamily.GRAD_FLOW: "gradient descent",
    OdeFamily.SC_HR: "NAG-SC (phase form)",
    OdeFamily.HB_HR: "heavy-ball (phase form)",
    OdeFamily.C_HR_MOD: "NAG-C (same update as symplectic)",
}


def admissible(family: OdeFamily, rule: SchemeRule) -> bool:
    family, rule = OdeFamily(family), SchemeRule(rule)
    if rule is SchemeRule.CLASSICAL:
        return family in CLASSICAL_METHODS
    if family is OdeFamily.GRAD_FLOW:
        # first-order flow: forward and backward Euler only
        return rule in (SchemeRule.EXPLICIT, SchemeRule.IMPLICIT)
    return True


@dataclass(frozen=True)
class SchemeSpec:
    family: OdeFamily
    rule: SchemeRule
    step_size: float

    def __post_init__(self):
        object.__setattr__(self, "family", OdeFamily(self.family))
        object.__setattr__(self, "rule", SchemeRule(self.rule))
        object.__setattr__(self, "step_size", float(self.step_size))
        if not self.step_size > 0:
            raise ValueError("step_size must be positive")
        if not admissible(self.family, self.rule):
            raise ValueError(f"{self.rule.value} is not defined for {self.family.value}")

    @property
    def label(self) -> str:
        return f"{self.family.value}/{self.rule.value}"


class SolverFailure(RuntimeError):
    def __init__(self, residual: float, iterations: int):
        super().__init__(f"implicit solve failed after {iterations} iterations (best residual {residual:.3e})")
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-10
    max_iter: int = 100
    direct_quadratic: bool = True  # direct linear solve when the objective is quadratic


def solve_implicit(residual: Callable, jacobian_action: Optional[Callable], guess,
                   tol: float = 1e-10, max_iter: int = 100, return_info: bool = False):
    """Find y with ||residual(y)|| <= tol * (1 + ||guess||).

    Newton's method with a step-halving line search on the residual norm.
    The Jacobian is assembled densely from ``jacobian_action(y, d)``.  When
    no Jacobian is available, a damped fixed-point iteration
    y <- y - theta * residual(y) is used with the same halving rule.
    Once the tolerance is met one extra step is attempted, kept only if it
    lowers the residual further.
    """
    y = np.array(guess, dtype=float)
    threshold = tol * (1.0 + np.linalg.norm(y))
    R = residual(y)
    nR = np.linalg.norm(R)
    if not np.isfinite(nR):
        raise SolverFailure(float("inf"), 0)
    eye = np.eye(y.size)

    def trial(y, R, nR):
        if jacobian_action is not None:
            J = np.column_stack([jacobian_action(y, eye[i]) for i in range(y.size)])
            try:
                direction = np.linalg.solve(J, -R)
            except np.linalg.LinAlgError:
                direction = -R
        else:
            direction = -R
        lam = 1.0
        while lam > 1e-12:
            y_try = y + lam * direction
            R_try = residual(y_try)
            n_try = np.linalg.norm(R_try)
            if np.isfinite(n_try) and n_try < nR:
                return y_try, R_try, n_try
            lam *= 0.5
        return None

    iters = 0
    while nR > threshold:
        if iters >= max_iter:
            raise SolverFailure(float(nR), iters)
        out = trial(y, R, nR)
        iters += 1
        if out is None:
            raise SolverFailure(float(nR), iters)
        y, R, nR = out
    if nR > 0.0 and iters < max_iter:
        out = trial(y, R, nR)
        iters += 1
        if out is not None:
            y, R, nR = out
    if return_info:
        return y, iters, float(nR)
    return y


def _coefficients(family: OdeFamily, rule: SchemeRule, mu: float, s: float, k: int):
    """(damping a, gradient weight c, gradient-difference flag) for step k -> k+1."""
    m = np.sqrt(mu * s)
    if family in (OdeFamily.SC_HR, OdeFamily.HB_HR, OdeFamily.LOW_SC):
        correction = family is OdeFamily.SC_HR
        if family is OdeFamily.LOW_SC:
            return 2.0 * m, 1.0, False
        if rule is SchemeRule.CLASSICAL:
            if m >= 1.0:
                raise ValueError("classical form needs mu * s < 1")
            return 2.0 * m / (1.0 - m), (1.0 + m) / (1.0 - m), correction
        return 2.0 * m, 1.0 + m, correction
    # convex families: t_j = j sqrt(s) with j = k+1 (next time) or k (current)
    j = k if rule is SchemeRule.EXPLICIT else k + 1
    a = 3.0 / j
    if family is OdeFamily.C_HR_MOD:
        return a, (j + 3.0) / j, True
    if family is OdeFamily.C_HR:
        return a, (2.0 * j + 3.0) / (2.0 * j), True
    return a, 1.0, False  # LOW_C


def effective_rule(spec: SchemeSpec, k: int) -> SchemeRule:
    """Rule actually applied at step k (explicit convex schemes bootstrap with symplectic at k=0)."""
    if spec.rule is SchemeRule.EXPLICIT and spec.family.time_dependent and k == 0:
        return SchemeRule.SYMPLECTIC
    if spec.family is OdeFamily.C_HR_MOD and spec.rule is SchemeRule.CLASSICAL:
        return SchemeRule.SYMPLECTIC
    return spec.rule


def _implicit_position(obj: Objective, x, rhs_const, lhs_scale: float, grad_scale: float,
                       solver: SolverConfig):
    """Solve lhs_scale*(y - x) + grad_scale*grad f(y) = rhs_const for y."""
    if obj.is_quadratic and solver.direct_quadratic:
        M = lhs_scale * np.eye(obj.dimension) + grad_scale * obj.matrix
        return np.linalg.solve(M, lhs_scale * x + grad_scale * obj.linear + rhs_const)

    def residual(y):
        return lhs_scale * (y - x) + grad_scale * obj.gradient(y) - rhs_const

    def jac(y, d):
        return lhs_scale * d + grad_scale * obj.hessian_vector(y, d)

    return solve_implicit(residual, jac, x, tol=solver.tol, max_iter=solver.max_iter)


def _advance(spec: SchemeSpec, obj: Objective, k: int, x, v, g0, solver: SolverConfig):
    """One step from (x_k, v_k) with g0 = grad f(x_k); returns (x, v, grad f(x)) at k+1."""
    s = spec.step_size
    family = spec.family
    if family is OdeFamily.GRAD_FLOW:
        if spec.rule is SchemeRule.IMPLICIT:
            x1 = _implicit_position(obj, x, np.zeros_like(x), 1.0, s, solver)
        else:
            x1 = x - s * g0
        return x1, np.zeros_like(v), obj.gradient(x1)

    r = np.sqrt(s)
    rule = effective_rule(spec, k)
    a, c, corr = _coefficients(family, rule, obj.mu, s, k)
    if rule is SchemeRule.IMPLICIT:
        # substitute v_{k+1} = (x_{k+1} - x_k)/sqrt(s) into the velocity equation, times sqrt(s)
        gs = s * (c + (1.0 if corr else 0.0))
        rhs = r * v + (s * g0 if corr else 0.0)
        x1 = _implicit_position(obj, x, rhs, 1.0 + a, gs, solver)
        return x1, (x1 - x) / r, obj.gradient(x1)

    x1 = x + r * v
    g1 = obj.gradient(x1)
    if rule is SchemeRule.EXPLICIT:
        v1 = (1.0 - a) * v - r * c * g0
        if corr:
            v1 = v1 - r * (g1 - g0)
    else:
        rhs = v - r * c * g1
        if corr:
            rhs = rhs - r * (g1 - g0)
        v1 = rhs / (1.0 + a)
    return x1, v1, g1


def step(spec: SchemeSpec, obj: Objective, k: int, state: PhaseState,
         solver: SolverConfig | None = None) -> PhaseState:
    """Apply the update map of ``spec`` once, from index k to k+1."""
    if not state.finite:
        raise ValueError("state contains non-finite entries")
    if spec.family.needs_mu and obj.mu <= 0:
        raise ValueError(f"{spec.family.value} requires mu > 0")
    solver = solver or SolverConfig()
    x1, v1, _ = _advance(spec, obj, k, state.x, state.v, obj.gradient(state.x), solver)
    return PhaseState(x1, v1)


@dataclass(frozen=True)
class TraceRecord:
    k: int
    t: float
    state: PhaseState
    f_gap: float
    grad_norm_sq: float


@dataclass
class Trace:
    """Recorded iterates of one run, stored column-wise."""

    spec: SchemeSpec
    problem: ProblemInstance
    k: np.ndarray
    t: np.ndarray
    x: np.ndarray
    v: np.ndarray
    f_gap: np.ndarray
    grad_norm_sq: np.ndarray
    termination: str = "completed"
    message: str = ""
    t0: float = 0.0
    _pos: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._pos = {int(kk): i for i, kk in enumerate(self.k)}

    def __len__(self):
        return len(self.k)

    @property
    def records(self) -> list[TraceRecord]:
        return [
            TraceRecord(int(self.k[i]), float(self.t[i]), PhaseState(self.x[i], self.v[i]),
                        float(self.f_gap[i]), float(self.grad_norm_sq[i]))
            for i in range(len(self.k))
        ]

    def position(self, k: int) -> int:
        try:
            return self._pos[int(k)]
        except KeyError:
            raise KeyError(f"iterate k={k} is not recorded in this trace") from None

    def has(self, k: int) -> bool:
        return int(k) in self._pos

    @property
    def dense(self) -> bool:
        return bool(np.all(np.diff(self.k) == 1))


def discrete_time(spec: SchemeSpec, k, t0: float = 0.0):
    """Time attached to iterate k: t0 + k sqrt(s), or k s for gradient descent."""
    if spec.family is OdeFamily.GRAD_FLOW:
        return t0 + np.asarray(k) * spec.step_size
    return t0 + np.asarray(k) * np.sqrt(spec.step_size)


def run(spec: SchemeSpec, problem: ProblemInstance, iterations: int, record_every: int = 1,
        solver: SolverConfig | None = None, stop_below: float | None = None) -> Trace:
    """Iterate ``spec`` from the prescribed initial state.

    Records k = 0, every ``record_every``-th iterate and the last one.
    Divergence (f-gap above 1e12 or non-finite values) and implicit-solver
    failures end the run early and are reported in ``termination``.  With
    ``stop_below`` the run also stops once the f-gap drops to that level.
    """
    if iterations < 0 or record_every < 1:
        raise ValueError("iterations must be >= 0 and record_every >= 1")
    obj = problem.objective
    if spec.family.needs_mu and obj.mu <= 0:
        raise ValueError(f"{spec.family.value} requires a strongly convex objective")
    solver = solver or SolverConfig()
    state, t0 = initial_state(spec.family, obj, problem.x0, spec.step_size)
    if spec.family is OdeFamily.GRAD_FLOW:
        t0 = 0.0
    x, v = state.x, state.v
    g = obj.gradient(x)

    ks, xs, vs, gaps, gsq = [0], [x], [v], [obj.gap(x)], [float(g @ g)]
    termination, message = "completed", ""
    last_recorded = 0
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(iterations):
            try:
                x, v, g = _advance(spec, obj, k, x, v, g, solver)
                gap = obj.gap(x)
            except SolverFailure as exc:
                termination, message = "solver_failure", str(exc)
                break
            except (FloatingPointError, OverflowError, np.linalg.LinAlgError) as exc:
                termination, message = "diverged", str(exc)
                break
            finite = np.isfinite(gap) and np.all(np.isfinite(x)) and np.all(np.isfinite(v))
            kk = k + 1
            stop = stop_below is not None and finite and gap <= stop_below
            if not finite or gap > DIVERGENCE_GAP:
                termination = "diverged"
                message = f"f_gap={gap:.3e} at k={kk}"
                if finite:
                    ks.append(kk); xs.append(x); vs.append(v); gaps.append(gap); gsq.append(float(g @ g))
                break
            if kk % record_every == 0 or kk == iterations or stop:
                ks.append(kk); xs.append(x); vs.append(v); gaps.append(gap); gsq.append(float(g @ g))
                last_recorded = kk
            if stop:
                break
    karr = np.asarray(ks, dtype=int)
    return Trace(
        spec=spec, problem=problem, k=karr, t=discrete_time(spec, karr, t0),
        x=np.asarray(xs), v=np.asarray(vs), f_gap=np.asarray(gaps, dtype=float),
        grad_norm_sq=np.asarray(gsq, dtype=float), termination=termination, message=message, t0=t0,
    )


def iterations_to_reach(spec: SchemeSpec, problem: ProblemInstance, target: float,
                        max_iterations: int = 10_000_000) -> int | None:
    """First k with f_gap(x_k) <= target, or None if not reached."""
    tr = run(spec, problem, max_iterations, record_every=max_iterations + 1, stop_below=target)
    if tr.termination != "completed" or tr.f_gap[-1] > target:
        return None
    return int(tr.k[-1])


# -- classical two-sequence formulations --------------------------------------


def nag_sc_iterates(obj: Objective, x0, s: float, iterations: int) -> np.ndarray:
    """y_{k+1} = x_k - s grad f(x_k); x_{k+1} = y_{k+1} + beta (y_{k+1} - y_k), y_0 = x_0."""
    m = np.sqrt(obj.mu * s)
    beta = (1.0 - m) / (1.0 + m)
    x = np.asarray(x0, dtype=float)
    y = x.copy()
    out = [x]
    for _ in range(iterations):
        y_new = x - s * obj.gradient(x)
        x = y_new + beta * (y_new - y)
        y = y_new
        out.append(x)
    return np.asarray(out)


def nag_c_iterates(obj: Objective, x0, s: float, iterations: int) -> np.ndarray:
    """y_{k+1} = x_k - s grad f(x_k); x_{k+1} = y_{k+1} + k/(k+3) (y_{k+1} - y_k), y_0 = x_0."""
    x = np.asarray(x0, dtype=float)
    y = x.copy()
    out = [x]
    for k in range(iterations):
        y_new = x - s * obj.gradient(x)
        x = y_new + (k / (k + 3.0)) * (y_new - y)
        y = y_new
        out.append(x)
    return np.asarray(out)


def heavy_ball_iterates(obj: Objective, x0, s: float, iterations: int) -> np.ndarray:
    """x_{k+1} = x_k - s grad f(x_k) + alpha (x_k - x_{k-1}), alpha = (1 - sqrt(mu s))/(1 + sqrt(mu s)).

    The phantom x_{-1} = x_0 + s grad f(x_0) makes x_1 agree with the phase-form
    start v_0 = -2 sqrt(s) grad f(x_0) / (1 + sqrt(mu s)).
    """
    m = np.sqrt(obj.mu * s)
    alpha = (1.0 - m) / (1.0 + m)
    x = np.asarray(x0, dtype=float)
    x_prev = x + s * obj.gradient(x)
    out = [x]
    for _ in range(iterations):
        x_new = x - s * obj.gradient(x) + alpha * (x - x_prev)
        x_prev, x = x, x_new
        out.append(x)
    return np.asarray(out)


def gradient_descent_iterates(obj: Objective, x0, s: float, iterations: int) -> np.ndarray:
    x = np.asarray(x0, dtype=float)
    out = [x]
    for _ in range(iterations):
        x = x - s * obj.gradient(x)
        out.append(x)
    return np.asarray(out)


def _phase_iterates(family: OdeFamily, rule: SchemeRule):
    def iterates(obj: Objective, x0, s: float, iterations: int) -> np.ndarray:
        problem = ProblemInstance(obj, np.asarray(x0, dtype=float))
        return run(SchemeSpec(family, rule, s), problem, iterations).x

    return iterates


@dataclass(frozen=True)
class EquivalencePair:
    name: str
    classical: Callable
    phase: Callable
    family: OdeFamily
    rule: SchemeRule


def classical_equivalence_pairs() -> list[EquivalencePair]:
    """Two-sequence methods next to the phase-space schemes that reproduce them."""
    return [
        EquivalencePair("NAG-SC", nag_sc_iterates, _phase_iterates(OdeFamily.SC_HR, SchemeRule.CLASSICAL),
                        OdeFamily.SC_HR, SchemeRule.CLASSICAL),
        EquivalencePair("NAG-C", nag_c_iterates, _phase_iterates(OdeFamily.C_HR_MOD, SchemeRule.SYMPLECTIC),
                        OdeFamily.C_HR_MOD, SchemeRule.SYMPLECTIC),
        EquivalencePair("heavy-ball", heavy_ball_iterates, _phase_iterates(OdeFamily.HB_HR, SchemeRule.CLASSICAL),
                        OdeFamily.HB_HR, SchemeRule.CLASSICAL),
        EquivalencePair("gradient descent", gradient_descent_iterates,
                        _phase_iterates(OdeFamily.GRAD_FLOW, SchemeRule.CLASSICAL),
                        OdeFamily.GRAD_FLOW, SchemeRule.CLASSICAL),
    ]
