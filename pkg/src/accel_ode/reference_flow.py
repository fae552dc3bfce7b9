"""Fixed-step RK4 reference trajectories of the continuous dynamics."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .objectives import ProblemInstance
from .phase_dynamics import OdeFamily, field_function, initial_state

# LOW_C's damping 3/t is singular at t=0; integration starts here with V=0
LOW_C_START = 1e-3


@dataclass
class FlowTrace:
    family: OdeFamily
    s: float
    problem: ProblemInstance
    h: float
    t: np.ndarray
    x: np.ndarray
    v: np.ndarray
    xdot: np.ndarray
    f_gap: np.ndarray
    grad_norm_sq: np.ndarray
    horizon: float
    t_offset: float = 0.0  # start shift away from the family's nominal origin
    diverged: bool = False

    def __len__(self):
        return len(self.t)

    @property
    def t0(self) -> float:
        return float(self.t[0])

    def position_at(self, when: float) -> np.ndarray:
        """X(when) by cubic Hermite interpolation between samples (uses X' at the nodes)."""
        t = self.t
        if when < t[0]:
            if t[0] - when <= self.t_offset + 1e-12:
                return self.x[0]
            raise ValueError(f"t={when} precedes the flow start {t[0]}")
        if when > t[-1] * (1 + 1e-12):
            raise ValueError(f"t={when} lies beyond the integrated horizon {t[-1]}")
        i = int(np.searchsorted(t, when, side="right")) - 1
        i = min(max(i, 0), len(t) - 2)
        h = t[i + 1] - t[i]
        u = (when - t[i]) / h
        h00 = 2 * u**3 - 3 * u**2 + 1
        h10 = u**3 - 2 * u**2 + u
        h01 = -2 * u**3 + 3 * u**2
        h11 = u**3 - u**2
        return h00 * self.x[i] + h10 * h * self.xdot[i] + h01 * self.x[i + 1] + h11 * h * self.xdot[i + 1]


def max_step(family: OdeFamily, lipschitz: float, s: float) -> float:
    limit = 1.0 / (10.0 * lipschitz)
    if s > 0:
        limit = min(limit, np.sqrt(s) / 10.0)
    return limit


def integrate(family: OdeFamily, problem: ProblemInstance, s: float, horizon: float, h: float) -> FlowTrace:
    """Integrate the family's phase-space ODE with classical RK4 up to ``horizon``.

    Samples are taken at every step.  A non-finite state truncates the trace
    and sets ``diverged``.
    """
    family = OdeFamily(family)
    obj = problem.objective
    if not h > 0:
        raise ValueError("h must be positive")
    if s < 0:
        raise ValueError("s must be nonnegative")
    if h > max_step(family, obj.lipschitz, s) * (1 + 1e-12):
        raise ValueError(f"h={h} exceeds min(1/(10L), sqrt(s)/10) = {max_step(family, obj.lipschitz, s)}")
    state, t0 = initial_state(family, obj, problem.x0, s)
    offset = 0.0
    if family is OdeFamily.LOW_C:
        offset = LOW_C_START
        t0 = t0 + offset
    if not horizon > t0:
        raise ValueError(f"horizon {horizon} must exceed the start time {t0}")

    n = int(np.ceil((horizon - t0) / h - 1e-9))
    f = field_function(family, obj, s)
    x, v = state.x.copy(), state.v.copy()
    dim = x.size
    ts = t0 + h * np.arange(n + 1)
    X = np.empty((n + 1, dim)); V = np.empty((n + 1, dim)); XD = np.empty((n + 1, dim))
    gaps = np.empty(n + 1); gsq = np.empty(n + 1)
    diverged = False
    last = n
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(n + 1):
            t = ts[i]
            k1x, k1v = f(t, x, v)
            g = obj.gradient(x)
            X[i], V[i], XD[i] = x, v, k1x
            gaps[i] = obj.gap(x)
            gsq[i] = g @ g
            if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v)) and np.isfinite(gaps[i])):
                diverged = True
                last = i - 1
                break
            if i == n:
                break
            half = 0.5 * h
            k2x, k2v = f(t + half, x + half * k1x, v + half * k1v)
            k3x, k3v = f(t + half, x + half * k2x, v + half * k2v)
            k4x, k4v = f(t + h, x + h * k3x, v + h * k3v)
            x = x + (h / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x)
            v = v + (h / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v)
    keep = slice(0, last + 1)
    return FlowTrace(
        family=family, s=float(s), problem=problem, h=float(h), t=ts[keep], x=X[keep], v=V[keep],
        xdot=XD[keep], f_gap=gaps[keep], grad_norm_sq=gsq[keep], horizon=float(horizon),
        t_offset=offset, diverged=diverged,
    )


def discretization_gap(flow: FlowTrace, trace) -> list[tuple[int, float]]:
    """||x_k - X(t_k)|| for every recorded iterate, with t_k the trace's time stamps."""
    spec = trace.spec
    if spec.family is not flow.family:
        raise ValueError("flow and trace belong to different families")
    if flow.family.needs_s and not np.isclose(spec.step_size, flow.s, rtol=1e-12, atol=0.0):
        raise ValueError("flow and trace use different s")
    if trace.t[-1] > flow.t[-1] * (1 + 1e-12) + 1e-12:
        raise ValueError(f"flow horizon {flow.t[-1]} does not cover the trace (t={trace.t[-1]})")
    out = []
    for k, t, x in zip(trace.k, trace.t, trace.x):
        X = flow.position_at(float(t))
        out.append((int(k), float(np.linalg.norm(x - X))))
    return out
