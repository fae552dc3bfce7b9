"""Phase-space vector fields (X' = V, V' = ...) for the ODE families."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .objectives import Objective


class OdeFamily(str, Enum):
    GRAD_FLOW = "GRAD_FLOW"  # X' = -grad f
    LOW_C = "LOW_C"  # X'' + (3/t) X' + grad f = 0
    LOW_SC = "LOW_SC"  # X'' + 2 sqrt(mu) X' + grad f = 0
    HB_HR = "HB_HR"  # heavy-ball, high resolution
    SC_HR = "SC_HR"  # strongly convex Nesterov, high resolution
    C_HR = "C_HR"  # convex Nesterov, high resolution
    C_HR_MOD = "C_HR_MOD"  # convex Nesterov with the (1 + 3 sqrt(s)/t) gradient weight

    @property
    def needs_mu(self) -> bool:
        return self in (OdeFamily.SC_HR, OdeFamily.HB_HR, OdeFamily.LOW_SC)

    @property
    def needs_s(self) -> bool:
        return self in (OdeFamily.SC_HR, OdeFamily.HB_HR, OdeFamily.C_HR, OdeFamily.C_HR_MOD)

    @property
    def time_dependent(self) -> bool:
        return self in (OdeFamily.LOW_C, OdeFamily.C_HR, OdeFamily.C_HR_MOD)

    @property
    def has_hessian_term(self) -> bool:
        return self in (OdeFamily.SC_HR, OdeFamily.C_HR, OdeFamily.C_HR_MOD)


@dataclass(frozen=True)
class PhaseState:
    x: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).reshape(-1)
        v = np.asarray(self.v, dtype=float).reshape(-1)
        if x.shape != v.shape:
            raise ValueError("x and v must have the same length")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "v", v)

    @property
    def finite(self) -> bool:
        return bool(np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.v)))


def time_origin(family: OdeFamily, s: float) -> float:
    family = OdeFamily(family)
    if family in (OdeFamily.C_HR, OdeFamily.C_HR_MOD):
        return 1.5 * np.sqrt(s)
    return 0.0


def _check_mu(family, obj):
    if family.needs_mu and obj.mu <= 0.0:
        raise ValueError(f"{family.value} requires a strongly convex objective (mu > 0)")


def field_function(family: OdeFamily, obj: Objective, s: float):
    """Unchecked fast form of the vector field: returns ``f(t, x, v) -> (x', v')``."""
    family = OdeFamily(family)
    _check_mu(family, obj)
    rs = np.sqrt(s)
    grad = obj.gradient
    hv = obj.hessian_vector
    if family is OdeFamily.GRAD_FLOW:
        def f(t, x, v):
            return -grad(x), np.zeros_like(v)
        return f

    hessian_term = family.has_hessian_term and rs > 0.0
    if family.time_dependent:
        if family is OdeFamily.C_HR:
            wcoef = 1.5 * rs
        elif family is OdeFamily.C_HR_MOD:
            wcoef = 3.0 * rs
        else:
            wcoef = 0.0

        def f(t, x, v):
            vdot = -(3.0 / t) * v - (1.0 + wcoef / t) * grad(x)
            if hessian_term:
                vdot = vdot - rs * hv(x, v)
            return v, vdot
        return f

    damping = 2.0 * np.sqrt(obj.mu)
    weight = 1.0 if family is OdeFamily.LOW_SC else 1.0 + np.sqrt(obj.mu * s)

    def f(t, x, v):
        vdot = -damping * v - weight * grad(x)
        if hessian_term:
            vdot = vdot - rs * hv(x, v)
        return v, vdot
    return f


def vector_field(family: OdeFamily, obj: Objective, s: float, t: float, state: PhaseState) -> PhaseState:
    """Time derivative (X', V') of the phase state.

    ``s = 0`` is accepted and drops every sqrt(s) term, which turns the
    high-resolution fields into their low-resolution limits.
    """
    family = OdeFamily(family)
    if s < 0:
        raise ValueError("s must be nonnegative")
    if t < time_origin(family, s):
        raise ValueError(f"t={t} precedes the time origin of {family.value}")
    if family.time_dependent and t <= 0.0:
        raise ValueError(f"{family.value} is singular at t=0")
    if not state.finite:
        raise ValueError("state contains non-finite entries")
    dx, dv = field_function(family, obj, s)(t, state.x, state.v)
    return PhaseState(np.array(dx, dtype=float), dv)


def initial_velocity(family: OdeFamily, obj: Objective, x0, s: float) -> np.ndarray:
    family = OdeFamily(family)
    g = obj.gradient(np.asarray(x0, dtype=float))
    if family in (OdeFamily.SC_HR, OdeFamily.HB_HR):
        return -2.0 * np.sqrt(s) * g / (1.0 + np.sqrt(obj.mu * s))
    if family in (OdeFamily.C_HR, OdeFamily.C_HR_MOD):
        return -np.sqrt(s) * g
    return np.zeros_like(g)


def initial_state(family: OdeFamily, obj: Objective, x0, s: float) -> tuple[PhaseState, float]:
    """Prescribed (x0, v0) and starting time for ``family``."""
    family = OdeFamily(family)
    if family.needs_s and not s > 0:
        raise ValueError(f"{family.value} requires s > 0")
    _check_mu(family, obj)
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    return PhaseState(x0.copy(), initial_velocity(family, obj, x0, s)), time_origin(family, s)
