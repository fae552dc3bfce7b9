"""Hand-written references for the tests.

Each scheme is written out on one Hessian eigenmode f = lam x^2 / 2 (minimizer
0) directly from its displayed update, with the implicit equations solved by
hand.  Nothing here calls the package's stepping code.
"""
import numpy as np

CONVEX = ("C_HR", "C_HR_MOD", "LOW_C")


def _damping_weight(family, rule, mu, s, k):
    """(damping d, gradient weight w, correction flag) as displayed for the rule."""
    m = np.sqrt(mu * s)
    if family == "SC_HR":
        if rule == "CLASSICAL":
            return 2 * m / (1 - m), (1 + m) / (1 - m), True
        return 2 * m, 1 + m, True
    if family == "HB_HR":
        if rule == "CLASSICAL":
            return 2 * m / (1 - m), (1 + m) / (1 - m), False
        return 2 * m, 1 + m, False
    if family == "LOW_SC":
        return 2 * m, 1.0, False
    if rule == "EXPLICIT":
        if family == "C_HR_MOD":
            return 3 / k, (k + 3) / k, True
        if family == "C_HR":
            return 3 / k, (2 * k + 3) / (2 * k), True
        return 3 / k, 1.0, False
    if family == "C_HR_MOD":
        return 3 / (k + 1), (k + 4) / (k + 1), True
    if family == "C_HR":
        return 3 / (k + 1), (2 * k + 5) / (2 * k + 2), True
    return 3 / (k + 1), 1.0, False


def mode_step(family, rule, lam, mu, s, k, x, v):
    if family == "GRAD_FLOW":
        if rule == "IMPLICIT":
            return x / (1 + s * lam), 0.0
        return x - s * lam * x, 0.0
    if family in CONVEX and rule == "EXPLICIT" and k == 0:
        rule = "SYMPLECTIC"
    if family == "C_HR_MOD" and rule == "CLASSICAL":
        rule = "SYMPLECTIC"
    r = np.sqrt(s)
    d, w, corr = _damping_weight(family, rule, mu, s, k)
    c = 1.0 if corr else 0.0
    if rule == "EXPLICIT":
        x1 = x + r * v
        v1 = v - d * v - c * r * lam * (x1 - x) - r * w * lam * x
    elif rule == "IMPLICIT":
        # (1+d) v1 = v - c r lam (x1 - x) - r w lam x1 with x1 = x + r v1
        v1 = (v - r * w * lam * x) / (1 + d + c * s * lam + s * w * lam)
        x1 = x + r * v1
    else:  # symplectic and the classical phase forms
        x1 = x + r * v
        v1 = (v - c * r * lam * (x1 - x) - r * w * lam * x1) / (1 + d)
    return x1, v1


def initial_mode_velocity(family, lam, mu, s, x0):
    g = lam * x0
    if family in ("SC_HR", "HB_HR"):
        return -2 * np.sqrt(s) * g / (1 + np.sqrt(mu * s))
    if family in ("C_HR", "C_HR_MOD"):
        return -np.sqrt(s) * g
    return 0.0 * g


def mode_iterates(family, rule, A, b, mu, s, x0, n):
    """x_0..x_n of the scheme on f = x'Ax/2 - b'x, one eigenmode at a time."""
    lam, U = np.linalg.eigh(np.asarray(A, dtype=float))
    xstar = np.linalg.solve(A, b)
    z = U.T @ (np.asarray(x0, dtype=float) - xstar)
    out = np.empty((n + 1, len(z)))
    for i, (li, zi) in enumerate(zip(lam, z)):
        x, v = zi, initial_mode_velocity(family, li, mu, s, zi)
        out[0, i] = x
        for k in range(n):
            x, v = mode_step(family, rule, li, mu, s, k, x, v)
            out[k + 1, i] = x
    return xstar + out @ U.T


def mode_matrix(family, rule, lam, mu, s, k=0):
    """2x2 one-step matrix on (x, v), assembled from mode_step by linearity."""
    c0 = mode_step(family, rule, lam, mu, s, k, 1.0, 0.0)
    c1 = mode_step(family, rule, lam, mu, s, k, 0.0, 1.0)
    return np.array([[c0[0], c1[0]], [c0[1], c1[1]]], dtype=float)


def scalar_gd_gap(s, k):
    """f = x^2/2 from x0 = 1: x_k = (1-s)^k, gap (1-s)^(2k)/2."""
    return 0.5 * (1 - s) ** (2 * k)
