"""Test objectives with known smoothness constants and minimizers.

Every objective carries its gradient, a Hessian-vector product, the
strong-convexity modulus ``mu`` and the gradient Lipschitz constant
``lipschitz``.  Non-quadratic minimizers are computed once by gradient
descent and cached, so repeated construction with the same arguments is
cheap and returns the same object.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

EPS = np.finfo(float).eps
MINIMIZER_TOL = 1e-12
MINIMIZER_MAX_ITER = 10_000_000


class MinimizerSearchError(RuntimeError):
    """Raised when the cached-minimizer search fails to reach tolerance."""


def fd_hessian_vector(gradient: Callable) -> Callable:
    """Directional derivative of ``gradient`` by central differences."""

    def hv(x, d):
        x = np.asarray(x, dtype=float)
        d = np.asarray(d, dtype=float)
        nd = np.linalg.norm(d)
        if nd == 0.0:
            return np.zeros_like(x)
        h = np.cbrt(EPS) * (1.0 + np.linalg.norm(x)) / nd
        return (gradient(x + h * d) - gradient(x - h * d)) / (2.0 * h)

    return hv


@dataclass(frozen=True, eq=False)
class Objective:
    """A smooth convex function together with its constants.

    ``matrix`` and ``linear`` are set only for quadratics
    f(x) = 0.5 x'Ax - b'x, which lets implicit steps use a direct solve.
    ``gap_fn`` optionally computes f(x) - f(x*) without the cancellation
    of subtracting two nearly equal function values.
    """

    dimension: int
    evaluate: Callable
    gradient: Callable
    hessian_vector: Optional[Callable]
    mu: float
    lipschitz: float
    minimizer: Optional[np.ndarray] = None
    min_value: Optional[float] = None
    name: str = "objective"
    matrix: Optional[np.ndarray] = None
    linear: Optional[np.ndarray] = None
    gap_fn: Optional[Callable] = field(default=None, repr=False)
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be positive")
        if not (0.0 <= self.mu <= self.lipschitz) or self.lipschitz <= 0.0:
            raise ValueError(f"need 0 <= mu <= lipschitz, lipschitz > 0 (got mu={self.mu}, L={self.lipschitz})")
        if self.hessian_vector is None:
            object.__setattr__(self, "hessian_vector", fd_hessian_vector(self.gradient))

    @property
    def is_quadratic(self) -> bool:
        return self.matrix is not None

    @property
    def strongly_convex(self) -> bool:
        return self.mu > 0.0

    def gap(self, x) -> float:
        """f(x) - f(x*)."""
        if self.min_value is None:
            raise ValueError(f"{self.name}: minimum value unknown")
        if self.gap_fn is not None:
            return float(self.gap_fn(np.asarray(x, dtype=float)))
        return float(self.evaluate(x) - self.min_value)

    def hessian(self, x) -> np.ndarray:
        """Dense Hessian, assembled column by column from hessian_vector."""
        if self.matrix is not None:
            return self.matrix
        eye = np.eye(self.dimension)
        cols = [self.hessian_vector(x, eye[i]) for i in range(self.dimension)]
        H = np.column_stack(cols)
        return 0.5 * (H + H.T)


@dataclass(frozen=True)
class ProblemInstance:
    objective: Objective
    x0: np.ndarray
    label: str = "problem"

    def __post_init__(self):
        x0 = np.asarray(self.x0, dtype=float).reshape(-1)
        if x0.shape[0] != self.objective.dimension:
            raise ValueError("x0 length does not match objective dimension")
        object.__setattr__(self, "x0", x0)

    @property
    def dist_sq(self) -> float:
        """||x0 - x*||^2."""
        d = self.x0 - self.objective.minimizer
        return float(d @ d)


def make_problem(obj: Objective, x0=None, label: str | None = None) -> ProblemInstance:
    """Wrap ``obj`` with a starting point (default: x* shifted by the all-ones vector)."""
    if x0 is None:
        x0 = np.asarray(obj.minimizer, dtype=float) + np.ones(obj.dimension)
    return ProblemInstance(obj, np.asarray(x0, dtype=float), label or obj.name)


def _gd_minimize(grad, L, x, tol=MINIMIZER_TOL, max_iter=MINIMIZER_MAX_ITER):
    step = 1.0 / L
    for _ in range(max_iter):
        g = grad(x)
        if not np.all(np.isfinite(g)):
            raise MinimizerSearchError("NaN encountered during minimizer search")
        if np.linalg.norm(g) <= tol:
            return x
        x = x - step * g
    raise MinimizerSearchError(f"gradient descent did not reach ||grad|| <= {tol} in {max_iter} iterations")


def _newton_polish(grad, hv, x, steps: int = 4):
    """A few Newton steps after the gradient-descent search; each is kept only if it shrinks ||grad||."""
    eye = np.eye(x.size)
    g = grad(x)
    for _ in range(steps):
        H = np.column_stack([hv(x, e) for e in eye])
        step = np.linalg.lstsq(0.5 * (H + H.T), -g, rcond=None)[0]
        x_new = x + step
        g_new = grad(x_new)
        if not np.linalg.norm(g_new) < np.linalg.norm(g):
            break
        x, g = x_new, g_new
    return x


# -- quadratics ---------------------------------------------------------------


def quadratic_from(A, b, mu=None, lipschitz=None, name="quadratic") -> Objective:
    """Quadratic 0.5 x'Ax - b'x from explicit data (A symmetric positive semidefinite)."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float).reshape(-1)
    eig = np.linalg.eigvalsh(A)
    mu = float(eig[0]) if mu is None else float(mu)
    lipschitz = float(eig[-1]) if lipschitz is None else float(lipschitz)
    xstar = np.linalg.solve(A, b)
    fstar = float(-0.5 * b @ xstar)

    def f(x):
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ (A @ x) - b @ x)

    def grad(x):
        return A @ np.asarray(x, dtype=float) - b

    def hv(x, d):
        return A @ np.asarray(d, dtype=float)

    def gap(x):
        d = x - xstar
        return 0.5 * float(d @ (A @ d))

    return Objective(
        dimension=A.shape[0], evaluate=f, gradient=grad, hessian_vector=hv,
        mu=mu, lipschitz=lipschitz, minimizer=xstar, min_value=fstar, name=name,
        matrix=A, linear=b, gap_fn=gap,
    )


@lru_cache(maxsize=None)
def make_quadratic(dim: int, mu: float, lipschitz: float, seed: int = 0, centered: bool = False) -> Objective:
    """Quadratic with eigenvalues evenly spaced over [mu, lipschitz].

    The eigenbasis is the Q factor of a seeded Gaussian matrix.  The
    minimizer is a seeded standard normal vector for dim >= 2; in one
    dimension, or with ``centered=True``, b = 0 and the minimizer is the
    origin.  A centered instance lets ||x_k - x*|| shrink all the way to
    the underflow threshold instead of stalling at eps * ||x*||.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if not (0 < mu <= lipschitz):
        raise ValueError("need 0 < mu <= lipschitz")
    rng = np.random.default_rng(seed)
    eigs = np.linspace(mu, lipschitz, dim)
    if dim == 1:
        A = np.array([[float(mu)]])
        b = np.zeros(1)
    else:
        Q, R = np.linalg.qr(rng.standard_normal((dim, dim)))
        Q = Q * np.sign(np.diag(R))
        A = (Q * eigs) @ Q.T
        A = 0.5 * (A + A.T)
        b = A @ rng.standard_normal(dim)
        if centered:
            b = np.zeros(dim)
    tag = ",centered" if centered else ""
    obj = quadratic_from(A, b, mu=mu, lipschitz=lipschitz,
                         name=f"quadratic(d={dim},mu={mu:g},L={lipschitz:g},seed={seed}{tag})")
    obj.params.update(kind="quadratic", dim=dim, mu=mu, L=lipschitz, seed=seed, centered=centered, eigenvalues=eigs)
    return obj


def make_scalar_quadratic(curvature: float = 1.0) -> Objective:
    """f(x) = curvature * x^2 / 2 in one dimension."""
    return make_quadratic(1, curvature, curvature, 0)


def balanced_start(obj: Objective, gap: float = 1.0) -> np.ndarray:
    """Starting point on a quadratic whose every eigenmode holds an equal share of ``gap``.

    Iteration counts from this start reflect the contraction rates only,
    not how much of the initial gap happens to sit in the slow modes.
    """
    if not obj.is_quadratic:
        raise ValueError("balanced_start needs a quadratic objective")
    w, U = np.linalg.eigh(obj.matrix)
    if w[0] <= 0:
        raise ValueError("balanced_start needs a positive definite matrix")
    d = U @ (1.0 / np.sqrt(w))
    d *= np.sqrt(2.0 * gap / float(d @ (obj.matrix @ d)))
    return obj.minimizer + d


# -- regularized logistic regression ------------------------------------------


def _expit(u):
    return 0.5 * (1.0 + np.tanh(0.5 * u))


def logistic_from(Z, y, reg: float, name="logistic") -> Objective:
    """Regularized logistic loss for data rows ``Z`` and labels ``y`` in {-1, +1}."""
    if reg <= 0:
        raise ValueError("reg must be positive")
    Z = np.asarray(Z, dtype=float)
    y = np.asarray(y, dtype=float)
    n, dim = Z.shape
    R = float(np.max(np.linalg.norm(Z, axis=1)))
    L = R * R / 4.0 + reg
    Zy = Z * y[:, None]

    def f(x):
        m = Zy @ x
        return float(np.mean(np.logaddexp(0.0, -m)) + 0.5 * reg * (x @ x))

    def grad(x):
        m = Zy @ x
        return -(Zy.T @ _expit(-m)) / n + reg * x

    def hv(x, d):
        m = Zy @ x
        w = _expit(m) * _expit(-m)
        return Z.T @ (w * (Z @ d)) / n + reg * d

    xstar = _newton_polish(grad, hv, _gd_minimize(grad, L, np.zeros(dim)))
    fstar = f(xstar)
    mstar = Zy @ xstar
    sig_star = _expit(-mstar)

    def gap(x):
        delta = Zy @ (xstar - x)  # change in -m, formed from x - x* to keep its relative accuracy
        near = np.abs(delta) < 1.0
        acc = np.log1p(sig_star * np.expm1(np.where(near, delta, 0.0)))
        direct = np.logaddexp(0.0, delta - mstar) - np.logaddexp(0.0, -mstar)
        loss = np.mean(np.where(near, acc, direct))
        return float(loss + 0.5 * reg * ((x - xstar) @ (x + xstar)))

    obj = Objective(
        dimension=dim, evaluate=f, gradient=grad, hessian_vector=hv, mu=float(reg),
        lipschitz=L, minimizer=xstar, min_value=fstar, name=name, gap_fn=gap,
    )
    obj.params.update(kind="logistic", num_samples=n, dim=dim, reg=reg, radius=R, Z=Z, y=y)
    return obj


@lru_cache(maxsize=None)
def make_logistic(num_samples: int, dim: int, reg: float, seed: int = 0) -> Objective:
    """Logistic regression on seeded synthetic data.

    Rows are standard normal scaled by 1/sqrt(dim); labels are the sign of a
    noisy planted linear model, so the data are not separable.
    """
    if reg <= 0:
        raise ValueError("reg must be positive")
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((num_samples, dim)) / np.sqrt(dim)
    w = rng.standard_normal(dim)
    y = np.sign(Z @ w + 0.5 * rng.standard_normal(num_samples))
    y[y == 0] = 1.0
    obj = logistic_from(Z, y, reg, name=f"logistic(n={num_samples},d={dim},reg={reg:g},seed={seed})")
    obj.params.update(seed=seed)
    return obj


# -- log-sum-exp --------------------------------------------------------------


def log_sum_exp_from(A, b, sharpness: float, name="log_sum_exp") -> Objective:
    """f(x) = rho * log sum_i exp((a_i'x - b_i)/rho), evaluated with a max shift."""
    if sharpness <= 0:
        raise ValueError("sharpness must be positive")
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    rho = float(sharpness)
    dim = A.shape[1]
    L = float(np.max(np.sum(A * A, axis=1))) / rho
    if L == 0.0:
        # constant function: any positive number bounds a zero gradient change
        L = 1.0

    def _u(x):
        return (A @ x - b) / rho

    def _softmax(u):
        e = np.exp(u - np.max(u))
        return e / np.sum(e)

    def f(x):
        u = _u(np.asarray(x, dtype=float))
        umax = np.max(u)
        val = rho * (umax + np.log(np.sum(np.exp(u - umax))))
        if not np.isfinite(val):
            raise FloatingPointError("log-sum-exp produced a non-finite value")
        return float(val)

    def grad(x):
        return A.T @ _softmax(_u(np.asarray(x, dtype=float)))

    def hv(x, d):
        p = _softmax(_u(np.asarray(x, dtype=float)))
        Ad = A @ d
        return A.T @ (p * (Ad - p @ Ad)) / rho

    xstar = _newton_polish(grad, hv, _gd_minimize(grad, L, np.zeros(dim)))
    fstar = f(xstar)
    ustar = _u(xstar)
    pstar = _softmax(ustar)

    def gap(x):
        delta = (A @ (x - xstar)) / rho
        if np.max(np.abs(delta)) < 1.0:
            return float(rho * np.log1p(pstar @ np.expm1(delta)))
        return f(x) - fstar

    obj = Objective(
        dimension=dim, evaluate=f, gradient=grad, hessian_vector=hv, mu=0.0,
        lipschitz=L, minimizer=xstar, min_value=fstar, name=name, gap_fn=gap,
    )
    obj.params.update(kind="log_sum_exp", dim=dim, sharpness=rho, A=A, b=b)
    return obj


@lru_cache(maxsize=None)
def make_log_sum_exp(dim: int, sharpness: float = 1.0, seed: int = 0) -> Objective:
    """Smoothed max of dim+1 seeded affine pieces.

    The slopes are Gaussian vectors re-centred by a positive (Dirichlet)
    weighting, so the origin lies inside their convex hull and the function
    is bounded below with an attained minimum.
    """
    if sharpness <= 0:
        raise ValueError("sharpness must be positive")
    rng = np.random.default_rng(seed)
    W = rng.standard_normal((dim + 1, dim))
    p = rng.dirichlet(np.ones(dim + 1))
    A = W - p @ W
    b = 0.5 * rng.standard_normal(dim + 1)
    obj = log_sum_exp_from(A, b, sharpness, name=f"log_sum_exp(d={dim},rho={sharpness:g},seed={seed})")
    obj.params.update(seed=seed)
    return obj


# -- finite-difference check --------------------------------------------------


@dataclass(frozen=True)
class GradientCheck:
    passed: bool
    gradient_error: float
    hessian_vector_error: float


def gradient_check(obj: Objective, x, tol: float = 1e-6, seed: int = 0) -> GradientCheck:
    """Compare analytic derivatives with central differences at ``x``.

    Errors are componentwise |analytic - fd| / (1 + |analytic|).
    """
    x = np.asarray(x, dtype=float)
    h = np.cbrt(EPS) * (1.0 + np.linalg.norm(x))
    g = obj.gradient(x)
    fd = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        fd[i] = (obj.evaluate(x + e) - obj.evaluate(x - e)) / (2.0 * h)
    gerr = float(np.max(np.abs(g - fd) / (1.0 + np.abs(g))))

    rng = np.random.default_rng(seed)
    d = rng.standard_normal(x.size)
    d /= np.linalg.norm(d)
    hv = obj.hessian_vector(x, d)
    hv_fd = (obj.gradient(x + h * d) - obj.gradient(x - h * d)) / (2.0 * h)
    herr = float(np.max(np.abs(hv - hv_fd) / (1.0 + np.abs(hv))))
    ok = bool(np.isfinite(gerr) and np.isfinite(herr) and gerr <= tol and herr <= tol)
    return GradientCheck(ok, gerr, herr)
