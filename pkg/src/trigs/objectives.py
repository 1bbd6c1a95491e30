"""Convex test problems with values, gradients, proximal maps and ground truth.

Every objective is finite dimensional and dense.  A problem may be smooth
(``grad`` present), prox-friendly (``prox`` present) or both.  When the
minimum-norm minimizer is known it is stored so that strong convergence can
be measured directly.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import scipy.linalg

Array = np.ndarray

# identity checks: absolute + relative
ATOL = 1e-10
RTOL = 1e-8


@dataclass(frozen=True)
class Objective:
    """A convex function on R^dim.

    ``prox(theta, x)`` returns ``argmin_u f(u) + |u - x|^2 / (2 theta)``.
    ``known_min_norm_solution`` is the projection of the origin onto argmin f.
    """

    name: str
    dim: int
    value: Callable[[Array], float]
    grad: Optional[Callable[[Array], Array]] = None
    prox: Optional[Callable[[float, Array], Array]] = None
    strong_convexity: float = 0.0
    known_min_value: Optional[float] = None
    known_min_norm_solution: Optional[Array] = field(default=None, repr=False)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be positive, got {self.dim}")
        if self.strong_convexity < 0:
            raise ValueError("strong_convexity must be nonnegative")

    @property
    def smooth(self) -> bool:
        return self.grad is not None

    @property
    def has_prox(self) -> bool:
        return self.prox is not None

    def __call__(self, x) -> float:
        return self.value(np.asarray(x, dtype=float))

    def gradient(self, x) -> Array:
        if self.grad is None:
            raise ValueError(f"objective {self.name!r} has no gradient")
        return self.grad(np.asarray(x, dtype=float))

    def proximal(self, theta: float, x) -> Array:
        if self.prox is None:
            raise ValueError(f"objective {self.name!r} has no proximal map")
        if theta <= 0:
            raise ValueError(f"prox step must be positive, got {theta}")
        return self.prox(theta, np.asarray(x, dtype=float))

    def gap(self, x) -> float:
        """f(x) - min f, or nan when the minimum value is unknown."""
        if self.known_min_value is None:
            return float("nan")
        return self(x) - self.known_min_value


def make_least_squares(A, b, name: str | None = None) -> Objective:
    """f(x) = 0.5 |Ax - b|^2 with exact prox and minimum-norm solution.

    The minimum-norm solution comes from an SVD-based least-squares solve,
    which shares nothing with the Cholesky solve used by the prox.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if A.ndim != 2 or b.ndim != 1 or A.shape[0] != b.shape[0]:
        raise ValueError(f"dimension mismatch: A is {A.shape}, b is {b.shape}")
    if not np.any(A):
        raise ValueError("A must be nonzero")
    m, n = A.shape
    AtA = A.T @ A
    Atb = A.T @ b

    x_star, *_ = np.linalg.lstsq(A, b, rcond=None)
    r = A @ x_star - b
    f_star = 0.5 * float(r @ r)

    eig = np.linalg.eigvalsh(AtA)
    rank = np.linalg.matrix_rank(A)
    mu = float(eig[0]) if rank == n else 0.0

    factors: dict[float, tuple] = {}

    def value(x):
        r = A @ x - b
        return 0.5 * float(r @ r)

    def grad(x):
        return A.T @ (A @ x - b)

    def prox(theta, z):
        cf = factors.get(theta)
        if cf is None:
            cf = scipy.linalg.cho_factor(np.eye(n) + theta * AtA)
            if len(factors) < 64:
                factors[theta] = cf
        return scipy.linalg.cho_solve(cf, z + theta * Atb)

    return Objective(
        name=name or f"least_squares({m}x{n})",
        dim=n,
        value=value,
        grad=grad,
        prox=prox,
        strong_convexity=mu,
        known_min_value=f_star,
        known_min_norm_solution=x_star,
    )


def make_quad1d() -> Objective:
    """f(x) = x^2 / 2 on the real line."""
    return make_least_squares([[1.0]], [0.0], name="quad1d")


def make_abs(dim: int = 1) -> Objective:
    """f(x) = sum |x_i|; nonsmooth, prox is soft thresholding."""

    def prox(theta, x):
        return np.sign(x) * np.maximum(np.abs(x) - theta, 0.0)

    return Objective(
        name="abs",
        dim=dim,
        value=lambda x: float(np.sum(np.abs(x))),
        prox=prox,
        known_min_value=0.0,
        known_min_norm_solution=np.zeros(dim),
    )


def make_zero(dim: int) -> Objective:
    """f = 0: every point minimizes, the minimum-norm one is the origin."""
    return Objective(
        name=f"zero:{dim}",
        dim=dim,
        value=lambda x: 0.0,
        grad=lambda x: np.zeros_like(x),
        prox=lambda theta, x: np.array(x, dtype=float, copy=True),
        known_min_value=0.0,
        known_min_norm_solution=np.zeros(dim),
    )


def translate(obj: Objective, shift) -> Objective:
    """g(z) = f(z + shift).

    The minimum-norm solution of g is not the shifted one of f in general,
    so it is dropped.
    """
    shift = np.asarray(shift, dtype=float)
    grad = prox = None
    if obj.grad is not None:
        grad = lambda z: obj.grad(z + shift)  # noqa: E731
    if obj.prox is not None:
        prox = lambda theta, z: obj.prox(theta, z + shift) - shift  # noqa: E731
    return Objective(
        name=f"{obj.name}+shift",
        dim=obj.dim,
        value=lambda z: obj.value(z + shift),
        grad=grad,
        prox=prox,
        strong_convexity=obj.strong_convexity,
        known_min_value=obj.known_min_value,
    )


def grad_check(obj: Objective, points, h: float = 1e-6) -> float:
    """Max over points and coordinates of |central difference - grad_i| / (1 + |grad_i|)."""
    if obj.grad is None:
        raise ValueError(f"objective {obj.name!r} has no gradient")
    worst = 0.0
    for x in np.atleast_2d(np.asarray(points, dtype=float)):
        g = obj.grad(x)
        for i in range(obj.dim):
            e = np.zeros(obj.dim)
            e[i] = h
            fd = (obj.value(x + e) - obj.value(x - e)) / (2 * h)
            worst = max(worst, abs(fd - g[i]) / (1 + abs(g[i])))
    return worst


def prox_residual(obj: Objective, theta: float, x) -> float:
    """|x - z - theta grad f(z)| for z = prox(theta, x); zero for an exact prox."""
    x = np.asarray(x, dtype=float)
    z = obj.proximal(theta, x)
    return float(np.linalg.norm(x - z - theta * obj.gradient(z)))


def midpoint_convexity_violation(obj: Objective, xs, ys) -> float:
    """Largest f((x+y)/2) - (f(x)+f(y))/2 over the sampled pairs (<= 0 if convex)."""
    worst = -np.inf
    for x, y in zip(np.atleast_2d(xs), np.atleast_2d(ys)):
        worst = max(worst, obj((x + y) / 2) - (obj(x) + obj(y)) / 2)
    return float(worst)


def read_matrix_file(path) -> tuple[Array, Array]:
    """Plain-text least-squares data: "m n", then m rows of A, then b."""
    rows = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not rows or len(rows[0]) != 2:
        raise ValueError(f"{path}: first line must be 'm n'")
    m, n = int(rows[0][0]), int(rows[0][1])
    if len(rows) != m + 2:
        raise ValueError(f"{path}: expected {m + 2} nonblank lines, found {len(rows)}")
    A = np.array([[float(v) for v in r] for r in rows[1 : m + 1]])
    b = np.array([float(v) for v in rows[m + 1]])
    if A.shape != (m, n):
        raise ValueError(f"{path}: A rows must have {n} entries")
    if b.shape != (m,):
        raise ValueError(f"{path}: b must have {m} entries")
    return A, b


PROBLEMS = {
    "ls:<a>,<b>": "f(x, y) = 0.5 (a x + b y)^2, degenerate 1x2 least squares",
    "quad1d": "f(x) = 0.5 x^2",
    "abs": "f(x) = |x| (nonsmooth, prox only)",
    "zero:<n>": "f = 0 on R^n",
    "matrix:<path>": "0.5 |Ax - b|^2 read from a plain-text file",
}


def resolve_problem(spec: str) -> Objective:
    """Build an objective from a registry string such as ``ls:2,1``."""
    spec = spec.strip()
    head, _, arg = spec.partition(":")
    try:
        if head == "ls":
            a, b = (float(v) for v in arg.split(","))
            return make_least_squares([[a, b]], [0.0], name=spec)
        if head == "quad1d" and not arg:
            return make_quad1d()
        if head == "abs":
            return make_abs(int(arg) if arg else 1)
        if head == "zero":
            return make_zero(int(arg))
        if head == "matrix":
            A, b = read_matrix_file(arg)
            return make_least_squares(A, b, name=spec)
    except (ValueError, TypeError) as exc:
        raise ValueError(f"bad problem spec {spec!r}: {exc}") from None
    raise ValueError(f"unknown problem spec {spec!r}; known: {', '.join(PROBLEMS)}")
