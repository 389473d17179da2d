"""Executable rank theorem: conjugate a smooth map to its derivative.

Given ``f`` with ``T0 = f'(x0)`` and a generalized inverse ``T0+``::

    phi(x) = T0+ (f(x) - f(x0)) + (I - T0+ T0)(x - x0)
    psi(y) = f(phi^{-1}(T0+ y)) + (I - T0 T0+) y

Both have identity derivative at their base points, and
``f = psi o T0 o phi`` near ``x0`` exactly when ``x0`` is a locally fine
point of ``x -> f'(x)``. ``phi^{-1}`` is evaluated by Newton iteration.
"""
import dataclasses
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ._validation import as_matrix, as_vector, spectral_norm
from .exceptions import NeighborhoodError, NoConvergence, NotAGenInverse, SingularJacobian
from .geninv import SampledFamily, gen_inverse_residual, mp_inverse

__all__ = [
    "SmoothMap",
    "ConjugacyPair",
    "finite_difference_jacobian",
    "build_phi",
    "phi_jacobian",
    "build_psi",
    "estimate_valid_radius",
    "invert_phi",
    "local_conjugacy",
    "verify_conjugacy",
    "jacobian_family",
    "BUILTIN_MAPS",
    "builtin_map",
]


def finite_difference_jacobian(fun, x, step=1e-6):
    """Central-difference Jacobian of ``fun`` at ``x``."""
    x = as_vector(x)
    cols = []
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = step
        cols.append((np.asarray(fun(x + e), dtype=float) - np.asarray(fun(x - e), dtype=float)) / (2 * step))
    return np.column_stack(cols)


@dataclass(frozen=True)
class SmoothMap:
    """A c^1 map ``R^domain_dim -> R^codomain_dim`` with an analytic Jacobian.

    The Jacobian is spot-checked against central differences (step 1e-6,
    relative error 1e-5) at three seeded points in the unit cube on
    construction; pass ``check=False`` to skip.
    """

    domain_dim: int
    codomain_dim: int
    eval: Callable
    jacobian: Callable
    name: str = "map"
    check: bool = True

    def __post_init__(self):
        if not self.check:
            return
        rng = np.random.default_rng(20240601)
        for _ in range(3):
            x = rng.uniform(-0.5, 0.5, self.domain_dim)
            jac = self.jac(x)
            fd = finite_difference_jacobian(self, x)
            err = spectral_norm(jac - fd) / max(1.0, spectral_norm(jac))
            if err > 1e-5:
                raise ValueError(f"{self.name}: Jacobian disagrees with finite differences ({err:.2e})")

    def __call__(self, x):
        return as_vector(self.eval(as_vector(x, dim=self.domain_dim)), "f(x)", self.codomain_dim)

    def jac(self, x):
        j = as_matrix(self.jacobian(as_vector(x, dim=self.domain_dim)), "f'(x)")
        if j.shape != (self.codomain_dim, self.domain_dim):
            raise ValueError(f"{self.name}: Jacobian has shape {j.shape}")
        return j


def _check_inverse(t0, t0_plus, tol=1e-8):
    t0_plus = as_matrix(t0_plus, "T0_plus")
    if t0_plus.shape != t0.shape[::-1]:
        raise NotAGenInverse(f"T0_plus has shape {t0_plus.shape}, expected {t0.shape[::-1]}")
    resid = gen_inverse_residual(t0, t0_plus)
    if resid > tol:
        raise NotAGenInverse(f"T0_plus is not a generalized inverse of f'(x0) (residual {resid:.2e})")
    return t0_plus


def build_phi(f, x0, t0_plus):
    """Domain straightening map ``phi`` with ``phi(x0) = 0`` and ``phi'(x0) = I``."""
    x0 = as_vector(x0, "x0", f.domain_dim)
    t0 = f.jac(x0)
    t0_plus = _check_inverse(t0, t0_plus)
    fx0 = f(x0)
    kernel_proj = np.eye(f.domain_dim) - t0_plus @ t0

    def phi(x):
        x = as_vector(x, dim=f.domain_dim)
        return t0_plus @ (f(x) - fx0) + kernel_proj @ (x - x0)

    return phi


def phi_jacobian(f, x0, t0_plus, x):
    """``phi'(x) = T0+ f'(x) + (I - T0+ T0)``."""
    t0 = f.jac(x0)
    return t0_plus @ f.jac(x) + np.eye(f.domain_dim) - t0_plus @ t0


@dataclass(frozen=True)
class ConjugacyPair:
    base_point: np.ndarray
    t0: np.ndarray
    t0_plus: np.ndarray
    phi: Callable
    psi: Callable
    valid_radius: float


def estimate_valid_radius(f, x0, t0_plus, probes=10, seed=0, step=1e-4):
    """Heuristic chart radius ``0.5 / (||T0+|| L)``.

    ``L`` is the largest difference quotient of ``f'`` over ``probes`` random
    pairs in the unit ball around ``x0``. Returns ``inf`` when ``f'`` looks
    constant.
    """
    x0 = as_vector(x0, "x0", f.domain_dim)
    rng = np.random.default_rng(seed)
    lip = 0.0
    for _ in range(probes):
        u = rng.standard_normal(f.domain_dim)
        u *= rng.uniform() ** (1.0 / f.domain_dim) / np.linalg.norm(u)
        d = rng.standard_normal(f.domain_dim)
        d *= step / np.linalg.norm(d)
        x = x0 + u
        lip = max(lip, spectral_norm(f.jac(x + d) - f.jac(x)) / step)
    norm_plus = spectral_norm(t0_plus)
    if lip <= 1e-12 or norm_plus == 0.0:
        return float("inf")
    return 0.5 / (norm_plus * lip)


def invert_phi(pair, f, y, tol=1e-12, max_iter=50):
    """Solve ``phi(x) = y`` by Newton iteration from ``x0 + y``.

    Raises
    ------
    NeighborhoodError
        If ``||y|| >= valid_radius``.
    NoConvergence
        If ``||phi(x) - y|| > tol`` after ``max_iter`` steps.
    SingularJacobian
        If a Newton system is numerically singular.
    """
    y = as_vector(y, "y", f.domain_dim)
    if not np.linalg.norm(y) < pair.valid_radius:
        raise NeighborhoodError(f"||y|| = {np.linalg.norm(y):.4g} exceeds valid radius {pair.valid_radius:.4g}")
    x = pair.base_point + y
    for _ in range(max_iter):
        resid = pair.phi(x) - y
        if np.linalg.norm(resid) <= tol:
            return x
        jac = phi_jacobian(f, pair.base_point, pair.t0_plus, x)
        if np.linalg.cond(jac) > 1e12:
            raise SingularJacobian(f"phi'(x) is singular at x = {x}")
        x = x - np.linalg.solve(jac, resid)
    if np.linalg.norm(pair.phi(x) - y) <= tol:
        return x
    raise NoConvergence(f"Newton did not reach {tol:g} in {max_iter} iterations")


def build_psi(f, pair, t0_plus=None):
    """Codomain map ``psi`` with ``psi(0) = f(x0)`` and ``psi'(0) = I``."""
    t0_plus = pair.t0_plus if t0_plus is None else as_matrix(t0_plus, "T0_plus")
    range_comp = np.eye(f.codomain_dim) - pair.t0 @ t0_plus

    def psi(y):
        y = as_vector(y, dim=f.codomain_dim)
        return f(invert_phi(pair, f, t0_plus @ y)) + range_comp @ y

    return psi


def local_conjugacy(f, x0, t0_plus=None, radius=None):
    """Build ``(phi, psi)`` conjugating ``f`` to ``f'(x0)`` near ``x0``.

    ``t0_plus`` defaults to the Moore-Penrose inverse of ``f'(x0)``;
    ``radius`` defaults to :func:`estimate_valid_radius`.
    """
    x0 = as_vector(x0, "x0", f.domain_dim)
    t0 = f.jac(x0)
    t0_plus = mp_inverse(t0) if t0_plus is None else _check_inverse(t0, t0_plus)
    phi = build_phi(f, x0, t0_plus)
    if radius is None:
        radius = estimate_valid_radius(f, x0, t0_plus)
    pair = ConjugacyPair(x0, t0, t0_plus, phi, None, float(radius))
    pair = dataclasses.replace(pair, psi=build_psi(f, pair, t0_plus))
    if np.linalg.norm(pair.phi(x0)) > 1e-10:
        raise AssertionError("phi(x0) != 0")
    if np.linalg.norm(pair.psi(np.zeros(f.codomain_dim)) - f(x0)) > 1e-10:
        raise AssertionError("psi(0) != f(x0)")
    return pair


def verify_conjugacy(pair, f, samples):
    """Max over samples of ``||f(x) - psi(T0 phi(x))||``."""
    worst = 0.0
    for x in samples:
        x = as_vector(x, dim=f.domain_dim)
        if not np.linalg.norm(x - pair.base_point) < pair.valid_radius:
            raise NeighborhoodError(f"sample {x} lies outside the valid radius")
        resid = f(x) - pair.psi(pair.t0 @ pair.phi(x))
        worst = max(worst, float(np.linalg.norm(resid)))
    return worst


def jacobian_family(f, x0, samples):
    """Sampled operator family ``x -> f'(x)`` with ``x0`` as base point."""
    x0 = as_vector(x0, "x0", f.domain_dim)
    points = [x0] + [as_vector(x, dim=f.domain_dim) for x in samples]
    return SampledFamily(points, [f.jac(x) for x in points], 0)


def _parabola():
    return SmoothMap(
        2, 2,
        lambda p: np.array([p[0], p[0] ** 2]),
        lambda p: np.array([[1.0, 0.0], [2 * p[0], 0.0]]),
        name="parabola",
    )


def _sine():
    return SmoothMap(1, 1, lambda p: np.sin(p), lambda p: np.array([[np.cos(p[0])]]), name="sine")


def _rank_jump():
    return SmoothMap(
        2, 2,
        lambda p: np.array([p[0], p[0] ** 2 + p[1] ** 2]),
        lambda p: np.array([[1.0, 0.0], [2 * p[0], 2 * p[1]]]),
        name="rank-jump",
    )


def _cubic_3d(seed=7):
    # f = M h(L x) with h an immersion R^2 -> R^3 and L onto, so rank f' = 2 everywhere.
    rng = np.random.default_rng(seed)
    lin = np.linalg.qr(rng.standard_normal((3, 2)))[0].T
    mix = np.eye(3) + 0.3 * rng.standard_normal((3, 3))

    def h(u):
        return np.array([u[0], u[1], u[0] ** 2 + u[0] * u[1] + u[1] ** 3])

    def dh(u):
        return np.array([[1.0, 0.0], [0.0, 1.0], [2 * u[0] + u[1], u[0] + 3 * u[1] ** 2]])

    return SmoothMap(
        3, 3,
        lambda p: mix @ h(lin @ p),
        lambda p: mix @ dh(lin @ p) @ lin,
        name="cubic-3d",
    )


BUILTIN_MAPS = {
    "parabola": (_parabola, (0.0, 0.0)),
    "sine": (_sine, (0.0,)),
    "rank-jump": (_rank_jump, (0.0, 0.0)),
    "cubic-3d": (_cubic_3d, (0.0, 0.0, 0.0)),
}


def builtin_map(name):
    """Return ``(SmoothMap, default base point)`` for a registered map name."""
    try:
        factory, x0 = BUILTIN_MAPS[name]
    except KeyError:
        raise KeyError(f"unknown map {name!r}; choose from {sorted(BUILTIN_MAPS)}") from None
    return factory(), np.array(x0, dtype=float)
