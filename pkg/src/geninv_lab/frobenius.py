"""Integral submanifolds of subspace distributions via graph operators.

A distribution ``x -> M(x)`` is written, near ``x0`` and relative to a fixed
complement ``E*`` of ``M0 = M(x0)``, as the graph of a linear map
``alpha(x): M0 -> E*``. An integral surface ``{v + psi(v)}`` then solves the
total differential equation ``psi'(v) = alpha(v + psi(v))``. Patches are
built by integrating that equation with RK4 along straight rays in ``M0``
coordinates; integrability is judged afterwards by path dependence and by
comparing the patch's tangent spaces with ``M``.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ._validation import as_vector
from .exceptions import DimensionError, DomainError, NotCofinal, StepError
from .subspace import (
    Projector,
    Subspace,
    direct_sum_gap,
    is_direct_sum,
    max_angle,
    oblique_projector,
    orthogonal_complement,
)

__all__ = [
    "DistributionFamily",
    "SplitFrame",
    "GraphOperator",
    "IntegralPatch",
    "split_frame",
    "graph_operator",
    "graph_subspace",
    "cofinal_membership",
    "alpha_field",
    "integrate_patch",
    "integrate_path",
    "integrability_residual",
    "verify_tangency",
    "BUILTIN_FAMILIES",
    "builtin_family",
]


@dataclass(frozen=True)
class DistributionFamily:
    """A rule ``x -> M(x)`` on a domain ``{x : domain_predicate(x)}``.

    ``subspace_at`` may return a :class:`Subspace` or a spanning matrix.
    """

    ambient_dim: int
    subspace_at: Callable
    domain_predicate: Optional[Callable] = None
    name: str = "family"

    def in_domain(self, x):
        return True if self.domain_predicate is None else bool(self.domain_predicate(x))

    def at(self, x):
        x = as_vector(x, "x", self.ambient_dim)
        if not self.in_domain(x):
            raise DomainError(f"{self.name}: point {x} lies outside the domain")
        s = self.subspace_at(x)
        if not isinstance(s, Subspace):
            s = Subspace(s, ambient_dim=self.ambient_dim)
        if s.ambient_dim != self.ambient_dim:
            raise ValueError(f"{self.name}: M(x) lives in R^{s.ambient_dim}, expected R^{self.ambient_dim}")
        return s


@dataclass(frozen=True)
class SplitFrame:
    """``E = M0 (+) E*`` at ``base_point`` with both oblique projectors."""

    base_point: np.ndarray
    m0: Subspace
    e_star: Subspace
    onto_m0: Projector
    onto_e_star: Projector

    @property
    def dim_m0(self):
        return self.m0.dim

    @property
    def dim_e_star(self):
        return self.e_star.dim

    def coords(self, x):
        """``(v, w)`` with ``x = B_M0 v + B_E* w``."""
        x = np.asarray(x, dtype=np.float64)
        return self.m0.basis.T @ (self.onto_m0.matrix @ x), self.e_star.basis.T @ (self.onto_e_star.matrix @ x)

    def point(self, v, w):
        return self.m0.basis @ np.asarray(v, dtype=np.float64) + self.e_star.basis @ np.asarray(w, dtype=np.float64)

    @property
    def base_coords(self):
        return self.coords(self.base_point)


def split_frame(family, x0, e_star=None):
    """Frame at ``x0``; ``E*`` defaults to the orthogonal complement of ``M(x0)``.

    Raises
    ------
    ComplementError
        If ``M(x0)`` and ``e_star`` are not complementary.
    """
    x0 = as_vector(x0, "x0", family.ambient_dim)
    m0 = family.at(x0)
    e_star = orthogonal_complement(m0) if e_star is None else e_star
    return SplitFrame(x0, m0, e_star, oblique_projector(m0, e_star), oblique_projector(e_star, m0))


@dataclass(frozen=True)
class GraphOperator:
    """``alpha: E0 -> E*`` in the orthonormal bases of ``e0`` and ``e_star``."""

    alpha: np.ndarray
    e0: Subspace
    e_star: Subspace

    def graph(self):
        """``{e + alpha e : e in E0}`` as a Subspace."""
        return graph_subspace(self.e0, self.e_star, self.alpha)


def graph_subspace(e0, e_star, alpha):
    alpha = np.asarray(alpha, dtype=np.float64).reshape(e_star.dim, e0.dim)
    return Subspace(e0.basis + e_star.basis @ alpha, ambient_dim=e0.ambient_dim)


def graph_operator(e0, e1, e_star):
    """The unique ``alpha`` with ``E1 = {e + alpha e : e in E0}``.

    ``alpha`` is the projection onto ``E*`` along ``E0`` composed with the
    projection onto ``E1`` along ``E*``, restricted to ``E0``.

    Raises
    ------
    ComplementError
        If ``E0 (+) E*`` or ``E1 (+) E*`` fails to be the whole space.
    """
    onto_e1 = oblique_projector(e1, e_star).matrix
    onto_star = oblique_projector(e_star, e0).matrix
    alpha = e_star.basis.T @ onto_star @ onto_e1 @ e0.basis
    return GraphOperator(alpha, e0, e_star)


def cofinal_membership(family, frame, x):
    """True iff ``M(x) (+) E* = E``. Raises DomainError off the domain."""
    return is_direct_sum(family.at(x), frame.e_star)


def alpha_field(family, frame, x):
    """Graph operator of ``M(x)`` over ``M0``; NotCofinal when it does not exist."""
    mx = family.at(x)
    if not is_direct_sum(mx, frame.e_star):
        raise NotCofinal(f"{family.name}: M(x) (+) E* fails at x = {np.asarray(x)}")
    return graph_operator(frame.m0, mx, frame.e_star)


class _FastAlpha:
    """``alpha(x)`` from one inversion of the frame ``[B_M0 B_E*]``.

    Writing ``B_M(x) = B_M0 K1 + B_E* K2`` gives ``alpha = K2 K1^{-1}``, which
    is the same operator as :func:`graph_operator` without rebuilding
    projectors at every ODE node.
    """

    def __init__(self, family, frame):
        self.family = family
        self.frame = frame
        self.k = frame.dim_m0
        # scipy's lu_solve returned corrupted results under concurrent threads, so invert once
        self.frame_inv = np.linalg.inv(np.hstack([frame.m0.basis, frame.e_star.basis]))

    def __call__(self, x):
        mx = self.family.at(x)
        if mx.dim != self.k:
            raise DimensionError(f"{self.family.name}: dim M(x) = {mx.dim} != {self.k} at x = {x}")
        if direct_sum_gap(mx, self.frame.e_star) <= 1e-10:
            raise NotCofinal(f"{self.family.name}: M(x) (+) E* fails at x = {x}")
        kmat = self.frame_inv @ mx.basis
        return np.linalg.solve(kmat[: self.k].T, kmat[self.k:].T).T


def _rk4_segment(rhs, s0, psi, length, ode_step):
    """Advance ``dpsi/ds = rhs(s, psi)`` from ``s0`` by ``length`` in equal RK4 steps <= ode_step."""
    n = max(1, math.ceil(length / ode_step - 1e-9))
    h = length / n
    s = s0
    for _ in range(n):
        k1 = rhs(s, psi)
        k2 = rhs(s + h / 2, psi + h / 2 * k1)
        k3 = rhs(s + h / 2, psi + h / 2 * k2)
        k4 = rhs(s + h, psi + h * k3)
        psi = psi + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        s += h
    return psi


def _ray_rhs(alpha, frame, start, direction):
    def rhs(s, psi):
        x = frame.point(start + s * direction, psi)
        return alpha(x) @ direction

    return rhs


def integrate_path(family, frame, path, ode_step=1e-3, psi0=None):
    """Integrate ``psi`` along a polyline of ``M0`` coordinates; returns ``psi`` at its end."""
    if not ode_step > 0:
        raise StepError(f"ode_step must be positive, got {ode_step}")
    alpha = _FastAlpha(family, frame)
    verts = [np.asarray(p, dtype=np.float64).reshape(frame.dim_m0) for p in path]
    psi = frame.base_coords[1] if psi0 is None else np.asarray(psi0, dtype=np.float64)
    for a, b in zip(verts[:-1], verts[1:]):
        length = float(np.linalg.norm(b - a))
        if length == 0.0:
            continue
        psi = _rk4_segment(_ray_rhs(alpha, frame, a, (b - a) / length), 0.0, psi, length, ode_step)
    return psi


@dataclass(frozen=True)
class IntegralPatch:
    """Samples of ``psi`` on a lattice in ``M0`` coordinates.

    ``lattice`` holds integer offsets from the base coordinate, ``grid`` the
    ``M0`` coordinates ``v0 + grid_step * lattice``, ``psi_values`` the
    ``E*`` coordinates of ``psi`` at each grid point.
    """

    frame: SplitFrame
    lattice: np.ndarray
    grid: np.ndarray
    psi_values: np.ndarray
    step: float
    grid_step: float

    def points(self):
        """Ambient points ``v + psi(v)`` of the integral surface."""
        return self.grid @ self.frame.m0.basis.T + self.psi_values @ self.frame.e_star.basis.T

    def base_index(self):
        return int(np.flatnonzero(~self.lattice.any(axis=1))[0])


def _lattice(dim, radius, grid_step):
    reach = int(math.floor(radius / grid_step + 1e-9))
    axes = [np.arange(-reach, reach + 1)] * dim
    pts = np.array(np.meshgrid(*axes, indexing="ij")).reshape(dim, -1).T
    keep = np.linalg.norm(pts * grid_step, axis=1) <= radius + 1e-12
    return pts[keep]


def _rays(lattice):
    """Group nonzero lattice points by primitive direction, ordered by multiple."""
    rays = {}
    for idx, p in enumerate(lattice):
        if not p.any():
            continue
        g = math.gcd(*(int(abs(c)) for c in p))
        rays.setdefault(tuple(int(c) // g for c in p), []).append((g, idx))
    return [(np.array(d), sorted(members)) for d, members in sorted(rays.items())]


def integrate_patch(family, frame, radius, grid_step=1e-2, ode_step=1e-3, threads=1):
    """Sample an integral surface through ``x0`` on a lattice within ``radius``.

    Every ray from the base coordinate through a primitive lattice direction is
    integrated once, recording ``psi`` at each lattice multiple along it.

    Raises
    ------
    StepError
        If ``ode_step`` or ``grid_step`` is not positive.
    NotCofinal, DomainError, DimensionError
        If a ray leaves the co-final set or the domain, or ``dim M`` changes.
    """
    if not ode_step > 0:
        raise StepError(f"ode_step must be positive, got {ode_step}")
    if not grid_step > 0:
        raise StepError(f"grid_step must be positive, got {grid_step}")
    alpha = _FastAlpha(family, frame)
    v0, psi0 = frame.base_coords
    alpha(frame.base_point)
    lattice = _lattice(frame.dim_m0, radius, grid_step)
    psi = np.empty((len(lattice), frame.dim_e_star))

    def run(ray):
        d, members = ray
        step_len = float(np.linalg.norm(d)) * grid_step
        rhs = _ray_rhs(alpha, frame, v0, d * grid_step / step_len)
        out, cur, s = [], psi0.copy(), 0.0
        for mult, idx in members:
            target = mult * step_len
            cur = _rk4_segment(rhs, s, cur, target - s, ode_step)
            s = target
            out.append((idx, cur))
        return out

    rays = _rays(lattice)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, rays))
    else:
        results = [run(r) for r in rays]
    for chunk in results:
        for idx, val in chunk:
            psi[idx] = val
    base = ~lattice.any(axis=1)
    psi[base] = psi0
    grid = v0 + grid_step * lattice
    patch = IntegralPatch(frame, lattice, grid, psi, float(ode_step), float(grid_step))
    for x in patch.points():
        if not cofinal_membership(family, frame, x):
            raise NotCofinal(f"{family.name}: patch point {x} is not co-final")
    return patch


def integrability_residual(family, frame, target, paths, ode_step=1e-3):
    """``||psi_path1(target) - psi_path2(target)||`` for two polylines from the base coordinate."""
    target = np.asarray(target, dtype=np.float64).reshape(frame.dim_m0)
    v0 = frame.base_coords[0]
    if len(paths) != 2:
        raise ValueError("exactly two paths are required")
    ends = []
    for path in paths:
        verts = [np.asarray(p, dtype=np.float64).reshape(frame.dim_m0) for p in path]
        if np.linalg.norm(verts[0] - v0) > 1e-12 or np.linalg.norm(verts[-1] - target) > 1e-12:
            raise ValueError("each path must run from the base coordinate to the target")
        ends.append(integrate_path(family, frame, verts, ode_step))
    return float(np.linalg.norm(ends[0] - ends[1]))


def _fd_weights(offsets, at):
    """Weights ``w`` with ``sum w_i f(offsets_i) ~ f'(at)`` (unit spacing)."""
    offsets = np.asarray(offsets, dtype=np.float64) - at
    k = offsets.size
    vander = np.vander(offsets, k, increasing=True).T
    rhs = np.zeros(k)
    rhs[1] = 1.0
    return np.linalg.solve(vander, rhs)


def _patch_derivative(patch, lookup, idx, window=5):
    """``psi'`` at grid point ``idx`` (E* x M0 coordinates) or None if a run is too short."""
    p = patch.lattice[idx]
    k = patch.lattice.shape[1]
    cols = []
    for axis in range(k):
        lo = hi = 0
        e = np.zeros(k, dtype=int)
        e[axis] = 1
        while lo > 1 - window and tuple(p + (lo - 1) * e) in lookup:
            lo -= 1
        while hi < window - 1 and tuple(p + (hi + 1) * e) in lookup:
            hi += 1
        run = hi - lo + 1
        if run < 3:
            return None
        width = min(window, run)
        start = min(max(-(width // 2), lo), hi - width + 1)
        offs = np.arange(start, start + width)
        w = _fd_weights(offs, 0.0)
        vals = np.array([patch.psi_values[lookup[tuple(p + o * e)]] for o in offs])
        cols.append(w @ vals / patch.grid_step)
    return np.column_stack(cols)


def verify_tangency(patch, family):
    """Max principal angle between ``(I + psi') M0`` and ``M(v + psi(v))`` over the grid.

    ``psi'`` comes from finite differences on the patch lattice (five-point
    stencils, shifted inward at the boundary). Points whose lattice run along
    some axis has fewer than three samples are skipped.
    """
    frame = patch.frame
    lookup = {tuple(int(c) for c in p): i for i, p in enumerate(patch.lattice)}
    points = patch.points()
    worst = 0.0
    for idx in range(len(patch.lattice)):
        dpsi = _patch_derivative(patch, lookup, idx)
        if dpsi is None:
            continue
        tangent = graph_subspace(frame.m0, frame.e_star, dpsi)
        worst = max(worst, max_angle(tangent, family.at(points[idx])))
    return worst


def _circle():
    fam = DistributionFamily(
        2,
        lambda p: np.array([[p[1]], [-p[0]]]),
        lambda p: bool(np.linalg.norm(p) > 0),
        name="circle",
    )
    return fam, np.array([0.0, 1.0]), Subspace(np.array([[0.0], [1.0]])), lambda v: np.sqrt(1.0 - v[..., :1] ** 2)


def _paraboloid():
    fam = DistributionFamily(
        3,
        lambda p: np.array([[1.0, 0.0], [0.0, 1.0], [2 * p[0], 2 * p[1]]]),
        name="paraboloid",
    )
    return fam, np.zeros(3), Subspace(np.array([[0.0], [0.0], [1.0]])), lambda v: (v**2).sum(axis=-1, keepdims=True)


def _contact():
    fam = DistributionFamily(
        3,
        lambda p: np.array([[1.0, 0.0], [0.0, 1.0], [p[1], 0.0]]),
        name="contact",
    )
    return fam, np.zeros(3), Subspace(np.array([[0.0], [0.0], [1.0]])), None


def _operator_2x2():
    from .charts import OperatorPoint, tangent_space_basis

    fam = DistributionFamily(
        4,
        lambda p: tangent_space_basis(OperatorPoint.moore_penrose(p.reshape(2, 2))).vec_space,
        name="operator-2x2",
    )
    unit22 = np.zeros((4, 1))
    unit22[3, 0] = 1.0
    return fam, np.array([1.0, 0.0, 0.0, 0.0]), Subspace(unit22), None


BUILTIN_FAMILIES = {
    "circle": _circle,
    "paraboloid": _paraboloid,
    "contact": _contact,
    "operator-2x2": _operator_2x2,
}


def builtin_family(name):
    """Return ``(family, x0, E*, exact_psi or None)`` for a registered family."""
    try:
        return BUILTIN_FAMILIES[name]()
    except KeyError:
        raise KeyError(f"unknown family {name!r}; choose from {sorted(BUILTIN_FAMILIES)}") from None
