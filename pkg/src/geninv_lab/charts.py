"""Tangent spaces and charts of fixed-rank operator classes.

For an operator ``X`` (m x n) with generalized inverse ``X+``:

* ``M(X) = {T : T N(X) in R(X)}`` has dimension ``r (m + n - r)``;
* ``E_X = {(I - X X+) T (I - X+ X)}`` complements it, dimension ``(m - r)(n - r)``;
* every ``T`` splits as ``X X+ T + (I - X X+) T X+ X + (I - X X+) T (I - X+ X)``;
* ``chart(T) = (T - X) X+ X + C^{-1} T`` with ``C = I + (T - X) X+`` is a
  diffeomorphism of the ball ``||T - X|| < ||X+||^{-1}`` onto itself that
  straightens the rank-r operators near ``X`` onto ``M(X)``.

Operator subspaces use the trace inner product ``<S, T> = trace(S^T T)``,
i.e. the Euclidean product of row-major vectorizations.
"""
from dataclasses import dataclass

import numpy as np

from ._validation import NEIGHBORHOOD_MARGIN, as_matrix, check_same_shape, spectral_norm
from .exceptions import NeighborhoodError
from .geninv import GenInverse, _c_factor
from .subspace import (
    Subspace,
    _canonical_basis,
    column_space,
    default_rtol,
    null_space,
    rank_of,
    subspace_intersection,
)

__all__ = [
    "OperatorPoint",
    "OperatorSubspace",
    "ChartReport",
    "tangent_space_basis",
    "tangent_space_image",
    "complement_space_basis",
    "complement_space_kernel",
    "decompose_operator",
    "chart_forward",
    "chart_inverse",
    "chart_derivative",
    "verify_chart_maps_manifold",
]


@dataclass(frozen=True)
class OperatorPoint:
    """An operator ``x`` together with a generalized inverse of it."""

    x: np.ndarray
    gen_inv: GenInverse

    @classmethod
    def moore_penrose(cls, x):
        g = GenInverse.moore_penrose(x)
        return cls(g.a, g)

    @classmethod
    def from_gen_inverse(cls, g):
        return cls(g.a, g)

    @property
    def x_plus(self):
        return self.gen_inv.a_plus

    @property
    def shape(self):
        return self.x.shape

    @property
    def rank(self):
        return rank_of(self.x)


class OperatorSubspace:
    """A subspace of the m x n matrices, orthonormal under the trace pairing."""

    __slots__ = ("shape", "vec_space")

    def __init__(self, shape, vec_space):
        m, n = shape
        if vec_space.ambient_dim != m * n:
            raise ValueError("vectorized subspace does not match the operator shape")
        self.shape = (m, n)
        self.vec_space = vec_space

    @classmethod
    def span(cls, shape, matrices):
        m, n = shape
        cols = [np.asarray(t, dtype=np.float64).reshape(-1) for t in matrices]
        vecs = np.column_stack(cols) if cols else np.zeros((m * n, 0))
        return cls(shape, Subspace(vecs, ambient_dim=m * n))

    @property
    def dim(self):
        return self.vec_space.dim

    @property
    def basis(self):
        """Basis elements as an array of shape ``(dim, m, n)``."""
        return self.vec_space.basis.T.reshape(self.dim, *self.shape)

    def combine(self, coeffs):
        return (self.vec_space.basis @ np.asarray(coeffs, dtype=np.float64)).reshape(self.shape)

    def project(self, t):
        """Trace-orthogonal projection of ``t`` onto the subspace."""
        b = self.vec_space.basis
        return (b @ (b.T @ np.asarray(t, dtype=np.float64).reshape(-1))).reshape(self.shape)

    def distance(self, t):
        """Frobenius distance from ``t`` to the subspace."""
        return float(np.linalg.norm(np.asarray(t) - self.project(t)))

    def __repr__(self):
        return f"OperatorSubspace(dim={self.dim}, shape={self.shape})"


def _vec_kernel(shape, blocks):
    """Common kernel of the maps ``T -> L_i T R_i`` as an OperatorSubspace."""
    m, n = shape
    stacked = np.vstack([np.kron(left, right.T) for left, right in blocks])
    return OperatorSubspace(shape, null_space(stacked))


def tangent_space_basis(p):
    """``M(X) = {T : T N(X) in R(X)}``, as the kernel of ``T -> (I - P_R(X)) T B_N(X)``."""
    m, n = p.shape
    ran = column_space(p.x)
    ker = null_space(p.x)
    off_range = np.eye(m) - ran.projector()
    if ker.dim == 0:
        return OperatorSubspace((m, n), Subspace.full(m * n))
    return _vec_kernel((m, n), [(off_range, ker.basis)])


def _image(shape, op):
    """Image of a projector-built linear map on m x n matrices.

    The rank cutoff is taken against ``max(1, sigma_max)``: the maps here are
    sums of projector products, so a numerically zero map must not have its
    round-off promoted to a spanning direction.
    """
    m, n = shape
    cols = []
    for idx in range(m * n):
        e = np.zeros(m * n)
        e[idx] = 1.0
        cols.append(op(e.reshape(m, n)).reshape(-1))
    mat = np.column_stack(cols)
    u, s, _ = np.linalg.svd(mat)
    r = int(np.count_nonzero(s > default_rtol(mat.shape) * max(1.0, s[0])))
    return OperatorSubspace(shape, Subspace.from_orthonormal(_canonical_basis(u[:, :r])))


def tangent_space_image(p):
    """``M(X)`` as the image of ``T -> X X+ T + (I - X X+) T X+ X``."""
    x, xp = p.x, p.x_plus
    m, n = p.shape
    left = x @ xp
    right = xp @ x
    return _image((m, n), lambda t: left @ t + (np.eye(m) - left) @ t @ right)


def complement_space_basis(p):
    """``E_X`` as the image of ``T -> (I - X X+) T (I - X+ X)``."""
    x, xp = p.x, p.x_plus
    m, n = p.shape
    left = np.eye(m) - x @ xp
    right = np.eye(n) - xp @ x
    return _image((m, n), lambda t: left @ t @ right)


def complement_space_kernel(p):
    """``E_X = {T : R(T) in N(X+), N(T) contains R(X+)}`` as a common kernel."""
    x, xp = p.x, p.x_plus
    m, n = p.shape
    return _vec_kernel((m, n), [(x @ xp, np.eye(n)), (np.eye(m), xp @ x)])


def decompose_operator(p, t):
    """Split ``t`` into ``(X X+ T, (I - X X+) T X+ X, (I - X X+) T (I - X+ X))``.

    The first two parts lie in ``M(X)``, the third in ``E_X``; they sum to ``t``.
    """
    t = as_matrix(t, "T")
    check_same_shape(p.x, t, ("X", "T"))
    m, n = p.shape
    left = p.x @ p.x_plus
    right = p.x_plus @ p.x
    off_left = np.eye(m) - left
    return left @ t, off_left @ t @ right, off_left @ t @ (np.eye(n) - right)


def _require_ball(p, t, margin, name):
    t = as_matrix(t, name)
    check_same_shape(p.x, t, ("X", name))
    ratio = spectral_norm(t - p.x) * p.gen_inv.norm_plus
    if not ratio < 1.0 - margin:
        raise NeighborhoodError(f"||{name} - X|| * ||X+|| = {ratio:.6g} is not below 1 - {margin:g}")
    return t


def chart_forward(p, t, margin=NEIGHBORHOOD_MARGIN):
    """``(T - X) X+ X + C^{-1} T``; fixes ``X``."""
    t = _require_ball(p, t, margin, "T")
    c = _c_factor(p.gen_inv, t)
    return (t - p.x) @ p.x_plus @ p.x + np.linalg.solve(c, t)


def chart_inverse(p, m, margin=NEIGHBORHOOD_MARGIN):
    """``m X+ X + C(m) m (I - X+ X)``, the inverse of :func:`chart_forward`."""
    m = _require_ball(p, m, margin, "m")
    right = p.x_plus @ p.x
    c = _c_factor(p.gen_inv, m)
    return m @ right + c @ m @ (np.eye(right.shape[0]) - right)


def chart_derivative(p, t, dt, margin=NEIGHBORHOOD_MARGIN):
    """Frechet derivative of :func:`chart_forward` at ``t`` applied to ``dt``.

    ``dT X+ X + C^{-1} dT - C^{-1} dT X+ C^{-1} T``; the identity at ``T = X``.
    """
    t = _require_ball(p, t, margin, "T")
    dt = as_matrix(dt, "dT")
    check_same_shape(t, dt, ("T", "dT"))
    c = _c_factor(p.gen_inv, t)
    c_inv_dt = np.linalg.solve(c, dt)
    c_inv_t = np.linalg.solve(c, t)
    return dt @ p.x_plus @ p.x + c_inv_dt - c_inv_dt @ p.x_plus @ c_inv_t


@dataclass(frozen=True)
class ChartReport:
    rank: int
    dim_tangent: int
    dim_complement: int
    roundtrip_max_residual: float
    tangency_max_residual: float
    membership_max_residual: float
    samples: int
    failures: tuple

    @property
    def passed(self):
        return not self.failures

    def to_json(self):
        return {
            "rank": self.rank,
            "dim_tangent": self.dim_tangent,
            "dim_complement": self.dim_complement,
            "roundtrip_max_residual": self.roundtrip_max_residual,
            "tangency_max_residual": self.tangency_max_residual,
            "membership_max_residual": self.membership_max_residual,
            "samples": self.samples,
            "failures": list(self.failures),
        }


def _in_ball(p, t):
    return spectral_norm(t - p.x) * p.gen_inv.norm_plus < 1.0 - NEIGHBORHOOD_MARGIN


def _random_direction(rng, space, shape):
    if space.dim == 0:
        return np.zeros(shape)
    d = space.combine(rng.standard_normal(space.dim))
    return d / spectral_norm(d)


def verify_chart_maps_manifold(p, samples=100, seed=0, fd_step=1e-6):
    """Two-sided check that the chart straightens the rank-r class onto ``M(X)``.

    For each sample a point ``m`` of ``M(X)`` inside the ball is pulled back
    with :func:`chart_inverse`; the preimage must have rank ``rank(X)`` and
    range meeting ``N(X+)`` trivially, and pushing it forward must land back
    in ``M(X)``. A generic in-ball operator checks the round trip in the
    other order whenever its image stays in the ball, and a central
    difference of ``t -> chart_inverse(X + t D)`` checks that tangent
    vectors stay in ``M(X)``.
    """
    rng = np.random.default_rng(seed)
    r = p.rank
    tangent = tangent_space_basis(p)
    complement = complement_space_basis(p)
    radius = p.gen_inv.radius()
    scale = 1.0 if not np.isfinite(radius) else radius
    ker_plus = p.gen_inv.null_of_inverse

    roundtrip = tangency = membership = 0.0
    failures = []
    for k in range(samples):
        d = _random_direction(rng, tangent, p.shape)
        m_pt = p.x + rng.uniform(0.05, 0.5) * scale * d
        t = chart_inverse(p, m_pt)
        if rank_of(t) != r:
            failures.append(f"sample {k}: preimage rank {rank_of(t)} != {r}")
        if subspace_intersection(column_space(t), ker_plus).dim:
            failures.append(f"sample {k}: R(T) meets N(X+)")
        if _in_ball(p, t):
            back = chart_forward(p, t)
            roundtrip = max(roundtrip, spectral_norm(back - m_pt) / (1.0 + spectral_norm(m_pt)))
            membership = max(membership, tangent.distance(back) / (1.0 + spectral_norm(back)))

        g = rng.standard_normal(p.shape)
        t_any = p.x + rng.uniform(0.05, 0.5) * scale * g / spectral_norm(g)
        image = chart_forward(p, t_any)
        if _in_ball(p, image):
            there = chart_inverse(p, image)
            roundtrip = max(roundtrip, spectral_norm(there - t_any) / (1.0 + spectral_norm(t_any)))

        h = fd_step * scale
        vel = (chart_inverse(p, p.x + h * d) - chart_inverse(p, p.x - h * d)) / (2 * h)
        tangency = max(tangency, tangent.distance(vel))

    if roundtrip > 1e-10:
        failures.append(f"round-trip residual {roundtrip:.3e} exceeds 1e-10")
    if membership > 1e-8:
        failures.append(f"forward image leaves M(X) by {membership:.3e}")
    if tangency > 1e-6:
        failures.append(f"tangent vectors leave M(X) by {tangency:.3e}")
    return ChartReport(
        r, tangent.dim, complement.dim, roundtrip, tangency, membership, samples, tuple(failures)
    )
