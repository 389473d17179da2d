"""Dense-matrix and subspace algebra.

Rank decisions, orthonormal subspace bases, complements, oblique projectors,
direct sums and intersections. Everything else in the package is built on
these primitives.

Conventions
-----------
* A :class:`Subspace` always carries an orthonormal column basis. Bases are
  canonical: a full-column-rank spanning set is orthonormalized in its given
  column order (Gram-Schmidt orientation), anything else goes through the
  orthogonal projector onto the span and a pivoted QR, so coordinate axes come
  out as coordinate axes.
* Rank uses a relative singular-value cutoff ``rtol * sigma_max``, with
  ``rtol = 1e-10 * max(rows, cols)`` unless overridden.
* Direct sums are decided by the smallest singular value of the concatenated
  orthonormal bases (absolute threshold ``1e-10``).
"""
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ._validation import (
    ANGLE_TOL,
    DEFAULT_RANK_RTOL,
    DIRECT_SUM_TOL,
    as_matrix,
    spectral_norm,
)
from .exceptions import ComplementError

__all__ = [
    "Subspace",
    "Projector",
    "rank_of",
    "default_rtol",
    "column_space",
    "null_space",
    "orthogonal_complement",
    "oblique_projector",
    "adjoint_projector",
    "is_direct_sum",
    "direct_sum_gap",
    "subspace_intersection",
    "principal_angles",
    "max_angle",
    "subspaces_equal",
    "is_contained",
]


def default_rtol(shape):
    return DEFAULT_RANK_RTOL * max(shape) if len(shape) else DEFAULT_RANK_RTOL


def _rank_from_singular_values(s, shape, tol):
    if s.size == 0 or s[0] == 0.0:
        return 0
    rtol = default_rtol(shape) if tol is None else tol
    return int(np.count_nonzero(s > rtol * s[0]))


def rank_of(a, tol=None):
    """Numerical rank of ``a``.

    Counts singular values strictly greater than ``tol * sigma_max``; ``tol``
    defaults to ``1e-10 * max(rows, cols)``. The zero matrix has rank 0.
    """
    a = as_matrix(a, "A")
    if a.size == 0:
        return 0
    s = np.linalg.svd(a, compute_uv=False)
    return _rank_from_singular_values(s, a.shape, tol)


def _sign_fixed_qr(a):
    q, r = np.linalg.qr(a)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def _canonical_basis(u):
    """Canonical orthonormal basis for span(u), u with orthonormal columns."""
    n, r = u.shape
    if r == 0:
        return np.zeros((n, 0))
    if r == n:
        return np.eye(n)
    proj = u @ u.T
    _, _, piv = scipy.linalg.qr(proj, pivoting=True, mode="economic")
    cols = np.sort(piv[:r])
    return _sign_fixed_qr(proj[:, cols])


class Subspace:
    """A linear subspace of R^n held as an orthonormal column basis.

    Parameters
    ----------
    vectors : array-like, shape (n, k)
        Spanning set, one vector per column. Need not be independent.
    ambient_dim : int, optional
        Required when ``vectors`` has no columns and no recoverable row count.
    tol : float, optional
        Relative rank cutoff used to decide the dimension of the span.
    """

    __slots__ = ("_basis",)

    def __init__(self, vectors, ambient_dim=None, tol=None):
        v = np.asarray(vectors, dtype=np.float64)
        if v.ndim == 1:
            v = v.reshape(-1, 1)
        if v.size == 0:
            n = ambient_dim if ambient_dim is not None else v.shape[0]
            if n is None or n < 1:
                raise ValueError("ambient_dim must be a positive integer")
            self._basis = np.zeros((int(n), 0))
            return
        v = as_matrix(v, "vectors")
        if ambient_dim is not None and v.shape[0] != ambient_dim:
            raise ValueError(f"vectors have {v.shape[0]} rows, expected {ambient_dim}")
        u, s, _ = np.linalg.svd(v, full_matrices=False)
        r = _rank_from_singular_values(s, v.shape, tol)
        if r == v.shape[1]:
            basis = _sign_fixed_qr(v)
        else:
            basis = _canonical_basis(u[:, :r])
        basis.setflags(write=False)
        self._basis = basis

    @classmethod
    def zero(cls, ambient_dim):
        return cls(np.zeros((ambient_dim, 0)), ambient_dim=ambient_dim)

    @classmethod
    def full(cls, ambient_dim):
        return cls(np.eye(ambient_dim))

    @classmethod
    def from_orthonormal(cls, basis):
        """Wrap a basis already known to be orthonormal, skipping re-orthonormalization."""
        b = as_matrix(basis, "basis")
        gram = b.T @ b
        if not np.allclose(gram, np.eye(b.shape[1]), atol=1e-12, rtol=0):
            raise ValueError("basis columns are not orthonormal to 1e-12")
        obj = cls.__new__(cls)
        b = b.copy()
        b.setflags(write=False)
        obj._basis = b
        return obj

    @property
    def basis(self):
        return self._basis

    @property
    def ambient_dim(self):
        return self._basis.shape[0]

    @property
    def dim(self):
        return self._basis.shape[1]

    def projector(self):
        """Orthogonal projector onto the subspace."""
        return self._basis @ self._basis.T

    def contains(self, x, tol=1e-10):
        x = np.asarray(x, dtype=np.float64).reshape(self.ambient_dim, -1)
        resid = x - self._basis @ (self._basis.T @ x)
        return bool(np.linalg.norm(resid) <= tol * max(1.0, np.linalg.norm(x)))

    def __repr__(self):
        return f"Subspace(dim={self.dim}, ambient_dim={self.ambient_dim})"


@dataclass(frozen=True)
class Projector:
    """Idempotent ``matrix`` with range ``range`` and null space ``nullspace``."""

    matrix: np.ndarray
    range: Subspace
    nullspace: Subspace

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)


def column_space(a, tol=None):
    """R(a) as a Subspace."""
    a = as_matrix(a, "A")
    if a.shape[1] == 0:
        return Subspace.zero(a.shape[0])
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    r = _rank_from_singular_values(s, a.shape, tol)
    return Subspace.from_orthonormal(_canonical_basis(u[:, :r]))


def null_space(a, tol=None):
    """N(a) as a Subspace."""
    a = as_matrix(a, "A")
    n = a.shape[1]
    if a.shape[0] == 0:
        return Subspace.full(n)
    _, s, vt = np.linalg.svd(a, full_matrices=True)
    r = _rank_from_singular_values(s, a.shape, tol)
    return Subspace.from_orthonormal(_canonical_basis(vt[r:].T))


def orthogonal_complement(s):
    """S^perp, with ``dim = ambient_dim - s.dim``."""
    n = s.ambient_dim
    if s.dim == 0:
        return Subspace.full(n)
    if s.dim == n:
        return Subspace.zero(n)
    u, _, _ = np.linalg.svd(s.basis, full_matrices=True)
    return Subspace.from_orthonormal(_canonical_basis(u[:, s.dim:]))


def _check_ambient(s1, s2):
    if s1.ambient_dim != s2.ambient_dim:
        raise ValueError(
            f"subspaces live in different spaces ({s1.ambient_dim} vs {s2.ambient_dim})"
        )


def direct_sum_gap(s1, s2):
    """Smallest singular value of ``[B1 B2]``; 0 when the columns outnumber the rows.

    Measures how far ``s1 + s2`` is from being a degenerate (non-direct) sum.
    """
    _check_ambient(s1, s2)
    k = s1.dim + s2.dim
    if k == 0:
        return 1.0
    if k > s1.ambient_dim:
        return 0.0
    s = np.linalg.svd(np.hstack([s1.basis, s2.basis]), compute_uv=False)
    return float(s[-1])


def is_direct_sum(s1, s2, tol=DIRECT_SUM_TOL):
    """True iff ``s1 (+) s2`` is the whole ambient space."""
    _check_ambient(s1, s2)
    if s1.dim + s2.dim != s1.ambient_dim:
        return False
    return direct_sum_gap(s1, s2) > tol


def oblique_projector(range, nullspace, tol=DIRECT_SUM_TOL):
    """Projector onto ``range`` along ``nullspace``.

    Each standard basis vector ``e_i`` is split as ``r + n`` by solving the
    square system on the concatenated bases; ``P e_i = r``.

    Raises
    ------
    ComplementError
        If the two subspaces are not complementary.
    """
    _check_ambient(range, nullspace)
    if not is_direct_sum(range, nullspace, tol):
        raise ComplementError(
            f"range (dim {range.dim}) and nullspace (dim {nullspace.dim}) "
            f"are not complementary in R^{range.ambient_dim}"
        )
    n = range.ambient_dim
    frame = np.hstack([range.basis, nullspace.basis])
    coeffs = np.linalg.solve(frame, np.eye(n))
    p = range.basis @ coeffs[: range.dim]
    return Projector(p, range, nullspace)


def adjoint_projector(e1, e2, tol=DIRECT_SUM_TOL):
    """Return ``(P, Q)``: P projects onto e1 along e2, Q onto e2^perp along e1^perp.

    The two are transposes of each other; the pair lets callers check that.
    """
    p = oblique_projector(e1, e2, tol)
    q = oblique_projector(orthogonal_complement(e2), orthogonal_complement(e1), tol)
    return p, q


def subspace_intersection(s1, s2, tol=DIRECT_SUM_TOL):
    """Orthonormal basis of ``s1 & s2``.

    Null directions ``(a, b)`` of ``[B1, -B2]`` give common vectors ``B1 a``;
    a direction counts as null when its singular value is at most ``tol``.
    """
    _check_ambient(s1, s2)
    n = s1.ambient_dim
    if s1.dim == 0 or s2.dim == 0:
        return Subspace.zero(n)
    m = np.hstack([s1.basis, -s2.basis])
    _, s, vt = np.linalg.svd(m, full_matrices=True)
    k = m.shape[1]
    sing = np.zeros(k)
    sing[: s.size] = s
    null = vt[sing <= tol].T
    if null.shape[1] == 0:
        return Subspace.zero(n)
    common = s1.basis @ null[: s1.dim]
    u, sv, _ = np.linalg.svd(common, full_matrices=False)
    r = int(np.count_nonzero(sv > 0.5 * sv[0])) if sv.size and sv[0] > 0 else 0
    return Subspace.from_orthonormal(_canonical_basis(u[:, :r]))


def principal_angles(s1, s2):
    """Principal angles (radians, ascending) between two subspaces.

    Uses the sine/cosine combination so that angles near zero are resolved
    to roughly machine precision.
    """
    _check_ambient(s1, s2)
    if s1.dim == 0 or s2.dim == 0:
        return np.zeros(0)
    return np.sort(scipy.linalg.subspace_angles(s1.basis, s2.basis))


def max_angle(s1, s2):
    """Largest principal angle; pi/2 when the dimensions differ."""
    if s1.dim != s2.dim:
        return float(np.pi / 2)
    ang = principal_angles(s1, s2)
    return float(ang.max()) if ang.size else 0.0


def subspaces_equal(s1, s2, tol=ANGLE_TOL):
    return s1.dim == s2.dim and max_angle(s1, s2) <= tol


def is_contained(inner, outer, tol=ANGLE_TOL):
    """True iff ``inner`` is a subspace of ``outer`` (all principal angles <= tol)."""
    _check_ambient(inner, outer)
    if inner.dim == 0:
        return True
    if inner.dim > outer.dim:
        return False
    resid = inner.basis - outer.basis @ (outer.basis.T @ inner.basis)
    return spectral_norm(resid) <= np.sin(tol)
