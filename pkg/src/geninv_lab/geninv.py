"""Generalized inverses and their perturbation theory on dense matrices.

A generalized inverse ``A+`` of ``A`` satisfies ``A A+ A = A`` and
``A+ A A+ = A+``; it is pinned down by its range ``R+`` (a complement of
``N(A)``) and null space ``N+`` (a complement of ``R(A)``).

For ``T`` in the ball ``||T - A|| < ||A+||^{-1}`` write
``C = I + (T - A) A+`` and ``D = I + A+ (T - A)``. The candidate inverse of
``T`` is ``B = A+ C^{-1} = D^{-1} A+``; it always satisfies ``B T B = B`` and
``T B T - T = -(I - A A+) C^{-1} T``, so it is a generalized inverse of ``T``
exactly when ``R(T)`` meets ``N(A+)`` only in zero. Seven equivalent forms of
that stability condition are evaluated independently by
:func:`check_equivalent_conditions`.
"""
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from ._validation import (
    ANGLE_TOL,
    DIRECT_SUM_TOL,
    NEIGHBORHOOD_MARGIN,
    as_matrix,
    check_same_shape,
    spectral_norm,
)
from .exceptions import ComplementError, GenInvLabError, NeighborhoodError, NotAGenInverse
from .subspace import (
    Subspace,
    _rank_from_singular_values,
    column_space,
    direct_sum_gap,
    is_direct_sum,
    max_angle,
    null_space,
    oblique_projector,
    rank_of,
    subspace_intersection,
    subspaces_equal,
)

__all__ = [
    "GenInverse",
    "ConditionReport",
    "SampledFamily",
    "RankClass",
    "LocalFineness",
    "SweepRow",
    "mp_inverse",
    "penrose_residuals",
    "gen_inverse_residual",
    "gen_inverse_from_complements",
    "nashed_chen_inverse",
    "check_equivalent_conditions",
    "transfer_radius",
    "classify_rank_class",
    "is_locally_fine",
    "mp_convergence_experiment",
    "mp_sweep_curve",
    "in_ball",
]

CONDITION_KEYS = ("i", "ii", "iii", "iv", "v", "vi", "vii")
RESIDUAL_TOL = 1e-8


def mp_inverse(a, tol=None):
    """Moore-Penrose inverse via a thresholded SVD.

    Singular values at or below ``tol * sigma_max`` are treated as zero;
    ``tol`` defaults to ``1e-10 * max(rows, cols)``.
    """
    a = as_matrix(a, "A")
    m, n = a.shape
    if a.size == 0:
        return np.zeros((n, m))
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    r = _rank_from_singular_values(s, a.shape, tol)
    if r == 0:
        return np.zeros((n, m))
    return (vt[:r].T / s[:r]) @ u[:, :r].T


def penrose_residuals(a, x):
    """Residuals of the four Penrose equations for candidate ``x = A+``.

    Returns ``(||AXA - A||, ||XAX - X||, ||(AX)^T - AX||, ||(XA)^T - XA||)``.
    """
    ax = a @ x
    xa = x @ a
    return (
        spectral_norm(ax @ a - a),
        spectral_norm(xa @ x - x),
        spectral_norm(ax.T - ax),
        spectral_norm(xa.T - xa),
    )


def gen_inverse_residual(a, x):
    """Scaled residual of the two defining equations, ``AXA = A`` and ``XAX = X``."""
    r1, r2, _, _ = penrose_residuals(a, x)
    scale = (1.0 + spectral_norm(a)) * (1.0 + spectral_norm(x))
    return max(r1, r2) / scale


@dataclass(frozen=True)
class GenInverse:
    """A generalized inverse bundled with its defining complements.

    Build one with :meth:`moore_penrose`, :meth:`from_pair` or
    :func:`gen_inverse_from_complements`.
    """

    a: np.ndarray
    a_plus: np.ndarray
    range_of_inverse: Subspace
    null_of_inverse: Subspace
    _norm_plus: float = field(default=0.0, repr=False, compare=False)

    @classmethod
    def from_pair(cls, a, a_plus, tol=1e-8):
        """Wrap an existing pair, checking the two defining equations."""
        a = as_matrix(a, "A")
        a_plus = as_matrix(a_plus, "A_plus")
        if a_plus.shape != a.shape[::-1]:
            raise ValueError(f"A_plus must have shape {a.shape[::-1]}, got {a_plus.shape}")
        resid = gen_inverse_residual(a, a_plus)
        if resid > tol:
            raise NotAGenInverse(f"defining-equation residual {resid:.3e} exceeds {tol:.1e}")
        return cls(
            a,
            a_plus,
            column_space(a_plus),
            null_space(a_plus),
            spectral_norm(a_plus),
        )

    @classmethod
    def moore_penrose(cls, a, tol=None):
        a = as_matrix(a, "A")
        return cls.from_pair(a, mp_inverse(a, tol))

    @property
    def norm_plus(self):
        """Spectral norm of A+."""
        return self._norm_plus or spectral_norm(self.a_plus)

    @property
    def shape(self):
        return self.a.shape

    def radius(self):
        """Radius of the ball ``V(A, A+)``, i.e. ``||A+||^{-1}``."""
        return np.inf if self.norm_plus == 0.0 else 1.0 / self.norm_plus


def gen_inverse_from_complements(a, r_plus, n_plus):
    """Generalized inverse of ``a`` with prescribed range ``r_plus`` and null space ``n_plus``.

    ``A+ = (A restricted to R+)^{-1} o P``, where ``P`` projects onto ``R(A)``
    along ``N+``.

    Raises
    ------
    ComplementError
        Unless ``N(A) (+) R+`` is the domain and ``R(A) (+) N+`` the codomain.
    """
    a = as_matrix(a, "A")
    m, n = a.shape
    if r_plus.ambient_dim != n or n_plus.ambient_dim != m:
        raise ValueError("R_plus must live in the domain and N_plus in the codomain")
    ker = null_space(a)
    ran = column_space(a)
    if not is_direct_sum(ker, r_plus):
        raise ComplementError("N(A) (+) R_plus is not the whole domain")
    if not is_direct_sum(ran, n_plus):
        raise ComplementError("R(A) (+) N_plus is not the whole codomain")
    p = oblique_projector(ran, n_plus).matrix
    # A restricted to R+ is injective; solve A B_R c = P y exactly in the range.
    restricted = a @ r_plus.basis
    coeffs = np.linalg.lstsq(restricted, p, rcond=None)[0]
    a_plus = r_plus.basis @ coeffs
    return GenInverse(a, a_plus, r_plus, n_plus, spectral_norm(a_plus))


def in_ball(g, t, margin=NEIGHBORHOOD_MARGIN):
    """True iff ``||T - A|| * ||A+|| < 1 - margin``."""
    return spectral_norm(t - g.a) * g.norm_plus < 1.0 - margin


def _require_ball(g, t, margin):
    t = as_matrix(t, "T")
    check_same_shape(g.a, t)
    ratio = spectral_norm(t - g.a) * g.norm_plus
    if not ratio < 1.0 - margin:
        raise NeighborhoodError(
            f"||T - A|| * ||A+|| = {ratio:.6g} is not below 1 - {margin:g}"
        )
    return t


def _c_factor(g, t):
    return np.eye(g.a.shape[0]) + (t - g.a) @ g.a_plus


class _Perturbed(NamedTuple):
    b: np.ndarray
    c_inv_t: np.ndarray


def _perturbed_inverse(g, t):
    """B = A+ C^{-1} together with C^{-1} T, after checking both factorizations."""
    m, n = g.a.shape
    c = _c_factor(g, t)
    b = np.linalg.solve(c.T, g.a_plus.T).T
    d = np.eye(n) + g.a_plus @ (t - g.a)
    b_alt = np.linalg.solve(d, g.a_plus)
    kappa = 1.0 / max(1.0 - spectral_norm(t - g.a) * g.norm_plus, 1e-300)
    gap = spectral_norm(b - b_alt)
    if gap > 1e-10 * max(1.0, spectral_norm(b)) * kappa:
        raise GenInvLabError(f"A+ C^-1 and D^-1 A+ disagree by {gap:.3e}")
    return _Perturbed(b, np.linalg.solve(c, t))


def nashed_chen_inverse(g, t, margin=NEIGHBORHOOD_MARGIN):
    """Perturbed inverse ``B = A+ (I + (T - A) A+)^{-1}`` and residual ``||TBT - T||``.

    ``B T B = B`` always holds inside the ball; the residual vanishes exactly
    when ``R(T)`` and ``N(A+)`` intersect trivially.

    Raises
    ------
    NeighborhoodError
        If ``||T - A|| * ||A+|| >= 1 - margin``.
    """
    t = _require_ball(g, t, margin)
    b = _perturbed_inverse(g, t).b
    return b, spectral_norm(t @ b @ t - t)


@dataclass(frozen=True)
class ConditionReport:
    """Verdicts of the seven stability conditions for one ``(A, A+, T)``.

    ``residuals`` holds the number each verdict thresholds. For (i), (iii)
    and (iv) it is a separation (smallest singular value of concatenated
    bases, larger is better); for the others it is a defect (smaller is
    better).
    """

    c_i: bool
    c_ii: bool
    c_iii: bool
    c_iv: bool
    c_v: bool
    c_vi: bool
    c_vii: bool
    residuals: tuple

    @property
    def verdicts(self):
        return (self.c_i, self.c_ii, self.c_iii, self.c_iv, self.c_v, self.c_vi, self.c_vii)

    @property
    def all_equal(self):
        return len(set(self.verdicts)) == 1

    def to_json(self):
        return {
            key: {"holds": bool(v), "residual": float(r)}
            for key, v, r in zip(CONDITION_KEYS, self.verdicts, self.residuals)
        }


def check_equivalent_conditions(g, t, margin=NEIGHBORHOOD_MARGIN, tol=RESIDUAL_TOL):
    """Evaluate the seven equivalent stability conditions independently.

    (i)   ``R(T) & N(A+) = {0}``
    (ii)  ``B = A+ C^{-1}`` is a generalized inverse of T with ``R(B) = R(A+)``, ``N(B) = N(A+)``
    (iii) ``R(T) (+) N(A+) = F``
    (iv)  ``N(T) (+) R(A+) = E``
    (v)   ``(I - A+ A) N(T) = N(A)``
    (vi)  ``C^{-1} T N(A)`` lies in ``R(A)``
    (vii) ``R(C^{-1} T)`` lies in ``R(A)``
    """
    t = _require_ball(g, t, margin)
    a, ap = g.a, g.a_plus
    m, n = a.shape
    ran_t = column_space(t)
    ker_t = null_space(t)
    ker_a = null_space(a)
    ran_a = column_space(a)

    inter = subspace_intersection(ran_t, g.null_of_inverse)
    r_i = direct_sum_gap(ran_t, g.null_of_inverse)
    c_i = inter.dim == 0

    pert = _perturbed_inverse(g, t)
    b = pert.b
    r_ii = spectral_norm(t @ b @ t - t)
    c_ii = (
        r_ii <= tol * (1.0 + spectral_norm(t))
        and subspaces_equal(column_space(b), g.range_of_inverse)
        and subspaces_equal(null_space(b), g.null_of_inverse)
    )

    r_iii = r_i if ran_t.dim + g.null_of_inverse.dim == m else 0.0
    c_iii = is_direct_sum(ran_t, g.null_of_inverse, DIRECT_SUM_TOL)

    r_iv = direct_sum_gap(ker_t, g.range_of_inverse)
    if ker_t.dim + g.range_of_inverse.dim != n:
        r_iv = 0.0
    c_iv = is_direct_sum(ker_t, g.range_of_inverse, DIRECT_SUM_TOL)

    projected = Subspace((np.eye(n) - ap @ a) @ ker_t.basis, ambient_dim=n)
    r_v = max_angle(projected, ker_a)
    c_v = projected.dim == ker_a.dim and r_v <= ANGLE_TOL

    off_range = np.eye(m) - ran_a.projector()
    cit = pert.c_inv_t
    scale = 1.0 + spectral_norm(cit)
    r_vi = spectral_norm(off_range @ cit @ ker_a.basis)
    c_vi = r_vi <= tol * scale
    r_vii = spectral_norm(off_range @ cit)
    c_vii = r_vii <= tol * scale

    return ConditionReport(
        c_i, c_ii, c_iii, c_iv, c_v, c_vi, c_vii,
        (r_i, r_ii, r_iii, r_iv, r_v, r_vi, r_vii),
    )


def transfer_radius(g, a_oplus, tol=1e-8):
    """``delta = min(||A+||^{-1}, ||A+ A A_oplus||^{-1})`` for a second inverse ``A_oplus``.

    Inside this ball, stability with respect to ``A+`` carries over to
    ``A_oplus``: ``R(T) & N(A_oplus) = {0}``.
    """
    a_oplus = as_matrix(a_oplus, "A_oplus")
    if a_oplus.shape != g.a_plus.shape:
        raise ValueError(f"A_oplus must have shape {g.a_plus.shape}")
    resid = gen_inverse_residual(g.a, a_oplus)
    if resid > tol:
        raise NotAGenInverse(f"A_oplus defining-equation residual {resid:.3e}")
    bridge = spectral_norm(g.a_plus @ g.a @ a_oplus)
    inv = lambda x: np.inf if x == 0.0 else 1.0 / x  # noqa: E731
    return min(inv(g.norm_plus), inv(bridge))


class RankClass(NamedTuple):
    nullity: int
    corank: int
    rank: int


def classify_rank_class(a, tol=None):
    """``(dim N(A), codim R(A), rank A)``: membership in F_r and Phi_{m,n}."""
    a = as_matrix(a, "A")
    r = rank_of(a, tol)
    return RankClass(a.shape[1] - r, a.shape[0] - r, r)


@dataclass(frozen=True)
class SampledFamily:
    """Operators ``T_x`` sampled at parameter points; ``base_index`` marks ``x0``."""

    points: list
    operators: list
    base_index: int = 0

    def __post_init__(self):
        if len(self.points) != len(self.operators):
            raise ValueError("points and operators must have the same length")
        if not self.operators:
            raise ValueError("a sampled family needs at least one operator")
        shapes = {np.shape(op) for op in self.operators}
        if len(shapes) != 1:
            raise ValueError(f"operators have mixed shapes {sorted(shapes)}")
        if not 0 <= self.base_index < len(self.operators):
            raise ValueError("base_index out of range")

    @property
    def base(self):
        return as_matrix(self.operators[self.base_index], "base operator")


class LocalFineness(NamedTuple):
    fine: bool
    witnesses: list


def is_locally_fine(family, g, margin=0.0):
    """Sample-level test of the locally-fine-point property.

    Returns ``(fine, witnesses)`` where ``witnesses`` are the indices whose
    operator range meets ``N(A+)`` nontrivially. A ``True`` verdict is
    evidence on the given samples, not a proof about a neighborhood.
    """
    if not np.allclose(family.base, g.a, atol=1e-12, rtol=0):
        raise ValueError("the family's base operator differs from the generalized inverse's A")
    witnesses = []
    for idx, op in enumerate(family.operators):
        t = _require_ball(g, op, margin)
        if subspace_intersection(column_space(t), g.null_of_inverse).dim > 0:
            witnesses.append(idx)
    return LocalFineness(not witnesses, witnesses)


@dataclass(frozen=True)
class SweepRow:
    t: float
    rank: int
    mp_error: float
    pinv_norm: float


def mp_sweep_curve(a, curve, steps):
    """Pseudoinverse error ``||curve(t)^+ - A^+||`` along an operator curve through ``A``."""
    a = as_matrix(a, "A")
    a_pinv = mp_inverse(a)
    rows = []
    for t in steps:
        tt = as_matrix(curve(t), "curve(t)")
        pinv = mp_inverse(tt)
        rows.append(SweepRow(float(t), rank_of(tt), spectral_norm(pinv - a_pinv), spectral_norm(pinv)))
    return rows


def mp_convergence_experiment(a, direction, steps):
    """Table of ``(t, rank(A + t D), ||(A + t D)^+ - A^+||)`` over ``steps``.

    No verdict is attached; rank-preserving directions should show the error
    shrinking with ``t`` and rank-raising ones should show it blowing up.
    """
    a = as_matrix(a, "A")
    d = as_matrix(direction, "direction")
    check_same_shape(a, d, ("A", "direction"))
    steps = [float(s) for s in steps]
    if any(s <= 0 for s in steps) or any(x <= y for x, y in zip(steps, steps[1:])):
        raise ValueError("steps must be positive and strictly decreasing")
    return mp_sweep_curve(a, lambda t: a + t * d, steps)
