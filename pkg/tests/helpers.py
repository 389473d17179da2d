"""Random generators shared by the test modules."""
import numpy as np

from geninv_lab.subspace import Subspace, column_space, direct_sum_gap, null_space


def random_rank(rng, m, n, r, scale=1.0):
    """m x n matrix of rank exactly r with singular values in [0.5, 2] * scale."""
    if r == 0:
        return np.zeros((m, n))
    u = np.linalg.qr(rng.standard_normal((m, r)))[0]
    v = np.linalg.qr(rng.standard_normal((n, r)))[0]
    return scale * (u * rng.uniform(0.5, 2.0, r)) @ v.T


def random_subspace(rng, n, k):
    return Subspace(rng.standard_normal((n, k)), ambient_dim=n) if k else Subspace.zero(n)


def random_complement(rng, s, min_gap=0.2):
    """A random complement of ``s`` whose direct-sum gap exceeds ``min_gap``."""
    n, k = s.ambient_dim, s.ambient_dim - s.dim
    while True:
        c = random_subspace(rng, n, k)
        if direct_sum_gap(s, c) > min_gap:
            return c


def random_complements(rng, a, min_gap=0.2):
    """``(R_plus, N_plus)`` complementing ``N(a)`` and ``R(a)``."""
    return random_complement(rng, null_space(a), min_gap), random_complement(rng, column_space(a), min_gap)


def random_triple(rng, max_dim=8, preserving=None):
    """Random ``(GenInverse, T)`` with oblique complements and ``T`` inside the ball.

    Half the draws (or as requested) take ``T`` on the rank-r set through the
    chart; the rest add a generic perturbation, which raises the rank unless
    ``A`` already has full rank.
    """
    from geninv_lab.charts import OperatorPoint, chart_inverse, tangent_space_basis
    from geninv_lab.geninv import gen_inverse_from_complements, in_ball

    m, n = rng.integers(1, max_dim + 1, size=2)
    r = int(rng.integers(0, min(m, n) + 1))
    a = random_rank(rng, m, n, r)
    r_plus, n_plus = random_complements(rng, a)
    g = gen_inverse_from_complements(a, r_plus, n_plus)
    radius = g.radius()
    scale = 1.0 if not np.isfinite(radius) else radius
    if preserving is None:
        preserving = bool(rng.integers(0, 2))
    while True:
        u = rng.uniform(0.05, 0.7) * scale
        if preserving:
            point = OperatorPoint(a, g)
            space = tangent_space_basis(point)
            d = space.combine(rng.standard_normal(space.dim)) if space.dim else np.zeros((m, n))
            nd = np.linalg.norm(d, 2)
            t = chart_inverse(point, a + (u * d / nd if nd else d))
        else:
            d = rng.standard_normal((m, n))
            t = a + u * d / np.linalg.norm(d, 2)
        if in_ball(g, t):
            return g, t, preserving
