import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geninv_lab.exceptions import ComplementError
from geninv_lab.subspace import (
    Subspace,
    adjoint_projector,
    column_space,
    is_contained,
    is_direct_sum,
    max_angle,
    null_space,
    oblique_projector,
    orthogonal_complement,
    principal_angles,
    rank_of,
    subspace_intersection,
    subspaces_equal,
)

from helpers import random_complement, random_subspace

E1 = np.array([1.0, 0.0])
E2 = np.array([0.0, 1.0])


def span(*vecs):
    return Subspace(np.column_stack(vecs))


class TestRank:
    def test_single_unit_entry(self):
        assert rank_of(np.array([[1.0, 0.0], [0.0, 0.0]])) == 1

    def test_zero_matrix(self):
        assert rank_of(np.zeros((3, 4))) == 0

    def test_known_factor_rank(self, rng):
        a = rng.standard_normal((5, 2)) @ rng.standard_normal((2, 4))
        assert rank_of(a) == 2

    def test_tolerance_override(self):
        a = np.diag([1.0, 1e-9])
        assert rank_of(a) == 2
        assert rank_of(a, tol=1e-8) == 1

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            rank_of(np.array([[np.nan]]))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 7), st.integers(1, 7), st.integers(0, 7), st.integers(0, 2**32 - 1))
    def test_orthogonal_invariance(self, m, n, r, seed):
        rng = np.random.default_rng(seed)
        r = min(r, m, n)
        a = rng.standard_normal((m, r)) @ rng.standard_normal((r, n))
        q1 = np.linalg.qr(rng.standard_normal((m, m)))[0]
        q2 = np.linalg.qr(rng.standard_normal((n, n)))[0]
        assert rank_of(q1 @ a @ q2) == rank_of(a) == r


class TestSubspace:
    def test_orthonormal_basis(self, rng):
        s = Subspace(rng.standard_normal((6, 3)))
        assert np.allclose(s.basis.T @ s.basis, np.eye(3), atol=1e-12)

    def test_dependent_spanning_set(self):
        s = Subspace(np.array([[1.0, 2.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 1.0]]))
        assert s.dim == 2
        assert subspaces_equal(s, span([1.0, 0, 0], [0, 0, 1.0]))

    def test_zero_subspace(self):
        z = Subspace.zero(3)
        assert z.dim == 0 and z.basis.shape == (3, 0)
        assert np.array_equal(z.projector(), np.zeros((3, 3)))

    def test_basis_is_read_only(self):
        s = Subspace.full(2)
        with pytest.raises(ValueError):
            s.basis[0, 0] = 5.0

    def test_from_orthonormal_rejects_skew(self):
        with pytest.raises(ValueError):
            Subspace.from_orthonormal(np.array([[1.0, 1.0], [0.0, 1.0]]))

    def test_null_and_column_space(self):
        a = np.array([[1.0, 0.0], [0.0, 0.0]])
        assert subspaces_equal(null_space(a), span(E2))
        assert subspaces_equal(column_space(a), span(E1))


class TestComplement:
    def test_axis(self):
        c = orthogonal_complement(span(E1))
        assert subspaces_equal(c, span(E2))

    def test_full_space(self):
        assert orthogonal_complement(Subspace.full(3)).dim == 0

    def test_diagonal(self):
        c = orthogonal_complement(span(np.array([1.0, 1.0]) / np.sqrt(2)))
        assert subspaces_equal(c, span(np.array([1.0, -1.0]) / np.sqrt(2)))

    def test_orthogonality(self, rng):
        s = random_subspace(rng, 7, 3)
        c = orthogonal_complement(s)
        assert c.dim == 4
        assert np.abs(c.basis.T @ s.basis).max() <= 1e-12


class TestObliqueProjector:
    def test_orthogonal_case(self):
        assert np.allclose(oblique_projector(span(E1), span(E2)).matrix, np.diag([1.0, 0.0]))

    def test_range_axis(self):
        p = oblique_projector(span(E1), span([1.0, 1.0]))
        assert np.allclose(p.matrix, [[1.0, -1.0], [0.0, 0.0]], atol=1e-14)

    def test_nullspace_axis(self):
        p = oblique_projector(span([1.0, 1.0]), span(E1))
        assert np.allclose(p.matrix, [[0.0, 1.0], [0.0, 1.0]], atol=1e-14)

    def test_not_complementary(self):
        with pytest.raises(ComplementError):
            oblique_projector(span(E1), span(E1))
        with pytest.raises(ComplementError):
            oblique_projector(span(E1), Subspace.zero(2))

    def test_array_protocol(self):
        p = oblique_projector(span(E1), span(E2))
        assert np.asarray(p).shape == (2, 2)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(2, 8), st.data())
    def test_projector_properties(self, n, data):
        k = data.draw(st.integers(0, n))
        rng = np.random.default_rng(data.draw(st.integers(0, 2**32 - 1)))
        r = random_subspace(rng, n, k)
        nsp = random_complement(rng, r, min_gap=0.05)
        p = oblique_projector(r, nsp).matrix
        scale = 1 + np.linalg.norm(p, 2)
        assert np.abs(p @ p - p).max() <= 1e-10 * scale
        assert np.abs(p @ r.basis - r.basis).max(initial=0.0) <= 1e-10 * scale
        assert np.abs(p @ nsp.basis).max(initial=0.0) <= 1e-10 * scale


class TestAdjointProjector:
    def test_orthogonal(self):
        p, q = adjoint_projector(span(E1), span(E2))
        assert np.allclose(p.matrix, np.diag([1.0, 0.0]))
        assert np.allclose(q.matrix, np.diag([1.0, 0.0]))

    def test_oblique(self):
        p, q = adjoint_projector(span(E1), span([1.0, 1.0]))
        assert np.allclose(p.matrix, [[1.0, -1.0], [0.0, 0.0]], atol=1e-14)
        assert np.allclose(q.matrix, [[1.0, 0.0], [-1.0, 0.0]], atol=1e-14)

    def test_random_in_r5(self, rng):
        e1 = random_subspace(rng, 5, 2)
        e2 = random_complement(rng, e1)
        p, q = adjoint_projector(e1, e2)
        assert np.linalg.norm(p.matrix.T - q.matrix, 2) <= 1e-12 * (1 + np.linalg.norm(p.matrix, 2))


class TestDirectSumAndIntersection:
    def test_axes(self):
        assert is_direct_sum(span(E1), span(E2))

    def test_identical(self):
        assert not is_direct_sum(span(E1), span(E1))

    def test_near_degenerate(self):
        assert not is_direct_sum(span([1.0, 0.0]), span([1.0, 1e-14]))

    def test_coordinate_planes(self):
        e = np.eye(3)
        s = subspace_intersection(span(e[0], e[1]), span(e[1], e[2]))
        assert s.dim == 1 and subspaces_equal(s, span(e[1]))

    def test_with_complement(self, rng):
        s = random_subspace(rng, 6, 3)
        assert subspace_intersection(s, orthogonal_complement(s)).dim == 0

    def test_invertible_range_meets_axis(self):
        s = subspace_intersection(column_space(np.diag([1.0, 1e-3])), span(E2))
        assert subspaces_equal(s, span(E2))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 8), st.data())
    def test_with_full_space(self, n, data):
        k = data.draw(st.integers(0, n))
        rng = np.random.default_rng(data.draw(st.integers(0, 2**32 - 1)))
        s = random_subspace(rng, n, k)
        inter = subspace_intersection(s, Subspace.full(n))
        assert inter.dim == k
        assert np.all(principal_angles(inter, s) <= 1e-10)


class TestAngles:
    def test_dimension_mismatch(self):
        assert max_angle(span(E1), Subspace.full(2)) == pytest.approx(np.pi / 2)

    def test_small_angle_resolved(self):
        eps = 1e-9
        assert max_angle(span(E1), span([1.0, eps])) == pytest.approx(eps, rel=1e-6)

    def test_containment(self):
        e = np.eye(3)
        assert is_contained(span(e[0]), span(e[0], e[1]))
        assert not is_contained(span(e[2]), span(e[0], e[1]))
        assert is_contained(Subspace.zero(3), span(e[0]))
