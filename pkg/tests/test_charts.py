import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geninv_lab.charts import (
    OperatorPoint,
    OperatorSubspace,
    chart_derivative,
    chart_forward,
    chart_inverse,
    complement_space_basis,
    complement_space_kernel,
    decompose_operator,
    tangent_space_basis,
    tangent_space_image,
    verify_chart_maps_manifold,
)
from geninv_lab.exceptions import NeighborhoodError
from geninv_lab.geninv import check_equivalent_conditions, gen_inverse_from_complements
from geninv_lab.subspace import is_direct_sum, subspaces_equal

from helpers import random_complements, random_rank

A10 = np.diag([1.0, 0.0])
E22 = np.array([[0.0, 0.0], [0.0, 1.0]])


def point(x):
    return OperatorPoint.moore_penrose(np.asarray(x, dtype=float))


def oblique_point(rng, x):
    r_plus, n_plus = random_complements(rng, x)
    return OperatorPoint.from_gen_inverse(gen_inverse_from_complements(x, r_plus, n_plus))


def in_ball_sample(rng, p, frac=0.8):
    g = rng.standard_normal(p.shape)
    radius = p.gen_inv.radius() if np.isfinite(p.gen_inv.radius()) else 1.0
    return p.x + rng.uniform(0.05, frac) * radius * g / np.linalg.norm(g, 2)


class TestSpaces:
    def test_rank_one_2x2(self):
        assert tangent_space_basis(point(A10)).dim == 3

    def test_invertible_2x2(self, rng):
        assert tangent_space_basis(point(rng.standard_normal((2, 2)) + 3 * np.eye(2))).dim == 4

    def test_random_5x4_rank2(self, rng):
        assert tangent_space_basis(point(random_rank(rng, 5, 4, 2))).dim == 14

    def test_complement_rank_one(self):
        comp = complement_space_basis(point(A10))
        assert comp.dim == 1
        assert np.allclose(np.abs(comp.basis[0]), E22)

    def test_complement_invertible(self):
        assert complement_space_basis(point(np.eye(3))).dim == 0

    def test_complement_4x4_rank2(self, rng):
        p = point(random_rank(rng, 4, 4, 2))
        comp = complement_space_basis(p)
        assert comp.dim == 4
        assert is_direct_sum(tangent_space_basis(p).vec_space, comp.vec_space)

    def test_trace_orthonormal(self, rng):
        basis = tangent_space_basis(point(random_rank(rng, 3, 4, 2))).basis
        gram = np.einsum("imn,jmn->ij", basis, basis)
        assert np.allclose(gram, np.eye(len(basis)), atol=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 6), st.integers(1, 6), st.data())
    def test_image_and_kernel_forms_agree(self, m, n, data):
        rng = np.random.default_rng(data.draw(st.integers(0, 2**32 - 1)))
        r = data.draw(st.integers(0, min(m, n)))
        p = oblique_point(rng, random_rank(rng, m, n, r))
        assert subspaces_equal(tangent_space_basis(p).vec_space, tangent_space_image(p).vec_space)
        assert subspaces_equal(complement_space_basis(p).vec_space, complement_space_kernel(p).vec_space)

    def test_span_projection(self):
        s = OperatorSubspace.span((2, 2), [A10])
        assert s.distance(E22) == pytest.approx(1.0)
        assert np.allclose(s.project(A10 + E22), A10)


class TestDecompose:
    def test_invertible(self, rng):
        x = rng.standard_normal((3, 3)) + 4 * np.eye(3)
        t = rng.standard_normal((3, 3))
        p1, p2, p3 = decompose_operator(point(x), t)
        assert np.allclose(p1, t) and np.allclose(p2, 0) and np.allclose(p3, 0)

    def test_unit(self):
        parts = decompose_operator(point(A10), E22)
        assert np.allclose(parts[0], 0) and np.allclose(parts[1], 0) and np.allclose(parts[2], E22)

    def test_random_reconstruction(self, rng):
        x = random_rank(rng, 5, 4, 2)
        p = oblique_point(rng, x)
        t = rng.standard_normal((5, 4))
        p1, p2, p3 = decompose_operator(p, t)
        assert np.linalg.norm(p1 + p2 + p3 - t, 2) <= 1e-12 * np.linalg.norm(t, 2)
        assert tangent_space_basis(p).distance(p1 + p2) <= 1e-10
        assert complement_space_basis(p).distance(p3) <= 1e-10


class TestChart:
    def test_fixed_point(self, rng):
        p = point(random_rank(rng, 4, 3, 2))
        assert np.allclose(chart_forward(p, p.x), p.x)
        assert np.allclose(chart_inverse(p, p.x), p.x)

    def test_forward_column_perturbation(self):
        s = 0.4
        t = np.array([[1.0, 0.0], [s, 0.0]])
        assert np.allclose(chart_forward(point(A10), t), t)

    def test_forward_off_manifold(self):
        t = np.diag([1.0, 0.3])
        assert np.allclose(chart_forward(point(A10), t), t)

    def test_inverse_column_perturbation(self):
        m = np.array([[1.0, 0.0], [0.4, 0.0]])
        p = point(A10)
        assert np.allclose(chart_inverse(p, m), m)
        assert np.allclose(chart_forward(p, chart_inverse(p, m)), m)

    def test_outside_ball(self):
        with pytest.raises(NeighborhoodError):
            chart_forward(point(A10), np.diag([2.5, 0.0]))
        with pytest.raises(NeighborhoodError):
            chart_inverse(point(A10), np.diag([2.5, 0.0]))

    def test_roundtrip_random(self, rng):
        # Each direction is only defined when the intermediate stays in the ball.
        done = {"fwd_first": 0, "inv_first": 0}
        while min(done.values()) < 200:
            m, n = rng.integers(1, 7, size=2)
            p = oblique_point(rng, random_rank(rng, m, n, int(rng.integers(0, min(m, n) + 1))))
            t = in_ball_sample(rng, p)
            for key, first, second in (
                ("fwd_first", chart_forward, chart_inverse),
                ("inv_first", chart_inverse, chart_forward),
            ):
                mid = first(p, t)
                try:
                    back = second(p, mid)
                except NeighborhoodError:
                    continue
                assert np.linalg.norm(back - t, 2) <= 1e-10 * (1 + np.linalg.norm(t, 2))
                done[key] += 1


class TestDerivative:
    def test_identity_at_base(self, rng):
        p = oblique_point(rng, random_rank(rng, 4, 5, 2))
        for _ in range(20):
            dt = rng.standard_normal(p.shape)
            assert np.abs(chart_derivative(p, p.x, dt) - dt).max() <= 1e-12 * (1 + np.abs(dt).max())

    def test_finite_differences(self, rng):
        for _ in range(20):
            p = oblique_point(rng, random_rank(rng, 4, 4, 2))
            t = in_ball_sample(rng, p, 0.5)
            dt = rng.standard_normal(p.shape)
            h = 1e-6
            fd = (chart_forward(p, t + h * dt) - chart_forward(p, t - h * dt)) / (2 * h)
            exact = chart_derivative(p, t, dt)
            assert np.linalg.norm(fd - exact, 2) <= 1e-6 * np.linalg.norm(exact, 2)

    def test_homogeneous(self, rng):
        p = point(random_rank(rng, 3, 3, 1))
        t = in_ball_sample(rng, p, 0.5)
        dt = rng.standard_normal((3, 3))
        a = 2.7
        lhs = chart_derivative(p, t, a * dt)
        assert np.abs(lhs - a * chart_derivative(p, t, dt)).max() <= 1e-12 * (1 + np.abs(lhs).max())


class TestManifold:
    def test_rank_one_2x2(self):
        report = verify_chart_maps_manifold(point(A10), samples=100)
        assert report.passed, report.failures
        assert report.roundtrip_max_residual <= 1e-10

    def test_invertible(self):
        assert verify_chart_maps_manifold(point(np.eye(3) * 2), samples=20).passed

    def test_random_5x4_rank2(self, rng):
        report = verify_chart_maps_manifold(point(random_rank(rng, 5, 4, 2)), samples=100, seed=3)
        assert report.passed, report.failures
        assert report.to_json()["dim_tangent"] == 14

    def test_velocities_span_tangent_space(self, rng):
        p = oblique_point(rng, random_rank(rng, 4, 3, 2))
        space = tangent_space_basis(p)
        h = 1e-6 / p.gen_inv.norm_plus
        vels = [(chart_inverse(p, p.x + h * d) - chart_inverse(p, p.x - h * d)) / (2 * h) for d in space.basis]
        realized = OperatorSubspace.span(p.shape, vels)
        assert realized.dim == space.dim
        assert subspaces_equal(realized.vec_space, space.vec_space, tol=1e-6)

    def test_preimages_satisfy_conditions(self, rng):
        p = oblique_point(rng, random_rank(rng, 5, 4, 2))
        space = tangent_space_basis(p)
        for _ in range(20):
            d = space.combine(rng.standard_normal(space.dim))
            m = p.x + 0.5 * d / np.linalg.norm(d, 2) / p.gen_inv.norm_plus
            t = chart_inverse(p, m)
            if np.linalg.norm(t - p.x, 2) * p.gen_inv.norm_plus < 1 - 1e-6:
                assert all(check_equivalent_conditions(p.gen_inv, t).verdicts)
