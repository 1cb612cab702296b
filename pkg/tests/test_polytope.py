import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tubempc.polytope import (
    HPolytope,
    area_2d,
    bounding_box,
    contains,
    default_template,
    invariant_set,
    scale_hetero,
    support,
    translate,
    vertices_2d,
)


def random_polygon(rng, n_facets=6, inradius=1.0):
    """Random bounded 2-D polytope with unit offsets."""
    ang = np.sort(rng.uniform(0, 2 * np.pi, size=n_facets))
    # spread angles so every direction is covered (bounded set)
    ang = ang + np.linspace(0, 2 * np.pi, n_facets, endpoint=False)
    V = np.column_stack([np.cos(ang), np.sin(ang)]) / inradius
    return HPolytope(V, np.ones(n_facets))


def area_rejection_oracle(P, n_samples=400_000, seed=0):
    rng = np.random.default_rng(seed)
    lo, hi = bounding_box(P)
    pts = rng.uniform(lo, hi, size=(n_samples, 2))
    inside = np.all(pts @ P.V.T <= P.b, axis=1)
    return float(np.prod(hi - lo) * inside.mean())


class TestSupport:
    def test_unit_box_axes(self):
        P = HPolytope.unit_box(2)
        assert support(P, np.eye(2)).values == pytest.approx([1.0, 1.0], abs=1e-10)

    def test_unit_box_diagonal(self):
        P = HPolytope.unit_box(2)
        assert support(P, [[1.0, 1.0]]).values[0] == pytest.approx(2.0, abs=1e-10)

    def test_matches_vertex_enumeration(self):
        rng = np.random.default_rng(2)
        W = random_polygon(rng)
        Phi = np.array([[0.6, 0.2], [-0.1, 0.5]])
        S = invariant_set(Phi, W)
        verts = vertices_2d(W)
        ref = np.max(verts @ S.V.T, axis=0)
        assert support(W, S.V).values == pytest.approx(ref, abs=1e-8)

    def test_positive_homogeneity_and_row_separability(self):
        rng = np.random.default_rng(4)
        P = random_polygon(rng)
        D = rng.normal(size=(5, 2))
        sup = support(P, D).values
        for c in (0.0, 0.7, 4.2):
            assert support(P, c * D).values == pytest.approx(c * sup, abs=1e-8)
        stacked = support(P, np.vstack([D, 2 * D])).values
        assert stacked[:5] == pytest.approx(sup, abs=1e-10)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            support(HPolytope.unit_box(2), [[1.0, 0.0, 0.0]])


class TestContains:
    def test_nested_boxes(self):
        big, small = HPolytope.unit_box(2), HPolytope.unit_box(2, radius=0.5)
        assert contains(big, small)
        assert not contains(small, big)

    def test_transitivity(self):
        a = HPolytope.unit_box(2, radius=1.0)
        b = HPolytope.regular_polygon(6, inradius=0.6)
        c = HPolytope.unit_box(2, radius=0.2)
        assert contains(a, b) and contains(b, c) and contains(a, c)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            contains(HPolytope.unit_box(2), HPolytope.unit_box(3))


class TestScaleTranslate:
    def test_identity_scaling(self):
        P = HPolytope.unit_box(2)
        Q = scale_hetero(P, np.ones(4))
        assert contains(P, Q) and contains(Q, P)

    def test_zero_scaling_is_origin(self):
        Q = scale_hetero(HPolytope.unit_box(2), np.zeros(4))
        assert Q.is_degenerate
        assert Q.contains_point([0.0, 0.0])
        assert support(Q, np.eye(2)).values == pytest.approx([0.0, 0.0], abs=1e-9)

    def test_hand_computed_heterogeneous_box(self):
        # rows of unit_box are +x, +y, -x, -y; shrink the lower bounds only
        Q = scale_hetero(HPolytope.unit_box(2), [1.0, 1.0, 0.5, 0.5])
        lo, hi = bounding_box(Q)
        assert lo == pytest.approx([-0.5, -0.5], abs=1e-9)
        assert hi == pytest.approx([1.0, 1.0], abs=1e-9)

    def test_theta_out_of_range(self):
        with pytest.raises(ValueError):
            scale_hetero(HPolytope.unit_box(2), [1.2, 1.0, 1.0, 1.0])

    def test_translate_zero(self):
        P = HPolytope.unit_box(2)
        Q = translate(P, [0.0, 0.0])
        assert np.allclose(Q.b, P.b)

    def test_translate_box(self):
        Q = translate(HPolytope.unit_box(2), [1.0, 0.0])
        lo, hi = bounding_box(Q)
        assert lo == pytest.approx([0.0, -1.0], abs=1e-10)
        assert hi == pytest.approx([2.0, 1.0], abs=1e-10)

    @settings(max_examples=25, deadline=None)
    @given(tx=st.floats(-3, 3), ty=st.floats(-3, 3))
    def test_translate_support_identity(self, tx, ty):
        P = HPolytope.regular_polygon(5, inradius=0.8)
        D = np.array([[1.0, 0.0], [0.3, -0.7], [-1.0, 2.0]])
        t = np.array([tx, ty])
        shifted = support(translate(P, t), D).values
        assert shifted == pytest.approx(support(P, D).values + D @ t, abs=1e-8)


class TestArea:
    def test_unit_box(self):
        assert area_2d(HPolytope.unit_box(2)) == pytest.approx(4.0, abs=1e-12)

    def test_uniform_scaling(self):
        Q = scale_hetero(HPolytope.unit_box(2), 0.5 * np.ones(4))
        assert area_2d(Q) == pytest.approx(1.0, abs=1e-12)

    def test_degenerate_area_zero(self):
        assert area_2d(scale_hetero(HPolytope.unit_box(2), np.zeros(4))) == 0.0

    def test_matches_rejection_sampling(self):
        rng = np.random.default_rng(8)
        P = random_polygon(rng)
        exact = area_2d(P)
        estimate = area_rejection_oracle(P)
        assert abs(estimate - exact) / exact <= 0.01

    def test_volume_sandwich_heterogeneous(self):
        rng = np.random.default_rng(9)
        W = HPolytope.regular_polygon(6, inradius=1.0)
        aw = area_2d(W)
        for _ in range(50):
            rho = rng.uniform(0.05, 1.0)
            theta = rng.uniform(0.0, rho, size=6)
            a = area_2d(scale_hetero(W, theta))
            lo = theta.min() ** 2 * aw
            hi = theta.max() ** 2 * aw
            assert lo - 1e-9 * aw <= a <= hi + 1e-9 * aw


class TestInvariantSet:
    def test_deadbeat_returns_disturbance_set(self):
        W = HPolytope.regular_polygon(6, inradius=0.5)
        S = invariant_set(np.zeros((2, 2)), W)
        assert contains(S, W) and contains(W, S)

    def test_scalar_contraction_geometric_series(self):
        lam = 0.5
        W = HPolytope.unit_box(2)
        S = invariant_set(lam * np.eye(2), W, template=np.vstack([np.eye(2), -np.eye(2)]))
        assert support(S, np.eye(2)).values == pytest.approx(
            [1.0 / (1 - lam)] * 2, rel=1e-8)

    def test_verification_built_in(self):
        rng = np.random.default_rng(12)
        W = random_polygon(rng, n_facets=6, inradius=0.4)
        Phi = np.array([[0.7, 0.1], [-0.2, 0.6]])
        S = invariant_set(Phi, W)
        resid = support(S, S.V @ Phi).values + support(W, S.V).values
        assert np.all(resid <= 1.0 + 1e-8)

    def test_rejects_unstable(self):
        with pytest.raises(ValueError):
            invariant_set(np.eye(2), HPolytope.unit_box(2))

    def test_template_depth(self):
        Phi = np.array([[0.5, 0.3], [0.0, 0.4]])
        T = default_template(HPolytope.unit_box(2).V, Phi, depth=2)
        assert T.shape[1] == 2
        assert np.allclose(np.linalg.norm(T, axis=1), 1.0)


class TestConstruction:
    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            HPolytope([[1.0], [-1.0]], [-1.0, -1.0])

    def test_rejects_unbounded(self):
        with pytest.raises(ValueError):
            HPolytope([[1.0, 0.0]], [1.0])

    def test_rejects_zero_rows(self):
        with pytest.raises(ValueError):
            HPolytope([[0.0, 0.0], [1.0, 0.0]], [1.0, 1.0])

    def test_json_round_trip(self):
        P = HPolytope.regular_polygon(5, inradius=0.7)
        Q = HPolytope.from_json(P.to_json())
        assert np.allclose(P.V, Q.V) and np.allclose(P.b, Q.b)

    def test_degenerate_flag(self):
        assert not HPolytope.unit_box(2).is_degenerate
        assert scale_hetero(HPolytope.unit_box(2), np.zeros(4)).is_degenerate
