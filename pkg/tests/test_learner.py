import numpy as np
import pytest
from scipy.optimize import linprog as scipy_linprog

from tubempc.learner import (
    InformationSet,
    LearnedSet,
    ModelMismatchWarning,
    epsilon_for,
    fit_initial,
    realise,
    required_samples,
    update,
    violation_rate,
)
from tubempc.polytope import HPolytope, area_2d, contains


def hexagon(inradius=1.0):
    return HPolytope.regular_polygon(6, inradius=inradius)


def sample_inside(rng, W, n, shrink=0.6):
    lo_hi = 1.2
    pts = []
    while len(pts) < n:
        p = rng.uniform(-lo_hi, lo_hi, size=2) * shrink
        if np.all(W.V @ p <= 1.0):
            pts.append(p)
    return np.array(pts)


def rho_grid_oracle(W, samples, step=0.001):
    """Brute force for the bilinear fit problem: grid rho, solve the
    remaining LP in (v, theta) with an independent backend."""
    Vw = W.V
    n_v, n_x = Vw.shape
    g = np.max(samples @ Vw.T, axis=0)  # coverage rows share their RHS
    best = np.inf
    for rho in np.arange(0.0, 1.0 + step / 2, step):
        # vars [v, theta]: g <= theta + (1-rho) Vw v, Vw v <= 1, theta <= rho
        A = np.vstack([
            np.hstack([-(1.0 - rho) * Vw, -np.eye(n_v)]),
            np.hstack([Vw, np.zeros((n_v, n_v))]),
        ])
        rhs = np.concatenate([-g, np.ones(n_v)])
        c = np.concatenate([np.zeros(n_x), np.ones(n_v)])
        bounds = [(None, None)] * n_x + [(0.0, min(1.0, rho))] * n_v
        res = scipy_linprog(c, A_ub=A, b_ub=rhs, bounds=bounds, method="highs")
        if res.status == 0:
            best = min(best, res.fun + rho)
    return best


def joint_lp_reference(W, samples):
    """Independent solve of the substituted LP with raw per-sample rows."""
    Vw = W.V
    n_v, n_x = Vw.shape
    blocks = [np.hstack([-Vw, -np.eye(n_v), np.zeros((n_v, 1))]) for _ in samples]
    rhs = [-(Vw @ w) for w in samples]
    blocks.append(np.hstack([Vw, np.zeros((n_v, n_v)), np.ones((n_v, 1))]))
    rhs.append(np.ones(n_v))
    blocks.append(np.hstack([np.zeros((n_v, n_x)), np.eye(n_v), -np.ones((n_v, 1))]))
    rhs.append(np.zeros(n_v))
    c = np.concatenate([np.zeros(n_x), np.ones(n_v), [1.0]])
    bounds = [(None, None)] * n_x + [(0.0, 1.0)] * (n_v + 1)
    res = scipy_linprog(c, A_ub=np.vstack(blocks), b_ub=np.concatenate(rhs),
                        bounds=bounds, method="highs")
    assert res.status == 0
    return res.fun


class TestFitInitial:
    def test_single_origin_sample(self):
        ls = fit_initial(HPolytope.unit_box(2), np.zeros((1, 2)))
        assert np.sum(ls.theta) + ls.rho == pytest.approx(0.0, abs=1e-9)
        assert ls.offsets == pytest.approx(np.zeros(4), abs=1e-9)
        assert ls.realise().is_degenerate

    def test_single_arbitrary_sample(self):
        rng = np.random.default_rng(0)
        W = hexagon()
        w0 = sample_inside(rng, W, 1)[0]
        ls = fit_initial(W, w0.reshape(1, -1))
        assert np.sum(ls.theta) + ls.rho == pytest.approx(0.0, abs=1e-9)
        assert ls.offsets == pytest.approx(W.V @ w0, abs=1e-9)
        assert ls.contains_sample(w0)

    def test_matches_joint_lp_reference(self):
        rng = np.random.default_rng(1)
        W = hexagon()
        samples = sample_inside(rng, W, 30)
        ls = fit_initial(W, samples)
        mine = float(np.sum(ls.theta) + ls.rho)
        assert mine == pytest.approx(joint_lp_reference(W, samples), abs=1e-9)

    def test_rho_grid_oracle_bounds_the_lp(self):
        # the grid restricts rho, so its minimum sits above the LP optimum
        # by at most (grid step) * (unit right slope of the value function)
        rng = np.random.default_rng(2)
        W = hexagon()
        samples = sample_inside(rng, W, 30)
        ls = fit_initial(W, samples)
        mine = float(np.sum(ls.theta) + ls.rho)
        oracle = rho_grid_oracle(W, samples)
        assert -1e-9 <= oracle - mine <= 1e-3 + 1e-7

    def test_all_samples_covered(self):
        rng = np.random.default_rng(3)
        W = hexagon()
        samples = sample_inside(rng, W, 40)
        ls = fit_initial(W, samples)
        assert np.all(samples @ W.V.T <= ls.offsets + 1e-8)

    def test_optimal_against_random_feasible_candidates(self):
        rng = np.random.default_rng(4)
        W = hexagon()
        samples = sample_inside(rng, W, 25)
        g = np.max(samples @ W.V.T, axis=0)
        ls = fit_initial(W, samples)
        best = float(np.sum(ls.theta) + ls.rho)
        found = 0
        while found < 100:
            v = sample_inside(rng, W, 1, shrink=1.0)[0]
            rho = rng.uniform(0.0, 1.0)
            theta_req = g - (1.0 - rho) * (W.V @ v)
            if np.max(theta_req) <= min(rho, 1.0) + 1e-12:
                found += 1
                theta = np.clip(theta_req, 0.0, rho)
                assert np.sum(theta) + rho >= best - 1e-9

    def test_rigid_fit_uniform_scaling(self):
        rng = np.random.default_rng(5)
        W = hexagon()
        samples = sample_inside(rng, W, 20)
        rigid = fit_initial(W, samples, rigid=True)
        assert rigid.theta == pytest.approx(np.full(6, rigid.rho), abs=1e-8)
        hetero = fit_initial(W, samples)
        assert (np.sum(hetero.theta) + hetero.rho
                <= np.sum(rigid.theta) + rigid.rho + 1e-9)
        assert np.all(samples @ W.V.T <= rigid.offsets + 1e-8)

    def test_model_mismatch_excluded_with_warning(self):
        W = HPolytope.unit_box(2)
        samples = np.array([[0.1, 0.1], [5.0, 5.0]])
        with pytest.warns(ModelMismatchWarning):
            ls = fit_initial(W, samples)
        assert ls.contains_sample([0.1, 0.1])
        assert not ls.contains_sample([5.0, 5.0])

    def test_no_usable_samples(self):
        with pytest.raises(ValueError):
            with pytest.warns(ModelMismatchWarning):
                fit_initial(HPolytope.unit_box(2), np.array([[9.0, 9.0]]))


class TestUpdate:
    def test_inside_sample_keeps_offsets(self):
        rng = np.random.default_rng(6)
        W = hexagon()
        ls = fit_initial(W, sample_inside(rng, W, 15))
        for _ in range(10):
            p = rng.uniform(-1, 1, 2)
            if np.all(W.V @ p <= ls.offsets):
                ls2 = update(ls, p)
                assert ls2.offsets == pytest.approx(ls.offsets, abs=1e-8)

    def test_point_set_grows_to_cover_corner(self):
        W = HPolytope.unit_box(2)
        ls = fit_initial(W, np.zeros((1, 2)))
        ls2 = update(ls, np.array([1.0, 1.0]))
        assert ls2.contains_sample([0.0, 0.0])
        assert ls2.contains_sample([1.0, 1.0])
        assert contains(realise(ls2), realise(ls))

    def test_stream_versus_batch(self):
        rng = np.random.default_rng(7)
        W = hexagon()
        samples = sample_inside(rng, W, 200)
        ls = fit_initial(W, samples[:1])
        offsets_prev = ls.offsets
        for w in samples[1:]:
            ls = update(ls, w)
            assert np.all(ls.offsets >= offsets_prev - 1e-8)  # nestedness
            assert np.all(W.V @ w <= ls.offsets + 1e-8)       # coverage
            offsets_prev = ls.offsets
        batch = fit_initial(W, samples)
        assert np.all(samples @ W.V.T <= ls.offsets + 1e-8)
        assert contains(W, realise(ls))
        assert contains(W, realise(batch))
        # greedy stream can only be as tight or looser than the batch fit
        assert np.sum(batch.offsets) <= np.sum(ls.offsets) + 1e-8

    def test_mismatch_sample_is_clamped(self):
        W = HPolytope.unit_box(2)
        ls = fit_initial(W, np.array([[0.2, 0.0]]))
        with pytest.warns(ModelMismatchWarning):
            ls2 = update(ls, np.array([7.0, 0.0]))
        assert ls2.offsets == pytest.approx(ls.offsets, abs=1e-8)


class TestRealise:
    def test_full_parameters_return_base(self):
        W = hexagon()
        ls = LearnedSet.full(W)
        R = realise(ls)
        assert contains(W, R) and contains(R, W)

    def test_point_realisation(self):
        W = hexagon()
        p = np.array([0.2, -0.1])
        ls = LearnedSet(base=W, v=p, theta=np.zeros(6), rho=0.0)
        R = realise(ls)
        assert R.is_degenerate and R.contains_point(p)

    def test_random_parameters_stay_inside_base(self):
        rng = np.random.default_rng(8)
        W = hexagon()
        for _ in range(200):
            v = sample_inside(rng, W, 1, shrink=1.0)[0]
            rho = rng.uniform(0, 1)
            theta = rng.uniform(0, rho, size=6)
            ls = LearnedSet(base=W, v=v, theta=theta, rho=rho)
            assert contains(W, realise(ls))

    def test_volume_sandwich(self):
        rng = np.random.default_rng(9)
        W = hexagon()
        aw = area_2d(W)
        for _ in range(40):
            v = sample_inside(rng, W, 1, shrink=1.0)[0]
            rho = rng.uniform(0.05, 1)
            theta = rng.uniform(0, rho, size=6)
            ls = LearnedSet(base=W, v=v, theta=theta, rho=rho)
            a = area_2d(realise(ls))
            assert theta.min() ** 2 * aw - 1e-9 * aw <= a <= theta.max() ** 2 * aw + 1e-9 * aw

    def test_parameter_validation(self):
        W = hexagon()
        with pytest.raises(ValueError):
            LearnedSet(base=W, v=np.zeros(2), theta=0.5 * np.ones(6), rho=0.2)
        with pytest.raises(ValueError):
            LearnedSet(base=W, v=np.array([9.0, 0.0]), theta=np.zeros(6), rho=0.0)

    def test_json_round_trip(self):
        W = hexagon()
        ls = LearnedSet(base=W, v=np.array([0.1, 0.2]),
                        theta=np.full(6, 0.3), rho=0.5)
        back = LearnedSet.from_dict(ls.to_dict(), W)
        assert back.offsets == pytest.approx(ls.offsets, abs=0)


class TestScenarioBounds:
    @pytest.mark.parametrize("m,expected", [(100, 0.1739), (1000, 0.0174), (10000, 0.0017)])
    def test_epsilon_table(self, m, expected):
        assert round(epsilon_for(m, 0.05, 2, 6), 4) == expected

    def test_required_samples_inverse(self):
        b = required_samples(0.1, 0.05, 2, 6)
        assert b.required_samples == 174
        assert epsilon_for(b.required_samples, 0.05, 2, 6) <= 0.1

    def test_linear_scaling(self):
        for m in (10, 57, 400):
            assert 2 * epsilon_for(2 * m, 0.05, 2, 6) == pytest.approx(
                epsilon_for(m, 0.05, 2, 6), rel=1e-12)

    def test_range_validation(self):
        with pytest.raises(ValueError):
            required_samples(0.0, 0.05, 2, 6)
        with pytest.raises(ValueError):
            epsilon_for(100, 1.0, 2, 6)


class TestViolationRate:
    def test_full_set_never_violates(self):
        rng = np.random.default_rng(10)
        W = hexagon()
        ls = LearnedSet.full(W)
        assert violation_rate(ls, sample_inside(rng, W, 500)) == 0.0

    def test_point_set_always_violates(self):
        W = hexagon()
        ls = fit_initial(W, np.zeros((1, 2)))
        samples = np.array([[0.5, 0.0], [0.0, 0.4], [-0.3, -0.3]])
        assert violation_rate(ls, samples) == 1.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            violation_rate(LearnedSet.full(hexagon()), np.zeros((0, 2)))


class TestInformationSet:
    def test_tracks_violations(self):
        W = HPolytope.unit_box(2)
        info = InformationSet(W)
        assert info.add([0.5, 0.5])
        with pytest.warns(ModelMismatchWarning):
            assert not info.add([3.0, 0.0])
        assert len(info) == 2
        assert info.violations == [1]
        assert info.in_model().shape == (1, 2)

    def test_csv_round_trip(self, tmp_path):
        rng = np.random.default_rng(11)
        W = hexagon()
        info = InformationSet(W, sample_inside(rng, W, 7))
        path = tmp_path / "info.csv"
        info.to_csv(path)
        back = InformationSet.from_csv(path, W)
        assert np.allclose(np.array(back.samples), np.array(info.samples))

    def test_fit_accepts_information_set(self):
        rng = np.random.default_rng(12)
        W = hexagon()
        info = InformationSet(W, sample_inside(rng, W, 9))
        ls = fit_initial(W, info)
        assert np.all(info.in_model() @ W.V.T <= ls.offsets + 1e-8)
