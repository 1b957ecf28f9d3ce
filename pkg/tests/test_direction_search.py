import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from onebit import direction_search as ds
from onebit import scalar_quant as sq
from onebit import sources
from onebit.rng import stream

DIAG = ds.UnitDirection(np.array([1.0, 1.0]) / math.sqrt(2))
E1 = ds.UnitDirection(np.array([1.0, 0.0]))
E2 = ds.UnitDirection(np.array([0.0, 1.0]))


@pytest.fixture(scope="module")
def laplace_pair():
    return ds.iid_laplace(2, 1.0)


@pytest.fixture(scope="module")
def laplace_draws(laplace_pair):
    return laplace_pair.draw(stream(40), 10**6)


class TestTypes:
    def test_unit_norm_enforced(self):
        with pytest.raises(ValueError):
            ds.UnitDirection(np.array([1.0, 1.0]))
        q = ds.UnitDirection.normalized([3.0, 4.0])
        np.testing.assert_allclose(q.coords, [0.6, 0.8])
        with pytest.raises(ValueError):
            q.coords[0] = 1.0
        with pytest.raises(ValueError):
            ds.UnitDirection.normalized([0.0, 0.0])

    def test_canonical_and_angle(self):
        q = ds.UnitDirection(np.array([-0.6, 0.8]))
        np.testing.assert_allclose(q.canonical().coords, [0.6, -0.8])
        assert q.angle == pytest.approx(math.atan2(0.8, -0.6))
        assert ds.UnitDirection(np.array([-1.0, 0.0])).angle == 0.0
        assert ds.UnitDirection(np.array([0.0, -1.0])).canonical().coords[1] == 1.0

    def test_angle_distance(self):
        assert ds.angle_distance_deg(math.radians(1), math.radians(179)) == pytest.approx(2.0)
        assert ds.angle_distance_deg(math.radians(135), math.radians(45), math.pi / 2) == pytest.approx(0.0, abs=1e-12)

    def test_sampler_shape_checked(self):
        bad = ds.VectorSource(3, lambda rng, n: np.zeros((n, 2)))
        with pytest.raises(ValueError):
            bad.draw(stream(1), 5)

    def test_zero_mean_samples(self, laplace_draws):
        assert np.all(np.abs(laplace_draws.mean(axis=0)) < 4 * math.sqrt(2) / 1000)
        assert laplace_draws.shape == (10**6, 2)


class TestProjection:
    def test_basis_projection(self, laplace_pair):
        a = ds.project(laplace_pair, E1, 1000, stream(41))
        x = laplace_pair.draw(stream(41), 1000)
        np.testing.assert_array_equal(a.values, np.sort(x[:, 0]))

    def test_sign(self, laplace_pair):
        a = ds.project(laplace_pair, DIAG, 1000, stream(42)).values
        b = ds.project(laplace_pair, ds.UnitDirection(-DIAG.coords), 1000, stream(42)).values
        np.testing.assert_array_equal(a, -b[::-1])

    def test_dimension_mismatch(self, laplace_pair):
        with pytest.raises(ValueError):
            ds.project(laplace_pair, ds.UnitDirection(np.array([1.0, 0.0, 0.0])), 10, stream(1))

    def test_diagonal_abs_mean(self, laplace_pair, laplace_draws):
        z = laplace_draws @ DIAG.coords
        assert abs(np.mean(np.abs(z)) - 3 / (2 * math.sqrt(2))) < 0.01
        law = laplace_pair.analytic_projection(DIAG.coords)
        assert abs(sources.abs_mean(law) - 3 / (2 * math.sqrt(2))) < 1e-10


class TestObjectives:
    def test_analytic_values(self, laplace_pair):
        assert ds.vardrop_along(laplace_pair, E1) == pytest.approx(1.0, abs=1e-8)
        assert ds.vardrop_along(laplace_pair, DIAG) == pytest.approx(9 / 8, abs=1e-8)
        assert ds.objective_amen_var(laplace_pair, DIAG) == pytest.approx(9 / 8, abs=1e-12)
        assert ds.objective_amen_var(laplace_pair, E2) == pytest.approx(1.0, abs=1e-12)

    def test_gaussian_constant(self):
        src = ds.iid_gaussian(2)
        for t in np.linspace(0, math.pi, 7):
            assert ds.objective_amen_var(src, ds.UnitDirection.from_angle(t)) == pytest.approx(2 / math.pi, abs=1e-12)

    def test_untagged_rejected(self):
        src = ds.axis_source(sources.discrete([(-1.0, 1 / 3), (0.0, 1 / 3), (1.0, 1 / 3)]))
        assert not src.tagged
        with pytest.raises(ValueError):
            ds.objective_amen_var(src, E1)

    def test_estimator_switch(self, laplace_pair, laplace_draws):
        mc = ds.vardrop_along(laplace_pair, DIAG, estimator="empirical", samples=laplace_draws)
        se = ds.objective_standard_error(laplace_pair, DIAG, laplace_draws, "vardrop")
        assert abs(mc - 9 / 8) < 4 * se
        with pytest.raises(ValueError):
            ds.vardrop_along(laplace_pair, DIAG, estimator="bogus")

    def test_sign_symmetry_crn(self, laplace_pair, laplace_draws):
        x = laplace_draws[:20000]
        for t in (0.3, 1.1, 2.0):
            q = ds.UnitDirection.from_angle(t)
            mq = ds.UnitDirection(-q.coords)
            a = ds.vardrop_along(laplace_pair, q, estimator="empirical", samples=x)
            b = ds.vardrop_along(laplace_pair, mq, estimator="empirical", samples=x)
            assert a == pytest.approx(b, rel=1e-12)
            a = ds.objective_amen_var(laplace_pair, q, estimator="empirical", samples=x)
            b = ds.objective_amen_var(laplace_pair, mq, estimator="empirical", samples=x)
            assert a == b

    def test_amen_var_agrees_with_vardrop(self, laplace_pair):
        x = laplace_pair.draw(stream(43), 200000)
        rng = stream(44)
        for _ in range(25):
            q = ds.UnitDirection.normalized(rng.standard_normal(2))
            a = ds.objective_amen_var(laplace_pair, q, estimator="empirical", samples=x)
            b = ds.vardrop_along(laplace_pair, q, estimator="empirical", samples=x)
            se = max(ds.objective_standard_error(laplace_pair, q, x, "amen_var"),
                     ds.objective_standard_error(laplace_pair, q, x, "vardrop"))
            assert abs(a - b) < 3 * se

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0, math.pi))
    def test_analytic_projection_matches_samples(self, t):
        src = ds.iid_laplace(2, 1.0)
        q = ds.UnitDirection.from_angle(t)
        law = src.analytic_projection(q.coords)
        assert sources.variance(law) == pytest.approx(2.0, rel=1e-12)
        exact = ds.vardrop_along(src, q)
        assert exact == pytest.approx(sources.abs_mean(law) ** 2, abs=1e-8)
        assert 1.0 - 1e-8 <= exact <= 9 / 8 + 1e-8


class TestLift:
    def test_diagonal_quantizer(self, laplace_pair):
        hq = ds.build_quantizer(laplace_pair, DIAG)
        assert abs(hq.scalar_quantizer.threshold) < 1e-6
        lo, hi = hq.reconstructions
        np.testing.assert_allclose(hi, 3 / (2 * math.sqrt(2)) * DIAG.coords, atol=1e-8)
        np.testing.assert_allclose(lo, -hi, atol=1e-8)

    def test_reconstructions_on_the_line(self, laplace_pair):
        q = ds.UnitDirection.from_angle(0.4)
        hq = ds.build_quantizer(laplace_pair, q)
        x = laplace_pair.draw(stream(45), 50)
        y = hq(x)
        # every output is a multiple of q
        np.testing.assert_allclose(y - np.outer(y @ q.coords, q.coords), 0.0, atol=1e-12)

    def test_gaussian_axis_mse(self):
        src = ds.iid_gaussian(2)
        hq = ds.build_quantizer(src, E1)
        x = src.draw(stream(46), 10**6)
        err = np.sum((x - hq(x)) ** 2, axis=1)
        assert abs(err.mean() - ((1 - 2 / math.pi) + 1)) < 4 * err.std() / 1000

    def test_lift_identity(self, laplace_pair, laplace_draws):
        x = laplace_draws[:200000]
        energy = float(np.mean(np.sum(x * x, axis=1)))
        for t in (0.0, 0.5, math.pi / 4, 2.2):
            q = ds.UnitDirection.from_angle(t)
            hq = ds.build_quantizer(laplace_pair, q, estimator="empirical", samples=x)
            vd = ds.vardrop_along(laplace_pair, q, estimator="empirical", samples=x)
            # in-sample the identity holds to rounding, once the sample mean of <x, q> is accounted for
            zbar = float(np.mean(x @ q.coords))
            assert hq.mse(x) == pytest.approx(energy - zbar**2 - vd, rel=1e-9)


class TestSearch:
    def test_grid_analytic(self, laplace_pair):
        r = ds.grid_search_2d(laplace_pair, 360)
        assert ds.angle_distance_deg(r.best_direction.angle, math.pi / 4, math.pi / 2) < 1.0
        assert r.vardrop == pytest.approx(9 / 8, abs=1e-8)
        assert len(r.trace) == 360
        assert r.objective == "amen_var"

    def test_grid_monte_carlo(self, laplace_pair):
        r = ds.grid_search_2d(laplace_pair, 360, 10**6, stream(47), estimator="empirical")
        assert ds.angle_distance_deg(r.best_direction.angle, math.pi / 4, math.pi / 2) <= 1.0
        assert abs(r.vardrop - 9 / 8) < 4 * r.standard_error

    def test_gaussian_flat(self):
        src = ds.iid_gaussian(2)
        x = src.draw(stream(48), 10**5)
        vals, ses = [], []
        for t in np.arange(36) * math.pi / 36:
            q = ds.UnitDirection.from_angle(t)
            vals.append(ds.objective_amen_var(src, q, estimator="empirical", samples=x))
            ses.append(ds.objective_standard_error(src, q, x, "amen_var"))
        assert max(vals) - min(vals) < 4 * max(ses)

    def test_axis_source(self):
        src = ds.axis_source(sources.discrete([(-1.0, 1 / 3), (0.0, 1 / 3), (1.0, 1 / 3)]))
        r = ds.grid_search_2d(src, 90)
        assert r.best_direction.angle == 0.0
        assert r.objective == "vardrop"
        assert r.vardrop == pytest.approx(0.5, abs=1e-12)

    def test_needs_angles(self, laplace_pair):
        with pytest.raises(ValueError):
            ds.grid_search_2d(laplace_pair, 4)

    def test_ascent_laplace_from_axis(self, laplace_pair):
        hits = 0
        for s in range(20):
            r = ds.ascent_search(laplace_pair, E1, n=20000, rng=stream(49, s), estimator="empirical")
            hits += ds.angle_distance_deg(r.best_direction.angle, math.pi / 4, math.pi / 2) <= 2.0
        assert hits >= 11

    def test_ascent_gaussian_stalls(self):
        src = ds.iid_gaussian(2)
        r = ds.ascent_search(src, E1, rng=stream(50), restarts=2)
        assert r.status == "stalled"

    def test_ascent_anisotropic(self):
        src = ds.gaussian_vector(np.diag([4.0, 1.0]))
        r = ds.ascent_search(src, ds.UnitDirection.from_angle(1.2), rng=stream(51))
        assert ds.angle_distance_deg(r.best_direction.angle, 0.0) < 1.0
        g = ds.grid_search_2d(src, 360)
        assert g.best_direction.angle == 0.0

    def test_ascent_higher_dim(self):
        src = ds.gaussian_vector(np.diag([1.0, 3.0, 0.5, 2.0]))
        r = ds.ascent_search(src, rng=stream(52))
        assert abs(abs(r.best_direction.coords[1]) - 1.0) < 1e-3

    def test_ascent_exhausted(self, laplace_pair):
        r = ds.ascent_search(laplace_pair, E1, steps=1, restarts=1, rng=stream(53))
        assert r.status == "exhausted"

    def test_dominance(self, laplace_pair):
        # the search draws its sample first from the same stream, so x is that sample
        x = laplace_pair.draw(stream(54), 100000)
        best = ds.ascent_search(laplace_pair, None, n=100000, rng=stream(54), estimator="empirical")
        rng = stream(55)
        for _ in range(100):
            q = ds.UnitDirection.normalized(rng.standard_normal(2))
            vd = ds.vardrop_along(laplace_pair, q, estimator="empirical", samples=x)
            se = ds.objective_standard_error(laplace_pair, q, x, "vardrop")
            assert best.vardrop >= vd - 3 * se
