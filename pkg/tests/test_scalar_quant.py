import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from onebit import scalar_quant as sq
from onebit import sources
from onebit.rng import stream

THREE = sources.discrete([(-1.0, 1 / 3), (0.0, 1 / 3), (1.0, 1 / 3)])
SYM_LOG_CONCAVE = [sources.uniform(1.0), sources.gaussian(1.0), sources.laplace(1.0), sources.triangular(1.0),
                   sources.laplace_sum(1.0, 0.5), sources.laplace_sum(0.3, 0.3), sources.gaussian(3.7)]


def ulps(a, b):
    return abs(float(a) - float(b)) / np.spacing(max(abs(float(a)), abs(float(b)), 1e-300))


def empirical_oracle(values):
    """O(n^2) direct search over sorted splits, with the MSE computed from scratch."""
    v = np.sort(np.asarray(values, dtype=float))
    n = v.size
    best = (math.inf, None)
    for k in range(1, n):
        if v[k - 1] == v[k]:
            continue
        lo, hi = v[:k], v[k:]
        err = (np.sum((lo - lo.mean()) ** 2) + np.sum((hi - hi.mean()) ** 2)) / n
        if err < best[0]:
            best = (err, k)
    return best


class TestQuantizer:
    def test_order_enforced(self):
        with pytest.raises(ValueError):
            sq.OneBitQuantizer(0.0, 1.0, -1.0)
        with pytest.raises(ValueError):
            sq.OneBitQuantizer(0.0, 1.0, 1.0)

    def test_encode_convention(self):
        q = sq.OneBitQuantizer(0.5, -1.0, 2.0)
        np.testing.assert_array_equal(q.encode([0.4999, 0.5, 3.0]), [0, 1, 1])
        np.testing.assert_array_equal(q([0.0, 0.5]), [-1.0, 2.0])

    def test_reflect(self):
        q = sq.OneBitQuantizer(-0.5, -1.0, 0.5)
        r = sq.reflect(q)
        assert (r.threshold, r.recon_low, r.recon_high) == (0.5, -0.5, 1.0)
        assert sq.reflect(r) == q


class TestAmenability:
    @pytest.mark.parametrize("src,zeta", [
        (sources.uniform(1.0), 0.75),
        (sources.triangular(1.0), 2 / 3),
        (sources.gaussian(1.0), 2 / math.pi),
        (sources.laplace(1.0), 0.5),
    ])
    def test_standard_values(self, src, zeta):
        assert abs(sq.amenability(src) - zeta) < 1e-12

    def test_x_eps_delta_formula(self):
        # exact rational evaluation of the closed form at eps=0.1, delta=0.01
        e, d = Fraction(1, 10), Fraction(1, 100)
        exact = ((1 - 2 * d) * e + 2 * d) ** 2 / ((1 - 2 * d) * e * e + 2 * d)
        assert float(exact) == pytest.approx(0.4672483221476511, rel=1e-15)
        assert sq.amenability(sources.x_eps_delta(0.1, 0.01)) == pytest.approx(float(exact), abs=1e-12)
        assert sq.amenability_x_eps_delta(0.1, 0.01) == pytest.approx(float(exact), abs=1e-15)

    @pytest.mark.parametrize("eps", [0.3, 0.1, 0.01, 0.001])
    @pytest.mark.parametrize("delta", [0.1, 0.01, 1e-4])
    def test_x_eps_delta_source_matches_formula(self, eps, delta):
        assert sq.amenability(sources.x_eps_delta(eps, delta)) == pytest.approx(
            sq.amenability_x_eps_delta(eps, delta), abs=1e-12)

    def test_vanishes_along_family(self):
        z = [sq.amenability(sources.x_eps_delta(e, 1e-4)) for e in (0.1, 0.01, 0.001)]
        assert z[0] > z[1] > z[2]
        assert sq.amenability(sources.x_eps_delta(1e-5, 1e-8)) < 1e-2

    def test_two_point_is_one(self):
        assert sq.amenability(sources.discrete([(-1.0, 0.5), (1.0, 0.5)])) == 1.0

    @settings(max_examples=100, deadline=None)
    @given(st.sampled_from(SYM_LOG_CONCAVE + [THREE, sources.x_eps_delta(0.2, 0.05)]),
           st.floats(-100, 100).filter(lambda a: abs(a) > 1e-3))
    def test_scale_free(self, src, a):
        z = sq.amenability(src)
        assert abs(sq.amenability(sources.scale(src, a)) - z) < 1e-12
        assert 0.0 <= z <= 1.0


class TestSweep:
    def test_gaussian(self):
        r = sq.vardrop_sweep(sources.gaussian(1.0))
        assert r.vardrop == pytest.approx(2 / math.pi, abs=1e-12)
        assert r.argmax_threshold == 0.0
        assert r.quantizer.recon_high == pytest.approx(math.sqrt(2 / math.pi), abs=1e-12)
        assert r.quantizer.recon_low == pytest.approx(-math.sqrt(2 / math.pi), abs=1e-12)

    def test_uniform(self):
        r = sq.vardrop_sweep(sources.uniform(1.0))
        assert r.vardrop == pytest.approx(0.25, abs=1e-12)
        assert r.argmax_threshold == 0.0

    def test_three_point(self):
        r = sq.vardrop_sweep(THREE)
        assert (r.quantizer.recon_low, r.quantizer.recon_high) == (-1.0, 0.5)
        assert ulps(r.vardrop, 0.5) <= 2
        assert ulps(r.mse, 1 / 6) <= 2

    @pytest.mark.parametrize("src", SYM_LOG_CONCAVE, ids=repr)
    def test_symmetric_log_concave_is_zeta_times_variance(self, src):
        r = sq.vardrop_sweep(src)
        assert abs(r.vardrop - sq.amenability(src) * sources.variance(src)) < 1e-8
        assert abs(r.argmax_threshold) < 1e-6
        assert r.quantizer.is_symmetric or abs(r.quantizer.recon_low + r.quantizer.recon_high) < 1e-9

    def test_explicit_thresholds(self):
        r = sq.vardrop_sweep(sources.gaussian(1.0), thresholds=[-1.0, 0.5, 1.0], refine=False)
        assert r.argmax_threshold == 0.5

    def test_degenerate_candidates_rejected(self):
        with pytest.raises(ValueError):
            sq.vardrop_sweep(sources.uniform(1.0), thresholds=[-5.0, 5.0])
        with pytest.raises(ValueError):
            sq.vardrop_sweep(THREE, thresholds=[2.0])

    def test_mse_identity(self):
        for src in SYM_LOG_CONCAVE + [THREE]:
            r = sq.vardrop_sweep(src)
            assert abs(r.mse - (r.variance - r.vardrop)) < 1e-10
            assert abs(sq.mse(src, r.quantizer) - r.mse) < 1e-10


@st.composite
def discrete_sources(draw, max_atoms=12):
    m = draw(st.integers(2, max_atoms))
    xs = draw(st.lists(st.integers(-40, 40), min_size=m, max_size=m, unique=True))
    ws = draw(st.lists(st.integers(1, 20), min_size=m, max_size=m))
    # dyadic-friendly masses keep the zero-mean check exact enough
    tot = sum(ws)
    ms = np.array(ws, dtype=float) / tot
    xs = np.array(xs, dtype=float) / 8
    mu = math.fsum(xs * ms)
    xs = xs - mu
    assume(abs(math.fsum(xs * ms)) < 1e-13)
    return sources.discrete(list(zip(xs, ms)))


class TestDiscreteOracle:
    @settings(max_examples=80, deadline=None)
    @given(discrete_sources(10))
    def test_sweep_equals_bruteforce(self, src):
        r = sq.vardrop_sweep(src)
        err, upper, lo, hi = sq.brute_force_discrete(src)
        sweep_upper = frozenset(np.flatnonzero(src.locs >= r.argmax_threshold).tolist())
        # a tie between partitions is fine as long as both are optimal
        if sweep_upper != upper:
            alt = sum(Fraction(float(p)) * (Fraction(float(x)) - (Fraction(r.quantizer.recon_high) if i in sweep_upper
                      else Fraction(r.quantizer.recon_low))) ** 2
                      for i, (x, p) in enumerate(zip(src.locs, src.masses)))
            assert abs(float(alt - err)) <= 1e-12 * max(float(err), 1e-300)
        else:
            assert abs(r.quantizer.recon_low - float(lo)) <= 1e-12 * max(1.0, abs(float(lo)))
            assert abs(r.quantizer.recon_high - float(hi)) <= 1e-12 * max(1.0, abs(float(hi)))
        assert abs(r.mse - float(err)) <= 1e-12 * max(float(r.variance), 1e-300)

    def test_twelve_atoms(self):
        rng = stream(31)
        for _ in range(3):
            xs = rng.normal(size=12)
            ms = rng.uniform(0.2, 1.0, 12)
            ms /= ms.sum()
            xs -= np.sum(xs * ms)
            src = sources.discrete(list(zip(xs, ms)))
            r = sq.vardrop_sweep(src)
            err, upper, lo, hi = sq.brute_force_discrete(src)
            assert frozenset(np.flatnonzero(src.locs >= r.argmax_threshold).tolist()) == upper
            assert ulps(r.quantizer.recon_low, lo) <= 8 and ulps(r.quantizer.recon_high, hi) <= 8
            assert abs(r.mse - float(err)) <= 1e-14

    def test_bruteforce_three_point(self):
        err, upper, lo, hi = sq.brute_force_discrete(THREE)
        assert isinstance(err, Fraction)
        assert float(err) == pytest.approx(1 / 6, rel=1e-15)
        assert upper == frozenset({1, 2})
        assert (float(lo), float(hi)) == (-1.0, 0.5)

    def test_bruteforce_rejects_continuous(self):
        with pytest.raises(ValueError):
            sq.brute_force_discrete(sources.gaussian(1.0))

    @settings(max_examples=100, deadline=None)
    @given(discrete_sources(8))
    def test_vardrop_bounded_by_variance(self, src):
        r = sq.vardrop_sweep(src)
        assert 0.0 <= r.vardrop <= r.variance * (1 + 1e-12)
        if len(src.locs) > 2:
            assert r.vardrop < r.variance
        else:
            assert r.vardrop == pytest.approx(r.variance, rel=1e-12)


class TestSymmetric:
    def test_three_point(self):
        r = sq.best_symmetric(THREE)
        assert r.quantizer.recon_high == pytest.approx(2 / 3, rel=1e-15)
        assert r.mse == pytest.approx(2 / 9, rel=1e-14)

    def test_three_point_by_minimisation(self):
        # minimise (1/3)(a-1)^2 + (1/3)a^2 + (1/3)(1-a)^2 on a fine grid; atoms at 0 go up
        a = np.linspace(0, 1.5, 150001)
        f = ((-1 + a) ** 2 + (0 - a) ** 2 + (1 - a) ** 2) / 3
        assert sq.best_symmetric(THREE).mse == pytest.approx(f.min(), abs=1e-9)

    def test_gaussian_uniform(self):
        g = sq.best_symmetric(sources.gaussian(1.0))
        assert g.quantizer.recon_high == pytest.approx(math.sqrt(2 / math.pi), rel=1e-15)
        assert g.mse == pytest.approx(1 - 2 / math.pi, rel=1e-14)
        u = sq.best_symmetric(sources.uniform(1.0))
        assert u.quantizer.recon_high == pytest.approx(0.5, rel=1e-15)
        assert u.mse == pytest.approx(1 / 12, rel=1e-12)

    def test_unconstrained_beats_symmetric_on_three_point(self):
        assert sq.vardrop_sweep(THREE).mse < sq.best_symmetric(THREE).mse


class TestLloyd:
    def test_gaussian(self):
        q = sq.lloyd_max(sources.gaussian(1.0), 0.5)
        assert abs(q.threshold) < 1e-9
        assert q.recon_high == pytest.approx(math.sqrt(2 / math.pi), abs=1e-9)

    def test_laplace(self):
        # the Laplace map has unit slope at 0, so iterates stop about sqrt(2 tol) away
        tol = 1e-10
        q = sq.lloyd_max(sources.laplace(1.0), -2.0, tol=tol)
        assert abs(q.threshold) < 4 * math.sqrt(2 * tol)
        assert q.recon_low == pytest.approx(-1.0, abs=1e-4)
        assert q.recon_high == pytest.approx(1.0, abs=1e-4)

    def test_three_point_both_fixed_points(self):
        a = sq.lloyd_max(THREE, -0.25)
        assert (a.recon_low, a.recon_high, a.threshold) == (-1.0, 0.5, -0.25)
        b = sq.lloyd_max(THREE, 0.25)
        assert (b.recon_low, b.recon_high, b.threshold) == (-0.5, 1.0, 0.25)
        assert sq.mse(THREE, a) == pytest.approx(sq.mse(THREE, b), rel=1e-15)

    @pytest.mark.parametrize("src,init", [(sources.gaussian(2.0), 1.3), (sources.uniform(1.0), -0.6),
                                          (sources.triangular(2.0), 0.9), (sources.laplace_sum(1.0, 0.5), -1.0)])
    def test_fixed_point_conditions(self, src, init):
        tol = 1e-10
        q = sq.lloyd_max(src, init, tol=tol)
        ref = sq.lloyd_quantizer(src, q.threshold)
        assert abs(q.threshold - 0.5 * (q.recon_low + q.recon_high)) < 1e-12
        assert abs(ref.recon_low - q.recon_low) < 1e-6
        assert abs(ref.recon_high - q.recon_high) < 1e-6

    def test_errors_carry_last_iterate(self):
        with pytest.raises(sq.ConvergenceError) as ei:
            sq.lloyd_max(sources.gaussian(1.0), 0.5, max_iter=2)
        assert isinstance(ei.value.last, sq.OneBitQuantizer)
        with pytest.raises(sq.EmptyCellError):
            sq.lloyd_max(sources.uniform(1.0), 2.0)
        assert not issubclass(sq.EmptyCellError, sq.ConvergenceError)


class TestMse:
    def test_examples(self):
        g = sources.gaussian(1.0)
        assert sq.mse(g, sq.best_symmetric(g).quantizer) == pytest.approx(1 - 2 / math.pi, abs=1e-12)
        assert sq.mse(THREE, sq.OneBitQuantizer(-0.5, -1.0, 0.5)) == pytest.approx(1 / 6, rel=1e-15)

    @settings(max_examples=100, deadline=None)
    @given(st.sampled_from(SYM_LOG_CONCAVE), st.floats(-1.5, 1.5))
    def test_lloyd_quantizer_identity(self, src, w):
        assume(1e-6 < float(sources.tail_prob(src, w)) < 1 - 1e-6)
        q = sq.lloyd_quantizer(src, w)
        assert sq.mse(src, q) == pytest.approx(sources.variance(src) - float(sq.drop_at(src, w)), abs=1e-10)

    def test_mse_by_monte_carlo(self):
        src = sources.laplace(1.0)
        q = sq.OneBitQuantizer(0.3, -0.8, 1.4)
        x = sources.draw(src, 10**6, stream(5))
        err = (x - q(x)) ** 2
        assert abs(sq.mse(src, q) - err.mean()) < 4 * err.std() / 1000


class TestEmpirical:
    def test_two_point(self):
        r = sq.empirical_vardrop(sources.SampleSet.from_values([-1, -1, 1, 1]), min_cell=1)
        assert r.vardrop == 1.0
        assert r.mse == 0.0

    def test_gaussian_laplace(self):
        g = sq.empirical_vardrop(sources.sample(sources.gaussian(1.0), 10**6, stream(21)))
        assert abs(g.vardrop - 2 / math.pi) < 0.01
        lp = sq.empirical_vardrop(sources.sample(sources.laplace(1.0), 10**6, stream(22)))
        assert abs(lp.vardrop - 1.0) < 0.02

    def test_rejects_small(self):
        with pytest.raises(ValueError):
            sq.empirical_vardrop(sources.SampleSet.from_values(np.arange(10.0)), min_cell=8)
        with pytest.raises(sq.DegenerateSourceError):
            sq.empirical_vardrop(sources.SampleSet.from_values(np.zeros(40)))

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.integers(-6, 6), min_size=4, max_size=60))
    def test_matches_direct_search(self, vals):
        v = np.array(vals, dtype=float)
        assume(np.ptp(v) > 0)
        err, k = empirical_oracle(v)
        r = sq.empirical_vardrop(sources.SampleSet.from_values(v), min_cell=1)
        assert r.mse == pytest.approx(err, abs=1e-9)
        # the reported quantizer attains the reported error on the data
        assert np.mean((v - r.quantizer(v)) ** 2) == pytest.approx(err, abs=1e-9)

    @pytest.mark.parametrize("n", [10**4, 10**5, 10**6])
    def test_convergence_over_seeds(self, n):
        src = sources.gaussian(1.0)
        target = sq.vardrop_sweep(src).vardrop
        errs = [abs(sq.empirical_vardrop(sources.sample(src, n, stream(100, n, s))).vardrop - target)
                for s in range(20)]
        assert max(errs) < 5 * sources.variance(src) / math.sqrt(n)

    def test_standard_error_matches_replicates(self):
        src, n = sources.laplace(1.0), 4000
        reps, ses = [], []
        for s in range(300):
            x = sources.draw(src, n, stream(200, s))
            r = sq.empirical_vardrop(sources.SampleSet.from_values(x))
            reps.append(r.vardrop)
            ses.append(sq.vardrop_standard_error(x, r.argmax_threshold))
        ratio = np.mean(ses) / np.std(reps)
        assert 0.8 < ratio < 1.25
