import math

import numpy as np
import pytest

from torusrgg.calibration import coordinate_moments, norm_ppf
from torusrgg.cumulants import (CumulantIndex, EdgeworthParams,
                                MarginalDensityOracle, UnsupportedOrderError,
                                cycle_kappa, edgeworth_joint_leading,
                                edgeworth_marginal_density,
                                joint_cumulant_from_moments, sample_cumulant,
                                set_partitions, triangle_gamma_moment,
                                triangle_gamma_moment_mc)

from conftest import SUITE_SEED

BELL = {1: 1, 2: 2, 3: 5, 4: 15, 5: 52, 6: 203, 7: 877, 8: 4140}


def make_cycle_z(q, d, trials, k=3, seed=SUITE_SEED):
    """Rescaled distance vectors of a length-k cycle: trials x k matrix."""
    m = coordinate_moments(q)
    gen = np.random.default_rng(seed)
    x = gen.random((k, trials, d))
    z = np.empty((trials, k))
    for j in range(k):
        diff = np.abs(x[j] - x[(j + 1) % k])
        np.minimum(diff, 1 - diff, out=diff)
        z[:, j] = ((diff**q).sum(axis=1) - m.mu * d) / (m.sigma * math.sqrt(d))
    return z


class TestSetPartitions:
    def test_bell_numbers(self):
        for r, bell in BELL.items():
            assert len(set_partitions(r)) == bell

    def test_blocks_partition_ground_set(self):
        for pi in set_partitions(4):
            flat = sorted(v for block in pi for v in block)
            assert flat == [0, 1, 2, 3]


class TestJointCumulantFromMoments:
    def test_independent_zero_mean_covariance(self):
        # X, Y independent zero-mean: analytic moments
        moments = {(0,): 0.0, (1,): 0.0, (0, 1): 0.0}
        assert joint_cumulant_from_moments(lambda b: moments[tuple(b)], 2) == 0.0

    def test_variance_of_identical(self):
        # X = Y with Var 1, mean 0
        moments = {(0,): 0.0, (1,): 0.0, (0, 1): 1.0}
        assert joint_cumulant_from_moments(lambda b: moments[tuple(b)], 2) == 1.0

    def test_cycle_moment_structure_reduces_to_mixed_moment(self):
        # zero-mean coordinates whose proper-subset products factor to 0:
        # the full partition sum collapses to E[XYZ]
        exyz = -0.7

        def oracle(block):
            return exyz if len(block) == 3 else 0.0

        assert joint_cumulant_from_moments(oracle, 3) == pytest.approx(exyz, abs=1e-15)

    def test_gaussian_fourth_cumulant_vanishes(self):
        # i.i.d. standard normals: Isserlis moments; kappa_4 = 0 exactly
        def oracle(block):
            r = len(block)
            if r % 2 == 1:
                return 0.0
            if r == 2:
                return 1.0 if block[0] == block[1] else 0.0
            # distinct indices, so all pair moments vanish unless equal
            return 0.0

        # all four indices distinct -> only E[X1 X2 X3 X4]-type moments;
        # with distinct independent standard normals everything is 0
        assert joint_cumulant_from_moments(oracle, 4) == pytest.approx(0.0, abs=1e-15)

        # and for four copies of the SAME standard normal (moments 3, 15, ...)
        gauss_raw = {1: 0.0, 2: 1.0, 3: 0.0, 4: 3.0}
        val = joint_cumulant_from_moments(lambda b: gauss_raw[len(b)], 4)
        assert val == pytest.approx(0.0, abs=1e-12)

    def test_order_limit(self):
        with pytest.raises(UnsupportedOrderError):
            joint_cumulant_from_moments(lambda b: 0.0, 9)


class TestSampleCumulant:
    def test_homogeneity_exact(self, gen):
        data = gen.normal(size=(500, 3)) @ np.array([[1, .5, 0], [0, 1, .3], [.2, 0, 1.0]])
        idx = CumulantIndex((1, 1, 1))
        base = sample_cumulant(data, idx, bootstrap=200, seed=1).value
        scaled = sample_cumulant(2.0 * data, idx, bootstrap=200, seed=1).value
        assert scaled == pytest.approx(2.0**3 * base, rel=1e-12)

    def test_independent_columns_mixed_cumulant_near_zero(self, gen):
        data = gen.normal(size=(5000, 2))
        est = sample_cumulant(data, CumulantIndex((1, 1)), seed=2)
        assert abs(est.value) < 3 * est.stderr + 1e-12

    def test_additivity_for_sums(self, gen):
        cov = np.array([[1.0, 0.6], [0.6, 1.0]])
        L = np.linalg.cholesky(cov)
        a = gen.normal(size=(20_000, 2)) @ L.T
        b = gen.normal(size=(20_000, 2)) @ L.T * 0.5
        idx = CumulantIndex((1, 1))
        ea = sample_cumulant(a, idx, seed=3)
        eb = sample_cumulant(b, idx, seed=4)
        es = sample_cumulant(a + b, idx, seed=5)
        combined = math.hypot(math.hypot(ea.stderr, eb.stderr), es.stderr)
        assert abs(es.value - (ea.value + eb.value)) < 3 * combined

    def test_degenerate_column_flagged(self, gen):
        data = gen.normal(size=(200, 2))
        data[:, 1] = 1.0
        est = sample_cumulant(data, CumulantIndex((1, 1)))
        assert est.degenerate
        assert est.stderr == float("inf")

    def test_trial_floor(self, gen):
        with pytest.raises(ValueError):
            sample_cumulant(gen.normal(size=(50, 2)), CumulantIndex((1, 1)))


class TestTriangleGammaMoment:
    def test_strictly_negative_q123(self):
        for q in (1, 2, 3):
            val = triangle_gamma_moment(q)
            assert val < 0
            assert abs(val) > 1e-6

    def test_q1_matches_mc_oracle(self):
        quad_val = triangle_gamma_moment(1)
        mc, se = triangle_gamma_moment_mc(1, samples=20_000_000,
                                          master_seed=SUITE_SEED)
        assert abs(quad_val - mc) < 3 * se

    def test_q2_matches_mc_oracle(self):
        quad_val = triangle_gamma_moment(2)
        mc, se = triangle_gamma_moment_mc(2, samples=20_000_000,
                                          master_seed=SUITE_SEED)
        assert abs(quad_val - mc) < 3 * se

    def test_gamma_is_centered(self):
        from scipy.integrate import quad
        for q in (1, 2, 3):
            mu = coordinate_moments(q).mu
            val, _ = quad(lambda x: 2 * (x**q - mu), 0, 0.5, epsabs=1e-13)
            assert abs(val) < 1e-10


class TestCycleKappa:
    def test_k3_composition(self):
        for q in (1, 2):
            sigma = coordinate_moments(q).sigma
            ck = cycle_kappa(q, 3, 64)
            assert ck.rho == pytest.approx(triangle_gamma_moment(q) / sigma**3,
                                           rel=1e-9)
            assert ck.rho < 0

    def test_dimension_scaling_exact(self):
        for k in (3, 4):
            a = cycle_kappa(2, k, 16, mc_samples=200_000, master_seed=1)
            b = cycle_kappa(2, k, 64, mc_samples=200_000, master_seed=1)
            assert b.kappa_d / a.kappa_d == pytest.approx(2.0 ** -(k - 2), rel=1e-12)

    def test_zeta_scaling_exact(self):
        a = cycle_kappa(2, 3, 64, zeta=1.0)
        b = cycle_kappa(2, 3, 64, zeta=2.0)
        assert b.rho / a.rho == pytest.approx(2.0**-3, rel=1e-12)

    def test_k4_monte_carlo_reports_error(self):
        ck = cycle_kappa(1, 4, 64, mc_samples=500_000, master_seed=SUITE_SEED)
        assert ck.method == "monte_carlo"
        assert ck.stderr > 0


class TestEdgeworthMarginal:
    def test_q1_order3_is_plain_gaussian(self):
        xs = np.linspace(-4, 4, 101)
        phi = np.exp(-xs**2 / 2) / math.sqrt(2 * math.pi)
        assert np.array_equal(edgeworth_marginal_density(xs, 1, 100, 3), phi)

    def test_order2_at_zero(self):
        assert edgeworth_marginal_density(0.0, 2, 64, 2) \
            == pytest.approx(1 / math.sqrt(2 * math.pi), abs=1e-12)

    def test_q2_d256_against_oracle(self):
        oracle = MarginalDensityOracle(2, 256)
        val = edgeworth_marginal_density(1.0, 2, 256, 3)
        assert abs(val - oracle(1.0)) < 0.01

    def test_deviation_shrinks_with_d(self):
        xs = np.linspace(-4, 4, 161)
        dev = {}
        for d in (16, 256):
            oracle = MarginalDensityOracle(2, d)
            dev[d] = np.max(np.abs(edgeworth_marginal_density(xs, 2, d, 3) - oracle(xs)))
        assert dev[256] < dev[16]


class TestJointLeading:
    def test_kappa_zero_reduces_to_ground_state(self):
        params = EdgeworthParams(d=64, k=3, kappa=0.0)
        x = np.array([0.3, -0.2, 1.0])
        expect = np.prod(edgeworth_marginal_density(x, 2, 64, 3))
        assert edgeworth_joint_leading(x, params, 2) == pytest.approx(expect, rel=1e-14)

    def test_correction_vanishes_at_origin(self):
        kap = cycle_kappa(2, 3, 64).rho
        with_k = edgeworth_joint_leading(np.zeros(3), EdgeworthParams(d=64, k=3, kappa=kap), 2)
        without = edgeworth_joint_leading(np.zeros(3), EdgeworthParams(d=64, k=3, kappa=0.0), 2)
        assert with_k == pytest.approx(without, rel=1e-14)

    def test_correction_integral_identity(self):
        # integral of the correction over (-inf, tau_hat]^3 equals
        # -kappa d^{-1/2} phi(tau_hat)^3; cross-checked by a genuine 3-D
        # tensor quadrature of (joint - ground state)
        q, d, k = 1, 256, 3
        kap = cycle_kappa(q, k, d).rho
        tau_hat = norm_ppf(0.3)
        nodes, weights = np.polynomial.legendre.leggauss(96)
        lo = -10.0
        xs = 0.5 * (nodes + 1) * (tau_hat - lo) + lo
        ws = weights * 0.5 * (tau_hat - lo)
        grid = np.stack(np.meshgrid(xs, xs, xs, indexing="ij"), axis=-1)
        params = EdgeworthParams(d=d, k=3, kappa=kap)
        joint = edgeworth_joint_leading(grid.reshape(-1, 3), params, q)
        ground = edgeworth_joint_leading(grid.reshape(-1, 3),
                                         EdgeworthParams(d=d, k=3, kappa=0.0), q)
        corr = (joint - ground).reshape(96, 96, 96)
        numeric = float(np.einsum("ijk,i,j,k->", corr, ws, ws, ws))
        phi_tau = math.exp(-tau_hat**2 / 2) / math.sqrt(2 * math.pi)
        analytic = -kap * d**-0.5 * phi_tau**3
        assert numeric == pytest.approx(analytic, abs=1e-8)


class TestMarginalDensityOracle:
    def test_symmetry_q1(self):
        oracle = MarginalDensityOracle(1, 64)
        xs = np.linspace(0.1, 4.0, 25)
        assert np.max(np.abs(oracle(xs) - oracle(-xs))) < 1e-9

    def test_normalization(self):
        oracle = MarginalDensityOracle(2, 64)
        xs = np.linspace(-15, 15, 60_001)
        integral = np.trapezoid(oracle(xs), xs)
        assert integral == pytest.approx(1.0, abs=1e-6)

    def test_d1_q1_standardized_uniform(self):
        oracle = MarginalDensityOracle(1, 1)
        # X ~ U(0, 1/2) standardized: constant density 2*sigma on +-0.25/sigma
        exact = 2 * math.sqrt(1 / 48)
        half_width = 0.25 / math.sqrt(1 / 48)
        for x in np.linspace(-0.8 * half_width, 0.8 * half_width, 9):
            assert oracle(float(x)) == pytest.approx(exact, abs=1e-6)

    def test_underflow_flag(self):
        oracle = MarginalDensityOracle(2, 64)
        assert oracle(16.0) == 0.0
        assert oracle.underflow(16.0).all()


class TestCycleVectorCumulants:
    """Sampled mixed cumulants of a length-3 cycle's rescaled distances."""

    trials = 100_000
    d = 256

    @pytest.fixture(scope="class")
    def z(self):
        return make_cycle_z(q=2, d=self.d, trials=self.trials)

    def test_vanishing_mixed_cumulants_with_zero_slot(self, z):
        for s in ((1, 1, 0), (2, 1, 0), (1, 0, 1)):
            est = sample_cumulant(z, CumulantIndex(s), seed=11)
            assert abs(est.value) < 4 * est.stderr

    def test_full_mixed_cumulant_equals_mixed_moment(self, z):
        est = sample_cumulant(z, CumulantIndex((1, 1, 1)), seed=12)
        moment = float(np.mean(z[:, 0] * z[:, 1] * z[:, 2]))
        assert abs(est.value - moment) < 4 * est.stderr
