import math

import numpy as np
import pytest

from torusrgg import (INFINITY, ModelConfig, arc_vector_q, arc_vectors_linf,
                      build_rgg, center_adjacency, count_large_eigs,
                      gram_offdiag, rayleigh, sample_gnp, sample_positions,
                      spectrum)
from torusrgg.calibration import calibrate_threshold_linf
from torusrgg.spectral import default_arc_half_width

from conftest import SUITE_SEED


class TestCenterAdjacency:
    def test_empty_graph(self):
        M = center_adjacency(np.zeros((4, 4), dtype=bool), 0.3)
        assert np.all(M == -0.3)

    def test_trace(self):
        A = np.ones((6, 6), dtype=bool)
        np.fill_diagonal(A, False)
        M = center_adjacency(A, 0.25)
        assert np.trace(M) == pytest.approx(-6 * 0.25, abs=1e-12)

    def test_p_zero_is_adjacency(self):
        A = np.zeros((4, 4), dtype=bool)
        A[0, 1] = A[1, 0] = True
        assert np.array_equal(center_adjacency(A, 0.0), A.astype(float))


class TestSpectrum:
    def test_complete_graph(self):
        n = 8
        A = np.ones((n, n), dtype=float)
        np.fill_diagonal(A, 0.0)
        rep = spectrum(A)
        assert rep.eigenvalues[0] == pytest.approx(n - 1, abs=1e-9)
        assert np.allclose(rep.eigenvalues[1:], -1.0, atol=1e-9)

    def test_zero_matrix(self):
        rep = spectrum(np.zeros((5, 5)))
        assert np.all(rep.eigenvalues == 0.0)
        assert rep.lambda2_abs_max == 0.0

    def test_asymmetric_rejected(self):
        M = np.zeros((3, 3))
        M[0, 1] = 1e-6
        with pytest.raises(ValueError):
            spectrum(M)

    def test_trace_conservation_on_rgg(self, gen):
        X = gen.uniform(-0.5, 0.5, (100, 8))
        A = build_rgg(X, 0.6, 2)
        p = A.sum() / (100 * 99)
        rep = spectrum(center_adjacency(A, p))
        assert abs(rep.eigenvalues.sum() + 100 * p) < 1e-6 * 100

    @pytest.mark.slow
    def test_gnp_second_eigenvalue_scale(self):
        n, p = 1000, 0.5
        ok = 0
        for t in range(20):
            c = ModelConfig(n=n, d=1, p=p, norm=2, master_seed=SUITE_SEED)
            rep = spectrum(center_adjacency(sample_gnp(c, t), p))
            ok += rep.lambda2_abs_max <= 3 * math.sqrt(n * p)
        assert ok >= 19


class TestArcVectorQ:
    def test_all_at_origin(self):
        X = np.zeros((10, 3))
        v = arc_vector_q(X, 0, 0.1)
        assert np.all(v.entries == 1.0)
        assert np.allclose(v.normalized, 1 / math.sqrt(10))

    def test_membership_example(self):
        X = np.array([[0.0], [0.49], [0.25], [-0.01]])
        v = arc_vector_q(X, 0, 1 / 8)
        assert list(v.entries) == [1.0, -1.0, 0.0, 1.0]

    def test_arc_sizes_binomial(self):
        c = ModelConfig(n=2000, d=2, p=0.5, norm=2, master_seed=SUITE_SEED)
        X = sample_positions(c, 0)
        v = arc_vector_q(X, 0, 1 / 8)
        na = int(np.sum(v.entries == 1.0))
        nb = int(np.sum(v.entries == -1.0))
        expect = 2 * (1 / 8) * 2000
        se = math.sqrt(2000 * 0.25 * 0.75)
        assert abs(na - expect) < 4 * se
        assert abs(nb - expect) < 4 * se

    def test_c_range(self):
        with pytest.raises(ValueError):
            arc_vector_q(np.zeros((4, 1)), 0, 0.3)

    def test_default_half_width_below_mean(self):
        for q in (1, 2, 3):
            c = default_arc_half_width(q)
            assert 0 < c < 0.25


class TestArcVectorsLinf:
    def setup_method(self):
        self.cfg = ModelConfig(n=500, d=4, p=0.4, norm=INFINITY,
                               master_seed=SUITE_SEED)
        self.thr = calibrate_threshold_linf(4, 0.4)
        self.X = sample_positions(self.cfg, 1)

    def test_vector_count(self):
        xi = self.thr.extra["xi"]
        vecs = arc_vectors_linf(self.X, 0, xi)
        assert len(vecs) == int(1 / xi)

    def test_disjoint_supports(self):
        vecs = arc_vectors_linf(self.X, 1, self.thr.extra["xi"])
        support_sum = sum(np.abs(v.entries) for v in vecs)
        assert support_sum.max() <= 1.0

    def test_no_inter_cluster_edges(self):
        A = build_rgg(self.X, self.thr.tau, INFINITY)
        for i in range(4):
            for v in arc_vectors_linf(self.X, i, self.thr.extra["xi"]):
                plus = v.entries == 1.0
                minus = v.entries == -1.0
                assert not A[np.ix_(plus, minus)].any()

    def test_xi_range(self):
        with pytest.raises(ValueError):
            arc_vectors_linf(self.X, 0, 0.7)


class TestRayleighAndGram:
    def test_identity_matrix(self):
        v = np.zeros(4)
        v[2] = 1.0
        assert rayleigh(np.eye(4), v) == pytest.approx(1.0)

    def test_diagonal(self):
        M = np.diag([3.0, -1.0])
        assert rayleigh(M, np.array([1.0, 0.0])) == pytest.approx(3.0)

    def test_zero_vector_rejected(self):
        with pytest.raises(ValueError):
            rayleigh(np.eye(3), np.zeros(3))

    def test_gram_orthonormal(self):
        assert gram_offdiag([np.eye(4)[i] for i in range(4)]) == 0.0

    def test_gram_duplicate(self):
        v = np.array([1.0, 0.0])
        assert gram_offdiag([v, v]) == pytest.approx(1.0)

    def test_arc_vector_gram_small(self):
        c = ModelConfig(n=500, d=8, p=0.5, norm=2, master_seed=SUITE_SEED)
        X = sample_positions(c, 2)
        vecs = [arc_vector_q(X, i, default_arc_half_width(2)) for i in range(8)]
        assert gram_offdiag(vecs) <= 5 * math.log(500) / math.sqrt(500)

    @pytest.mark.slow
    def test_gram_schmidt_preserves_rayleigh_lift(self):
        # orthonormalizing the arc vectors keeps at least half of them
        # above the 0.1 np/sqrt(d) Rayleigh threshold
        from torusrgg.calibration import calibrate_threshold_lq
        n, d, p = 2000, 16, 0.5
        c = ModelConfig(n=n, d=d, p=p, norm=2, master_seed=SUITE_SEED)
        tau = calibrate_threshold_lq(2, d, p, sample_budget=500_000,
                                     master_seed=SUITE_SEED,
                                     validation_budget=10_000).tau
        X = sample_positions(c, 3)
        M = center_adjacency(build_rgg(X, tau, 2), p)
        Y = np.stack([arc_vector_q(X, i, default_arc_half_width(2)).normalized
                      for i in range(d)]).T
        Q, _ = np.linalg.qr(Y)
        threshold = 0.1 * n * p / math.sqrt(d)
        lifted = sum(rayleigh(M, Q[:, i] / np.linalg.norm(Q[:, i])) >= threshold
                     for i in range(d))
        assert lifted >= d / 2


class TestCountLargeEigs:
    def test_limits(self, gen):
        X = gen.uniform(-0.5, 0.5, (50, 4))
        A = build_rgg(X, 0.4, 2)
        rep = spectrum(center_adjacency(A, 0.5))
        assert count_large_eigs(rep, 1e-9, "lq", n=50, p=0.5, d=4) == 0
        assert count_large_eigs(rep, 1e12, "lq", n=50, p=0.5, d=4) == 49

    def test_bad_regime(self, gen):
        rep = spectrum(np.zeros((3, 3)))
        with pytest.raises(ValueError):
            count_large_eigs(rep, 1.0, "l3", n=3, p=0.5, d=4)

    def test_counts_recorded_in_report(self, gen):
        rep = spectrum(np.diag([5.0, 3.0, 1.0, -4.0]))
        count_large_eigs(rep, 1.0, "lq", n=4, p=0.5, d=4)
        assert rep.counts  # threshold -> count map populated
