import numpy as np
import pytest

from cstomo import certify, sampling, states
from cstomo.sampling import KIND_WITH, NoiseModel, SamplingScheme


def full_exact_record(rho, n):
    sch = sampling.draw_uniform(n, 4**n, replacement=False, seed=0)
    return sampling.measure(rho, sch, NoiseModel.exact(), seed=0)


class TestPurityEstimate:
    def test_maximally_mixed_full_record(self):
        n, d = 2, 4
        rec = full_exact_record(np.eye(d) / d, n)
        assert certify.purity_estimate(rec) == pytest.approx(1 / d, abs=1e-14)

    @pytest.mark.parametrize("rank", [1, 2, 4])
    def test_parseval_identity_full_record(self, rank):
        # with every label measured exactly, S is tr(rho^2) by Parseval
        n, d = 2, 4
        rho = states.random_rank_r_state(d, rank, seed=rank)
        rec = full_exact_record(rho, n)
        assert certify.purity_estimate(rec) == pytest.approx(
            states.purity(rho), abs=1e-12
        )

    def test_parseval_identity_n3(self):
        rho = states.random_rank_r_state(8, 3, seed=9)
        rec = full_exact_record(rho, 3)
        assert certify.purity_estimate(rec) == pytest.approx(
            states.purity(rho), abs=1e-12
        )

    def test_unbiased_monte_carlo(self):
        # mean of S over 5000 random m=64 records within 1% of the truth
        n, d, m = 3, 8, 64
        rho = states.random_rank_r_state(d, 2, seed=5)
        total = 0.0
        for seed in range(5000):
            sch = sampling.draw_uniform(n, m, replacement=True, seed=seed)
            rec = sampling.measure(rho, sch, NoiseModel.exact(), seed=0)
            total += certify.purity_estimate(rec)
        mean = total / 5000
        assert mean == pytest.approx(states.purity(rho), rel=0.01)

    def test_hybrid_rejected(self):
        rho = states.random_rank_r_state(8, 1, seed=0)
        sch = sampling.draw_hybrid(3, 2, seed=1)
        rec = sampling.measure(rho, sch, NoiseModel.exact(), seed=0)
        with pytest.raises(ValueError, match="hybrid"):
            certify.purity_estimate(rec)
        with pytest.raises(ValueError, match="hybrid"):
            certify.certificate(rec, 0.0, 2.0)


class TestDelta1Bound:
    def test_pure_state_bound_zero(self):
        assert certify.delta1_bound(1.0) == 0.0

    def test_direct_evaluation(self):
        assert certify.delta1_bound(0.9) == pytest.approx(np.sqrt(2) * 0.1, abs=1e-12)

    def test_monotone_decreasing(self):
        grid = np.linspace(0.1, 1.0, 40)
        vals = [certify.delta1_bound(p) for p in grid]
        assert np.all(np.diff(vals) < 0)

    def test_out_of_range_rejected(self):
        for bad in (-0.1, 1.1):
            with pytest.raises(ValueError):
                certify.delta1_bound(bad)

    def test_bounds_true_distance_near_pure(self):
        # exact purity in, eigendecomposition gives the true 2-norm distance
        rng = np.random.default_rng(0)
        d = 16
        for trial in range(100):
            lam1 = rng.uniform(0.6, 0.98)
            rest = rng.dirichlet(np.ones(d - 1)) * (1 - lam1)
            profile = np.sort(np.concatenate([[lam1], rest]))[::-1]
            rho = states.state_from_profile(profile, seed=trial)
            lam, V = np.linalg.eigh(rho)
            psi = V[:, -1]
            true_dist = np.linalg.norm(
                rho - np.outer(psi, psi.conj()), "fro"
            )
            assert true_dist <= certify.delta1_bound(states.purity(rho)) + 1e-12


class TestCertificate:
    def test_pure_state_full_record_formula(self):
        n, d = 3, 8
        rho = states.random_rank_r_state(d, 1, seed=7)
        rec = full_exact_record(rho, n)
        cert = certify.certificate(rec, delta2=0.0, mu=2.0, top_eigenvalue=1.0)
        t = np.sqrt(8.0 / d)
        assert cert.t == pytest.approx(t, abs=1e-12)
        assert cert.purity_lower == pytest.approx(1.0 - t, abs=1e-10)
        assert cert.confidence == pytest.approx(1 - 2 * np.exp(-2.0), abs=1e-12)

    def test_maximally_mixed_not_certifiable(self):
        n, d = 3, 8
        rec = full_exact_record(np.eye(d) / d, n)
        cert = certify.certificate(rec, delta2=0.0, mu=2.0, top_eigenvalue=1 / d)
        assert not cert.valid
        assert cert.purity_lower < 0.5

    def test_m_too_small_flagged(self):
        n, d = 3, 8
        rho = states.random_rank_r_state(d, 1, seed=8)
        sch = sampling.draw_uniform(n, 4, replacement=True, seed=9)
        rec = sampling.measure(rho, sch, NoiseModel.exact(), seed=0)
        cert = certify.certificate(rec, delta2=0.0, mu=2.0, top_eigenvalue=1.0)
        assert not cert.valid
        assert "t=" in cert.reason

    def test_never_valid_without_top_eigenvalue_margin(self):
        n, d = 3, 8
        rho = states.random_rank_r_state(d, 1, seed=10)
        sch = sampling.draw_uniform(n, 2048, replacement=True, seed=11)
        rec = sampling.measure(rho, sch, NoiseModel.exact(), seed=0)
        good = certify.certificate(rec, delta2=0.0, mu=2.0, top_eigenvalue=0.99)
        assert good.valid
        low_top = certify.certificate(rec, delta2=0.0, mu=2.0, top_eigenvalue=0.45)
        assert not low_top.valid
        missing = certify.certificate(rec, delta2=0.0, mu=2.0)
        assert not missing.valid

    def test_bias_correction_uses_stderr(self):
        n, d = 3, 8
        rho = states.random_rank_r_state(d, 1, seed=12)
        sch = sampling.draw_uniform(n, 512, replacement=True, seed=13)
        noisy = sampling.measure(rho, sch, NoiseModel.gaussian(0.05), seed=14)
        cert = certify.certificate(noisy, delta2=0.05, mu=1.5)
        nonid = sch.indices != 0
        want = d / sch.m * np.sum(noisy.stderr**2)
        assert cert.bias_correction == pytest.approx(want, abs=1e-12)
        assert cert.estimate == pytest.approx(cert.estimate_raw - want, abs=1e-12)

    def test_bias_correction_centers_noisy_estimate(self):
        # with gaussian noise the raw S overshoots by about the noise power;
        # the corrected estimate should land near the true purity
        n, d = 3, 8
        rho = states.random_rank_r_state(d, 1, seed=15)
        sigma = 0.1
        raws, corrected = [], []
        for seed in range(300):
            sch = sampling.draw_uniform(n, 256, replacement=True, seed=1000 + seed)
            rec = sampling.measure(rho, sch, NoiseModel.gaussian(sigma), seed=seed)
            raws.append(certify.purity_estimate(rec))
            corrected.append(certify.certificate(rec, 0.0, 2.0).estimate)
        truth = states.purity(rho)
        assert abs(np.mean(corrected) - truth) < abs(np.mean(raws) - truth)
        assert np.mean(corrected) == pytest.approx(truth, abs=0.01)

    def test_parameter_validation(self):
        n = 2
        rho = states.random_rank_r_state(4, 1, seed=0)
        rec = full_exact_record(rho, n)
        with pytest.raises(ValueError):
            certify.certificate(rec, delta2=-0.1, mu=2.0)
        with pytest.raises(ValueError):
            certify.certificate(rec, delta2=0.0, mu=1.0)

    def test_chernoff_coverage_smoke(self):
        # small version of the acceptance check: deviations beyond t are rare
        n, d = 3, 8
        mu = 2.0
        t = 0.4
        m = int(4 * mu * d / t**2)
        misses = 0
        trials = 300
        for seed in range(trials):
            rho = states.random_rank_r_state(d, 2, seed=seed)
            sch = sampling.draw_uniform(n, m, replacement=True, seed=seed)
            rec = sampling.measure(rho, sch, NoiseModel.exact(), seed=0)
            if abs(certify.purity_estimate(rec) - states.purity(rho)) > t:
                misses += 1
        assert misses / trials < np.exp(-mu)
