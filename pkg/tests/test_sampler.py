import numpy as np
import pytest

from banditlab.sampler import (
    MaxIterationsError,
    SamplerConfig,
    TargetDensity,
    grad_check,
    hmc_sample,
    nelder_mead,
)
from banditlab.transforms import log_jacobian

CFG = SamplerConfig(chains=2, warmup=400, draws=600, seed=0)


def _std_normal(dim):
    def logp_grad(z):
        return -0.5 * float(z @ z), -z

    return TargetDensity(dim=dim, eval=logp_grad)


class TestStdNormal:
    def test_moments(self):
        chains, diag = hmc_sample(_std_normal(3), CFG)
        flat = chains.flat()
        se = 1.0 / np.sqrt(np.nanmin(diag.ess))
        assert np.all(np.abs(flat.mean(axis=0)) < 4 * se)
        assert np.all(np.abs(flat.std(axis=0) - 1.0) < 0.08)
        assert np.all(diag.rhat < 1.02)

    def test_correlated_gaussian_covariance(self):
        rho = 0.8
        prec = np.linalg.inv(np.array([[1.0, rho], [rho, 1.0]]))

        def logp_grad(z):
            return -0.5 * float(z @ prec @ z), -prec @ z

        chains, diag = hmc_sample(TargetDensity(dim=2, eval=logp_grad), CFG)
        flat = chains.flat()
        emp = np.corrcoef(flat.T)[0, 1]
        assert emp == pytest.approx(rho, abs=0.05)

    def test_deterministic_under_seed(self):
        a, _ = hmc_sample(_std_normal(2), CFG)
        b, _ = hmc_sample(_std_normal(2), CFG)
        np.testing.assert_array_equal(a.draws, b.draws)

    def test_seed_changes_draws(self):
        a, _ = hmc_sample(_std_normal(2), CFG)
        cfg2 = SamplerConfig(chains=2, warmup=400, draws=600, seed=1)
        b, _ = hmc_sample(_std_normal(2), cfg2)
        assert not np.array_equal(a.draws, b.draws)


class TestBetaThroughTransform:
    def test_beta22_moments_on_logit_scale(self):
        # theta ~ Beta(2,2) sampled on z = logit(theta) with Jacobian
        def logp_grad(z):
            zz = float(z[0])
            lj = float(log_jacobian("logit-interval", zz))
            # log p(theta) + log|J|; Beta(2,2) density ~ theta(1-theta)
            from scipy.special import expit

            th = expit(zz)
            # log th + log(1-th) in overflow-safe form
            lp = -np.logaddexp(0.0, -zz) - np.logaddexp(0.0, zz) + lj
            # d/dz of [log th + log(1-th) + lj]; each term has closed form
            grad = (1 - th) - th + (1 - 2 * th)
            return lp, np.array([grad])

        chains, diag = hmc_sample(
            TargetDensity(dim=1, eval=logp_grad),
            SamplerConfig(chains=2, warmup=500, draws=1500, seed=2),
        )
        from scipy.special import expit

        theta = expit(chains.flat()[:, 0])
        assert theta.mean() == pytest.approx(0.5, abs=0.02)
        assert theta.var() == pytest.approx(0.05, abs=0.006)  # ab/((a+b)^2(a+b+1))


class TestGradCheck:
    def test_flags_wrong_gradient(self):
        def bad(z):
            return -0.5 * float(z @ z), -1.1 * z

        t = TargetDensity(dim=2, eval=bad)
        assert grad_check(t, np.array([1.0, -2.0])) > 1e-3

    def test_passes_correct_gradient(self):
        assert grad_check(_std_normal(3), np.array([0.5, -1.0, 2.0])) < 1e-8


class TestNelderMead:
    def test_quadratic_minimum(self):
        out = nelder_mead(lambda x: float((x[0] - 3.0) ** 2 + (x[1] + 1.0) ** 2), [0.0, 0.0])
        np.testing.assert_allclose(out, [3.0, -1.0], atol=1e-5)

    def test_rosenbrock(self):
        def f(x):
            return float(100 * (x[1] - x[0] ** 2) ** 2 + (1 - x[0]) ** 2)

        out = nelder_mead(f, [-1.2, 1.0])
        np.testing.assert_allclose(out, [1.0, 1.0], atol=1e-4)

    def test_budget_exhaustion_raises(self):
        with pytest.raises(MaxIterationsError):
            nelder_mead(lambda x: float(x[0]), [0.0], max_iter=5)

    def test_nonfinite_start_rejected(self):
        with pytest.raises(ValueError):
            nelder_mead(lambda x: float("nan"), [0.0])
