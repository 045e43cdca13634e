import numpy as np
import pytest
from scipy import stats
from scipy.special import expit, logit

from banditlab.models import (
    BetaMS,
    ModelSpec,
    UnresolvedHyperError,
    default_spec,
    resolve_spec,
    solve_lambda0,
    solve_rho0,
)
from banditlab.models.hyper import prior_predictive_width
from banditlab.models.likelihood import (
    beta_ms_logpdf,
    beta_ms_logpdf_grads,
    betabinom_loglik,
    betabinom_loglik_grads,
)
from banditlab.models.spec import empirical_logit_rate, require_resolved
from banditlab.models.targets import build_model, build_target
from banditlab.sampler import grad_check

KINDS = ["IBB", "Logistic", "BB-GLM", "BB-Drift", "BB-Coint"]


class TestSpec:
    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            ModelSpec(kind="Gaussian")

    def test_beta_ms_shapes(self):
        p = BetaMS(mu=0.2, eta=50.0)
        assert p.alpha == pytest.approx(10.0)
        assert p.beta == pytest.approx(40.0)

    def test_json_round_trip(self):
        for kind in KINDS:
            spec = default_spec(kind, num_arms=3)
            back = ModelSpec.from_json(spec.to_json())
            assert back == spec

    def test_resolution_fills_mu0_from_pooled_rate(self, small_dataset):
        spec = resolve_spec(ModelSpec("Logistic"), small_dataset)
        pooled = (small_dataset.y.sum() + 0.5) / (small_dataset.n.sum() + 1.0)
        assert spec.mu0 == pytest.approx(logit(pooled))
        assert empirical_logit_rate(small_dataset) == pytest.approx(logit(pooled))

    def test_resolution_sets_nu0_to_seven_per_arm(self, small_dataset):
        spec = resolve_spec(ModelSpec("BB-GLM"), small_dataset)
        assert spec.nu0 == pytest.approx(7.0 * 3)

    def test_require_resolved_raises_before_resolution(self, small_dataset):
        with pytest.raises(UnresolvedHyperError):
            require_resolved(ModelSpec("BB-GLM"), small_dataset)
        require_resolved(
            resolve_spec(ModelSpec("BB-GLM"), small_dataset), small_dataset
        )

    def test_explicit_hypers_survive_resolution(self, small_dataset):
        spec = ModelSpec("Logistic", mu0=-2.0)
        assert resolve_spec(spec, small_dataset).mu0 == -2.0


class TestHyperSolvers:
    def test_lambda0_two_arms_oracle(self):
        lam = solve_lambda0(2)
        assert lam == pytest.approx(0.2073, abs=0.005)
        assert prior_predictive_width(lam, 14.0) == pytest.approx(0.8, abs=0.01)

    def test_lambda0_five_arms_hits_width(self):
        lam = solve_lambda0(5)
        assert prior_predictive_width(lam, 35.0) == pytest.approx(0.8, abs=0.01)

    def test_rho0_quantile_oracle(self):
        # exact inversion: 90% of one-day steps from 0.2 stay within 0.005
        rho = solve_rho0(0.005)
        assert rho == pytest.approx(0.0190, abs=2e-4)
        lo = logit(0.195) - logit(0.2)
        hi = logit(0.205) - logit(0.2)
        mass = stats.norm.cdf(hi / rho) - stats.norm.cdf(lo / rho)
        assert mass == pytest.approx(0.9, abs=1e-9)

    def test_rho0_scales_with_delta(self):
        # logit is locally linear, so doubling delta near-doubles rho0
        assert solve_rho0(0.010) == pytest.approx(2 * solve_rho0(0.005), rel=0.01)

    def test_rho0_rejects_bad_delta(self):
        with pytest.raises(ValueError):
            solve_rho0(0.25)


class TestLikelihood:
    def test_betabinom_matches_scipy(self):
        y, n, theta, eta = np.array([3.0]), np.array([10.0]), 0.3, 20.0
        ours = betabinom_loglik(y, n, np.array([theta]), np.array([eta]))
        ref = stats.betabinom.logpmf(3, 10, theta * eta, (1 - theta) * eta)
        assert ours == pytest.approx(float(ref))

    def test_betabinom_grads_match_fd(self):
        y = np.array([3.0, 7.0])
        n = np.array([10.0, 20.0])
        theta = np.array([0.3, 0.4])
        eta = np.array([15.0, 30.0])
        _, dth, det = betabinom_loglik_grads(y, n, theta, eta)
        h = 1e-6
        # perturbing one cell of the summed loglik isolates that cell's grad
        for k in range(2):
            tp, tm = theta.copy(), theta.copy()
            tp[k] += h
            tm[k] -= h
            fd = (betabinom_loglik(y, n, tp, eta) - betabinom_loglik(y, n, tm, eta)) / (2 * h)
            assert dth[k] == pytest.approx(fd, rel=1e-5)
            ep, em = eta.copy(), eta.copy()
            ep[k] += h
            em[k] -= h
            fd = (betabinom_loglik(y, n, theta, ep) - betabinom_loglik(y, n, theta, em)) / (2 * h)
            assert det[k] == pytest.approx(fd, rel=1e-5)

    def test_beta_ms_matches_scipy(self):
        x, mean, size = 0.25, 0.3, 12.0
        ours = beta_ms_logpdf(np.array([x]), np.array([mean]), np.array([size]))
        ref = stats.beta.logpdf(x, mean * size, (1 - mean) * size)
        assert float(np.sum(ours)) == pytest.approx(float(ref))

    def test_beta_ms_grads_match_fd(self):
        x = np.array([0.25])
        mean = np.array([0.3])
        size = np.array([12.0])
        _, dx, dm, ds = beta_ms_logpdf_grads(x, mean, size)
        h = 1e-6
        for arr, g in [(x, dx), (mean, dm), (size, ds)]:
            p, m = arr + h, arr - h
            if arr is x:
                fd = (beta_ms_logpdf(p, mean, size) - beta_ms_logpdf(m, mean, size)) / (2 * h)
            elif arr is mean:
                fd = (beta_ms_logpdf(x, p, size) - beta_ms_logpdf(x, m, size)) / (2 * h)
            else:
                fd = (beta_ms_logpdf(x, mean, p) - beta_ms_logpdf(x, mean, m)) / (2 * h)
            assert float(g[0]) == pytest.approx(float(fd[0]), rel=1e-5)


class TestGradients:
    """Analytic gradients against central differences at posterior-scale
    points: init_center plus modest Gaussian perturbations. Larger raw
    offsets make the check unreliable through finite-difference cancellation
    on |logp| ~ 1e4 targets, not through gradient errors."""

    @pytest.mark.parametrize("kind", KINDS)
    def test_all_models_twenty_points(self, kind, small_dataset):
        spec = resolve_spec(default_spec(kind, small_dataset.num_arms), small_dataset)
        model = build_model(spec, small_dataset)
        target = build_target(spec, small_dataset)
        rng = np.random.default_rng(13)
        center = model.init_center()
        worst = 0.0
        for _ in range(20):
            z = center + rng.normal(0.0, 0.5, size=model.dim)
            worst = max(worst, grad_check(target, z))
        assert worst < 1e-5

    def test_guard_turns_nonfinite_into_rejection(self, small_dataset):
        spec = resolve_spec(default_spec("BB-GLM", 3), small_dataset)
        model = build_model(spec, small_dataset)
        z = np.full(model.dim, 1e6)
        lp, grad = model.logp_grad(z)
        assert lp == -np.inf
        assert np.all(grad == 0.0)


class TestConjugacy:
    def test_ibb_posterior_is_conjugate_beta(self, small_dataset):
        spec = resolve_spec(default_spec("IBB", 3), small_dataset)
        model = build_model(spec, small_dataset)
        a, b = model.posterior_ab()
        sy = small_dataset.y.sum(axis=0)
        sn = small_dataset.n.sum(axis=0)
        np.testing.assert_allclose(a, 1.0 + sy)  # Beta(0.5*2, 0.5*2) prior
        np.testing.assert_allclose(b, 1.0 + sn - sy)


class TestCoordKeys:
    @pytest.mark.parametrize("kind", KINDS)
    def test_keys_are_unique_and_match_dim(self, kind, small_dataset):
        spec = resolve_spec(default_spec(kind, 3), small_dataset)
        model = build_model(spec, small_dataset)
        keys = model.coord_keys()
        assert len(keys) == model.dim
        assert len(set(keys)) == model.dim

    def test_drift_keys_stable_across_horizons(self, small_dataset):
        # growing the horizon appends new keys without renaming old ones
        spec = resolve_spec(default_spec("BB-Drift", 3), small_dataset)
        short = build_model(spec, small_dataset.through_day(9))
        full = build_model(spec, small_dataset)
        assert set(short.coord_keys()) <= set(full.coord_keys())
