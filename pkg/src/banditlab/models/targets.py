"""Log-posterior targets with hand-derived gradients for the five value models.

All targets live on unconstrained space: rates and dispersion fractions via
logit, positive scales via log. Daily latent rates of the overdispersed
models are marginalized analytically (Beta-Binomial likelihood), so the
sampled dimension stays small; posterior-predictive simulation reintroduces
them generatively (see fit.py).

Gradient evaluation is on the sampler's hot path, so the cell likelihoods
are flattened into single vectors per evaluation and aggregated with
bincount. Every logp_grad is wrapped by a guard that maps numeric overflow
at far-tail leapfrog excursions to -inf (a rejected point) rather than NaN,
which keeps the density proper without clipping any coordinate.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit, logit

from ..core import BatchDataset
from ..sampler import TargetDensity
from .likelihood import beta_ms_logpdf_grads, betabinom_loglik_grads
from .spec import ModelSpec, require_resolved

__all__ = ["build_target", "build_model", "EmptyDataError"]

_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)


def _guarded(fn):
    """Evaluate silently; non-finite results become (-inf, 0) rejections."""

    def wrapped(self, z):
        with np.errstate(all="ignore"):
            lp, grad = fn(self, z)
        if not np.isfinite(lp) or not np.all(np.isfinite(grad)):
            return -np.inf, np.zeros_like(z)
        return lp, grad

    return wrapped


def _log_expit(x):
    """log(expit(x)), stable for any x."""
    return -np.logaddexp(0.0, -x)


class EmptyDataError(ValueError):
    """Dataset has no available cells to fit on."""


def _safe_logit(rates):
    return logit(np.clip(rates, 1e-6, 1.0 - 1e-6))


def _smoothed_arm_rates(d: BatchDataset) -> np.ndarray:
    sy = d.y.sum(axis=0).astype(float)
    sn = d.n.sum(axis=0).astype(float)
    return (sy + 0.5) / (sn + 1.0)


def _flat_cells(d: BatchDataset):
    """Flattened (day, arm, y, n) arrays over available cells with data."""
    tt, aa = np.nonzero(d.avail & (d.n > 0))
    return tt, aa, d.y[tt, aa].astype(float), d.n[tt, aa].astype(float)


class IBBModel:
    """Independent Beta-Binomial: static rate per arm, conjugate prior."""

    kind = "IBB"

    def __init__(self, spec: ModelSpec, d: BatchDataset):
        self.spec = spec
        self.d = d
        self.num_arms = d.num_arms
        self.num_days = d.num_days
        self.alpha0 = np.array([p.alpha for p in spec.priors])
        self.beta0 = np.array([p.beta for p in spec.priors])
        self.sy = d.y.sum(axis=0).astype(float)
        self.sn = d.n.sum(axis=0).astype(float)
        self.dim = d.num_arms

    def posterior_ab(self):
        """Conjugate posterior shape parameters per arm."""
        return self.alpha0 + self.sy, self.beta0 + self.sn - self.sy

    @_guarded
    def logp_grad(self, z):
        theta = expit(z)
        # Beta posterior exponents absorb the logit Jacobian.
        a = self.sy + self.alpha0
        b = self.sn - self.sy + self.beta0
        lp = float(np.sum(-a * np.logaddexp(0, -z) - b * np.logaddexp(0, z)))
        grad = a * (1.0 - theta) - b * theta
        return lp, grad

    def theta_daily(self, z):
        return np.broadcast_to(expit(z), (self.num_days, self.num_arms)).copy()

    def theta_final(self, z):
        return expit(z)

    def eta(self, z):
        return None

    def init_center(self):
        return _safe_logit((self.sy + self.alpha0) / (self.sn + self.alpha0 + self.beta0))

    def coord_keys(self):
        return [("theta", a) for a in range(self.num_arms)]


class LogisticModel:
    """Hierarchical logistic: static logit-scale arm effects with shared prior."""

    kind = "Logistic"

    def __init__(self, spec: ModelSpec, d: BatchDataset):
        self.spec = spec
        self.d = d
        self.num_arms = d.num_arms
        self.num_days = d.num_days
        self.sy = d.y.sum(axis=0).astype(float)
        self.sn = d.n.sum(axis=0).astype(float)
        self.mu0 = spec.mu0
        self.half_nu = spec.nu / 2.0
        self.dim = d.num_arms + 2  # beta_a, mu, log sigma^2

    @_guarded
    def logp_grad(self, z):
        a = self.num_arms
        beta, m, tau = z[:a], z[a], z[a + 1]
        sigma2 = np.exp(tau)
        theta = expit(beta)
        lp = float(np.sum(self.sy * beta - self.sn * np.logaddexp(0, beta)))
        resid = beta - m
        lp += float(np.sum(-0.5 * tau - resid**2 / (2 * sigma2))) - a * _HALF_LOG_2PI
        lp += -0.5 * (m - self.mu0) ** 2 - _HALF_LOG_2PI
        # sigma^2 ~ InvGamma(nu/2, nu/2), sampled as tau = log sigma^2.
        hn = self.half_nu
        lp += -(hn + 1.0) * tau - hn / sigma2 + tau

        grad = np.empty_like(z)
        grad[:a] = self.sy - self.sn * theta - resid / sigma2
        grad[a] = float(np.sum(resid) / sigma2) - (m - self.mu0)
        grad[a + 1] = (
            float(np.sum(-0.5 + resid**2 / (2 * sigma2)))
            - (hn + 1.0)
            + hn / sigma2
            + 1.0
        )
        return lp, grad

    def theta_daily(self, z):
        return np.broadcast_to(
            expit(z[: self.num_arms]), (self.num_days, self.num_arms)
        ).copy()

    def theta_final(self, z):
        return expit(z[: self.num_arms])

    def eta(self, z):
        return None

    def init_center(self):
        z0 = np.zeros(self.dim)
        z0[: self.num_arms] = _safe_logit(_smoothed_arm_rates(self.d))
        z0[self.num_arms] = self.mu0
        z0[self.num_arms + 1] = np.log(0.5)
        return z0

    def coord_keys(self):
        return [("beta", a) for a in range(self.num_arms)] + [("mu",), ("tau",)]


class _DispersionChain:
    """Shared gamma/lambda/nu machinery of the BB-GLM family.

    Layout appended after the model-specific block:
    [logit gamma_a (A), logit lambda (1), log nu^-1 (1)].
    """

    def __init__(self, spec: ModelSpec, num_arms: int):
        self.num_arms = num_arms
        self.lambda0 = spec.lambda0
        self.nu0 = spec.nu0
        self.invnu_scale = spec.invnu_scale

    @property
    def size(self) -> int:
        return self.num_arms + 2

    def unpack(self, block):
        a = self.num_arms
        gamma = expit(block[:a])
        lam = expit(block[a])
        inv_nu = np.exp(block[a + 1])
        return gamma, lam, inv_nu

    def logp_grad(self, block, deta_like):
        """Prior log density + gradient; folds in d loglik / d eta_a.

        ``deta_like`` is the likelihood gradient w.r.t. each arm's dispersion
        size eta_a = 1/gamma_a - 1.
        """
        a = self.num_arms
        gamma, lam, inv_nu = self.unpack(block)
        nu = 1.0 / inv_nu
        lp = 0.0
        grad = np.zeros(self.size)

        lpg, dgam, dlam_m, dnu_s = beta_ms_logpdf_grads(gamma, lam, nu)
        lp += float(np.sum(lpg))
        # likelihood through eta: deta/dgamma = -1/gamma^2
        dgam = dgam + deta_like * (-1.0 / gamma**2)
        # logit Jacobian terms for gamma
        lp += float(np.sum(_log_expit(block[:a]) + _log_expit(-block[:a])))
        grad[:a] = dgam * gamma * (1.0 - gamma) + (1.0 - 2.0 * gamma)

        lpl, dlam, _, _ = beta_ms_logpdf_grads(lam, self.lambda0, self.nu0)
        lp += float(lpl) + float(_log_expit(block[a]) + _log_expit(-block[a]))
        grad[a] = (float(np.sum(dlam_m)) + float(dlam)) * lam * (1.0 - lam) + (
            1.0 - 2.0 * lam
        )

        # nu^-1 ~ HalfNormal(scale); parameterized as w = log nu^-1.
        s2 = self.invnu_scale**2
        lp += -(inv_nu**2) / (2 * s2) + block[a + 1]
        grad[a + 1] = -nu * float(np.sum(dnu_s)) - inv_nu**2 / s2 + 1.0
        return lp, grad

    def init_block(self):
        out = np.empty(self.size)
        out[: self.num_arms] = logit(0.02)
        out[self.num_arms] = logit(np.clip(self.lambda0, 1e-4, 1 - 1e-4))
        out[self.num_arms + 1] = np.log(0.1)
        return out

    def coord_keys(self):
        return (
            [("gamma", a) for a in range(self.num_arms)] + [("lam",), ("w",)]
        )


class BBGLMModel:
    """Static rates with per-arm Beta-Binomial overdispersion, pooled dispersion."""

    kind = "BB-GLM"

    def __init__(self, spec: ModelSpec, d: BatchDataset):
        self.spec = spec
        self.d = d
        self.num_arms = d.num_arms
        self.num_days = d.num_days
        _, self.cell_arm, self.cell_y, self.cell_n = _flat_cells(d)
        self.chain = _DispersionChain(spec, d.num_arms)
        self.dim = d.num_arms + self.chain.size

    @_guarded
    def logp_grad(self, z):
        a = self.num_arms
        zt = z[:a]
        theta = expit(zt)
        gamma, _, _ = self.chain.unpack(z[a:])
        eta = 1.0 / gamma - 1.0
        ll, dt, de = betabinom_loglik_grads(
            self.cell_y, self.cell_n, theta[self.cell_arm], eta[self.cell_arm]
        )
        lp = float(np.sum(ll))
        dtheta = np.bincount(self.cell_arm, weights=dt, minlength=a)
        deta = np.bincount(self.cell_arm, weights=de, minlength=a)
        # theta_a ~ Beta(mean 1/2, size 2) = uniform; only the Jacobian remains.
        lp += float(np.sum(_log_expit(zt) + _log_expit(-zt)))
        grad = np.empty_like(z)
        grad[:a] = dtheta * theta * (1.0 - theta) + (1.0 - 2.0 * theta)
        lp_chain, grad_chain = self.chain.logp_grad(z[a:], deta)
        grad[a:] = grad_chain
        return lp + lp_chain, grad

    def theta_daily(self, z):
        return np.broadcast_to(
            expit(z[: self.num_arms]), (self.num_days, self.num_arms)
        ).copy()

    def theta_final(self, z):
        return expit(z[: self.num_arms])

    def eta(self, z):
        gamma, _, _ = self.chain.unpack(z[self.num_arms :])
        return 1.0 / gamma - 1.0

    def init_center(self):
        return np.concatenate(
            [_safe_logit(_smoothed_arm_rates(self.d)), self.chain.init_block()]
        )

    def coord_keys(self):
        return [("z", a) for a in range(self.num_arms)] + self.chain.coord_keys()


class BBDriftModel:
    """BB-GLM with independent logit-scale random walks per arm."""

    kind = "BB-Drift"

    def __init__(self, spec: ModelSpec, d: BatchDataset):
        self.spec = spec
        self.d = d
        self.num_arms = d.num_arms
        self.num_days = d.num_days
        self.chain = _DispersionChain(spec, d.num_arms)
        self.mu0 = spec.mu0
        self.half_nu = spec.nu / 2.0
        self.rho0 = spec.rho0

        # Walk state layout: per arm, one state per day from the arm's first
        # available day through the end; arms with no data get no states.
        self.starts = np.full(d.num_arms, d.num_days, dtype=int)
        lengths = np.zeros(d.num_arms, dtype=int)
        for a in range(d.num_arms):
            days = np.nonzero(d.avail[:, a])[0]
            if days.size:
                self.starts[a] = int(days[0])
                lengths[a] = d.num_days - self.starts[a]
        self.lengths = lengths
        self.offsets = np.concatenate([[0], np.cumsum(lengths)])
        self.n_states = int(self.offsets[-1])
        self.active = np.nonzero(lengths > 0)[0]

        tt, aa, self.cell_y, self.cell_n = _flat_cells(d)
        self.cell_arm = aa
        self.cell_state = self.offsets[aa] + (tt - self.starts[aa])
        # Walk steps: (from, to) state indices and owning arm, all arms flat.
        froms, tos, step_arm = [], [], []
        first_states, first_arms = [], []
        for a in self.active:
            o, L = self.offsets[a], lengths[a]
            first_states.append(o)
            first_arms.append(a)
            if L > 1:
                idx = np.arange(o, o + L - 1)
                froms.append(idx)
                tos.append(idx + 1)
                step_arm.append(np.full(L - 1, a))
        self.step_from = np.concatenate(froms) if froms else np.empty(0, int)
        self.step_to = np.concatenate(tos) if tos else np.empty(0, int)
        self.step_arm = np.concatenate(step_arm) if step_arm else np.empty(0, int)
        self.first_states = np.asarray(first_states, int)
        self.first_arms = np.asarray(first_arms, int)
        self.n_steps_per_arm = np.bincount(self.step_arm, minlength=d.num_arms)

        # Walk states are sampled non-centered: the first slot of each arm's
        # block is the initial logit state, later slots are standardized
        # innovations, so b_t = s_a + rho_a * cumsum(innov). This decouples
        # rho_a from the states and avoids the small-rho funnel.
        # layout: walk block, log rho_a (A), dispersion chain, mu, log sigma^2
        self.dim = self.n_states + d.num_arms + self.chain.size + 2

    def _states(self, r, rho):
        b = np.empty(self.n_states)
        for a in self.active:
            o, hi = self.offsets[a], self.offsets[a + 1]
            b[o:hi] = r[o] + rho[a] * np.concatenate(
                [[0.0], np.cumsum(r[o + 1 : hi])]
            )
        return b

    @_guarded
    def logp_grad(self, z):
        na = self.num_arms
        ns = self.n_states
        r = z[:ns]
        log_rho = z[ns : ns + na]
        rho = np.exp(log_rho)
        rho2 = rho**2
        block = z[ns + na : ns + na + self.chain.size]
        m = z[-2]
        tau = z[-1]
        sigma2 = np.exp(tau)
        gamma, _, _ = self.chain.unpack(block)
        eta = 1.0 / gamma - 1.0
        b = self._states(r, rho)

        grad = np.zeros_like(z)

        # Beta-Binomial cells
        theta = expit(b[self.cell_state])
        ll, dt, de = betabinom_loglik_grads(
            self.cell_y, self.cell_n, theta, eta[self.cell_arm]
        )
        lp = float(np.sum(ll))
        deta = np.bincount(self.cell_arm, weights=de, minlength=na)
        g_b = np.bincount(
            self.cell_state, weights=dt * theta * (1.0 - theta), minlength=ns
        )

        # chain rule through the non-centered map, per arm
        for a in self.active:
            o, hi = self.offsets[a], self.offsets[a + 1]
            gb = g_b[o:hi]
            grad[o] += float(np.sum(gb))
            if hi - o > 1:
                rev = np.cumsum(gb[::-1])[::-1]
                grad[o + 1 : hi] += rho[a] * rev[1:]
                grad[ns + a] += float(np.sum(gb * (b[o:hi] - r[o])))

        # initial states ~ N(mu, sigma^2)
        r0 = r[self.first_states] - m
        k = r0.size
        lp += float(np.sum(-0.5 * tau - r0**2 / (2 * sigma2))) - k * _HALF_LOG_2PI
        grad[self.first_states] += -r0 / sigma2
        grad[-2] += float(np.sum(r0)) / sigma2
        grad[-1] += float(np.sum(-0.5 + r0**2 / (2 * sigma2)))

        # standardized innovations ~ N(0, 1)
        if self.step_from.size:
            innov = r[self.step_to]
            lp += float(np.sum(-0.5 * innov**2)) - innov.size * _HALF_LOG_2PI
            grad[self.step_to] += -innov

        # rho_a ~ HalfNormal(rho0) on active arms, weak anchor elsewhere
        active_mask = self.lengths > 0
        lp += float(
            np.sum((-rho2 / (2 * self.rho0**2) + log_rho)[active_mask])
        )
        grad[ns : ns + na][active_mask] += (-rho2 / self.rho0**2 + 1.0)[active_mask]
        if not active_mask.all():
            idle = ~active_mask
            lp += float(np.sum(-0.5 * log_rho[idle] ** 2))
            grad[ns : ns + na][idle] += -log_rho[idle]

        # mu ~ N(mu0, 1); sigma^2 ~ InvGamma(nu/2, nu/2) via tau = log sigma^2
        lp += -0.5 * (m - self.mu0) ** 2 - _HALF_LOG_2PI
        grad[-2] += -(m - self.mu0)
        hn = self.half_nu
        lp += -(hn + 1.0) * tau - hn / sigma2 + tau
        grad[-1] += -(hn + 1.0) + hn / sigma2 + 1.0

        lp_chain, grad_chain = self.chain.logp_grad(block, deta)
        grad[ns + na : ns + na + self.chain.size] = grad_chain
        return lp + lp_chain, grad

    def _states_from_z(self, z):
        ns, na = self.n_states, self.num_arms
        rho = np.exp(z[ns : ns + na])
        return self._states(z[:ns], rho)

    def theta_daily(self, z):
        b = self._states_from_z(z)
        out = np.full((self.num_days, self.num_arms), np.nan)
        for a in self.active:
            out[self.starts[a] :, a] = expit(b[self.offsets[a] : self.offsets[a + 1]])
        return out

    def theta_final(self, z):
        b = self._states_from_z(z)
        out = np.full(self.num_arms, 0.5)
        for a in self.active:
            out[a] = expit(b[self.offsets[a + 1] - 1])
        return out

    def eta(self, z):
        block = z[self.n_states + self.num_arms :][: self.chain.size]
        gamma, _, _ = self.chain.unpack(block)
        return 1.0 / gamma - 1.0

    def init_center(self):
        z0 = np.zeros(self.dim)
        rates = _smoothed_arm_rates(self.d)
        for a in self.active:
            z0[self.offsets[a]] = _safe_logit(rates[a])
        ns, na = self.n_states, self.num_arms
        z0[ns : ns + na] = np.log(self.rho0)
        z0[ns + na : ns + na + self.chain.size] = self.chain.init_block()
        z0[-2] = self.mu0
        z0[-1] = np.log(0.5)
        return z0

    def coord_keys(self):
        keys = []
        for a in self.active:
            keys.append(("s", int(a)))
            keys += [
                ("innov", int(a), int(day))
                for day in range(self.starts[a] + 1, self.num_days)
            ]
        keys += [("logrho", a) for a in range(self.num_arms)]
        keys += self.chain.coord_keys()
        keys += [("mu",), ("tau",)]
        return keys


class BBCointModel:
    """Control random walk with multiplicative arm offsets (cointegrated gains)."""

    kind = "BB-Coint"

    def __init__(self, spec: ModelSpec, d: BatchDataset):
        self.spec = spec
        self.d = d
        self.num_arms = d.num_arms
        self.num_days = d.num_days
        self.chain = _DispersionChain(spec, d.num_arms)
        self.mu0 = spec.mu0
        self.rho0 = spec.rho0
        self.phi_scale = spec.phi_scale
        self.cell_day, self.cell_arm, self.cell_y, self.cell_n = _flat_cells(d)
        # Control walk is non-centered: slot 0 is the initial logit state,
        # slots 1..T-1 are standardized innovations (see BBDriftModel).
        # layout: walk block (T), log rho, phi (A-1), dispersion chain
        self.dim = d.num_days + 1 + (d.num_arms - 1) + self.chain.size

    def _unpack(self, z):
        t = self.num_days
        raw = z[:t]
        log_rho = z[t]
        rho = np.exp(log_rho)
        b1 = raw[0] + rho * np.concatenate([[0.0], np.cumsum(raw[1:])])
        phi = z[t + 1 : t + self.num_arms]
        block = z[t + self.num_arms :]
        return raw, b1, log_rho, phi, block

    @staticmethod
    def _sign(b1):
        # sign(0) := +1 so the offset map stays total.
        return np.where(b1 >= 0, 1.0, -1.0)

    def arm_states(self, z):
        """T x A logit-scale states implied by the control walk and offsets."""
        _, b1, _, phi, _ = self._unpack(z)
        sgn = self._sign(b1)
        scale = 1.0 + np.concatenate([[0.0], phi])[None, :] * sgn[:, None]
        return scale * b1[:, None]

    @_guarded
    def logp_grad(self, z):
        t = self.num_days
        na = self.num_arms
        raw, b1, log_rho, phi, block = self._unpack(z)
        rho = np.exp(log_rho)
        rho2 = rho**2
        gamma, _, _ = self.chain.unpack(block)
        eta = 1.0 / gamma - 1.0
        sgn = self._sign(b1)

        grad = np.zeros_like(z)

        phi_full = np.concatenate([[0.0], phi])
        cd, ca = self.cell_day, self.cell_arm
        scale = 1.0 + phi_full[ca] * sgn[cd]
        theta = expit(scale * b1[cd])
        ll, dt, de = betabinom_loglik_grads(self.cell_y, self.cell_n, theta, eta[ca])
        lp = float(np.sum(ll))
        deta = np.bincount(ca, weights=de, minlength=na)
        g_beta = dt * theta * (1.0 - theta)
        g_b1 = np.bincount(cd, weights=g_beta * scale, minlength=t)
        dphi_full = np.bincount(ca, weights=g_beta * sgn[cd] * b1[cd], minlength=na)
        grad[t + 1 : t + na] += dphi_full[1:]

        # first state ~ N(mu0, 1)
        r0 = b1[0] - self.mu0
        lp += -0.5 * r0**2 - _HALF_LOG_2PI
        g_b1[0] += -r0
        # chain rule of the non-centered map
        grad[0] += float(np.sum(g_b1))
        rev = np.cumsum(g_b1[::-1])[::-1]
        grad[1:t] += rho * rev[1:]
        grad[t] += float(np.sum(g_b1 * (b1 - raw[0])))
        # standardized innovations ~ N(0, 1)
        lp += float(np.sum(-0.5 * raw[1:] ** 2)) - (t - 1) * _HALF_LOG_2PI
        grad[1:t] += -raw[1:]
        # rho ~ HalfNormal(rho0)
        lp += -rho2 / (2 * self.rho0**2) + log_rho
        grad[t] += -rho2 / self.rho0**2 + 1.0

        # phi_a ~ N(0, phi_scale^2)
        ps2 = self.phi_scale**2
        lp += float(np.sum(-(phi**2) / (2 * ps2))) - (na - 1) * _HALF_LOG_2PI
        grad[t + 1 : t + na] += -phi / ps2

        lp_chain, grad_chain = self.chain.logp_grad(block, deta)
        grad[t + na :] = grad_chain
        return lp + lp_chain, grad

    def theta_daily(self, z):
        return expit(self.arm_states(z))

    def theta_final(self, z):
        return expit(self.arm_states(z)[-1])

    def eta(self, z):
        block = self._unpack(z)[4]
        gamma, _, _ = self.chain.unpack(block)
        return 1.0 / gamma - 1.0

    def init_center(self):
        z0 = np.zeros(self.dim)
        t = self.num_days
        z0[0] = _safe_logit(_smoothed_arm_rates(self.d)[0])
        z0[t] = np.log(self.rho0)
        z0[t + 1 : t + self.num_arms] = 0.0
        z0[t + self.num_arms :] = self.chain.init_block()
        return z0

    def coord_keys(self):
        keys = [("w0",)]
        keys += [("innov", day) for day in range(1, self.num_days)]
        keys.append(("logrho",))
        keys += [("phi", a) for a in range(1, self.num_arms)]
        keys += self.chain.coord_keys()
        return keys


_MODEL_CLASSES = {
    "IBB": IBBModel,
    "Logistic": LogisticModel,
    "BB-GLM": BBGLMModel,
    "BB-Drift": BBDriftModel,
    "BB-Coint": BBCointModel,
}


def build_model(spec: ModelSpec, d: BatchDataset):
    """Instantiate the internal model implementation for a resolved spec."""
    require_resolved(spec, d)
    if not np.any(d.avail & (d.n > 0)):
        raise EmptyDataError("no available cells with data")
    return _MODEL_CLASSES[spec.kind](spec, d)


def build_target(spec: ModelSpec, d: BatchDataset) -> TargetDensity:
    """Log joint density + gradient on unconstrained space for a model kind."""
    model = build_model(spec, d)
    return TargetDensity(dim=model.dim, eval=model.logp_grad)
