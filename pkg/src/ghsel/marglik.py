"""Approximate log marginal likelihoods per model.

Two approximations are provided.  The integrated-Laplace route expands the
log-likelihood (not the log-posterior) at the MLE and integrates the Gaussian
curvature-matching prior analytically, leaving a closed form in the fitted
Fisher blocks; a one-dimensional quadrature extends it to the robust hyper-g
prior on the scale g.  The plain Laplace route evaluates the penalised
objective at the MAP under the product prior.

All values are absolute log marginal likelihoods (prior normalising constants
included), so they are directly comparable to numerical quadrature.
"""

from __future__ import annotations

import enum
import hashlib
import math
import threading
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from . import ghlik, optimize, priors
from .baseline import Kernel
from .ghlik import Dataset, dim_coef
from .modelspace import Gamma
from .optimize import FitRecord
from .priors import CoefficientPrior, CommonPrior, RankDeficiencyError

LOG_2PI = math.log(2.0 * math.pi)
ROBUST_G_CUTOFF = 1e6


class MarglikMethod(enum.Enum):
    ILA = "ILA"
    ILA_ROBUST_G = "ILA_RobustG"
    LA = "LA"


@dataclass(frozen=True)
class MarglikRecord:
    gamma_key: str
    log_ml: float
    method: MarglikMethod
    fit: FitRecord | None
    P: np.ndarray | None = None
    h: np.ndarray | None = None
    C: float | None = None


def _failed(gamma: Gamma, method: MarglikMethod, fit: FitRecord | None) -> MarglikRecord:
    return MarglikRecord(gamma.key, -math.inf, method, fit)


# ---------------------------------------------------------------------------
# integrated-Laplace core

def _tilde_blocks(J: np.ndarray, d: int, shrink: float):
    """Partial-information entries for (nu, theta0): J_ab minus shrink times
    the Schur correction through the coefficient block.  One factorization of
    the coefficient block serves all three entries."""
    top, coef, cross_nu, cross_t0 = ghlik.fisher_blocks(J)
    if d == 0 or shrink == 0.0:
        return top[0, 0], top[0, 1], top[1, 1]
    L = np.linalg.cholesky(coef)
    y_nu = np.linalg.solve(L, cross_nu)
    y_t0 = np.linalg.solve(L, cross_t0)
    j_nn = top[0, 0] - shrink * float(y_nu @ y_nu)
    j_n0 = top[0, 1] - shrink * float(y_nu @ y_t0)
    j_00 = top[1, 1] - shrink * float(y_t0 @ y_t0)
    return j_nn, j_n0, j_00


def ila_from_fit(ell_hat: float, psi_hat: np.ndarray, J: np.ndarray, d: int,
                 n: int, g_e: float, cp: CommonPrior):
    """Closed-form log marginal likelihood given a fitted model.

    Returns (log_ml, P, h, C).  Raises numpy.linalg.LinAlgError if a required
    block is not positive definite.
    """
    nu_hat, t0_hat = float(psi_hat[0]), float(psi_hat[1])
    ng = n * g_e
    shrink = ng / (1.0 + ng)
    j_nn, j_n0, j_00 = _tilde_blocks(J, d, shrink)
    var_nu = cp.nu_normal_sd ** 2
    mu_nu = cp.nu_normal_mean

    P = np.array([[j_nn + 1.0 / var_nu, j_n0],
                  [j_n0, j_00 + 1.0 / cp.K]])
    h = np.array([j_nn * nu_hat + j_n0 * t0_hat + mu_nu / var_nu,
                  j_n0 * nu_hat + j_00 * t0_hat])
    C = (-0.5 * mu_nu ** 2 / var_nu
         - 0.5 * (j_nn * nu_hat ** 2 + 2.0 * j_n0 * nu_hat * t0_hat
                  + j_00 * t0_hat ** 2))

    if d > 0:
        # exact completion keeps O(1/(1+ng)) cross terms between the fitted
        # coefficients and (nu, theta0) that the large-g closed form omits
        w = 1.0 - shrink
        kappa_hat = np.asarray(psi_hat, dtype=float)[2:]
        _, coef, cross_nu, cross_t0 = ghlik.fisher_blocks(J)
        corr_nu = w * float(kappa_hat @ cross_nu)
        corr_t0 = w * float(kappa_hat @ cross_t0)
        h = h + np.array([corr_nu, corr_t0])
        C = (C - corr_nu * nu_hat - corr_t0 * t0_hat
             - 0.5 * w * float(kappa_hat @ (coef @ kappa_hat)))

    Lp = np.linalg.cholesky(P)
    logdet_P = 2.0 * float(np.sum(np.log(np.diag(Lp))))
    w = np.linalg.solve(Lp, h)
    quad = float(w @ w)

    log_ml = (ell_hat - 0.5 * d * math.log1p(ng) - 0.5 * logdet_P
              + 0.5 * quad + C - 0.5 * math.log(cp.K * var_nu))
    return log_ml, P, h, C


def ila_log_marglik(gamma: Gamma, data: Dataset, kernel: Kernel, g_e: float,
                    cp: CommonPrior, init: np.ndarray | None = None,
                    fit: FitRecord | None = None) -> MarglikRecord:
    if fit is None:
        fit = optimize.fit_mle(gamma, data, kernel, init=init)
    if not fit.ok:
        return _failed(gamma, MarglikMethod.ILA, fit)
    d = dim_coef(gamma)
    try:
        log_ml, P, h, C = ila_from_fit(fit.objective, fit.psi_opt, fit.fisher,
                                       d, data.n, g_e, cp)
    except np.linalg.LinAlgError:
        return _failed(gamma, MarglikMethod.ILA, fit)
    if not np.isfinite(log_ml):
        return _failed(gamma, MarglikMethod.ILA, fit)
    return MarglikRecord(gamma.key, log_ml, MarglikMethod.ILA, fit, P, h, C)


def ila_log_marglik_robust_g(gamma: Gamma, data: Dataset, kernel: Kernel,
                             cp: CommonPrior, init: np.ndarray | None = None,
                             fit: FitRecord | None = None,
                             cutoff: float = ROBUST_G_CUTOFF) -> MarglikRecord:
    """Marginal likelihood with the scale g integrated out under the robust
    hyper-g prior.  The model is fitted once; only the closed form is
    re-evaluated across quadrature nodes."""
    if fit is None:
        fit = optimize.fit_mle(gamma, data, kernel, init=init)
    if not fit.ok:
        return _failed(gamma, MarglikMethod.ILA_ROBUST_G, fit)
    d = dim_coef(gamma)
    n = data.n
    if d == 0:
        # the closed form is g-free for the null model, so the integral is exact
        base = ila_log_marglik(gamma, data, kernel, 1.0, cp, fit=fit)
        return MarglikRecord(gamma.key, base.log_ml, MarglikMethod.ILA_ROBUST_G,
                             fit, base.P, base.h, base.C)

    def log_integrand(g: float) -> float:
        lp = priors.robust_g_logpdf(g, n, d)
        if lp == -math.inf:
            return -math.inf
        log_ml, _, _, _ = ila_from_fit(fit.objective, fit.psi_opt, fit.fisher,
                                       d, n, g, cp)
        return log_ml + lp

    bound = priors.robust_g_support_bound(n, d)
    # integrate on y = log(g + 1/n); dg = e^y dy
    y_lo = math.log(bound + 1.0 / n) + 1e-12
    y_hi = math.log(cutoff + 1.0 / n)
    try:
        grid = np.linspace(y_lo, y_hi, 60)
        log_vals = np.array([log_integrand(math.exp(y) - 1.0 / n) + y for y in grid])
        M = float(np.max(log_vals))
        if not np.isfinite(M):
            return _failed(gamma, MarglikMethod.ILA_ROBUST_G, fit)

        def f(y):
            return math.exp(log_integrand(math.exp(y) - 1.0 / n) + y - M)

        y_peak = float(grid[int(np.argmax(log_vals))])
        val, err = integrate.quad(f, y_lo, y_hi, limit=200, epsabs=1e-12,
                                  epsrel=1e-10, points=[y_peak])
        if not np.isfinite(val) or val <= 0 or err > 1e-6 * max(val, 1e-300):
            raise ValueError(
                f"robust-g quadrature failed for {gamma.key}: value={val}, err={err}")
        # analytic tail beyond the cutoff: the closed form saturates in g, so
        # exp(log_ml(g)) ~ exp(m_sat) * (1 + n g)^{-d/2} with m_sat the g-free part
        g_big = 1e250
        m_big, _, _, _ = ila_from_fit(fit.objective, fit.psi_opt, fit.fisher,
                                      d, n, g_big, cp)
        m_sat = m_big + 0.5 * d * math.log1p(n * g_big)
        c_r = math.sqrt((1.0 + n) / (n * (d + 1.0)))
        log_tail = (m_sat + math.log(c_r / (d + 1.0)) - 0.5 * d * math.log(n)
                    - 0.5 * (d + 1.0) * math.log(cutoff + 1.0 / n))
        total = M + math.log(val + math.exp(log_tail - M))
    except np.linalg.LinAlgError:
        return _failed(gamma, MarglikMethod.ILA_ROBUST_G, fit)
    return MarglikRecord(gamma.key, total, MarglikMethod.ILA_ROBUST_G, fit)


# ---------------------------------------------------------------------------
# plain Laplace under the product prior

def la_log_marglik(gamma: Gamma, data: Dataset, kernel: Kernel,
                   coef_prior: CoefficientPrior, cp: CommonPrior,
                   init: np.ndarray | None = None,
                   fit: FitRecord | None = None,
                   full_constant: bool = False) -> MarglikRecord:
    """Laplace evidence at the MAP of the penalised objective.

    The determinant is always of the full (2+d)-dimensional penalised
    curvature.  By default the 2*pi exponent is d/2; full_constant=True uses
    the standard (2+d)/2 exponent (the difference is a model-independent
    additive constant, so posterior ratios only move when comparing across
    the two conventions).
    """
    if fit is None:
        try:
            fit = optimize.fit_map(gamma, data, kernel, coef_prior, cp, init=init)
        except RankDeficiencyError:
            return _failed(gamma, MarglikMethod.LA, None)
    if not fit.ok:
        return _failed(gamma, MarglikMethod.LA, fit)
    d = dim_coef(gamma)
    try:
        L = np.linalg.cholesky(fit.fisher)
    except np.linalg.LinAlgError:
        return _failed(gamma, MarglikMethod.LA, fit)
    logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
    expo = (2 + d) / 2.0 if full_constant else d / 2.0
    log_ml = fit.objective + expo * LOG_2PI - 0.5 * logdet
    if not np.isfinite(log_ml):
        return _failed(gamma, MarglikMethod.LA, fit)
    return MarglikRecord(gamma.key, log_ml, MarglikMethod.LA, fit)


# ---------------------------------------------------------------------------
# shared cache and the scorer facade used by the sampler

def dataset_fingerprint(data: Dataset) -> str:
    hasher = hashlib.sha256()
    for arr in (data.t, data.delta, data.X):
        hasher.update(np.ascontiguousarray(arr).tobytes())
    return hasher.hexdigest()[:16]


class MarglikCache:
    """Thread-safe memo of records keyed by (gamma, method, hyperparameters,
    dataset fingerprint).  Values are deterministic, so overwriting races on
    identical keys are benign."""

    def __init__(self, capacity: int | None = None):
        self._lock = threading.Lock()
        self._store: dict = {}
        self._capacity = capacity

    def get(self, key):
        with self._lock:
            return self._store.get(key)

    def put(self, key, record: MarglikRecord):
        with self._lock:
            if self._capacity is not None and len(self._store) >= self._capacity \
                    and key not in self._store:
                self._store.pop(next(iter(self._store)))
            self._store[key] = record

    def __len__(self):
        return len(self._store)


@dataclass(frozen=True)
class ScorerConfig:
    method: MarglikMethod = MarglikMethod.ILA
    coef_prior: CoefficientPrior = CoefficientPrior()
    common: CommonPrior = CommonPrior()
    la_full_constant: bool = False

    def fingerprint(self) -> tuple:
        p = self.coef_prior
        c = self.common
        return (self.method.value, p.kind.value, p.g_e, p.g_ct, p.g_ch,
                p.g_mode.value, c.alpha_nu, c.beta_nu, c.K, c.nu_normal_mean,
                c.nu_normal_sd, self.la_full_constant)


class ModelScorer:
    """Computes and memoizes log marginal likelihoods for one dataset, with
    warm starts from previously fitted neighbouring models."""

    def __init__(self, data: Dataset, kernel: Kernel, config: ScorerConfig,
                 cache: MarglikCache | None = None):
        self.data = data
        self.kernel = kernel
        self.config = config
        self.cache = cache if cache is not None else MarglikCache()
        self._data_fp = dataset_fingerprint(data)
        self._warm_lock = threading.Lock()
        self._last_fit: tuple | None = None  # (gamma, psi_opt)

    def _key(self, gamma: Gamma):
        return (gamma.key, self.config.fingerprint(), self._data_fp)

    def _init_for(self, gamma: Gamma):
        with self._warm_lock:
            last = self._last_fit
        if last is None:
            return None
        g_prev, psi_prev = last
        return optimize.project_init(psi_prev, g_prev, gamma, self.data)

    def score(self, gamma: Gamma) -> MarglikRecord:
        key = self._key(gamma)
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        init = self._init_for(gamma)
        cfg = self.config
        if cfg.method is MarglikMethod.ILA:
            rec = ila_log_marglik(gamma, self.data, self.kernel,
                                  cfg.coef_prior.g_e, cfg.common, init=init)
        elif cfg.method is MarglikMethod.ILA_ROBUST_G:
            rec = ila_log_marglik_robust_g(gamma, self.data, self.kernel,
                                           cfg.common, init=init)
        elif cfg.method is MarglikMethod.LA:
            rec = la_log_marglik(gamma, self.data, self.kernel, cfg.coef_prior,
                                 cfg.common, init=init,
                                 full_constant=cfg.la_full_constant)
        else:
            raise ValueError(f"unknown method {cfg.method}")
        if rec.fit is not None and rec.fit.ok:
            with self._warm_lock:
                self._last_fit = (gamma, rec.fit.psi_opt)
        self.cache.put(key, rec)
        return rec
