"""Parameter priors: the common (nu, theta0) priors, the two coefficient
g-priors, and the robust hyper-g density on the curvature-matching scale g.

Two coefficient priors are supported.  The curvature-matching prior places a
single Gaussian on the stacked coefficient vector with covariance n*g_e times
the inverse coefficient block of the observed Fisher information at the MLE.
The product prior places independent Gaussians on the time-level and
hazard-level blocks with covariances built from the two Gram matrices; tied
(code-4) models keep only the time-level factor.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .ghlik import Dataset, dim_coef, hazard_level_columns, time_level_columns
from .modelspace import Gamma

LOG_2PI = math.log(2.0 * math.pi)


class PriorKind(enum.Enum):
    LCM = "lcm"
    PRODUCT = "product"


class GMode(enum.Enum):
    FIXED = "fixed"
    ROBUST_HYPER = "robust"


class RankDeficiencyError(ValueError):
    """A Gram or Fisher block required to be positive definite is not."""


@dataclass(frozen=True)
class CoefficientPrior:
    kind: PriorKind = PriorKind.LCM
    g_e: float = 1.0
    g_ct: float = 1.0
    g_ch: float = 1.0
    g_mode: GMode = GMode.FIXED

    def __post_init__(self):
        if min(self.g_e, self.g_ct, self.g_ch) <= 0:
            raise ValueError("g hyperparameters must be positive")


@dataclass(frozen=True)
class CommonPrior:
    alpha_nu: float = 0.01
    beta_nu: float = 0.01
    K: float = 1e6
    nu_normal_mean: float = 9.34
    nu_normal_sd: float = 41.15

    def __post_init__(self):
        if min(self.alpha_nu, self.beta_nu, self.K, self.nu_normal_sd) <= 0:
            raise ValueError("common-prior hyperparameters must be positive")


# ---------------------------------------------------------------------------
# common-parameter prior: Gamma(alpha, beta) on exp(nu), N(0, K) on theta0

def log_common_prior(nu: float, theta0: float, cp: CommonPrior) -> float:
    a, b = cp.alpha_nu, cp.beta_nu
    lp_nu = a * math.log(b) + a * nu - b * math.exp(nu) - math.lgamma(a)
    lp_t0 = -0.5 * (LOG_2PI + math.log(cp.K)) - 0.5 * theta0 * theta0 / cp.K
    return lp_nu + lp_t0


def grad_common_prior(nu: float, theta0: float, cp: CommonPrior) -> np.ndarray:
    return np.array([cp.alpha_nu - cp.beta_nu * math.exp(nu), -theta0 / cp.K])


def hess_common_prior(nu: float, theta0: float, cp: CommonPrior) -> np.ndarray:
    return np.diag([-cp.beta_nu * math.exp(nu), -1.0 / cp.K])


# ---------------------------------------------------------------------------
# Gram matrices and Gaussian block helpers

def gram(data: Dataset, cols) -> np.ndarray:
    Xs = data.X[:, list(cols)]
    return Xs.T @ Xs


def _chol(mat: np.ndarray, label: str) -> np.ndarray:
    try:
        return np.linalg.cholesky(mat)
    except np.linalg.LinAlgError as exc:
        raise RankDeficiencyError(f"{label} block is not positive definite") from exc


def _gaussian_logpdf_from_gram(coef: np.ndarray, G: np.ndarray, g: float, n: int,
                               label: str) -> float:
    """log N(coef; 0, g*n*G^{-1}) via one Cholesky of G."""
    m = coef.size
    if m == 0:
        return 0.0
    L = _chol(G, label)
    logdet_G = 2.0 * float(np.sum(np.log(np.diag(L))))
    quad = float(coef @ (G @ coef)) / (g * n)
    return -0.5 * (m * LOG_2PI + m * math.log(g * n) - logdet_G + quad)


# ---------------------------------------------------------------------------
# product g-prior: independent Gaussians on the two coefficient blocks

def product_prior_logpdf(theta: np.ndarray, eta: np.ndarray, gamma: Gamma,
                         data: Dataset, prior: CoefficientPrior) -> float:
    theta = np.asarray(theta, dtype=float).reshape(-1)
    eta = np.asarray(eta, dtype=float).reshape(-1)
    out = _gaussian_logpdf_from_gram(theta, gram(data, time_level_columns(gamma)),
                                     prior.g_ct, data.n, "time-level Gram")
    if eta.size:
        out += _gaussian_logpdf_from_gram(eta, gram(data, hazard_level_columns(gamma)),
                                          prior.g_ch, data.n, "hazard-level Gram")
    return out


def product_prior_grad(theta: np.ndarray, eta: np.ndarray, gamma: Gamma,
                       data: Dataset, prior: CoefficientPrior) -> np.ndarray:
    theta = np.asarray(theta, dtype=float).reshape(-1)
    eta = np.asarray(eta, dtype=float).reshape(-1)
    g_t = (-gram(data, time_level_columns(gamma)) @ theta / (prior.g_ct * data.n)
           if theta.size else np.zeros(0))
    g_h = (-gram(data, hazard_level_columns(gamma)) @ eta / (prior.g_ch * data.n)
           if eta.size else np.zeros(0))
    return np.concatenate((g_t, g_h))


def product_prior_hess(gamma: Gamma, data: Dataset, prior: CoefficientPrior) -> np.ndarray:
    tc = time_level_columns(gamma)
    hc = hazard_level_columns(gamma)
    d = len(tc) + len(hc)
    H = np.zeros((d, d))
    if tc:
        H[:len(tc), :len(tc)] = -gram(data, tc) / (prior.g_ct * data.n)
    if hc:
        H[len(tc):, len(tc):] = -gram(data, hc) / (prior.g_ch * data.n)
    return H


# ---------------------------------------------------------------------------
# full prior over packed psi = (nu, theta0, coefficients), used by the MAP fit

def log_prior_psi(psi, gamma: Gamma, data: Dataset, prior: CoefficientPrior,
                  cp: CommonPrior) -> float:
    psi = np.asarray(psi, dtype=float).reshape(-1)
    nu, theta0, coef = float(psi[0]), float(psi[1]), psi[2:]
    q = len(time_level_columns(gamma))
    if prior.kind is not PriorKind.PRODUCT:
        raise ValueError("joint psi prior is defined for the product prior only")
    return (log_common_prior(nu, theta0, cp)
            + product_prior_logpdf(coef[:q], coef[q:], gamma, data, prior))


def grad_prior_psi(psi, gamma: Gamma, data: Dataset, prior: CoefficientPrior,
                   cp: CommonPrior) -> np.ndarray:
    psi = np.asarray(psi, dtype=float).reshape(-1)
    nu, theta0, coef = float(psi[0]), float(psi[1]), psi[2:]
    q = len(time_level_columns(gamma))
    g_common = grad_common_prior(nu, theta0, cp)
    g_coef = product_prior_grad(coef[:q], coef[q:], gamma, data, prior)
    return np.concatenate((g_common, g_coef))


def hess_prior_psi(psi, gamma: Gamma, data: Dataset, prior: CoefficientPrior,
                   cp: CommonPrior) -> np.ndarray:
    psi = np.asarray(psi, dtype=float).reshape(-1)
    d = psi.size - 2
    H = np.zeros((2 + d, 2 + d))
    H[:2, :2] = hess_common_prior(float(psi[0]), float(psi[1]), cp)
    H[2:, 2:] = product_prior_hess(gamma, data, prior)
    return H


# ---------------------------------------------------------------------------
# curvature-matching prior covariance

def lcm_prior_cov(gamma: Gamma, data: Dataset, g_e: float,
                  fisher: np.ndarray) -> np.ndarray:
    """n*g_e times the inverse coefficient block of the observed Fisher."""
    d = dim_coef(gamma)
    block = np.asarray(fisher, dtype=float)[2:, 2:]
    if block.shape != (d, d):
        raise ValueError(f"fisher block is {block.shape}, expected {(d, d)}")
    L = _chol(block, "coefficient Fisher")
    inv = np.linalg.inv(L.T) @ np.linalg.inv(L)
    cov = data.n * g_e * inv
    return 0.5 * (cov + cov.T)


# ---------------------------------------------------------------------------
# robust hyper-g prior on g

def robust_g_support_bound(n: int, d: int) -> float:
    return (1.0 + n) / (n * (d + 1.0)) - 1.0 / n


def robust_g_logpdf(g: float, n: int, d: int) -> float:
    if g <= robust_g_support_bound(n, d):
        return -math.inf
    return (math.log(0.5) + 0.5 * math.log((1.0 + n) / (n * (d + 1.0)))
            - 1.5 * math.log(g + 1.0 / n))
