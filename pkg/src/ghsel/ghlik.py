"""Reparametrised general-hazard log-likelihood with analytic derivatives.

The likelihood is evaluated in the coordinates Psi = (nu, theta0, theta, eta)
where exp(nu) = 1/sigma, theta0 = mu/sigma, theta = -alpha/sigma and
eta = -beta.  Tied-effect (code-4) models carry only theta; eta is the
deterministic function exp(-nu) * theta and derivatives are propagated by the
chain rule so that a single generic code path serves every hazard class.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import baseline
from .baseline import Kernel
from .modelspace import Gamma, HazardClass, classify

LINPRED_CLAMP = 500.0


class DimensionError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    t: np.ndarray
    delta: np.ndarray
    X: np.ndarray
    names: tuple
    log_t: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        t = np.ascontiguousarray(np.asarray(self.t, dtype=float))
        delta = np.ascontiguousarray(np.asarray(self.delta, dtype=float))
        X = np.ascontiguousarray(np.atleast_2d(np.asarray(self.X, dtype=float)))
        if t.ndim != 1 or delta.ndim != 1 or X.ndim != 2:
            raise DimensionError("t and delta must be vectors, X a matrix")
        n = t.shape[0]
        if n < 1 or delta.shape[0] != n or X.shape[0] != n:
            raise DimensionError(
                f"inconsistent sizes: len(t)={n}, len(delta)={delta.shape[0]}, rows(X)={X.shape[0]}"
            )
        if not np.all(np.isfinite(t)) or np.any(t <= 0):
            raise ValueError("all times must be positive and finite")
        if not np.all(np.isin(delta, (0.0, 1.0))):
            raise ValueError("delta entries must be 0 or 1")
        if not np.all(np.isfinite(X)):
            raise ValueError("covariates must be finite")
        names = tuple(self.names) if self.names else tuple(f"x{j+1}" for j in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise DimensionError("names must match the number of columns")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "log_t", np.log(t))

    @property
    def n(self) -> int:
        return self.t.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def n_events(self) -> int:
        return int(self.delta.sum())


def time_level_columns(gamma: Gamma) -> tuple:
    if classify(gamma) is HazardClass.AFT:
        return tuple(j for j, c in enumerate(gamma.codes) if c == 4)
    return tuple(j for j, c in enumerate(gamma.codes) if c in (1, 3))


def hazard_level_columns(gamma: Gamma) -> tuple:
    if classify(gamma) is HazardClass.AFT:
        return ()
    return tuple(j for j, c in enumerate(gamma.codes) if c in (2, 3))


def dim_coef(gamma: Gamma) -> int:
    """Number of free coefficients d_gamma (tied-effect models count each
    variable once)."""
    return len(time_level_columns(gamma)) + len(hazard_level_columns(gamma))


def dim_psi(gamma: Gamma) -> int:
    return 2 + dim_coef(gamma)


@dataclass(frozen=True)
class Psi:
    nu: float
    theta0: float
    theta: np.ndarray
    eta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "theta", np.asarray(self.theta, dtype=float).reshape(-1))
        object.__setattr__(self, "eta", np.asarray(self.eta, dtype=float).reshape(-1))

    def pack(self) -> np.ndarray:
        return np.concatenate(([self.nu, self.theta0], self.theta, self.eta))

    @classmethod
    def unpack(cls, vec: np.ndarray, gamma: Gamma) -> "Psi":
        vec = np.asarray(vec, dtype=float).reshape(-1)
        q = len(time_level_columns(gamma))
        d = dim_coef(gamma)
        if vec.shape[0] != 2 + d:
            raise DimensionError(f"psi has length {vec.shape[0]}, model {gamma.key} needs {2 + d}")
        return cls(float(vec[0]), float(vec[1]), vec[2:2 + q], vec[2 + q:])


def _check_dims(psi: np.ndarray, gamma: Gamma, data: Dataset) -> np.ndarray:
    psi = np.asarray(psi, dtype=float).reshape(-1)
    if gamma.p != data.p:
        raise DimensionError(f"model over {gamma.p} variables, data has {data.p}")
    if psi.shape[0] != dim_psi(gamma):
        raise DimensionError(
            f"psi has length {psi.shape[0]}, model {gamma.key} needs {dim_psi(gamma)}"
        )
    return psi


def _core_terms(nu, theta0, theta, eta, Xt, Xh, data: Dataset, kernel: Kernel):
    a = Xt @ theta if theta.size else np.zeros(data.n)
    b = Xh @ eta if eta.size else np.zeros(data.n)
    e_nu = np.exp(nu)
    u = e_nu * data.log_t - a - theta0
    lin = np.exp(-nu) * a - b
    boundary = bool(np.any(np.abs(lin) > LINPRED_CLAMP))
    lin = np.clip(lin, -LINPRED_CLAMP, LINPRED_CLAMP)
    v = np.exp(lin)
    return a, u, lin, v, e_nu, boundary


def _generic_loglik(nu, theta0, theta, eta, Xt, Xh, data, kernel):
    delta = data.delta
    a, u, lin, v, e_nu, _ = _core_terms(nu, theta0, theta, eta, Xt, Xh, data, kernel)
    lf = baseline.log_f(u, kernel)
    lF = baseline.log_F_neg(u, kernel)
    val = (
        data.n_events * nu
        - float(delta @ data.log_t)
        + float(delta @ lin)
        + float(delta @ lf)
        + float(lF @ (v - delta))
    )
    return val if np.isfinite(val) else -np.inf


def _generic_grad(nu, theta0, theta, eta, Xt, Xh, data, kernel):
    delta = data.delta
    lt = data.log_t
    a, u, lin, v, e_nu, _ = _core_terms(nu, theta0, theta, eta, Xt, Xh, data, kernel)
    e_mnu = np.exp(-nu)
    lF = baseline.log_F_neg(u, kernel)
    r1 = baseline.ratio_f_over_Fneg(u, kernel)
    rp = baseline.ratio_fprime_over_f(u, kernel)
    vd = v - delta

    g_nu = (
        data.n_events
        - e_mnu * float(delta @ a)
        + e_nu * float((delta * rp) @ lt)
        - e_nu * float((r1 * vd) @ lt)
        - e_mnu * float((lF * v) @ a)
    )
    g_t0 = -float(delta @ rp) + float(r1 @ vd)
    wt = delta * (e_mnu - rp) + r1 * vd + lF * v * e_mnu
    g_theta = Xt.T @ wt if theta.size else np.zeros(0)
    wh = -delta - lF * v
    g_eta = Xh.T @ wh if eta.size else np.zeros(0)
    return np.concatenate(([g_nu, g_t0], g_theta, g_eta))


def _generic_hess(nu, theta0, theta, eta, Xt, Xh, data, kernel):
    delta = data.delta
    lt = data.log_t
    a, u, lin, v, e_nu, _ = _core_terms(nu, theta0, theta, eta, Xt, Xh, data, kernel)
    e_mnu = np.exp(-nu)
    lF = baseline.log_F_neg(u, kernel)
    r1 = baseline.ratio_f_over_Fneg(u, kernel)
    rp = baseline.ratio_fprime_over_f(u, kernel)
    rs = baseline.ratio_fsecond_over_f(u, kernel)
    rpF = baseline.ratio_fprime_over_Fneg(u, kernel)
    vd = v - delta
    D2 = rs - rp * rp
    E2 = rpF + r1 * r1

    q = theta.size
    pe = eta.size
    H = np.zeros((2 + q + pe, 2 + q + pe))

    h_nn = (
        e_mnu * float(delta @ a)
        + e_nu ** 2 * float((delta * D2) @ (lt * lt))
        + e_nu * float((delta * rp) @ lt)
        - e_nu ** 2 * float((E2 * vd) @ (lt * lt))
        - e_nu * float((r1 * vd) @ lt)
        + e_mnu * float((lF * v * (1.0 + a * e_mnu)) @ a)
        + 2.0 * float((r1 * v * a) @ lt)
    )
    h_00 = float(delta @ D2) - float(E2 @ vd)
    h_n0 = (
        -e_nu * float((delta * D2) @ lt)
        - e_mnu * float((r1 * v) @ a)
        + e_nu * float((E2 * vd) @ lt)
    )
    H[0, 0] = h_nn
    H[1, 1] = h_00
    H[0, 1] = H[1, 0] = h_n0

    if q:
        w_tt = delta * D2 - E2 * vd + 2.0 * e_mnu * r1 * v + e_mnu ** 2 * lF * v
        H[2:2 + q, 2:2 + q] = Xt.T @ (w_tt[:, None] * Xt)
        w_t0 = delta * D2 + e_mnu * r1 * v - E2 * vd
        H[1, 2:2 + q] = H[2:2 + q, 1] = Xt.T @ w_t0
        w_tn = (
            -delta * e_mnu
            - e_nu * delta * D2 * lt
            - e_mnu * r1 * v * a
            + e_nu * E2 * vd * lt
            - e_mnu * lF * v * (a * e_mnu + 1.0)
            - r1 * lt * v
        )
        H[0, 2:2 + q] = H[2:2 + q, 0] = Xt.T @ w_tn
    if pe:
        w_hh = lF * v
        H[2 + q:, 2 + q:] = Xh.T @ (w_hh[:, None] * Xh)
        w_h0 = -r1 * v
        H[1, 2 + q:] = H[2 + q:, 1] = Xh.T @ w_h0
        w_hn = e_nu * r1 * lt * v + e_mnu * lF * v * a
        H[0, 2 + q:] = H[2 + q:, 0] = Xh.T @ w_hn
    if q and pe:
        w_ht = -r1 * v - e_mnu * lF * v
        block = Xt.T @ (w_ht[:, None] * Xh)
        H[2:2 + q, 2 + q:] = block
        H[2 + q:, 2:2 + q] = block.T
    return H


def _split(psi, gamma):
    q = len(time_level_columns(gamma))
    return float(psi[0]), float(psi[1]), psi[2:2 + q], psi[2 + q:]


def _designs(gamma, data):
    tc = time_level_columns(gamma)
    hc = hazard_level_columns(gamma)
    Xt = data.X[:, tc] if tc else np.zeros((data.n, 0))
    Xh = data.X[:, hc] if hc else np.zeros((data.n, 0))
    return Xt, Xh


def _aft_expand(psi, gamma, data):
    """Map the reduced tied-effect parametrisation (nu, theta0, theta) to the
    generic coordinates with eta = exp(-nu) * theta and shared design."""
    nu, theta0, theta, _ = float(psi[0]), float(psi[1]), psi[2:], None
    eta = np.exp(-nu) * theta
    tc = time_level_columns(gamma)
    Xs = data.X[:, tc] if tc else np.zeros((data.n, 0))
    return nu, theta0, theta, eta, Xs


def loglik(psi, gamma: Gamma, data: Dataset, kernel: Kernel) -> float:
    psi = _check_dims(psi, gamma, data)
    if classify(gamma) is HazardClass.AFT:
        nu, theta0, theta, eta, Xs = _aft_expand(psi, gamma, data)
        return _generic_loglik(nu, theta0, theta, eta, Xs, Xs, data, kernel)
    nu, theta0, theta, eta = _split(psi, gamma)
    Xt, Xh = _designs(gamma, data)
    return _generic_loglik(nu, theta0, theta, eta, Xt, Xh, data, kernel)


def _aft_jacobian(nu, theta):
    """Jacobian of (nu, theta0, theta, eta(nu, theta)) w.r.t. (nu, theta0, theta)."""
    m = theta.size
    e_mnu = np.exp(-nu)
    J = np.zeros((2 + 2 * m, 2 + m))
    J[0, 0] = 1.0
    J[1, 1] = 1.0
    J[2:2 + m, 2:] = np.eye(m)
    J[2 + m:, 0] = -e_mnu * theta
    J[2 + m:, 2:] = e_mnu * np.eye(m)
    return J


def grad_loglik(psi, gamma: Gamma, data: Dataset, kernel: Kernel) -> np.ndarray:
    psi = _check_dims(psi, gamma, data)
    if classify(gamma) is HazardClass.AFT:
        nu, theta0, theta, eta, Xs = _aft_expand(psi, gamma, data)
        g_full = _generic_grad(nu, theta0, theta, eta, Xs, Xs, data, kernel)
        return _aft_jacobian(nu, theta).T @ g_full
    nu, theta0, theta, eta = _split(psi, gamma)
    Xt, Xh = _designs(gamma, data)
    return _generic_grad(nu, theta0, theta, eta, Xt, Xh, data, kernel)


def hess_loglik(psi, gamma: Gamma, data: Dataset, kernel: Kernel) -> np.ndarray:
    psi = _check_dims(psi, gamma, data)
    if classify(gamma) is not HazardClass.AFT:
        nu, theta0, theta, eta = _split(psi, gamma)
        Xt, Xh = _designs(gamma, data)
        return _generic_hess(nu, theta0, theta, eta, Xt, Xh, data, kernel)
    nu, theta0, theta, eta, Xs = _aft_expand(psi, gamma, data)
    g_full = _generic_grad(nu, theta0, theta, eta, Xs, Xs, data, kernel)
    H_full = _generic_hess(nu, theta0, theta, eta, Xs, Xs, data, kernel)
    J = _aft_jacobian(nu, theta)
    H = J.T @ H_full @ J
    # second-derivative terms of eta_k = exp(-nu) theta_k
    m = theta.size
    e_mnu = np.exp(-nu)
    g_eta = g_full[2 + m:]
    H[0, 0] += float(g_eta @ (e_mnu * theta))
    for k in range(m):
        H[0, 2 + k] += -e_mnu * g_eta[k]
        H[2 + k, 0] += -e_mnu * g_eta[k]
    return H


def observed_fisher(psi, gamma: Gamma, data: Dataset, kernel: Kernel) -> np.ndarray:
    return -hess_loglik(psi, gamma, data, kernel)


def fisher_blocks(J: np.ndarray):
    """Split an observed-Fisher matrix into the (nu, theta0) 2x2 block, the
    coefficient block, and the two cross vectors."""
    J = np.asarray(J, dtype=float)
    top = J[:2, :2]
    coef = J[2:, 2:]
    cross_nu = J[2:, 0]
    cross_t0 = J[2:, 1]
    return top, coef, cross_nu, cross_t0
