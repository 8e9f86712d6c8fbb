"""Per-model fitting: maximum likelihood and maximum a posteriori estimates of
the reparametrised coefficients with analytic derivatives.

A quasi-Newton (BFGS) stage with the analytic gradient is followed by a Newton
polish using the exact Hessian, so the reported curvature at the optimum is the
true one rather than the quasi-Newton approximation.  Failures are reported in
the record's status and never raised; callers map failed fits to an impossible
model score.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize as sp_optimize

from . import ghlik, priors
from .baseline import Kernel
from .ghlik import Dataset, dim_psi
from .modelspace import Gamma

GRAD_TOL = 1e-6
MAX_ITER = 500
NU_BOUNDARY = 20.0


class FitStatus(enum.Enum):
    CONVERGED = "Converged"
    MAX_ITER = "MaxIter"
    BOUNDARY = "Boundary"
    SINGULAR_HESSIAN = "SingularHessian"


@dataclass(frozen=True)
class FitRecord:
    psi_opt: np.ndarray
    objective: float
    fisher: np.ndarray
    status: FitStatus
    n_evals: int

    @property
    def ok(self) -> bool:
        return self.status is FitStatus.CONVERGED


def default_init(gamma: Gamma, data: Dataset) -> np.ndarray:
    """Moment-matching start: null-model lognormal fit on uncensored times,
    zero coefficients."""
    lt = data.log_t[data.delta == 1.0]
    if lt.size < 2:
        lt = data.log_t
    m = float(np.mean(lt))
    s = float(np.std(lt))
    if not np.isfinite(s) or s < 1e-8:
        s = 1.0
    psi = np.zeros(dim_psi(gamma))
    psi[0] = -math.log(s)
    psi[1] = m / s
    return psi


def project_init(psi_prev: np.ndarray, gamma_prev: Gamma, gamma_new: Gamma,
                 data: Dataset) -> np.ndarray:
    """Warm start: carry over coefficients of variables shared between two
    models (matched by column and level), zero elsewhere."""
    psi_prev = np.asarray(psi_prev, dtype=float).reshape(-1)
    out = np.zeros(dim_psi(gamma_new))
    out[:2] = psi_prev[:2]

    def level_map(g: Gamma):
        tc = ghlik.time_level_columns(g)
        hc = ghlik.hazard_level_columns(g)
        pos = {}
        for i, j in enumerate(tc):
            pos[("t", j)] = 2 + i
        for i, j in enumerate(hc):
            pos[("h", j)] = 2 + len(tc) + i
        return pos

    prev_pos = level_map(gamma_prev)
    new_pos = level_map(gamma_new)
    for key, idx_new in new_pos.items():
        idx_prev = prev_pos.get(key)
        if idx_prev is not None and idx_prev < psi_prev.size:
            out[idx_new] = psi_prev[idx_prev]
    return out


def _maximise(fun, grad, hess, x0: np.ndarray) -> FitRecord:
    """Maximise a smooth objective: BFGS stage, then exact-Newton polish."""
    evals = [0]

    def neg_f(x):
        evals[0] += 1
        v = fun(x)
        return -v if np.isfinite(v) else 1e300

    def neg_g(x):
        g = grad(x)
        return -g if np.all(np.isfinite(g)) else np.zeros_like(x)

    res = sp_optimize.minimize(neg_f, x0, jac=neg_g, method="BFGS",
                               options={"gtol": 1e-8, "maxiter": MAX_ITER})
    x = np.asarray(res.x, dtype=float)
    f = fun(x)
    if not np.isfinite(f):
        x, f = x0.copy(), fun(x0)

    # Newton polish with the exact Hessian and Armijo backtracking.
    converged = False
    for _ in range(50):
        g = grad(x)
        tol = GRAD_TOL * (1.0 + abs(f))
        if np.max(np.abs(g)) <= tol:
            converged = True
            break
        H = hess(x)
        try:
            step = np.linalg.solve(-H, g)
        except np.linalg.LinAlgError:
            step = g.copy()
        if not np.all(np.isfinite(step)) or float(step @ g) <= 0:
            step = g.copy()
        alpha = 1.0
        improved = False
        for _ in range(40):
            x_new = x + alpha * step
            f_new = fun(x_new)
            evals[0] += 1
            if np.isfinite(f_new) and f_new >= f + 1e-4 * alpha * float(g @ step):
                x, f = x_new, f_new
                improved = True
                break
            alpha *= 0.5
        if not improved:
            break

    g = grad(x)
    if np.max(np.abs(g)) <= GRAD_TOL * (1.0 + abs(f)):
        converged = True

    fisher = -hess(x)
    if abs(x[0]) > NU_BOUNDARY:
        status = FitStatus.BOUNDARY
    elif not np.all(np.isfinite(fisher)):
        status = FitStatus.SINGULAR_HESSIAN
    elif converged:
        try:
            np.linalg.cholesky(fisher)
            status = FitStatus.CONVERGED
        except np.linalg.LinAlgError:
            status = FitStatus.SINGULAR_HESSIAN
    else:
        status = FitStatus.MAX_ITER
    return FitRecord(psi_opt=x, objective=float(f), fisher=fisher,
                     status=status, n_evals=evals[0])


def fit_mle(gamma: Gamma, data: Dataset, kernel: Kernel,
            init: np.ndarray | None = None) -> FitRecord:
    x0 = np.asarray(init, dtype=float).reshape(-1) if init is not None \
        else default_init(gamma, data)

    def fun(x):
        return ghlik.loglik(x, gamma, data, kernel)

    def grad(x):
        return ghlik.grad_loglik(x, gamma, data, kernel)

    def hess(x):
        return ghlik.hess_loglik(x, gamma, data, kernel)

    return _maximise(fun, grad, hess, x0)


def fit_map(gamma: Gamma, data: Dataset, kernel: Kernel,
            coef_prior: priors.CoefficientPrior, common: priors.CommonPrior,
            init: np.ndarray | None = None) -> FitRecord:
    x0 = np.asarray(init, dtype=float).reshape(-1) if init is not None \
        else default_init(gamma, data)

    def fun(x):
        lp = priors.log_prior_psi(x, gamma, data, coef_prior, common)
        return ghlik.loglik(x, gamma, data, kernel) + lp

    def grad(x):
        return (ghlik.grad_loglik(x, gamma, data, kernel)
                + priors.grad_prior_psi(x, gamma, data, coef_prior, common))

    def hess(x):
        return (ghlik.hess_loglik(x, gamma, data, kernel)
                + priors.hess_prior_psi(x, gamma, data, coef_prior, common))

    return _maximise(fun, grad, hess, x0)
