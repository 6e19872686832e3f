"""Gaussian-process surrogate over the vector-valued simulation output.

One GP per output day, all sharing a squared-exponential kernel with common
lengthscales over the inputs normalized to the unit box. Outputs are
standardized per day for fitting and de-standardized for scoring, which
keeps the per-day posteriors analytic and makes the expected composite
score a simple sum of Gaussian moments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.optimize import minimize

NOISE_FLOOR = 1e-6


class GPFitError(ValueError):
    pass


def _sq_dists(xa: np.ndarray, xb: np.ndarray, lengthscales: np.ndarray) -> np.ndarray:
    da = xa[:, None, :] / lengthscales
    db = xb[None, :, :] / lengthscales
    return np.sum((da - db) ** 2, axis=2)


def kernel_matrix(xa, xb, lengthscales, signal_var) -> np.ndarray:
    return signal_var * np.exp(-0.5 * _sq_dists(np.asarray(xa), np.asarray(xb),
                                                np.asarray(lengthscales)))


@dataclass
class GPState:
    """Fitted surrogate: factorized training solves plus hyperparameters."""
    x_unit: np.ndarray          # (n, d) training inputs in the unit box
    means: np.ndarray           # (T,) per-output standardization offsets
    scales: np.ndarray          # (T,) per-output standardization scales
    lengthscales: np.ndarray    # (d,)
    signal_var: float
    noise_var: float            # in standardized space
    chol: np.ndarray            # (n, n) lower Cholesky of K + noise I
    alpha: np.ndarray           # (n, T) K^{-1} Z solves

    @property
    def noise_var_by_output(self) -> np.ndarray:
        return self.noise_var * self.scales ** 2

    def posterior(self, x_unit) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean (m, T) and latent standard deviation (m, T) at the
        query points, in original output units."""
        xq = np.atleast_2d(np.asarray(x_unit, dtype=float))
        kstar = kernel_matrix(self.x_unit, xq, self.lengthscales, self.signal_var)
        mu_z = kstar.T @ self.alpha
        vmat = solve_triangular(self.chol, kstar, lower=True)
        var_z = np.clip(self.signal_var - np.sum(vmat ** 2, axis=0), 0.0, None)
        mu = self.means[None, :] + self.scales[None, :] * mu_z
        sd = np.sqrt(var_z)[:, None] * self.scales[None, :]
        return mu, sd

    def posterior_cov(self, a_unit, b_unit) -> np.ndarray:
        """Latent posterior covariance between two point sets, in the
        standardized output space (shared across outputs)."""
        a = np.atleast_2d(np.asarray(a_unit, dtype=float))
        b = np.atleast_2d(np.asarray(b_unit, dtype=float))
        k_ab = kernel_matrix(a, b, self.lengthscales, self.signal_var)
        v_a = solve_triangular(self.chol,
                               kernel_matrix(self.x_unit, a, self.lengthscales,
                                             self.signal_var), lower=True)
        v_b = solve_triangular(self.chol,
                               kernel_matrix(self.x_unit, b, self.lengthscales,
                                             self.signal_var), lower=True)
        return k_ab - v_a.T @ v_b


def _neg_lml(log_params, x, z):
    if np.any(np.abs(log_params) > 15.0):
        return 1e12
    d = x.shape[1]
    lengthscales = np.exp(log_params[:d])
    signal_var = math.exp(log_params[d])
    noise_var = NOISE_FLOOR + math.exp(log_params[d + 1])
    n, t = z.shape
    k = kernel_matrix(x, x, lengthscales, signal_var)
    k[np.diag_indices_from(k)] += noise_var
    try:
        chol = np.linalg.cholesky(k)
        w = solve_triangular(chol, z, lower=True)
    except (np.linalg.LinAlgError, ValueError):
        return 1e12
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    return 0.5 * float(np.sum(w ** 2)) + 0.5 * t * logdet + 0.5 * t * n * math.log(2 * math.pi)


def fit_gp(x_unit, y, optimize: bool = True, hypers0=None) -> GPState:
    """Fit the shared-kernel multi-output GP.

    ``x_unit`` are inputs already normalized to the unit box, ``y`` the raw
    outputs (n, T). Hyperparameters maximize the summed marginal likelihood
    over outputs via multi-start derivative-free local search.
    """
    x = np.atleast_2d(np.asarray(x_unit, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    n, d = x.shape
    if n < 2:
        raise GPFitError("need at least two evaluations to fit the surrogate")
    if y.shape[0] != n:
        raise GPFitError("inputs and outputs disagree on the number of points")

    means = y.mean(axis=0)
    scales = np.maximum(y.std(axis=0), 1e-8)
    z = (y - means) / scales

    if hypers0 is not None:
        # explicit hypers are honored as given (the noise floor guards only
        # the optimized path); zero noise with duplicate inputs is how the
        # ill-conditioned error surfaces
        lengthscales, signal_var, noise_var = hypers0
        lengthscales = np.asarray(lengthscales, dtype=float)
        if float(noise_var) < 0:
            raise GPFitError("noise variance must be nonnegative")
        best = (lengthscales, float(signal_var), float(noise_var))
        if optimize:
            raise GPFitError("pass either fixed hypers or optimize, not both")
    else:
        starts = []
        for ls in (0.1, 0.3, 1.0):
            for nv in (1e-4, 0.05):
                starts.append(np.concatenate([
                    np.full(d, math.log(ls)), [0.0], [math.log(nv)]]))
        best_val = math.inf
        best_lp = starts[0]
        for s0 in starts:
            res = minimize(_neg_lml, s0, args=(x, z), method="Nelder-Mead",
                           options={"maxiter": 400, "xatol": 1e-3, "fatol": 1e-6})
            if res.fun < best_val:
                best_val = res.fun
                best_lp = res.x
        lp = best_lp
        best = (np.exp(lp[:d]), math.exp(lp[d]), NOISE_FLOOR + math.exp(lp[d + 1]))

    lengthscales, signal_var, noise_var = best
    k = kernel_matrix(x, x, lengthscales, signal_var)
    k[np.diag_indices_from(k)] += noise_var
    try:
        chol = np.linalg.cholesky(k)
    except np.linalg.LinAlgError:
        raise GPFitError(
            "ill-conditioned Gram matrix (duplicate inputs with near-zero noise)") from None
    alpha = solve_triangular(chol.T, solve_triangular(chol, z, lower=True), lower=False)
    return GPState(x_unit=x, means=means, scales=scales,
                   lengthscales=np.asarray(lengthscales, dtype=float),
                   signal_var=float(signal_var), noise_var=float(noise_var),
                   chol=chol, alpha=alpha)
