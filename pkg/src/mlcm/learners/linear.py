"""Penalized and latent-factor linear learners (LASSO, PLS).

Both standardize features internally (mean zero, unit variance with the 1/n
convention) and center the target, then report coefficients back on the
original scale via ``coef_`` and ``intercept_``.
"""

import numpy as np
from numba import njit

from ._base import BaseLearner

__all__ = ["Lasso", "PartialLeastSquares"]


@njit(cache=True)
def _lasso_cd(G, c, lam, max_sweeps, tol):
    """Cyclic coordinate descent on the Gram system.

    Minimizes (1/2n)||y - Z b||^2 + lam * ||b||_1 given G = Z'Z/n and
    c = Z'y/n. Maintains rho = c - G b with covariance updates. Returns
    (beta, sweeps_used); convergence is max |delta beta| < tol in a sweep.
    """
    d = G.shape[0]
    beta = np.zeros(d)
    rho = c.copy()
    for sweep in range(max_sweeps):
        delta_max = 0.0
        for j in range(d):
            gjj = G[j, j]
            if gjj <= 0.0:
                continue  # constant column: coefficient stays zero
            r = rho[j] + gjj * beta[j]
            if r > lam:
                b_new = (r - lam) / gjj
            elif r < -lam:
                b_new = (r + lam) / gjj
            else:
                b_new = 0.0
            diff = b_new - beta[j]
            if diff != 0.0:
                for k in range(d):
                    rho[k] -= G[k, j] * diff
                beta[j] = b_new
                if abs(diff) > delta_max:
                    delta_max = abs(diff)
        if delta_max < tol:
            return beta, sweep + 1
    return beta, max_sweeps


def _standardize(X, y):
    """Center/scale columns (1/n variance, zero-variance guard) and center y."""
    x_mean = X.mean(axis=0)
    x_std = X.std(axis=0)
    x_std = np.where(x_std > 0.0, x_std, 1.0)
    Z = (X - x_mean) / x_std
    y_mean = y.mean()
    return Z, y - y_mean, x_mean, x_std, y_mean


def _kkt_polish(G, c, lam, beta, live):
    """Solve the stationarity system exactly on the current active set.

    Coordinate descent stalls on ill-conditioned designs (per-sweep changes
    shrink long before the optimum). Once it has settled on an active set,
    the optimum solves ``G[A, A] b = c[A] - lam * sign(b)`` exactly; accept
    the solve only if it keeps the assumed signs and satisfies the
    subgradient bound on the inactive set. Returns the polished beta or None.
    """
    active = (np.abs(beta) > 0) & live if lam > 0 else live.copy()
    out = np.zeros_like(beta)
    if active.any():
        sign = np.sign(beta[active]) if lam > 0 else 0.0
        try:
            sol = np.linalg.solve(
                G[np.ix_(active, active)], c[active] - lam * sign
            )
        except np.linalg.LinAlgError:
            return None
        if lam > 0 and not (np.sign(sol) == sign).all():
            return None
        out[active] = sol
    rho = c - G @ out
    slack = 1e-9 * (np.abs(c).max() + 1.0)
    if (np.abs(rho[~active & live]) > lam + slack).any():
        return None
    return out


class Lasso(BaseLearner):
    """L1-penalized linear regression fit by coordinate descent.

    Minimizes ``(1/2n) * RSS + penalty * ||beta||_1`` on standardized
    features. With ``penalty = 0`` this is ordinary least squares (solved
    iteratively), which the selection stage uses as the unpenalized
    reference point of the path.

    Parameters
    ----------
    penalty : float
        The L1 penalty weight (lambda); must be >= 0.
    max_sweeps : int
        Hard cap on coordinate-descent sweeps.
    tol : float
        Convergence threshold on the largest coefficient change in a sweep
        (standardized scale).

    Attributes
    ----------
    coef_ : ndarray (n_features,)
        Coefficients on the original feature scale.
    intercept_ : float
    x_mean_, x_scale_ : ndarray (n_features,)
        Standardization constants used internally.
    n_sweeps_ : int
        Sweeps actually used.
    """

    kind = "lasso"
    _fitted_attr = "coef_"

    def __init__(self, penalty: float = 0.1, max_sweeps: int = 10_000, tol: float = 1e-10):
        self.penalty = penalty
        self.max_sweeps = max_sweeps
        self.tol = tol

    def _fit(self, X, y):
        if self.penalty < 0:
            raise ValueError(f"penalty must be >= 0, got {self.penalty}")
        n = X.shape[0]
        Z, yc, x_mean, x_std, y_mean = _standardize(X, y)
        G = (Z.T @ Z) / n
        c = (Z.T @ yc) / n
        lam = float(self.penalty)
        beta, sweeps = _lasso_cd(G, c, lam, int(self.max_sweeps), float(self.tol))
        live = np.diag(G) > 0.0
        polished = _kkt_polish(G, c, lam, beta, live)
        if polished is not None:
            beta = polished
        self.x_mean_ = x_mean
        self.x_scale_ = x_std
        self.coef_ = beta / x_std
        self.intercept_ = y_mean - float(self.coef_ @ x_mean)
        self.n_sweeps_ = int(sweeps)

    def _predict(self, X):
        return X @ self.coef_ + self.intercept_


class PartialLeastSquares(BaseLearner):
    """Univariate partial least squares (NIPALS, X-deflation only).

    Extracts ``n_components`` orthogonal score directions that maximize
    covariance with the target, then maps them back to a linear predictor.
    Extraction stops early if the deflated features lose all covariance with
    the target (rank exhausted), so ``effective_components_`` can be smaller
    than requested. With as many effective components as the feature rank,
    the fit coincides with least squares.

    Parameters
    ----------
    n_components : int
        Number of score directions to extract (>= 1).

    Attributes
    ----------
    coef_ : ndarray (n_features,)
        Coefficients on the original feature scale.
    intercept_ : float
    x_mean_, x_scale_ : ndarray (n_features,)
        Standardization constants used internally.
    effective_components_ : int
        Components actually extracted.
    """

    kind = "pls"
    _fitted_attr = "coef_"

    def __init__(self, n_components: int = 1):
        self.n_components = n_components

    def _fit(self, X, y):
        if self.n_components < 1:
            raise ValueError(
                f"n_components must be >= 1, got {self.n_components}"
            )
        d = X.shape[1]
        n_comp = min(int(self.n_components), d)
        Z, yc, x_mean, x_std, y_mean = _standardize(X, y)

        Xk = Z.copy()
        W = np.zeros((d, n_comp))
        P = np.zeros((d, n_comp))
        q = np.zeros(n_comp)
        scale0 = None
        k_eff = 0
        for k in range(n_comp):
            w = Xk.T @ yc
            nw = float(np.linalg.norm(w))
            if scale0 is None:
                scale0 = nw
            if nw <= 1e-12 * (scale0 + 1.0):
                break  # remaining features carry no covariance with y
            w /= nw
            t = Xk @ w
            tt = float(t @ t)
            if tt <= 1e-12 * Z.shape[0]:
                break
            W[:, k] = w
            P[:, k] = Xk.T @ t / tt
            q[k] = float(yc @ t) / tt
            Xk -= np.outer(t, P[:, k])
            k_eff += 1

        if k_eff == 0:
            beta = np.zeros(d)
        else:
            Wk, Pk, qk = W[:, :k_eff], P[:, :k_eff], q[:k_eff]
            beta = Wk @ np.linalg.solve(Pk.T @ Wk, qk)
        self.x_mean_ = x_mean
        self.x_scale_ = x_std
        self.coef_ = beta / x_std
        self.intercept_ = y_mean - float(self.coef_ @ x_mean)
        self.effective_components_ = k_eff

    def _predict(self, X):
        return X @ self.coef_ + self.intercept_
