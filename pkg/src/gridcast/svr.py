"""Epsilon-insensitive support vector regression with an RBF kernel.

The dual is solved by sequential minimal optimization over the stacked
variables ``beta = [alpha; alpha*]`` in the form::

    min  1/2 beta' Q beta + p' beta
    s.t. z' beta = 0,  0 <= beta <= C

with ``z = [1..1, -1..-1]``, ``p = [eps - y; eps + y]`` and
``Q[s, t] = z_s z_t K(x_{s mod n}, x_{t mod n})``.  Working pairs are picked
by maximal violation with second-order information for the partner, and
the solver stops once the maximal KKT violation drops below ``tol``.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

TAU = 1e-12


class SvrConvergenceError(RuntimeError):
    def __init__(self, message, kkt_gap):
        super().__init__(message)
        self.kkt_gap = kkt_gap


def rbf_kernel(x, y, sigma):
    """``exp(-||x - y||^2 / (2 sigma^2))``."""
    if sigma <= 0:
        raise ValueError(f"kernel width must be positive, got {sigma}")
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    diff = x - y
    return float(np.exp(-np.dot(diff, diff) / (2.0 * sigma * sigma)))


def rbf_kernel_matrix(A, B, sigma):
    if sigma <= 0:
        raise ValueError(f"kernel width must be positive, got {sigma}")
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    return np.exp(-cdist(A, B, "sqeuclidean") / (2.0 * sigma * sigma))


@dataclass
class SvrModel:
    support_vectors: np.ndarray  # (n_sv, k)
    dual_coef: np.ndarray        # alpha - alpha*, (n_sv,)
    bias: float
    sigma: float
    C: float
    epsilon: float
    n_iter: int = 0
    kkt_gap: float = 0.0
    objective: float = 0.0       # minimized dual value
    support_index: np.ndarray | None = None  # rows of the training set


def _smo(K, y, C, eps, tol, max_iter):
    n = y.size
    z = np.concatenate((np.ones(n), -np.ones(n)))
    p = np.concatenate((eps - y, eps + y))
    beta = np.zeros(2 * n)
    G = p.copy()
    kd = np.concatenate((np.diag(K), np.diag(K)))

    def qcol(t):
        col = K[:, t % n]
        return z[t] * z * np.concatenate((col, col))

    gap = np.inf
    for it in range(max_iter):
        up = np.where(z > 0, beta < C, beta > 0)
        low = np.where(z > 0, beta > 0, beta < C)
        v = -z * G
        vu = np.where(up, v, -np.inf)
        i = int(np.argmax(vu))
        gmax = vu[i]
        gmin = np.min(np.where(low, v, np.inf))
        gap = gmax - gmin
        if gap < tol:
            return beta, G, it, gap

        Qi = qcol(i)
        b = gmax - v
        cand = low & (b > 0)
        a = kd[i] + kd - 2.0 * z[i] * z * Qi
        a = np.where(a > 0, a, TAU)
        score = np.where(cand, -(b * b) / a, np.inf)
        j = int(np.argmin(score))
        Qj = qcol(j)

        old_i, old_j = beta[i], beta[j]
        if z[i] != z[j]:
            quad = max(kd[i] + kd[j] + 2.0 * Qi[j], TAU)
            delta = (-G[i] - G[j]) / quad
            diff = old_i - old_j
            bi, bj = old_i + delta, old_j + delta
            if diff > 0:
                if bj < 0:
                    bj, bi = 0.0, diff
            elif bi < 0:
                bi, bj = 0.0, -diff
            if diff > 0:
                if bi > C:
                    bi, bj = C, C - diff
            elif bj > C:
                bj, bi = C, C + diff
        else:
            quad = max(kd[i] + kd[j] - 2.0 * Qi[j], TAU)
            delta = (G[i] - G[j]) / quad
            total = old_i + old_j
            bi, bj = old_i - delta, old_j + delta
            if total > C:
                if bi > C:
                    bi, bj = C, total - C
            elif bj < 0:
                bj, bi = 0.0, total
            if total > C:
                if bj > C:
                    bj, bi = C, total - C
            elif bi < 0:
                bi, bj = 0.0, total
        beta[i], beta[j] = bi, bj
        G += Qi * (bi - old_i) + Qj * (bj - old_j)
    raise SvrConvergenceError(
        f"SMO did not converge in {max_iter} iterations; residual KKT "
        f"violation {gap:.3e} (tol {tol:.1e})", gap)


def _rho(beta, G, C):
    n2 = beta.size
    z = np.concatenate((np.ones(n2 // 2), -np.ones(n2 // 2)))
    yG = z * G
    at_upper = beta >= C
    at_lower = beta <= 0
    free = ~(at_upper | at_lower)
    if free.any():
        return float(np.mean(yG[free]))
    ub_mask = (at_upper & (z < 0)) | (at_lower & (z > 0))
    lb_mask = (at_upper & (z > 0)) | (at_lower & (z < 0))
    ub = np.min(yG[ub_mask]) if ub_mask.any() else np.inf
    lb = np.max(yG[lb_mask]) if lb_mask.any() else -np.inf
    return float((ub + lb) / 2.0)


def svr_fit_arrays(X, y, C=10.0, epsilon=0.01, sigma=1.6, tol=1e-3,
                   max_iter=None):
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.shape[0] != y.size:
        raise ValueError(f"{X.shape[0]} inputs but {y.size} targets")
    if y.size < 2:
        raise ValueError("SVR needs at least two training points")
    if C <= 0 or epsilon < 0:
        raise ValueError(f"need C > 0 and epsilon >= 0, got C={C}, epsilon={epsilon}")
    n = y.size
    if max_iter is None:
        max_iter = max(100_000, 100 * n)
    K = rbf_kernel_matrix(X, X, sigma)
    beta, G, it, gap = _smo(K, y, float(C), float(epsilon), tol, max_iter)
    p = np.concatenate((epsilon - y, epsilon + y))
    objective = float(0.5 * np.dot(beta, G + p))
    coef = beta[:n] - beta[n:]
    bias = -_rho(beta, G, C)
    keep = np.flatnonzero(coef)
    return SvrModel(X[keep].copy(), coef[keep], bias, float(sigma), float(C),
                    float(epsilon), it, float(gap), objective, keep)


def svr_fit(windows, C=10.0, epsilon=0.01, sigma=1.6, tol=1e-3, max_iter=None):
    """Fit one SVR on a single-output :class:`~gridcast.data.WindowSet`."""
    if windows.targets.shape[1] != 1:
        raise ValueError(f"svr_fit expects single-output windows, got l="
                         f"{windows.targets.shape[1]}; use svr_fit_multi")
    return svr_fit_arrays(windows.inputs, windows.targets[:, 0], C, epsilon,
                          sigma, tol, max_iter)


def svr_predict(model, window):
    """``sum_i coef_i K(x_i, x) + b`` for one window or a ``(B, k)`` batch."""
    X = np.asarray(window, dtype=np.float64)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if model.dual_coef.size == 0:
        out = np.full(X.shape[0], model.bias)
    else:
        out = rbf_kernel_matrix(X, model.support_vectors, model.sigma) @ model.dual_coef + model.bias
    return float(out[0]) if single else out


def svr_fit_multi(windows, **kwargs):
    """One independent SVR per lead day."""
    return [svr_fit_arrays(windows.inputs, windows.targets[:, h], **kwargs)
            for h in range(windows.targets.shape[1])]


def svr_predict_multi(models, windows):
    return np.column_stack([svr_predict(m, np.atleast_2d(windows)) for m in models])


def kkt_violation(model, X, y):
    """Largest KKT violation over the training set ``(X, y)`` the model was
    fitted on, given the fitted bias.

    Zero coefficients need ``|r| <= eps``; free ones ``|r| == eps`` with the
    sign of the coefficient; bounded ones ``|r| >= eps``, where
    ``r = y - f(x)``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    coef = np.zeros(y.size)
    coef[model.support_index] = model.dual_coef
    r = y - svr_predict(model, X)
    eps, C = model.epsilon, model.C
    v = np.zeros(y.size)
    zero = coef == 0
    v[zero] = np.maximum(np.abs(r[zero]) - eps, 0.0)
    pos_free = (coef > 0) & (coef < C)
    neg_free = (coef < 0) & (coef > -C)
    v[pos_free] = np.abs(r[pos_free] - eps)
    v[neg_free] = np.abs(r[neg_free] + eps)
    pos_bound = coef >= C
    neg_bound = coef <= -C
    v[pos_bound] = np.maximum(eps - r[pos_bound], 0.0)
    v[neg_bound] = np.maximum(r[neg_bound] + eps, 0.0)
    return float(v.max())
