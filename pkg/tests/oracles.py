"""Reference computations kept independent of the package internals."""

import math

import numpy as np


def scalar_sigmoid(v):
    return 1.0 / (1.0 + math.exp(-v))


def scalar_lstm_step(W, b, x, h, m, variant):
    """One cell step written with explicit loops over plain Python floats."""
    d = len(h)
    H = list(x) + list(h)
    z = []
    for r in range(4 * d):
        s = b[r][0]
        for c in range(len(H)):
            s += W[r][c] * H[c]
        z.append(s)
    i = [scalar_sigmoid(z[r]) for r in range(d)]
    f = [scalar_sigmoid(z[d + r]) for r in range(d)]
    o = [scalar_sigmoid(z[2 * d + r]) for r in range(d)]
    c = [math.tanh(z[3 * d + r]) for r in range(d)]
    m_new = [f[r] * m[r] + i[r] * c[r] for r in range(d)]
    if variant == "paper":
        h_new = [math.tanh(o[r] * m_new[r]) for r in range(d)]
    else:
        h_new = [o[r] * math.tanh(m_new[r]) for r in range(d)]
    return h_new, m_new


def central_differences(f, arrays, step=1e-5):
    """Central finite-difference gradient of scalar ``f()`` w.r.t. each array,
    perturbing the arrays in place."""
    grads = []
    for a in arrays:
        g = np.zeros_like(a)
        for idx in np.ndindex(a.shape):
            orig = a[idx]
            a[idx] = orig + step
            plus = f()
            a[idx] = orig - step
            minus = f()
            a[idx] = orig
            g[idx] = (plus - minus) / (2 * step)
        grads.append(g)
    return grads


def max_rel_error(analytic, numeric, floor=1e-6):
    """Largest ``|a - n| / max(|a|, |n|, floor)`` over all components.

    The floor keeps components whose true gradient is essentially zero from
    turning round-off into a large relative error.
    """
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst
