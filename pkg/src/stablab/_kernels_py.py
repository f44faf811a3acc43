"""Pure numpy versions of the hot loops. Same signatures as ``_ckernels``."""
import numpy as np


def sas_transform(u, w, alpha):
    """Symmetric Chambers-Mallows-Stuck map from (uniform, Exp(1)) pairs."""
    u = np.asarray(u, dtype=float)
    phi = np.pi * (u - 0.5)
    if alpha == 1.0:
        return np.tan(phi)
    w = np.asarray(w, dtype=float)
    if alpha == 2.0:
        return 2.0 * np.sqrt(w) * np.sin(phi)
    inv_alpha = 1.0 / alpha
    expo = (1.0 - alpha) / alpha
    return np.sin(alpha * phi) / np.cos(phi) ** inv_alpha * (np.cos((1.0 - alpha) * phi) / w) ** expo


def _reduce(v, weights, q):
    a = np.abs(v)
    if np.isinf(q):
        return a.max(axis=-1)
    if q == 1.0:
        return a @ weights
    if q == 2.0:
        return np.sqrt((a * a) @ weights)
    return ((a ** q) @ weights) ** (1.0 / q)


def rows_norm(x, weights, q):
    return _reduce(np.asarray(x, dtype=float), np.asarray(weights, dtype=float), q)


def cumsum_norm(incr, rho, weights, q):
    """Norm of each row of ``rho * cumsum(incr)``; ``rho`` may be None."""
    path = np.cumsum(incr, axis=-1)
    if rho is not None:
        path *= rho
    return _reduce(path, np.asarray(weights, dtype=float), q)


def block_max_sum(u, w, alpha, theta):
    """sum_n theta[n-1] * max |X| over the level-n block of 2**n entries.

    Row layout: level n occupies columns [2**n - 2, 2**(n+1) - 2).
    """
    theta = np.asarray(theta, dtype=float)
    x = np.abs(sas_transform(u, w, alpha))
    out = np.zeros(x.shape[0])
    for n in range(1, theta.shape[0] + 1):
        lo = (1 << n) - 2
        out += theta[n - 1] * x[:, lo:lo + (1 << n)].max(axis=1)
    return out
