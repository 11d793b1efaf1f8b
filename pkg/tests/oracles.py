"""Reference computations that share no code with the package.

Each oracle takes the slow, obvious route: adaptive quadrature instead of
closed-form partial moments, plain bisection instead of Brent, Python loops
instead of matrix products, grid search instead of IRLS.
"""

import numpy as np
from scipy import integrate, stats


def _partial_moment_quad(pdf, theta):
    # E[(X - theta)+] by adaptive quadrature on [theta, inf)
    val, _ = integrate.quad(lambda x: (x - theta) * pdf(x), theta, np.inf, epsabs=1e-14, epsrel=1e-13, limit=200)
    return val


def expectile_quad(dist: str, tau: float) -> float:
    """Root of tau*E[(X-t)+] = (1-tau)*E[(t-X)+] by bisection on quadrature moments."""
    pdf = {"normal": stats.norm.pdf, "t3": stats.t(3).pdf}[dist]

    def g(theta):
        upper = _partial_moment_quad(pdf, theta)
        # E[(t - X)+] = E[(X - t)+] - E[X - t] = upper + t for a mean-zero X
        return tau * upper - (1.0 - tau) * (upper + theta)

    lo, hi = -20.0, 20.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-13:
            break
    return 0.5 * (lo + hi)


def loop_moments(x, y, beta, tau):
    """Weighted Gram matrix and cross-product with explicit loops."""
    n, p = x.shape
    w_mat = [[0.0] * p for _ in range(p)]
    u_vec = [0.0] * p
    for i in range(n):
        r = y[i] - sum(x[i, k] * beta[k] for k in range(p))
        w = (1.0 - tau) if r < 0 else tau
        for a in range(p):
            u_vec[a] += w * x[i, a] * y[i]
            for b in range(p):
                w_mat[a][b] += w * x[i, a] * x[i, b]
    return np.array(w_mat), np.array(u_vec)


def mean_loss_loop(x, y, beta, tau):
    total = 0.0
    for i in range(len(y)):
        u = y[i] - float(np.dot(x[i], beta))
        total += 0.5 * u * u * abs(tau - (1.0 if u < 0 else 0.0))
    return total / len(y)


def central_difference(f, beta, step=1e-6):
    beta = np.asarray(beta, dtype=float)
    grad = np.empty_like(beta)
    for j in range(beta.size):
        e = np.zeros_like(beta)
        e[j] = step
        grad[j] = (f(beta + e) - f(beta - e)) / (2 * step)
    return grad


def scalar_expectile_grid(y, tau, lo=None, hi=None, points=200001):
    """Minimize sum(rho_tau(y - b)) over a fine grid, then refine locally."""
    y = np.asarray(y, dtype=float)
    lo = y.min() if lo is None else lo
    hi = y.max() if hi is None else hi

    def objective(b):
        u = y[:, None] - b[None, :]
        return np.sum(0.5 * u * u * np.where(u < 0, 1.0 - tau, tau), axis=0)

    for _ in range(3):
        grid = np.linspace(lo, hi, points)
        k = int(np.argmin(objective(grid)))
        step = grid[1] - grid[0]
        lo, hi = grid[max(k - 1, 0)] - step, grid[min(k + 1, points - 1)] + step
    return 0.5 * (lo + hi)


def lstsq(x, y):
    return np.linalg.lstsq(np.asarray(x, float), np.asarray(y, float), rcond=None)[0]
