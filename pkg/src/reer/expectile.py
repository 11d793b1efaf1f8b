"""Asymmetric least squares: loss, weights, moments, IRLS and sandwich covariance.

The expectile loss at level ``tau`` is ``0.5 * u**2 * |tau - 1(u < 0)|``.
A zero residual gets weight ``tau`` (the indicator is strict).

All moment sums here are unnormalized so they can be added across batches;
division by the row count happens only in the gradient and in the
covariance estimate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .linalg import SingularMatrixError, is_rank_deficient, spd_solve, symmetrize

__all__ = [
    "Batch",
    "Coefficients",
    "IrlsConfig",
    "IrlsFit",
    "NoConvergenceError",
    "asymmetric_loss",
    "asymmetric_weight",
    "batch_moments",
    "check_tau",
    "irls_fit",
    "loss_gradient",
    "mean_loss",
    "ols_fit",
    "pool",
    "sandwich_covariance",
]


def check_tau(tau: float) -> float:
    """Validate an expectile level and return it as a float."""
    tau = float(tau)
    if not 0.0 < tau < 1.0:
        raise ValueError(f"expectile level must lie in (0, 1), got {tau!r}")
    return tau


def _frozen(a: ArrayLike, ndim: int, name: str) -> NDArray[np.float64]:
    arr = np.array(a, dtype=np.float64, copy=True)
    if arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Batch:
    """One block of a data stream: design ``x`` (n, p) and response ``y`` (n,).

    An intercept, if wanted, is just a column of ones in ``x``.
    """

    x: NDArray[np.float64]
    y: NDArray[np.float64]

    def __post_init__(self):
        x = _frozen(self.x, 2, "x")
        y = _frozen(self.y, 1, "y")
        if x.shape[0] != y.shape[0]:
            raise ValueError(f"x has {x.shape[0]} rows but y has {y.shape[0]} entries")
        if x.shape[0] < 1 or x.shape[1] < 1:
            raise ValueError(f"empty batch: x has shape {x.shape}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("batch contains non-finite values")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        # (p + 1, n) row-contiguous [x.T; y]: one product yields both moments
        zt = np.vstack([x.T, y])
        zt.setflags(write=False)
        object.__setattr__(self, "zt", zt)

    @property
    def xt(self) -> NDArray[np.float64]:
        return self.zt[:-1]

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True)
class Coefficients:
    """Regression coefficients at one expectile level."""

    beta: NDArray[np.float64]
    tau: float

    def __post_init__(self):
        beta = _frozen(self.beta, 1, "beta")
        if not np.all(np.isfinite(beta)):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "tau", check_tau(self.tau))

    @property
    def p(self) -> int:
        return self.beta.size


@dataclass(frozen=True)
class IrlsFit(Coefficients):
    """Coefficients returned by :func:`irls_fit`, with convergence diagnostics."""

    n_iter: int = 0
    last_delta: float = 0.0


@dataclass(frozen=True)
class IrlsConfig:
    """Stopping rule and starting point for IRLS.

    Iteration stops once successive iterates differ by less than ``tol`` in
    max-norm. Without ``init`` the ordinary least-squares fit is used.
    """

    tol: float = 1e-8
    max_iter: int = 100
    init: Optional[NDArray[np.float64]] = field(default=None, compare=False)

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if int(self.max_iter) < 1:
            raise ValueError("max_iter must be at least 1")


class NoConvergenceError(RuntimeError):
    """IRLS hit ``max_iter``. The last iterate is kept on ``beta``."""

    def __init__(self, iterations: int, last_delta: float, beta: NDArray[np.float64]):
        super().__init__(
            f"IRLS did not converge in {iterations} iterations "
            f"(last max-norm step {last_delta:.3g})"
        )
        self.iterations = iterations
        self.last_delta = last_delta
        self.beta = beta


BatchLike = Union[Batch, Sequence[Batch]]


def pool_augmented(batches: BatchLike) -> NDArray[np.float64]:
    """Stack batches into one ``(p + 1, n)`` array ``[x.T; y]``."""
    if isinstance(batches, Batch):
        return batches.zt
    batches = list(batches)
    if not batches:
        raise ValueError("no batches given")
    if len(batches) == 1:
        return batches[0].zt
    p = {b.p for b in batches}
    if len(p) != 1:
        raise ValueError(f"batches disagree on column count: {sorted(p)}")
    return np.hstack([b.zt for b in batches])


def pool(batches: BatchLike) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Stack one batch or a sequence of batches into a transposed ``(x.T, y)``.

    The design comes back as a C-contiguous ``(p, n)`` array.
    """
    zt = pool_augmented(batches)
    return zt[:-1], zt[-1]


def asymmetric_loss(u, tau: float):
    """Expectile loss ``0.5 * u**2 * |tau - 1(u < 0)|``, elementwise."""
    u = np.asarray(u, dtype=np.float64)
    out = 0.5 * u * u * np.where(u < 0, 1.0 - tau, tau)
    return out if out.ndim else float(out)


def asymmetric_weight(u, tau: float):
    """``tau`` for ``u >= 0`` and ``1 - tau`` for ``u < 0``, elementwise."""
    u = np.asarray(u, dtype=np.float64)
    out = np.where(u < 0, 1.0 - tau, tau)
    return out if out.ndim else float(out)


def _moments(xt, y, beta, tau):
    # xt is the (p, n) transposed design
    w = np.where(beta @ xt > y, 1.0 - tau, tau)
    xw = xt * w
    return symmetrize(xw @ xt.T), xw @ y


def _moments_aug(zt, beta, tau):
    """``(W, U)`` from the augmented ``[x.T; y]`` with a single matrix product."""
    p = zt.shape[0] - 1
    # x^T beta > y  <=>  y - x^T beta < 0, exactly
    zw = zt * np.where(beta @ zt[:p] > zt[p], 1.0 - tau, tau)
    m = zw @ zt[:p].T
    return symmetrize(m[:p]), m[p]


def _check_dim(xt, beta):
    if xt.shape[0] != beta.shape[0]:
        raise ValueError(f"design has {xt.shape[0]} columns but beta has {beta.shape[0]} entries")


def batch_moments(batch: BatchLike, beta: ArrayLike, tau: float):
    """Weighted Gram matrix and cross-product at ``beta``.

    Returns
    -------
    w_mat : (p, p) array
        ``sum_i w_i x_i x_i^T``
    u_vec : (p,) array
        ``sum_i w_i x_i y_i``

    with ``w_i = asymmetric_weight(y_i - x_i^T beta, tau)``. Sums are not
    divided by the number of rows.
    """
    xt, y = pool(batch)
    beta = np.asarray(beta, dtype=np.float64)
    _check_dim(xt, beta)
    return _moments(xt, y, beta, tau)


def loss_gradient(batch: BatchLike, beta: ArrayLike, tau: float) -> NDArray[np.float64]:
    """Gradient of the mean expectile loss, ``-(u_vec - w_mat @ beta) / n``."""
    xt, y = pool(batch)
    beta = np.asarray(beta, dtype=np.float64)
    _check_dim(xt, beta)
    w_mat, u_vec = _moments(xt, y, beta, tau)
    return -(u_vec - w_mat @ beta) / xt.shape[1]


def mean_loss(batch: BatchLike, beta: ArrayLike, tau: float) -> float:
    """Mean expectile loss of the residuals ``y - x @ beta``."""
    xt, y = pool(batch)
    beta = np.asarray(beta, dtype=np.float64)
    _check_dim(xt, beta)
    return float(np.mean(asymmetric_loss(y - beta @ xt, tau)))


def _check_rank(xt):
    p, n = xt.shape
    if n < p:
        raise SingularMatrixError(f"{n} rows cannot identify {p} coefficients")
    gram = symmetrize(xt @ xt.T)
    if is_rank_deficient(gram):
        raise SingularMatrixError("design matrix is rank deficient")
    return gram


def ols_fit(batch: BatchLike) -> NDArray[np.float64]:
    """Ordinary least squares on the pooled rows."""
    xt, y = pool(batch)
    gram = _check_rank(xt)
    return spd_solve(gram, xt @ y)


def irls_fit(batches: BatchLike, tau: float, cfg: Optional[IrlsConfig] = None) -> IrlsFit:
    """Full-data expectile regression by iteratively reweighted least squares.

    Rows of all batches are pooled, then ``beta <- W(beta)^{-1} U(beta)`` is
    iterated until the max-norm step drops below ``cfg.tol``.

    Raises
    ------
    SingularMatrixError
        Fewer rows than columns, or collinear columns.
    NoConvergenceError
        ``cfg.max_iter`` iterations without meeting the tolerance.
    """
    tau = check_tau(tau)
    cfg = cfg or IrlsConfig()
    zt = pool_augmented(batches)
    xt = zt[:-1]
    gram = _check_rank(xt)
    if cfg.init is not None:
        beta = np.array(cfg.init, dtype=np.float64)
        _check_dim(xt, beta)
    else:
        beta = spd_solve(gram, xt @ zt[-1])

    delta = np.inf
    for it in range(1, cfg.max_iter + 1):
        new = spd_solve(*_moments_aug(zt, beta, tau))
        delta = float(np.max(np.abs(new - beta)))
        beta = new
        if delta < cfg.tol:
            return IrlsFit(beta, tau, n_iter=it, last_delta=delta)
    raise NoConvergenceError(cfg.max_iter, delta, beta)


def sandwich_covariance(batches: BatchLike, beta: ArrayLike, tau: float) -> NDArray[np.float64]:
    """Plug-in estimate of ``Var(beta_hat)``.

    Computes ``S^{-1} O S^{-1} / N`` with
    ``S = mean(w_i x_i x_i^T)`` and ``O = mean(w_i^2 e_i^2 x_i x_i^T)``,
    where ``e_i = y_i - x_i^T beta``.
    """
    tau = check_tau(tau)
    xt, y = pool(batches)
    beta = np.asarray(beta, dtype=np.float64)
    _check_dim(xt, beta)
    p, n = xt.shape
    if n < p:
        raise SingularMatrixError(f"{n} rows cannot identify {p} coefficients")
    resid = y - beta @ xt
    w = np.where(resid < 0, 1.0 - tau, tau)
    s_w = symmetrize((xt * w) @ xt.T) / n
    omega = symmetrize((xt * (w * resid) ** 2) @ xt.T) / n
    if not np.any(omega):
        return np.zeros((p, p))
    half = spd_solve(s_w, omega)
    return symmetrize(spd_solve(s_w, half.T)) / n
