"""Renewable expectile regression (ReER).

The stream is summarized by the cumulative weighted Hessian ``h`` and the
current estimate. Each new batch costs one weight pass at the previous
estimate, a single p x p solve, and a second weight pass at the new estimate
to extend ``h``::

    beta_b = (h + W_b(beta_{b-1}))^{-1} (h beta_{b-1} + U_b(beta_{b-1}))
    h      = h + W_b(beta_b)

There is no inner iteration; the previous estimate is plugged in for the
unknown new one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Optional

import numpy as np
from numpy.typing import NDArray

from .expectile import Batch, Coefficients, IrlsConfig, _moments_aug, check_tau, irls_fit
from .linalg import spd_solve, symmetrize

__all__ = ["SummaryState", "current_estimate", "fit_stream", "init_state", "renew_update"]


@dataclass(frozen=True)
class SummaryState:
    """Everything ReER keeps between batches: O(p^2) numbers, independent of N."""

    h: NDArray[np.float64]
    beta: NDArray[np.float64]
    n_seen: int
    batches_seen: int
    tau: float

    def __post_init__(self):
        h = np.array(self.h, dtype=np.float64)
        beta = np.array(self.beta, dtype=np.float64)
        p = beta.size
        if beta.ndim != 1 or h.shape != (p, p):
            raise ValueError(f"h has shape {h.shape} but beta has {p} entries")
        if not np.array_equal(h, h.T):
            raise ValueError("h must be symmetric")
        if self.batches_seen < 1 or self.n_seen < self.batches_seen:
            raise ValueError(
                f"inconsistent counters n_seen={self.n_seen}, batches_seen={self.batches_seen}"
            )
        h.setflags(write=False)
        beta.setflags(write=False)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "tau", check_tau(self.tau))

    @classmethod
    def _trusted(cls, h, beta, n_seen, batches_seen, tau):
        # skips validation for states derived from a valid state by symmetric sums
        self = object.__new__(cls)
        h.setflags(write=False)
        beta.setflags(write=False)
        for name, value in (("h", h), ("beta", beta), ("n_seen", n_seen),
                            ("batches_seen", batches_seen), ("tau", tau)):
            object.__setattr__(self, name, value)
        return self

    @property
    def p(self) -> int:
        return self.beta.size

    def __eq__(self, other):
        if not isinstance(other, SummaryState):
            return NotImplemented
        return (
            self.tau == other.tau
            and self.n_seen == other.n_seen
            and self.batches_seen == other.batches_seen
            and np.array_equal(self.beta, other.beta)
            and np.array_equal(self.h, other.h)
        )

    __hash__ = None


def init_state(first_batch: Batch, tau: float, cfg: Optional[IrlsConfig] = None) -> SummaryState:
    """Fit the first batch by IRLS and store its weighted Gram matrix.

    The first batch needs at least ``p`` rows of full column rank; errors
    from :func:`~reer.expectile.irls_fit` propagate.
    """
    fit = irls_fit(first_batch, tau, cfg)
    w_mat, _ = _moments_aug(first_batch.zt, fit.beta, fit.tau)
    return SummaryState(
        h=w_mat, beta=fit.beta, n_seen=first_batch.n, batches_seen=1, tau=fit.tau
    )


def renew_update(state: SummaryState, batch: Batch, tau: Optional[float] = None) -> SummaryState:
    """Fold one batch into the summary state.

    Any batch size is accepted, including a single row, because ``h``
    already carries the history's curvature. Passing ``tau`` asserts the
    level the caller expects; the state's level is frozen at init.
    """
    if tau is not None and check_tau(tau) != state.tau:
        raise ValueError(f"state was built at tau={state.tau}, got tau={tau}")
    if batch.p != state.p:
        raise ValueError(f"batch has {batch.p} columns, state has {state.p}")
    h, tau, zt = state.h, state.tau, batch.zt
    p = state.p
    xt, y = zt[:p], zt[p]

    neg_old = state.beta @ xt > y
    m = (zt * np.where(neg_old, 1.0 - tau, tau)) @ xt.T
    w_b = symmetrize(m[:p])
    beta = spd_solve(h + w_b, h @ state.beta + m[p])

    # W_b at the new estimate: only rows whose residual sign flipped change weight
    neg_new = beta @ xt > y
    flipped = neg_old != neg_new
    if flipped.any():
        xf = xt[:, flipped]
        step = np.where(neg_new[flipped], 1.0 - 2.0 * tau, 2.0 * tau - 1.0)
        w_b = w_b + symmetrize((xf * step) @ xf.T)
    return SummaryState._trusted(h + w_b, beta, state.n_seen + batch.n, state.batches_seen + 1, tau)


def current_estimate(state: SummaryState) -> Coefficients:
    return Coefficients(state.beta, state.tau)


def fit_stream(
    batches: Iterable[Batch],
    tau: float,
    cfg: Optional[IrlsConfig] = None,
    callback: Optional[Callable[[SummaryState], None]] = None,
) -> SummaryState:
    """Run ReER over an iterable of batches and return the final state.

    ``callback`` is called with the state after every batch, including the
    first.
    """
    state = None
    for batch in batches:
        state = init_state(batch, tau, cfg) if state is None else renew_update(state, batch)
        if callback is not None:
            callback(state)
    if state is None:
        raise ValueError("empty stream")
    return state
