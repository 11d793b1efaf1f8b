"""One-shot aggregation baselines for streaming expectile regression.

Both fit each batch on its own by IRLS and keep a matrix-weighted running
sum of the local estimates:

* PAER weights local fits by ``omega_t * X_t^T X_t / n_t``.
* DCER weights them by the inverse of the local sandwich covariance.

The final estimate is ``acc_mat^{-1} acc_vec``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Optional, Union

import numpy as np
from numpy.typing import NDArray

from .expectile import (
    Batch,
    Coefficients,
    IrlsConfig,
    check_tau,
    irls_fit,
    sandwich_covariance,
)
from .linalg import spd_solve, symmetrize

__all__ = [
    "BatchTooSmallError",
    "DcerState",
    "PaerState",
    "WeightMode",
    "dcer_finalize",
    "dcer_init",
    "dcer_update",
    "merge",
    "paer_finalize",
    "paer_init",
    "paer_update",
]


class BatchTooSmallError(ValueError):
    """A batch has too few rows to support its own local fit."""


class WeightMode(str, enum.Enum):
    """How PAER weights batch ``t``.

    ``FINAL_FRACTION`` uses ``omega_t = n_t`` (equivalently ``n_t / N`` with
    the final total, which cancels in the solve). ``CUMULATIVE_FRACTION`` uses
    ``n_t / N_t`` with the running total at arrival, which makes the result
    depend on arrival order.
    """

    FINAL_FRACTION = "final_fraction"
    CUMULATIVE_FRACTION = "cumulative_fraction"


@dataclass(frozen=True)
class _AggState:
    acc_mat: NDArray[np.float64]
    acc_vec: NDArray[np.float64]
    n_seen: int
    batches_seen: int
    tau: float

    def __post_init__(self):
        acc_mat = np.array(self.acc_mat, dtype=np.float64)
        acc_vec = np.array(self.acc_vec, dtype=np.float64)
        p = acc_vec.size
        if acc_vec.ndim != 1 or acc_mat.shape != (p, p):
            raise ValueError(f"acc_mat has shape {acc_mat.shape} but acc_vec has {p} entries")
        if not np.array_equal(acc_mat, acc_mat.T):
            raise ValueError("acc_mat must be symmetric")
        acc_mat.setflags(write=False)
        acc_vec.setflags(write=False)
        object.__setattr__(self, "acc_mat", acc_mat)
        object.__setattr__(self, "acc_vec", acc_vec)
        object.__setattr__(self, "tau", check_tau(self.tau))

    @property
    def p(self) -> int:
        return self.acc_vec.size

    def _fields_equal(self, other) -> bool:
        return (
            type(self) is type(other)
            and self.tau == other.tau
            and self.n_seen == other.n_seen
            and self.batches_seen == other.batches_seen
            and np.array_equal(self.acc_mat, other.acc_mat)
            and np.array_equal(self.acc_vec, other.acc_vec)
        )


@dataclass(frozen=True, eq=False)
class PaerState(_AggState):
    weight_mode: WeightMode = WeightMode.FINAL_FRACTION

    def __eq__(self, other):
        return self._fields_equal(other) and self.weight_mode == other.weight_mode

    __hash__ = None


@dataclass(frozen=True, eq=False)
class DcerState(_AggState):
    def __eq__(self, other):
        return self._fields_equal(other)

    __hash__ = None


def paer_init(p: int, tau: float, weight_mode: Union[WeightMode, str] = WeightMode.FINAL_FRACTION) -> PaerState:
    """Empty PAER accumulator for ``p`` coefficients."""
    return PaerState(np.zeros((p, p)), np.zeros(p), 0, 0, tau, WeightMode(weight_mode))


def dcer_init(p: int, tau: float) -> DcerState:
    """Empty DCER accumulator for ``p`` coefficients."""
    return DcerState(np.zeros((p, p)), np.zeros(p), 0, 0, tau)


def _check_batch(state: _AggState, batch: Batch, min_rows: int) -> None:
    if batch.p != state.p:
        raise ValueError(f"batch has {batch.p} columns, state has {state.p}")
    if batch.n < min_rows:
        raise BatchTooSmallError(f"batch of {batch.n} rows is too small for a local fit of {batch.p} coefficients")


def paer_update(state: PaerState, batch: Batch, cfg: Optional[IrlsConfig] = None) -> PaerState:
    """Fit ``batch`` locally and add its weighted contribution."""
    _check_batch(state, batch, batch.p)
    local = irls_fit(batch, state.tau, cfg).beta
    n_total = state.n_seen + batch.n
    if state.weight_mode is WeightMode.FINAL_FRACTION:
        # omega_t / n_t == 1
        mat = symmetrize(batch.xt @ batch.x)
    else:
        mat = symmetrize(batch.xt @ batch.x) * (1.0 / n_total)
    return replace(
        state,
        acc_mat=state.acc_mat + mat,
        acc_vec=state.acc_vec + mat @ local,
        n_seen=n_total,
        batches_seen=state.batches_seen + 1,
    )


def dcer_update(state: DcerState, batch: Batch, cfg: Optional[IrlsConfig] = None) -> DcerState:
    """Fit ``batch`` locally and add it with inverse-covariance weight.

    The local covariance is the sandwich estimate of the batch fit, so a
    batch with all-zero residuals has no usable weight and raises
    :class:`~reer.linalg.SingularMatrixError`.
    """
    _check_batch(state, batch, batch.p + 1)
    local = irls_fit(batch, state.tau, cfg).beta
    q = sandwich_covariance(batch, local, state.tau)
    q_inv = symmetrize(spd_solve(q, np.eye(state.p)))
    return replace(
        state,
        acc_mat=state.acc_mat + q_inv,
        acc_vec=state.acc_vec + q_inv @ local,
        n_seen=state.n_seen + batch.n,
        batches_seen=state.batches_seen + 1,
    )


def _finalize(state: _AggState) -> Coefficients:
    if state.batches_seen < 1:
        raise ValueError("no batches have been aggregated")
    return Coefficients(spd_solve(state.acc_mat, state.acc_vec), state.tau)


def paer_finalize(state: PaerState) -> Coefficients:
    return _finalize(state)


def dcer_finalize(state: DcerState) -> Coefficients:
    return _finalize(state)


def merge(a: _AggState, b: _AggState) -> _AggState:
    """Combine two accumulators built from disjoint batches.

    Only meaningful for order-free weights, so cumulative-fraction PAER
    states are rejected.
    """
    if type(a) is not type(b):
        raise TypeError(f"cannot merge {type(a).__name__} with {type(b).__name__}")
    if a.tau != b.tau or a.p != b.p:
        raise ValueError("states differ in tau or dimension")
    if isinstance(a, PaerState):
        if a.weight_mode != b.weight_mode:
            raise ValueError("PAER states differ in weight mode")
        if a.weight_mode is WeightMode.CUMULATIVE_FRACTION:
            raise ValueError("cumulative-fraction weights depend on arrival order; cannot merge")
    return replace(
        a,
        acc_mat=a.acc_mat + b.acc_mat,
        acc_vec=a.acc_vec + b.acc_vec,
        n_seen=a.n_seen + b.n_seen,
        batches_seen=a.batches_seen + b.batches_seen,
    )
