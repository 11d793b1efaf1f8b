"""Synthetic streams and the Monte-Carlo comparison harness.

Data follow ``y = x^T beta_star + (x^T gamma) * eps`` with
``x = (1, U(0,1), U(0,1))``. Four cases cross homogeneous/heterogeneous
scale with N(0,1)/t(3) errors. The estimand at level ``tau`` is
``beta_star + e_tau(eps) * gamma``.

Randomness is counter based: the generator for ``(seed, rep, batch)`` is
seeded by hashing the triple, so any batch of any replication can be
regenerated on its own and replications can run in any order.
"""

from __future__ import annotations

import enum
import io
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import brentq
from scipy.special import ndtr

from .baselines import (
    WeightMode,
    dcer_finalize,
    dcer_init,
    dcer_update,
    paer_finalize,
    paer_init,
    paer_update,
)
from .expectile import Batch, IrlsConfig, check_tau, irls_fit
from .renewable import init_state, renew_update

__all__ = [
    "ErrorDist",
    "METHODS",
    "MetricsTable",
    "Scenario",
    "SimConfig",
    "distribution_expectile",
    "generate_batch",
    "generate_stream",
    "partial_moment",
    "run_experiment",
    "run_method",
    "true_coefficients",
]

METHODS = ("oracle", "reer", "paer", "dcer")

BETA_STAR = (2.0, 1.0, 2.0)
GAMMA_HOMOGENEOUS = (1.0, 0.0, 0.0)
GAMMA_HETEROGENEOUS = (1.0, 0.25, 0.0)


class ErrorDist(str, enum.Enum):
    STD_NORMAL = "std_normal"
    STUDENT_T3 = "student_t3"


class Scenario(str, enum.Enum):
    S1 = "s1"  # total sample fixed, batch size varies
    S2 = "s2"  # batch size fixed, batch count varies


CASES = {
    1: (ErrorDist.STD_NORMAL, GAMMA_HOMOGENEOUS),
    2: (ErrorDist.STUDENT_T3, GAMMA_HOMOGENEOUS),
    3: (ErrorDist.STD_NORMAL, GAMMA_HETEROGENEOUS),
    4: (ErrorDist.STUDENT_T3, GAMMA_HETEROGENEOUS),
}


@dataclass(frozen=True)
class SimConfig:
    """One synthetic experiment.

    ``beta_star`` and ``gamma`` default to the case's values; ``gamma`` may
    be overridden (e.g. all zeros for a noiseless check).
    """

    case: int = 1
    scenario: Scenario = Scenario.S2
    tau: float = 0.25
    n_k: int = 300
    num_batches: int = 100
    reps: int = 200
    seed: int = 0
    beta_star: Tuple[float, ...] = BETA_STAR
    gamma: Optional[Tuple[float, ...]] = None
    paer_weight: WeightMode = WeightMode.FINAL_FRACTION
    irls_tol: float = 1e-8
    irls_max_iter: int = 100

    def __post_init__(self):
        if self.case not in CASES:
            raise ValueError(f"case must be one of 1-4, got {self.case!r}")
        object.__setattr__(self, "scenario", Scenario(self.scenario))
        object.__setattr__(self, "paer_weight", WeightMode(self.paer_weight))
        check_tau(self.tau)
        if self.n_k < 1 or self.num_batches < 1 or self.reps < 1:
            raise ValueError("n_k, num_batches and reps must be positive")
        if self.gamma is None:
            object.__setattr__(self, "gamma", CASES[self.case][1])
        object.__setattr__(self, "beta_star", tuple(float(v) for v in self.beta_star))
        object.__setattr__(self, "gamma", tuple(float(v) for v in self.gamma))
        if len(self.beta_star) != 3 or len(self.gamma) != 3:
            raise ValueError("beta_star and gamma must have 3 entries (intercept + 2 covariates)")

    @property
    def dist(self) -> ErrorDist:
        return CASES[self.case][0]

    @property
    def total_n(self) -> int:
        return self.n_k * self.num_batches

    @property
    def irls(self) -> IrlsConfig:
        return IrlsConfig(tol=self.irls_tol, max_iter=self.irls_max_iter)


def _rng(seed: int, rep: int, batch: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, rep, batch])))


def sample_errors(rng: np.random.Generator, dist: ErrorDist, n: int) -> NDArray[np.float64]:
    z = rng.standard_normal(n)
    if dist is ErrorDist.STD_NORMAL:
        return z
    # t(3) as a normal over sqrt(chi2_3 / 3)
    return z / np.sqrt(rng.chisquare(3, size=n) / 3.0)


def generate_batch(cfg: SimConfig, batch_index: int, rep_index: int) -> Batch:
    """Draw batch ``batch_index`` of replication ``rep_index``; deterministic."""
    rng = _rng(cfg.seed, rep_index, batch_index)
    n = cfg.n_k
    x = np.empty((n, 3))
    x[:, 0] = 1.0
    x[:, 1:] = rng.random((n, 2))
    eps = sample_errors(rng, cfg.dist, n)
    y = x @ np.asarray(cfg.beta_star) + (x @ np.asarray(cfg.gamma)) * eps
    return Batch(x, y)


def generate_stream(cfg: SimConfig, rep_index: int) -> List[Batch]:
    return [generate_batch(cfg, b, rep_index) for b in range(cfg.num_batches)]


# t(3): density 6 sqrt(3) / (pi (3 + x^2)^2)
_T3_NORM = 6.0 * math.sqrt(3.0) / math.pi


def _t3_pdf(x: float) -> float:
    return _T3_NORM / (3.0 + x * x) ** 2


def _t3_sf(x: float) -> float:
    s = x / math.sqrt(3.0)
    return 0.5 - (s / (1.0 + s * s) + math.atan(s)) / math.pi


def partial_moment(dist: ErrorDist, theta: float) -> float:
    """Upper partial moment ``E[(X - theta)^+]`` in closed form."""
    if dist is ErrorDist.STD_NORMAL:
        pdf = math.exp(-0.5 * theta * theta) / math.sqrt(2.0 * math.pi)
        return pdf - theta * float(ndtr(-theta))
    # int_theta^inf x f(x) dx = (3 + theta^2) / 2 * f(theta) for t(3)
    return 0.5 * (3.0 + theta * theta) * _t3_pdf(theta) - theta * _t3_sf(theta)


def _expectile_condition(dist: ErrorDist, theta: float, tau: float) -> float:
    upper = partial_moment(dist, theta)
    # both distributions have mean zero: E[(theta - X)^+] = upper + theta
    return tau * upper - (1.0 - tau) * (upper + theta)


def distribution_expectile(dist: ErrorDist, tau: float) -> float:
    """The ``tau``-expectile of a zero-mean error distribution.

    Root of ``tau E[(X-t)^+] = (1-tau) E[(t-X)^+]``, found by Brent's method
    to about 1e-13.
    """
    tau = check_tau(tau)
    dist = ErrorDist(dist)
    lo, hi = -1.0, 1.0
    while _expectile_condition(dist, lo, tau) < 0:
        lo *= 2.0
    while _expectile_condition(dist, hi, tau) > 0:
        hi *= 2.0
    return brentq(lambda t: _expectile_condition(dist, t, tau), lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps)


def true_coefficients(cfg: SimConfig) -> NDArray[np.float64]:
    """``beta_star + e_tau(eps) * gamma``."""
    e = distribution_expectile(cfg.dist, cfg.tau)
    return np.asarray(cfg.beta_star) + e * np.asarray(cfg.gamma)


def run_method(method: str, batches: Sequence[Batch], tau: float, cfg: Optional[IrlsConfig] = None,
               paer_weight: WeightMode = WeightMode.FINAL_FRACTION) -> NDArray[np.float64]:
    """Run one estimator over a whole stream and return its final coefficients."""
    if method == "oracle":
        return irls_fit(batches, tau, cfg).beta
    if method == "reer":
        state = init_state(batches[0], tau, cfg)
        for batch in batches[1:]:
            state = renew_update(state, batch)
        return state.beta
    if method == "paer":
        state = paer_init(batches[0].p, tau, paer_weight)
        for batch in batches:
            state = paer_update(state, batch, cfg)
        return paer_finalize(state).beta
    if method == "dcer":
        state = dcer_init(batches[0].p, tau)
        for batch in batches:
            state = dcer_update(state, batch, cfg)
        return dcer_finalize(state).beta
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


@dataclass
class MetricsTable:
    """BIAS / MSE per method and coefficient, plus mean wall-clock time.

    ``estimates[m]`` keeps the per-replication final estimates (reps x p)
    for methods ``m`` over the successful replications.
    """

    config: SimConfig
    methods: Tuple[str, ...]
    truth: NDArray[np.float64]
    bias: Dict[str, NDArray[np.float64]]
    mse: Dict[str, NDArray[np.float64]]
    mean_time: Dict[str, float]
    reps: int
    failures: List[Tuple[int, str, str]] = field(default_factory=list)
    estimates: Dict[str, NDArray[np.float64]] = field(default_factory=dict, repr=False)

    def rows(self):
        for m in self.methods:
            for j in range(self.truth.size):
                yield m, j, float(self.bias[m][j]), float(self.mse[m][j]), self.mean_time[m], self.reps

    def to_csv(self) -> str:
        """Render as CSV with the configuration echoed in ``#`` lines."""
        buf = io.StringIO()
        for key, value in asdict(self.config).items():
            if isinstance(value, enum.Enum):
                value = value.value
            buf.write(f"# {key}={value}\n")
        buf.write(f"# failures={len(self.failures)}\n")
        for rep, method, msg in self.failures:
            buf.write(f"# failed rep={rep} method={method}: {msg}\n")
        buf.write("method,coefficient_index,bias,mse,mean_time_seconds,reps\n")
        for m, j, b, s, t, r in self.rows():
            buf.write(f"{m},{j},{b:.17g},{s:.17g},{t:.17g},{r}\n")
        return buf.getvalue()


def _one_rep(args):
    cfg, methods, rep = args
    batches = generate_stream(cfg, rep)
    est, times = {}, {}
    for m in methods:
        t0 = time.perf_counter()
        try:
            est[m] = run_method(m, batches, cfg.tau, cfg.irls, cfg.paer_weight)
        except Exception as exc:  # noqa: BLE001 - any estimator failure drops the rep
            return rep, None, None, (m, f"{type(exc).__name__}: {exc}")
        times[m] = time.perf_counter() - t0
    return rep, est, times, None


def _workers() -> int:
    env = os.environ.get("REER_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_experiment(cfg: SimConfig, methods: Iterable[str] = METHODS, workers: Optional[int] = None) -> MetricsTable:
    """Monte-Carlo comparison of estimators over ``cfg.reps`` replications.

    A replication in which any method fails is dropped for every method and
    recorded in ``failures``. Time excludes data generation. Replications
    run in ``workers`` processes (default: ``REER_THREADS`` or the CPU
    count); results are reduced in replication order, so everything except
    timings is independent of the worker count.
    """
    methods = tuple(dict.fromkeys(m.lower() for m in methods))
    bad = [m for m in methods if m not in METHODS]
    if bad or not methods:
        raise ValueError(f"unknown methods {bad}; expected a subset of {METHODS}")
    workers = workers or _workers()
    jobs = [(cfg, methods, rep) for rep in range(cfg.reps)]
    if workers > 1 and cfg.reps > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_one_rep, jobs, chunksize=max(1, cfg.reps // (4 * workers))))
    else:
        results = [_one_rep(job) for job in jobs]

    truth = true_coefficients(cfg)
    failures = []
    est = {m: [] for m in methods}
    times = {m: [] for m in methods}
    for rep, e, t, err in sorted(results, key=lambda r: r[0]):
        if err is not None:
            failures.append((rep, err[0], err[1]))
            continue
        for m in methods:
            est[m].append(e[m])
            times[m].append(t[m])
    ok = cfg.reps - len(failures)
    bias, mse, mean_time, estimates = {}, {}, {}, {}
    for m in methods:
        if ok:
            arr = np.array(est[m])
            err = arr - truth
            bias[m], mse[m] = err.mean(axis=0), (err**2).mean(axis=0)
            mean_time[m] = float(np.mean(times[m]))
        else:
            arr = np.empty((0, truth.size))
            bias[m] = mse[m] = np.full(truth.size, np.nan)
            mean_time[m] = float("nan")
        estimates[m] = arr
    return MetricsTable(cfg, methods, truth, bias, mse, mean_time, ok, failures, estimates)
