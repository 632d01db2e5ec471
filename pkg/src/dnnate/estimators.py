"""ATE estimators: plug-in, sample-split, doubly robust, and cross-fitted DR.

All four share one inference recipe: reduce the sample to per-row values
(regression contrasts or augmented inverse-propensity terms), average
them, and attach the n/(n-1) * (mean of squares - squared mean) variance
with a normal-quantile confidence interval.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError
from .net import TrainConfig, train_mse, trunc
from .rng import derive_seed
from .stats import normal_quantile

METHODS = ("plugin", "split", "dr", "dr_split")

FLAG_NO_ASYMPTOTICS = "no_asymptotic_normality"
FLAG_EMPTY_TREATED = "empty_treated_arm"
FLAG_EMPTY_CONTROL = "empty_control_arm"
FLAG_DEGENERATE_VARIANCE = "degenerate_variance"


@dataclass
class Dataset:
    """Observational sample: covariates x (n, p), binary t, outcome y."""

    x: np.ndarray
    t: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        self.t = np.asarray(self.t, dtype=np.float64).ravel()
        self.y = np.asarray(self.y, dtype=np.float64).ravel()
        if self.x.ndim != 2:
            raise InvalidInputError("covariates must form a 2-D matrix")
        n = self.x.shape[0]
        if n < 1:
            raise InvalidInputError("dataset is empty")
        if self.t.size != n or self.y.size != n:
            raise InvalidInputError("x, t, y disagree on sample count")
        if not np.all(np.isfinite(self.x)) or not np.all(np.isfinite(self.y)):
            raise InvalidInputError("dataset contains non-finite values")
        if not np.all((self.t == 0.0) | (self.t == 1.0)):
            raise InvalidInputError("treatment indicator must be strictly binary")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.x[idx], self.t[idx], self.y[idx])


@dataclass
class SplitPlan:
    """Index lists selecting the learning set D1 and the inference set D2.

    Production constructors always emit disjoint plans; overlap is
    tolerated here so the plug-in estimator can be phrased as a split
    with D1 = D2, but estimators whose validity rests on independence
    across folds reject overlapping plans.
    """

    train_indices: np.ndarray
    inference_indices: np.ndarray

    def __post_init__(self):
        self.train_indices = np.asarray(self.train_indices, dtype=np.int64).ravel()
        self.inference_indices = np.asarray(self.inference_indices, dtype=np.int64).ravel()
        for name, idx in (("train", self.train_indices), ("inference", self.inference_indices)):
            if idx.size == 0:
                raise InvalidInputError(f"{name} indices are empty")
            if idx.min() < 0:
                raise InvalidInputError(f"{name} indices must be nonnegative")
            if np.unique(idx).size != idx.size:
                raise InvalidInputError(f"{name} indices contain duplicates")

    @property
    def ratio(self) -> float:
        return self.train_indices.size / self.inference_indices.size

    @property
    def is_disjoint(self) -> bool:
        return not np.intersect1d(self.train_indices, self.inference_indices).size

    def validate_for(self, n: int) -> None:
        hi = max(self.train_indices.max(), self.inference_indices.max())
        if hi >= n:
            raise InvalidInputError(f"plan index {hi} out of range for n={n}")


@dataclass(frozen=True)
class ClipSpec:
    """Propensity clipping band [l, 1-l].

    fixed mode uses `lo` directly; log mode uses l = 1/(c2 * ln n),
    tightening with the learning-set size.
    """

    mode: str = "fixed"
    lo: float = 0.01
    c2: float = 10.0

    def __post_init__(self):
        if self.mode not in ("fixed", "log"):
            raise InvalidInputError(f"unknown clip mode {self.mode!r}")
        if not 0 < self.lo < 0.5:
            raise InvalidInputError("clip lo must lie in (0, 0.5)")
        if not self.c2 > 0:
            raise InvalidInputError("c2 must be positive")

    def level(self, n_train: int) -> float:
        if self.mode == "fixed":
            return self.lo
        level = 1.0 / (self.c2 * math.log(n_train))
        if not 0 < level < 0.5:
            raise InvalidInputError(
                f"log-mode clip level {level:.4f} outside (0, 0.5); increase c2 or n")
        return level


@dataclass
class FittedRegressor:
    """Trained outcome network with its output truncation bound."""

    net: object
    trunc_bound: float
    n_train: int
    flags: tuple = ()

    def predict(self, x, t) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        tcol = np.broadcast_to(np.asarray(t, dtype=np.float64), (x.shape[0],))
        inputs = np.column_stack([x, tcol])
        return trunc(self.net.forward_batch(inputs), self.trunc_bound)


@dataclass
class FittedPropensity:
    """Trained propensity network; outputs recentred-truncated to [lo, hi]."""

    net: object
    clip_lo: float
    clip_hi: float

    def predict(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        raw = self.net.forward_batch(x)
        return 0.5 + trunc(raw - 0.5, 0.5 - self.clip_lo)


@dataclass
class AteResult:
    estimate: float
    variance: float
    n_inference: int
    method: str
    ci_level: float
    ci_lo: float
    ci_hi: float
    flags: tuple = ()

    def __post_init__(self):
        if self.method not in METHODS:
            raise InvalidInputError(f"unknown method {self.method!r}")
        if self.variance < 0:
            raise InvalidInputError("variance must be nonnegative")

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "estimate": self.estimate,
            "variance": self.variance,
            "n_inference": self.n_inference,
            "ci_level": self.ci_level,
            "ci_lo": self.ci_lo,
            "ci_hi": self.ci_hi,
            "flags": list(self.flags),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def sample_variance(values) -> float:
    """(n/(n-1)) * (mean of squares - squared mean); needs n >= 2."""
    v = np.asarray(values, dtype=np.float64).ravel()
    n = v.size
    if n < 2:
        raise InvalidInputError("variance needs at least two values")
    mean_sq = float(v @ v) / n
    mean = float(v.mean())
    return max(0.0, n / (n - 1.0) * (mean_sq - mean * mean))


def confidence_interval(estimate, variance, n, level):
    """Normal interval: estimate +- z_{alpha/2} * sqrt(variance / n)."""
    if variance < 0:
        raise InvalidInputError("variance must be nonnegative")
    if n < 1:
        raise InvalidInputError("n must be at least 1")
    if not 0.0 < level < 1.0:
        raise InvalidInputError(f"confidence level must be in (0, 1), got {level}")
    z = normal_quantile(1.0 - (1.0 - level) / 2.0)
    half = z * math.sqrt(variance / n)
    return estimate - half, estimate + half


def result_from_values(values, method, ci_level, flags=()) -> AteResult:
    """Average per-row values into an AteResult with variance and CI."""
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size < 1:
        raise InvalidInputError("no values to average")
    estimate = float(v.mean())
    flags = tuple(flags)
    if v.size >= 2:
        variance = sample_variance(v)
    else:
        variance = 0.0
        flags = flags + (FLAG_DEGENERATE_VARIANCE,)
    lo, hi = confidence_interval(estimate, variance, v.size, ci_level)
    return AteResult(estimate, variance, v.size, method, ci_level, lo, hi, flags)


# ---- nuisance fitters ------------------------------------------------------


def fit_outcome_regression(d: Dataset, arch, cfg: TrainConfig,
                           trunc_const: float = 2.0) -> FittedRegressor:
    """Regress y on (x, t); predictions are clamped to trunc_const * ln(n)."""
    if not trunc_const > 0:
        raise InvalidInputError("trunc_const must be positive")
    flags = []
    if not np.any(d.t == 1.0):
        flags.append(FLAG_EMPTY_TREATED)
    if not np.any(d.t == 0.0):
        flags.append(FLAG_EMPTY_CONTROL)
    inputs = np.column_stack([d.x, d.t])
    net = arch.build(derive_seed(cfg.seed, "net-init"))
    if net.input_dim != d.p + 1:
        raise InvalidInputError(
            f"outcome architecture expects {net.input_dim} inputs, data provides {d.p + 1}")
    train_mse(net, inputs, d.y, cfg)
    bound = trunc_const * math.log(d.n)
    return FittedRegressor(net, bound, d.n, tuple(flags))


def fit_propensity(d1: Dataset, arch, cfg: TrainConfig,
                   clip_spec: ClipSpec = ClipSpec()) -> FittedPropensity:
    """Least-squares fit of t on x, recentred-truncated into [l, 1-l]."""
    if not (np.any(d1.t == 1.0) and np.any(d1.t == 0.0)):
        raise InvalidInputError("propensity fit needs both treatment arms")
    net = arch.build(derive_seed(cfg.seed, "net-init"))
    if net.input_dim != d1.p:
        raise InvalidInputError(
            f"propensity architecture expects {net.input_dim} inputs, data provides {d1.p}")
    train_mse(net, d1.x, d1.t, cfg)
    lo = clip_spec.level(d1.n)
    return FittedPropensity(net, lo, 1.0 - lo)


# ---- estimators ------------------------------------------------------------


def phi(y, t, e, m1):
    """Augmented IPW term for the treated arm: (t/e)(y - m1) + m1."""
    return t / e * (np.asarray(y, dtype=np.float64) - m1) + m1


def psi(y, t, e, m0):
    """Augmented IPW term for the control arm: ((1-t)/(1-e))(y - m0) + m0."""
    return (1.0 - t) / (1.0 - e) * (np.asarray(y, dtype=np.float64) - m0) + m0


def contrast_values(d: Dataset, m) -> np.ndarray:
    """Per-row regression contrasts m(x, 1) - m(x, 0)."""
    net = getattr(m, "net", None)
    if net is not None and net.input_dim != d.p + 1:
        raise InvalidInputError("regressor and dataset disagree on covariate dimension")
    return m.predict(d.x, 1.0) - m.predict(d.x, 0.0)


def dr_values(d: Dataset, e_hat, m_hat) -> np.ndarray:
    """Per-row phi - psi values from fitted (or oracle) nuisances."""
    e = np.asarray(e_hat.predict(d.x), dtype=np.float64)
    if np.any(e <= 0.0) or np.any(e >= 1.0):
        raise InvalidInputError("propensity predictions must lie strictly in (0, 1)")
    m1 = np.asarray(m_hat.predict(d.x, 1.0), dtype=np.float64)
    m0 = np.asarray(m_hat.predict(d.x, 0.0), dtype=np.float64)
    return phi(d.y, d.t, e, m1) - psi(d.y, d.t, e, m0)


def ate_plugin(d: Dataset, m: FittedRegressor, ci_level: float = 0.95) -> AteResult:
    """Average contrast over the same data the regression was fitted on.

    Biased for inference: the result carries a no-asymptotic-normality
    flag and its interval should not be read as a calibrated CI.
    """
    flags = tuple(m.flags) + (FLAG_NO_ASYMPTOTICS,)
    return result_from_values(contrast_values(d, m), "plugin", ci_level, flags)


def ate_split_fitted(d_inference: Dataset, m: FittedRegressor,
                     ci_level: float = 0.95) -> AteResult:
    """Split estimator given an already-fitted regressor."""
    if d_inference.n < 2:
        raise InvalidInputError("inference set needs at least two rows")
    return result_from_values(contrast_values(d_inference, m), "split",
                              ci_level, tuple(m.flags))


def ate_split(d: Dataset, plan: SplitPlan, arch, cfg: TrainConfig,
              trunc_const: float = 2.0, ci_level: float = 0.95) -> AteResult:
    """Fit the outcome regression on D1, average contrasts over D2."""
    plan.validate_for(d.n)
    if plan.inference_indices.size < 2:
        raise InvalidInputError("inference set needs at least two rows")
    m = fit_outcome_regression(d.subset(plan.train_indices), arch, cfg, trunc_const)
    return ate_split_fitted(d.subset(plan.inference_indices), m, ci_level)


def ate_doubly_robust(d: Dataset, e_hat, m_hat, ci_level: float = 0.95,
                      method: str = "dr") -> AteResult:
    """Doubly robust average of phi - psi over all rows of d."""
    flags = tuple(getattr(m_hat, "flags", ()))
    return result_from_values(dr_values(d, e_hat, m_hat), method, ci_level, flags)


def ate_dr_split(d: Dataset, plan: SplitPlan, arch_m, arch_e,
                 cfg_m: TrainConfig, cfg_e: TrainConfig,
                 clip_spec: ClipSpec = ClipSpec(), trunc_const: float = 2.0,
                 ci_level: float = 0.95) -> AteResult:
    """Cross-fitted doubly robust estimator: nuisances on D1, average on D2."""
    plan.validate_for(d.n)
    if not plan.is_disjoint:
        raise InvalidInputError("doubly robust split requires disjoint folds")
    if plan.inference_indices.size < 2:
        raise InvalidInputError("inference set needs at least two rows")
    d1 = d.subset(plan.train_indices)
    m_hat = fit_outcome_regression(d1, arch_m, cfg_m, trunc_const)
    e_hat = fit_propensity(d1, arch_e, cfg_e, clip_spec)
    return ate_doubly_robust(d.subset(plan.inference_indices), e_hat, m_hat,
                             ci_level, method="dr_split")
