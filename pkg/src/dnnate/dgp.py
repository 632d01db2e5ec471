"""Simulation data-generating process with oracle access to the truth.

Covariates are iid Uniform[0,1]^p, treatment is Bernoulli with a
propensity driven by the Beta(2,4) density of the third covariate, and
the outcome is a fixed additive treatment effect plus Gaussian noise:

    m0(x) = x1^2 + x2 + x3^2
    e(x)  = 0.25 * (1 + 20 * x3 * (1 - x3)^3)
    y     = m0(x) + tau * t + noise
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .estimators import Dataset
from .rng import make_generator


@dataclass(frozen=True)
class DgpConfig:
    n: int
    p: int = 50
    tau: float = 1.0
    noise_sd: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise InvalidInputError("n must be at least 1")
        if self.p < 3:
            raise InvalidInputError("the control surface uses x1..x3, so p >= 3")
        if self.noise_sd < 0:
            raise InvalidInputError("noise_sd must be nonnegative")


def m0(x):
    """Control-arm regression surface x1^2 + x2 + x3^2; rows or single vector."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.shape[-1] < 3:
        raise InvalidInputError("need at least three covariates")
    val = arr[..., 0] ** 2 + arr[..., 1] + arr[..., 2] ** 2
    return float(val) if arr.ndim == 1 else val


def beta24_pdf(u):
    """Beta(2,4) density 20 u (1-u)^3 on [0, 1]."""
    arr = np.asarray(u, dtype=np.float64)
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise InvalidInputError("beta density argument must lie in [0, 1]")
    val = 20.0 * arr * (1.0 - arr) ** 3
    return float(val) if arr.ndim == 0 else val


def true_propensity(x):
    """Treatment probability 0.25 * (1 + beta24_pdf(x3)); range [0.25, 0.77734375]."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.shape[-1] < 3:
        raise InvalidInputError("need at least three covariates")
    val = 0.25 * (1.0 + beta24_pdf(arr[..., 2]))
    return float(val) if arr.ndim == 1 else val


def true_m(x, t, tau: float = 1.0):
    """Noise-free outcome surface m0(x) + tau * t for t in {0, 1}."""
    tarr = np.asarray(t, dtype=np.float64)
    if not np.all((tarr == 0.0) | (tarr == 1.0)):
        raise InvalidInputError("treatment must be binary")
    val = m0(x) + tau * tarr
    return float(val) if np.ndim(val) == 0 else val


def true_ate(cfg: DgpConfig) -> float:
    """The estimand: the treatment effect is constant, so the ATE is tau."""
    return cfg.tau


def generate(cfg: DgpConfig) -> Dataset:
    """Draw a dataset; the (x, treatment-uniform, noise) draw order is fixed."""
    rng = make_generator(cfg.seed)
    x = rng.random((cfg.n, cfg.p))
    t = (rng.random(cfg.n) < true_propensity(x)).astype(np.float64)
    y = true_m(x, t, cfg.tau) + cfg.noise_sd * rng.standard_normal(cfg.n)
    return Dataset(x, t, y)


class OracleRegressor:
    """Drop-in for FittedRegressor backed by the true surface."""

    flags = ()

    def __init__(self, tau: float = 1.0):
        self.tau = tau

    def predict(self, x, t):
        arr = np.asarray(x, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[None, :]
        tcol = np.broadcast_to(np.asarray(t, dtype=np.float64), (arr.shape[0],))
        return true_m(arr, tcol, self.tau)


class OraclePropensity:
    """Drop-in for FittedPropensity backed by the true propensity."""

    def __init__(self):
        self.clip_lo = 0.25
        self.clip_hi = 0.77734375

    def predict(self, x):
        arr = np.asarray(x, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[None, :]
        return true_propensity(arr)
