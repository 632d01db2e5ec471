"""Executable property suites behind the `check` command.

Each suite returns a CheckResult; the acceptance tests reuse the same
functions so the CLI and the test suite agree on what was verified.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .dgp import beta24_pdf, true_propensity
from .errors import InvalidInputError
from .harness import coverage, ks_normality, run_oracle_replications
from .net import (DenseArch, HierarchicalSpec, TrainConfig, adam_step,
                  build_dense, build_hierarchical, gradient)
from .rng import derive_seed, make_generator

# pass if |backprop - finite difference| <= max(REL_TOL * |grad|, ABS_FLOOR)
GRAD_REL_TOL = 1e-5
GRAD_ABS_FLOOR = 1e-8


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def finite_difference_gradient(net, x, target, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of the single-example squared loss."""
    theta = net.get_coefficients()
    out = np.empty_like(theta)
    for i in range(theta.size):
        bumped = theta.copy()
        bumped[i] = theta[i] + h
        net.set_coefficients(bumped)
        up = (net.forward(x) - target) ** 2
        bumped[i] = theta[i] - h
        net.set_coefficients(bumped)
        down = (net.forward(x) - target) ** 2
        out[i] = (up - down) / (2.0 * h)
    net.set_coefficients(theta)
    return out


def _relu_margin(net, x) -> float:
    """Smallest |pre-activation| across relu units for one input."""
    a = np.asarray(x, dtype=np.float64)[None, :]
    margin = math.inf
    for layer in net.layers:
        z = a @ layer.weights + layer.biases
        if layer.activation == "relu":
            margin = min(margin, float(np.min(np.abs(z))))
            a = np.maximum(z, 0.0)
        elif layer.activation == "sigmoid":
            a = 1.0 / (1.0 + np.exp(-z))
        else:
            a = z
    return margin


def _random_probe(kind: str, seed: int):
    """One random (net, input, target) triple for gradient checking."""
    rng = make_generator(seed)
    if kind == "hierarchical":
        spec = HierarchicalSpec(level=int(rng.integers(0, 2)), num_blocks=int(rng.integers(1, 3)),
                                order=int(rng.integers(1, 3)), block_width=int(rng.integers(1, 3)),
                                input_dim=int(rng.integers(2, 5)), coef_bound=10.0)
        net = build_hierarchical(spec, derive_seed(seed, "net"))
    else:
        depth = int(rng.integers(1, 4))
        widths = [int(rng.integers(2, 6))] + [int(rng.integers(2, 7)) for _ in range(depth)] + [1]
        net = build_dense(widths, kind, derive_seed(seed, "net"))
    x = rng.uniform(-1.0, 1.0, net.input_dim)
    target = float(rng.uniform(-2.0, 2.0))
    return net, x, target


def check_gradients(num_nets: int = 50, seed: int = 1234) -> CheckResult:
    """Backprop vs central finite differences over random nets of both activations."""
    kinds = ["sigmoid", "relu", "hierarchical"]
    worst = 0.0
    start = time.perf_counter()
    for i in range(num_nets):
        kind = kinds[i % len(kinds)]
        attempt = 0
        while True:
            net, x, target = _random_probe(kind, derive_seed(seed, kind, i, attempt))
            if kind != "relu" or _relu_margin(net, x) > 1e-3:
                break
            attempt += 1  # resample away from relu kinks, where FD is undefined
        analytic = gradient(net, x, target)
        fd = finite_difference_gradient(net, x, target)
        scale = np.maximum(np.maximum(np.abs(analytic), np.abs(fd)),
                           GRAD_ABS_FLOOR / GRAD_REL_TOL)
        worst = max(worst, float(np.max(np.abs(analytic - fd) / scale)))
    elapsed = time.perf_counter() - start
    return CheckResult(
        "gradient", worst < GRAD_REL_TOL,
        f"max relative error {worst:.3g} over {num_nets} nets "
        f"(tolerance {GRAD_REL_TOL:g}, {elapsed:.1f}s)")


def check_adam_golden() -> CheckResult:
    """One hand-derived Adam step: g=1, t=1 moves the parameter by lr/(1+eps)."""
    cfg = TrainConfig()
    new_param, _, _ = adam_step(0.0, 1.0, 0.0, 0.0, 1, cfg)
    expected = -cfg.learning_rate / (1.0 + cfg.adam_epsilon)
    ok = abs(new_param - expected) < 1e-15 and abs(new_param + 0.001) < 1e-8
    return CheckResult("adam-golden", ok,
                       f"step {new_param:.12g}, expected {expected:.12g}")


def check_oracle_normality(n: int = 2000, replications: int = 500,
                           seed: int = 777) -> CheckResult:
    """Oracle-nuisance doubly robust estimates look normal and cover the truth."""
    results = run_oracle_replications(n, replications, seed, estimator="dr")
    estimates = [r.estimate for r in results]
    mean = float(np.mean(estimates))
    sd = float(np.std(estimates, ddof=1))
    ks = ks_normality(estimates, mean, sd)
    cov = coverage(results, 1.0)
    ok = ks["p_value"] > 0.01 and 0.92 <= cov <= 0.98
    return CheckResult("oracle-normality", ok,
                       f"KS p={ks['p_value']:.3f} (need >0.01), "
                       f"coverage={cov:.3f} (need [0.92, 0.98]), R={replications}, n={n}")


def asymptotic_variance_mc(draws: int = 1_000_000, seed: int = 2024,
                           noise_sd: float = 1.0) -> dict:
    """Monte Carlo values of the two limiting variances under the simulation DGP.

    split: Var(m(X,1) - m(X,0)) -- zero here because the effect is constant.
    dr:    Var(m1 - m0) + Var(eps) * E[1 / (e(X)(1 - e(X)))].
    """
    rng = make_generator(seed)
    x3 = rng.random(draws)
    e = 0.25 * (1.0 + beta24_pdf(x3))
    contrast_var = 0.0  # m(x,1) - m(x,0) is constant in x
    weight = float(np.mean(1.0 / (e * (1.0 - e))))
    return {"split": contrast_var, "dr": contrast_var + noise_sd ** 2 * weight}


def check_variance_ordering(seed: int = 555) -> CheckResult:
    """The DR limit variance strictly dominates the split one, and the
    empirical SDs of the two oracle estimators preserve that ordering."""
    formulas = asymptotic_variance_mc(200_000, derive_seed(seed, "mc"))
    reps = 2000
    n = 500
    split_sd = float(np.std([r.estimate for r in run_oracle_replications(
        n, reps, derive_seed(seed, "split"), estimator="split", p=5)], ddof=1))
    dr_sd = float(np.std([r.estimate for r in run_oracle_replications(
        n, reps, derive_seed(seed, "dr"), estimator="dr", p=5)], ddof=1))
    ok = formulas["dr"] > formulas["split"] and dr_sd > split_sd
    return CheckResult(
        "variance-ordering", ok,
        f"formula dr={formulas['dr']:.3f} > split={formulas['split']:.3f}; "
        f"empirical sd dr={dr_sd:.4f} > split={split_sd:.4f} over {reps} oracle reps")


ALL_CHECKS = {
    "gradient": check_gradients,
    "adam-golden": check_adam_golden,
    "oracle-normality": check_oracle_normality,
    "variance-ordering": check_variance_ordering,
}


def run_checks(only: str = None) -> list:
    if only is not None:
        if only not in ALL_CHECKS:
            raise InvalidInputError(
                f"unknown check {only!r}; choose from {', '.join(ALL_CHECKS)}")
        return [ALL_CHECKS[only]()]
    return [fn() for fn in ALL_CHECKS.values()]
