"""Seeded replication experiments and their aggregate diagnostics.

Each replication derives its own seed from the master seed, draws a
fresh dataset of size (train_ratio + 1) * inference_n, splits it, and
computes the requested estimators.  Replications are independent, so
they may run across worker processes; aggregation is an ordered
reduction by replication index and the output is byte-identical for
any worker count.
"""
from __future__ import annotations

import hashlib
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from ._version import __version__
from .dgp import DgpConfig, OraclePropensity, OracleRegressor, generate
from .errors import InvalidInputError, ReplicationError
from .estimators import (AteResult, ClipSpec, SplitPlan, ate_doubly_robust,
                         ate_split_fitted, contrast_values, dr_values,
                         fit_outcome_regression, fit_propensity,
                         result_from_values)
from .net import DenseArch, TrainConfig
from .rng import RNG_IDENTITY, derive_seed, make_generator
from .stats import kolmogorov_sf, normal_cdf

ESTIMATOR_NAMES = ("split", "dr_split")


def default_outcome_arch(p: int, activation: str = "sigmoid") -> DenseArch:
    """Experiment outcome net: inputs (x, t), three hidden layers of width p+1."""
    return DenseArch(p + 1, (p + 1, p + 1, p + 1), activation)


def default_propensity_arch(p: int, activation: str = "sigmoid") -> DenseArch:
    """Propensity net over x alone, same hidden widths as the outcome net."""
    return DenseArch(p, (p + 1, p + 1, p + 1), activation)


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of one replication experiment.

    dgp.n and dgp.seed are placeholders: each replication generates
    (train_ratio + 1) * inference_n rows under a seed derived from
    master_seed and the replication index.
    """

    dgp: DgpConfig
    inference_n: int
    train_ratio: int
    estimators: tuple
    outcome_arch: object
    outcome_cfg: TrainConfig
    propensity_arch: object = None
    propensity_cfg: TrainConfig = TrainConfig(epochs=100)
    clip_spec: ClipSpec = ClipSpec()
    trunc_const: float = 2.0
    replications: int = 200
    master_seed: int = 0
    ci_level: float = 0.95

    def __post_init__(self):
        if self.inference_n < 2:
            raise InvalidInputError("inference_n must be at least 2")
        if self.train_ratio < 1:
            raise InvalidInputError("train_ratio must be a positive integer")
        if self.replications < 1:
            raise InvalidInputError("replications must be at least 1")
        if not self.estimators:
            raise InvalidInputError("estimator set is empty")
        for est in self.estimators:
            if est not in ESTIMATOR_NAMES:
                raise InvalidInputError(f"unknown estimator {est!r}")
        if "dr_split" in self.estimators and self.propensity_arch is None:
            raise InvalidInputError("dr_split needs a propensity architecture")
        if not 0.0 < self.ci_level < 1.0:
            raise InvalidInputError("ci_level must be in (0, 1)")


@dataclass
class ReplicationReport:
    config: ExperimentConfig
    results: dict  # estimator name -> list of AteResult, index = replication
    aggregates: dict  # estimator name -> {mean, median, sd, mse, coverage, ks_stat, ks_p}


def _run_replication(cfg: ExperimentConfig, r: int) -> dict:
    seed_r = derive_seed(cfg.master_seed, "replication", r)
    n_inf = cfg.inference_n
    n_total = (cfg.train_ratio + 1) * n_inf
    data = generate(replace(cfg.dgp, n=n_total, seed=derive_seed(seed_r, "data")))
    perm = make_generator(derive_seed(seed_r, "split")).permutation(n_total)
    plan = SplitPlan(perm[:-n_inf], perm[-n_inf:])
    d1 = data.subset(plan.train_indices)
    d2 = data.subset(plan.inference_indices)

    out = {}
    m_hat = fit_outcome_regression(
        d1, cfg.outcome_arch,
        replace(cfg.outcome_cfg, seed=derive_seed(seed_r, "outcome")),
        cfg.trunc_const)
    if "split" in cfg.estimators:
        out["split"] = ate_split_fitted(d2, m_hat, cfg.ci_level)
    if "dr_split" in cfg.estimators:
        e_hat = fit_propensity(
            d1, cfg.propensity_arch,
            replace(cfg.propensity_cfg, seed=derive_seed(seed_r, "propensity")),
            cfg.clip_spec)
        out["dr_split"] = ate_doubly_robust(d2, e_hat, m_hat, cfg.ci_level,
                                            method="dr_split")
    return out


def _replication_worker(payload):
    cfg, r = payload
    try:
        return _run_replication(cfg, r)
    except Exception as exc:  # attach the replication index
        raise ReplicationError(r, f"replication {r} failed: {exc}") from exc


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> ReplicationReport:
    """Run all replications and aggregate; independent of worker count."""
    payloads = [(cfg, r) for r in range(cfg.replications)]
    if workers <= 1:
        per_rep = [_replication_worker(p) for p in payloads]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_rep = list(pool.map(_replication_worker, payloads))

    results = {est: [rep[est] for rep in per_rep] for est in cfg.estimators}
    tau = cfg.dgp.tau
    aggregates = {}
    for est in cfg.estimators:
        res = results[est]
        estimates = [r.estimate for r in res]
        agg = aggregate(estimates, tau)
        agg["coverage"] = coverage(res, tau)
        if len(estimates) >= 20 and agg["sd"] > 0:
            ks = ks_normality(estimates, center=agg["mean"], scale=agg["sd"])
            agg["ks_stat"] = ks["statistic"]
            agg["ks_p"] = ks["p_value"]
        else:
            agg["ks_stat"] = None
            agg["ks_p"] = None
        aggregates[est] = agg
    return ReplicationReport(cfg, results, aggregates)


def run_oracle_replications(n: int, replications: int, master_seed: int,
                            estimator: str = "dr", p: int = 50, tau: float = 1.0,
                            noise_sd: float = 1.0, ci_level: float = 0.95) -> list:
    """Replications with the true nuisances injected instead of fitted nets.

    Removes nuisance-estimation error entirely, leaving only the
    averaging step; used to check the normal shape, coverage, and
    asymptotic-variance formulas of the estimators.
    """
    if estimator not in ("split", "dr"):
        raise InvalidInputError(f"unknown oracle estimator {estimator!r}")
    m_oracle = OracleRegressor(tau)
    e_oracle = OraclePropensity()
    out = []
    for r in range(replications):
        seed_r = derive_seed(master_seed, "oracle", r)
        data = generate(DgpConfig(n=n, p=p, tau=tau, noise_sd=noise_sd,
                                  seed=derive_seed(seed_r, "data")))
        if estimator == "split":
            values = contrast_values(data, m_oracle)
        else:
            values = dr_values(data, e_oracle, m_oracle)
        out.append(result_from_values(values, estimator if estimator == "split" else "dr",
                                      ci_level))
    return out


# ---- aggregate statistics ---------------------------------------------------


def aggregate(estimates, tau_true: float) -> dict:
    """Mean, median, SD (n-1 denominator), and MSE against the true value."""
    v = np.asarray(estimates, dtype=np.float64).ravel()
    if v.size == 0:
        raise InvalidInputError("no estimates to aggregate")
    sd = float(np.std(v, ddof=1)) if v.size > 1 else 0.0
    return {
        "mean": float(v.mean()),
        "median": float(np.median(v)),
        "sd": sd,
        "mse": float(np.mean((v - tau_true) ** 2)),
    }


def coverage(results, tau_true: float) -> float:
    """Fraction of confidence intervals containing the true value."""
    if not results:
        raise InvalidInputError("no results")
    hits = sum(1 for r in results if r.ci_lo <= tau_true <= r.ci_hi)
    return hits / len(results)


def ks_normality(estimates, center: float, scale: float) -> dict:
    """One-sample KS statistic of (est - center)/scale against N(0, 1)."""
    v = np.asarray(estimates, dtype=np.float64).ravel()
    if v.size < 20:
        raise InvalidInputError("KS diagnostic needs at least 20 estimates")
    if not scale > 0:
        raise InvalidInputError("scale must be positive")
    z = np.sort((v - center) / scale)
    cdf = np.asarray(normal_cdf(z))
    n = z.size
    upper = np.arange(1, n + 1) / n - cdf
    lower = cdf - np.arange(0, n) / n
    stat = float(max(upper.max(), lower.max()))
    return {"statistic": stat, "p_value": kolmogorov_sf(math.sqrt(n) * stat)}


def kde(estimates, grid_points: int = 256) -> np.ndarray:
    """Gaussian kernel density on an even grid; returns (grid_points, 2).

    Bandwidth is Silverman's 1.06 * sd * n^(-1/5); the grid spans
    [min - 3h, max + 3h] so the density mass integrates to ~1.
    """
    v = np.asarray(estimates, dtype=np.float64).ravel()
    if v.size < 2:
        raise InvalidInputError("KDE needs at least two estimates")
    if grid_points < 2:
        raise InvalidInputError("grid needs at least two points")
    sd = float(np.std(v, ddof=1))
    if not sd > 0:
        raise InvalidInputError("KDE is undefined for a zero-spread sample")
    h = 1.06 * sd * v.size ** (-0.2)
    grid = np.linspace(v.min() - 3 * h, v.max() + 3 * h, grid_points)
    z = (grid[:, None] - v[None, :]) / h
    dens = np.exp(-0.5 * z * z).sum(axis=1) / (v.size * h * math.sqrt(2.0 * math.pi))
    return np.column_stack([grid, dens])


# ---- file exports -----------------------------------------------------------


def _fmt(x) -> str:
    if x is None:
        return ""
    return f"{x:.17g}"


def make_provenance(master_seed: int, config_hash: str) -> str:
    return (f"tool=dnnate/{__version__} rng={RNG_IDENTITY} "
            f"master_seed={master_seed} config_sha256={config_hash}")


def _default_provenance(cfg: ExperimentConfig) -> str:
    digest = hashlib.sha256(repr(cfg).encode("utf-8")).hexdigest()
    return make_provenance(cfg.master_seed, digest)


def write_aggregate_csv(report: ReplicationReport, path, provenance: str = None) -> None:
    """One row per estimator with the table-style aggregate columns."""
    cfg = report.config
    activation = getattr(cfg.outcome_arch, "activation", "sigmoid")
    n1 = cfg.train_ratio * cfg.inference_n
    lines = [f"# {provenance or _default_provenance(cfg)}",
             "n1,estimator,activation,mean,median,sd,mse,coverage,ks_p"]
    for est in cfg.estimators:
        agg = report.aggregates[est]
        lines.append(",".join([
            str(n1), est, activation,
            _fmt(agg["mean"]), _fmt(agg["median"]), _fmt(agg["sd"]),
            _fmt(agg["mse"]), _fmt(agg["coverage"]), _fmt(agg["ks_p"]),
        ]))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_replications_jsonl(report: ReplicationReport, path,
                             provenance: str = None) -> None:
    """One JSON record per (replication, estimator), preceded by provenance."""
    import json

    cfg = report.config
    lines = [json.dumps({"provenance": provenance or _default_provenance(cfg)})]
    for r in range(cfg.replications):
        for est in cfg.estimators:
            record = {"replication": r, "estimator": est}
            record.update(report.results[est][r].to_dict())
            lines.append(json.dumps(record))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_kde_csv(report: ReplicationReport, estimator: str, path,
                  grid_points: int = 256, provenance: str = None) -> None:
    """Two-column x,density grid for external plotting."""
    estimates = [r.estimate for r in report.results[estimator]]
    grid = kde(estimates, grid_points)
    lines = [f"# {provenance or _default_provenance(report.config)}", "x,density"]
    lines.extend(f"{_fmt(x)},{_fmt(d)}" for x, d in grid)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
