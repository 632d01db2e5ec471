"""DNN-based average treatment effect estimation and inference.

Library surface: from-scratch feedforward networks (dense and sparse
hierarchical), four ATE estimators with variance and confidence
intervals, a simulation DGP with oracle truth, a seeded replication
harness, CSV ingestion, and a CLI (`dnnate simulate|estimate|check`).
"""
from ._version import __version__
from .dgp import (DgpConfig, OraclePropensity, OracleRegressor, beta24_pdf,
                  generate, m0, true_ate, true_m, true_propensity)
from .errors import (DataValidationError, DnnateError, InvalidInputError,
                     ReplicationError, SchemaError, TrainingDivergedError)
from .estimators import (AteResult, ClipSpec, Dataset, FittedPropensity,
                         FittedRegressor, SplitPlan, ate_doubly_robust,
                         ate_dr_split, ate_plugin, ate_split, ate_split_fitted,
                         confidence_interval, contrast_values, dr_values,
                         fit_outcome_regression, fit_propensity, phi, psi,
                         result_from_values, sample_variance)
from .harness import (ExperimentConfig, ReplicationReport, aggregate, coverage,
                      default_outcome_arch, default_propensity_arch, kde,
                      ks_normality, make_provenance, run_experiment,
                      run_oracle_replications, write_aggregate_csv,
                      write_kde_csv, write_replications_jsonl)
from .ingest import (CsvSchema, load_csv, median, proportion_split, robust_sd,
                     write_csv)
from .net import (NET_FORMAT, DenseArch, HierarchicalSpec, Layer, NeuralNet,
                  TrainConfig, adam_step, build_dense, build_hierarchical,
                  gradient, train_mse, trunc)
from .rng import RNG_IDENTITY, derive_seed, make_generator
from .stats import kolmogorov_sf, normal_cdf, normal_quantile

__all__ = [name for name in dir() if not name.startswith("_")]
