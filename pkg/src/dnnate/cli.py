"""Command-line interface: simulate, estimate, check."""
from __future__ import annotations

import argparse
import json
import os
import sys

from .config import RunConfig, describe_keys
from .errors import DnnateError, InvalidInputError
from .estimators import ate_dr_split, ate_split
from .harness import (make_provenance, run_experiment, write_aggregate_csv,
                      write_kde_csv, write_replications_jsonl)
from .ingest import CsvSchema, load_csv, median, proportion_split, robust_sd
from .rng import derive_seed

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_INVALID = 2


def _build_parser() -> argparse.ArgumentParser:
    epilog = describe_keys()
    parser = argparse.ArgumentParser(
        prog="dnnate",
        description="Neural-network ATE estimation: simulations, CSV estimation, "
                    "and property checks.",
        epilog=epilog, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="config file of key = value lines")
    common.add_argument("--seed", type=int, metavar="U64",
                        help="override experiment.master_seed")
    common.add_argument("--threads", type=int, default=1, metavar="N",
                        help="worker processes for replications (outputs do not depend on N)")
    common.add_argument("--out", metavar="DIR", help="override output.dir")
    common.add_argument("--ci-level", type=float, metavar="F",
                        help="override experiment.ci_level")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any config key (repeatable)")

    kwargs = {"parents": [common], "epilog": epilog,
              "formatter_class": argparse.RawDescriptionHelpFormatter}
    sub.add_parser("simulate", help="run a seeded replication experiment", **kwargs)

    est = sub.add_parser("estimate", help="estimate the ATE from a CSV file", **kwargs)
    est.add_argument("--data", metavar="PATH", help="override estimate.data")
    est.add_argument("--fraction", type=float, metavar="F",
                     help="override estimate.fraction")
    est.add_argument("--repeats", type=int, metavar="N", help="override estimate.repeats")

    chk = sub.add_parser("check", help="run the property suites", **kwargs)
    chk.add_argument("--only", metavar="NAME", help="run a single named check")
    return parser


def _load_run_config(args) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        cfg.load_file(args.config)
    for pair in args.set:
        if "=" not in pair:
            raise InvalidInputError(f"--set expects KEY=VALUE, got {pair!r}")
        key, raw = pair.split("=", 1)
        cfg.set(key.strip(), raw)
    if args.seed is not None:
        cfg.set("experiment.master_seed", str(args.seed))
    if args.out is not None:
        cfg.set("output.dir", args.out)
    if args.ci_level is not None:
        cfg.set("experiment.ci_level", repr(args.ci_level))
    if getattr(args, "data", None) is not None:
        cfg.set("estimate.data", args.data)
    if getattr(args, "fraction", None) is not None:
        cfg.set("estimate.fraction", repr(args.fraction))
    if getattr(args, "repeats", None) is not None:
        cfg.set("estimate.repeats", str(args.repeats))
    return cfg


def cmd_simulate(cfg: RunConfig, threads: int) -> int:
    exp = cfg.to_experiment_config()
    report = run_experiment(exp, workers=threads)
    outdir = str(cfg.get("output.dir"))
    os.makedirs(outdir, exist_ok=True)
    prov = make_provenance(exp.master_seed, cfg.config_hash())
    write_aggregate_csv(report, os.path.join(outdir, "aggregate.csv"), prov)
    write_replications_jsonl(report, os.path.join(outdir, "replications.jsonl"), prov)
    for est in exp.estimators:
        agg = report.aggregates[est]
        if exp.replications >= 2 and agg["sd"] > 0:
            write_kde_csv(report, est, os.path.join(outdir, f"kde_{est}.csv"),
                          provenance=prov)
        print(f"{est}: mean={agg['mean']:.5f} median={agg['median']:.5f} "
              f"sd={agg['sd']:.5f} mse={agg['mse']:.5f} coverage={agg['coverage']:.3f}")
    print(f"wrote {outdir}/aggregate.csv")
    return EXIT_OK


def _estimate_schema(cfg: RunConfig, path: str) -> CsvSchema:
    covs = [c.strip() for c in str(cfg.get("estimate.covariate_columns")).split(",")
            if c.strip()]
    outcome = str(cfg.get("estimate.outcome_column"))
    treatment = str(cfg.get("estimate.treatment_column"))
    if not covs:
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().strip().split(",")
        covs = [name for name in header if name not in (outcome, treatment)]
    return CsvSchema(outcome, treatment, tuple(covs),
                     str(cfg.get("estimate.standardize")))


def cmd_estimate(cfg: RunConfig, threads: int) -> int:
    path = str(cfg.get("estimate.data"))
    if not path:
        raise InvalidInputError("estimate needs a CSV path (estimate.data or --data)")
    if not os.path.exists(path):
        raise InvalidInputError(f"no such file: {path}")
    schema = _estimate_schema(cfg, path)
    data = load_csv(path, schema)
    estimator = str(cfg.get("estimate.estimator"))
    if estimator not in ("split", "dr_split"):
        raise InvalidInputError(f"estimate.estimator must be split or dr_split, "
                                f"got {estimator!r}")
    fraction = float(cfg.get("estimate.fraction"))
    repeats = int(cfg.get("estimate.repeats"))
    if repeats < 1:
        raise InvalidInputError("estimate.repeats must be at least 1")
    master = int(cfg.get("experiment.master_seed"))
    ci_level = float(cfg.get("experiment.ci_level"))
    trunc_const = float(cfg.get("outcome.trunc_const"))
    arch_m = cfg.outcome_arch(data.p)
    arch_e = cfg.propensity_arch(data.p)

    results = []
    for r in range(repeats):
        plan = proportion_split(data, fraction, derive_seed(master, "estimate-split", r))
        cfg_m = cfg.train_config("outcome", derive_seed(master, "estimate-outcome", r))
        if estimator == "split":
            res = ate_split(data, plan, arch_m, cfg_m, trunc_const, ci_level)
        else:
            cfg_e = cfg.train_config("propensity",
                                     derive_seed(master, "estimate-propensity", r))
            res = ate_dr_split(data, plan, arch_m, arch_e, cfg_m, cfg_e,
                               cfg.clip_spec(), trunc_const, ci_level)
        results.append(res)

    outdir = str(cfg.get("output.dir"))
    os.makedirs(outdir, exist_ok=True)
    prov = make_provenance(master, cfg.config_hash())
    if repeats == 1:
        doc = {"provenance": prov}
        doc.update(results[0].to_dict())
        text = json.dumps(doc, indent=2)
        print(text)
        with open(os.path.join(outdir, "estimate.json"), "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        estimates = [r.estimate for r in results]
        summary = {
            "provenance": prov,
            "estimator": estimator,
            "repeats": repeats,
            "inference_fraction": fraction,
            "median_estimate": median(estimates),
            "robust_sd": robust_sd(estimates),
        }
        text = json.dumps(summary, indent=2)
        print(text)
        with open(os.path.join(outdir, "estimate_summary.json"), "w",
                  encoding="utf-8") as fh:
            fh.write(text + "\n")
        lines = [json.dumps({"provenance": prov})]
        for r, res in enumerate(results):
            record = {"repeat": r}
            record.update(res.to_dict())
            lines.append(json.dumps(record))
        with open(os.path.join(outdir, "estimates.jsonl"), "w",
                  encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
    return EXIT_OK


def cmd_check(only: str = None) -> int:
    from .checks import run_checks

    results = run_checks(only)
    all_ok = True
    for res in results:
        status = "PASS" if res.passed else "FAIL"
        all_ok = all_ok and res.passed
        print(f"{status} {res.name}: {res.detail}")
    return EXIT_OK if all_ok else EXIT_RUNTIME


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "check":
            # config flags are accepted for symmetry but checks are self-contained
            _load_run_config(args)
            return cmd_check(args.only)
        cfg = _load_run_config(args)
        if args.command == "simulate":
            return cmd_simulate(cfg, args.threads)
        return cmd_estimate(cfg, args.threads)
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except DnnateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
