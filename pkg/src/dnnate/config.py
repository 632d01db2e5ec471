"""Declarative run configuration: flat dotted keys, file + flag overrides.

The file format is one `key = value` pair per line; `#` starts a
comment.  Unknown keys are errors.  dump() is canonical (every key in
schema order), so dump -> load -> dump round-trips byte-identically.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

from .errors import InvalidInputError, SchemaError
from .estimators import ClipSpec
from .harness import ExperimentConfig
from .dgp import DgpConfig
from .net import DenseArch, TrainConfig


@dataclass(frozen=True)
class _Key:
    kind: str  # int | float | str
    default: object
    help: str


SCHEMA = {
    "dgp.p": _Key("int", 50, "covariate dimension of the simulated data"),
    "dgp.tau": _Key("float", 1.0, "true treatment effect"),
    "dgp.noise_sd": _Key("float", 1.0, "outcome noise standard deviation"),
    "experiment.inference_n": _Key("int", 1000, "inference-set size per replication"),
    "experiment.train_ratio": _Key("int", 5, "training size = ratio * inference_n"),
    "experiment.estimators": _Key("str", "split,dr_split",
                                  "comma list from {split, dr_split}"),
    "experiment.replications": _Key("int", 50, "number of Monte Carlo replications"),
    "experiment.master_seed": _Key("int", 20240501, "master seed for all streams"),
    "experiment.ci_level": _Key("float", 0.95, "confidence level for intervals"),
    "outcome.hidden": _Key("str", "auto",
                           "comma widths of hidden layers; auto = three layers of p+1"),
    "outcome.activation": _Key("str", "sigmoid", "sigmoid or relu"),
    "outcome.learning_rate": _Key("float", 0.001, "Adam learning rate"),
    "outcome.batch_size": _Key("int", 128, "mini-batch size"),
    "outcome.epochs": _Key("int", 800, "training epochs for the outcome net"),
    "outcome.trunc_const": _Key("float", 2.0, "output clamp = const * ln(n_train)"),
    "propensity.hidden": _Key("str", "auto", "hidden widths; auto = three layers of p+1"),
    "propensity.activation": _Key("str", "sigmoid", "sigmoid or relu"),
    "propensity.learning_rate": _Key("float", 0.001, "Adam learning rate"),
    "propensity.batch_size": _Key("int", 128, "mini-batch size"),
    "propensity.epochs": _Key("int", 100, "training epochs for the propensity net"),
    "propensity.clip_mode": _Key("str", "fixed", "fixed or log clipping band"),
    "propensity.clip_lo": _Key("float", 0.01, "fixed-mode lower clip"),
    "propensity.clip_c2": _Key("float", 10.0, "log-mode constant: lo = 1/(c2 ln n)"),
    "estimate.data": _Key("str", "", "CSV path for the estimate command"),
    "estimate.outcome_column": _Key("str", "y", "outcome column name"),
    "estimate.treatment_column": _Key("str", "t", "treatment column name"),
    "estimate.covariate_columns": _Key("str", "",
                                       "comma list; empty = every other column"),
    "estimate.standardize": _Key("str", "none", "none, zscore, or minmax"),
    "estimate.estimator": _Key("str", "split", "split or dr_split"),
    "estimate.fraction": _Key("float", 0.25, "inference fraction per split"),
    "estimate.repeats": _Key("int", 1, "number of repeated splits"),
    "output.dir": _Key("str", "out", "directory for output files"),
}


class RunConfig:
    """Validated key-value store over SCHEMA."""

    def __init__(self):
        self.values = {key: spec.default for key, spec in SCHEMA.items()}

    # ---- parsing ---------------------------------------------------------

    @staticmethod
    def _parse_value(key: str, raw: str):
        spec = SCHEMA.get(key)
        if spec is None:
            raise SchemaError(f"unknown config key {key!r}")
        raw = raw.strip()
        try:
            if spec.kind == "int":
                return int(raw)
            if spec.kind == "float":
                return float(raw)
            return raw
        except ValueError:
            raise InvalidInputError(
                f"config key {key} expects {spec.kind}, got {raw!r}") from None

    def set(self, key: str, raw: str) -> None:
        self.values[key] = self._parse_value(key, raw)

    def load_text(self, text: str) -> None:
        for lineno, line in enumerate(text.splitlines(), start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            if "=" not in body:
                raise SchemaError(f"line {lineno}: expected 'key = value', got {line!r}")
            key, raw = body.split("=", 1)
            self.set(key.strip(), raw)

    def load_file(self, path) -> None:
        with open(path, "r", encoding="utf-8") as fh:
            self.load_text(fh.read())

    def dump(self) -> str:
        lines = []
        for key, spec in SCHEMA.items():
            value = self.values[key]
            if spec.kind == "float":
                rendered = f"{value:.17g}"
            else:
                rendered = str(value)
            lines.append(f"{key} = {rendered}")
        return "\n".join(lines) + "\n"

    def config_hash(self) -> str:
        return hashlib.sha256(self.dump().encode("utf-8")).hexdigest()

    def get(self, key: str):
        if key not in SCHEMA:
            raise SchemaError(f"unknown config key {key!r}")
        return self.values[key]

    # ---- materialization ---------------------------------------------------

    def _hidden_widths(self, section: str, auto_width: int) -> tuple:
        raw = str(self.get(f"{section}.hidden")).strip()
        if raw == "auto":
            return (auto_width,) * 3
        try:
            widths = tuple(int(w) for w in raw.split(",") if w.strip())
        except ValueError:
            raise InvalidInputError(f"{section}.hidden must be comma ints or auto") from None
        if not widths:
            raise InvalidInputError(f"{section}.hidden is empty")
        return widths

    def outcome_arch(self, p: int) -> DenseArch:
        # input is (x, t); auto hidden width is p+1
        return DenseArch(p + 1, self._hidden_widths("outcome", p + 1),
                         str(self.get("outcome.activation")))

    def propensity_arch(self, p: int) -> DenseArch:
        return DenseArch(p, self._hidden_widths("propensity", p + 1),
                         str(self.get("propensity.activation")))

    def train_config(self, section: str, seed: int = 0) -> TrainConfig:
        return TrainConfig(
            learning_rate=float(self.get(f"{section}.learning_rate")),
            batch_size=int(self.get(f"{section}.batch_size")),
            epochs=int(self.get(f"{section}.epochs")),
            seed=seed,
        )

    def clip_spec(self) -> ClipSpec:
        return ClipSpec(mode=str(self.get("propensity.clip_mode")),
                        lo=float(self.get("propensity.clip_lo")),
                        c2=float(self.get("propensity.clip_c2")))

    def estimator_names(self) -> tuple:
        names = tuple(s.strip() for s in str(self.get("experiment.estimators")).split(",")
                      if s.strip())
        if not names:
            raise InvalidInputError("experiment.estimators is empty")
        return names

    def to_experiment_config(self) -> ExperimentConfig:
        p = int(self.get("dgp.p"))
        dgp = DgpConfig(n=max(2, int(self.get("experiment.inference_n"))), p=p,
                        tau=float(self.get("dgp.tau")),
                        noise_sd=float(self.get("dgp.noise_sd")), seed=0)
        return ExperimentConfig(
            dgp=dgp,
            inference_n=int(self.get("experiment.inference_n")),
            train_ratio=int(self.get("experiment.train_ratio")),
            estimators=self.estimator_names(),
            outcome_arch=self.outcome_arch(p),
            outcome_cfg=self.train_config("outcome"),
            propensity_arch=self.propensity_arch(p),
            propensity_cfg=self.train_config("propensity"),
            clip_spec=self.clip_spec(),
            trunc_const=float(self.get("outcome.trunc_const")),
            replications=int(self.get("experiment.replications")),
            master_seed=int(self.get("experiment.master_seed")),
            ci_level=float(self.get("experiment.ci_level")),
        )


def describe_keys() -> str:
    """Help text enumerating every config key, its type, and default."""
    width = max(len(k) for k in SCHEMA)
    lines = ["config keys (key = value per line; # comments; unknown keys error):"]
    for key, spec in SCHEMA.items():
        lines.append(f"  {key.ljust(width)}  {spec.kind:<5}  default={spec.default!r}  {spec.help}")
    return "\n".join(lines)
