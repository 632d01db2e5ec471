"""CSV ingestion, preprocessing, proportion splits, and robust summaries."""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import DataValidationError, InvalidInputError, SchemaError
from .estimators import Dataset, SplitPlan
from .rng import make_generator

STANDARDIZE_MODES = ("none", "zscore", "minmax")
# IQR of a standard normal; IQR / 1.349 is consistent for the SD
_NORMAL_IQR = 1.349


@dataclass(frozen=True)
class CsvSchema:
    outcome_column: str
    treatment_column: str
    covariate_columns: tuple
    standardize: str = "none"

    def __post_init__(self):
        if not self.covariate_columns:
            raise SchemaError("covariate column list is empty")
        names = [self.outcome_column, self.treatment_column, *self.covariate_columns]
        if len(set(names)) != len(names):
            raise SchemaError("schema column names must be distinct")
        if self.standardize not in STANDARDIZE_MODES:
            raise SchemaError(f"unknown standardize mode {self.standardize!r}")


def load_csv(path, schema: CsvSchema) -> Dataset:
    """Parse a CSV into a Dataset, standardizing covariates if requested.

    Any row with a missing or non-numeric field is an error; all such
    1-based data-row numbers are reported together.
    """
    if not os.path.exists(path):
        raise InvalidInputError(f"no such file: {path}")
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path} is empty") from None
        rows = [row for row in reader if row]

    cols = {name: i for i, name in enumerate(header)}
    wanted = [schema.outcome_column, schema.treatment_column, *schema.covariate_columns]
    missing = [name for name in wanted if name not in cols]
    if missing:
        raise SchemaError(f"missing columns {missing} in {path}")
    take = [cols[name] for name in wanted]

    parsed = np.empty((len(rows), len(take)))
    bad_rows = []
    for i, row in enumerate(rows):
        try:
            for j, src in enumerate(take):
                field = row[src].strip()
                if not field:
                    raise ValueError("empty field")
                parsed[i, j] = float(field)
            if not np.all(np.isfinite(parsed[i])):
                raise ValueError("non-finite field")
        except (ValueError, IndexError):
            bad_rows.append(i + 1)
    if bad_rows:
        raise DataValidationError(
            f"non-numeric or missing fields in rows {bad_rows[:20]}"
            + (" ..." if len(bad_rows) > 20 else ""), rows=bad_rows)
    if parsed.shape[0] == 0:
        raise InvalidInputError(f"{path} contains a header but no data rows")

    y = parsed[:, 0]
    t = parsed[:, 1]
    bad_t = [i + 1 for i in np.flatnonzero((t != 0.0) & (t != 1.0))]
    if bad_t:
        raise DataValidationError(
            f"treatment column {schema.treatment_column!r} is not binary "
            f"in rows {bad_t[:20]}" + (" ..." if len(bad_t) > 20 else ""), rows=bad_t)
    x = parsed[:, 2:].copy()

    if schema.standardize == "zscore":
        mean = x.mean(axis=0)
        sd = x.std(axis=0, ddof=1) if x.shape[0] > 1 else np.zeros(x.shape[1])
        flat = [schema.covariate_columns[j] for j in np.flatnonzero(sd == 0.0)]
        if flat:
            raise DataValidationError(f"zero-variance columns under zscore: {flat}")
        x = (x - mean) / sd
    elif schema.standardize == "minmax":
        lo = x.min(axis=0)
        hi = x.max(axis=0)
        span = hi - lo
        span[span == 0.0] = 1.0  # constant column maps to 0
        x = (x - lo) / span

    return Dataset(x, t, y)


def write_csv(d: Dataset, path, schema: CsvSchema = None) -> CsvSchema:
    """Write a Dataset as CSV with 17-significant-digit decimals.

    Column names come from the schema when given, else y, t, x1..xp.
    Returns the schema describing the written file.
    """
    if schema is None:
        schema = CsvSchema("y", "t", tuple(f"x{j + 1}" for j in range(d.p)))
    if len(schema.covariate_columns) != d.p:
        raise SchemaError("schema covariate count does not match dataset")
    lines = [",".join([schema.outcome_column, schema.treatment_column,
                       *schema.covariate_columns])]
    for i in range(d.n):
        fields = [f"{d.y[i]:.17g}", f"{int(d.t[i])}"]
        fields.extend(f"{v:.17g}" for v in d.x[i])
        lines.append(",".join(fields))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return schema


def proportion_split(d: Dataset, inference_fraction: float, seed: int) -> SplitPlan:
    """Sample floor(fraction * n) inference rows without replacement."""
    if not 0.0 < inference_fraction < 1.0:
        raise InvalidInputError("inference fraction must lie in (0, 1)")
    n = d.n
    k = int(math.floor(inference_fraction * n))
    if k < 2:
        raise InvalidInputError(f"inference set of size {k} is too small")
    if n - k < 1:
        raise InvalidInputError("training set would be empty")
    perm = make_generator(seed).permutation(n)
    return SplitPlan(np.sort(perm[k:]), np.sort(perm[:k]))


def median(values) -> float:
    """Sample median; even lengths average the two central order statistics."""
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise InvalidInputError("median of an empty sample")
    return float(np.median(v))


def robust_sd(values) -> float:
    """IQR / 1.349 with linear-interpolation quantiles."""
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise InvalidInputError("robust_sd of an empty sample")
    q1, q3 = np.quantile(v, [0.25, 0.75])
    return float((q3 - q1) / _NORMAL_IQR)
