"""Tabular data with treatment/outcome roles, resampling and synthetic DGPs."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError
from .graph import CausalGraph

_BOOLEANS = {"true": 1.0, "false": 0.0}


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable column store of float64 vectors.

    ``values`` is an (n_rows, n_columns) read-only array whose columns follow
    ``names``.
    """

    names: tuple
    values: np.ndarray
    treatment: str
    outcome: str

    def __post_init__(self):
        names = tuple(str(n) for n in self.names)
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.ndim != 2 or values.shape[1] != len(names):
            raise DataError("values must be a 2-D array with one column per name")
        if values.shape[0] < 1:
            raise DataError("a dataset needs at least one row")
        if len(set(names)) != len(names):
            raise DataError("column names must be unique")
        for role in (self.treatment, self.outcome):
            if role not in names:
                raise DataError(f"column {role!r} not found; available: {', '.join(names)}")
        if self.treatment == self.outcome:
            raise DataError("treatment and outcome must be different columns")
        if not np.all(np.isfinite(values)):
            raise DataError("dataset contains NaN or infinite values")
        values.flags.writeable = False
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_columns(cls, columns: dict, treatment: str, outcome: str) -> "Dataset":
        names = list(columns)
        values = np.column_stack([np.asarray(columns[n], dtype=np.float64) for n in names])
        return cls(tuple(names), values, treatment, outcome)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    def __len__(self):
        return self.n_rows

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (self.names == other.names and self.treatment == other.treatment
                and self.outcome == other.outcome
                and np.array_equal(self.values, other.values))

    def __contains__(self, name):
        return name in self.names

    def column(self, name: str) -> np.ndarray:
        try:
            return self.values[:, self.names.index(name)]
        except ValueError:
            raise DataError(f"column {name!r} not found") from None

    def matrix(self, names) -> np.ndarray:
        return np.column_stack([self.column(n) for n in names]) if names else np.empty((self.n_rows, 0))

    @property
    def t(self) -> np.ndarray:
        return self.column(self.treatment)

    @property
    def y(self) -> np.ndarray:
        return self.column(self.outcome)

    def with_column(self, name: str, values) -> "Dataset":
        """Copy with `name` replaced (if present) or appended."""
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (self.n_rows,):
            raise DataError(f"column {name!r} must have {self.n_rows} values")
        if name in self.names:
            data = self.values.copy()
            data[:, self.names.index(name)] = values
            return Dataset(self.names, data, self.treatment, self.outcome)
        return Dataset(self.names + (name,), np.column_stack([self.values, values]),
                       self.treatment, self.outcome)

    def take(self, rows) -> "Dataset":
        return Dataset(self.names, self.values[np.asarray(rows, dtype=np.intp)],
                       self.treatment, self.outcome)

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(self.names)
        for row in self.values:
            writer.writerow(repr(float(v)) for v in row)
        return out.getvalue()


@dataclass(frozen=True)
class VariableKind:
    name: str
    kind: str


def _parse_cell(text: str, line: int, col: str) -> float:
    cell = text.strip()
    lowered = cell.lower()
    if lowered in _BOOLEANS:
        return _BOOLEANS[lowered]
    try:
        value = float(cell)
    except ValueError:
        raise DataError(f"non-numeric cell {text!r} at row {line}, column {col!r}") from None
    if not math.isfinite(value):
        raise DataError(f"non-finite cell {text!r} at row {line}, column {col!r}")
    return value


def load_csv(path_or_text: str, treatment: str, outcome: str) -> Dataset:
    """Read a header-first numeric CSV.

    Accepts a path or the CSV text itself (anything containing a newline is
    treated as text).  Row numbers in errors are 1-based file lines, so the
    header is row 1.
    """
    if "\n" in path_or_text:
        text = path_or_text
    else:
        try:
            text = Path(path_or_text).read_text()
        except OSError as exc:
            raise DataError(f"cannot read {path_or_text!r}: {exc}") from None
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError("missing header row")
    header = [h.strip() for h in rows[0]]
    if any(not h for h in header):
        raise DataError("header contains an empty column name")
    try:
        float(header[0])
    except ValueError:
        pass
    else:
        raise DataError("missing header row (first row is numeric)")
    for role in (treatment, outcome):
        if role not in header:
            raise DataError(f"column {role!r} not found in header: {', '.join(header)}")
    body = []
    for line, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise DataError(f"row {line} has {len(row)} cells, expected {len(header)}")
        body.append([_parse_cell(c, line, h) for c, h in zip(row, header)])
    if not body:
        raise DataError("no data rows")
    return Dataset(tuple(header), np.array(body, dtype=np.float64), treatment, outcome)


def is_binary(values) -> bool:
    values = np.asarray(values)
    return bool(np.all((values == 0.0) | (values == 1.0)))


def infer_variable_kinds(d: Dataset) -> list:
    return [VariableKind(n, "binary" if is_binary(d.column(n)) else "continuous") for n in d.names]


def bootstrap_resample(d: Dataset, seed: int) -> Dataset:
    rng = np.random.default_rng(seed)
    return d.take(rng.integers(0, d.n_rows, size=d.n_rows))


def random_subset(d: Dataset, fraction: float, seed: int) -> Dataset:
    """Rows sampled without replacement, kept in their original order."""
    if not 0.0 < fraction <= 1.0:
        raise DataError(f"fraction must lie in (0, 1], got {fraction}")
    size = math.ceil(fraction * d.n_rows)
    rng = np.random.default_rng(seed)
    rows = np.sort(rng.choice(d.n_rows, size=size, replace=False))
    return d.take(rows)


@dataclass(frozen=True)
class SyntheticSpec:
    n: int
    beta: float
    num_common_causes: int = 0
    num_instruments: int = 0
    treatment_is_binary: bool = True
    noise_sd: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise DataError("n must be at least 1")
        if self.noise_sd < 0:
            raise DataError("noise_sd must be nonnegative")
        if self.num_common_causes < 0 or self.num_instruments < 0:
            raise DataError("variable counts must be nonnegative")


def generate_linear_dataset(spec: SyntheticSpec):
    """Linear DGP with unit coefficients on every common cause and instrument.

    W_j ~ N(0, 1), Z_k ~ Bernoulli(0.5), s = sum(W) + sum(Z) + N(0, 1),
    T = 1{s > 0} (or s), Y = beta * T + sum(W) + N(0, noise_sd).

    Returns ``(dataset, graph, true_ate)``.
    """
    rng = np.random.default_rng(spec.seed)
    n = spec.n
    w = rng.standard_normal((n, spec.num_common_causes))
    z = rng.binomial(1, 0.5, size=(n, spec.num_instruments)).astype(np.float64)
    s = w.sum(axis=1) + z.sum(axis=1) + rng.standard_normal(n)
    t = (s > 0).astype(np.float64) if spec.treatment_is_binary else s
    y = spec.beta * t + w.sum(axis=1) + spec.noise_sd * rng.standard_normal(n)

    w_names = [f"W{j}" for j in range(spec.num_common_causes)]
    z_names = [f"Z{k}" for k in range(spec.num_instruments)]
    columns = {**{c: w[:, j] for j, c in enumerate(w_names)},
               **{c: z[:, k] for k, c in enumerate(z_names)}, "T": t, "Y": y}
    edges = [(c, "T") for c in w_names + z_names] + [(c, "Y") for c in w_names] + [("T", "Y")]
    graph = CausalGraph.from_edges(edges, nodes=list(columns))
    return Dataset.from_columns(columns, "T", "Y"), graph, float(spec.beta)


# Harness DGPs for the instrument, front-door, mediation and discontinuity
# estimators.  Each returns (dataset, graph, truth).


def generate_iv_dataset(n: int, beta: float, seed: int, confounder_strength: float = 5.0):
    """Binary instrument Z and binary T sharing a latent confounder U with Y.

    T = 1{2(Z - 1/2) + U + N(0,1) > 0}, Y = beta T + strength U + N(0,1).
    """
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(n)
    z = rng.binomial(1, 0.5, size=n).astype(np.float64)
    t = (2.0 * (z - 0.5) + u + rng.standard_normal(n) > 0).astype(np.float64)
    y = beta * t + confounder_strength * u + rng.standard_normal(n)
    graph = CausalGraph.from_edges(
        [("Z", "T"), ("U", "T"), ("U", "Y"), ("T", "Y")], latent={"U"})
    return Dataset.from_columns({"Z": z, "T": t, "Y": y}, "T", "Y"), graph, float(beta)


def generate_frontdoor_dataset(n: int, a: float, b: float, seed: int, confounder_strength: float = 1.0):
    """T = 1{c U + N(0,1) > 0}, M = a T + N(0,1), Y = b M + c U + N(0,1) with U latent."""
    rng = np.random.default_rng(seed)
    c = confounder_strength
    u = rng.standard_normal(n)
    t = (c * u + rng.standard_normal(n) > 0).astype(np.float64)
    m = a * t + rng.standard_normal(n)
    y = b * m + c * u + rng.standard_normal(n)
    graph = CausalGraph.from_edges(
        [("U", "T"), ("U", "Y"), ("T", "M"), ("M", "Y")], latent={"U"})
    return Dataset.from_columns({"T": t, "M": m, "Y": y}, "T", "Y"), graph, float(a * b)


def generate_mediation_dataset(n: int, a: float, b: float, direct: float, seed: int):
    """Observed confounder W of T, M and Y; truth is (direct, a * b).

    T = W + N(0,1), M = a T + W + N(0,1), Y = direct T + b M + W + N(0,1).
    """
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(n)
    t = w + rng.standard_normal(n)
    m = a * t + w + rng.standard_normal(n)
    y = direct * t + b * m + w + rng.standard_normal(n)
    graph = CausalGraph.from_edges(
        [("W", "T"), ("W", "M"), ("W", "Y"), ("T", "M"), ("M", "Y"), ("T", "Y")])
    data = Dataset.from_columns({"W": w, "T": t, "M": m, "Y": y}, "T", "Y")
    return data, graph, (float(direct), float(a * b))


def generate_rdd_dataset(n: int, jump: float, slope: float, noise_sd: float, seed: int, cutoff: float = 0.0):
    """Sharp discontinuity: R ~ U(cutoff - 1, cutoff + 1), T = 1{R >= cutoff},
    Y = slope (R - cutoff) + jump T + N(0, noise_sd)."""
    rng = np.random.default_rng(seed)
    r = cutoff + rng.uniform(-1.0, 1.0, size=n)
    t = (r >= cutoff).astype(np.float64)
    y = slope * (r - cutoff) + jump * t + noise_sd * rng.standard_normal(n)
    graph = CausalGraph.from_edges([("R", "T"), ("T", "Y")])
    return Dataset.from_columns({"R": r, "T": t, "Y": y}, "T", "Y"), graph, float(jump)
