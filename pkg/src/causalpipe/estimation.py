"""Point estimators for identified estimands, plus bootstrap intervals and a
permutation significance test.

Every estimator targets the average treatment effect.  Method names follow the
``<strategy>.<estimator>`` convention, e.g. ``backdoor.propensity_score_matching``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy.stats import rankdata

from .dataset import Dataset, bootstrap_resample, is_binary
from .errors import CausalError, EstimationError, IncompatibleMethodError
from .identification import Estimand
from .numerics import design, fit_logistic, fit_ols, predict_proba

MIN_BOOTSTRAP_REPS = 20
RDD_MIN_ROWS = 10


@dataclass(frozen=True)
class EstimationConfig:
    method: str = "backdoor.linear_regression"
    bootstrap_reps: int = 200
    ci_level: float = 0.95
    permutation_reps: int = 100
    seed: int = 0
    strata: int = 10
    propensity_clip: float = 0.01
    rdd_cutoff: float | None = None
    rdd_bandwidth: float | None = None
    rdd_running_variable: str | None = None

    def __post_init__(self):
        if not 0.0 < self.propensity_clip < 0.5:
            raise ValueError("propensity_clip must lie in (0, 0.5)")
        if self.strata < 2:
            raise ValueError("strata must be at least 2")
        if not 0.0 < self.ci_level < 1.0:
            raise ValueError("ci_level must lie in (0, 1)")
        if self.bootstrap_reps < 0 or self.permutation_reps < 0:
            raise ValueError("replication counts must be nonnegative")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


class Point(NamedTuple):
    value: float
    diagnostics: dict = {}
    warnings: tuple = ()


@dataclass(frozen=True, eq=False)
class EffectEstimate:
    value: float
    method: str
    estimand: Estimand
    ci: tuple | None = None
    ci_level: float = 0.95
    p_value: float | None = None
    diagnostics: dict = field(default_factory=dict)
    warnings: tuple = ()

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "method": self.method,
            "estimand": self.estimand.to_dict(),
            "ci": None if self.ci is None else [self.ci[0], self.ci[1]],
            "ci_level": self.ci_level,
            "p_value": self.p_value,
            "diagnostics": {k: self.diagnostics[k] for k in sorted(self.diagnostics)},
            "warnings": list(self.warnings),
        }


def _binary_treatment(d: Dataset) -> np.ndarray:
    t = d.t
    if not is_binary(t):
        raise EstimationError(f"treatment {d.treatment!r} must be binary (0/1) for this estimator")
    return t


def propensity_scores(d: Dataset, e: Estimand) -> np.ndarray:
    """Logistic model of treatment on the adjustment set."""
    t = _binary_treatment(d)
    X = design(d.matrix(sorted(e.adjustment)), n=d.n_rows)
    return predict_proba(fit_logistic(X, t), X)


def _linear_regression(d: Dataset, e: Estimand, cfg: EstimationConfig) -> Point:
    X = design(d.t, d.matrix(sorted(e.adjustment)))
    return Point(float(fit_ols(X, d.y).coefficients[1]))


def _stratification(d: Dataset, e: Estimand, cfg: EstimationConfig) -> Point:
    t = _binary_treatment(d)
    y = d.y
    p = propensity_scores(d, e)
    n = d.n_rows
    # Rows with tied scores share an averaged rank, hence a stratum; the
    # rank-centre rule keeps the partition invariant under p -> 1 - p.
    centre = rankdata(p, method="average") - 0.5
    bins = np.minimum(np.floor(centre * cfg.strata / n).astype(int), cfg.strata - 1)
    total, weight = 0.0, 0
    dropped_bins, dropped_rows = 0, 0
    for b in range(cfg.strata):
        in_bin = bins == b
        size = int(in_bin.sum())
        if size == 0:
            continue
        treated = in_bin & (t == 1.0)
        control = in_bin & (t == 0.0)
        if not treated.any() or not control.any():
            dropped_bins += 1
            dropped_rows += size
            continue
        total += size * (y[treated].mean() - y[control].mean())
        weight += size
    if weight == 0:
        raise EstimationError("no propensity stratum contains both treated and control rows")
    diag = {"strata_dropped": float(dropped_bins), "rows_dropped": float(dropped_rows),
            "effective_n": float(weight)}
    return Point(float(total / weight), diag)


def _nearest(source_p, target_p, target_rows):
    """For each source score, the row of the nearest target score (ties -> lowest row)."""
    order = np.lexsort((target_rows, target_p))
    sp, sr = target_p[order], target_rows[order]
    m = len(sp)
    pos = np.searchsorted(sp, source_p, side="left")
    right = np.minimum(pos, m - 1)
    left_val = sp[np.maximum(pos - 1, 0)]
    left = np.searchsorted(sp, left_val, side="left")
    has_left = pos > 0
    has_right = pos < m
    d_left = np.where(has_left, source_p - sp[left], np.inf)
    d_right = np.where(has_right, sp[right] - source_p, np.inf)
    pick_right = (d_right < d_left) | ((d_right == d_left) & (sr[right] < sr[left]))
    return np.where(pick_right, sr[right], sr[left])


def matched_difference(t, y, p) -> float:
    """ATE from 1-nearest-neighbour matching on `p`, with replacement, both ways."""
    t, y, p = (np.asarray(a, dtype=np.float64) for a in (t, y, p))
    treated = np.flatnonzero(t == 1.0)
    control = np.flatnonzero(t == 0.0)
    if len(treated) == 0 or len(control) == 0:
        raise EstimationError("matching needs both treated and control rows")
    y1 = y.copy()
    y0 = y.copy()
    y0[treated] = y[_nearest(p[treated], p[control], control)]
    y1[control] = y[_nearest(p[control], p[treated], treated)]
    return float(np.mean(y1 - y0))


def _matching(d: Dataset, e: Estimand, cfg: EstimationConfig) -> Point:
    t = _binary_treatment(d)
    if t.min() == t.max():
        raise EstimationError("matching needs both treated and control rows")
    return Point(matched_difference(t, d.y, propensity_scores(d, e)))


def _weighting(d: Dataset, e: Estimand, cfg: EstimationConfig) -> Point:
    t = _binary_treatment(d)
    y = d.y
    raw = propensity_scores(d, e)
    p = np.clip(raw, cfg.propensity_clip, 1.0 - cfg.propensity_clip)
    clipped = int(np.sum(p != raw))
    value = float(np.mean(t * y / p) - np.mean((1.0 - t) * y / (1.0 - p)))
    notes = ()
    if t.min() == t.max():
        notes = ("all rows share one treatment value; the weighting estimate is degenerate",)
    return Point(value, {"clipped_rows": float(clipped)}, notes)


def _first_instrument(d: Dataset, e: Estimand) -> str:
    if not e.instruments:
        raise EstimationError("estimand lists no instruments")
    return sorted(e.instruments)[0]


def _wald(d: Dataset, e: Estimand, cfg: EstimationConfig) -> Point:
    name = _first_instrument(d, e)
    z = d.column(name)
    if not is_binary(z) or z.min() == z.max():
        raise EstimationError(f"instrument {name!r} must be binary and non-constant")
    on, off = z == 1.0, z == 0.0
    numerator = d.y[on].mean() - d.y[off].mean()
    denominator = d.t[on].mean() - d.t[off].mean()
    if abs(denominator) < 1e-12:
        raise EstimationError(f"instrument {name!r} does not move the treatment (weak instrument)")
    return Point(float(numerator / denominator), {"first_stage": float(denominator)})


def _two_stage_least_squares(d: Dataset, e: Estimand, cfg: EstimationConfig) -> Point:
    if not e.instruments:
        raise EstimationError("estimand lists no instruments")
    Z = design(d.matrix(sorted(e.instruments)))
    t_hat = Z @ fit_ols(Z, d.t).coefficients
    if np.ptp(t_hat) <= 1e-12 * max(1.0, float(np.max(np.abs(t_hat)))):
        raise EstimationError("first-stage fitted treatment is constant (weak instrument)")
    return Point(float(fit_ols(design(t_hat), d.y).coefficients[1]))


def _regression_discontinuity(d: Dataset, e: Estimand, cfg: EstimationConfig) -> Point:
    if cfg.rdd_running_variable is None or cfg.rdd_cutoff is None or cfg.rdd_bandwidth is None:
        raise EstimationError("regression discontinuity needs a running variable, cutoff and bandwidth")
    if cfg.rdd_bandwidth <= 0:
        raise EstimationError("bandwidth must be positive")
    c, h = cfg.rdd_cutoff, cfg.rdd_bandwidth
    r = d.column(cfg.rdd_running_variable) - c
    y = d.y
    right = (r >= 0) & (r <= h)
    left = (r < 0) & (r >= -h)
    for side, mask in (("right", right), ("left", left)):
        if mask.sum() < RDD_MIN_ROWS:
            raise EstimationError(
                f"only {int(mask.sum())} rows {side} of the cutoff within the bandwidth; "
                f"need {RDD_MIN_ROWS}")
    above = fit_ols(design(r[right]), y[right]).coefficients[0]
    below = fit_ols(design(r[left]), y[left]).coefficients[0]
    diag = {"rows_left": float(left.sum()), "rows_right": float(right.sum())}
    return Point(float(above - below), diag)


def _single_mediator(e: Estimand) -> str:
    if len(e.mediators) != 1:
        raise EstimationError(
            f"the linear two-stage estimator supports one mediator, got {sorted(e.mediators)}")
    return next(iter(e.mediators))


def _frontdoor(d: Dataset, e: Estimand, cfg: EstimationConfig) -> Point:
    m = d.column(_single_mediator(e))
    a = fit_ols(design(d.t), m).coefficients[1]
    b = fit_ols(design(m, d.t), d.y).coefficients[1]
    return Point(float(a * b), {"stage1": float(a), "stage2": float(b)})


def _mediation(d: Dataset, e: Estimand, cfg: EstimationConfig) -> Point:
    m = d.column(_single_mediator(e))
    w = d.matrix(sorted(e.adjustment))
    a = fit_ols(design(d.t, w), m).coefficients[1]
    coef = fit_ols(design(d.t, m, w), d.y).coefficients
    nde, nie = float(coef[1]), float(a * coef[2])
    return Point(nde + nie, {"nde": nde, "nie": nie})


# method name -> (estimand kind, implementation)
METHODS: dict = {
    "backdoor.linear_regression": ("backdoor", _linear_regression),
    "backdoor.propensity_score_stratification": ("backdoor", _stratification),
    "backdoor.propensity_score_matching": ("backdoor", _matching),
    "backdoor.propensity_score_weighting": ("backdoor", _weighting),
    "iv.wald": ("iv", _wald),
    "iv.two_stage_least_squares": ("iv", _two_stage_least_squares),
    "iv.regression_discontinuity": ("iv", _regression_discontinuity),
    "frontdoor.two_stage_regression": ("frontdoor", _frontdoor),
    "mediation.two_stage_regression": ("mediation", _mediation),
}

DEFAULT_METHODS = {
    "backdoor": "backdoor.linear_regression",
    "frontdoor": "frontdoor.two_stage_regression",
    "iv": "iv.two_stage_least_squares",
    "mediation": "mediation.two_stage_regression",
}


def method_kind(method: str) -> str:
    try:
        return METHODS[method][0]
    except KeyError:
        raise IncompatibleMethodError(
            f"unknown method {method!r}; known methods: {', '.join(METHODS)}") from None


def _require(e: Estimand, kind: str, method: str):
    if e.kind != kind:
        raise IncompatibleMethodError(f"method {method!r} needs a {kind} estimand, got {e.kind}")


def point_estimate(d: Dataset, e: Estimand, cfg: EstimationConfig) -> Point:
    """Run the configured estimator once, without intervals or tests."""
    kind = method_kind(cfg.method)
    _require(e, kind, cfg.method)
    return METHODS[cfg.method][1](d, e, cfg)


def _value_of(cfg):
    return lambda d, e: point_estimate(d, e, cfg).value


def backdoor_linear_regression(d, e, cfg=EstimationConfig()) -> float:
    _require(e, "backdoor", "backdoor.linear_regression")
    return _linear_regression(d, e, cfg).value


def propensity_score_stratification(d, e, cfg=EstimationConfig()) -> float:
    _require(e, "backdoor", "backdoor.propensity_score_stratification")
    return _stratification(d, e, cfg).value


def propensity_score_matching(d, e, cfg=EstimationConfig()) -> float:
    _require(e, "backdoor", "backdoor.propensity_score_matching")
    return _matching(d, e, cfg).value


def inverse_propensity_weighting(d, e, cfg=EstimationConfig()) -> float:
    _require(e, "backdoor", "backdoor.propensity_score_weighting")
    return _weighting(d, e, cfg).value


def iv_wald(d, e, cfg=EstimationConfig()) -> float:
    _require(e, "iv", "iv.wald")
    return _wald(d, e, cfg).value


def iv_two_stage_least_squares(d, e, cfg=EstimationConfig()) -> float:
    _require(e, "iv", "iv.two_stage_least_squares")
    return _two_stage_least_squares(d, e, cfg).value


def regression_discontinuity(d, e, cfg) -> float:
    _require(e, "iv", "iv.regression_discontinuity")
    return _regression_discontinuity(d, e, cfg).value


def frontdoor_two_stage(d, e, cfg=EstimationConfig()) -> float:
    _require(e, "frontdoor", "frontdoor.two_stage_regression")
    return _frontdoor(d, e, cfg).value


def mediation_two_stage(d, e, cfg=EstimationConfig()) -> tuple:
    """Natural direct and indirect effects ``(nde, nie)`` under a linear model."""
    _require(e, "mediation", "mediation.two_stage_regression")
    diag = _mediation(d, e, cfg).diagnostics
    return diag["nde"], diag["nie"]


def _replicate(estimator: Callable, datasets, reps: int, what: str):
    values, failed = [], 0
    for i in range(reps):
        try:
            values.append(float(estimator(datasets(i))))
        except CausalError:
            failed += 1
    if failed * 2 > reps:
        raise EstimationError(f"{failed} of {reps} {what} replications failed")
    return np.array(values), failed


def _bootstrap(d, e, cfg, point_estimator):
    if cfg.bootstrap_reps < MIN_BOOTSTRAP_REPS:
        raise EstimationError(f"bootstrap needs at least {MIN_BOOTSTRAP_REPS} replications")
    values, failed = _replicate(
        lambda ds: point_estimator(ds, e),
        lambda i: bootstrap_resample(d, cfg.seed + i),
        cfg.bootstrap_reps, "bootstrap")
    alpha = 1.0 - cfg.ci_level
    low, high = np.quantile(values, [alpha / 2.0, 1.0 - alpha / 2.0])
    return float(low), float(high), failed


def bootstrap_ci(d: Dataset, e: Estimand, cfg: EstimationConfig, point_estimator=None) -> tuple:
    """Percentile bootstrap interval at ``cfg.ci_level``.

    ``point_estimator(dataset, estimand) -> float`` defaults to the configured method.
    """
    low, high, _ = _bootstrap(d, e, cfg, point_estimator or _value_of(cfg))
    return low, high


def _permutation(d, e, cfg, point_estimator, observed):
    if cfg.permutation_reps < 1:
        raise EstimationError("permutation test needs at least one replication")
    t = d.t

    def permuted(i):
        rng = np.random.default_rng(cfg.seed + i)
        return d.with_column(d.treatment, rng.permutation(t))

    values, failed = _replicate(lambda ds: point_estimator(ds, e), permuted,
                                cfg.permutation_reps, "permutation")
    hits = int(np.sum(np.abs(values) >= abs(observed)))
    return (1 + hits) / (len(values) + 1), failed


def permutation_pvalue(d: Dataset, e: Estimand, cfg: EstimationConfig, point_estimator=None) -> float:
    """Permutation p-value for the sharp null of no treatment effect."""
    point_estimator = point_estimator or _value_of(cfg)
    p, _ = _permutation(d, e, cfg, point_estimator, point_estimator(d, e))
    return p


def estimate_effect(d: Dataset, e: Estimand, cfg: EstimationConfig = EstimationConfig()) -> EffectEstimate:
    point = point_estimate(d, e, cfg)
    estimator = _value_of(cfg)
    diagnostics = dict(point.diagnostics)
    notes = list(point.warnings)
    ci = p_value = None
    if cfg.bootstrap_reps > 0:
        low, high, failed = _bootstrap(d, e, cfg, estimator)
        ci = (low, high)
        diagnostics["bootstrap_failures"] = float(failed)
        if not low <= point.value <= high:
            notes.append("point estimate lies outside its bootstrap interval")
    if cfg.permutation_reps > 0:
        p_value, failed = _permutation(d, e, cfg, estimator, point.value)
        diagnostics["permutation_failures"] = float(failed)
    return EffectEstimate(point.value, cfg.method, e, ci, cfg.ci_level, p_value,
                          diagnostics, tuple(notes))
