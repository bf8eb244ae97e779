"""Refuters: perturb the problem in a way with a known consequence for the
estimate and check that the pipeline behaves accordingly.

Invariance refuters (random common cause, data subset, bootstrap, simulated
outcome) expect the estimate to stay put; null refuters (placebo treatment,
dummy outcome) expect it to vanish.  Placebo and dummy outcome challenge the
whole model/identify/estimate chain, subset and bootstrap only the estimator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.stats import norm

from .dataset import Dataset, bootstrap_resample, random_subset
from .errors import CausalError, RefutationError
from .estimation import EffectEstimate, EstimationConfig, point_estimate
from .graph import CausalGraph
from .identification import Estimand, identify_effect, verify_estimand
from .numerics import design, fit_ols, mean_and_variance

DEFAULT_GRID = tuple((a, b) for a in (0.1, 0.2, 0.5) for b in (0.1, 0.2, 0.5))
DEGENERATE_TOL = 1e-9
MIN_SUBSET_ROWS = 10


@dataclass(frozen=True)
class RefuterConfig:
    replications: int = 100
    seed: int = 0
    subset_fraction: float = 0.8
    sensitivity_grid: tuple = DEFAULT_GRID
    simulated_beta: float | None = None
    significance: float = 0.05
    placebo_band: float = 0.1
    sensitivity_band: float = 0.2

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if not 0.0 < self.subset_fraction <= 1.0:
            raise ValueError("subset_fraction must lie in (0, 1]")
        object.__setattr__(self, "sensitivity_grid",
                           tuple((float(a), float(b)) for a, b in self.sensitivity_grid))

    def thresholds(self) -> dict:
        return {"significance": self.significance, "placebo_band": self.placebo_band,
                "sensitivity_band": self.sensitivity_band}


@dataclass(frozen=True, eq=False)
class RefutationResult:
    refuter: str
    original_effect: float
    new_effect: float
    replication_effects: tuple
    p_value: float | None
    passed: bool
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "refuter": self.refuter,
            "original_effect": self.original_effect,
            "new_effect": self.new_effect,
            "replication_effects": list(self.replication_effects),
            "p_value": self.p_value,
            "passed": self.passed,
            "detail": self.detail,
        }


class _Context:
    """Shared arguments of one refuter call."""

    def __init__(self, d, g, e, est, cfg, estimation_config, estimator):
        self.d, self.g, self.e, self.est, self.cfg = d, g, e, est, cfg
        if estimator is None:
            ecfg = estimation_config or EstimationConfig(method=est.method)
            estimator = lambda data, estimand: point_estimate(data, estimand, ecfg).value
        self.estimator = estimator

    def replicate(self, make: Callable[[int], tuple]) -> tuple:
        """Run `make(i) -> (dataset, estimand)` for every replication; skip failures."""
        values, failed = [], 0
        reps = self.cfg.replications
        for i in range(reps):
            try:
                data, estimand = make(i)
                values.append(float(self.estimator(data, estimand)))
            except CausalError:
                failed += 1
        if failed * 2 > reps:
            raise RefutationError(f"{failed} of {reps} replications failed")
        return values, failed


def _fresh_name(d: Dataset, g: CausalGraph, stem: str) -> str:
    name, k = stem, 0
    while name in d.names or name in g.nodes:
        k += 1
        name = f"{stem}{k}"
    return name


def _reidentify(g_new: CausalGraph, g: CausalGraph, e: Estimand, added: str) -> Estimand:
    """Estimand for the problem with an extra observed common cause of t and y."""
    candidate = e.with_adjustment(e.adjustment | {added}) if e.kind in ("backdoor", "mediation") else e
    # An estimand that was not valid to begin with is kept as the user gave it.
    if verify_estimand(g_new, candidate) or not verify_estimand(g, e):
        return candidate
    alternative = identify_effect(g_new, e.treatment, e.outcome).first(e.kind)
    if alternative is None:
        raise RefutationError(f"no {e.kind} estimand after adding {added!r}")
    return alternative


def _standardize(v: np.ndarray) -> np.ndarray:
    sd = float(np.std(v))
    return np.zeros_like(v) if sd == 0.0 else (v - v.mean()) / sd


def _summarize(name, ctx, values, failed, expected, extra_check=None, detail=None):
    """Apply the shared normal-approximation test against `expected`."""
    original = ctx.est.value
    mean, var = mean_and_variance(values)
    sd = math.sqrt(var)
    scale = max(1.0, abs(expected))
    if sd <= DEGENERATE_TOL * scale:
        passed = abs(mean - expected) <= DEGENERATE_TOL * scale
        p_value = 1.0 if passed else 0.0
    else:
        z = (expected - mean) / sd
        p_value = float(2.0 * norm.sf(abs(z)))
        passed = p_value > ctx.cfg.significance
    if extra_check is not None:
        passed = passed and extra_check(mean)
    info = {"expected": expected, "replications": float(len(values)), "skipped": float(failed),
            "sd": sd, "seed": float(ctx.cfg.seed)}
    info.update(detail or {})
    return RefutationResult(name, original, mean, tuple(values), p_value, bool(passed), info)


def _null_band(ctx):
    limit = ctx.cfg.placebo_band * max(abs(ctx.est.value), 1.0)
    return lambda mean: abs(mean) < limit


def refute_random_common_cause(d, g, e, est, cfg=RefuterConfig(), *, estimation_config=None, estimator=None):
    """Add an independent N(0,1) common cause; the estimate should not move."""
    ctx = _Context(d, g, e, est, cfg, estimation_config, estimator)
    name = _fresh_name(d, g, "random_common_cause")
    g_new = g.add_common_cause(name, {e.treatment, e.outcome})
    e_new = _reidentify(g_new, g, e, name)

    def make(i):
        rng = np.random.default_rng(cfg.seed + i)
        return d.with_column(name, rng.standard_normal(d.n_rows)), e_new

    values, failed = ctx.replicate(make)
    return _summarize("random_common_cause", ctx, values, failed, est.value)


def refute_placebo_treatment(d, g, e, est, cfg=RefuterConfig(), *, estimation_config=None, estimator=None):
    """Permute the treatment column; the effect should vanish."""
    ctx = _Context(d, g, e, est, cfg, estimation_config, estimator)
    t = d.t

    def make(i):
        rng = np.random.default_rng(cfg.seed + i)
        return d.with_column(d.treatment, rng.permutation(t)), e

    values, failed = ctx.replicate(make)
    return _summarize("placebo_treatment", ctx, values, failed, 0.0, _null_band(ctx),
                      {"band": cfg.placebo_band * max(abs(est.value), 1.0)})


def refute_dummy_outcome(d, g, e, est, cfg=RefuterConfig(), *, estimation_config=None, estimator=None):
    """Replace the outcome with N(0,1) noise; the effect should vanish."""
    ctx = _Context(d, g, e, est, cfg, estimation_config, estimator)

    def make(i):
        rng = np.random.default_rng(cfg.seed + i)
        return d.with_column(d.outcome, rng.standard_normal(d.n_rows)), e

    values, failed = ctx.replicate(make)
    return _summarize("dummy_outcome", ctx, values, failed, 0.0, _null_band(ctx),
                      {"band": cfg.placebo_band * max(abs(est.value), 1.0)})


def refute_simulated_outcome(d, g, e, est, cfg=RefuterConfig(), *, estimation_config=None, estimator=None):
    """Rebuild the outcome from a fitted linear model with a known effect.

    Y' = fitted covariate part + simulated_beta * T + resampled residuals.
    """
    if e.kind != "backdoor":
        raise RefutationError("simulated_outcome needs a back-door estimand")
    ctx = _Context(d, g, e, est, cfg, estimation_config, estimator)
    beta = est.value if cfg.simulated_beta is None else cfg.simulated_beta
    w = d.matrix(sorted(e.adjustment))
    fit = fit_ols(design(d.t, w), d.y)
    covariate_part = design(w, n=d.n_rows) @ np.delete(fit.coefficients, 1)
    base = covariate_part + beta * d.t

    def make(i):
        rng = np.random.default_rng(cfg.seed + i)
        noise = fit.residuals[rng.integers(0, d.n_rows, size=d.n_rows)]
        return d.with_column(d.outcome, base + noise), e

    values, failed = ctx.replicate(make)
    return _summarize("simulated_outcome", ctx, values, failed, float(beta),
                      detail={"simulated_beta": float(beta)})


def refute_unobserved_common_cause(d, g, e, est, cfg=RefuterConfig(), *, estimation_config=None, estimator=None):
    """Adjust for a simulated confounder built from standardized T and Y.

    For each (s_t, s_y) in the grid, U = s_t z(T) + s_y z(Y) + N(0,1).
    """
    if not cfg.sensitivity_grid:
        raise RefutationError("sensitivity grid is empty")
    ctx = _Context(d, g, e, est, cfg, estimation_config, estimator)
    name = _fresh_name(d, g, "unobserved_common_cause")
    g_new = g.add_common_cause(name, {e.treatment, e.outcome})
    e_new = _reidentify(g_new, g, e, name)
    zt, zy = _standardize(d.t), _standardize(d.y)
    grid, values, failed = [], [], 0
    for k, (s_t, s_y) in enumerate(cfg.sensitivity_grid):
        rng = np.random.default_rng(cfg.seed + k)
        u = s_t * zt + s_y * zy + rng.standard_normal(d.n_rows)
        try:
            effect = float(ctx.estimator(d.with_column(name, u), e_new))
        except CausalError:
            failed += 1
            continue
        values.append(effect)
        grid.append({"strength_on_treatment": s_t, "strength_on_outcome": s_y, "effect": effect})
    if failed * 2 > len(cfg.sensitivity_grid):
        raise RefutationError(f"{failed} of {len(cfg.sensitivity_grid)} grid points failed")
    limit = cfg.sensitivity_band * max(abs(est.value), 1.0)
    drift = max(abs(v - est.value) for v in values)
    detail = {"grid": grid, "max_drift": drift, "band": limit, "skipped": float(failed),
              "seed": float(cfg.seed)}
    return RefutationResult("add_unobserved_common_cause", est.value, float(np.mean(values)),
                            tuple(values), None, bool(drift < limit), detail)


def refute_data_subset(d, g, e, est, cfg=RefuterConfig(), *, estimation_config=None, estimator=None):
    """Re-estimate on random subsets of ``subset_fraction`` of the rows."""
    if cfg.subset_fraction * d.n_rows < MIN_SUBSET_ROWS:
        raise RefutationError(
            f"subset of {cfg.subset_fraction} x {d.n_rows} rows is below {MIN_SUBSET_ROWS}")
    ctx = _Context(d, g, e, est, cfg, estimation_config, estimator)
    values, failed = ctx.replicate(lambda i: (random_subset(d, cfg.subset_fraction, cfg.seed + i), e))
    return _summarize("data_subset", ctx, values, failed, est.value,
                      detail={"subset_fraction": cfg.subset_fraction})


def refute_bootstrap(d, g, e, est, cfg=RefuterConfig(), *, estimation_config=None, estimator=None):
    """Re-estimate on bootstrap resamples."""
    ctx = _Context(d, g, e, est, cfg, estimation_config, estimator)
    values, failed = ctx.replicate(lambda i: (bootstrap_resample(d, cfg.seed + i), e))
    return _summarize("bootstrap", ctx, values, failed, est.value)


REFUTERS = {
    "random_common_cause": refute_random_common_cause,
    "placebo_treatment": refute_placebo_treatment,
    "dummy_outcome": refute_dummy_outcome,
    "simulated_outcome": refute_simulated_outcome,
    "add_unobserved_common_cause": refute_unobserved_common_cause,
    "data_subset": refute_data_subset,
    "bootstrap": refute_bootstrap,
}
REFUTER_NAMES = tuple(REFUTERS)


def applicable_refuters(e: Estimand) -> list:
    return [n for n in REFUTER_NAMES if n != "simulated_outcome" or e.kind == "backdoor"]


def check_refuter_names(names) -> list:
    names = list(names)
    unknown = [n for n in names if n not in REFUTERS]
    if unknown:
        raise RefutationError(
            f"unknown refuter(s) {', '.join(unknown)}; valid names: {', '.join(REFUTER_NAMES)}")
    return names


def run_refuters(names, d: Dataset, g: CausalGraph, e: Estimand, est: EffectEstimate,
                 cfg: RefuterConfig = RefuterConfig(), **kwargs) -> list:
    """Run refuters in the given order; each gets seed ``cfg.seed + its index``
    in REFUTER_NAMES."""
    names = check_refuter_names(names)
    results = []
    for name in names:
        sub = replace(cfg, seed=cfg.seed + REFUTER_NAMES.index(name))
        results.append(REFUTERS[name](d, g, e, est, sub, **kwargs))
    return results
