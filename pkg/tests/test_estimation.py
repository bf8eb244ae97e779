import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from causalpipe.dataset import (Dataset, SyntheticSpec, generate_frontdoor_dataset, generate_iv_dataset,
                                generate_linear_dataset, generate_mediation_dataset, generate_rdd_dataset)
from causalpipe.errors import EstimationError, IncompatibleMethodError
from causalpipe.estimation import (METHODS, EstimationConfig, backdoor_linear_regression, bootstrap_ci,
                                   estimate_effect, frontdoor_two_stage, inverse_propensity_weighting,
                                   iv_two_stage_least_squares, iv_wald, matched_difference,
                                   mediation_two_stage, permutation_pvalue, point_estimate,
                                   propensity_score_matching, propensity_score_stratification,
                                   propensity_scores, regression_discontinuity)
from causalpipe.identification import Estimand

BD_W = Estimand("backdoor", "T", "Y", adjustment={"W0"})
BACKDOOR = [m for m, (k, _) in METHODS.items() if k == "backdoor"]


def cfg(method, **kw):
    return EstimationConfig(method=method, bootstrap_reps=0, permutation_reps=0, **kw)


@pytest.fixture(scope="module")
def confounded():
    return generate_linear_dataset(SyntheticSpec(n=4000, beta=10.0, num_common_causes=1, seed=42))[0]


@pytest.mark.parametrize("method,tol", [
    ("backdoor.linear_regression", 0.15),
    ("backdoor.propensity_score_stratification", 0.5),
    ("backdoor.propensity_score_matching", 0.5),
    ("backdoor.propensity_score_weighting", 0.5),
])
def test_backdoor_estimators_recover_beta(confounded, method, tol):
    assert abs(point_estimate(confounded, BD_W, cfg(method)).value - 10.0) < tol


def test_stratification_hand_fixture():
    # W=0: one treated of four, W=1: three treated of four, so two tied
    # propensity groups land in separate strata.
    w = [0, 0, 0, 0, 1, 1, 1, 1]
    t = [1, 0, 0, 0, 1, 1, 1, 0]
    y = [5, 1, 1, 1, 9, 9, 9, 1]
    d = Dataset.from_columns({"W0": w, "T": t, "Y": y}, "T", "Y")
    value = propensity_score_stratification(d, BD_W, EstimationConfig(strata=2))
    assert value == pytest.approx(6.0, abs=1e-12)


def brute_force_matching(t, y, p):
    n = len(t)
    effects = []
    for i in range(n):
        others = [j for j in range(n) if t[j] != t[i]]
        j = min(others, key=lambda j: (abs(p[i] - p[j]), j))
        y1, y0 = (y[i], y[j]) if t[i] == 1 else (y[j], y[i])
        effects.append(y1 - y0)
    return float(np.mean(effects))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 30), st.booleans())
def test_matching_matches_brute_force(seed, n, coarse):
    rng = np.random.default_rng(seed)
    t = rng.integers(0, 2, n).astype(float)
    t[0], t[1] = 0.0, 1.0
    y = rng.standard_normal(n)
    # Coarse scores force plenty of exact distance ties.
    p = rng.integers(0, 5, n) / 4.0 if coarse else rng.uniform(size=n)
    assert matched_difference(t, y, p) == pytest.approx(brute_force_matching(t, y, p), abs=1e-12)


def test_ipw_balanced_hand_fixture():
    t = np.array([1, 0, 1, 0, 1, 0], dtype=float)
    y = np.array([4.0, 1.0, 6.0, 2.0, 5.0, 0.0])
    d = Dataset.from_columns({"T": t, "Y": y}, "T", "Y")
    e = Estimand("backdoor", "T", "Y")
    np.testing.assert_allclose(propensity_scores(d, e), 0.5, atol=1e-12)
    expected = (2 * y[t == 1].sum() - 2 * y[t == 0].sum()) / len(y)
    assert inverse_propensity_weighting(d, e) == pytest.approx(expected, abs=1e-9)


def test_linear_regression_no_adjustment_is_difference_in_means():
    t = np.array([1, 0, 1, 0], dtype=float)
    y = np.array([3.0, 1.0, 5.0, 2.0])
    d = Dataset.from_columns({"T": t, "Y": y}, "T", "Y")
    assert backdoor_linear_regression(d, Estimand("backdoor", "T", "Y")) == pytest.approx(2.5)


def test_non_binary_treatment_rejected():
    d = generate_linear_dataset(SyntheticSpec(n=50, beta=1.0, treatment_is_binary=False))[0]
    with pytest.raises(EstimationError, match="binary"):
        propensity_score_matching(d, Estimand("backdoor", "T", "Y"))


def test_incompatible_method():
    d = generate_iv_dataset(200, 1.0, 0)[0]
    with pytest.raises(IncompatibleMethodError):
        point_estimate(d, Estimand("iv", "T", "Y", instruments={"Z"}), cfg("backdoor.linear_regression"))
    with pytest.raises(IncompatibleMethodError):
        iv_wald(d, Estimand("backdoor", "T", "Y"))
    with pytest.raises(IncompatibleMethodError):
        point_estimate(d, Estimand("backdoor", "T", "Y"), cfg("no.such_method"))


def test_wald_hand_fixture():
    z = [1, 1, 1, 1, 0, 0, 0, 0]
    t = [1, 1, 1, 0, 1, 0, 0, 0]
    y = [10, 6, 6, 2, 6, 2, 2, 2]
    d = Dataset.from_columns({"Z": z, "T": t, "Y": y}, "T", "Y")
    e = Estimand("iv", "T", "Y", instruments={"Z"})
    # (6 - 3) / (0.75 - 0.25)
    assert iv_wald(d, e) == pytest.approx(6.0)
    assert iv_two_stage_least_squares(d, e) == pytest.approx(6.0, abs=1e-12)


def test_iv_recovers_beta():
    d, _, beta = generate_iv_dataset(20000, 10.0, 7)
    e = Estimand("iv", "T", "Y", instruments={"Z"})
    assert abs(iv_wald(d, e) - beta) < 1.0
    assert iv_wald(d, e) == pytest.approx(iv_two_stage_least_squares(d, e), abs=1e-9)


def test_weak_instrument():
    d = Dataset.from_columns({"Z": [0, 1, 0, 1], "T": [1, 1, 0, 0], "Y": [1, 2, 3, 4]}, "T", "Y")
    e = Estimand("iv", "T", "Y", instruments={"Z"})
    with pytest.raises(EstimationError, match="weak"):
        iv_wald(d, e)
    with pytest.raises(EstimationError, match="weak"):
        iv_two_stage_least_squares(d, e)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_wald_equals_2sls(seed):
    d = generate_iv_dataset(300, 2.0, seed)[0]
    e = Estimand("iv", "T", "Y", instruments={"Z"})
    assert iv_wald(d, e) == pytest.approx(iv_two_stage_least_squares(d, e), rel=1e-8, abs=1e-8)


def rdd_cfg(**kw):
    return cfg("iv.regression_discontinuity", rdd_running_variable="R", rdd_cutoff=0.0,
               rdd_bandwidth=0.5, **kw)


RDD_E = Estimand("iv", "T", "Y", instruments={"R"})


def test_rdd_exact_and_zero_jump():
    d = generate_rdd_dataset(400, 5.0, 2.0, 0.0, 1)[0]
    assert regression_discontinuity(d, RDD_E, rdd_cfg()) == pytest.approx(5.0, abs=1e-10)
    flat = d.with_column("Y", d.column("R"))
    assert regression_discontinuity(flat, RDD_E, rdd_cfg()) == pytest.approx(0.0, abs=1e-10)


def test_rdd_noisy():
    d = generate_rdd_dataset(4000, 5.0, 2.0, 1.0, 3)[0]
    assert abs(regression_discontinuity(d, RDD_E, rdd_cfg()) - 5.0) < 0.3


def test_rdd_requirements():
    d = generate_rdd_dataset(40, 5.0, 2.0, 0.0, 1)[0]
    with pytest.raises(EstimationError, match="rows"):
        regression_discontinuity(d, RDD_E, rdd_cfg())
    with pytest.raises(EstimationError):
        regression_discontinuity(d, RDD_E, cfg("iv.regression_discontinuity"))


def test_frontdoor_recovers_product():
    d, _, truth = generate_frontdoor_dataset(20000, 2.0, 3.0, 11)
    e = Estimand("frontdoor", "T", "Y", mediators={"M"})
    assert abs(frontdoor_two_stage(d, e) - truth) < 0.3


def test_mediation_recovers_components():
    d, _, (direct, indirect) = generate_mediation_dataset(20000, 2.0, 3.0, 1.0, 5)
    e = Estimand("mediation", "T", "Y", mediators={"M"}, adjustment={"W"})
    nde, nie = mediation_two_stage(d, e)
    assert abs(nde - direct) < 0.1 and abs(nie - indirect) < 0.2
    assert point_estimate(d, e, cfg("mediation.two_stage_regression")).value == pytest.approx(nde + nie)


def test_multiple_mediators_rejected():
    d = Dataset.from_columns({"T": [0, 1, 0, 1], "M1": [1, 2, 3, 5], "M2": [0, 1, 1, 0],
                              "Y": [1, 2, 3, 4]}, "T", "Y")
    with pytest.raises(EstimationError, match="one mediator"):
        frontdoor_two_stage(d, Estimand("frontdoor", "T", "Y", mediators={"M1", "M2"}))


def random_backdoor_data(seed, n=300):
    d = generate_linear_dataset(SyntheticSpec(n=n, beta=2.0, num_common_causes=1, seed=seed))[0]
    return d


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from(BACKDOOR))
def test_label_flip_negates(seed, method):
    d = random_backdoor_data(seed)
    flipped = d.with_column("T", 1.0 - d.t)
    a = point_estimate(d, BD_W, cfg(method)).value
    b = point_estimate(flipped, BD_W, cfg(method)).value
    assert b == pytest.approx(-a, rel=1e-6, abs=1e-6)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from(BACKDOOR), st.floats(0.01, 100.0))
def test_outcome_scale_equivariance(seed, method, c):
    d = random_backdoor_data(seed)
    scaled = d.with_column("Y", c * d.y)
    a = point_estimate(d, BD_W, cfg(method)).value
    b = point_estimate(scaled, BD_W, cfg(method)).value
    assert b == pytest.approx(c * a, rel=1e-8, abs=1e-9)


def test_bootstrap_constant_outcome():
    d = random_backdoor_data(0, 100).with_column("Y", np.full(100, 3.0))
    low, high = bootstrap_ci(d, BD_W, EstimationConfig(bootstrap_reps=50))
    assert abs(low) < 1e-10 and abs(high) < 1e-10


def test_bootstrap_deterministic_and_minimum():
    d = random_backdoor_data(1, 100)
    c = EstimationConfig(bootstrap_reps=40, seed=3)
    assert bootstrap_ci(d, BD_W, c) == bootstrap_ci(d, BD_W, c)
    with pytest.raises(EstimationError):
        bootstrap_ci(d, BD_W, EstimationConfig(bootstrap_reps=10))


def test_bootstrap_failures_counted():
    d = random_backdoor_data(1, 50)
    calls = itertools.count()

    def flaky(data, e):
        if next(calls) % 2:
            raise EstimationError("boom")
        return 1.0

    assert bootstrap_ci(d, BD_W, EstimationConfig(bootstrap_reps=20), flaky) == (1.0, 1.0)

    def broken(data, e):
        raise EstimationError("boom")

    with pytest.raises(EstimationError, match="replications failed"):
        bootstrap_ci(d, BD_W, EstimationConfig(bootstrap_reps=20), broken)


def test_permutation_exact_effect():
    t = np.tile([0.0, 1.0], 50)
    d = Dataset.from_columns({"T": t, "Y": 10 * t}, "T", "Y")
    p = permutation_pvalue(d, Estimand("backdoor", "T", "Y"), EstimationConfig(permutation_reps=99))
    assert p == pytest.approx(0.01)


@pytest.mark.parametrize("seed", range(1, 6))
def test_permutation_null(seed):
    rng = np.random.default_rng(seed)
    d = Dataset.from_columns({"T": rng.integers(0, 2, 200), "Y": rng.standard_normal(200)}, "T", "Y")
    p = permutation_pvalue(d, Estimand("backdoor", "T", "Y"), EstimationConfig(permutation_reps=100, seed=seed))
    assert 0.0 < p <= 1.0
    assert p >= 0.05


def test_estimate_effect_full(confounded):
    est = estimate_effect(confounded, BD_W, EstimationConfig(bootstrap_reps=50, permutation_reps=20))
    assert est.ci[0] <= est.value <= est.ci[1]
    assert est.p_value == pytest.approx(1 / 21)
    d = est.to_dict()
    assert d["method"] == "backdoor.linear_regression" and d["estimand"]["adjustment"] == ["W0"]
    assert estimate_effect(confounded, BD_W, EstimationConfig(bootstrap_reps=50, permutation_reps=20)).to_dict() == d


def test_config_validation():
    for bad in ({"propensity_clip": 0.0}, {"strata": 1}, {"ci_level": 1.0}, {"bootstrap_reps": -1}):
        with pytest.raises(ValueError):
            EstimationConfig(**bad)
