import math

import numpy as np
import pytest
from scipy import stats

from powersim import engine as en
from powersim import oracle
from powersim import scenarios as sc
from powersim.exceptions import DesignError, ParameterError, SimulationError
from powersim.scenarios import Dataset, Scenario
from powersim.testkit import TestResult, invalid


def _flaky(share_invalid: float) -> Scenario:
    """Scenario whose test is invalid on a fixed share of replications."""

    def gen(s, n, rng):
        return Dataset("u", {"u": rng.uniform(2)})

    def bind(s, d, rng):
        u_invalid, u_p = d["u"]
        if u_invalid < s.p("share"):
            return invalid("forced")
        return TestResult(statistic=0.0, p_value=float(u_p))

    return Scenario("flaky", "flaky", {"share": share_invalid}, {"share": 0.0}, 10, gen, bind, min_n=1)


def test_wilson_interval_against_statsmodels():
    from statsmodels.stats.proportion import proportion_confint

    for x, n in [(0, 20), (4000, 5000), (37, 100), (100, 100)]:
        lo, hi = en.wilson_interval(x, n)
        ref = proportion_confint(x, n, alpha=0.05, method="wilson")
        assert (lo, hi) == pytest.approx(ref, abs=1e-12)


def test_estimate_fields_and_invariants(suite_seed):
    est = en.estimate_power(sc.get("t-one-sample"), 30, reps=2000, seed=suite_seed)
    assert est.rejections == int(np.sum(est.p_values < 0.05))
    assert est.power == est.rejections / 2000
    assert est.mc_se == math.sqrt(est.power * (1 - est.power) / 2000)
    assert est.ci95[0] <= est.power <= est.ci95[1]
    assert est.invalid_count == 0
    report = est.as_report()
    assert set(report) == {
        "scenario", "params", "n", "alpha", "reps", "seed", "power", "mc_se", "ci95", "invalid", "elapsed_ms",
    }


def test_rejection_is_strict(suite_seed):
    est = en.estimate_power(sc.get("binom-exact"), 10, reps=300, seed=suite_seed)
    p = est.p_values
    # with alpha exactly equal to an attainable p-value, that value does not reject
    attained = float(np.min(p))
    strict = en.summarize(sc.get("binom-exact"), 10, attained, suite_seed, p, "count")
    assert strict.rejections == int(np.sum(p < attained)) == 0


def test_alpha_one_rejects_nearly_everything(suite_seed):
    est = en.estimate_power(sc.get("t-one-sample").null_variant(), 30, alpha=1.0, reps=500, seed=suite_seed)
    assert est.power == 1.0
    with pytest.raises(ParameterError):
        en.estimate_power(sc.get("t-one-sample"), 30, alpha=0.0, reps=10)


def test_null_t_calibration(suite_seed):
    est = en.estimate_size(sc.get("t-one-sample"), 30, reps=10_000, seed=suite_seed)
    assert abs(est.power - 0.05) <= 0.0065


def test_exact_binomial_power_at_default_n(suite_seed):
    est = en.estimate_power(sc.get("binom-exact"), 9000, reps=2000, seed=suite_seed)
    assert 0.76 <= est.power <= 0.84


def test_invalid_policies(suite_seed):
    low = _flaky(0.05)
    counted = en.estimate_power(low, 10, alpha=0.5, reps=4000, seed=suite_seed)
    excluded = en.estimate_power(low, 10, alpha=0.5, reps=4000, seed=suite_seed, invalid_policy="exclude")
    assert counted.invalid_count == excluded.invalid_count > 0
    assert counted.rejections == excluded.rejections
    assert counted.reps == 4000 and excluded.reps == 4000 - excluded.invalid_count
    assert counted.power < excluded.power
    high = _flaky(0.3)
    with pytest.raises(SimulationError, match="invalid"):
        en.estimate_power(high, 10, reps=500, seed=suite_seed)
    lenient = en.estimate_power(high, 10, reps=500, seed=suite_seed, invalid_policy="lenient")
    assert lenient.invalid_count > 0.1 * 500
    with pytest.raises(ParameterError):
        en.estimate_power(low, 10, reps=10, invalid_policy="ignore")


def test_design_errors_propagate():
    with pytest.raises(DesignError):
        en.estimate_power(sc.get("regression-multiple"), 31, reps=10, seed=1)


@pytest.mark.parametrize("scenario_id", ["t-one-sample", "randomization-paired", "anova-rm-two-factor"])
def test_worker_count_invariance(scenario_id, suite_seed):
    s = sc.get(scenario_id)
    reps = 40 if s.nested else 400
    one = en.estimate_power(s, s.default_n, reps=reps, seed=suite_seed, workers=1)
    two = en.estimate_power(s, s.default_n, reps=reps, seed=suite_seed, workers=2)
    assert one.power == two.power
    assert np.array_equal(one.p_values, two.p_values, equal_nan=True)


def test_overridden_params_survive_worker_processes(suite_seed):
    s = sc.get("t-one-sample").with_params(delta=0)
    one = en.estimate_power(s, 30, reps=100, seed=suite_seed, workers=1)
    two = en.estimate_power(s, 30, reps=100, seed=suite_seed, workers=2)
    assert np.array_equal(one.p_values, two.p_values)


def test_seed_changes_result():
    s = sc.get("t-one-sample")
    a = en.estimate_power(s, 30, reps=200, seed=1)
    b = en.estimate_power(s, 30, reps=200, seed=2)
    assert not np.array_equal(a.p_values, b.p_values)
    assert en.estimate_power(s, 30, reps=5).seed >= 0


def test_power_curve(suite_seed):
    s = sc.get("t-one-sample")
    curve = en.power_curve(s, [10, 20, 30, 40], reps=2000, seed=suite_seed)
    assert [e.n for e in curve] == [10, 20, 30, 40]
    assert curve[1].power < 0.8 < curve[3].power
    # noncentral-t oracle places 0.8 near n = 30
    assert abs(curve[2].power - oracle.power_t_one_sample(30, 4, 7.5).power) < 4 * curve[2].mc_se
    single = en.power_curve(s, [30], reps=300, seed=suite_seed)
    assert single[0] == en.estimate_power(s, 30, reps=300, seed=suite_seed)
    # evaluations use disjoint streams
    assert not np.array_equal(curve[0].p_values[:50], en.power_curve(s, [10, 10], reps=50, seed=suite_seed)[1].p_values)
    with pytest.raises(ParameterError):
        en.power_curve(s, [])


def test_solver_trivial_target(suite_seed):
    s = sc.get("t-one-sample")
    res = en.solve_sample_size(s, 0.05, reps=400, seed=suite_seed)
    assert res.n_star == s.smallest_n()


def test_solver_respects_granularity(suite_seed):
    s = sc.get("regression-multiple")
    res = en.solve_sample_size(s, 0.6, reps=400, seed=suite_seed)
    assert res.n_star % 15 == 0
    assert res.estimate.power >= 0.6 - res.estimate.mc_se
    ns = [n for n, _ in res.trace]
    assert all(n % 15 == 0 for n in ns)


def test_solver_t_one_sample_matches_oracle(suite_seed):
    s = sc.get("t-one-sample")
    res = en.solve_sample_size(s, 0.8, reps=2000, seed=suite_seed)
    exact_n = next(n for n in range(2, 100) if oracle.power_t_one_sample(n, 4, 7.5).power >= 0.8)
    assert abs(res.n_star - exact_n) <= 3
    trace = res.sorted_trace()
    # powers increase with n up to Monte Carlo noise
    for (n1, e1), (n2, e2) in zip(trace, trace[1:]):
        if n2 > n1:
            assert e2.power >= e1.power - 3 * math.hypot(e1.mc_se, e2.mc_se)


@pytest.mark.slow
def test_solver_binomial_reaches_default_n(suite_seed):
    res = en.solve_sample_size(sc.get("binom-exact"), 0.8, reps=2000, seed=suite_seed, n_start=1000)
    assert abs(res.n_star - 9000) <= 500


def test_solver_unreachable(suite_seed):
    s = sc.get("t-one-sample").with_params(delta=0)
    with pytest.raises(en.TargetUnreachable) as info:
        en.solve_sample_size(s, 0.9, reps=100, seed=suite_seed, n_max=100)
    assert len(info.value.trace) > 0
    with pytest.raises(ParameterError):
        en.solve_sample_size(s, 1.0, reps=10)


def test_ci_width_known_variance():
    est = en.ci_width("mean-known-var", 55, reps=10, seed=1, sigma=7.5)
    assert est.mean_width == pytest.approx(2 * stats.norm.ppf(0.975) * 7.5 / math.sqrt(55), abs=1e-12)
    assert est.mean_width == pytest.approx(3.965, abs=1e-3)
    assert est.sd_width == pytest.approx(0.0, abs=1e-12)


def test_clopper_pearson_against_statsmodels():
    from statsmodels.stats.proportion import proportion_confint

    for x, n in [(0, 10), (3, 10), (10, 10), (4900, 9800)]:
        assert en.clopper_pearson(x, n, 0.95) == pytest.approx(
            proportion_confint(x, n, alpha=0.05, method="beta"), abs=1e-12
        )


@pytest.mark.parametrize("kind", en.CI_KINDS)
def test_ci_width_level_monotone(kind):
    low = en.ci_width(kind, 40, level=0.90, reps=200, seed=3)
    high = en.ci_width(kind, 40, level=0.99, reps=200, seed=3)
    assert np.all(high.widths >= low.widths)
    assert np.all(low.widths >= 0)


def test_ci_width_errors():
    with pytest.raises(ParameterError):
        en.ci_width("median", 10)
    with pytest.raises(ParameterError):
        en.ci_width("mean-t", 1)
    with pytest.raises(ParameterError):
        en.ci_width("mean-t", 10, level=1.0)
    with pytest.raises(ParameterError):
        en.ci_width("mean-t", 10, rho=0.3)


def test_ci_width_t_against_expectation():
    # E[s] = sigma * c4(n)
    n = 65
    c4 = math.sqrt(2 / (n - 1)) * math.exp(math.lgamma(n / 2) - math.lgamma((n - 1) / 2))
    expected = 2 * stats.t.ppf(0.975, n - 1) * 7.5 * c4 / math.sqrt(n)
    est = en.ci_width("mean-t", n, reps=4000, seed=4)
    assert abs(est.mean_width - expected) < 4 * est.sd_width / math.sqrt(4000)
