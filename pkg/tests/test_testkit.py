import itertools
import math
from functools import lru_cache

import numpy as np
import pytest
from scipy import stats

import oracles
from powersim import testkit as tk
from powersim.exceptions import ParameterError
from powersim.probkit import ChiSquared, LogNormal, Normal, RandomSource, Uniform


# -- exact tests against enumeration ------------------------------------------------


@pytest.mark.parametrize("p0", [0.5, 0.3, 0.515, 0.9])
def test_binom_exact_matches_enumeration(p0):
    for n in range(1, 11):
        for x in range(n + 1):
            got = tk.binom_exact_test(x, n, p0).p_value
            assert abs(got - oracles.binom_two_sided_enumerated(x, n, p0)) <= 1e-12


def test_binom_exact_examples():
    assert tk.binom_exact_test(5, 10, 0.5).p_value == pytest.approx(1.0, abs=1e-15)
    assert tk.binom_exact_test(8, 10, 0.5).p_value == pytest.approx(112 / 1024, abs=1e-15)
    assert tk.binom_exact_test(0, 10, 0.5).p_value == pytest.approx(2 / 1024, abs=1e-15)


def test_binom_exact_against_scipy_large_n():
    for x in (4400, 4500, 4600, 4640):
        ref = stats.binomtest(x, 9000, 0.5).pvalue
        assert tk.binom_exact_test(x, 9000, 0.5).p_value == pytest.approx(ref, rel=1e-9, abs=1e-15)


def test_binom_exact_errors():
    with pytest.raises(ParameterError):
        tk.binom_exact_test(11, 10, 0.5)
    with pytest.raises(ParameterError):
        tk.binom_exact_test(1, 10, 1.0)


def test_sign_matches_enumeration():
    for n in range(1, 11):
        for below in range(n + 1):
            x = np.array([-1.0] * below + [1.0] * (n - below))
            got = tk.sign_test(x, 0.0).p_value
            assert abs(got - oracles.sign_enumerated(below, n)) <= 1e-12


def test_sign_examples_and_ties():
    assert tk.sign_test(np.arange(1.0, 6.0), 0.0).p_value == pytest.approx(0.0625, abs=1e-15)
    assert tk.sign_test(np.r_[np.ones(5), -np.ones(5)], 0.0).p_value == 1.0
    # observations equal to the median are dropped
    assert tk.sign_test([0.0, 0.0, 1.0, 2.0, 3.0], 0.0).df == 3
    assert not tk.sign_test([2.0, 2.0], 2.0).valid


def _signed_rank_reference(n):
    @lru_cache(maxsize=None)
    def p_for(v):
        return oracles.signed_rank_enumerated(list(range(1, n + 1)), v)

    return p_for


@pytest.mark.parametrize("n", range(1, 11))
def test_signed_rank_matches_enumeration(n):
    reference = _signed_rank_reference(n)
    magnitudes = np.arange(1.0, n + 1)
    for signs in itertools.product((-1.0, 1.0), repeat=n):
        x = magnitudes * np.array(signs)
        res = tk.wilcoxon_signed_rank(x, 0.0)
        v = int(magnitudes[np.array(signs) > 0].sum())
        assert res.statistic == v
        assert abs(res.p_value - reference(v)) <= 1e-12


@pytest.mark.parametrize("n,m", [(n, m) for n in range(1, 10) for m in range(1, 10) if n + m <= 10])
def test_rank_sum_matches_enumeration(n, m):
    cache = {}
    for chosen in itertools.combinations(range(1, n + m + 1), n):
        x = np.array(chosen, dtype=float)
        y = np.array(sorted(set(range(1, n + m + 1)) - set(chosen)), dtype=float)
        res = tk.wilcoxon_rank_sum(x, y)
        w = sum(chosen) - n * (n + 1) // 2
        assert res.statistic == w
        if w not in cache:
            cache[w] = oracles.rank_sum_enumerated(n, m, w)
        assert abs(res.p_value - cache[w]) <= 1e-12


def test_rank_examples():
    assert tk.wilcoxon_signed_rank([1.0, 2.0, 3.0]).p_value == pytest.approx(0.25, abs=1e-15)
    assert tk.wilcoxon_rank_sum([4.0, 5.0, 6.0], [1.0, 2.0, 3.0]).p_value == pytest.approx(0.1, abs=1e-15)
    same = tk.wilcoxon_rank_sum([1.0, 4.0, 5.0, 8.0], [2.0, 3.0, 6.0, 7.0])
    assert same.statistic == 8 and same.p_value >= 0.88


def test_signed_rank_centre_of_null():
    # n(n+1)/4 = 10.5 is not attainable at n = 6; V = 10 and V = 11 straddle it
    for positive in ((1, 4, 5), (2, 3, 6)):
        x = np.array([r if r in positive else -r for r in range(1, 7)], dtype=float)
        assert tk.wilcoxon_signed_rank(x).p_value >= 0.99


def test_rank_tests_against_scipy():
    rng = np.random.default_rng(4)
    x, y = rng.normal(size=12), rng.normal(0.8, 1, size=15)
    assert tk.wilcoxon_signed_rank(x).p_value == pytest.approx(stats.wilcoxon(x, method="exact").pvalue, rel=1e-12)
    assert tk.wilcoxon_rank_sum(x, y).p_value == pytest.approx(
        stats.mannwhitneyu(x, y, method="exact").pvalue, rel=1e-12
    )
    big_x, big_y = rng.normal(size=40), rng.normal(0.5, 1, size=45)
    assert tk.wilcoxon_rank_sum(big_x, big_y).p_value == pytest.approx(
        stats.mannwhitneyu(big_x, big_y, method="asymptotic", use_continuity=True).pvalue, rel=1e-10
    )
    big_d = rng.normal(0.3, 1, size=40)
    assert tk.wilcoxon_signed_rank(big_d).p_value == pytest.approx(
        stats.wilcoxon(big_d, method="approx", correction=True).pvalue, rel=1e-10
    )


def test_rank_ties_fall_back_to_normal():
    res = tk.wilcoxon_rank_sum([1.0, 2.0, 2.0], [2.0, 3.0, 4.0])
    assert res.note == "normal approximation"
    assert not tk.wilcoxon_signed_rank([0.0, 0.0]).valid
    assert not tk.wilcoxon_rank_sum([], [1.0]).valid


def test_rank_count_tables_sum_to_patterns():
    assert tk.signrank_counts(10).sum() == 2**10
    assert tk.ranksum_counts(5, 7).sum() == math.comb(12, 5)


# -- one-sample parametric ----------------------------------------------------------


def test_prop_score_examples():
    res = tk.prop_score_test(50, 100, 0.5)
    assert res.statistic == 0 and res.p_value == 1.0
    res = tk.prop_score_test(60, 100, 0.5)
    assert res.statistic == pytest.approx(4.0, abs=1e-12)
    assert res.p_value == pytest.approx(2 * stats.norm.sf(2.0), abs=1e-12)
    with pytest.raises(ParameterError):
        tk.prop_score_test(3, 10, 0.0)


def test_z_one_sample_examples():
    assert tk.z_test_one_sample([1001, 999, 1003, 997], 1000, 7.5).p_value == 1.0
    x = np.full(30, 1004.0)
    res = tk.z_test_one_sample(x, 1000, 7.5)
    assert res.statistic == pytest.approx(2.921, abs=1e-3)
    assert res.p_value == pytest.approx(2 * stats.norm.sf(4 * math.sqrt(30) / 7.5), abs=1e-14)
    assert res.p_value == pytest.approx(0.00349, abs=1e-5)
    assert not tk.z_test_one_sample([], 0, 1).valid


def test_t_one_sample_examples():
    assert tk.t_test_one_sample([1.0, 2.0, 3.0], 2.0).p_value == 1.0
    res = tk.t_test_one_sample(np.arange(1.0, 7.0), 0.0)
    assert res.statistic == pytest.approx(4.583, abs=1e-3)
    assert res.df == 5
    # two-sided t tail from the independent beta continued fraction
    t = res.statistic
    assert res.p_value == pytest.approx(oracles.inc_beta(2.5, 0.5, 5 / (5 + t * t)), abs=1e-12)
    assert not tk.t_test_one_sample([3.0, 3.0, 3.0]).valid
    assert not tk.t_test_one_sample([3.0]).valid


def test_paired_t_is_t_on_differences():
    rng = np.random.default_rng(1)
    x, y = rng.normal(size=20), rng.normal(size=20)
    assert tk.paired_t_test(x, y) == tk.t_test_one_sample(x - y, 0.0)
    assert tk.paired_t_test(x, y).p_value == pytest.approx(stats.ttest_rel(x, y).pvalue, rel=1e-12)


def test_variance_test():
    rng = np.random.default_rng(2)
    x = rng.normal(0, 8, size=50)
    a = tk.variance_chisq_test(x, 7.5**2)
    b = tk.variance_chisq_test(3 * x, 9 * 7.5**2)
    assert a.p_value == pytest.approx(b.p_value, rel=1e-12)
    # sample variance forced to exactly sigma0^2
    z = (x - x.mean()) / x.std(ddof=1) * 7.5
    res = tk.variance_chisq_test(z, 7.5**2)
    lower = oracles.inc_gamma(24.5, 24.5)
    assert res.statistic == pytest.approx(49.0, abs=1e-9)
    assert res.p_value == pytest.approx(2 * min(lower, 1 - lower), abs=1e-9)
    flat = tk.variance_chisq_test([2.0, 2.0, 2.0], 1.0)
    assert flat.valid and flat.statistic == 0.0


def test_chisq_gof():
    res = tk.chisq_gof([25, 25, 50], [0.25, 0.25, 0.5])
    assert res.statistic == 0 and res.p_value == 1.0
    res = tk.chisq_gof([10, 20], [0.5, 0.5])
    assert res.statistic == pytest.approx(10 / 3, abs=1e-12)
    assert res.df == 1
    assert res.p_value == pytest.approx(1 - oracles.inc_gamma(0.5, 5 / 3), abs=1e-12)
    assert res.p_value == pytest.approx(0.0679, abs=1e-4)
    counts = [40, 55, 48, 52, 50, 55]
    assert tk.chisq_gof(counts, [1 / 6] * 6).p_value == pytest.approx(stats.chisquare(counts).pvalue, rel=1e-12)
    assert "below 1" in tk.chisq_gof([1, 1, 0], [0.9, 0.05, 0.05]).note
    with pytest.raises(ParameterError):
        tk.chisq_gof([1, 2, 3], [1 / 3] * 3, df_reduction=2)
    with pytest.raises(ParameterError):
        tk.chisq_gof([1, 2], [0.5, 0.6])


def test_chisq_gof_df_reduction():
    counts = [12, 30, 41, 17]
    full = tk.chisq_gof(counts, [0.1, 0.3, 0.4, 0.2])
    reduced = tk.chisq_gof(counts, [0.1, 0.3, 0.4, 0.2], df_reduction=2)
    assert reduced.statistic == full.statistic
    assert reduced.df == 1 and full.df == 3


def test_binning_and_model_probs():
    assert list(tk.bin_continuous([-1.0, 1.0], [0.0])) == [1, 1]
    # right-closed bins: a value on a breakpoint goes to the lower bin
    assert list(tk.bin_continuous([0.0, 0.5, 1.0, 1.5], [0.0, 1.0])) == [1, 2, 1]
    probs = tk.model_probs(Normal(100, 15), np.arange(80, 121, 5))
    assert probs.size == 10
    assert probs.sum() == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ParameterError):
        tk.bin_continuous([1.0], [1.0, 0.0])


def test_ks_examples_and_scipy():
    res = tk.ks_test_one_sample([0.5], Uniform(0, 1))
    assert res.statistic == pytest.approx(0.5)
    rng = np.random.default_rng(7)
    for n in (10, 60, 100, 250):
        x = rng.normal(100, 17, size=n)
        ref = stats.kstest(x, stats.norm(100, 15).cdf, method="exact" if n <= 100 else "asymp")
        got = tk.ks_test_one_sample(x, Normal(100, 15))
        assert got.statistic == pytest.approx(ref.statistic, abs=1e-14)
        assert got.p_value == pytest.approx(ref.pvalue, rel=1e-8, abs=1e-14)


# -- two-sample ----------------------------------------------------------------------


def test_two_sample_t_against_scipy():
    rng = np.random.default_rng(3)
    x, y = rng.normal(0, 1, 30), rng.normal(0.5, 2, 25)
    for pooled in (True, False):
        ref = stats.ttest_ind(x, y, equal_var=pooled)
        got = tk.t_test_two_sample(x, y, pooled=pooled)
        assert got.statistic == pytest.approx(ref.statistic, rel=1e-12)
        assert got.p_value == pytest.approx(ref.pvalue, rel=1e-10)
    same = tk.t_test_two_sample([1.0, 2.0, 3.0], [3.0, 1.0, 2.0])
    assert same.statistic == 0 and same.p_value == 1.0
    assert not tk.t_test_two_sample([1.0, 1.0], [2.0, 2.0]).valid


def test_z_two_sample():
    x, y = np.full(85, 1004.0), np.full(70, 1000.0)
    res = tk.z_test_two_sample(x, y, 7.0, 10.0)
    z = 4 / math.sqrt(49 / 85 + 100 / 70)
    assert res.statistic == pytest.approx(z, rel=1e-12)
    assert res.p_value == pytest.approx(2 * stats.norm.sf(z), rel=1e-12)


def test_var_ratio():
    rng = np.random.default_rng(5)
    x, y = rng.normal(0, 2, 45), rng.normal(0, 1, 40)
    a, b = tk.var_ratio_f_test(x, y), tk.var_ratio_f_test(y, x)
    assert a.statistic == pytest.approx(1 / b.statistic, rel=1e-12)
    assert a.p_value == pytest.approx(b.p_value, rel=1e-10)
    lower = stats.f(44, 39).cdf(a.statistic)
    assert a.p_value == pytest.approx(2 * min(lower, 1 - lower), rel=1e-10)
    same = tk.var_ratio_f_test(x, x)
    assert same.statistic == 1.0
    assert not tk.var_ratio_f_test(x, np.ones(5)).valid


def test_randomization_unpaired():
    rng = RandomSource(1)
    assert not tk.randomization_test_unpaired(np.ones(5), np.ones(5), 100, rng).valid
    x = np.array([1.0, 2.0, 3.0, 4.0])
    res = tk.randomization_test_unpaired(x, x.copy(), 400, rng)
    assert res.p_value >= 0.95
    data = np.random.default_rng(6)
    a, b = data.normal(0, 1, 20), data.normal(1.5, 1, 20)
    res = tk.randomization_test_unpaired(a, b, 2000, RandomSource(2))
    assert res.p_value < 0.01
    # same stream gives the same answer
    again = tk.randomization_test_unpaired(a, b, 2000, RandomSource(2))
    assert again == res
    with pytest.raises(ParameterError):
        tk.randomization_test_unpaired(a, b, 0, rng)


def test_randomization_matches_exact_permutation_distribution():
    # small enough to enumerate every relabelling: Monte Carlo p tracks the exact share
    x, y = np.array([2.1, 3.5, 4.0, 5.2]), np.array([1.0, 1.7, 2.9, 0.4, 2.2])
    pooled = np.concatenate((x, y))
    observed = tk.t_test_two_sample(x, y).p_value
    hits = []
    for chosen in itertools.combinations(range(9), 4):
        mask = np.zeros(9, bool)
        mask[list(chosen)] = True
        hits.append(tk.t_test_two_sample(pooled[mask], pooled[~mask]).p_value <= observed + 1e-15)
    exact = np.mean(hits)
    mc = tk.randomization_test_unpaired(x, y, 20000, RandomSource(3)).p_value
    assert abs(mc - exact) < 4 * math.sqrt(exact * (1 - exact) / 20000)


def test_randomization_paired():
    d = np.array([1.2, 0.8, 2.5, 1.9, 0.3, 1.1, 2.2, 0.9])
    res = tk.randomization_test_paired(d, 4000, RandomSource(4))
    # exact sign-flip distribution over 2^8 patterns
    observed = tk.t_test_one_sample(d).p_value
    flips = [tk.t_test_one_sample(d * np.array(s)).p_value <= observed + 1e-15 for s in itertools.product((-1, 1), repeat=8)]
    exact = np.mean(flips)
    assert abs(res.p_value - exact) < 4 * math.sqrt(exact * (1 - exact) / 4000) + 1e-3
    assert not tk.randomization_test_paired([1.0], 10, RandomSource(4)).valid


# -- association ---------------------------------------------------------------------


def test_contingency():
    res = tk.chisq_contingency([[10, 10], [10, 10]])
    assert res.statistic == 0 and res.p_value == 1.0
    res = tk.chisq_contingency([[20, 10], [10, 20]])
    assert res.statistic == pytest.approx(60 * (400 - 100) ** 2 / (30 * 30 * 30 * 30), rel=1e-12)
    assert res.statistic == pytest.approx(20 / 3, rel=1e-12)
    assert res.p_value == pytest.approx(0.0098, abs=1e-4)
    tab = np.array([[12, 30, 8], [20, 14, 16]])
    ref = stats.chi2_contingency(tab, correction=False)
    got = tk.chisq_contingency(tab)
    assert got.statistic == pytest.approx(ref.statistic, rel=1e-12)
    assert got.p_value == pytest.approx(ref.pvalue, rel=1e-10)
    assert "below 5" in tk.chisq_contingency([[2, 3], [4, 5]]).note
    assert not tk.chisq_contingency([[0, 0], [4, 5]]).valid
    with pytest.raises(ParameterError):
        tk.ContingencyTable(np.array([[1, -1], [2, 3]]))


def test_cor_test():
    rng = np.random.default_rng(8)
    x = rng.normal(size=90)
    y = 0.3 * x + rng.normal(size=90)
    res = tk.cor_test(x, y)
    ref = stats.pearsonr(x, y)
    assert res.p_value == pytest.approx(ref.pvalue, rel=1e-9)
    # r = 0.3 exactly at n = 90
    t = 0.3 * math.sqrt(88) / math.sqrt(1 - 0.09)
    assert t == pytest.approx(2.95014, abs=1e-5)
    assert tk._t_two_sided(t, 88) == pytest.approx(0.0041, abs=1e-4)
    r = np.corrcoef(x, y)[0, 1]
    fisher = tk.cor_test(x, y, rho0=r)
    assert fisher.statistic == pytest.approx(0.0, abs=1e-12) and fisher.p_value == pytest.approx(1.0)
    orth = tk.cor_test([1.0, 2.0, 3.0, 4.0], [1.0, -1.0, -1.0, 1.0])
    assert orth.statistic == 0 and orth.p_value == 1.0
    assert not tk.cor_test(np.ones(5), np.arange(5.0)).valid
    with pytest.raises(ParameterError):
        tk.cor_test(x, y, rho0=1.0)


# -- multivariate ------------------------------------------------------------------


def test_hotelling_reduces_to_t():
    rng = np.random.default_rng(9)
    x = rng.normal(0.4, 1, size=25)
    h = tk.hotelling_one_sample(x[:, None], [0.0])
    t = tk.t_test_one_sample(x)
    assert h.statistic == pytest.approx(t.statistic**2, rel=1e-12)
    assert h.p_value == pytest.approx(t.p_value, rel=1e-10)
    h2 = tk.hotelling_two_sample(x[:12, None], x[12:, None] + 1)
    t2 = tk.t_test_two_sample(x[:12], x[12:] + 1, pooled=True)
    assert h2.statistic == pytest.approx(t2.statistic**2, rel=1e-12)
    assert h2.p_value == pytest.approx(t2.p_value, rel=1e-10)


def test_hotelling_zero_and_singular():
    rng = np.random.default_rng(10)
    data = rng.normal(size=(20, 3))
    res = tk.hotelling_one_sample(data, data.mean(axis=0))
    assert res.statistic == pytest.approx(0.0, abs=1e-12) and res.p_value == pytest.approx(1.0)
    singular = np.column_stack([data[:, 0], data[:, 0], data[:, 1]])
    assert not tk.hotelling_one_sample(singular, [0, 0, 0]).valid
    assert not tk.hotelling_one_sample(data[:3], [0, 0, 0]).valid


def test_hotelling_against_direct_formula():
    rng = np.random.default_rng(11)
    data = rng.normal([0.3, -0.2, 0.1], 1, size=(30, 3))
    mu0 = np.zeros(3)
    diff = data.mean(0) - mu0
    t2 = 30 * diff @ np.linalg.inv(np.cov(data.T)) @ diff
    f = (30 - 3) / (3 * 29) * t2
    res = tk.hotelling_one_sample(data, mu0)
    assert res.statistic == pytest.approx(f, rel=1e-10)
    assert res.p_value == pytest.approx(stats.f(3, 27).sf(f), rel=1e-10)
    y = rng.normal(size=(30, 3))
    assert tk.hotelling_paired(data, y) == tk.hotelling_one_sample(data - y, 0.0)


def test_lognormal_gof_pipeline_runs():
    x = LogNormal(math.log(100), 0.25).sample_n(500, RandomSource(3))
    breaks = np.exp(np.log(100) + 0.25 * np.array(stats.norm.ppf(np.linspace(0.1, 0.9, 9))))
    counts = tk.bin_continuous(x, breaks)
    assert counts.sum() == 500
    res = tk.chisq_gof(counts, tk.model_probs(LogNormal(math.log(100), 0.25), breaks))
    assert res.df == 9 and 0 <= res.p_value <= 1
    assert isinstance(ChiSquared(9).sf(res.statistic), float)
