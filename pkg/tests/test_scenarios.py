import json
import math
from pathlib import Path

import numpy as np
import pytest

from powersim import scenarios as sc
from powersim.exceptions import DesignError, ParameterError
from powersim.probkit import RandomSource
from powersim.testkit import TestResult

FIXTURE = Path(__file__).parent / "fixtures" / "scenario_defaults.json"

LISTED_IDS = [
    "binom-exact", "binom-approx", "z-one-sample", "t-one-sample", "variance", "sign", "wilcoxon-signed",
    "gof-multinomial", "gof-normal-known", "gof-lognormal-estimated", "ks-normal", "z-two-sample", "t-pooled",
    "var-ratio", "rank-sum", "randomization-unpaired", "paired-t-bivariate", "paired-t-differences",
    "paired-wilcoxon", "randomization-paired", "chisq-homogeneity", "chisq-independence-multinomial",
    "chisq-independence-latent", "cor-rho0-zero", "cor-rho0-nonzero", "regression-simple-wald",
    "regression-simple-f", "regression-multiple", "regression-binomial", "anova-oneway-fixed",
    "anova-oneway-contrast", "anova-oneway-random", "anova-twoway-fixed", "anova-twoway-random",
    "anova-rm-one-factor", "anova-rm-two-factor", "ancova", "mv-one-sample", "mv-two-sample", "mv-paired",
]

ALL = sc.catalog()


def test_catalog_ids():
    ids = sc.scenario_ids()
    assert len(ids) == len(set(ids))
    assert set(LISTED_IDS) <= set(ids)
    assert set(ids) - set(LISTED_IDS) == {"t-welch"}


def test_defaults_match_frozen_fixture():
    assert sc.defaults_json() + "\n" == FIXTURE.read_text()


def test_catalog_defaults_spot_checks():
    b = sc.get("binom-exact")
    assert b.default_n == 9000 and b.p("effect") == 0.015 and b.p("p0") == 0.5
    paired = sc.get("paired-t-bivariate")
    assert (paired.p("sd"), paired.p("r"), paired.p("delta"), paired.default_n) == (15, 0.9, 5, 18)
    assert sc.get("randomization-unpaired").p("inner_reps") == 800
    assert sc.get("randomization-paired").p("inner_reps") == 800


def test_unknown_id_lists_valid_ids():
    with pytest.raises(ParameterError, match="binom-exact"):
        sc.get("no-such-scenario")


@pytest.mark.parametrize("s", ALL, ids=lambda s: s.id)
def test_null_variant_changes_only_effects(s):
    null = s.null_variant()
    changed = {k for k in s.params if s.params[k] != null.params[k]}
    assert changed <= set(s.effect_names)
    assert changed, "null variant must differ from the alternative"
    for k, v in s.null_overrides.items():
        assert null.params[k] == v


def test_null_effects_are_zero_ratio_one_or_rho0():
    for s in ALL:
        null = s.null_variant()
        for k in s.effect_names:
            v = null.params[k]
            if k == "ratio" or k == "odds_ratio":
                assert v == 1
            elif k == "rho":
                assert v == null.params.get("rho0", 0)
            elif k == "probs":
                expected = null.params.get("probs0", None)
                if expected is not None:
                    assert v == expected
                else:
                    table = np.reshape(v, (null.params["cols"], null.params["rows"])).T
                    outer = np.outer(table.sum(1), table.sum(0))
                    assert np.allclose(table, outer)
            elif k == "probs1":
                assert v == null.params["probs2"]
            elif k == "skew":
                assert v == 0
            elif k == "sd":
                assert v == null.params["sd0"]
            elif isinstance(v, tuple):
                assert all(c == 0 for c in v)
            else:
                assert v == 0, (s.id, k)


@pytest.mark.parametrize("s", ALL, ids=lambda s: s.id)
def test_run_once_default_and_replay(s):
    rng_a = RandomSource(7, 3)
    rng_b = RandomSource(7, 3)
    a = s.run_once(s.default_n, rng_a)
    b = s.run_once(s.default_n, rng_b)
    assert isinstance(a, TestResult)
    assert a == b or (math.isnan(a.p_value) and math.isnan(b.p_value))
    assert a.valid


@pytest.mark.parametrize("s", ALL, ids=lambda s: s.id)
def test_generated_size_depends_only_on_n(s):
    n = s.default_n
    sizes = {s.generate(n, RandomSource(k)).size for k in range(3)}
    assert len(sizes) == 1


def test_t_one_sample_generator():
    s = sc.get("t-one-sample")
    x = s.generate(30, RandomSource(1))["x"]
    assert x.shape == (30,)
    big = s.generate(200_000, RandomSource(2))["x"]
    assert abs(big.mean() - 1004) < 4 * 7.5 / math.sqrt(200_000)
    null = s.null_variant().generate(200_000, RandomSource(2))["x"]
    assert abs(null.mean() - 1000) < 4 * 7.5 / math.sqrt(200_000)


def test_rm_one_factor_shape_and_means():
    s = sc.get("anova-rm-one-factor")
    d = s.generate(4000, RandomSource(3))
    y = d["y"]
    assert y.size == 4 * 4000
    # condition effects 0, 2, 4, 6 on top of mu = 15, ordered subject-major
    cond_means = y.reshape(4000, 4).mean(axis=0)
    assert np.allclose(cond_means - cond_means[0], [0, 2, 4, 6], atol=0.5)


def test_divisibility_errors():
    with pytest.raises(DesignError, match="divisible by 15"):
        sc.get("regression-multiple").generate(31, RandomSource(1))
    with pytest.raises(DesignError, match="divisible by 48"):
        sc.get("anova-twoway-random").generate(200, RandomSource(1))
    with pytest.raises(DesignError, match="n >= "):
        sc.get("t-one-sample").generate(1, RandomSource(1))
    with pytest.raises(DesignError):
        sc.get("t-one-sample").generate(2.5, RandomSource(1))


def test_smallest_n_is_accepted():
    for s in ALL:
        n = s.smallest_n()
        assert s.check_n(n) == n


def test_with_params_validation():
    s = sc.get("t-one-sample")
    assert s.with_params(delta=6).p("delta") == 6
    assert s.p("delta") == 4
    with pytest.raises(ParameterError, match="no parameter"):
        s.with_params(effect=1)
    with pytest.raises(ParameterError, match="shape"):
        sc.get("mv-paired").with_params(delta=(1, 2))
    with pytest.raises(TypeError):
        s.params["delta"] = 1


def test_scaled_secondary_sizes():
    s = sc.get("t-pooled")
    assert s.scaled(115, "m") == 90
    assert s.scaled(230, "m") == 180
    d = s.generate(115, RandomSource(5))
    assert (d["x"].size, d["y"].size) == (115, 90)


def test_lower_triangle_is_column_major():
    cor = sc.lower_triangle_correlation(4, (0.7, 0.5, 0.3, 0.5, 0.1, 0.3))
    expected = np.array(
        [
            [1.0, 0.7, 0.5, 0.3],
            [0.7, 1.0, 0.5, 0.1],
            [0.5, 0.5, 1.0, 0.3],
            [0.3, 0.1, 0.3, 1.0],
        ]
    )
    assert np.array_equal(cor, expected)


def test_paired_difference_covariance():
    cov = sc.paired_difference_covariance((2, 2, 2), 0.8, 0.5)
    # rebuild the 6x6 before/after covariance by hand and difference it
    s = np.full(6, 2.0)
    cor = np.full((6, 6), 0.5)
    cor[:3, :3] = 0.8
    cor[3:, 3:] = 0.8
    np.fill_diagonal(cor, 1.0)
    full = cor * np.outer(s, s)
    contrast = np.hstack([np.eye(3), -np.eye(3)])
    assert np.allclose(cov, contrast @ full @ contrast.T)
    assert cov[0, 0] == pytest.approx(2 * 4 * (1 - 0.5))
    assert np.all(np.linalg.eigvalsh(cov) > 0)


def test_latent_binning_keeps_empty_levels():
    # extremes land in the outer bins; the middle bin may stay empty but still exists
    idx = sc._equal_width_bins(np.array([0.0, 0.1, 1.0]), 3)
    assert list(idx) == [0, 0, 2]
    s = sc.get("chisq-independence-latent")
    res = s.run_once(130, RandomSource(2))
    assert res.valid and res.df == 2.0


def test_json_defaults_roundtrip():
    data = json.loads(sc.defaults_json())
    assert [d["id"] for d in data] == sc.scenario_ids()


def test_recover_rejects_unsupported():
    with pytest.raises(ParameterError, match="supported"):
        sc.recover(sc.get("t-one-sample"), 30, RandomSource(1))


def test_recover_rm_one_factor():
    est = sc.recover(sc.get("anova-rm-one-factor"), 3000, RandomSource(4))
    assert est["sp"].estimate == pytest.approx(4, rel=0.15)
    assert est["s"].estimate == pytest.approx(6, rel=0.05)
