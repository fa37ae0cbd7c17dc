"""Catalog of data-generating models, each bound to the test applied to its data.

A :class:`Scenario` holds default parameters and the overrides that turn it into
its null model. ``n`` always means the first sample-size variable of the
model: the first group for two-sample layouts, the number of subjects for
repeated measures, the total number of observations for balanced
between-subject designs. Secondary group sizes (``m``, ``n2``, ...) are the
sizes *at the default n* and scale in proportion when n changes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from types import MappingProxyType
from typing import Any, Callable, Mapping, Optional

import numpy as np

from . import linmod, testkit
from .exceptions import DesignError, ParameterError
from .probkit import (
    Binomial,
    CovarianceMatrix,
    LogNormal,
    Normal,
    RandomSource,
    Uniform,
    sample_multinomial,
    sample_mvnormal,
)
from .testkit import TestResult

DEFAULT_INNER_REPS = 800


@dataclass(frozen=True)
class Dataset:
    """Simulated data; ``kind`` says which fields ``values`` carries."""

    kind: str
    values: Mapping[str, Any]

    def __getitem__(self, key: str):
        return self.values[key]

    @property
    def size(self) -> int:
        """Total number of scalar observations."""
        total = 0
        for v in self.values.values():
            if isinstance(v, np.ndarray) and v.dtype.kind == "f":
                total += v.size
        return total


Generator = Callable[["Scenario", int, RandomSource], Dataset]
Binding = Callable[["Scenario", Dataset, RandomSource], TestResult]


def _freeze(value):
    if isinstance(value, (list, tuple)):
        return tuple(_freeze(v) for v in value)
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value)
    raise ParameterError(f"unsupported parameter value {value!r}")


def _shape(value):
    if isinstance(value, tuple):
        return tuple(_shape(v) for v in value)
    return "scalar"


@dataclass(frozen=True, eq=False)
class Scenario:
    id: str
    title: str
    params: Mapping[str, Any]
    null_overrides: Mapping[str, Any]
    default_n: int
    generator: Generator = field(repr=False)
    binding: Binding = field(repr=False)
    test_name: str = ""
    grain: Callable[[Mapping[str, Any]], int] = field(default=lambda p: 1, repr=False)
    min_n: int = 2
    exact: bool = False
    nested: bool = False

    def __post_init__(self):
        frozen = {k: _freeze(v) for k, v in self.params.items()}
        object.__setattr__(self, "params", MappingProxyType(frozen))
        nulls = {k: _freeze(v) for k, v in self.null_overrides.items()}
        unknown = set(nulls) - set(frozen)
        if unknown:
            raise ParameterError(f"null overrides name unknown parameters: {sorted(unknown)}")
        object.__setattr__(self, "null_overrides", MappingProxyType(nulls))

    # -- parameters ------------------------------------------------------

    def with_params(self, **overrides) -> "Scenario":
        """Copy with some parameters replaced; names and shapes must match."""
        new = dict(self.params)
        for key, value in overrides.items():
            if key not in new:
                raise ParameterError(f"scenario {self.id!r} has no parameter {key!r}; have {sorted(new)}")
            value = _freeze(value)
            if _shape(value) != _shape(new[key]):
                raise ParameterError(f"parameter {key!r} must keep the shape of its default {new[key]!r}")
            new[key] = value
        return Scenario(
            id=self.id,
            title=self.title,
            params=new,
            null_overrides=self.null_overrides,
            default_n=self.default_n,
            generator=self.generator,
            binding=self.binding,
            test_name=self.test_name,
            grain=self.grain,
            min_n=self.min_n,
            exact=self.exact,
            nested=self.nested,
        )

    def null_variant(self) -> "Scenario":
        return self.with_params(**self.null_overrides)

    @property
    def effect_names(self) -> tuple:
        return tuple(self.null_overrides)

    @property
    def granularity(self) -> int:
        return int(self.grain(self.params))

    def p(self, key: str):
        return self.params[key]

    def scaled(self, n: int, key: str) -> int:
        """Secondary group size ``key`` scaled to the first group size ``n``."""
        return max(1, int(round(n * self.params[key] / self.default_n)))

    def check_n(self, n: int) -> int:
        if isinstance(n, bool) or int(n) != n:
            raise DesignError(f"n must be an integer, got {n!r}")
        n = int(n)
        if n < self.min_n:
            raise DesignError(f"scenario {self.id!r} needs n >= {self.min_n}, got {n}")
        g = self.granularity
        if n % g:
            raise DesignError(f"scenario {self.id!r} needs n divisible by {g}, got {n}")
        return n

    def smallest_n(self) -> int:
        g = self.granularity
        return g * max(1, math.ceil(self.min_n / g))

    # -- simulation ------------------------------------------------------

    def generate(self, n: int, rng: RandomSource) -> Dataset:
        return self.generator(self, self.check_n(n), rng)

    def run_once(self, n: int, rng: RandomSource) -> TestResult:
        data = self.generate(n, rng)
        return self.binding(self, data, rng)

    def defaults(self) -> dict:
        """Plain-JSON view of the defaults."""
        return {
            "id": self.id,
            "n": self.default_n,
            "params": _jsonable(dict(self.params)),
            "null_overrides": _jsonable(dict(self.null_overrides)),
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, tuple):
        return [_jsonable(v) for v in obj]
    return obj


def defaults_json(scenarios=None) -> str:
    scenarios = catalog() if scenarios is None else scenarios
    return json.dumps([s.defaults() for s in scenarios], indent=1, sort_keys=True)


# ---------------------------------------------------------------------------
# Small helpers shared by generators
# ---------------------------------------------------------------------------


def _normal(rng: RandomSource, size, mean=0.0, sd=1.0) -> np.ndarray:
    return mean + sd * rng.standard_normal(size)


@lru_cache(maxsize=64)
def _cov(sd: tuple, cor: tuple) -> CovarianceMatrix:
    return CovarianceMatrix.from_sd_cor(np.array(sd), np.array(cor))


def _bivariate(rng: RandomSource, n: int, mean: tuple, sd: float, r: float) -> np.ndarray:
    cov = _cov((sd, sd), ((1.0, r), (r, 1.0)))
    return sample_mvnormal(n, np.array(mean, dtype=float), cov, rng)


def _two(x, y) -> Dataset:
    return Dataset("two-samples", {"x": x, "y": y})


def _one(x) -> Dataset:
    return Dataset("sample", {"x": x})


def _design(y, **extra) -> Dataset:
    return Dataset("design", {"y": y, **extra})


# ---------------------------------------------------------------------------
# One-sample scenarios
# ---------------------------------------------------------------------------


def _gen_binom(s, n, rng):
    x = Binomial(n, s.p("p0") + s.p("effect")).sample_n(1, rng)[0]
    return Dataset("count", {"x": int(x), "n": n})


def _gen_shifted_normal(s, n, rng):
    return _one(_normal(rng, n, s.p("mu0") + s.p("delta"), s.p("sigma")))


def _gen_variance(s, n, rng):
    return _one(_normal(rng, n, s.p("mean"), s.p("sigma0") + s.p("sd_increase")))


def _gen_sign(s, n, rng):
    dist = LogNormal(math.log(s.p("median0") + s.p("shift")), s.p("sdlog"))
    return _one(dist.sample_n(n, rng))


def _gen_uniform_shift(s, n, rng):
    centre = s.p("mu0") + s.p("shift")
    half = s.p("halfwidth")
    return _one(Uniform(centre - half, centre + half).sample_n(n, rng))


def _gen_multinomial(s, n, rng):
    return Dataset("counts", {"counts": sample_multinomial(n, s.p("probs"), rng)})


def _gen_normal(s, n, rng):
    return _one(_normal(rng, n, s.p("mean"), s.p("sd")))


def _gen_skewed(s, n, rng):
    mean, sdlog = s.p("mean"), s.p("sdlog")
    if s.p("skew"):
        x = LogNormal(math.log(mean) - sdlog**2 / 2, sdlog).sample_n(n, rng)
    else:
        # Normal with the log-normal's mean and standard deviation.
        x = _normal(rng, n, mean, mean * math.sqrt(math.expm1(sdlog**2)))
    return _one(x)


def _t_binom_exact(s, d, rng):
    return testkit.binom_exact_test(d["x"], d["n"], s.p("p0"))


def _t_prop(s, d, rng):
    return testkit.prop_score_test(d["x"], d["n"], s.p("p0"))


def _t_z_one(s, d, rng):
    return testkit.z_test_one_sample(d["x"], s.p("mu0"), s.p("sigma"))


def _t_t_one(s, d, rng):
    return testkit.t_test_one_sample(d["x"], s.p("mu0"))


def _t_variance(s, d, rng):
    return testkit.variance_chisq_test(d["x"], s.p("sigma0") ** 2)


def _t_sign(s, d, rng):
    return testkit.sign_test(d["x"], s.p("median0"))


def _t_signrank(s, d, rng):
    return testkit.wilcoxon_signed_rank(d["x"], s.p("mu0"))


def _t_gof_counts(s, d, rng):
    return testkit.chisq_gof(d["counts"], s.p("probs0"))


def _t_gof_known(s, d, rng):
    breaks = s.p("breaks")
    counts = testkit.bin_continuous(d["x"], breaks)
    probs0 = testkit.model_probs(Normal(s.p("mean0"), s.p("sd0")), breaks)
    return testkit.chisq_gof(counts, probs0)


def _t_gof_estimated(s, d, rng):
    x = d["x"]
    breaks = s.p("breaks")
    counts = testkit.bin_continuous(x, breaks)
    probs0 = testkit.model_probs(Normal(float(x.mean()), float(x.std(ddof=1))), breaks)
    return testkit.chisq_gof(counts, probs0, df_reduction=s.p("df_correction"))


def _t_ks(s, d, rng):
    return testkit.ks_test_one_sample(d["x"], Normal(s.p("mean0"), s.p("sd0")))


# ---------------------------------------------------------------------------
# Two-sample scenarios
# ---------------------------------------------------------------------------


def _gen_two_normal(s, n, rng):
    m = s.scaled(n, "m")
    sx = s.params.get("sigma_x", s.params.get("sigma"))
    sy = s.params.get("sigma_y", s.params.get("sigma"))
    x = _normal(rng, n, s.p("mu") + s.p("delta"), sx)
    y = _normal(rng, m, s.p("mu"), sy)
    return _two(x, y)


def _gen_var_ratio(s, n, rng):
    m = s.scaled(n, "m")
    x = _normal(rng, n, s.p("mean"), math.sqrt(s.p("sigma") ** 2 * s.p("ratio")))
    y = _normal(rng, m, s.p("mean"), s.p("sigma"))
    return _two(x, y)


def _gen_two_lognormal(s, n, rng):
    m = s.scaled(n, "m")
    x = LogNormal(math.log(s.p("median") + s.p("shift")), s.p("sdlog")).sample_n(n, rng)
    y = LogNormal(math.log(s.p("median")), s.p("sdlog")).sample_n(m, rng)
    return _two(x, y)


def _gen_pairs(s, n, rng):
    xy = _bivariate(rng, n, (s.p("mu") + s.p("delta"), s.p("mu")), s.p("sd"), s.p("r"))
    return Dataset("pairs", {"x": xy[:, 0], "y": xy[:, 1]})


def _gen_differences(s, n, rng):
    sd = s.p("sd")
    sd_diff = math.sqrt(2 * sd * sd - 2 * s.p("r") * sd * sd)
    return _one(_normal(rng, n, s.p("delta"), sd_diff))


def _t_z_two(s, d, rng):
    return testkit.z_test_two_sample(d["x"], d["y"], s.p("sigma_x"), s.p("sigma_y"))


def _t_pooled(s, d, rng):
    return testkit.t_test_two_sample(d["x"], d["y"], pooled=True)


def _t_welch(s, d, rng):
    return testkit.t_test_two_sample(d["x"], d["y"], pooled=False)


def _t_var_ratio(s, d, rng):
    return testkit.var_ratio_f_test(d["x"], d["y"])


def _t_rank_sum(s, d, rng):
    return testkit.wilcoxon_rank_sum(d["x"], d["y"])


def _t_randomization_unpaired(s, d, rng):
    return testkit.randomization_test_unpaired(d["x"], d["y"], s.p("inner_reps"), rng.child(1))


def _t_paired_t(s, d, rng):
    return testkit.paired_t_test(d["x"], d["y"])


def _t_one_sample_zero(s, d, rng):
    return testkit.t_test_one_sample(d["x"], 0.0)


def _t_paired_signrank(s, d, rng):
    return testkit.wilcoxon_signed_rank(d["x"] - d["y"], 0.0)


def _t_randomization_paired(s, d, rng):
    return testkit.randomization_test_paired(d["x"], s.p("inner_reps"), rng.child(1))


# ---------------------------------------------------------------------------
# Association
# ---------------------------------------------------------------------------


def _gen_homogeneity(s, n, rng):
    m = s.scaled(n, "m")
    a = sample_multinomial(n, s.p("probs1"), rng)
    b = sample_multinomial(m, s.p("probs2"), rng)
    return Dataset("table", {"table": np.column_stack([a, b])})


def _gen_joint(s, n, rng):
    rows, cols = s.p("rows"), s.p("cols")
    counts = sample_multinomial(n, s.p("probs"), rng)
    # probabilities are listed with the row index varying fastest
    return Dataset("table", {"table": counts.reshape(cols, rows).T})


def _equal_width_bins(x: np.ndarray, k: int) -> np.ndarray:
    """Bin index in 0..k-1 over k equal-width right-closed bins spanning the data.

    Same interior edges as R's ``cut(x, k)``; its 1/1000 widening of the outer
    edges only guarantees the extremes land in the first and last bins.
    """
    lo, hi = float(x.min()), float(x.max())
    span = hi - lo
    if span == 0:
        return np.zeros(x.size, dtype=np.intp)
    edges = lo + span * np.arange(1, k) / k
    return np.searchsorted(edges, x, side="left")


def _gen_latent(s, n, rng):
    xy = _bivariate(rng, n, (0.0, 0.0), 1.0, s.p("rho"))
    return Dataset("pairs", {"x": xy[:, 0], "y": xy[:, 1]})


def _t_table(s, d, rng):
    return testkit.chisq_contingency(d["table"])


def _t_latent(s, d, rng):
    r, c = s.p("row_bins"), s.p("col_bins")
    i = _equal_width_bins(d["x"], r)
    j = _equal_width_bins(d["y"], c)
    table = np.bincount(i * c + j, minlength=r * c).reshape(r, c)
    return testkit.chisq_contingency(table)


def _gen_cor(s, n, rng):
    xy = _bivariate(rng, n, (s.p("mu"), s.p("mu")), s.p("sd"), s.p("rho"))
    return Dataset("pairs", {"x": xy[:, 0], "y": xy[:, 1]})


def _t_cor(s, d, rng):
    return testkit.cor_test(d["x"], d["y"], s.p("rho0"))


# ---------------------------------------------------------------------------
# Regression
# ---------------------------------------------------------------------------


@lru_cache(maxsize=64)
def _dose_design(doses: tuple, n: int) -> linmod.DesignMatrix:
    x = np.repeat(np.array(doses, dtype=float), n // len(doses))
    return linmod.build_design({"x": x}, ["x"])


@lru_cache(maxsize=64)
def _intercept_only(n: int) -> np.ndarray:
    return np.ones((n, 1))


def _gen_simple_regression(s, n, rng):
    design = _dose_design(s.p("doses"), n)
    x = design.matrix[:, 1]
    y = s.p("intercept") + s.p("slope") * x + _normal(rng, n, 0.0, s.p("sigma"))
    return _design(y, x=x)


def _t_wald_slope(s, d, rng):
    design = _dose_design(s.p("doses"), d["y"].size)
    return linmod.wald_coef_test(linmod.ols_fit(design, d["y"]), "x")


def _t_overall_f(s, d, rng):
    n = d["y"].size
    design = _dose_design(s.p("doses"), n)
    full = linmod.ols_fit(design, d["y"])
    null = linmod.ols_fit(_intercept_only(n), d["y"])
    return linmod.nested_f_test(null, full)


@lru_cache(maxsize=64)
def _two_predictor_design(x1_levels: tuple, x2_levels: tuple, n: int) -> linmod.DesignMatrix:
    per = n // (len(x1_levels) * len(x2_levels))
    x1 = np.tile(np.repeat(np.array(x1_levels, dtype=float), per), len(x2_levels))
    x2 = np.repeat(np.array(x2_levels, dtype=float), per * len(x1_levels))
    return linmod.build_design({"x1": x1, "x2": x2}, ["x1", "x2"])


def _gen_multiple_regression(s, n, rng):
    design = _two_predictor_design(s.p("x1_levels"), s.p("x2_levels"), n)
    beta = np.array([s.p("intercept"), s.p("b1"), s.p("b2")])
    y = design.matrix @ beta + _normal(rng, n, 0.0, s.p("sigma"))
    return _design(y)


def _t_multiple_f(s, d, rng):
    n = d["y"].size
    design = _two_predictor_design(s.p("x1_levels"), s.p("x2_levels"), n)
    full = linmod.ols_fit(design, d["y"])
    null = linmod.ols_fit(_intercept_only(n), d["y"])
    return linmod.nested_f_test(null, full)


def _gen_binomial_regression(s, n, rng):
    doses = np.array(s.p("doses"), dtype=float)
    trials = n // doses.size
    logit = (doses - s.p("centre")) * math.log(s.p("odds_ratio"))
    prob = 1.0 / (1.0 + np.exp(-logit))
    y = np.array([Binomial(trials, p).sample_n(1, rng)[0] for p in prob])
    return Dataset("grouped-binomial", {"successes": y, "trials": trials, "x": doses})


def _t_binomial_lrt(s, d, rng):
    x = d["x"]
    full = linmod.glm_binomial_fit(np.column_stack([np.ones_like(x), x]), d["successes"], d["trials"])
    null = linmod.glm_binomial_fit(np.ones((x.size, 1)), d["successes"], d["trials"])
    return linmod.glm_lrt(null, full)


# ---------------------------------------------------------------------------
# ANOVA
# ---------------------------------------------------------------------------


def _gen_oneway(s, n, rng):
    sizes = [n, s.scaled(n, "n2"), s.scaled(n, "n3")]
    groups = np.repeat(np.arange(3), sizes)
    means = s.p("mu") + np.array([0.0, s.p("a2"), s.p("a3")])
    y = means[groups] + _normal(rng, groups.size, 0.0, s.p("sigma"))
    return _design(y, groups=groups)


def _t_oneway(s, d, rng):
    return linmod.anova_oneway(d["groups"], d["y"]).omnibus


def _gen_oneway_equal(s, n, rng):
    groups = np.repeat(np.arange(3), n // 3)
    means = s.p("mu") + np.array([0.0, s.p("a2"), s.p("a3")])
    y = means[groups] + _normal(rng, n, 0.0, s.p("sigma"))
    return _design(y, groups=groups)


def _t_contrast(s, d, rng):
    contrasts = {"c-1,2": s.p("contrast1"), "1-2": s.p("contrast2")}
    return linmod.anova_oneway(d["groups"], d["y"], contrasts).contrasts["c-1,2"]


@lru_cache(maxsize=64)
def _item_factor(items: int, n: int) -> linmod.Factor:
    return linmod.Factor("item", np.tile(np.arange(items), n // items), tuple(range(1, items + 1)))


def _gen_oneway_random(s, n, rng):
    items = s.p("items")
    codes = _item_factor(items, n).codes
    effects = _normal(rng, items, 0.0, s.p("sd_item"))
    y = s.p("mu") + effects[codes] + _normal(rng, n, 0.0, s.p("sigma"))
    return _design(y)


_ONEWAY_RANDOM = linmod.StrataLayout(error_terms=("item",))


def _t_oneway_random(s, d, rng):
    n = d["y"].size
    table = linmod.anova_strata(_ONEWAY_RANDOM, {"item": _item_factor(s.p("items"), n)}, d["y"])
    return table.ratio_test("item", "Within")


@lru_cache(maxsize=64)
def _twoway_factors(n: int) -> dict:
    a = np.repeat([0, 1], n // 2)
    b = np.tile(np.repeat([0, 1], n // 4), 2)
    return {
        "A": linmod.Factor("A", a, ("low", "high")),
        "B": linmod.Factor("B", b, ("low", "high")),
    }


def _gen_twoway_fixed(s, n, rng):
    f = _twoway_factors(n)
    a, b = f["A"].codes, f["B"].codes
    mean = s.p("mu") + s.p("a2") * a + s.p("b2") * b + s.p("ab22") * a * b
    return _design(mean + _normal(rng, n, 0.0, s.p("sigma")))


_TWOWAY_FIXED = linmod.StrataLayout(fixed_terms=("A", "B", "A:B"))


def _t_twoway_interaction(s, d, rng):
    table = linmod.anova_strata(_TWOWAY_FIXED, _twoway_factors(d["y"].size), d["y"])
    return table.f_test("A:B")


@lru_cache(maxsize=64)
def _crossed_random_factors(orders: int, admins: int, n: int) -> dict:
    k = n // (orders * admins)
    order = np.tile(np.repeat(np.arange(orders), k), admins)
    admin = np.repeat(np.arange(admins), orders * k)
    return {
        "order": linmod.Factor("order", order, tuple(range(1, orders + 1))),
        "admin": linmod.Factor("admin", admin, tuple(range(1, admins + 1))),
    }


def _gen_twoway_random(s, n, rng):
    orders, admins = s.p("orders"), s.p("admins")
    f = _crossed_random_factors(orders, admins, n)
    o, a = f["order"].codes, f["admin"].codes
    eff_o = _normal(rng, orders, 0.0, s.p("sd_order"))
    eff_a = _normal(rng, admins, 0.0, s.p("sd_admin"))
    eff_oa = _normal(rng, orders * admins, 0.0, s.p("sd_interaction"))
    y = s.p("mu") + eff_o[o] + eff_a[a] + eff_oa[a * orders + o] + _normal(rng, n, 0.0, s.p("sigma"))
    return _design(y)


_TWOWAY_RANDOM = linmod.StrataLayout(error_terms=("order", "admin", "order:admin"))


def _t_twoway_random(s, d, rng):
    f = _crossed_random_factors(s.p("orders"), s.p("admins"), d["y"].size)
    table = linmod.anova_strata(_TWOWAY_RANDOM, f, d["y"])
    return table.ratio_test("order:admin", "Within")


@lru_cache(maxsize=64)
def _rm1_factors(subjects: int) -> dict:
    return {
        "shape": linmod.Factor("shape", np.tile(np.arange(4), subjects), ("circle", "triangle", "square", "star")),
        "subj": linmod.Factor("subj", np.repeat(np.arange(subjects), 4), tuple(range(1, subjects + 1))),
    }


def _gen_rm_one(s, n, rng):
    f = _rm1_factors(n)
    shape, subj = f["shape"].codes, f["subj"].codes
    beta = np.array([0.0, s.p("b2"), s.p("b3"), s.p("b4")])
    subject = _normal(rng, n, 0.0, s.p("sd_subject"))
    y = s.p("mu") + beta[shape] + subject[subj] + _normal(rng, 4 * n, 0.0, s.p("sigma"))
    return _design(y)


_RM_ONE = linmod.StrataLayout(error_terms=("subj",), fixed_terms=("shape",))


def _t_rm_one(s, d, rng):
    table = linmod.anova_strata(_RM_ONE, _rm1_factors(d["y"].size // 4), d["y"])
    return table.f_test("shape")


@lru_cache(maxsize=64)
def _rm2_factors(subjects: int) -> dict:
    return {
        "A": linmod.Factor("A", np.tile([0, 1], 2 * subjects), (1, 2)),
        "B": linmod.Factor("B", np.tile([0, 0, 1, 1], subjects), (1, 2)),
        "subj": linmod.Factor("subj", np.repeat(np.arange(subjects), 4), tuple(range(1, subjects + 1))),
    }


def _gen_rm_two(s, n, rng):
    f = _rm2_factors(n)
    a, b, subj = f["A"].codes, f["B"].codes, f["subj"].codes
    fixed = s.p("mu") + s.p("a2") * a + s.p("b2") * b + s.p("ab22") * a * b
    p = _normal(rng, n, 0.0, s.p("sd_subject"))
    pa = _normal(rng, 2 * n, 0.0, s.p("sd_subject_a"))
    pb = _normal(rng, 2 * n, 0.0, s.p("sd_subject_b"))
    y = fixed + p[subj] + pa[2 * subj + a] + pb[2 * subj + b] + _normal(rng, 4 * n, 0.0, s.p("sigma"))
    return _design(y)


_RM_TWO = linmod.StrataLayout(error_terms=("subj", "subj:A", "subj:B"), fixed_terms=("A", "B", "A:B"))


def _t_rm_two(s, d, rng):
    table = linmod.anova_strata(_RM_TWO, _rm2_factors(d["y"].size // 4), d["y"])
    return table.f_test("A:B")


def _gen_ancova(s, n, rng):
    pre = _normal(rng, n, s.p("pre_mean"), s.p("pre_sd"))
    groups = np.repeat(np.arange(3), n // 3)
    effects = np.array([0.0, s.p("a2"), s.p("a3")])
    y = s.p("mu") + s.p("slope") * pre + effects[groups] + _normal(rng, n, 0.0, s.p("sigma"))
    return _design(y, pre=pre, groups=groups)


@lru_cache(maxsize=64)
def _group_factor(n: int) -> linmod.Factor:
    return linmod.Factor("grp", np.repeat(np.arange(3), n // 3), (1, 2, 3))


def _t_ancova(s, d, rng):
    variables = {"pre": d["pre"], "grp": _group_factor(d["y"].size)}
    full = linmod.ols_fit(linmod.build_design(variables, ["pre", "grp"]), d["y"])
    null = linmod.ols_fit(linmod.build_design(variables, ["pre"]), d["y"])
    return linmod.nested_f_test(null, full)


# ---------------------------------------------------------------------------
# Multivariate
# ---------------------------------------------------------------------------


def lower_triangle_correlation(dim: int, lower: tuple) -> np.ndarray:
    """Correlation matrix whose strict lower triangle is filled column by column."""
    cor = np.eye(dim)
    rows, cols = np.tril_indices(dim, -1)
    order = np.lexsort((rows, cols))
    cor[rows[order], cols[order]] = lower
    return np.tril(cor) + np.tril(cor, -1).T


@lru_cache(maxsize=64)
def _mv_one_cov(sd: tuple, lower: tuple) -> CovarianceMatrix:
    cor = lower_triangle_correlation(len(sd), lower)
    return CovarianceMatrix.from_sd_cor(np.array(sd), cor)


def _gen_mv_one(s, n, rng):
    mu = np.array(s.p("mu0")) + np.array(s.p("delta"))
    return _one(sample_mvnormal(n, mu, _mv_one_cov(s.p("sd"), s.p("cor_lower")), rng))


def _t_mv_one(s, d, rng):
    return testkit.hotelling_one_sample(d["x"], s.p("mu0"))


@lru_cache(maxsize=64)
def _constant_cor_cov(sd: tuple, r: float) -> CovarianceMatrix:
    k = len(sd)
    cor = np.full((k, k), r)
    np.fill_diagonal(cor, 1.0)
    return CovarianceMatrix.from_sd_cor(np.array(sd), cor)


def _gen_mv_two(s, n, rng):
    m = s.scaled(n, "m")
    cov = _constant_cor_cov(s.p("sd"), s.p("r"))
    mu = np.array(s.p("mu"))
    x = sample_mvnormal(n, mu + np.array(s.p("delta")), cov, rng)
    y = sample_mvnormal(m, mu, cov, rng)
    return _two(x, y)


def _t_mv_two(s, d, rng):
    return testkit.hotelling_two_sample(d["x"], d["y"])


def paired_difference_covariance(sd: tuple, r_within: float, r_between: float) -> np.ndarray:
    """Covariance of before-minus-after differences.

    Measures share correlation ``r_within`` on the same occasion and
    ``r_between`` across occasions; all standard deviations repeat on both
    occasions.
    """
    k = len(sd)
    within = np.full((k, k), r_within)
    between = np.full((k, k), r_between)
    cor = np.kron(np.eye(2), within) + np.kron(1 - np.eye(2), between)
    np.fill_diagonal(cor, 1.0)
    s2 = np.tile(np.array(sd, dtype=float), 2)
    cov = cor * np.outer(s2, s2)
    contrast = np.hstack([np.eye(k), -np.eye(k)])
    return contrast @ cov @ contrast.T


@lru_cache(maxsize=64)
def _mv_paired_cov(sd: tuple, r_within: float, r_between: float) -> CovarianceMatrix:
    return CovarianceMatrix(paired_difference_covariance(sd, r_within, r_between))


def _gen_mv_paired(s, n, rng):
    cov = _mv_paired_cov(s.p("sd"), s.p("r_within"), s.p("r_between"))
    return _one(sample_mvnormal(n, np.array(s.p("delta")), cov, rng))


def _t_mv_paired(s, d, rng):
    return testkit.hotelling_one_sample(d["x"], 0.0)


# ---------------------------------------------------------------------------
# The catalog
# ---------------------------------------------------------------------------

_BREAKS = (80, 85, 90, 95, 100, 105, 110, 115, 120)
_DIE_NULL = (1 / 6,) * 6


def _every(k: int):
    return lambda p: k


def _build_catalog() -> tuple:
    S = Scenario
    out = [
        S("binom-exact", "Exact binomial test", {"p0": 0.5, "effect": 0.015}, {"effect": 0.0}, 9000,
          _gen_binom, _t_binom_exact, "binom_exact_test", min_n=1, exact=True),
        S("binom-approx", "Approximate (score) binomial test", {"p0": 0.5, "effect": 0.015}, {"effect": 0.0}, 9000,
          _gen_binom, _t_prop, "prop_score_test", min_n=1),
        S("z-one-sample", "One-sample z test", {"mu0": 1000, "delta": 4, "sigma": 7.5}, {"delta": 0}, 30,
          _gen_shifted_normal, _t_z_one, "z_test_one_sample", min_n=1),
        S("t-one-sample", "One-sample t test", {"mu0": 1000, "delta": 4, "sigma": 7.5}, {"delta": 0}, 30,
          _gen_shifted_normal, _t_t_one, "t_test_one_sample"),
        S("variance", "Chi-squared test of a variance", {"mean": 1000, "sigma0": 7.5, "sd_increase": 2.5},
          {"sd_increase": 0.0}, 50, _gen_variance, _t_variance, "variance_chisq_test"),
        S("sign", "Sign test (log-normal data)", {"median0": 100, "shift": 30, "sdlog": 0.6}, {"shift": 0}, 75,
          _gen_sign, _t_sign, "sign_test", min_n=1, exact=True),
        S("wilcoxon-signed", "Wilcoxon signed-rank test (uniform data)", {"mu0": 100, "shift": 25, "halfwidth": 75},
          {"shift": 0}, 32, _gen_uniform_shift, _t_signrank, "wilcoxon_signed_rank", min_n=1),
        S("gof-multinomial", "Chi-squared goodness of fit, loaded die",
          {"probs": (0.15, 0.15, 0.15, 0.15, 0.15, 0.25), "probs0": _DIE_NULL}, {"probs": _DIE_NULL}, 300,
          _gen_multinomial, _t_gof_counts, "chisq_gof", min_n=1),
        S("gof-normal-known", "Chi-squared goodness of fit, normal with known parameters",
          {"mean": 100, "sd": 20, "mean0": 100, "sd0": 15, "breaks": _BREAKS}, {"sd": 15}, 140,
          _gen_normal, _t_gof_known, "chisq_gof", min_n=1),
        S("gof-lognormal-estimated", "Chi-squared goodness of fit, normal with estimated parameters",
          {"mean": 100, "sdlog": 0.25, "skew": 1, "df_correction": 2, "breaks": _BREAKS}, {"skew": 0}, 850,
          _gen_skewed, _t_gof_estimated, "chisq_gof"),
        S("ks-normal", "Kolmogorov-Smirnov test against a fixed normal",
          {"mean": 100, "sd": 20, "mean0": 100, "sd0": 15}, {"sd": 15}, 250,
          _gen_normal, _t_ks, "ks_test_one_sample", min_n=1),
        S("z-two-sample", "Two-sample z test", {"mu": 1000, "delta": 4, "sigma_x": 7, "sigma_y": 10, "m": 70},
          {"delta": 0}, 85, _gen_two_normal, _t_z_two, "z_test_two_sample", min_n=1),
        S("t-pooled", "Two-sample t test, pooled variance", {"mu": 1000, "delta": 4, "sigma": 10, "m": 90},
          {"delta": 0}, 115, _gen_two_normal, _t_pooled, "t_test_two_sample(pooled)"),
        S("t-welch", "Welch two-sample t test", {"mu": 1000, "delta": 4, "sigma": 10, "m": 90},
          {"delta": 0}, 115, _gen_two_normal, _t_welch, "t_test_two_sample"),
        S("var-ratio", "F test of a variance ratio", {"mean": 1000, "sigma": 7, "ratio": 2.5, "m": 40},
          {"ratio": 1}, 45, _gen_var_ratio, _t_var_ratio, "var_ratio_f_test"),
        S("rank-sum", "Wilcoxon rank-sum test (log-normal data)", {"median": 100, "shift": 40, "sdlog": 0.6, "m": 50},
          {"shift": 0}, 60, _gen_two_lognormal, _t_rank_sum, "wilcoxon_rank_sum", min_n=1),
        S("randomization-unpaired", "Randomization test, independent samples",
          {"mu": 1000, "delta": 4, "sigma": 5, "m": 35, "inner_reps": DEFAULT_INNER_REPS}, {"delta": 0}, 40,
          _gen_two_normal, _t_randomization_unpaired, "randomization_test_unpaired", exact=True, nested=True),
        S("paired-t-bivariate", "Paired t test, bivariate normal pairs",
          {"mu": 100, "delta": 5, "sd": 15, "r": 0.9}, {"delta": 0}, 18, _gen_pairs, _t_paired_t, "paired_t_test"),
        S("paired-t-differences", "Paired t test, normal differences",
          {"delta": 5, "sd": 15, "r": 0.9}, {"delta": 0}, 18, _gen_differences, _t_one_sample_zero,
          "t_test_one_sample"),
        S("paired-wilcoxon", "Wilcoxon signed-rank test on pairs",
          {"mu": 100, "delta": 5, "sd": 15, "r": 0.9}, {"delta": 0}, 18, _gen_pairs, _t_paired_signrank,
          "wilcoxon_signed_rank", min_n=1, exact=True),
        S("randomization-paired", "Randomization test, paired differences",
          {"delta": 5, "sd": 15, "r": 0.9, "inner_reps": DEFAULT_INNER_REPS}, {"delta": 0}, 18,
          _gen_differences, _t_randomization_paired, "randomization_test_paired", exact=True, nested=True),
        S("chisq-homogeneity", "Chi-squared test of homogeneity",
          {"probs1": (0.09, 0.25, 0.32, 0.25, 0.09), "probs2": (0.16, 0.22, 0.24, 0.22, 0.16), "m": 190},
          {"probs1": (0.16, 0.22, 0.24, 0.22, 0.16)}, 250, _gen_homogeneity, _t_table, "chisq_contingency",
          min_n=1),
        S("chisq-independence-multinomial", "Chi-squared test of independence, joint multinomial",
          {"probs": (0.10, 0.23, 0.17, 0.17, 0.23, 0.10), "rows": 2, "cols": 3},
          {"probs": (0.165, 0.165, 0.17, 0.17, 0.165, 0.165)}, 90, _gen_joint, _t_table, "chisq_contingency",
          min_n=1),
        S("chisq-independence-latent", "Chi-squared test of independence, categorized bivariate normal",
          {"rho": 0.4, "row_bins": 2, "col_bins": 3}, {"rho": 0}, 130, _gen_latent, _t_latent,
          "chisq_contingency", min_n=3),
        S("cor-rho0-zero", "Correlation test against zero", {"mu": 100, "sd": 15, "rho": 0.3, "rho0": 0},
          {"rho": 0}, 90, _gen_cor, _t_cor, "cor_test", min_n=3),
        S("cor-rho0-nonzero", "Correlation test against a nonzero value (Fisher z)",
          {"mu": 100, "sd": 15, "rho": 0.3, "rho0": 0.6}, {"rho": 0.6}, 60, _gen_cor, _t_cor, "cor_test",
          min_n=4),
        S("regression-simple-wald", "Simple regression, Wald test of the slope",
          {"intercept": 35, "slope": -2.5, "sigma": 14, "doses": (0, 2, 4, 6, 8)}, {"slope": 0}, 35,
          _gen_simple_regression, _t_wald_slope, "wald_coef_test", grain=lambda p: len(p["doses"]),
          min_n=3),
        S("regression-simple-f", "Simple regression, overall F test",
          {"intercept": 35, "slope": -2.5, "sigma": 14, "doses": (0, 2, 4, 6, 8)}, {"slope": 0}, 35,
          _gen_simple_regression, _t_overall_f, "nested_f_test", grain=lambda p: len(p["doses"]), min_n=3),
        S("regression-multiple", "Multiple regression, overall F test",
          {"intercept": 35, "b1": -2.5, "b2": 0.1, "sigma": 14, "x1_levels": (0, 2, 4, 6, 8),
           "x2_levels": (30, 50, 80)}, {"b1": 0, "b2": 0}, 30, _gen_multiple_regression, _t_multiple_f,
          "nested_f_test", grain=lambda p: len(p["x1_levels"]) * len(p["x2_levels"]), min_n=4),
        S("regression-binomial", "Binomial (logistic) regression, likelihood-ratio test",
          {"doses": (37, 38, 39, 40, 41, 42, 43), "centre": 40, "odds_ratio": 1.5}, {"odds_ratio": 1}, 70,
          _gen_binomial_regression, _t_binomial_lrt, "glm_lrt", grain=lambda p: len(p["doses"]), min_n=1),
        S("anova-oneway-fixed", "One-way ANOVA, fixed effects",
          {"mu": 10, "a2": 2, "a3": -3, "sigma": 5, "n2": 24, "n3": 18}, {"a2": 0, "a3": 0}, 22,
          _gen_oneway, _t_oneway, "anova_oneway"),
        S("anova-oneway-contrast", "One-way ANOVA, planned contrast",
          {"mu": 10, "a2": 3, "a3": 4.5, "sigma": 5, "contrast1": (-1, 0.5, 0.5), "contrast2": (0, -1, 1)},
          {"a2": 0, "a3": 0}, 72, _gen_oneway_equal, _t_contrast, "anova_oneway(contrast)", grain=_every(3),
          min_n=6),
        S("anova-oneway-random", "One-way ANOVA, random item effects",
          {"mu": 120, "sd_item": 10, "sigma": 15, "items": 10}, {"sd_item": 0}, 60,
          _gen_oneway_random, _t_oneway_random, "anova_strata", grain=lambda p: p["items"], min_n=20),
        S("anova-twoway-fixed", "Two-way ANOVA, fixed effects, interaction test",
          {"mu": 30, "a2": 30, "b2": 5, "ab22": 12, "sigma": 10}, {"ab22": 0}, 96,
          _gen_twoway_fixed, _t_twoway_interaction, "anova_strata", grain=_every(4), min_n=8),
        S("anova-twoway-random", "Two-way ANOVA, random effects, interaction variance",
          {"mu": 50, "sd_order": 5, "sd_admin": 10, "sd_interaction": 7, "sigma": 13, "orders": 6, "admins": 8},
          {"sd_interaction": 0}, 192, _gen_twoway_random, _t_twoway_random, "anova_strata",
          grain=lambda p: p["orders"] * p["admins"], min_n=96),
        S("anova-rm-one-factor", "Repeated-measures ANOVA, one within factor",
          {"mu": 15, "b2": 2, "b3": 4, "b4": 6, "sd_subject": 4, "sigma": 6}, {"b2": 0, "b3": 0, "b4": 0}, 22,
          _gen_rm_one, _t_rm_one, "anova_strata"),
        S("anova-rm-two-factor", "Repeated-measures ANOVA, two within factors, interaction test",
          {"mu": 1500, "a2": 300, "b2": 200, "ab22": -150, "sd_subject": 200, "sd_subject_a": 100,
           "sd_subject_b": 80, "sigma": 300}, {"ab22": 0}, 136, _gen_rm_two, _t_rm_two, "anova_strata"),
        S("ancova", "Analysis of covariance, incremental F test",
          {"mu": 5, "slope": 0.7, "a2": 0.5, "a3": 4, "sigma": 5, "pre_mean": 20, "pre_sd": 8},
          {"a2": 0, "a3": 0}, 84, _gen_ancova, _t_ancova, "nested_f_test", grain=_every(3), min_n=6),
        S("mv-one-sample", "Multivariate one-sample test (Hotelling)",
          {"mu0": (12, 10, 10, 8), "delta": (0.5, -1, 1, 0), "sd": (3.5, 3.5, 3.5, 2),
           "cor_lower": (0.7, 0.5, 0.3, 0.5, 0.1, 0.3)}, {"delta": (0, 0, 0, 0)}, 30,
          _gen_mv_one, _t_mv_one, "hotelling_one_sample", min_n=5),
        S("mv-two-sample", "Multivariate two-sample test (Hotelling)",
          {"mu": (45, 85, 200), "delta": (10, 5, 15), "sd": (15, 15, 44), "r": 0.3, "m": 50},
          {"delta": (0, 0, 0)}, 50, _gen_mv_two, _t_mv_two, "hotelling_two_sample", min_n=3),
        S("mv-paired", "Paired multivariate test (Hotelling on differences)",
          {"delta": (0.5, -0.5, 0.7), "sd": (2, 2, 2), "r_within": 0.8, "r_between": 0.5},
          {"delta": (0, 0, 0)}, 25, _gen_mv_paired, _t_mv_paired, "hotelling_one_sample", min_n=4),
    ]
    return tuple(out)


_CATALOG: Optional[tuple] = None


def catalog() -> list:
    """All scenarios with their default parameters, in catalog order."""
    global _CATALOG
    if _CATALOG is None:
        _CATALOG = _build_catalog()
    return list(_CATALOG)


def scenario_ids() -> list:
    return [s.id for s in catalog()]


def get(scenario_id: str) -> Scenario:
    for s in catalog():
        if s.id == scenario_id:
            return s
    raise ParameterError(f"unknown scenario {scenario_id!r}; valid ids: {', '.join(scenario_ids())}")


def generate(s: Scenario, n: int, rng: RandomSource) -> Dataset:
    return s.generate(n, rng)


def run_once(s: Scenario, n: int, rng: RandomSource) -> TestResult:
    return s.run_once(n, rng)


# ---------------------------------------------------------------------------
# Parameter recovery
# ---------------------------------------------------------------------------

RECOVERABLE = (
    "regression-multiple",
    "anova-oneway-random",
    "anova-twoway-random",
    "anova-rm-one-factor",
    "anova-rm-two-factor",
)


def recover(s: Scenario, n: int, rng: RandomSource) -> dict:
    """Fit one large simulated dataset and return the parameter estimates.

    Regression returns coefficients (with standard errors) and ``sigma``;
    the random-effects layouts return method-of-moments standard deviations
    as :class:`linmod.VarianceComponent` values.
    """
    if s.id not in RECOVERABLE:
        raise ParameterError(f"no recovery fit for scenario {s.id!r}; supported: {', '.join(RECOVERABLE)}")
    d = s.generate(n, rng)
    y = d["y"]
    if s.id == "regression-multiple":
        fit = linmod.ols_fit(_two_predictor_design(s.p("x1_levels"), s.p("x2_levels"), n), y)
        return {"coefficients": dict(fit.coefficients), "std_errors": fit.std_errors(), "sigma": fit.sigma}
    if s.id == "anova-oneway-random":
        items = s.p("items")
        table = linmod.anova_strata(_ONEWAY_RANDOM, {"item": _item_factor(items, n)}, y)
        return linmod.variance_components(table, "oneway", per_level=n // items)
    if s.id == "anova-twoway-random":
        orders, admins = s.p("orders"), s.p("admins")
        table = linmod.anova_strata(_TWOWAY_RANDOM, _crossed_random_factors(orders, admins, n), y)
        return linmod.variance_components(
            table, "twoway", names=("order", "admin"), a_levels=orders, b_levels=admins,
            replicates=n // (orders * admins),
        )
    if s.id == "anova-rm-one-factor":
        table = linmod.anova_strata(_RM_ONE, _rm1_factors(n), y)
        return linmod.variance_components(table, "rm1", levels=4)
    table = linmod.anova_strata(_RM_TWO, _rm2_factors(n), y)
    return linmod.variance_components(table, "rm2")
