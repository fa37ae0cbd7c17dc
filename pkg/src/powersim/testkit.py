"""Classical hypothesis tests returning :class:`TestResult` values.

All tests are two-sided. Degenerate data (zero variance, empty groups, ...)
never raises: the result comes back with ``valid=False`` and a short note so
that long simulations keep running and the engine decides how to count it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence, Union

import numpy as np
from scipy import special

from .exceptions import ParameterError
from .probkit import Binomial, ChiSquared, Distribution, FisherF, RandomSource

# Relative tolerance on pmf comparison in the two-sided exact binomial test.
BINOM_REL_ERR = 1 + 1e-7
# Largest group size that gets exact rank-test p-values.
EXACT_RANK_MAX_N = 25
# Largest sample size that gets an exact Kolmogorov-Smirnov p-value.
EXACT_KS_MAX_N = 100


@dataclass(frozen=True)
class TestResult:
    __test__ = False  # not a pytest class

    statistic: float
    p_value: float
    df: Optional[Union[float, tuple]] = None
    valid: bool = True
    note: str = ""

    def __post_init__(self):
        if self.valid and not 0.0 <= self.p_value <= 1.0:
            raise ValueError(f"p-value {self.p_value} outside [0, 1]")

    def rejects(self, alpha: float) -> bool:
        return self.valid and self.p_value < alpha


def invalid(note: str, statistic: float = math.nan, df=None) -> TestResult:
    return TestResult(statistic=statistic, p_value=math.nan, df=df, valid=False, note=note)


def _clamp(p: float) -> float:
    return float(min(1.0, max(0.0, p)))


def _norm_two_sided(z: float) -> float:
    return float(special.ndtr(-abs(z)) * 2.0)


def _t_two_sided(t: float, df: float) -> float:
    return float(special.betainc(df / 2.0, 0.5, df / (df + t * t)))


def _equal_tails(lower: float) -> float:
    """min(1, 2 min(F, 1 - F)) for a CDF value F of a continuous statistic."""
    return _clamp(2.0 * min(lower, 1.0 - lower))


# ---------------------------------------------------------------------------
# One-sample tests
# ---------------------------------------------------------------------------


def binom_exact_test(x: int, n: int, p0: float) -> TestResult:
    """Exact two-sided binomial test (minimum-likelihood method)."""
    if not 0 <= x <= n:
        raise ParameterError(f"need 0 <= x <= n, got x={x}, n={n}")
    if not 0 < p0 < 1:
        raise ParameterError("p0 must lie in (0, 1)")
    dist = Binomial(n, p0)
    pmf = dist.pmf(np.arange(n + 1))
    d = pmf[x]
    p = float(np.sum(pmf[pmf <= d * BINOM_REL_ERR]))
    return TestResult(statistic=float(x), p_value=_clamp(p), df=None)


def prop_score_test(x: int, n: int, p0: float) -> TestResult:
    """Score (chi-squared) test of a proportion, no continuity correction."""
    if n < 1:
        raise ParameterError("n must be >= 1")
    if not 0 < p0 < 1:
        raise ParameterError("p0 must lie in (0, 1)")
    chi = (x / n - p0) ** 2 * n / (p0 * (1 - p0))
    return TestResult(statistic=chi, p_value=float(ChiSquared(1).sf(chi)), df=1.0)


def z_test_one_sample(x, mu0: float, sigma: float) -> TestResult:
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return invalid("empty sample")
    if sigma <= 0:
        raise ParameterError("sigma must be positive")
    z = (x.mean() - mu0) / sigma * math.sqrt(x.size)
    return TestResult(statistic=float(z), p_value=_norm_two_sided(z))


def t_test_one_sample(x, mu0: float = 0.0) -> TestResult:
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 2:
        return invalid("need at least two observations")
    sd = x.std(ddof=1)
    if not sd > 0:
        return invalid("zero variance")
    t = (x.mean() - mu0) / sd * math.sqrt(n)
    df = n - 1.0
    return TestResult(statistic=float(t), p_value=_t_two_sided(t, df), df=df)


def paired_t_test(x, y) -> TestResult:
    return t_test_one_sample(np.asarray(x, dtype=float) - np.asarray(y, dtype=float), 0.0)


def variance_chisq_test(x, sigma0_sq: float) -> TestResult:
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 2:
        return invalid("need at least two observations")
    if sigma0_sq <= 0:
        raise ParameterError("sigma0_sq must be positive")
    stat = (n - 1) * x.var(ddof=1) / sigma0_sq
    df = n - 1.0
    return TestResult(statistic=float(stat), p_value=_equal_tails(float(ChiSquared(df).cdf(stat))), df=df)


def sign_test(x, median0: float) -> TestResult:
    x = np.asarray(x, dtype=float)
    n = x.size
    smaller = int(np.sum(x < median0))
    equal = int(np.sum(x == median0))
    m = n - equal
    if m < 1:
        return invalid("all observations equal the hypothesized median")
    count = min(smaller, m - smaller)
    p = 2.0 * float(Binomial(m, 0.5).cdf(count))
    return TestResult(statistic=float(count), p_value=_clamp(p), df=float(m))


# -- exact rank distributions --------------------------------------------------


@lru_cache(maxsize=None)
def signrank_counts(n: int) -> np.ndarray:
    """Number of sign patterns giving each signed-rank sum V = 0..n(n+1)/2."""
    counts = np.zeros(n * (n + 1) // 2 + 1)
    counts[0] = 1.0
    top = 0
    for k in range(1, n + 1):
        counts[k : top + k + 1] = counts[k : top + k + 1] + counts[: top + 1].copy()
        top += k
    counts.setflags(write=False)
    return counts


@lru_cache(maxsize=None)
def ranksum_counts(n: int, m: int) -> np.ndarray:
    """Number of size-n subsets of ranks 1..n+m giving each W = rank sum - n(n+1)/2."""
    # table[i][w]: subsets of size i from processed ranks with shifted sum w
    size = n * m + 1
    table = np.zeros((n + 1, size))
    table[0, 0] = 1.0
    for r in range(1, n + m + 1):
        for i in range(min(r, n), 0, -1):
            shift = r - i  # rank r as the i-th chosen element contributes r - i to W
            if shift > n * m:
                continue
            table[i, shift:] += table[i - 1, : size - shift]
    out = table[n].copy()
    out.setflags(write=False)
    return out


def _exact_two_sided(counts: np.ndarray, stat: int) -> float:
    total = counts.sum()
    lower = counts[: stat + 1].sum() / total
    upper = counts[stat:].sum() / total
    center = (len(counts) - 1) / 2.0
    p = upper if stat > center else lower
    return _clamp(2.0 * p)


def _normal_rank_p(stat: float, mean: float, var: float) -> float:
    z = stat - mean
    correction = 0.5 * np.sign(z)
    if var <= 0:
        return 1.0
    z = (z - correction) / math.sqrt(var)
    return _clamp(2.0 * min(special.ndtr(z), special.ndtr(-z)))


def _rank(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mid-ranks and the sizes of tie groups."""
    order = np.argsort(values, kind="mergesort")
    sorted_vals = values[order]
    boundaries = np.flatnonzero(np.diff(sorted_vals)) + 1
    starts = np.concatenate(([0], boundaries))
    ends = np.concatenate((boundaries, [values.size]))
    ranks = np.empty(values.size)
    for s, e in zip(starts, ends):
        ranks[order[s:e]] = (s + e + 1) / 2.0
    return ranks, ends - starts


def wilcoxon_signed_rank(x, mu0: float = 0.0) -> TestResult:
    d = np.asarray(x, dtype=float) - mu0
    d = d[d != 0]
    n = d.size
    if n < 1:
        return invalid("all observations equal mu0")
    ranks, ties = _rank(np.abs(d))
    v = float(ranks[d > 0].sum())
    has_ties = bool(np.any(ties > 1))
    if n <= EXACT_RANK_MAX_N and not has_ties:
        return TestResult(statistic=v, p_value=_exact_two_sided(signrank_counts(n), int(round(v))), note="exact")
    var = n * (n + 1) * (2 * n + 1) / 24.0 - np.sum(ties**3 - ties) / 48.0
    p = _normal_rank_p(v, n * (n + 1) / 4.0, var)
    return TestResult(statistic=v, p_value=p, note="normal approximation")


def wilcoxon_rank_sum(x, y) -> TestResult:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n, m = x.size, y.size
    if n < 1 or m < 1:
        return invalid("empty group")
    ranks, ties = _rank(np.concatenate((x, y)))
    w = float(ranks[:n].sum() - n * (n + 1) / 2.0)
    has_ties = bool(np.any(ties > 1))
    if n <= EXACT_RANK_MAX_N and m <= EXACT_RANK_MAX_N and not has_ties:
        return TestResult(statistic=w, p_value=_exact_two_sided(ranksum_counts(n, m), int(round(w))), note="exact")
    big = n + m
    var = n * m / 12.0 * ((big + 1) - np.sum(ties**3 - ties) / (big * (big - 1)))
    return TestResult(statistic=w, p_value=_normal_rank_p(w, n * m / 2.0, var), note="normal approximation")


# -- goodness of fit -------------------------------------------------------------


def chisq_gof(counts, probs0, df_reduction: int = 0) -> TestResult:
    counts = np.asarray(counts, dtype=float)
    probs0 = np.asarray(probs0, dtype=float)
    if counts.shape != probs0.shape:
        raise ParameterError("counts and probabilities differ in length")
    if abs(probs0.sum() - 1.0) > 1e-8 or np.any(probs0 < 0):
        raise ParameterError("null probabilities must be nonnegative and sum to 1")
    df = counts.size - 1 - df_reduction
    if df <= 0:
        raise ParameterError(f"degrees of freedom must be positive, got {df}")
    expected = counts.sum() * probs0
    if np.any(expected <= 0):
        return invalid("zero expected count", df=float(df))
    stat = float(np.sum((counts - expected) ** 2 / expected))
    note = "expected count below 1" if np.any(expected < 1) else ""
    return TestResult(statistic=stat, p_value=float(ChiSquared(df).sf(stat)), df=float(df), note=note)


def bin_continuous(x, breakpoints) -> np.ndarray:
    """Counts in (-inf, b1], (b1, b2], ..., (bk, inf)."""
    breakpoints = np.asarray(breakpoints, dtype=float)
    if np.any(np.diff(breakpoints) <= 0):
        raise ParameterError("breakpoints must be strictly ascending")
    idx = np.searchsorted(breakpoints, np.asarray(x, dtype=float), side="left")
    return np.bincount(idx, minlength=breakpoints.size + 1)


def model_probs(dist: Distribution, breakpoints) -> np.ndarray:
    """Cell probabilities of ``dist`` for the bins of :func:`bin_continuous`."""
    edges = np.append(dist.cdf(np.asarray(breakpoints, dtype=float)), 1.0)
    return np.diff(edges, prepend=0.0)


def _kolmogorov_sf(x: float) -> float:
    """P(K > x) for the limiting Kolmogorov distribution."""
    if x <= 0:
        return 1.0
    if x < 1.0:
        # Small-x form converges fast here.
        k = np.arange(1, 30)
        cdf = math.sqrt(2 * math.pi) / x * np.sum(np.exp(-((2 * k - 1) ** 2) * math.pi**2 / (8 * x * x)))
        return _clamp(1.0 - cdf)
    k = np.arange(1, 101)
    return _clamp(2.0 * np.sum((-1.0) ** (k - 1) * np.exp(-2.0 * k * k * x * x)))


def _ks_exact_cdf(n: int, d: float) -> float:
    """P(D_n < d) by the matrix method of Marsaglia, Tsang and Wang."""
    nd = n * d
    k = int(nd) + 1
    m = 2 * k - 1
    h = k - nd
    i = np.arange(m)
    diff = i[:, None] - i[None, :] + 1
    mat = np.where(diff >= 0, 1.0, 0.0)
    powers = h ** np.arange(1, m + 1)
    mat[:, 0] -= powers
    mat[m - 1, :] -= powers[::-1]
    if 2 * h - 1 > 0:
        mat[m - 1, 0] += (2 * h - 1) ** m
    fact = special.gamma(np.maximum(diff, 0) + 1.0)
    mat = np.where(diff > 0, mat / fact, mat)

    # Matrix power with exponent tracking to avoid overflow.
    result = np.eye(m)
    result_exp = 0
    base = mat
    base_exp = 0
    e = n
    while e:
        if e & 1:
            result = result @ base
            result_exp += base_exp
            scale = np.max(np.abs(result))
            if scale > 1e140:
                result /= 1e140
                result_exp += 140
        e >>= 1
        if e:
            base = base @ base
            base_exp *= 2
            scale = np.max(np.abs(base))
            if scale > 1e140:
                base /= 1e140
                base_exp += 140
    value = result[k - 1, k - 1]
    # multiply by n!/n^n in log space
    log_value = math.log(value) if value > 0 else -math.inf
    log_value += result_exp * math.log(10) + math.lgamma(n + 1) - n * math.log(n)
    return math.exp(log_value) if log_value > -745 else 0.0


def ks_test_one_sample(x, target: Distribution) -> TestResult:
    x = np.sort(np.asarray(x, dtype=float))
    n = x.size
    if n == 0:
        return invalid("empty sample")
    f = np.asarray(target.cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    d = float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))
    ties = bool(np.any(np.diff(x) == 0))
    if n <= EXACT_KS_MAX_N and not ties:
        p = 1.0 - _ks_exact_cdf(n, d)
        note = "exact"
    else:
        p = _kolmogorov_sf(math.sqrt(n) * d)
        note = "asymptotic" + ("; ties present" if ties else "")
    return TestResult(statistic=d, p_value=_clamp(p), note=note)


# ---------------------------------------------------------------------------
# Two-sample tests
# ---------------------------------------------------------------------------


def t_test_two_sample(x, y, pooled: bool = False) -> TestResult:
    """Pooled-variance t test, or Welch's test when ``pooled`` is false."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n, m = x.size, y.size
    if n < 2 or m < 2:
        return invalid("need at least two observations per group")
    vx, vy = x.var(ddof=1), y.var(ddof=1)
    diff = x.mean() - y.mean()
    if pooled:
        df = n + m - 2.0
        sp2 = ((n - 1) * vx + (m - 1) * vy) / df
        se2 = sp2 * (1.0 / n + 1.0 / m)
    else:
        a, b = vx / n, vy / m
        se2 = a + b
        df = se2 * se2 / (a * a / (n - 1) + b * b / (m - 1)) if se2 > 0 else math.nan
    if not se2 > 0:
        return invalid("zero variance in both groups")
    t = diff / math.sqrt(se2)
    return TestResult(statistic=float(t), p_value=_t_two_sided(t, df), df=float(df))


def z_test_two_sample(x, y, sigma_x: float, sigma_y: float) -> TestResult:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 1 or y.size < 1:
        return invalid("empty group")
    z = (x.mean() - y.mean()) / math.sqrt(sigma_x**2 / x.size + sigma_y**2 / y.size)
    return TestResult(statistic=float(z), p_value=_norm_two_sided(z))


def var_ratio_f_test(x, y) -> TestResult:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n, m = x.size, y.size
    if n < 2 or m < 2:
        return invalid("need at least two observations per group")
    vy = y.var(ddof=1)
    if not vy > 0:
        return invalid("zero variance in the denominator sample")
    f = x.var(ddof=1) / vy
    df = (n - 1.0, m - 1.0)
    return TestResult(statistic=float(f), p_value=_equal_tails(float(FisherF(*df).cdf(f))), df=df)


# -- randomization tests ----------------------------------------------------------


def _welch_p_batch(values: np.ndarray, n: int) -> np.ndarray:
    """Welch p-values for each row split as (first n, rest)."""
    x, y = values[:, :n], values[:, n:]
    m = y.shape[1]
    a = x.var(axis=1, ddof=1) / n
    b = y.var(axis=1, ddof=1) / m
    se2 = a + b
    with np.errstate(divide="ignore", invalid="ignore"):
        df = se2 * se2 / (a * a / (n - 1) + b * b / (m - 1))
        t = (x.mean(axis=1) - y.mean(axis=1)) / np.sqrt(se2)
        p = special.betainc(df / 2.0, 0.5, df / (df + t * t))
    return np.where(se2 > 0, p, np.nan)


def _pooled_p_batch(values: np.ndarray, n: int) -> np.ndarray:
    x, y = values[:, :n], values[:, n:]
    m = y.shape[1]
    df = n + m - 2.0
    sp2 = ((n - 1) * x.var(axis=1, ddof=1) + (m - 1) * y.var(axis=1, ddof=1)) / df
    se2 = sp2 * (1.0 / n + 1.0 / m)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (x.mean(axis=1) - y.mean(axis=1)) / np.sqrt(se2)
        p = special.betainc(df / 2.0, 0.5, df / (df + t * t))
    return np.where(se2 > 0, p, np.nan)


def _one_sample_p_batch(values: np.ndarray) -> np.ndarray:
    n = values.shape[1]
    sd = values.std(axis=1, ddof=1)
    df = n - 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        t = values.mean(axis=1) / sd * math.sqrt(n)
        p = special.betainc(df / 2.0, 0.5, df / (df + t * t))
    return np.where(sd > 0, p, np.nan)


def _randomization_p(p_all: np.ndarray) -> TestResult:
    p0, ps = p_all[0], p_all[1:]
    if np.isnan(p0):
        return invalid("base test undefined for the observed data")
    degenerate = np.isnan(ps)
    # Degenerate resamples count as at least as extreme as observed.
    hits = np.sum(ps[~degenerate] <= p0) + np.sum(degenerate)
    note = f"{int(degenerate.sum())} degenerate resamples" if degenerate.any() else ""
    return TestResult(statistic=float(p0), p_value=float(hits / ps.size), note=note)


def randomization_test_unpaired(x, y, inner_reps: int, rng: RandomSource, pooled: bool = False) -> TestResult:
    """Monte Carlo permutation test built on the two-sample t test.

    The p-value is the share of label permutations whose t-test p-value is at
    most the observed one. Welch's test is the default base test.
    """
    if inner_reps < 1:
        raise ParameterError("inner_reps must be >= 1")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.size
    if n < 2 or y.size < 2:
        return invalid("need at least two observations per group")
    pooled_values = np.concatenate((x, y))
    shuffled = rng.generator.permuted(np.broadcast_to(pooled_values, (inner_reps, pooled_values.size)), axis=1)
    rows = np.vstack((pooled_values[None, :], shuffled))
    batch = _pooled_p_batch if pooled else _welch_p_batch
    return _randomization_p(batch(rows, n))


def randomization_test_paired(d, inner_reps: int, rng: RandomSource) -> TestResult:
    """Monte Carlo sign-flip test built on the one-sample t test of differences."""
    if inner_reps < 1:
        raise ParameterError("inner_reps must be >= 1")
    d = np.asarray(d, dtype=float)
    if d.size < 2:
        return invalid("need at least two differences")
    signs = rng.generator.choice(np.array([-1.0, 1.0]), size=(inner_reps, d.size), replace=True)
    rows = np.vstack((d[None, :], signs * d))
    return _randomization_p(_one_sample_p_batch(rows))


# ---------------------------------------------------------------------------
# Association
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ContingencyTable:
    cells: np.ndarray

    def __post_init__(self):
        cells = np.array(self.cells, dtype=float)
        if cells.ndim != 2 or min(cells.shape) < 1:
            raise ParameterError("contingency table must be a nonempty 2-D array")
        if np.any(cells < 0):
            raise ParameterError("contingency table counts must be nonnegative")
        object.__setattr__(self, "cells", cells)

    @property
    def row_totals(self) -> np.ndarray:
        return self.cells.sum(axis=1)

    @property
    def col_totals(self) -> np.ndarray:
        return self.cells.sum(axis=0)

    @property
    def total(self) -> float:
        return float(self.cells.sum())


def chisq_contingency(table) -> TestResult:
    """Pearson chi-squared test of homogeneity / independence (no Yates correction)."""
    if not isinstance(table, ContingencyTable):
        table = ContingencyTable(np.asarray(table))
    rows, cols = table.row_totals, table.col_totals
    r, c = table.cells.shape
    df = float((r - 1) * (c - 1))
    if np.any(rows == 0) or np.any(cols == 0):
        return invalid("zero margin", df=df)
    if df == 0:
        return invalid("table needs at least two rows and two columns", df=df)
    expected = np.outer(rows, cols) / table.total
    stat = float(np.sum((table.cells - expected) ** 2 / expected))
    note = "expected count below 5" if np.any(expected < 5) else ""
    return TestResult(statistic=stat, p_value=float(ChiSquared(df).sf(stat)), df=df, note=note)


def cor_test(x, y, rho0: float = 0.0) -> TestResult:
    """Test of a Pearson correlation: t form for rho0 = 0, Fisher z otherwise."""
    if not -1 < rho0 < 1:
        raise ParameterError("rho0 must lie in (-1, 1)")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.size
    if n != y.size:
        raise ParameterError("x and y differ in length")
    xc, yc = x - x.mean(), y - y.mean()
    sxx, syy = xc @ xc, yc @ yc
    if not (sxx > 0 and syy > 0):
        return invalid("constant variable")
    r = float(np.clip((xc @ yc) / math.sqrt(sxx * syy), -1.0, 1.0))
    if rho0 == 0.0:
        if n < 3:
            return invalid("need at least three pairs")
        df = n - 2.0
        if abs(r) == 1.0:
            return TestResult(statistic=math.copysign(math.inf, r), p_value=0.0, df=df)
        t = r * math.sqrt(df) / math.sqrt(1 - r * r)
        return TestResult(statistic=t, p_value=_t_two_sided(t, df), df=df)
    if n < 4:
        return invalid("need at least four pairs")
    if abs(r) == 1.0:
        return TestResult(statistic=math.copysign(math.inf, r), p_value=0.0)
    z = (math.atanh(r) - math.atanh(rho0)) * math.sqrt(n - 3)
    return TestResult(statistic=z, p_value=_norm_two_sided(z))


# ---------------------------------------------------------------------------
# Multivariate
# ---------------------------------------------------------------------------


def _hotelling_f(t2: float, p: int, df_error: float) -> tuple[float, tuple]:
    f = (df_error - p + 1) / (p * df_error) * t2
    return f, (float(p), float(df_error - p + 1))


def hotelling_one_sample(data, mu0) -> TestResult:
    """Hotelling's T^2 test of a mean vector, reported as its exact F."""
    data = np.asarray(data, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    n, p = data.shape
    mu0 = np.broadcast_to(np.asarray(mu0, dtype=float), (p,))
    if n <= p:
        return invalid("need more observations than variables")
    diff = data.mean(axis=0) - mu0
    s = np.cov(data, rowvar=False, ddof=1).reshape(p, p)
    try:
        t2 = float(n * diff @ np.linalg.solve(s, diff))
    except np.linalg.LinAlgError:
        return invalid("singular covariance matrix")
    if not math.isfinite(t2) or t2 < 0:
        return invalid("singular covariance matrix")
    f, df = _hotelling_f(t2, p, n - 1.0)
    return TestResult(statistic=f, p_value=float(FisherF(*df).sf(f)), df=df, note=f"T2={t2:.6g}")


def hotelling_paired(x, y) -> TestResult:
    return hotelling_one_sample(np.asarray(x, dtype=float) - np.asarray(y, dtype=float), 0.0)


def hotelling_two_sample(x, y) -> TestResult:
    """Two-sample Hotelling's T^2 with pooled covariance, reported as its exact F."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim == 1:
        x, y = x[:, None], y[:, None]
    n1, p = x.shape
    n2 = y.shape[0]
    df_error = n1 + n2 - 2.0
    if df_error < p:
        return invalid("need more observations than variables")
    xc = x - x.mean(axis=0)
    yc = y - y.mean(axis=0)
    s = (xc.T @ xc + yc.T @ yc) / df_error
    diff = x.mean(axis=0) - y.mean(axis=0)
    try:
        t2 = float(n1 * n2 / (n1 + n2) * diff @ np.linalg.solve(s, diff))
    except np.linalg.LinAlgError:
        return invalid("singular covariance matrix")
    if not math.isfinite(t2) or t2 < 0:
        return invalid("singular covariance matrix")
    f, df = _hotelling_f(t2, p, df_error)
    return TestResult(statistic=f, p_value=float(FisherF(*df).sf(f)), df=df, note=f"T2={t2:.6g}")


__all__ = [
    "TestResult",
    "ContingencyTable",
    "binom_exact_test",
    "prop_score_test",
    "z_test_one_sample",
    "t_test_one_sample",
    "paired_t_test",
    "variance_chisq_test",
    "sign_test",
    "wilcoxon_signed_rank",
    "wilcoxon_rank_sum",
    "chisq_gof",
    "bin_continuous",
    "model_probs",
    "ks_test_one_sample",
    "t_test_two_sample",
    "z_test_two_sample",
    "var_ratio_f_test",
    "randomization_test_unpaired",
    "randomization_test_paired",
    "chisq_contingency",
    "cor_test",
    "hotelling_one_sample",
    "hotelling_paired",
    "hotelling_two_sample",
]
