"""Probability kernel: random streams, distributions, CDFs, quantiles, samplers.

Every random draw in the package goes through a :class:`RandomSource`. A source
is identified by ``(seed, stream_id)`` and maps to a Philox counter-based
generator keyed by that pair, so replication ``i`` of a simulation always sees
the same numbers no matter which worker runs it.

Continuous normal-family draws use the inverse CDF on uniform draws, which keeps
the number of uniforms consumed per draw fixed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Union

import numpy as np
from scipy import optimize, special

from .exceptions import NumericError, ParameterError

ArrayLike = Union[float, np.ndarray]

_UINT64_MAX = 2**64 - 1
# Half a unit in the last place of a 53-bit uniform: keeps draws inside (0, 1).
_HALF_ULP = 2.0**-54
_MAX_SERIES_TERMS = 1_000_000


# ---------------------------------------------------------------------------
# Random streams
# ---------------------------------------------------------------------------


class RandomSource:
    """Deterministic random stream addressed by ``(seed, stream_id, substream)``.

    ``seed`` and ``stream_id`` form the 128-bit Philox key; ``substream`` sets
    the most significant counter word, which partitions one keyed stream into
    2**64 disjoint blocks. :meth:`child` hands out such blocks, e.g. for the
    inner loop of a randomization test.
    """

    __slots__ = ("seed", "stream_id", "substream", "generator")

    def __init__(self, seed: int, stream_id: int = 0, substream: int = 0):
        for name, value in (("seed", seed), ("stream_id", stream_id), ("substream", substream)):
            if not 0 <= int(value) <= _UINT64_MAX:
                raise ParameterError(f"{name} must be an unsigned 64-bit integer, got {value}")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self.substream = int(substream)
        bitgen = np.random.Philox(
            key=np.array([self.seed, self.stream_id], dtype=np.uint64),
            counter=np.array([0, 0, 0, self.substream], dtype=np.uint64),
        )
        self.generator = np.random.Generator(bitgen)

    def __repr__(self) -> str:
        return f"RandomSource(seed={self.seed}, stream_id={self.stream_id}, substream={self.substream})"

    def child(self, index: int) -> "RandomSource":
        """Independent sub-stream; ``index`` must be >= 1 (0 is this stream)."""
        if index < 1:
            raise ParameterError("child index must be >= 1")
        return RandomSource(self.seed, self.stream_id, self.substream + index)

    def uniform(self, size=None) -> ArrayLike:
        """Uniform draws strictly inside (0, 1)."""
        return self.generator.random(size) + _HALF_ULP

    def standard_normal(self, size=None) -> ArrayLike:
        return special.ndtri(self.uniform(size))

    def permutation(self, x: np.ndarray) -> np.ndarray:
        return self.generator.permutation(x)


# ---------------------------------------------------------------------------
# Special functions
# ---------------------------------------------------------------------------


def reg_inc_gamma(a: ArrayLike, x: ArrayLike) -> ArrayLike:
    """Regularized lower incomplete gamma function P(a, x)."""
    a = np.asarray(a, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(a <= 0) or np.any(x < 0) or np.any(np.isnan(x)):
        raise ParameterError("reg_inc_gamma requires a > 0 and x >= 0")
    return special.gammainc(a, x)[()]


def reg_inc_gamma_upper(a: ArrayLike, x: ArrayLike) -> ArrayLike:
    """Complement Q(a, x) = 1 - P(a, x), accurate in the upper tail."""
    a = np.asarray(a, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(a <= 0) or np.any(x < 0) or np.any(np.isnan(x)):
        raise ParameterError("reg_inc_gamma_upper requires a > 0 and x >= 0")
    return special.gammaincc(a, x)[()]


def reg_inc_beta(a: ArrayLike, b: ArrayLike, x: ArrayLike) -> ArrayLike:
    """Regularized incomplete beta function I_x(a, b)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(a <= 0) or np.any(b <= 0) or np.any((x < 0) | (x > 1)) or np.any(np.isnan(x)):
        raise ParameterError("reg_inc_beta requires a, b > 0 and 0 <= x <= 1")
    return special.betainc(a, b, x)[()]


# ---------------------------------------------------------------------------
# Distributions
# ---------------------------------------------------------------------------


def _check_prob(p: ArrayLike, *, closed: bool) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    bad = (p < 0) | (p > 1) if closed else (p <= 0) | (p >= 1)
    if np.any(bad) or np.any(np.isnan(p)):
        interval = "[0, 1]" if closed else "(0, 1)"
        raise ParameterError(f"probability must lie in {interval}")
    return p


class Distribution:
    """Common interface of the frozen distribution objects below."""

    discrete = False

    def cdf(self, x: ArrayLike) -> ArrayLike:
        raise NotImplementedError

    def sf(self, x: ArrayLike) -> ArrayLike:
        return 1.0 - self.cdf(x)

    def quantile(self, p: ArrayLike) -> ArrayLike:
        raise NotImplementedError

    def sample_n(self, n: int, rng: RandomSource) -> np.ndarray:
        raise NotImplementedError

    def mean(self) -> float:
        raise NotImplementedError

    def variance(self) -> float:
        raise NotImplementedError


def _positive(name: str, value: float) -> None:
    if not value > 0 or not math.isfinite(value):
        raise ParameterError(f"{name} must be positive and finite, got {value}")


def _t_cdf(t: np.ndarray, df: float) -> np.ndarray:
    tail = 0.5 * special.betainc(df / 2.0, 0.5, df / (df + t * t))
    return np.where(t < 0, tail, 1.0 - tail)


@dataclass(frozen=True)
class Normal(Distribution):
    mu: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        _positive("sigma", self.sigma)

    def cdf(self, x):
        return special.ndtr((np.asarray(x, dtype=float) - self.mu) / self.sigma)[()]

    def sf(self, x):
        return special.ndtr((self.mu - np.asarray(x, dtype=float)) / self.sigma)[()]

    def quantile(self, p):
        p = _check_prob(p, closed=False)
        return (self.mu + self.sigma * special.ndtri(p))[()]

    def sample_n(self, n, rng):
        return self.mu + self.sigma * rng.standard_normal(n)

    def mean(self):
        return self.mu

    def variance(self):
        return self.sigma**2


@dataclass(frozen=True)
class LogNormal(Distribution):
    meanlog: float = 0.0
    sdlog: float = 1.0

    def __post_init__(self):
        _positive("sdlog", self.sdlog)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = (np.log(np.where(x > 0, x, 1.0)) - self.meanlog) / self.sdlog
        return np.where(x > 0, special.ndtr(z), 0.0)[()]

    def quantile(self, p):
        p = _check_prob(p, closed=False)
        return np.exp(self.meanlog + self.sdlog * special.ndtri(p))[()]

    def sample_n(self, n, rng):
        return np.exp(self.meanlog + self.sdlog * rng.standard_normal(n))

    def mean(self):
        return math.exp(self.meanlog + self.sdlog**2 / 2)

    def variance(self):
        return (math.exp(self.sdlog**2) - 1) * math.exp(2 * self.meanlog + self.sdlog**2)


@dataclass(frozen=True)
class Uniform(Distribution):
    min: float = 0.0
    max: float = 1.0

    def __post_init__(self):
        if not self.min < self.max:
            raise ParameterError(f"Uniform requires min < max, got ({self.min}, {self.max})")

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.clip((x - self.min) / (self.max - self.min), 0.0, 1.0)[()]

    def quantile(self, p):
        p = _check_prob(p, closed=False)
        return (self.min + p * (self.max - self.min))[()]

    def sample_n(self, n, rng):
        return self.min + rng.uniform(n) * (self.max - self.min)

    def mean(self):
        return (self.min + self.max) / 2

    def variance(self):
        return (self.max - self.min) ** 2 / 12


@dataclass(frozen=True)
class Binomial(Distribution):
    n: int = 1
    p: float = 0.5

    discrete = True

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 0:
            raise ParameterError(f"Binomial size must be a nonnegative integer, got {self.n}")
        if not 0 <= self.p <= 1:
            raise ParameterError(f"Binomial probability must lie in [0, 1], got {self.p}")

    def pmf(self, k: ArrayLike) -> ArrayLike:
        k = np.asarray(k, dtype=float)
        n, p = self.n, self.p
        inside = (k >= 0) & (k <= n) & (k == np.floor(k))
        ks = np.where(inside, k, 0.0)
        if p in (0.0, 1.0):
            mode = 0 if p == 0 else n
            return np.where(inside & (ks == mode), 1.0, 0.0)[()]
        logpmf = (
            special.gammaln(n + 1)
            - special.gammaln(ks + 1)
            - special.gammaln(n - ks + 1)
            + ks * math.log(p)
            + (n - ks) * math.log1p(-p)
        )
        return np.where(inside, np.exp(logpmf), 0.0)[()]

    def cdf(self, x):
        k = np.floor(np.asarray(x, dtype=float))
        n, p = self.n, self.p
        inner = (k >= 0) & (k < n)
        ks = np.where(inner, k, 0.0)
        if p == 0.0:
            body = np.ones_like(ks)
        elif p == 1.0:
            body = np.zeros_like(ks)
        else:
            body = special.betainc(np.maximum(n - ks, 1e-300), ks + 1, 1.0 - p)
        return np.where(k < 0, 0.0, np.where(k >= n, 1.0, body))[()]

    def sf(self, x):
        k = np.floor(np.asarray(x, dtype=float))
        n, p = self.n, self.p
        inner = (k >= 0) & (k < n)
        ks = np.where(inner, k, 0.0)
        if p == 0.0:
            body = np.zeros_like(ks)
        elif p == 1.0:
            body = np.ones_like(ks)
        else:
            body = special.betainc(ks + 1, np.maximum(n - ks, 1e-300), p)
        return np.where(k < 0, 1.0, np.where(k >= n, 0.0, body))[()]

    def quantile(self, p):
        p = _check_prob(p, closed=True)
        out = np.vectorize(self._quantile_scalar, otypes=[float])(p)
        return out[()]

    def _quantile_scalar(self, p: float) -> float:
        # Left-continuous inverse: smallest k with cdf(k) >= p.
        lo, hi = 0, self.n
        if self.cdf(lo) >= p:
            return 0.0
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if self.cdf(mid) >= p:
                hi = mid
            else:
                lo = mid
        return float(hi)

    def sample_n(self, n, rng):
        return rng.generator.binomial(self.n, self.p, size=n).astype(float)

    def mean(self):
        return self.n * self.p

    def variance(self):
        return self.n * self.p * (1 - self.p)


def Bernoulli(p: float) -> Binomial:
    """Bernoulli(p) is Binomial(1, p)."""
    return Binomial(1, p)


@dataclass(frozen=True)
class ChiSquared(Distribution):
    df: float = 1.0

    def __post_init__(self):
        _positive("df", self.df)

    def cdf(self, x):
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        return special.gammainc(self.df / 2.0, x / 2.0)[()]

    def sf(self, x):
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        return special.gammaincc(self.df / 2.0, x / 2.0)[()]

    def quantile(self, p):
        p = _check_prob(p, closed=False)
        return (2.0 * special.gammaincinv(self.df / 2.0, p))[()]

    def sample_n(self, n, rng):
        return 2.0 * rng.generator.standard_gamma(self.df / 2.0, size=n)

    def mean(self):
        return self.df

    def variance(self):
        return 2 * self.df


@dataclass(frozen=True)
class StudentT(Distribution):
    df: float = 1.0

    def __post_init__(self):
        _positive("df", self.df)

    def cdf(self, x):
        return _t_cdf(np.asarray(x, dtype=float), self.df)[()]

    def sf(self, x):
        return _t_cdf(-np.asarray(x, dtype=float), self.df)[()]

    def quantile(self, p):
        p = _check_prob(p, closed=False)
        return special.stdtrit(self.df, p)[()]

    def sample_n(self, n, rng):
        z = rng.standard_normal(n)
        return z / np.sqrt(2.0 * rng.generator.standard_gamma(self.df / 2.0, size=n) / self.df)

    def mean(self):
        return 0.0 if self.df > 1 else math.nan

    def variance(self):
        return self.df / (self.df - 2) if self.df > 2 else math.inf


@dataclass(frozen=True)
class FisherF(Distribution):
    df1: float = 1.0
    df2: float = 1.0

    def __post_init__(self):
        _positive("df1", self.df1)
        _positive("df2", self.df2)

    def cdf(self, x):
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        d1, d2 = self.df1, self.df2
        return special.betainc(d1 / 2.0, d2 / 2.0, d1 * x / (d1 * x + d2))[()]

    def sf(self, x):
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        d1, d2 = self.df1, self.df2
        return special.betainc(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * x))[()]

    def quantile(self, p):
        p = _check_prob(p, closed=False)
        return special.fdtri(self.df1, self.df2, p)[()]

    def sample_n(self, n, rng):
        g = rng.generator
        return (2.0 * g.standard_gamma(self.df1 / 2.0, size=n) / self.df1) / (
            2.0 * g.standard_gamma(self.df2 / 2.0, size=n) / self.df2
        )

    def mean(self):
        return self.df2 / (self.df2 - 2) if self.df2 > 2 else math.inf


# -- noncentral families -----------------------------------------------------


def _poisson_window(lam: float, scale: float = 1.0, tol: float = 1e-14) -> tuple[np.ndarray, np.ndarray]:
    """Indices 0..J and Poisson(lam) weights such that the neglected upper mass,
    multiplied by ``scale``, is below ``tol``."""
    if lam == 0.0:
        return np.zeros(1), np.ones(1)
    mode = math.floor(lam)
    upper = mode + math.ceil(12.0 * math.sqrt(lam) + 30)
    while True:
        if upper > _MAX_SERIES_TERMS:
            raise NumericError(f"noncentral series did not converge for ncp/2 = {lam}")
        # P(Pois(lam) > upper) = P(upper + 1, lam)
        remainder = special.gammainc(upper + 1, lam)
        if remainder * scale < tol:
            break
        upper = 2 * upper
    j = np.arange(upper + 1, dtype=float)
    weights = np.exp(j * math.log(lam) - lam - special.gammaln(j + 1))
    return j, weights


@dataclass(frozen=True)
class NoncentralChiSquared(Distribution):
    df: float = 1.0
    ncp: float = 0.0

    def __post_init__(self):
        _positive("df", self.df)
        if not self.ncp >= 0:
            raise ParameterError(f"ncp must be >= 0, got {self.ncp}")

    def cdf(self, x):
        return np.vectorize(self._cdf_scalar, otypes=[float])(x)[()]

    def _cdf_scalar(self, x: float) -> float:
        if x <= 0:
            return 0.0
        j, w = _poisson_window(self.ncp / 2.0)
        return float(min(1.0, np.dot(w, special.gammainc(self.df / 2.0 + j, x / 2.0))))

    def sf(self, x):
        return np.vectorize(self._sf_scalar, otypes=[float])(x)[()]

    def _sf_scalar(self, x: float) -> float:
        if x <= 0:
            return 1.0
        j, w = _poisson_window(self.ncp / 2.0)
        return float(min(1.0, np.dot(w, special.gammaincc(self.df / 2.0 + j, x / 2.0))))

    def quantile(self, p):
        p = _check_prob(p, closed=False)
        return np.vectorize(lambda q: _invert(self, q, 0.0), otypes=[float])(p)[()]

    def sample_n(self, n, rng):
        if self.ncp == 0:
            return ChiSquared(self.df).sample_n(n, rng)
        return rng.generator.noncentral_chisquare(self.df, self.ncp, size=n)

    def mean(self):
        return self.df + self.ncp


@dataclass(frozen=True)
class NoncentralF(Distribution):
    df1: float = 1.0
    df2: float = 1.0
    ncp: float = 0.0

    def __post_init__(self):
        _positive("df1", self.df1)
        _positive("df2", self.df2)
        if not self.ncp >= 0:
            raise ParameterError(f"ncp must be >= 0, got {self.ncp}")

    def cdf(self, x):
        return np.vectorize(self._cdf_scalar, otypes=[float])(x)[()]

    def _cdf_scalar(self, x: float) -> float:
        if x <= 0:
            return 0.0
        d1, d2 = self.df1, self.df2
        y = d1 * x / (d1 * x + d2)
        j, w = _poisson_window(self.ncp / 2.0)
        return float(min(1.0, np.dot(w, special.betainc(d1 / 2.0 + j, d2 / 2.0, y))))

    def sf(self, x):
        return np.vectorize(self._sf_scalar, otypes=[float])(x)[()]

    def _sf_scalar(self, x: float) -> float:
        if x <= 0:
            return 1.0
        d1, d2 = self.df1, self.df2
        y = d2 / (d1 * x + d2)
        j, w = _poisson_window(self.ncp / 2.0)
        return float(min(1.0, np.dot(w, special.betainc(d2 / 2.0, d1 / 2.0 + j, y))))

    def quantile(self, p):
        p = _check_prob(p, closed=False)
        return np.vectorize(lambda q: _invert(self, q, 0.0), otypes=[float])(p)[()]

    def sample_n(self, n, rng):
        num = NoncentralChiSquared(self.df1, self.ncp).sample_n(n, rng) / self.df1
        return num / (ChiSquared(self.df2).sample_n(n, rng) / self.df2)


@dataclass(frozen=True)
class NoncentralT(Distribution):
    """Noncentral t; ``ncp`` may be any real (its sign sets the skew)."""

    df: float = 1.0
    ncp: float = 0.0

    def __post_init__(self):
        _positive("df", self.df)
        if not math.isfinite(self.ncp):
            raise ParameterError("ncp must be finite")

    def cdf(self, x):
        return np.vectorize(self._cdf_scalar, otypes=[float])(x)[()]

    def sf(self, x):
        return np.vectorize(lambda t: 1.0 - self._cdf_scalar(t) if t < 0 else self._upper(t, self.ncp),
                            otypes=[float])(x)[()]

    def _cdf_scalar(self, t: float) -> float:
        if t >= 0:
            return 1.0 - self._upper(t, self.ncp)
        return self._upper(-t, -self.ncp)

    def _upper(self, t: float, delta: float) -> float:
        """P(T > t) for t >= 0 via the Poisson-weighted incomplete-beta series."""
        nu = self.df
        lower = special.ndtr(-delta)
        if t == 0:
            return 1.0 - lower
        x = t * t / (t * t + nu)
        lam = delta * delta / 2.0
        j, p = _poisson_window(lam, scale=1.0 + abs(delta))
        if lam > 0:
            q = np.exp(j * math.log(lam) - lam - special.gammaln(j + 1.5)) * delta / math.sqrt(2.0)
        else:
            q = np.zeros_like(j)
        # P(T <= t) = Phi(-delta) + 1/2 sum_j [p_j I_x(j+1/2, nu/2) + q_j I_x(j+1, nu/2)];
        # complementary betas I_{1-x}(nu/2, .) keep precision in the upper tail.
        ic_p = special.betainc(nu / 2.0, j + 0.5, 1.0 - x)
        ic_q = special.betainc(nu / 2.0, j + 1.0, 1.0 - x)
        value = 1.0 - lower - 0.5 * (p.sum() + q.sum()) + 0.5 * (p @ ic_p + q @ ic_q)
        return float(min(1.0, max(0.0, value)))

    def quantile(self, p):
        p = _check_prob(p, closed=False)
        return np.vectorize(lambda q: _invert(self, q, None), otypes=[float])(p)[()]

    def sample_n(self, n, rng):
        z = rng.standard_normal(n)
        chi = 2.0 * rng.generator.standard_gamma(self.df / 2.0, size=n)
        return (z + self.ncp) / np.sqrt(chi / self.df)


def _invert(dist: Distribution, p: float, lower_bound: float | None) -> float:
    """Root of cdf(x) = p by bracket expansion and Brent's method."""
    lo = lower_bound if lower_bound is not None else -1.0
    hi = 1.0
    while dist.cdf(hi) < p:
        hi *= 2.0
        if hi > 1e300:
            raise NumericError("quantile bracket expansion failed")
    if lower_bound is None:
        while dist.cdf(lo) > p:
            lo *= 2.0
            if lo < -1e300:
                raise NumericError("quantile bracket expansion failed")
    return optimize.brentq(lambda v: dist.cdf(v) - p, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)


# ---------------------------------------------------------------------------
# Functional interface
# ---------------------------------------------------------------------------

NONCENTRAL_KINDS = (NoncentralT, NoncentralChiSquared, NoncentralF)


def cdf(d: Distribution, x: ArrayLike) -> ArrayLike:
    """P(X <= x); right-continuous for discrete kinds."""
    return d.cdf(x)


def quantile(d: Distribution, p: ArrayLike) -> ArrayLike:
    """Generalized inverse inf{x : cdf(x) >= p}."""
    return d.quantile(p)


def noncentral_cdf(d: Distribution, x: ArrayLike) -> ArrayLike:
    if not isinstance(d, NONCENTRAL_KINDS):
        raise ParameterError(f"noncentral_cdf expects a noncentral distribution, got {type(d).__name__}")
    return d.cdf(x)


def sample(d: Distribution, rng: RandomSource) -> float:
    return float(d.sample_n(1, rng)[0])


def sample_n(d: Distribution, n: int, rng: RandomSource) -> np.ndarray:
    if n < 0:
        raise ParameterError("n must be >= 0")
    return d.sample_n(int(n), rng)


def sample_multinomial(size: int, probs, rng: RandomSource) -> np.ndarray:
    probs = np.asarray(probs, dtype=float)
    if size < 0:
        raise ParameterError("multinomial size must be >= 0")
    if np.any(probs < 0):
        raise ParameterError("multinomial probabilities must be nonnegative")
    if abs(probs.sum() - 1.0) > 1e-12:
        raise ParameterError(f"multinomial probabilities must sum to 1, got {probs.sum()!r}")
    return rng.generator.multinomial(int(size), probs)


@dataclass(frozen=True, eq=False)
class CovarianceMatrix:
    """Symmetric positive semi-definite covariance with a cached Cholesky factor."""

    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        s = np.array(self.entries, dtype=float)
        if s.ndim != 2 or s.shape[0] != s.shape[1] or s.shape[0] == 0:
            raise ParameterError("covariance must be a nonempty square matrix")
        tol = 1e-10 * max(np.max(np.abs(s)), np.finfo(float).tiny)
        if np.max(np.abs(s - s.T)) > tol:
            raise ParameterError("covariance matrix is not symmetric")
        if np.any(np.diag(s) < -tol):
            raise ParameterError("covariance matrix has a negative variance")
        s.setflags(write=False)
        object.__setattr__(self, "entries", s)
        _ = self.cholesky  # validate eagerly

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @cached_property
    def cholesky(self) -> np.ndarray:
        """Lower factor L with L L^T = entries; zero pivots allowed (PSD)."""
        s = self.entries
        tol = 1e-10 * max(np.max(np.abs(s)), np.finfo(float).tiny)
        k = s.shape[0]
        low = np.zeros_like(s)
        for j in range(k):
            d = s[j, j] - low[j, :j] @ low[j, :j]
            if d < -tol:
                raise ParameterError("covariance matrix is not positive semi-definite")
            if d <= tol:
                for i in range(j + 1, k):
                    if abs(s[i, j] - low[i, :j] @ low[j, :j]) > tol:
                        raise ParameterError("covariance matrix is not positive semi-definite")
                continue
            low[j, j] = math.sqrt(d)
            for i in range(j + 1, k):
                low[i, j] = (s[i, j] - low[i, :j] @ low[j, :j]) / low[j, j]
        low.setflags(write=False)
        return low

    @classmethod
    def from_sd_cor(cls, sd, cor) -> "CovarianceMatrix":
        sd = np.asarray(sd, dtype=float)
        return cls(np.asarray(cor, dtype=float) * np.outer(sd, sd))


def sample_mvnormal(n: int, mu, sigma: CovarianceMatrix | np.ndarray, rng: RandomSource) -> np.ndarray:
    """``n`` rows drawn i.i.d. from N(mu, sigma)."""
    if not isinstance(sigma, CovarianceMatrix):
        sigma = CovarianceMatrix(np.asarray(sigma, dtype=float))
    mu = np.asarray(mu, dtype=float)
    if mu.shape != (sigma.dim,):
        raise ParameterError(f"mean has length {mu.size}, covariance has dimension {sigma.dim}")
    z = rng.standard_normal((int(n), sigma.dim))
    return mu + z @ sigma.cholesky.T
