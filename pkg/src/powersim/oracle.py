"""Closed-form power of the tests that have one.

Everything here is computed from the noncentral distributions in
:mod:`powersim.probkit`; none of it touches the simulator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exceptions import ParameterError
from .probkit import (
    ChiSquared,
    FisherF,
    Normal,
    NoncentralChiSquared,
    NoncentralF,
    NoncentralT,
    StudentT,
)

METHODS = ("normal", "noncentral-t", "noncentral-chisq", "noncentral-f", "fisher-z")

_STD = Normal(0.0, 1.0)


@dataclass(frozen=True)
class AnalyticPower:
    power: float
    method: str

    def __post_init__(self):
        if self.method not in METHODS:
            raise ParameterError(f"unknown method {self.method!r}")
        if not 0.0 <= self.power <= 1.0:
            raise ParameterError(f"power {self.power} outside [0, 1]")


def _alpha(alpha: float) -> None:
    if not 0 < alpha < 1:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")


def _clip(p: float) -> float:
    return float(min(1.0, max(0.0, p)))


def _normal_power(shift: float, alpha: float) -> float:
    crit = float(_STD.quantile(1 - alpha / 2))
    return float(_STD.cdf(-crit + shift) + _STD.cdf(-crit - shift))


def power_z_one_sample(n: int, delta: float, sigma: float, alpha: float = 0.05) -> AnalyticPower:
    _alpha(alpha)
    if not sigma > 0 or n < 1:
        raise ParameterError("need sigma > 0 and n >= 1")
    return AnalyticPower(_clip(_normal_power(abs(delta) * math.sqrt(n) / sigma, alpha)), "normal")


def power_z_two_sample(
    n: int, m: int, delta: float, sigma_x: float, sigma_y: float, alpha: float = 0.05
) -> AnalyticPower:
    _alpha(alpha)
    if not (sigma_x > 0 and sigma_y > 0) or n < 1 or m < 1:
        raise ParameterError("need positive standard deviations and group sizes")
    se = math.sqrt(sigma_x**2 / n + sigma_y**2 / m)
    return AnalyticPower(_clip(_normal_power(abs(delta) / se, alpha)), "normal")


def _t_power(ncp: float, df: float, alpha: float) -> float:
    crit = float(StudentT(df).quantile(1 - alpha / 2))
    if ncp == 0:
        return alpha
    dist = NoncentralT(df, ncp)
    return float(dist.sf(crit) + dist.cdf(-crit))


def power_t_one_sample(n: int, delta: float, sigma: float, alpha: float = 0.05) -> AnalyticPower:
    _alpha(alpha)
    if not sigma > 0 or n < 2:
        raise ParameterError("need sigma > 0 and n >= 2")
    return AnalyticPower(_clip(_t_power(delta * math.sqrt(n) / sigma, n - 1, alpha)), "noncentral-t")


def power_t_two_sample_pooled(n: int, m: int, delta: float, sigma: float, alpha: float = 0.05) -> AnalyticPower:
    _alpha(alpha)
    if not sigma > 0 or n < 1 or m < 1 or n + m < 3:
        raise ParameterError("need sigma > 0 and n + m >= 3")
    ncp = delta / (sigma * math.sqrt(1 / n + 1 / m))
    return AnalyticPower(_clip(_t_power(ncp, n + m - 2, alpha)), "noncentral-t")


def _probs(p, name: str) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size < 2 or np.any(p < 0) or abs(p.sum() - 1) > 1e-9:
        raise ParameterError(f"{name} must be a probability vector with at least two cells")
    return p


def chisq_gof_ncp(n: int, p0: Sequence[float], p1: Sequence[float]) -> float:
    p0 = _probs(p0, "p0")
    p1 = _probs(p1, "p1")
    if p0.shape != p1.shape:
        raise ParameterError("p0 and p1 differ in length")
    if np.any(p0 == 0):
        raise ParameterError("p0 must be positive in every cell")
    return float(n * np.sum((p1 - p0) ** 2 / p0))


def power_chisq_gof(n: int, p0: Sequence[float], p1: Sequence[float], alpha: float = 0.05) -> AnalyticPower:
    _alpha(alpha)
    ncp = chisq_gof_ncp(n, p0, p1)
    df = len(p0) - 1
    crit = float(ChiSquared(df).quantile(1 - alpha))
    power = alpha if ncp == 0 else float(NoncentralChiSquared(df, ncp).sf(crit))
    return AnalyticPower(_clip(power), "noncentral-chisq")


def power_anova_fixed(
    cell_means: Sequence[float], sigma: float, cell_n: Sequence[int], alpha: float = 0.05
) -> AnalyticPower:
    """Power of the one-way F test; ``cell_n`` may be a single common size."""
    _alpha(alpha)
    means = np.asarray(cell_means, dtype=float)
    sizes = np.broadcast_to(np.asarray(cell_n, dtype=float), means.shape)
    if means.size < 2:
        raise ParameterError("need at least two cells")
    if not sigma > 0 or np.any(sizes < 1):
        raise ParameterError("need sigma > 0 and every cell size >= 1")
    df1, df2 = means.size - 1, sizes.sum() - means.size
    if df2 < 1:
        raise ParameterError("no error degrees of freedom")
    grand = np.sum(sizes * means) / sizes.sum()
    ncp = float(np.sum(sizes * (means - grand) ** 2) / sigma**2)
    crit = float(FisherF(df1, df2).quantile(1 - alpha))
    power = alpha if ncp == 0 else float(NoncentralF(df1, df2, ncp).sf(crit))
    return AnalyticPower(_clip(power), "noncentral-f")


def power_correlation(n: int, rho: float, rho0: float = 0.0, alpha: float = 0.05) -> AnalyticPower:
    """Fisher-z approximation to the power of a correlation test."""
    _alpha(alpha)
    if not (-1 < rho < 1 and -1 < rho0 < 1) or n < 4:
        raise ParameterError("need |rho|, |rho0| < 1 and n >= 4")
    shift = abs(math.atanh(rho) - math.atanh(rho0)) * math.sqrt(n - 3)
    return AnalyticPower(_clip(_normal_power(shift, alpha)), "fisher-z")


ORACLES = {
    "z-one-sample": power_z_one_sample,
    "z-two-sample": power_z_two_sample,
    "t-one-sample": power_t_one_sample,
    "t-two-sample-pooled": power_t_two_sample_pooled,
    "chisq-gof": power_chisq_gof,
    "anova-fixed": power_anova_fixed,
    "correlation": power_correlation,
}


def for_scenario(s, n: int, alpha: float = 0.05) -> AnalyticPower:
    """Analytic power for a catalog scenario, when one exists."""
    p = s.params
    if s.id == "z-one-sample":
        return power_z_one_sample(n, p["delta"], p["sigma"], alpha)
    if s.id == "t-one-sample":
        return power_t_one_sample(n, p["delta"], p["sigma"], alpha)
    if s.id == "z-two-sample":
        return power_z_two_sample(n, s.scaled(n, "m"), p["delta"], p["sigma_x"], p["sigma_y"], alpha)
    if s.id == "t-pooled":
        return power_t_two_sample_pooled(n, s.scaled(n, "m"), p["delta"], p["sigma"], alpha)
    if s.id == "gof-multinomial":
        return power_chisq_gof(n, p["probs0"], p["probs"], alpha)
    if s.id == "anova-oneway-fixed":
        means = [p["mu"], p["mu"] + p["a2"], p["mu"] + p["a3"]]
        return power_anova_fixed(means, p["sigma"], [n, s.scaled(n, "n2"), s.scaled(n, "n3")], alpha)
    if s.id in ("cor-rho0-zero", "cor-rho0-nonzero"):
        return power_correlation(n, p["rho"], p["rho0"], alpha)
    raise ParameterError(f"no analytic power for scenario {s.id!r}")


def has_oracle(s) -> bool:
    return s.id in (
        "z-one-sample", "t-one-sample", "z-two-sample", "t-pooled",
        "gof-multinomial", "anova-oneway-fixed", "cor-rho0-zero", "cor-rho0-nonzero",
    )
